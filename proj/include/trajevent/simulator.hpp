#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trajevent/trajectory.hpp"

namespace trajevent {

struct SimKinematics {
  double max_player_speed = 7.0;   // m/s, chasing
  double roam_speed = 3.2;         // m/s, off-ball movement
  double dribble_speed = 4.5;      // m/s, ball carrier
  double velocity_relax = 0.3;     // s, first-order velocity smoothing
  double pass_speed_min = 8.0;
  double pass_speed_max = 16.0;
  double shot_speed_min = 18.0;
  double shot_speed_max = 28.0;
  double knock_speed_min = 5.0;    // loose touches stay below pass speeds
  double knock_speed_max = 7.0;
  double ball_drag = 0.35;         // 1/s exponential decay in flight
  double ball_attach_speed = 8.0;  // m/s, ball trailing the dribbler
  double control_radius = 1.2;     // m
  double shot_range = 30.0;        // m from the goal line
};

struct SimEventRates {
  double mean_dribble_seconds = 2.6;
  double min_dribble_seconds = 0.7;
  double max_dribble_seconds = 8.0;
  double shot_given_range = 0.085;  // per possession ending inside shot_range
  double knock_prob = 0.15;         // loose touch instead of a pass
  double bad_pass_prob = 0.12;      // pass that anyone may recover
};

struct SimConfig {
  uint64_t seed = 1;
  double duration_minutes = 10.0;
  double fps = 30.0;
  size_t players_per_team = 11;
  PitchSpec pitch{105.0, 68.0};
  SimKinematics kin;
  SimEventRates rates;

  void validate() const;
};

struct PossessionSpan {
  std::string player_id;
  long start_frame = 0;
};

struct SimMatch {
  MatchTrajectories traj;  // raw meter coordinates, everything present
  std::vector<EventLabel> labels;
  std::vector<PossessionSpan> possession;
};

// Deterministic under the config seed: identical configs produce
// bit-identical matches.
SimMatch generate(const SimConfig& config);

struct SplitCounts {
  size_t train = 0;
  size_t val = 0;
  size_t test = 0;
};

struct MatchSplit {
  std::vector<size_t> train, val, test;  // disjoint indices, union = all
};

MatchSplit train_test_split(size_t match_count, const SplitCounts& counts,
                            uint64_t seed);

}  // namespace trajevent
