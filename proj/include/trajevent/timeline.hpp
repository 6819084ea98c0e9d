#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "trajevent/model.hpp"
#include "trajevent/trajectory.hpp"

namespace trajevent {

// Per-frame class probabilities over one segment of a match. Row t holds
// the model output for the window centered on frame `start + t`.
struct ProbabilityTimeline {
  std::string match_id;
  long start = 0;
  long end = 0;  // exclusive
  std::vector<std::array<double, kNumClasses>> rows;

  long frames() const { return end - start; }
};

// Runs the model over every frame of [start, end). Edge frames use
// zero-padded windows. Frames whose window has no ball at all yield a
// background-certain row; the count of such rows is reported through
// `no_ball_rows` when given.
ProbabilityTimeline infer_timeline(const Model& model,
                                   const MatchTrajectories& match, long start,
                                   long end, const WindowSpec& spec,
                                   size_t workers = 1,
                                   size_t* no_ball_rows = nullptr);

void save_timeline_csv(const ProbabilityTimeline& tl,
                       const std::filesystem::path& file);
ProbabilityTimeline load_timeline_csv(const std::filesystem::path& file);

}  // namespace trajevent
