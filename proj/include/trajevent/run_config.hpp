#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "trajevent/model.hpp"
#include "trajevent/sampler.hpp"
#include "trajevent/simulator.hpp"
#include "trajevent/tuner.hpp"

namespace trajevent {

// Merged configuration for a reproducible run. One global seed derives every
// module seed; flags override file values which override defaults.
struct RunConfig {
  uint64_t seed = 1;

  long window_T = 51;
  long window_K = 5;

  ModelConfig model;    // T and K are filled from the window section
  TrainConfig train;    // seed is derived from the global seed

  long w_eval = 51;
  long eval_segment_length = 15000;

  GridSpec grid;
  long tune_segment_length = 500;
  size_t tune_segments_per_match = 8;

  size_t sim_matches = 14;
  SimConfig sim;
  SplitCounts split{10, 2, 2};

  bool occlusion_enabled = false;
  OcclusionPolicy occlusion;

  size_t workers = 0;  // 0 = all hardware threads

  void validate() const;
  ModelConfig resolved_model() const;
  size_t resolved_workers() const;

  // Derived per-module seeds.
  uint64_t sim_seed(size_t match_index) const;
  uint64_t split_seed() const;
  uint64_t train_seed() const;
  uint64_t tune_seed() const;
  uint64_t occlusion_seed(size_t match_index) const;
  uint64_t model_init_seed() const;
};

RunConfig load_run_config(const std::filesystem::path& file);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& file);

}  // namespace trajevent
