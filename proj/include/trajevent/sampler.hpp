#pragma once

#include <cstdint>
#include <vector>

#include "trajevent/common.hpp"
#include "trajevent/trajectory.hpp"

namespace trajevent {

struct LabeledMatch {
  MatchTrajectories traj;
  std::vector<EventLabel> labels;
};

using Dataset = std::vector<LabeledMatch>;

struct TrainConfig {
  size_t batch_size = 32;
  double learning_rate = 1e-3;
  size_t max_epochs = 10;
  double background_ratio = 0.5;  // fraction of background windows per batch
  long jitter = 2;                // event-center augmentation, +- frames
  uint64_t seed = 1;
  size_t steps_per_epoch = 0;     // 0 derives from dataset size
  size_t val_windows = 256;

  void validate() const;
};

struct Sample {
  WindowTensor window;
  int target = kBackground;
};

// Draws training windows: event windows centered on a label frame (with
// jitter), background windows centered where no event of any class falls
// within (T-1)/2 frames. Matches must be normalized.
class WindowSampler {
 public:
  WindowSampler(const Dataset& data, long T, long K);

  std::vector<Sample> sample_batch(size_t n, const TrainConfig& cfg,
                                   Rng& rng) const;

  size_t label_count() const { return labels_.size(); }
  size_t background_count() const { return background_.size(); }

 private:
  Sample draw_event(const TrainConfig& cfg, Rng& rng) const;
  Sample draw_background(Rng& rng) const;

  const Dataset* data_;
  long t_ = 51;
  long k_ = 5;
  struct LabelRef {
    size_t match;
    EventLabel label;
  };
  std::vector<LabelRef> labels_;
  std::vector<std::pair<size_t, long>> background_;  // (match, center)
};

}  // namespace trajevent
