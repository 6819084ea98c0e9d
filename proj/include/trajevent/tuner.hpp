#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "trajevent/metrics.hpp"

namespace trajevent {

struct GridSpec {
  double tau_min = 0.30;
  double tau_max = 0.98;
  double tau_step = 0.02;
  long w_min = 3;
  long w_max = 59;
  long w_step = 2;

  std::vector<double> taus() const;
  std::vector<long> ws() const;
  void validate() const;
};

struct ClassTuning {
  double tau = 0.5;
  long w_nms = 51;
  double f_score = 0.0;
  bool tunable = true;  // false when validation had no events of this class
};

struct TunedConfig {
  std::array<ClassTuning, 3> per_class{};  // pass, reception, shot
  long w_eval = 51;

  DetectionConfig to_detection_config(double fps) const;
};

// Exhaustive per-class grid search maximizing the pooled F-score over the
// validation timelines. Inference is never re-run: the timelines are the
// cache. Ties break toward higher tau, then smaller w_nms. A class with no
// validation ground truth is flagged untunable and gets tau = 0.5,
// w_nms = w_eval.
TunedConfig tune(const std::vector<ProbabilityTimeline>& timelines,
                 const std::vector<SegmentTruth>& truths, const GridSpec& grid,
                 long w_eval, double fps);

void save_tuned_json(const TunedConfig& tuned,
                     const std::filesystem::path& file);
TunedConfig load_tuned_json(const std::filesystem::path& file);

}  // namespace trajevent
