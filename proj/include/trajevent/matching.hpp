#pragma once

#include <optional>
#include <vector>

#include "trajevent/nms.hpp"
#include "trajevent/trajectory.hpp"

namespace trajevent {

// Outcome of matching one class's detections against ground truth. Every
// detection lands in exactly one of TP/FP and every ground truth in exactly
// one of TP/FN.
struct MatchingResult {
  struct Pair {
    long detection_frame;
    long truth_frame;
    long delta;  // |detection - truth|
  };
  std::vector<Pair> tp;
  std::vector<long> fp_frames;  // unmatched detections
  std::vector<long> fn_frames;  // unmatched ground truths
};

// Greedy assignment in ascending |delta| (ties: earlier detection frame,
// then earlier ground-truth frame). A pair is eligible when
// |detection - truth| <= (w_eval - 1) / 2.
MatchingResult match_events(const std::vector<long>& detection_frames,
                            const std::vector<long>& truth_frames,
                            long w_eval);

struct ClassMetrics {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  std::optional<double> td_p50;  // seconds; absent when there are no TPs
  std::optional<double> td_p95;
};

// Ratios from pooled counts; temporal-distance percentiles (nearest-rank,
// no interpolation) over |delta| / fps for the TP pairs.
ClassMetrics compute_metrics(const MatchingResult& result, double fps);

// Nearest-rank percentile of an unsorted sample set.
double nearest_rank_percentile(std::vector<double> samples, double p);

}  // namespace trajevent
