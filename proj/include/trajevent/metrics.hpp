#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "trajevent/matching.hpp"
#include "trajevent/sampler.hpp"
#include "trajevent/timeline.hpp"

namespace trajevent {

struct EvaluationReport {
  std::array<ClassMetrics, 3> per_class{};  // pass, reception, shot
  long segments = 0;

  const ClassMetrics& for_class(EventClass c) const {
    return per_class[static_cast<int>(c) - 1];
  }
};

// Ground truth restricted to one timeline's segment, same class split as the
// detections the timeline will produce.
struct SegmentTruth {
  std::vector<EventLabel> labels;  // frames within [timeline.start, timeline.end)
};

// Micro-averaged evaluation: TP/FP/FN counts and TD samples are pooled over
// all segments per class before ratios and percentiles are computed.
EvaluationReport evaluate_timelines(
    const std::vector<ProbabilityTimeline>& timelines,
    const std::vector<SegmentTruth>& truths, const DetectionConfig& config);

// Slices each match into consecutive segments of `segment_length` frames
// (final remainder kept), runs inference per segment, and evaluates.
EvaluationReport evaluate_segments(const Model& model, const Dataset& matches,
                                   const DetectionConfig& config,
                                   long segment_length, size_t workers = 1);

void save_metrics_csv(const EvaluationReport& report,
                      const std::filesystem::path& file);
EvaluationReport load_metrics_csv(const std::filesystem::path& file);

// Aligned per-model comparison table, one section per model.
std::string metrics_table(
    const std::vector<std::pair<std::string, EvaluationReport>>& models);

void save_report_csv(
    const std::vector<std::pair<std::string, EvaluationReport>>& models,
    const std::filesystem::path& file);

}  // namespace trajevent
