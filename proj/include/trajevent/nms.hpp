#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "trajevent/timeline.hpp"
#include "trajevent/trajectory.hpp"

namespace trajevent {

struct Detection {
  EventClass cls = EventClass::pass;
  long frame = 0;
  double confidence = 0.0;
};

struct ClassDetectionParams {
  double tau = 0.5;   // probability threshold
  long w_nms = 51;    // minimum spacing between same-class detections
};

struct DetectionConfig {
  // Indexed pass, reception, shot.
  std::array<ClassDetectionParams, 3> per_class{};
  long w_eval = 51;
  double fps = 30.0;

  ClassDetectionParams& for_class(EventClass c) {
    return per_class[static_cast<int>(c) - 1];
  }
  const ClassDetectionParams& for_class(EventClass c) const {
    return per_class[static_cast<int>(c) - 1];
  }
  void validate() const;
};

// Threshold + greedy non-maximum suppression, applied per class: candidates
// with p >= tau are accepted in descending probability (ties to the earlier
// frame) unless an accepted detection of the same class lies strictly within
// w_nms frames. Output is sorted by frame. Pure function.
std::vector<Detection> detect(const ProbabilityTimeline& timeline,
                              const DetectionConfig& config);

// Single-class path shared by detect() and the grid-search tuner.
std::vector<Detection> detect_class(const ProbabilityTimeline& timeline,
                                    EventClass cls, double tau, long w_nms);

void save_detections_csv(const std::vector<Detection>& detections,
                         const std::filesystem::path& file);

}  // namespace trajevent
