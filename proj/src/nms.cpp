#include "trajevent/nms.hpp"

#include <algorithm>
#include <fstream>

#include "trajevent/common.hpp"

namespace trajevent {

void DetectionConfig::validate() const {
  for (const auto& p : per_class) {
    if (p.tau <= 0.0 || p.tau >= 1.0)
      throw ConfigError("detection: tau must lie in (0, 1)");
    if (p.w_nms < 3 || p.w_nms % 2 == 0)
      throw ConfigError("detection: w_nms must be odd and >= 3");
  }
  if (w_eval <= 0 || w_eval % 2 == 0)
    throw ConfigError("detection: w_eval must be odd and positive");
  if (fps <= 0.0) throw ConfigError("detection: fps must be positive");
}

std::vector<Detection> detect_class(const ProbabilityTimeline& timeline,
                                    EventClass cls, double tau, long w_nms) {
  const int ci = static_cast<int>(cls);
  struct Candidate {
    long frame;
    double p;
  };
  std::vector<Candidate> candidates;
  for (long t = 0; t < timeline.frames(); ++t) {
    const double p = timeline.rows[t][ci];
    if (p >= tau) candidates.push_back({timeline.start + t, p});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.p != b.p) return a.p > b.p;
              return a.frame < b.frame;
            });
  std::vector<Detection> accepted;
  for (const auto& c : candidates) {
    bool suppressed = false;
    for (const auto& a : accepted) {
      if (std::labs(c.frame - a.frame) < w_nms) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) accepted.push_back({cls, c.frame, c.p});
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Detection& a, const Detection& b) {
              return a.frame < b.frame;
            });
  return accepted;
}

std::vector<Detection> detect(const ProbabilityTimeline& timeline,
                              const DetectionConfig& config) {
  config.validate();
  std::vector<Detection> out;
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto cls = static_cast<EventClass>(ci);
    const auto& params = config.for_class(cls);
    const std::vector<Detection> accepted =
        detect_class(timeline, cls, params.tau, params.w_nms);
    out.insert(out.end(), accepted.begin(), accepted.end());
  }
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return static_cast<int>(a.cls) < static_cast<int>(b.cls);
  });
  return out;
}

void save_detections_csv(const std::vector<Detection>& detections,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write detections " + file.string());
  out << "class,frame,confidence\n";
  for (const auto& d : detections)
    out << event_class_name(d.cls) << ',' << d.frame << ','
        << format_double(d.confidence) << '\n';
}

}  // namespace trajevent
