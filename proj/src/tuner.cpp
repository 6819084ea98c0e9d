#include "trajevent/tuner.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "trajevent/common.hpp"

namespace trajevent {

using nlohmann::json;

void GridSpec::validate() const {
  if (tau_step <= 0.0 || w_step <= 0)
    throw ConfigError("grid: steps must be positive");
  if (tau_min > tau_max || w_min > w_max)
    throw ConfigError("grid: ranges must be non-empty");
  if (tau_min <= 0.0 || tau_max >= 1.0)
    throw ConfigError("grid: tau range must lie in (0, 1)");
}

std::vector<double> GridSpec::taus() const {
  validate();
  const long count =
      static_cast<long>(std::round((tau_max - tau_min) / tau_step)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (long i = 0; i < count; ++i)
    out.push_back(tau_min + static_cast<double>(i) * tau_step);
  return out;
}

std::vector<long> GridSpec::ws() const {
  validate();
  std::vector<long> out;
  for (long w = w_min; w <= w_max; w += w_step) out.push_back(w);
  return out;
}

DetectionConfig TunedConfig::to_detection_config(double fps) const {
  DetectionConfig cfg;
  for (int i = 0; i < 3; ++i) {
    cfg.per_class[i].tau = per_class[i].tau;
    cfg.per_class[i].w_nms = per_class[i].w_nms;
  }
  cfg.w_eval = w_eval;
  cfg.fps = fps;
  return cfg;
}

namespace {

// F-score of one class at one grid point, pooled over all timelines.
double grid_point_f(const std::vector<ProbabilityTimeline>& timelines,
                    const std::vector<SegmentTruth>& truths, EventClass cls,
                    double tau, long w_nms, long w_eval) {
  const int ci = static_cast<int>(cls);
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < timelines.size(); ++i) {
    std::vector<long> det_frames;
    for (const Detection& d : detect_class(timelines[i], cls, tau, w_nms))
      det_frames.push_back(d.frame);
    std::vector<long> truth_frames;
    for (const auto& l : truths[i].labels)
      if (static_cast<int>(l.cls) == ci) truth_frames.push_back(l.frame);
    const MatchingResult r = match_events(det_frames, truth_frames, w_eval);
    tp += static_cast<long>(r.tp.size());
    fp += static_cast<long>(r.fp_frames.size());
    fn += static_cast<long>(r.fn_frames.size());
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

}  // namespace

TunedConfig tune(const std::vector<ProbabilityTimeline>& timelines,
                 const std::vector<SegmentTruth>& truths, const GridSpec& grid,
                 long w_eval, double fps) {
  if (fps <= 0.0) throw ConfigError("tune: fps must be positive");
  if (timelines.size() != truths.size())
    throw ContractError("tune: timelines and truths differ in length");
  const std::vector<double> taus = grid.taus();
  const std::vector<long> ws = grid.ws();

  TunedConfig tuned;
  tuned.w_eval = w_eval;
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto cls = static_cast<EventClass>(ci);
    auto& slot = tuned.per_class[ci - 1];

    size_t truth_count = 0;
    for (const auto& t : truths)
      for (const auto& l : t.labels)
        if (static_cast<int>(l.cls) == ci) ++truth_count;
    if (truth_count == 0) {
      slot = {0.5, w_eval, 0.0, false};
      continue;
    }

    bool first = true;
    for (double tau : taus) {
      for (long w : ws) {
        const double f = grid_point_f(timelines, truths, cls, tau, w, w_eval);
        // Maximize F; ties prefer the higher tau, then the smaller window.
        const bool better =
            first || f > slot.f_score ||
            (f == slot.f_score &&
             (tau > slot.tau || (tau == slot.tau && w < slot.w_nms)));
        if (better) {
          slot = {tau, w, f, true};
          first = false;
        }
      }
    }
  }
  return tuned;
}

void save_tuned_json(const TunedConfig& tuned,
                     const std::filesystem::path& file) {
  json root;
  root["format"] = "trajevent-tuned-v1";
  root["w_eval"] = tuned.w_eval;
  json classes;
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto& t = tuned.per_class[ci - 1];
    json entry;
    entry["tau"] = t.tau;
    entry["w_nms"] = t.w_nms;
    entry["f_score"] = t.f_score;
    entry["tunable"] = t.tunable;
    classes[event_class_name(static_cast<EventClass>(ci))] = std::move(entry);
  }
  root["classes"] = std::move(classes);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write tuned config " + file.string());
  out << root.dump(2) << '\n';
}

TunedConfig load_tuned_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open tuned config " + file.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw DataError("tuned config " + file.string() + ": " + e.what());
  }
  if (!root.contains("format") || root["format"] != "trajevent-tuned-v1")
    throw DataError("tuned config " + file.string() + ": bad format tag");
  TunedConfig tuned;
  tuned.w_eval = root.at("w_eval").get<long>();
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto& entry =
        root.at("classes").at(event_class_name(static_cast<EventClass>(ci)));
    auto& t = tuned.per_class[ci - 1];
    t.tau = entry.at("tau").get<double>();
    t.w_nms = entry.at("w_nms").get<long>();
    t.f_score = entry.at("f_score").get<double>();
    t.tunable = entry.at("tunable").get<bool>();
  }
  return tuned;
}

}  // namespace trajevent
