#include "trajevent/metrics.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "trajevent/common.hpp"

namespace trajevent {

EvaluationReport evaluate_timelines(
    const std::vector<ProbabilityTimeline>& timelines,
    const std::vector<SegmentTruth>& truths, const DetectionConfig& config) {
  if (timelines.size() != truths.size())
    throw ContractError("evaluate_timelines: timelines and truths differ in length");
  std::array<MatchingResult, 3> pooled;
  for (size_t i = 0; i < timelines.size(); ++i) {
    const std::vector<Detection> detections = detect(timelines[i], config);
    for (int ci = 1; ci < kNumClasses; ++ci) {
      const auto cls = static_cast<EventClass>(ci);
      std::vector<long> det_frames;
      for (const auto& d : detections)
        if (d.cls == cls) det_frames.push_back(d.frame);
      std::vector<long> truth_frames;
      for (const auto& l : truths[i].labels)
        if (l.cls == cls) truth_frames.push_back(l.frame);
      MatchingResult r = match_events(det_frames, truth_frames, config.w_eval);
      auto& acc = pooled[ci - 1];
      acc.tp.insert(acc.tp.end(), r.tp.begin(), r.tp.end());
      acc.fp_frames.insert(acc.fp_frames.end(), r.fp_frames.begin(),
                           r.fp_frames.end());
      acc.fn_frames.insert(acc.fn_frames.end(), r.fn_frames.begin(),
                           r.fn_frames.end());
    }
  }
  EvaluationReport report;
  report.segments = static_cast<long>(timelines.size());
  for (int ci = 0; ci < 3; ++ci)
    report.per_class[ci] = compute_metrics(pooled[ci], config.fps);
  return report;
}

EvaluationReport evaluate_segments(const Model& model, const Dataset& matches,
                                   const DetectionConfig& config,
                                   long segment_length, size_t workers) {
  if (segment_length <= 0)
    throw ConfigError("evaluate: segment_length must be positive");
  std::vector<ProbabilityTimeline> timelines;
  std::vector<SegmentTruth> truths;
  const WindowSpec spec{model.config().T, model.config().K, 0};
  for (const auto& lm : matches) {
    for (long start = 0; start < lm.traj.frame_count;
         start += segment_length) {
      const long end = std::min(lm.traj.frame_count, start + segment_length);
      timelines.push_back(
          infer_timeline(model, lm.traj, start, end, spec, workers));
      SegmentTruth truth;
      for (const auto& l : lm.labels)
        if (l.frame >= start && l.frame < end) truth.labels.push_back(l);
      truths.push_back(std::move(truth));
    }
  }
  return evaluate_timelines(timelines, truths, config);
}

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v.has_value() ? format_double(*v) : std::string();
}

void write_metrics_rows(std::ostream& out, const std::string& prefix,
                        const EvaluationReport& report) {
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto& m = report.per_class[ci - 1];
    out << prefix << event_class_name(static_cast<EventClass>(ci)) << ','
        << format_double(m.precision) << ',' << format_double(m.recall) << ','
        << format_double(m.f_score) << ',' << opt_str(m.td_p50) << ','
        << opt_str(m.td_p95) << '\n';
  }
}

}  // namespace

void save_metrics_csv(const EvaluationReport& report,
                      const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write metrics " + file.string());
  out << "class,precision,recall,f_score,td_p50,td_p95\n";
  write_metrics_rows(out, "", report);
}

EvaluationReport load_metrics_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open metrics " + file.string());
  EvaluationReport report;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "class,precision,recall,f_score,td_p50,td_p95")
        throw DataError(file.string() + ":1: unexpected metrics header");
      continue;
    }
    std::stringstream ss(line);
    std::string cls, tok;
    std::getline(ss, cls, ',');
    const int ci = static_cast<int>(event_class_from_name(cls)) - 1;
    auto& m = report.per_class[ci];
    std::getline(ss, tok, ',');
    m.precision = std::stod(tok);
    std::getline(ss, tok, ',');
    m.recall = std::stod(tok);
    std::getline(ss, tok, ',');
    m.f_score = std::stod(tok);
    if (std::getline(ss, tok, ',') && !tok.empty()) m.td_p50 = std::stod(tok);
    if (std::getline(ss, tok, ',') && !tok.empty()) m.td_p95 = std::stod(tok);
  }
  return report;
}

std::string metrics_table(
    const std::vector<std::pair<std::string, EvaluationReport>>& models) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "Model" << std::setw(12) << "Event"
      << std::right << std::setw(10) << "Precision" << std::setw(8) << "Recall"
      << std::setw(9) << "F-Score" << std::setw(8) << "TD@0.5" << std::setw(9)
      << "TD@0.95" << '\n';
  out << std::string(74, '-') << '\n';
  auto cell = [](const std::optional<double>& v) {
    if (!v.has_value()) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *v;
    return s.str();
  };
  for (const auto& [name, report] : models) {
    for (int ci = 1; ci < kNumClasses; ++ci) {
      const auto& m = report.per_class[ci - 1];
      std::ostringstream p, r, f;
      p << std::fixed << std::setprecision(2) << m.precision;
      r << std::fixed << std::setprecision(2) << m.recall;
      f << std::fixed << std::setprecision(2) << m.f_score;
      out << std::left << std::setw(18) << (ci == 1 ? name : "")
          << std::setw(12) << event_class_name(static_cast<EventClass>(ci))
          << std::right << std::setw(10) << p.str() << std::setw(8) << r.str()
          << std::setw(9) << f.str() << std::setw(8) << cell(m.td_p50)
          << std::setw(9) << cell(m.td_p95) << '\n';
    }
    out << std::string(74, '-') << '\n';
  }
  return out.str();
}

void save_report_csv(
    const std::vector<std::pair<std::string, EvaluationReport>>& models,
    const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write report " + file.string());
  out << "model,class,precision,recall,f_score,td_p50,td_p95\n";
  for (const auto& [name, report] : models)
    write_metrics_rows(out, name + ",", report);
}

}  // namespace trajevent
