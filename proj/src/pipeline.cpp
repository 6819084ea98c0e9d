#include "trajevent/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "trajevent/checkpoint.hpp"
#include "trajevent/common.hpp"
#include "trajevent/trajectory_io.hpp"

namespace trajevent {

namespace fs = std::filesystem;
using nlohmann::json;

void Logger::info(
    const std::string& event,
    const std::vector<std::pair<std::string, std::string>>& fields) const {
  if (out_ == nullptr) return;
  json line;
  line["level"] = "info";
  line["event"] = event;
  for (const auto& [k, v] : fields) line[k] = v;
  *out_ << line.dump() << '\n';
}

namespace {

std::string match_name(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "match_%02zu", i);
  return buf;
}

constexpr const char* kSplitFormat = "trajevent-split-v1";
constexpr const char* kMetaFormat = "trajevent-model-meta-v1";

json model_config_json(const ModelConfig& m) {
  return {{"variant", variant_name(m.variant)},
          {"T", m.T},
          {"K", m.K},
          {"feature_dim", m.feature_dim},
          {"kernel", m.kernel},
          {"dilations", m.dilations},
          {"heads", m.heads},
          {"encoder_layers", m.encoder_layers}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  m.variant = variant_from_name(j.at("variant").get<std::string>());
  m.T = j.at("T").get<long>();
  m.K = j.at("K").get<long>();
  m.feature_dim = j.at("feature_dim").get<size_t>();
  m.kernel = j.at("kernel").get<size_t>();
  m.dilations = j.at("dilations").get<std::vector<size_t>>();
  m.heads = j.at("heads").get<size_t>();
  m.encoder_layers = j.at("encoder_layers").get<size_t>();
  return m;
}

}  // namespace

std::vector<std::string> split_ids(const fs::path& data_dir,
                                   const std::string& which) {
  const fs::path file = data_dir / "split.json";
  std::ifstream in(file);
  if (!in) throw DataError("cannot open split file " + file.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw DataError("split file " + file.string() + ": " + e.what());
  }
  if (!root.contains("format") || root["format"] != kSplitFormat)
    throw DataError("split file " + file.string() + ": bad format tag");
  if (!root.contains(which))
    throw DataError("split file has no '" + which + "' section");
  return root.at(which).get<std::vector<std::string>>();
}

Dataset load_dataset(const RunConfig& cfg, const fs::path& data_dir,
                     const std::vector<std::string>& ids) {
  Dataset out;
  for (const auto& id : ids) {
    auto [match, labels] = load_match(data_dir / (id + ".jsonl"),
                                      data_dir / (id + "_labels.csv"));
    if (cfg.occlusion_enabled) {
      // Match index is encoded in the id so the occlusion stream is stable
      // whatever subset of matches is loaded.
      size_t idx = 0;
      for (char c : id)
        if (c >= '0' && c <= '9') idx = idx * 10 + (c - '0');
      match = occlude(match, cfg.occlusion, cfg.occlusion_seed(idx));
    }
    out.push_back({normalize(match), std::move(labels)});
  }
  return out;
}

void run_simulate(const RunConfig& cfg, const fs::path& out_dir,
                  const Logger& log) {
  cfg.validate();
  if (cfg.split.train + cfg.split.val + cfg.split.test != cfg.sim_matches)
    throw ConfigError("split counts must sum to sim.matches");
  fs::create_directories(out_dir);
  for (size_t i = 0; i < cfg.sim_matches; ++i) {
    SimConfig sc = cfg.sim;
    sc.seed = cfg.sim_seed(i);
    SimMatch match = generate(sc);
    const std::string id = match_name(i);
    match.traj.match_id = id;
    save_trajectories(match.traj, out_dir / (id + ".jsonl"));
    save_labels(match.labels, out_dir / (id + "_labels.csv"));
    log.info("simulated", {{"match", id},
                           {"labels", std::to_string(match.labels.size())}});
  }
  const MatchSplit split =
      train_test_split(cfg.sim_matches, cfg.split, cfg.split_seed());
  auto names = [&](const std::vector<size_t>& idx) {
    std::vector<std::string> out_names;
    for (size_t i : idx) out_names.push_back(match_name(i));
    return out_names;
  };
  json root;
  root["format"] = kSplitFormat;
  root["train"] = names(split.train);
  root["val"] = names(split.val);
  root["test"] = names(split.test);
  std::ofstream out(out_dir / "split.json", std::ios::binary);
  if (!out) throw DataError("cannot write split.json");
  out << root.dump(2) << '\n';
  log.info("split", {{"train", std::to_string(split.train.size())},
                     {"val", std::to_string(split.val.size())},
                     {"test", std::to_string(split.test.size())}});
}

TrainResult run_train(const RunConfig& cfg, const fs::path& data_dir,
                      const fs::path& out_dir, const Logger& log) {
  cfg.validate();
  fs::create_directories(out_dir);
  const Dataset train_set =
      load_dataset(cfg, data_dir, split_ids(data_dir, "train"));
  const Dataset val_set = load_dataset(cfg, data_dir, split_ids(data_dir, "val"));
  log.info("dataset", {{"train_matches", std::to_string(train_set.size())},
                       {"val_matches", std::to_string(val_set.size())}});

  Model model(cfg.resolved_model(), cfg.model_init_seed());
  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seed();
  const TrainResult result =
      train(model, train_set, val_set, tc, cfg.resolved_workers());

  save_params(model.params(), out_dir / "model.ckpt.json");
  json meta;
  meta["format"] = kMetaFormat;
  meta["seed"] = cfg.seed;
  meta["model"] = model_config_json(model.config());
  meta["train"] = {{"batch_size", tc.batch_size},
                   {"learning_rate", tc.learning_rate},
                   {"max_epochs", tc.max_epochs},
                   {"background_ratio", tc.background_ratio},
                   {"jitter", tc.jitter},
                   {"steps_per_epoch", tc.steps_per_epoch},
                   {"val_windows", tc.val_windows},
                   {"seed", tc.seed}};
  meta["occlusion"] = {{"enabled", cfg.occlusion_enabled},
                       {"radius_m", cfg.occlusion.radius_m},
                       {"ball_retention", cfg.occlusion.ball_retention}};
  std::ofstream meta_out(out_dir / "model.meta.json", std::ios::binary);
  if (!meta_out) throw DataError("cannot write model.meta.json");
  meta_out << meta.dump(2) << '\n';

  std::ofstream log_out(out_dir / "train_log.csv", std::ios::binary);
  if (!log_out) throw DataError("cannot write train_log.csv");
  log_out << "epoch,train_loss,val_f\n";
  for (const auto& e : result.log)
    log_out << e.epoch << ',' << format_double(e.train_loss) << ','
            << format_double(e.val_f) << '\n';

  log.info("trained",
           {{"epochs", std::to_string(result.log.size())},
            {"best_epoch", std::to_string(result.best_epoch)},
            {"best_val_f", format_double(result.best_val_f)}});
  return result;
}

Model load_model(const fs::path& model_dir) {
  const fs::path meta_file = model_dir / "model.meta.json";
  const fs::path ckpt_file = model_dir / "model.ckpt.json";
  if (!fs::exists(meta_file) || !fs::exists(ckpt_file))
    throw DataError("missing checkpoint: expected " + ckpt_file.string() +
                    " and " + meta_file.string());
  std::ifstream in(meta_file);
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw DataError("model meta " + meta_file.string() + ": " + e.what());
  }
  if (!meta.contains("format") || meta["format"] != kMetaFormat)
    throw DataError("model meta " + meta_file.string() + ": bad format tag");
  Model model(model_config_from_json(meta.at("model")), 0);
  model.load_values(load_params(ckpt_file));
  return model;
}

void run_infer(const RunConfig& cfg, const fs::path& data_dir,
               const fs::path& model_dir, const std::vector<std::string>& ids,
               const fs::path& out_dir, const Logger& log) {
  fs::create_directories(out_dir);
  const Model model = load_model(model_dir);
  const WindowSpec spec{model.config().T, model.config().K, 0};
  const Dataset data = load_dataset(cfg, data_dir, ids);
  for (const auto& lm : data) {
    size_t no_ball = 0;
    const ProbabilityTimeline tl =
        infer_timeline(model, lm.traj, 0, lm.traj.frame_count, spec,
                       cfg.resolved_workers(), &no_ball);
    save_timeline_csv(tl, out_dir / (lm.traj.match_id + "_timeline.csv"));
    log.info("timeline", {{"match", lm.traj.match_id},
                          {"frames", std::to_string(tl.frames())},
                          {"no_ball_rows", std::to_string(no_ball)}});
  }
}

TunedConfig run_tune(const RunConfig& cfg, const fs::path& data_dir,
                     const fs::path& model_dir, const fs::path& out_file,
                     const Logger& log) {
  cfg.validate();
  const Model model = load_model(model_dir);
  const WindowSpec spec{model.config().T, model.config().K, 0};
  const Dataset val_set = load_dataset(cfg, data_dir, split_ids(data_dir, "val"));

  // Validation segments: fixed-length slices at seeded random offsets,
  // inferred once and reused for every grid point.
  Rng rng(cfg.tune_seed());
  std::vector<ProbabilityTimeline> timelines;
  std::vector<SegmentTruth> truths;
  for (const auto& lm : val_set) {
    const long seg = std::min<long>(cfg.tune_segment_length, lm.traj.frame_count);
    for (size_t s = 0; s < cfg.tune_segments_per_match; ++s) {
      const long max_start = lm.traj.frame_count - seg;
      const long start = max_start > 0 ? rng.uniform_int(0, max_start) : 0;
      timelines.push_back(infer_timeline(model, lm.traj, start, start + seg,
                                         spec, cfg.resolved_workers()));
      SegmentTruth truth;
      for (const auto& l : lm.labels)
        if (l.frame >= start && l.frame < start + seg)
          truth.labels.push_back(l);
      truths.push_back(std::move(truth));
    }
  }

  const double fps = val_set.empty() ? 30.0 : val_set.front().traj.fps;
  const TunedConfig tuned = tune(timelines, truths, cfg.grid, cfg.w_eval, fps);
  save_tuned_json(tuned, out_file);
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto& t = tuned.per_class[ci - 1];
    log.info("tuned", {{"class", event_class_name(static_cast<EventClass>(ci))},
                       {"tau", format_double(t.tau)},
                       {"w_nms", std::to_string(t.w_nms)},
                       {"f_score", format_double(t.f_score)},
                       {"tunable", t.tunable ? "true" : "false"}});
  }
  return tuned;
}

EvaluationReport run_evaluate(const RunConfig& cfg, const fs::path& data_dir,
                              const fs::path& model_dir,
                              const fs::path& tuned_file,
                              const fs::path& out_csv, const Logger& log) {
  cfg.validate();
  const Model model = load_model(model_dir);
  const Dataset test_set =
      load_dataset(cfg, data_dir, split_ids(data_dir, "test"));
  const TunedConfig tuned = load_tuned_json(tuned_file);
  const double fps = test_set.empty() ? 30.0 : test_set.front().traj.fps;
  const DetectionConfig det = tuned.to_detection_config(fps);
  const EvaluationReport report = evaluate_segments(
      model, test_set, det, cfg.eval_segment_length, cfg.resolved_workers());
  save_metrics_csv(report, out_csv);
  fs::path table_file = out_csv;
  table_file.replace_extension(".txt");
  std::ofstream table(table_file, std::ios::binary);
  if (!table) throw DataError("cannot write " + table_file.string());
  table << metrics_table({{variant_name(model.config().variant), report}});
  for (int ci = 1; ci < kNumClasses; ++ci) {
    const auto& m = report.per_class[ci - 1];
    log.info("evaluated",
             {{"class", event_class_name(static_cast<EventClass>(ci))},
              {"precision", format_double(m.precision)},
              {"recall", format_double(m.recall)},
              {"f_score", format_double(m.f_score)}});
  }
  return report;
}

void run_report(const std::vector<std::pair<std::string, fs::path>>& inputs,
                const fs::path& out_csv, const Logger& log) {
  std::vector<std::pair<std::string, EvaluationReport>> models;
  for (const auto& [name, file] : inputs)
    models.emplace_back(name, load_metrics_csv(file));
  save_report_csv(models, out_csv);
  fs::path table_file = out_csv;
  table_file.replace_extension(".txt");
  std::ofstream table(table_file, std::ios::binary);
  if (!table) throw DataError("cannot write " + table_file.string());
  table << metrics_table(models);
  log.info("report", {{"models", std::to_string(models.size())},
                      {"out", out_csv.string()}});
}

}  // namespace trajevent
