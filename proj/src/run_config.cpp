#include "trajevent/run_config.hpp"

#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "trajevent/common.hpp"

namespace trajevent {

using nlohmann::json;

void RunConfig::validate() const {
  if (window_T <= 0 || window_T % 2 == 0)
    throw ConfigError("window.T must be odd and positive");
  if (window_K < 0) throw ConfigError("window.K must be >= 0");
  resolved_model().validate();
  train.validate();
  if (w_eval <= 0 || w_eval % 2 == 0)
    throw ConfigError("detection.w_eval must be odd and positive");
  if (eval_segment_length <= 0)
    throw ConfigError("detection.segment_length must be positive");
  grid.validate();
  if (tune_segment_length <= 0 || tune_segments_per_match == 0)
    throw ConfigError("tune: segment_length and segments_per_match must be positive");
  sim.validate();
  if (occlusion_enabled) {
    if (occlusion.radius_m < 0.0)
      throw ConfigError("occlusion.radius_m must be >= 0");
    if (occlusion.ball_retention < 0.0 || occlusion.ball_retention > 1.0)
      throw ConfigError("occlusion.ball_retention must be in [0, 1]");
  }
}

ModelConfig RunConfig::resolved_model() const {
  ModelConfig m = model;
  m.T = window_T;
  m.K = window_K;
  return m;
}

size_t RunConfig::resolved_workers() const {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

uint64_t RunConfig::sim_seed(size_t i) const { return derive_seed(seed, 1000 + i); }
uint64_t RunConfig::split_seed() const { return derive_seed(seed, 2000); }
uint64_t RunConfig::train_seed() const { return derive_seed(seed, 3000); }
uint64_t RunConfig::tune_seed() const { return derive_seed(seed, 4000); }
uint64_t RunConfig::occlusion_seed(size_t i) const {
  return derive_seed(seed, 5000 + i);
}
uint64_t RunConfig::model_init_seed() const { return derive_seed(seed, 6000); }

namespace {

void check_keys(const json& obj, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.contains(key))
      throw ConfigError("config: unknown key '" +
                        (section.empty() ? key : section + "." + key) + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: bad value for '") + key + "'");
  }
}

}  // namespace

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: expected a JSON object");
  check_keys(root, "",
             {"seed", "window", "model", "train", "detection", "grid", "tune",
              "sim", "split", "occlusion", "workers"});

  RunConfig cfg;
  read(root, "seed", cfg.seed);
  read(root, "workers", cfg.workers);

  if (root.contains("window")) {
    const auto& w = root["window"];
    check_keys(w, "window", {"T", "K"});
    read(w, "T", cfg.window_T);
    read(w, "K", cfg.window_K);
  }
  if (root.contains("model")) {
    const auto& m = root["model"];
    check_keys(m, "model",
               {"variant", "feature_dim", "kernel", "dilations", "heads",
                "encoder_layers"});
    if (m.contains("variant"))
      cfg.model.variant = variant_from_name(m.at("variant").get<std::string>());
    read(m, "feature_dim", cfg.model.feature_dim);
    read(m, "kernel", cfg.model.kernel);
    read(m, "dilations", cfg.model.dilations);
    read(m, "heads", cfg.model.heads);
    read(m, "encoder_layers", cfg.model.encoder_layers);
  }
  if (root.contains("train")) {
    const auto& t = root["train"];
    check_keys(t, "train",
               {"batch_size", "learning_rate", "max_epochs", "background_ratio",
                "jitter", "steps_per_epoch", "val_windows"});
    read(t, "batch_size", cfg.train.batch_size);
    read(t, "learning_rate", cfg.train.learning_rate);
    read(t, "max_epochs", cfg.train.max_epochs);
    read(t, "background_ratio", cfg.train.background_ratio);
    read(t, "jitter", cfg.train.jitter);
    read(t, "steps_per_epoch", cfg.train.steps_per_epoch);
    read(t, "val_windows", cfg.train.val_windows);
  }
  if (root.contains("detection")) {
    const auto& d = root["detection"];
    check_keys(d, "detection", {"w_eval", "segment_length"});
    read(d, "w_eval", cfg.w_eval);
    read(d, "segment_length", cfg.eval_segment_length);
  }
  if (root.contains("grid")) {
    const auto& g = root["grid"];
    check_keys(g, "grid",
               {"tau_min", "tau_max", "tau_step", "w_min", "w_max", "w_step"});
    read(g, "tau_min", cfg.grid.tau_min);
    read(g, "tau_max", cfg.grid.tau_max);
    read(g, "tau_step", cfg.grid.tau_step);
    read(g, "w_min", cfg.grid.w_min);
    read(g, "w_max", cfg.grid.w_max);
    read(g, "w_step", cfg.grid.w_step);
  }
  if (root.contains("tune")) {
    const auto& t = root["tune"];
    check_keys(t, "tune", {"segment_length", "segments_per_match"});
    read(t, "segment_length", cfg.tune_segment_length);
    read(t, "segments_per_match", cfg.tune_segments_per_match);
  }
  if (root.contains("sim")) {
    const auto& s = root["sim"];
    check_keys(s, "sim",
               {"matches", "duration_minutes", "fps", "players_per_team",
                "pitch_length", "pitch_width", "kinematics", "rates"});
    read(s, "matches", cfg.sim_matches);
    read(s, "duration_minutes", cfg.sim.duration_minutes);
    read(s, "fps", cfg.sim.fps);
    read(s, "players_per_team", cfg.sim.players_per_team);
    read(s, "pitch_length", cfg.sim.pitch.length);
    read(s, "pitch_width", cfg.sim.pitch.width);
    if (s.contains("kinematics")) {
      const auto& k = s["kinematics"];
      check_keys(k, "sim.kinematics",
                 {"max_player_speed", "roam_speed", "dribble_speed",
                  "velocity_relax", "pass_speed_min", "pass_speed_max",
                  "shot_speed_min", "shot_speed_max", "knock_speed_min",
                  "knock_speed_max", "ball_drag", "ball_attach_speed",
                  "control_radius", "shot_range"});
      read(k, "max_player_speed", cfg.sim.kin.max_player_speed);
      read(k, "roam_speed", cfg.sim.kin.roam_speed);
      read(k, "dribble_speed", cfg.sim.kin.dribble_speed);
      read(k, "velocity_relax", cfg.sim.kin.velocity_relax);
      read(k, "pass_speed_min", cfg.sim.kin.pass_speed_min);
      read(k, "pass_speed_max", cfg.sim.kin.pass_speed_max);
      read(k, "shot_speed_min", cfg.sim.kin.shot_speed_min);
      read(k, "shot_speed_max", cfg.sim.kin.shot_speed_max);
      read(k, "knock_speed_min", cfg.sim.kin.knock_speed_min);
      read(k, "knock_speed_max", cfg.sim.kin.knock_speed_max);
      read(k, "ball_drag", cfg.sim.kin.ball_drag);
      read(k, "ball_attach_speed", cfg.sim.kin.ball_attach_speed);
      read(k, "control_radius", cfg.sim.kin.control_radius);
      read(k, "shot_range", cfg.sim.kin.shot_range);
    }
    if (s.contains("rates")) {
      const auto& r = s["rates"];
      check_keys(r, "sim.rates",
                 {"mean_dribble_seconds", "min_dribble_seconds",
                  "max_dribble_seconds", "shot_given_range", "knock_prob",
                  "bad_pass_prob"});
      read(r, "mean_dribble_seconds", cfg.sim.rates.mean_dribble_seconds);
      read(r, "min_dribble_seconds", cfg.sim.rates.min_dribble_seconds);
      read(r, "max_dribble_seconds", cfg.sim.rates.max_dribble_seconds);
      read(r, "shot_given_range", cfg.sim.rates.shot_given_range);
      read(r, "knock_prob", cfg.sim.rates.knock_prob);
      read(r, "bad_pass_prob", cfg.sim.rates.bad_pass_prob);
    }
  }
  if (root.contains("split")) {
    const auto& s = root["split"];
    check_keys(s, "split", {"train", "val", "test"});
    read(s, "train", cfg.split.train);
    read(s, "val", cfg.split.val);
    read(s, "test", cfg.split.test);
  }
  if (root.contains("occlusion")) {
    const auto& o = root["occlusion"];
    check_keys(o, "occlusion", {"enabled", "radius_m", "ball_retention"});
    read(o, "enabled", cfg.occlusion_enabled);
    read(o, "radius_m", cfg.occlusion.radius_m);
    read(o, "ball_retention", cfg.occlusion.ball_retention);
  }
  cfg.validate();
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& file) {
  json root;
  root["seed"] = cfg.seed;
  root["workers"] = cfg.workers;
  root["window"] = {{"T", cfg.window_T}, {"K", cfg.window_K}};
  root["model"] = {{"variant", variant_name(cfg.model.variant)},
                   {"feature_dim", cfg.model.feature_dim},
                   {"kernel", cfg.model.kernel},
                   {"dilations", cfg.model.dilations},
                   {"heads", cfg.model.heads},
                   {"encoder_layers", cfg.model.encoder_layers}};
  root["train"] = {{"batch_size", cfg.train.batch_size},
                   {"learning_rate", cfg.train.learning_rate},
                   {"max_epochs", cfg.train.max_epochs},
                   {"background_ratio", cfg.train.background_ratio},
                   {"jitter", cfg.train.jitter},
                   {"steps_per_epoch", cfg.train.steps_per_epoch},
                   {"val_windows", cfg.train.val_windows}};
  root["detection"] = {{"w_eval", cfg.w_eval},
                       {"segment_length", cfg.eval_segment_length}};
  root["grid"] = {{"tau_min", cfg.grid.tau_min}, {"tau_max", cfg.grid.tau_max},
                  {"tau_step", cfg.grid.tau_step}, {"w_min", cfg.grid.w_min},
                  {"w_max", cfg.grid.w_max},       {"w_step", cfg.grid.w_step}};
  root["tune"] = {{"segment_length", cfg.tune_segment_length},
                  {"segments_per_match", cfg.tune_segments_per_match}};
  root["sim"] = {{"matches", cfg.sim_matches},
                 {"duration_minutes", cfg.sim.duration_minutes},
                 {"fps", cfg.sim.fps},
                 {"players_per_team", cfg.sim.players_per_team},
                 {"pitch_length", cfg.sim.pitch.length},
                 {"pitch_width", cfg.sim.pitch.width},
                 {"kinematics",
                  {{"max_player_speed", cfg.sim.kin.max_player_speed},
                   {"roam_speed", cfg.sim.kin.roam_speed},
                   {"dribble_speed", cfg.sim.kin.dribble_speed},
                   {"velocity_relax", cfg.sim.kin.velocity_relax},
                   {"pass_speed_min", cfg.sim.kin.pass_speed_min},
                   {"pass_speed_max", cfg.sim.kin.pass_speed_max},
                   {"shot_speed_min", cfg.sim.kin.shot_speed_min},
                   {"shot_speed_max", cfg.sim.kin.shot_speed_max},
                   {"knock_speed_min", cfg.sim.kin.knock_speed_min},
                   {"knock_speed_max", cfg.sim.kin.knock_speed_max},
                   {"ball_drag", cfg.sim.kin.ball_drag},
                   {"ball_attach_speed", cfg.sim.kin.ball_attach_speed},
                   {"control_radius", cfg.sim.kin.control_radius},
                   {"shot_range", cfg.sim.kin.shot_range}}},
                 {"rates",
                  {{"mean_dribble_seconds", cfg.sim.rates.mean_dribble_seconds},
                   {"min_dribble_seconds", cfg.sim.rates.min_dribble_seconds},
                   {"max_dribble_seconds", cfg.sim.rates.max_dribble_seconds},
                   {"shot_given_range", cfg.sim.rates.shot_given_range},
                   {"knock_prob", cfg.sim.rates.knock_prob},
                   {"bad_pass_prob", cfg.sim.rates.bad_pass_prob}}}};
  root["split"] = {{"train", cfg.split.train},
                   {"val", cfg.split.val},
                   {"test", cfg.split.test}};
  root["occlusion"] = {{"enabled", cfg.occlusion_enabled},
                       {"radius_m", cfg.occlusion.radius_m},
                       {"ball_retention", cfg.occlusion.ball_retention}};
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write config " + file.string());
  out << root.dump(2) << '\n';
}

}  // namespace trajevent
