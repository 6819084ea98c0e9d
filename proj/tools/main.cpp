#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trajevent/pipeline.hpp"

namespace {

using trajevent::RunConfig;

struct Overrides {
  uint64_t seed = 0;
  bool has_seed = false;
  size_t workers = 0;
  bool has_workers = false;
  std::string variant;
  long window_k = -1;
  long window_t = -1;
  long epochs = -1;
  long matches = -1;
};

// Precedence: flags > environment (workers only) > config file > defaults.
RunConfig resolve_config(const std::string& config_path, const Overrides& ov) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = trajevent::load_run_config(config_path);
  if (const char* env = std::getenv("TRAJEVENT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) cfg.workers = static_cast<size_t>(v);
  }
  if (ov.has_seed) cfg.seed = ov.seed;
  if (ov.has_workers) cfg.workers = ov.workers;
  if (!ov.variant.empty())
    cfg.model.variant = trajevent::variant_from_name(ov.variant);
  if (ov.window_k >= 0) cfg.window_K = ov.window_k;
  if (ov.window_t >= 0) cfg.window_T = ov.window_t;
  if (ov.epochs >= 0) cfg.train.max_epochs = static_cast<size_t>(ov.epochs);
  if (ov.matches >= 0) cfg.sim_matches = static_cast<size_t>(ov.matches);
  cfg.validate();
  return cfg;
}

std::vector<std::pair<std::string, std::filesystem::path>> parse_report_inputs(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::filesystem::path>> out;
  for (const auto& item : raw) {
    const size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw trajevent::ConfigError("--input expects NAME=METRICS_CSV, got '" +
                                   item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-based soccer event detection pipeline"};
  app.require_subcommand(1);

  Overrides ov;
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration")
      ->each([](const std::string&) {});
  app.add_option("--seed", ov.seed, "Override the global seed")
      ->each([&](const std::string&) { ov.has_seed = true; });
  app.add_option("--workers", ov.workers, "Override the worker count")
      ->each([&](const std::string&) { ov.has_workers = true; });
  app.add_option("--variant", ov.variant,
                 "Model variant: tcn, transformer, tcn_transformer");
  app.add_option("--window-k", ov.window_k, "Nearest players per window");
  app.add_option("--window-t", ov.window_t, "Window length in frames");
  app.add_option("--epochs", ov.epochs, "Training epochs");
  app.add_option("--matches", ov.matches, "Matches to simulate");

  std::string out_dir, data_dir, model_dir, tuned_file, out_file, which_split =
                                                                      "test";
  std::vector<std::string> match_ids, report_inputs;

  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim->add_option("--out", out_dir, "Output dataset directory")->required();

  CLI::App* tr = app.add_subcommand("train", "Train a model on the train split");
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--out", out_dir, "Checkpoint output directory")->required();

  CLI::App* inf = app.add_subcommand("infer", "Write per-frame probability timelines");
  inf->add_option("--data", data_dir, "Dataset directory")->required();
  inf->add_option("--model", model_dir, "Checkpoint directory")->required();
  inf->add_option("--out", out_dir, "Timeline output directory")->required();
  inf->add_option("--split", which_split, "Split to infer (train/val/test)");
  inf->add_option("--match", match_ids, "Explicit match ids (overrides --split)");

  CLI::App* tu = app.add_subcommand("tune", "Grid-search per-class tau and w_nms");
  tu->add_option("--data", data_dir, "Dataset directory")->required();
  tu->add_option("--model", model_dir, "Checkpoint directory")->required();
  tu->add_option("--out", out_file, "Tuned config JSON")->required();

  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate on the test split");
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--model", model_dir, "Checkpoint directory")->required();
  ev->add_option("--tuned", tuned_file, "Tuned config JSON")->required();
  ev->add_option("--out", out_file, "Metrics CSV (table written alongside)")
      ->required();

  CLI::App* rep = app.add_subcommand("report", "Combine metrics into one table");
  rep->add_option("--input", report_inputs, "NAME=METRICS_CSV (repeatable)")
      ->required();
  rep->add_option("--out", out_file, "Report CSV (table written alongside)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const trajevent::Logger log(&std::cerr);
  try {
    const RunConfig cfg = resolve_config(config_path, ov);
    if (sim->parsed()) {
      trajevent::run_simulate(cfg, out_dir, log);
    } else if (tr->parsed()) {
      trajevent::run_train(cfg, data_dir, out_dir, log);
    } else if (inf->parsed()) {
      const std::vector<std::string> ids =
          match_ids.empty() ? trajevent::split_ids(data_dir, which_split)
                            : match_ids;
      trajevent::run_infer(cfg, data_dir, model_dir, ids, out_dir, log);
    } else if (tu->parsed()) {
      trajevent::run_tune(cfg, data_dir, model_dir, out_file, log);
    } else if (ev->parsed()) {
      trajevent::run_evaluate(cfg, data_dir, model_dir, tuned_file, out_file,
                              log);
    } else if (rep->parsed()) {
      trajevent::run_report(parse_report_inputs(report_inputs), out_file, log);
    }
  } catch (const trajevent::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const trajevent::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const trajevent::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
