#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "trajevent/metrics.hpp"
#include "trajevent/run_config.hpp"
#include "trajevent/trainer.hpp"

namespace trajevent {

// Structured one-line JSON logs on a side channel; data products go to files
// only so outputs stay byte-diffable across runs.
class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out) {}
  void info(const std::string& event,
            const std::vector<std::pair<std::string, std::string>>& fields = {}) const;

 private:
  std::ostream* out_;
};

// Dataset access for a directory produced by `simulate`.
std::vector<std::string> split_ids(const std::filesystem::path& data_dir,
                                   const std::string& which);
Dataset load_dataset(const RunConfig& cfg, const std::filesystem::path& data_dir,
                     const std::vector<std::string>& ids);

Model load_model(const std::filesystem::path& model_dir);

// Subcommand bodies. Every one is deterministic given the config seed.
void run_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir,
                  const Logger& log);
TrainResult run_train(const RunConfig& cfg,
                      const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, const Logger& log);
void run_infer(const RunConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& model_dir,
               const std::vector<std::string>& ids,
               const std::filesystem::path& out_dir, const Logger& log);
TunedConfig run_tune(const RunConfig& cfg, const std::filesystem::path& data_dir,
                     const std::filesystem::path& model_dir,
                     const std::filesystem::path& out_file, const Logger& log);
EvaluationReport run_evaluate(const RunConfig& cfg,
                              const std::filesystem::path& data_dir,
                              const std::filesystem::path& model_dir,
                              const std::filesystem::path& tuned_file,
                              const std::filesystem::path& out_csv,
                              const Logger& log);
void run_report(
    const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
    const std::filesystem::path& out_csv, const Logger& log);

}  // namespace trajevent
