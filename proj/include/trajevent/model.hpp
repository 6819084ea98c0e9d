#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "trajevent/tape.hpp"
#include "trajevent/trajectory.hpp"

namespace trajevent {

enum class ModelVariant { tcn, transformer, tcn_transformer };

const char* variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

struct ModelConfig {
  ModelVariant variant = ModelVariant::tcn_transformer;
  long T = 51;
  long K = 5;                    // nearest players; input has N = 1 + K objects
  size_t feature_dim = 64;       // D
  size_t kernel = 3;
  std::vector<size_t> dilations = {1, 2, 4, 8, 16};
  size_t heads = 4;
  size_t encoder_layers = 2;

  size_t input_channels() const { return 2 * (1 + static_cast<size_t>(K)); }
  size_t tcn_blocks() const { return dilations.size(); }
  size_t receptive_field() const;
  bool has_tcn() const { return variant != ModelVariant::transformer; }
  bool has_encoder() const {
    return variant != ModelVariant::tcn && encoder_layers > 0;
  }
  void validate() const;
};

// Per-layer, per-head attention matrices (query frame x key frame),
// captured on demand for diagnostics and tests.
struct AttentionCapture {
  std::vector<Tensor> maps;
};

// Sequence classifier over trajectory windows: a dilated causal conv stack
// with gated activations and residual/skip paths, a transformer encoder over
// per-frame features, or the conv stack feeding the encoder. Each ends in a
// temporal mean-pool and a fully-connected head over the four classes.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  autodiff::ParameterSet& params() { return params_; }
  const autodiff::ParameterSet& params() const { return params_; }

  // Inference. Thread-safe: parameters are read-only here.
  std::array<double, kNumClasses> forward(const WindowTensor& w) const;
  std::array<double, kNumClasses> forward(const WindowTensor& w,
                                          AttentionCapture* capture) const;

  // Builds the forward graph on an external tape; `bound` must come from
  // tape.bind(params()). Returns the probability node (rank-1, 4 classes).
  autodiff::Node* build_graph(autodiff::Tape& tape,
                              const std::vector<autodiff::Node*>& bound,
                              const WindowTensor& w,
                              AttentionCapture* capture = nullptr) const;

  // Replace parameter values (same names and shapes required).
  void load_values(const autodiff::ParameterSet& values);

 private:
  autodiff::Node* bound_node(const std::vector<autodiff::Node*>& bound,
                             const std::string& name) const;
  void add_param(const std::string& name, Tensor value);
  Tensor make_positional_encoding() const;

  ModelConfig cfg_;
  autodiff::ParameterSet params_;
  std::unordered_map<std::string, size_t> index_;
  Tensor pe_;
};

}  // namespace trajevent
