#include "trajevent/model.hpp"

#include <cmath>

#include "trajevent/common.hpp"

namespace trajevent {

using autodiff::Node;
using autodiff::Tape;

const char* variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::tcn:
      return "tcn";
    case ModelVariant::transformer:
      return "transformer";
    case ModelVariant::tcn_transformer:
      return "tcn_transformer";
  }
  throw ContractError("unknown model variant");
}

ModelVariant variant_from_name(const std::string& name) {
  if (name == "tcn") return ModelVariant::tcn;
  if (name == "transformer") return ModelVariant::transformer;
  if (name == "tcn_transformer") return ModelVariant::tcn_transformer;
  throw ConfigError("unknown model variant '" + name + "'");
}

size_t ModelConfig::receptive_field() const {
  size_t rf = 1;
  for (size_t d : dilations) rf += (kernel - 1) * d;
  return rf;
}

void ModelConfig::validate() const {
  if (T <= 0 || T % 2 == 0)
    throw ConfigError("model: T must be odd and positive");
  if (K < 0) throw ConfigError("model: K must be >= 0");
  if (feature_dim == 0) throw ConfigError("model: feature_dim must be > 0");
  if (variant != ModelVariant::tcn) {
    if (heads == 0 || feature_dim % heads != 0)
      throw ConfigError("model: feature_dim must be divisible by heads");
  }
  if (has_tcn()) {
    if (kernel < 2) throw ConfigError("model: kernel must be >= 2");
    if (dilations.empty()) throw ConfigError("model: needs >= 1 tcn block");
    size_t prev = 0;
    for (size_t d : dilations) {
      if (d == 0 || (d & (d - 1)) != 0)
        throw ConfigError("model: dilations must be powers of 2");
      if (d <= prev && prev != 0)
        throw ConfigError("model: dilations must be strictly increasing");
      prev = d;
    }
    if (receptive_field() < static_cast<size_t>(T))
      throw ConfigError("model: TCN receptive field " +
                        std::to_string(receptive_field()) +
                        " is smaller than T = " + std::to_string(T));
  }
}

namespace {

Tensor uniform_init(std::vector<size_t> shape, size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-s, s);
  return t;
}

Tensor ones(size_t n) {
  Tensor t({n});
  t.fill(1.0);
  return t;
}

}  // namespace

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(init_seed);
  const size_t d = cfg_.feature_dim;
  const size_t cin = cfg_.input_channels();
  const size_t ff = 4 * d;
  const size_t dh = cfg_.variant == ModelVariant::tcn ? 0 : d / cfg_.heads;

  if (cfg_.variant == ModelVariant::transformer) {
    add_param("emb.w", uniform_init({cin, d}, cin, rng));
    add_param("emb.b", uniform_init({d}, cin, rng));
  }
  if (cfg_.has_tcn()) {
    add_param("tcn.in.k", uniform_init({d, cin, 1}, cin, rng));
    add_param("tcn.in.b", uniform_init({d}, cin, rng));
    for (size_t b = 0; b < cfg_.tcn_blocks(); ++b) {
      const std::string p = "tcn.b" + std::to_string(b) + ".";
      const size_t fan = d * cfg_.kernel;
      add_param(p + "filter.k", uniform_init({d, d, cfg_.kernel}, fan, rng));
      add_param(p + "filter.b", uniform_init({d}, fan, rng));
      add_param(p + "gate.k", uniform_init({d, d, cfg_.kernel}, fan, rng));
      add_param(p + "gate.b", uniform_init({d}, fan, rng));
      add_param(p + "skip.k", uniform_init({d, d, 1}, d, rng));
      add_param(p + "skip.b", uniform_init({d}, d, rng));
      add_param(p + "res.k", uniform_init({d, d, 1}, d, rng));
      add_param(p + "res.b", uniform_init({d}, d, rng));
    }
  }
  if (cfg_.variant != ModelVariant::tcn) {
    for (size_t l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      for (size_t h = 0; h < cfg_.heads; ++h) {
        const std::string hp = p + "h" + std::to_string(h) + ".";
        add_param(hp + "wq", uniform_init({d, dh}, d, rng));
        add_param(hp + "wk", uniform_init({d, dh}, d, rng));
        add_param(hp + "wv", uniform_init({d, dh}, d, rng));
      }
      add_param(p + "attn_out.w", uniform_init({d, d}, d, rng));
      add_param(p + "attn_out.b", uniform_init({d}, d, rng));
      add_param(p + "ln1.gamma", ones(d));
      add_param(p + "ln1.beta", Tensor({d}));
      add_param(p + "ff1.w", uniform_init({d, ff}, d, rng));
      add_param(p + "ff1.b", uniform_init({ff}, d, rng));
      add_param(p + "ff2.w", uniform_init({ff, d}, ff, rng));
      add_param(p + "ff2.b", uniform_init({d}, ff, rng));
      add_param(p + "ln2.gamma", ones(d));
      add_param(p + "ln2.beta", Tensor({d}));
    }
  }
  // Zero head: an untrained model outputs uniform probabilities.
  add_param("head.w", Tensor({d, static_cast<size_t>(kNumClasses)}));
  add_param("head.b", Tensor({static_cast<size_t>(kNumClasses)}));

  pe_ = make_positional_encoding();
}

void Model::add_param(const std::string& name, Tensor value) {
  index_[name] = params_.size();
  params_.push_back({name, std::move(value)});
}

Node* Model::bound_node(const std::vector<Node*>& bound,
                        const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("model has no parameter '" + name + "'");
  return bound[it->second];
}

Tensor Model::make_positional_encoding() const {
  const size_t t_len = static_cast<size_t>(cfg_.T);
  const size_t d = cfg_.feature_dim;
  Tensor pe({t_len, d});
  for (size_t t = 0; t < t_len; ++t) {
    for (size_t i = 0; i < d; i += 2) {
      const double angle =
          static_cast<double>(t) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      pe.at(t, i) = std::sin(angle);
      if (i + 1 < d) pe.at(t, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Node* Model::build_graph(Tape& tape, const std::vector<Node*>& bound,
                         const WindowTensor& w,
                         AttentionCapture* capture) const {
  if (w.T != cfg_.T || w.N != 1 + cfg_.K)
    throw ContractError("window shape 2x" + std::to_string(w.T) + "x" +
                        std::to_string(w.N) + " does not match model input 2x" +
                        std::to_string(cfg_.T) + "x" +
                        std::to_string(1 + cfg_.K));
  const size_t t_len = static_cast<size_t>(cfg_.T);
  const size_t cin = cfg_.input_channels();
  const size_t d = cfg_.feature_dim;
  auto P = [&](const std::string& name) { return bound_node(bound, name); };

  // Shared encoder body applied to a T x D sequence.
  auto encode = [&](Node* x) {
    const size_t dh = d / cfg_.heads;
    for (size_t l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      std::vector<Node*> contexts;
      for (size_t h = 0; h < cfg_.heads; ++h) {
        const std::string hp = p + "h" + std::to_string(h) + ".";
        Node* q = tape.matmul(x, P(hp + "wq"));
        Node* k = tape.matmul(x, P(hp + "wk"));
        Node* v = tape.matmul(x, P(hp + "wv"));
        Node* scores = tape.mul_scalar(tape.matmul(q, k, false, true),
                                       1.0 / std::sqrt(static_cast<double>(dh)));
        Node* attn = tape.softmax(scores, 1);
        if (capture != nullptr) capture->maps.push_back(attn->value);
        contexts.push_back(tape.matmul(attn, v));
      }
      Node* ctx = cfg_.heads == 1 ? contexts[0] : tape.concat(contexts, 1);
      Node* attn_out = tape.linear(ctx, P(p + "attn_out.w"), P(p + "attn_out.b"));
      x = tape.layer_norm(tape.add(x, attn_out), P(p + "ln1.gamma"),
                          P(p + "ln1.beta"));
      Node* ffn = tape.linear(
          tape.relu(tape.linear(x, P(p + "ff1.w"), P(p + "ff1.b"))),
          P(p + "ff2.w"), P(p + "ff2.b"));
      x = tape.layer_norm(tape.add(x, ffn), P(p + "ln2.gamma"),
                          P(p + "ln2.beta"));
    }
    return x;
  };

  Node* pooled = nullptr;  // D-dimensional clip feature
  if (cfg_.has_tcn()) {
    // Channels x time layout; feature index (2n + channel) for object n.
    Tensor x0({cin, t_len});
    for (long n = 0; n < w.N; ++n)
      for (long t = 0; t < cfg_.T; ++t) {
        x0.at(2 * n + 0, t) = w.value(0, t, n);
        x0.at(2 * n + 1, t) = w.value(1, t, n);
      }
    Node* h = tape.conv1d_causal_dilated(tape.input(std::move(x0)),
                                         P("tcn.in.k"), P("tcn.in.b"), 1);
    Node* skip_sum = nullptr;
    for (size_t b = 0; b < cfg_.tcn_blocks(); ++b) {
      const std::string p = "tcn.b" + std::to_string(b) + ".";
      const size_t dil = cfg_.dilations[b];
      Node* f = tape.conv1d_causal_dilated(h, P(p + "filter.k"),
                                           P(p + "filter.b"), dil);
      Node* g = tape.conv1d_causal_dilated(h, P(p + "gate.k"),
                                           P(p + "gate.b"), dil);
      Node* z = tape.gated_activation(f, g);
      Node* s = tape.conv1d_causal_dilated(z, P(p + "skip.k"), P(p + "skip.b"), 1);
      skip_sum = skip_sum == nullptr ? s : tape.add(skip_sum, s);
      Node* r = tape.conv1d_causal_dilated(z, P(p + "res.k"), P(p + "res.b"), 1);
      h = tape.add(h, r);
    }
    Node* features = tape.relu(skip_sum);  // D x T
    if (cfg_.has_encoder()) {
      Node* seq = tape.add(tape.transpose(features), tape.input(pe_));
      pooled = tape.mean(encode(seq), 0);
    } else {
      pooled = tape.mean(features, 1);
    }
  } else {
    // Per-frame raw features, time x channels.
    Tensor e0({t_len, cin});
    for (long t = 0; t < cfg_.T; ++t)
      for (long n = 0; n < w.N; ++n) {
        e0.at(t, 2 * n + 0) = w.value(0, t, n);
        e0.at(t, 2 * n + 1) = w.value(1, t, n);
      }
    Node* seq = tape.linear(tape.input(std::move(e0)), P("emb.w"), P("emb.b"));
    seq = tape.add(seq, tape.input(pe_));
    pooled = tape.mean(encode(seq), 0);
  }

  Node* logits = tape.linear(pooled, P("head.w"), P("head.b"));
  return tape.softmax(logits, 0);
}

std::array<double, kNumClasses> Model::forward(const WindowTensor& w) const {
  return forward(w, nullptr);
}

std::array<double, kNumClasses> Model::forward(
    const WindowTensor& w, AttentionCapture* capture) const {
  Tape tape;
  std::vector<Node*> bound;
  bound.reserve(params_.size());
  for (const auto& p : params_) bound.push_back(tape.input(p.value));
  Node* probs = build_graph(tape, bound, w, capture);
  std::array<double, kNumClasses> out{};
  for (int c = 0; c < kNumClasses; ++c) out[c] = probs->value[c];
  for (double v : out)
    if (!std::isfinite(v))
      throw NumericError("model produced non-finite probabilities");
  return out;
}

void Model::load_values(const autodiff::ParameterSet& values) {
  if (values.size() != params_.size())
    throw DataError("checkpoint has " + std::to_string(values.size()) +
                    " parameters, model expects " +
                    std::to_string(params_.size()));
  for (size_t i = 0; i < values.size(); ++i) {
    if (values[i].name != params_[i].name)
      throw DataError("checkpoint parameter '" + values[i].name +
                      "' does not match model parameter '" + params_[i].name +
                      "'");
    if (!values[i].value.same_shape(params_[i].value))
      throw DataError("checkpoint parameter '" + values[i].name +
                      "' has shape " + values[i].value.shape_str() +
                      ", model expects " + params_[i].value.shape_str());
    params_[i].value = values[i].value;
  }
}

}  // namespace trajevent
