#include "trajevent/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace trajevent {

using autodiff::Node;
using autodiff::Tape;

namespace {

struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  size_t step = 0;
  std::vector<double> m, v;

  explicit Adam(size_t n, double lr_in) : lr(lr_in), m(n, 0.0), v(n, 0.0) {}

  void update(autodiff::ParameterSet& params, const std::vector<double>& grad) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    size_t off = 0;
    for (auto& p : params) {
      for (size_t i = 0; i < p.value.numel(); ++i, ++off) {
        const double g = grad[off];
        m[off] = beta1 * m[off] + (1.0 - beta1) * g;
        v[off] = beta2 * v[off] + (1.0 - beta2) * g * g;
        p.value[i] -= lr * (m[off] / c1) / (std::sqrt(v[off] / c2) + eps);
      }
    }
  }
};

// Forward+backward for one sample; flattened gradient written to `out`.
double sample_grad(const Model& model, const Sample& s,
                   std::vector<double>& out) {
  Tape tape;
  const std::vector<Node*> bound = tape.bind(model.params());
  Node* probs = model.build_graph(tape, bound, s.window);
  Node* loss = tape.cross_entropy(probs, static_cast<size_t>(s.target));
  tape.backward(loss);
  size_t off = 0;
  for (Node* b : bound) {
    const size_t n = b->value.numel();
    if (b->grad.numel() == 0) {
      std::fill(out.begin() + off, out.begin() + off + n, 0.0);
    } else {
      std::copy(b->grad.data(), b->grad.data() + n, out.begin() + off);
    }
    off += n;
  }
  return loss->value[0];
}

}  // namespace

double window_macro_f(const Model& model, const std::vector<Sample>& samples) {
  std::array<long, kNumClasses> tp{}, fp{}, fn{};
  std::array<bool, kNumClasses> seen{};
  for (const auto& s : samples) {
    const auto probs = model.forward(s.window);
    int pred = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (probs[c] > probs[pred]) pred = c;
    seen[s.target] = true;
    if (pred == s.target) {
      ++tp[pred];
    } else {
      ++fp[pred];
      ++fn[s.target];
    }
  }
  double sum = 0.0;
  int classes = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (!seen[c]) continue;
    ++classes;
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  return classes > 0 ? sum / static_cast<double>(classes) : 0.0;
}

TrainResult train(Model& model, const Dataset& train_data,
                  const Dataset& val_data, const TrainConfig& cfg,
                  size_t workers) {
  cfg.validate();
  const auto& mc = model.config();
  WindowSampler sampler(train_data, mc.T, mc.K);

  std::vector<Sample> val_set;
  if (!val_data.empty() && cfg.val_windows > 0) {
    WindowSampler val_sampler(val_data, mc.T, mc.K);
    Rng val_rng(derive_seed(cfg.seed, 0xa11));
    val_set = val_sampler.sample_batch(cfg.val_windows, cfg, val_rng);
  }

  const size_t steps =
      cfg.steps_per_epoch > 0
          ? cfg.steps_per_epoch
          : std::max<size_t>(1, 2 * sampler.label_count() / cfg.batch_size);
  const size_t total = autodiff::param_count(model.params());
  Adam adam(total, cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, 0x7ea1));

  TrainResult result;
  autodiff::ParameterSet best_params = model.params();
  bool have_best = false;

  std::vector<std::vector<double>> slots(cfg.batch_size,
                                         std::vector<double>(total, 0.0));
  std::vector<double> losses(cfg.batch_size, 0.0);
  std::vector<double> grad(total, 0.0);

  for (size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (size_t step = 0; step < steps; ++step) {
      const std::vector<Sample> batch =
          sampler.sample_batch(cfg.batch_size, cfg, rng);
      const size_t b = batch.size();
      const size_t nw = std::max<size_t>(1, std::min(workers, b));
      if (nw == 1) {
        for (size_t i = 0; i < b; ++i)
          losses[i] = sample_grad(model, batch[i], slots[i]);
      } else {
        std::vector<std::thread> pool;
        for (size_t w = 0; w < nw; ++w) {
          pool.emplace_back([&, w]() {
            for (size_t i = w; i < b; i += nw)
              losses[i] = sample_grad(model, batch[i], slots[i]);
          });
        }
        for (auto& t : pool) t.join();
      }
      // Reduce in sample order so results do not depend on worker count.
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (size_t i = 0; i < b; ++i) {
        batch_loss += losses[i];
        const auto& s = slots[i];
        for (size_t j = 0; j < total; ++j) grad[j] += s[j];
      }
      batch_loss /= static_cast<double>(b);
      const double inv_b = 1.0 / static_cast<double>(b);
      for (size_t j = 0; j < total; ++j) grad[j] *= inv_b;
      if (!std::isfinite(batch_loss))
        throw NumericError("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch) + " step " +
                           std::to_string(step + 1));
      adam.update(model.params(), grad);
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(steps);

    const double val_f =
        val_set.empty() ? 0.0 : window_macro_f(model, val_set);
    result.log.push_back({epoch, epoch_loss, val_f});
    const bool improved = val_set.empty() || !have_best ||
                          val_f > result.best_val_f;
    if (improved) {
      result.best_val_f = val_f;
      result.best_epoch = epoch;
      best_params = model.params();
      have_best = true;
    }
  }
  if (have_best) model.load_values(best_params);
  return result;
}

}  // namespace trajevent
