#include "trajevent/sampler.hpp"

#include <algorithm>

namespace trajevent {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be > 0");
  if (background_ratio < 0.0 || background_ratio > 1.0)
    throw ConfigError("train: background_ratio must be in [0, 1]");
  if (jitter < 0) throw ConfigError("train: jitter must be >= 0");
  if (learning_rate < 0.0)
    throw ConfigError("train: learning_rate must be >= 0");
}

WindowSampler::WindowSampler(const Dataset& data, long T, long K)
    : data_(&data), t_(T), k_(K) {
  const long half = (T - 1) / 2;
  for (size_t m = 0; m < data.size(); ++m) {
    const auto& lm = data[m];
    for (const auto& l : lm.labels) labels_.push_back({m, l});
    // A center is background when no event of any class lies within `half`
    // frames of it.
    std::vector<uint8_t> blocked(lm.traj.frame_count, 0);
    for (const auto& l : lm.labels) {
      const long lo = std::max<long>(0, l.frame - half);
      const long hi = std::min<long>(lm.traj.frame_count - 1, l.frame + half);
      for (long f = lo; f <= hi; ++f) blocked[f] = 1;
    }
    for (long f = 0; f < lm.traj.frame_count; ++f)
      if (!blocked[f]) background_.emplace_back(m, f);
  }
  if (labels_.empty())
    throw DataError("sampler: dataset contains no event labels");
}

Sample WindowSampler::draw_event(const TrainConfig& cfg, Rng& rng) const {
  const LabelRef& ref = labels_[rng.uniform_int(0, labels_.size() - 1)];
  const auto& match = (*data_)[ref.match].traj;
  long center = ref.label.frame;
  if (cfg.jitter > 0)
    center += rng.uniform_int(-cfg.jitter, cfg.jitter);
  center = std::clamp<long>(center, 0, match.frame_count - 1);
  WindowSpec spec{t_, k_, center};
  return {build_window(match, spec), static_cast<int>(ref.label.cls)};
}

Sample WindowSampler::draw_background(Rng& rng) const {
  if (background_.empty())
    throw DataError("sampler: dataset has no background frames");
  const auto& [m, f] = background_[rng.uniform_int(0, background_.size() - 1)];
  WindowSpec spec{t_, k_, f};
  return {build_window((*data_)[m].traj, spec), kBackground};
}

std::vector<Sample> WindowSampler::sample_batch(size_t n,
                                                const TrainConfig& cfg,
                                                Rng& rng) const {
  std::vector<Sample> batch;
  batch.reserve(n);
  while (batch.size() < n) {
    const bool background = rng.bernoulli(cfg.background_ratio);
    // Occluded data can leave a window with no ball at all; redraw.
    for (int attempt = 0; attempt < 64; ++attempt) {
      try {
        batch.push_back(background ? draw_background(rng)
                                   : draw_event(cfg, rng));
        break;
      } catch (const NoBallError&) {
        if (attempt == 63) throw;
      }
    }
  }
  return batch;
}

}  // namespace trajevent
