#pragma once

#include <vector>

#include "trajevent/model.hpp"
#include "trajevent/sampler.hpp"

namespace trajevent {

struct EpochStats {
  size_t epoch = 0;
  double train_loss = 0.0;
  double val_f = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> log;
  size_t best_epoch = 0;
  double best_val_f = 0.0;
};

// Adam on per-window cross-entropy. The model is left holding the weights
// of the epoch with the best validation F-score (macro over event classes,
// window classification on a fixed validation sample). Deterministic for a
// fixed seed and independent of the worker count: per-sample gradients are
// reduced in sample order.
TrainResult train(Model& model, const Dataset& train_data,
                  const Dataset& val_data, const TrainConfig& cfg,
                  size_t workers = 1);

// Classification macro F-score over the event classes present in `samples`.
double window_macro_f(const Model& model, const std::vector<Sample>& samples);

}  // namespace trajevent
