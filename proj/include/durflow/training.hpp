#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "durflow/corpus.hpp"
#include "durflow/duration.hpp"

namespace durflow {

struct TrainOptions {
  int steps = 2000;
  int batch = 8;  // sentences per update
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// Cosine decay from lr down to lr * final_lr_fraction over the run.
  double final_lr_fraction = 0.05;
  /// Decay of the exponential moving average of the predictor parameters
  /// that replaces them at the end of training; 0 keeps the raw weights.
  double ema_decay = 0.999;
};

struct TrainResult {
  std::vector<double> losses;  // one per step
};

using StepCallback = std::function<void(int step, double loss)>;

double learning_rate_at(const TrainOptions& opts, int step);

/// Trains the predictor (DET: log-domain MSE, FM: OT-CFM regression) on
/// `corpus`. The encoder is held fixed and its outputs are computed once.
/// Throws std::runtime_error on a non-finite loss.
TrainResult train(DurationModel& model, const DurationCorpus& corpus, const TrainOptions& opts,
                  const StepCallback& on_step = {});

}  // namespace durflow
