#include "durflow/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "durflow/ops.hpp"

namespace durflow {

double learning_rate_at(const TrainOptions& opts, int step) {
  if (opts.steps <= 1) return opts.lr;
  const double progress = static_cast<double>(step) / static_cast<double>(opts.steps - 1);
  const double floor = opts.final_lr_fraction;
  return opts.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

TrainResult train(DurationModel& model, const DurationCorpus& corpus, const TrainOptions& opts,
                  const StepCallback& on_step) {
  if (corpus.sentences.empty()) throw std::invalid_argument("train: corpus has no sentences");
  if (opts.steps < 1 || opts.batch < 1) throw std::invalid_argument("train: steps and batch must be >= 1");
  if (!(opts.ema_decay >= 0.0 && opts.ema_decay < 1.0)) {
    throw std::invalid_argument("train: ema_decay must lie in [0, 1)");
  }

  std::vector<ConditioningSequence> conds;
  std::vector<std::vector<double>> targets;
  {
    Tape::NoGrad no_grad;
    for (const auto& s : corpus.sentences) {
      conds.push_back(model.encode(s.phones));
      std::vector<double> t(s.durations.size());
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = log_target(s.durations[i]);
      targets.push_back(std::move(t));
    }
  }

  auto params = model.predictor_parameters();
  AdamState state = AdamState::for_parameters(params);
  AdamConfig adam;
  std::vector<std::vector<double>> average;
  if (opts.ema_decay > 0.0) {
    for (const auto& p : params) average.emplace_back(p.value.data().begin(), p.value.data().end());
  }
  Rng batch_rng = make_rng(opts.seed, 1);
  Rng flow_rng = make_rng(opts.seed, 2);
  std::uniform_int_distribution<std::size_t> pick(0, corpus.sentences.size() - 1);

  TrainResult result;
  result.losses.reserve(static_cast<std::size_t>(opts.steps));
  std::vector<const ConditioningSequence*> members(static_cast<std::size_t>(opts.batch));
  std::vector<std::vector<double>> member_targets(static_cast<std::size_t>(opts.batch));
  for (int step = 0; step < opts.steps; ++step) {
    for (std::size_t b = 0; b < members.size(); ++b) {
      const std::size_t i = pick(batch_rng);
      members[b] = &conds[i];
      member_targets[b] = targets[i];
    }
    PackedBatch batch = pack(members, model.gap());
    LogDurations ref{batch.pack_values(member_targets), batch.loss_mask};

    Tape tape;
    Tensor loss;
    {
      Tape::Recording recording(tape);
      if (model.kind() == ModelKind::det) {
        loss = det_loss(LogDurations{model.det_head(batch), batch.loss_mask}, ref);
      } else {
        loss = fm_loss(model, batch, ref, flow_rng);
      }
    }
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
    }
    zero_grad(params);
    tape.backward(loss);
    adam.lr = learning_rate_at(opts, step);
    adam_step(params, state, adam);
    if (!average.empty()) {
      // Warm-up keeps the average from clinging to the initialisation.
      const double decay = std::min(opts.ema_decay, (1.0 + step) / (10.0 + step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto v = params[i].value.data();
        auto& a = average[i];
        for (std::size_t j = 0; j < a.size(); ++j) a[j] = decay * a[j] + (1.0 - decay) * v[j];
      }
    }
    result.losses.push_back(value);
    if (on_step) on_step(step, value);
  }
  for (std::size_t i = 0; i < average.size(); ++i) {
    auto v = params[i].value.mutable_data();
    std::copy(average[i].begin(), average[i].end(), v.begin());
  }
  model.set_trained_steps(model.trained_steps() + opts.steps);
  return result;
}

}  // namespace durflow
