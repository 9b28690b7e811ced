#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "durflow/adam.hpp"
#include "durflow/checkpoint.hpp"
#include "durflow/encoder.hpp"
#include "durflow/nn.hpp"
#include "durflow/random.hpp"
#include "durflow/tensor.hpp"

namespace durflow {

enum class ModelKind { det, fm };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Frame count assigned to zero-duration references before taking the log.
inline constexpr double kZeroDurationFloor = 1e-2;

/// ln(d) for d >= 1, ln(kZeroDurationFloor) for d == 0.
double log_target(int frames);

/// Natural-log durations with a validity mask (1 = counts in losses/metrics).
struct LogDurations {
  Tensor values;  // [T]
  std::vector<std::uint8_t> mask;

  std::size_t length() const { return mask.size(); }
};

LogDurations reference_log_durations(std::span<const int> frames);

struct SampleOptions {
  int nfe = 10;
  double temperature = 0.667;
  std::uint64_t seed = 0;
  int min_duration = 0;
};

struct ModelConfig {
  ModelKind kind = ModelKind::det;
  std::size_t vocab_size = 24;
  std::size_t encoder_dim = 256;
  std::size_t encoder_kernel = 3;
  std::size_t channels = 256;
  std::size_t kernel = 3;
  // Flow-matching extras.
  std::size_t noise_dim = 32;
  std::size_t time_dim = 64;
  std::size_t time_hidden = 256;
  double sigma_min = 1e-4;
  // The flow runs on z = (ln d - target_shift) / target_scale.
  double target_shift = 1.5;
  double target_scale = 0.5;
  std::uint64_t seed = 0;

  std::map<std::string, std::string> to_meta() const;
  static ModelConfig from_meta(const std::map<std::string, std::string>& meta);
};

/// Several conditioning sequences laid side by side along the time axis,
/// separated by zero columns wide enough that same-padded convolutions never
/// see a neighbouring sequence.
struct PackedBatch {
  Tensor cond;                               // [D x L]
  Tensor valid;                              // [L], 1 on sequence columns, 0 on separators
  std::vector<std::uint8_t> loss_mask;       // [L], valid and unmasked
  std::vector<std::size_t> offsets;          // first column of each sequence
  std::vector<std::size_t> lengths;          // columns per sequence
  std::vector<std::size_t> column_sequence;  // owning sequence of each column

  std::size_t columns() const { return loss_mask.size(); }
  std::size_t sequences() const { return offsets.size(); }

  /// Packs per-sequence values into an [L] tensor with zeros on separators.
  Tensor pack_values(std::span<const std::vector<double>> per_sequence) const;
  /// Extracts sequence `i` from an [L] tensor.
  std::vector<double> unpack(const Tensor& packed, std::size_t i) const;
};

PackedBatch pack(std::span<const ConditioningSequence* const> sequences, std::size_t gap);

/// Encoder + convolutional duration predictor. The FM variant adds a noisy
/// duration projection (concatenated with the conditioning) and a time
/// embedding added to both hidden conv activations.
class DurationModel {
 public:
  explicit DurationModel(const ModelConfig& config);
  // Parameters are shared handles; a copy would alias the original's storage.
  DurationModel(const DurationModel&) = delete;
  DurationModel& operator=(const DurationModel&) = delete;
  DurationModel(DurationModel&&) = default;
  DurationModel& operator=(DurationModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ModelKind kind() const { return config_.kind; }

  ConditioningSequence encode(const PhoneSequence& seq) const { return encoder_.encode(seq); }

  /// Predicted log durations, [L]. DET only.
  Tensor det_head(const PackedBatch& batch) const;
  /// Vector field v(x_t, t | cond), [L]. FM only. `t` holds one value per sequence.
  Tensor vector_field(const PackedBatch& batch, const Tensor& x_t, std::span<const double> t) const;

  std::vector<Parameter>& parameters() { return registry_.parameters(); }
  const std::vector<Parameter>& parameters() const { return registry_.parameters(); }
  /// Everything except the encoder, whose output is treated as detached.
  std::vector<Parameter> predictor_parameters() const;
  const std::vector<LayerSpec>& layers() const { return registry_.layers(); }
  std::vector<LayerSpec> predictor_layers() const;

  std::size_t gap() const { return config_.kernel / 2; }

  double to_state(double log_duration) const;
  double from_state(double state) const;

  std::int64_t trained_steps() const { return trained_steps_; }
  void set_trained_steps(std::int64_t steps) { trained_steps_ = steps; }
  /// "<kind>-<16 hex digits of the parameter fingerprint>".
  std::string id() const;

  Checkpoint to_checkpoint() const;
  static DurationModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  Tensor backbone(const Tensor& input, const PackedBatch& batch, const Tensor& time1,
                  const Tensor& time2) const;

  ModelConfig config_;
  ParameterRegistry registry_;
  Encoder encoder_;
  Conv1d conv1_;
  LayerNorm norm1_;
  Conv1d conv2_;
  LayerNorm norm2_;
  Linear proj_;
  // FM only.
  Linear noise_proj_;
  TimeEmbedding time_;
  Linear time_proj1_;
  Linear time_proj2_;
  std::int64_t trained_steps_ = 0;
};

LogDurations det_forward(const DurationModel& model, const ConditioningSequence& cond);

/// Mean of (pred - ref)^2 over positions unmasked in both. Throws when no
/// position is unmasked.
Tensor det_loss(const LogDurations& pred, const LogDurations& ref);

struct FlowPair {
  Tensor x_t;
  Tensor u_t;
};

/// OT-CFM path point x_t = (1 - (1 - sigma) t) x0 + t x1 and its target
/// velocity u_t = x1 - (1 - sigma) x0.
FlowPair cfm_pair(const Tensor& x1, const Tensor& x0, double t, double sigma);

using VectorField =
    std::function<Tensor(const PackedBatch& batch, const Tensor& x_t, std::span<const double> t)>;

/// Random inputs of one flow-matching loss evaluation.
struct FlowDraws {
  std::vector<double> t;  // one per sequence, uniform on [0, 1]
  Tensor x0;              // [L] standard normal, zero on separators
};

FlowDraws draw_flow_noise(const PackedBatch& batch, Rng& rng);

/// Mean over loss-mask positions of (v(x_t, t) - u_t)^2, with x1 the packed
/// flow-state targets.
Tensor fm_loss(const VectorField& field, const PackedBatch& batch, const Tensor& x1,
               const FlowDraws& draws, double sigma);

/// Model-level loss: maps reference log durations into flow state and draws
/// t and x0 from `rng`.
Tensor fm_loss(const DurationModel& model, const PackedBatch& batch, const LogDurations& ref, Rng& rng);

/// Euler integration from x(0) ~ N(0, temperature^2) over nfe uniform steps.
/// Returns x(1) in flow state.
std::vector<double> euler_sample(const VectorField& field, const PackedBatch& batch,
                                 const SampleOptions& opts);

/// Real-valued log durations sampled from an FM model.
LogDurations fm_sample(const DurationModel& model, const ConditioningSequence& cond,
                       const SampleOptions& opts);

/// DET forward or FM sampling, depending on the model kind.
LogDurations predict_log_durations(const DurationModel& model, const ConditioningSequence& cond,
                                   const SampleOptions& opts);

/// max(min_duration, round(exp(v))), rounding half away from zero. Throws
/// std::domain_error naming the first non-finite position.
std::vector<int> to_frames(const LogDurations& log_dur, int min_duration = 0);

/// Mean over unmasked positions of |exp(v) - round(exp(v))|.
double quantisation_residual(const LogDurations& log_dur);

/// Repeats column t of cond.vectors frames[t] times.
Tensor length_regulate(const ConditioningSequence& cond, std::span<const int> frames);

}  // namespace durflow
