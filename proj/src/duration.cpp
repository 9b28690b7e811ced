#include "durflow/duration.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "durflow/ops.hpp"
#include "durflow/text.hpp"

namespace durflow {

const char* to_string(ModelKind kind) { return kind == ModelKind::det ? "det" : "fm"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "det") return ModelKind::det;
  if (text == "fm") return ModelKind::fm;
  throw std::invalid_argument("unknown model kind '" + text + "' (expected det or fm)");
}

double log_target(int frames) {
  if (frames < 0) throw std::invalid_argument("log_target: negative duration " + std::to_string(frames));
  return frames == 0 ? std::log(kZeroDurationFloor) : std::log(static_cast<double>(frames));
}

LogDurations reference_log_durations(std::span<const int> frames) {
  std::vector<double> v(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) v[i] = log_target(frames[i]);
  return LogDurations{Tensor::vector(std::move(v)), std::vector<std::uint8_t>(frames.size(), 1)};
}

// ---------------------------------------------------------------------------
// ModelConfig

namespace {

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("model config: bad number for " + key + ": '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("model config: bad integer for " + key + ": '" + text + "'");
  }
  return v;
}

const std::string& require(const std::map<std::string, std::string>& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw std::invalid_argument("model config: missing key '" + key + "'");
  return it->second;
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_meta() const {
  return {
      {"kind", to_string(kind)},
      {"vocab_size", std::to_string(vocab_size)},
      {"encoder_dim", std::to_string(encoder_dim)},
      {"encoder_kernel", std::to_string(encoder_kernel)},
      {"channels", std::to_string(channels)},
      {"kernel", std::to_string(kernel)},
      {"noise_dim", std::to_string(noise_dim)},
      {"time_dim", std::to_string(time_dim)},
      {"time_hidden", std::to_string(time_hidden)},
      {"sigma_min", format_double(sigma_min)},
      {"target_shift", format_double(target_shift)},
      {"target_scale", format_double(target_scale)},
      {"seed", std::to_string(seed)},
  };
}

ModelConfig ModelConfig::from_meta(const std::map<std::string, std::string>& meta) {
  ModelConfig c;
  c.kind = parse_model_kind(require(meta, "kind"));
  auto size = [&](const char* key) { return static_cast<std::size_t>(parse_u64(key, require(meta, key))); };
  c.vocab_size = size("vocab_size");
  c.encoder_dim = size("encoder_dim");
  c.encoder_kernel = size("encoder_kernel");
  c.channels = size("channels");
  c.kernel = size("kernel");
  c.noise_dim = size("noise_dim");
  c.time_dim = size("time_dim");
  c.time_hidden = size("time_hidden");
  c.sigma_min = parse_double("sigma_min", require(meta, "sigma_min"));
  c.target_shift = parse_double("target_shift", require(meta, "target_shift"));
  c.target_scale = parse_double("target_scale", require(meta, "target_scale"));
  c.seed = parse_u64("seed", require(meta, "seed"));
  return c;
}

// ---------------------------------------------------------------------------
// PackedBatch

PackedBatch pack(std::span<const ConditioningSequence* const> sequences, std::size_t gap) {
  if (sequences.empty()) throw std::invalid_argument("pack: no sequences");
  const std::size_t dim = sequences.front()->vectors.dim(0);
  PackedBatch batch;
  std::size_t columns = 0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = *sequences[i];
    if (s.vectors.rank() != 2 || s.vectors.dim(0) != dim || s.vectors.dim(1) != s.length()) {
      throw std::invalid_argument("pack: sequence " + std::to_string(i) + " has shape " +
                                  shape_to_string(s.vectors.shape()) + ", expected [" +
                                  std::to_string(dim) + ", " + std::to_string(s.length()) + "]");
    }
    if (i > 0) columns += gap;
    batch.offsets.push_back(columns);
    batch.lengths.push_back(s.length());
    columns += s.length();
  }
  std::vector<double> cond(dim * columns, 0.0), valid(columns, 0.0);
  batch.loss_mask.assign(columns, 0);
  batch.column_sequence.assign(columns, 0);
  std::size_t owner = 0;
  for (std::size_t col = 0; col < columns; ++col) {
    while (owner + 1 < batch.offsets.size() && col >= batch.offsets[owner + 1]) ++owner;
    batch.column_sequence[col] = owner;
  }
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = *sequences[i];
    const auto src = s.vectors.data();
    const std::size_t len = s.length(), off = batch.offsets[i];
    for (std::size_t d = 0; d < dim; ++d) {
      for (std::size_t t = 0; t < len; ++t) cond[d * columns + off + t] = src[d * len + t];
    }
    for (std::size_t t = 0; t < len; ++t) {
      valid[off + t] = 1.0;
      batch.loss_mask[off + t] = s.mask[t];
    }
  }
  batch.cond = Tensor({dim, columns}, std::move(cond));
  batch.valid = Tensor::vector(std::move(valid));
  return batch;
}

Tensor PackedBatch::pack_values(std::span<const std::vector<double>> per_sequence) const {
  if (per_sequence.size() != sequences()) throw std::invalid_argument("pack_values: sequence count mismatch");
  std::vector<double> out(columns(), 0.0);
  for (std::size_t i = 0; i < sequences(); ++i) {
    if (per_sequence[i].size() != lengths[i]) throw std::invalid_argument("pack_values: length mismatch");
    std::copy(per_sequence[i].begin(), per_sequence[i].end(), out.begin() + static_cast<std::ptrdiff_t>(offsets[i]));
  }
  return Tensor::vector(std::move(out));
}

std::vector<double> PackedBatch::unpack(const Tensor& packed, std::size_t i) const {
  auto d = packed.data();
  return std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                             d.begin() + static_cast<std::ptrdiff_t>(offsets[i] + lengths[i]));
}

// ---------------------------------------------------------------------------
// DurationModel

DurationModel::DurationModel(const ModelConfig& config) : config_(config), registry_(config.seed) {
  if (config.kernel % 2 == 0 || config.encoder_kernel % 2 == 0) {
    throw std::invalid_argument("model config: kernel widths must be odd");
  }
  if (config.target_scale <= 0.0) throw std::invalid_argument("model config: target_scale must be positive");
  encoder_ = Encoder(registry_, EncoderConfig{config.vocab_size, config.encoder_dim, config.encoder_kernel});
  const bool fm = config.kind == ModelKind::fm;
  const std::size_t in = config.encoder_dim + (fm ? config.noise_dim : 0);
  conv1_ = registry_.conv1d("predictor.conv1", in, config.channels, config.kernel);
  norm1_ = registry_.layer_norm("predictor.norm1", config.channels);
  conv2_ = registry_.conv1d("predictor.conv2", config.channels, config.channels, config.kernel);
  norm2_ = registry_.layer_norm("predictor.norm2", config.channels);
  proj_ = registry_.linear("predictor.proj", config.channels, 1);
  if (fm) {
    noise_proj_ = registry_.linear("flow.noise_proj", 1, config.noise_dim);
    time_ = registry_.time_embedding("flow.time", config.time_dim, config.time_hidden);
    time_proj1_ = registry_.linear("flow.time_proj1", config.time_dim, config.channels);
    time_proj2_ = registry_.linear("flow.time_proj2", config.time_dim, config.channels);
  }
}

std::vector<Parameter> DurationModel::predictor_parameters() const {
  std::vector<Parameter> out;
  for (const auto& p : registry_.parameters()) {
    if (!p.name.starts_with("encoder.")) out.push_back(p);
  }
  return out;
}

std::vector<LayerSpec> DurationModel::predictor_layers() const {
  std::vector<LayerSpec> out;
  for (const auto& l : registry_.layers()) {
    if (!l.name.starts_with("encoder.")) out.push_back(l);
  }
  return out;
}

double DurationModel::to_state(double log_duration) const {
  return (log_duration - config_.target_shift) / config_.target_scale;
}

double DurationModel::from_state(double state) const {
  return state * config_.target_scale + config_.target_shift;
}

std::string DurationModel::id() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fingerprint(parameters())));
  return std::string(to_string(config_.kind)) + "-" + buf;
}

Tensor DurationModel::backbone(const Tensor& input, const PackedBatch& batch, const Tensor& time1,
                               const Tensor& time2) const {
  Tensor h = conv1_.forward(input);
  if (time1.defined()) h = add(h, time1);
  h = mul(norm1_.forward(relu(h)), batch.valid);
  h = conv2_.forward(h);
  if (time2.defined()) h = add(h, time2);
  h = mul(norm2_.forward(relu(h)), batch.valid);
  Tensor out = reshape(proj_.forward(h), Shape{batch.columns()});
  return mul(out, batch.valid);
}

Tensor DurationModel::det_head(const PackedBatch& batch) const {
  if (config_.kind != ModelKind::det) throw std::logic_error("det_head called on an FM model");
  return backbone(batch.cond, batch, Tensor(), Tensor());
}

Tensor DurationModel::vector_field(const PackedBatch& batch, const Tensor& x_t,
                                   std::span<const double> t) const {
  if (config_.kind != ModelKind::fm) throw std::logic_error("vector_field called on a DET model");
  if (x_t.shape() != Shape{batch.columns()}) {
    throw std::invalid_argument("vector_field: x_t shape " + shape_to_string(x_t.shape()) +
                                " does not match batch of " + std::to_string(batch.columns()) + " columns");
  }
  if (t.size() != batch.sequences()) throw std::invalid_argument("vector_field: need one t per sequence");
  Tensor noisy = noise_proj_.forward(reshape(x_t, Shape{1, batch.columns()}));
  Tensor input = concat_rows(batch.cond, mul(noisy, batch.valid));
  Tensor temb = time_.forward(t);
  Tensor time1 = gather_columns(time_proj1_.forward(temb), batch.column_sequence);
  Tensor time2 = gather_columns(time_proj2_.forward(temb), batch.column_sequence);
  return backbone(input, batch, time1, time2);
}

Checkpoint DurationModel::to_checkpoint() const {
  Checkpoint ck;
  ck.meta = config_.to_meta();
  ck.meta["trained_steps"] = std::to_string(trained_steps_);
  ck.meta["model_id"] = id();
  ck.layers = registry_.layers();
  for (const auto& p : registry_.parameters()) ck.tensors.push_back(Parameter{p.name, p.value.detach()});
  return ck;
}

DurationModel DurationModel::from_checkpoint(const Checkpoint& checkpoint) {
  DurationModel model(ModelConfig::from_meta(checkpoint.meta));
  if (checkpoint.layers != model.layers()) {
    throw std::invalid_argument("checkpoint: layer specs do not match the model config");
  }
  auto& params = model.parameters();
  if (checkpoint.tensors.size() != params.size()) {
    throw std::invalid_argument("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                                std::to_string(checkpoint.tensors.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = checkpoint.tensors[i];
    if (src.name != params[i].name || src.value.shape() != params[i].value.shape()) {
      throw std::invalid_argument("checkpoint: tensor " + src.name + " " + shape_to_string(src.value.shape()) +
                                  " does not match " + params[i].name + " " +
                                  shape_to_string(params[i].value.shape()));
    }
    auto dst = params[i].value.mutable_data();
    std::copy(src.value.data().begin(), src.value.data().end(), dst.begin());
  }
  if (auto it = checkpoint.meta.find("trained_steps"); it != checkpoint.meta.end()) {
    model.trained_steps_ = std::stoll(it->second);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Deterministic head

LogDurations det_forward(const DurationModel& model, const ConditioningSequence& cond) {
  const ConditioningSequence* seqs[] = {&cond};
  PackedBatch batch = pack(seqs, model.gap());
  Tensor out = model.det_head(batch);
  return LogDurations{Tensor::vector(batch.unpack(out, 0)), cond.mask};
}

namespace {

Tensor masked_mean_square(const Tensor& diff, std::span<const std::uint8_t> mask) {
  std::vector<double> m(mask.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    m[i] = mask[i] ? 1.0 : 0.0;
    count += mask[i] ? 1 : 0;
  }
  if (count == 0) throw std::invalid_argument("loss: no unmasked positions");
  Tensor masked = mul(diff, Tensor::vector(std::move(m)));
  return scale(sum(mul(masked, masked)), 1.0 / static_cast<double>(count));
}

}  // namespace

Tensor det_loss(const LogDurations& pred, const LogDurations& ref) {
  if (pred.length() != ref.length() || pred.values.size() != ref.values.size() ||
      pred.values.size() != pred.length()) {
    throw std::invalid_argument("det_loss: length mismatch " + std::to_string(pred.length()) + " vs " +
                                std::to_string(ref.length()));
  }
  std::vector<std::uint8_t> mask(pred.length());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = pred.mask[i] && ref.mask[i];
  return masked_mean_square(sub(pred.values, ref.values), mask);
}

// ---------------------------------------------------------------------------
// Flow matching

FlowPair cfm_pair(const Tensor& x1, const Tensor& x0, double t, double sigma) {
  if (x1.shape() != x0.shape()) {
    throw std::invalid_argument("cfm_pair: shape mismatch " + shape_to_string(x1.shape()) + " vs " +
                                shape_to_string(x0.shape()));
  }
  const double noise_weight = 1.0 - (1.0 - sigma) * t;
  std::vector<double> xt(x1.size()), ut(x1.size());
  auto a = x1.data(), b = x0.data();
  for (std::size_t i = 0; i < xt.size(); ++i) {
    xt[i] = noise_weight * b[i] + t * a[i];
    ut[i] = a[i] - (1.0 - sigma) * b[i];
  }
  return FlowPair{Tensor(x1.shape(), std::move(xt)), Tensor(x1.shape(), std::move(ut))};
}

FlowDraws draw_flow_noise(const PackedBatch& batch, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  FlowDraws draws;
  for (std::size_t i = 0; i < batch.sequences(); ++i) draws.t.push_back(uniform(rng));
  std::vector<double> x0(batch.columns(), 0.0);
  for (std::size_t i = 0; i < batch.sequences(); ++i) {
    for (std::size_t c = 0; c < batch.lengths[i]; ++c) x0[batch.offsets[i] + c] = normal(rng);
  }
  draws.x0 = Tensor::vector(std::move(x0));
  return draws;
}

Tensor fm_loss(const VectorField& field, const PackedBatch& batch, const Tensor& x1,
               const FlowDraws& draws, double sigma) {
  const std::size_t n = batch.columns();
  if (x1.shape() != Shape{n} || draws.x0.shape() != Shape{n} || draws.t.size() != batch.sequences()) {
    throw std::invalid_argument("fm_loss: targets/draws do not match the batch layout");
  }
  std::vector<double> xt(n, 0.0), ut(n, 0.0);
  auto a = x1.data(), b = draws.x0.data();
  for (std::size_t col = 0; col < n; ++col) {
    if (batch.valid.data()[col] == 0.0) continue;
    const double t = draws.t[batch.column_sequence[col]];
    xt[col] = (1.0 - (1.0 - sigma) * t) * b[col] + t * a[col];
    ut[col] = a[col] - (1.0 - sigma) * b[col];
  }
  Tensor v = field(batch, Tensor::vector(std::move(xt)), draws.t);
  return masked_mean_square(sub(v, Tensor::vector(std::move(ut))), batch.loss_mask);
}

Tensor fm_loss(const DurationModel& model, const PackedBatch& batch, const LogDurations& ref, Rng& rng) {
  if (ref.length() != batch.columns()) {
    throw std::invalid_argument("fm_loss: reference has " + std::to_string(ref.length()) +
                                " positions, batch has " + std::to_string(batch.columns()));
  }
  PackedBatch masked = batch;
  for (std::size_t i = 0; i < masked.loss_mask.size(); ++i) masked.loss_mask[i] &= ref.mask[i];
  std::vector<double> x1(batch.columns(), 0.0);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    if (batch.valid.data()[i] != 0.0) x1[i] = model.to_state(ref.values.data()[i]);
  }
  FlowDraws draws = draw_flow_noise(batch, rng);
  VectorField field = [&model](const PackedBatch& b, const Tensor& x, std::span<const double> t) {
    return model.vector_field(b, x, t);
  };
  return fm_loss(field, masked, Tensor::vector(std::move(x1)), draws, model.config().sigma_min);
}

std::vector<double> euler_sample(const VectorField& field, const PackedBatch& batch, const SampleOptions& opts) {
  if (opts.nfe < 1) throw std::invalid_argument("sampling: nfe must be >= 1, got " + std::to_string(opts.nfe));
  if (!(opts.temperature >= 0.0)) throw std::invalid_argument("sampling: temperature must be >= 0");
  Tape::NoGrad no_grad;
  const std::size_t n = batch.columns();
  std::vector<double> x(n, 0.0);
  if (opts.temperature > 0.0) {
    Rng rng(derive_seed(opts.seed, 0));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t col = 0; col < n; ++col) {
      if (batch.valid.data()[col] != 0.0) x[col] = opts.temperature * normal(rng);
    }
  }
  const double dt = 1.0 / static_cast<double>(opts.nfe);
  std::vector<double> t(batch.sequences());
  for (int step = 0; step < opts.nfe; ++step) {
    std::fill(t.begin(), t.end(), static_cast<double>(step) * dt);
    Tensor v = field(batch, Tensor::vector(x), t);
    auto vd = v.data();
    for (std::size_t col = 0; col < n; ++col) x[col] += dt * vd[col];
  }
  return x;
}

LogDurations fm_sample(const DurationModel& model, const ConditioningSequence& cond, const SampleOptions& opts) {
  const ConditioningSequence* seqs[] = {&cond};
  PackedBatch batch = pack(seqs, model.gap());
  VectorField field = [&model](const PackedBatch& b, const Tensor& x, std::span<const double> t) {
    return model.vector_field(b, x, t);
  };
  auto state = euler_sample(field, batch, opts);
  std::vector<double> out(cond.length());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.from_state(state[batch.offsets[0] + i]);
  return LogDurations{Tensor::vector(std::move(out)), cond.mask};
}

LogDurations predict_log_durations(const DurationModel& model, const ConditioningSequence& cond,
                                   const SampleOptions& opts) {
  if (model.kind() == ModelKind::det) {
    Tape::NoGrad no_grad;
    return det_forward(model, cond);
  }
  return fm_sample(model, cond, opts);
}

// ---------------------------------------------------------------------------
// Quantisation and upsampling

std::vector<int> to_frames(const LogDurations& log_dur, int min_duration) {
  if (min_duration < 0) throw std::invalid_argument("to_frames: min_duration must be >= 0");
  auto v = log_dur.values.data();
  std::vector<int> out(v.size());
  // exp(v) must stay representable as an int
  const double limit = std::log(static_cast<double>(std::numeric_limits<int>::max() / 2));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw std::domain_error("to_frames: non-finite log duration at position " + std::to_string(i));
    }
    if (v[i] > limit) {
      throw std::domain_error("to_frames: log duration " + std::to_string(v[i]) + " too large at position " +
                              std::to_string(i));
    }
    out[i] = std::max(min_duration, static_cast<int>(std::round(std::exp(v[i]))));
  }
  return out;
}

double quantisation_residual(const LogDurations& log_dur) {
  auto v = log_dur.values.data();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!log_dur.mask[i]) continue;
    const double d = std::exp(v[i]);
    total += std::abs(d - std::round(d));
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Tensor length_regulate(const ConditioningSequence& cond, std::span<const int> frames) {
  if (frames.size() != cond.length()) {
    throw std::invalid_argument("length_regulate: " + std::to_string(frames.size()) + " durations for " +
                                std::to_string(cond.length()) + " positions");
  }
  std::vector<std::size_t> index;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t] < 0) {
      throw std::invalid_argument("length_regulate: negative duration " + std::to_string(frames[t]) +
                                  " at position " + std::to_string(t));
    }
    index.insert(index.end(), static_cast<std::size_t>(frames[t]), t);
  }
  return gather_columns(cond.vectors, index);
}

}  // namespace durflow
