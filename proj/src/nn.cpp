#include "durflow/nn.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "durflow/ops.hpp"
#include "durflow/random.hpp"

namespace durflow {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::embedding: return "embedding";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::layer_norm: return "layer_norm";
    case LayerKind::linear: return "linear";
    case LayerKind::time_embedding: return "time_embedding";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& text) {
  for (auto kind : {LayerKind::embedding, LayerKind::conv1d, LayerKind::layer_norm, LayerKind::linear,
                    LayerKind::time_embedding}) {
    if (text == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown layer kind '" + text + "'");
}

std::size_t param_count(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::embedding:
      return spec.input_dim * spec.output_dim;
    case LayerKind::conv1d:
      return spec.output_dim * spec.input_dim * spec.kernel_width + spec.output_dim;
    case LayerKind::layer_norm:
      return 2 * spec.input_dim;
    case LayerKind::linear:
      return spec.output_dim * spec.input_dim + spec.output_dim;
    case LayerKind::time_embedding:
      return (spec.input_dim * spec.output_dim + spec.output_dim) +
             (spec.output_dim * spec.input_dim + spec.input_dim);
  }
  return 0;
}

std::size_t param_count(std::span<const LayerSpec> specs) {
  std::size_t n = 0;
  for (const auto& s : specs) n += param_count(s);
  return n;
}

std::size_t param_count(std::span<const Parameter> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

Tensor Embedding::forward(std::span<const int> ids) const { return embedding(table, ids); }

Tensor Conv1d::forward(const Tensor& x) const { return conv1d(x, weight, bias); }

Tensor LayerNorm::forward(const Tensor& x) const { return layer_norm(x, gain, bias, eps); }

Tensor Linear::forward(const Tensor& x) const { return linear(x, weight, bias); }

std::vector<double> sinusoidal_encoding(double t, std::size_t dim, double scale) {
  if (dim == 0 || dim % 2 != 0) {
    throw std::invalid_argument("sinusoidal_encoding: dim must be even and positive, got " +
                                std::to_string(dim));
  }
  const std::size_t half = dim / 2;
  const double step = half > 1 ? std::log(10000.0) / static_cast<double>(half - 1) : 0.0;
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double angle = scale * t * std::exp(-step * static_cast<double>(i));
    out[2 * i] = std::sin(angle);
    out[2 * i + 1] = std::cos(angle);
  }
  return out;
}

Tensor TimeEmbedding::forward(std::span<const double> t) const {
  const std::size_t batch = t.size();
  std::vector<double> raw(dim * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    auto enc = sinusoidal_encoding(t[b], dim, scale);
    for (std::size_t i = 0; i < dim; ++i) raw[i * batch + b] = enc[i];
  }
  Tensor x({dim, batch}, std::move(raw));
  return fc2.forward(relu(fc1.forward(x)));
}

Tensor sinusoidal_time_embedding(double t, const TimeEmbedding& embedding) {
  const double ts[] = {t};
  return reshape(embedding.forward(ts), Shape{embedding.dim});
}

namespace {

std::vector<double> uniform_values(Rng& rng, std::size_t n, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

Tensor ParameterRegistry::add(const std::string& name, Shape shape, std::vector<double> data) {
  Tensor t = Tensor::parameter(std::move(shape), std::move(data));
  params_.push_back(Parameter{name, t});
  return t;
}

Embedding ParameterRegistry::embedding(const std::string& name, std::size_t vocab, std::size_t dim) {
  Rng rng = make_rng(seed_, layers_.size());
  std::normal_distribution<double> dist(0.0, 0.02);
  std::vector<double> v(vocab * dim);
  for (auto& x : v) x = dist(rng);
  layers_.push_back({name, LayerKind::embedding, vocab, dim, 0});
  return Embedding{add(name + ".table", {vocab, dim}, std::move(v))};
}

Conv1d ParameterRegistry::conv1d(const std::string& name, std::size_t in, std::size_t out,
                                 std::size_t kernel) {
  if (kernel % 2 == 0) throw std::invalid_argument("conv1d " + name + ": kernel width must be odd");
  Rng rng = make_rng(seed_, layers_.size());
  const double bound = std::sqrt(1.0 / static_cast<double>(in * kernel));
  layers_.push_back({name, LayerKind::conv1d, in, out, kernel});
  Conv1d layer;
  layer.weight = add(name + ".weight", {out, in, kernel}, uniform_values(rng, out * in * kernel, bound));
  layer.bias = add(name + ".bias", {out}, uniform_values(rng, out, bound));
  return layer;
}

LayerNorm ParameterRegistry::layer_norm(const std::string& name, std::size_t dim, double eps) {
  layers_.push_back({name, LayerKind::layer_norm, dim, dim, 0});
  LayerNorm layer;
  layer.gain = add(name + ".gain", {dim}, std::vector<double>(dim, 1.0));
  layer.bias = add(name + ".bias", {dim}, std::vector<double>(dim, 0.0));
  layer.eps = eps;
  return layer;
}

Linear ParameterRegistry::linear(const std::string& name, std::size_t in, std::size_t out) {
  Rng rng = make_rng(seed_, layers_.size());
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  layers_.push_back({name, LayerKind::linear, in, out, 0});
  Linear layer;
  layer.weight = add(name + ".weight", {out, in}, uniform_values(rng, out * in, bound));
  layer.bias = add(name + ".bias", {out}, uniform_values(rng, out, bound));
  return layer;
}

TimeEmbedding ParameterRegistry::time_embedding(const std::string& name, std::size_t dim,
                                                std::size_t hidden) {
  if (dim == 0 || dim % 2 != 0) {
    throw std::invalid_argument("time embedding " + name + ": dim must be even");
  }
  Rng rng = make_rng(seed_, layers_.size());
  layers_.push_back({name, LayerKind::time_embedding, dim, hidden, 0});
  TimeEmbedding te;
  te.dim = dim;
  const double b1 = std::sqrt(1.0 / static_cast<double>(dim));
  const double b2 = std::sqrt(1.0 / static_cast<double>(hidden));
  te.fc1.weight = add(name + ".fc1.weight", {hidden, dim}, uniform_values(rng, hidden * dim, b1));
  te.fc1.bias = add(name + ".fc1.bias", {hidden}, uniform_values(rng, hidden, b1));
  te.fc2.weight = add(name + ".fc2.weight", {dim, hidden}, uniform_values(rng, dim * hidden, b2));
  te.fc2.bias = add(name + ".fc2.bias", {dim}, uniform_values(rng, dim, b2));
  return te;
}

}  // namespace durflow
