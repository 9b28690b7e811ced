#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "durflow/adam.hpp"
#include "durflow/tensor.hpp"

namespace durflow {

enum class LayerKind { embedding, conv1d, layer_norm, linear, time_embedding };

const char* to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& text);

/// Shape description of one parameterised layer. For time_embedding,
/// input_dim is the sinusoidal width and output_dim the hidden width.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::linear;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t kernel_width = 0;

  bool operator==(const LayerSpec&) const = default;
};

std::size_t param_count(const LayerSpec& spec);
std::size_t param_count(std::span<const LayerSpec> specs);
std::size_t param_count(std::span<const Parameter> params);

struct Embedding {
  Tensor table;  // [vocab x dim]
  Tensor forward(std::span<const int> ids) const;
};

struct Conv1d {
  Tensor weight;  // [out x in x k]
  Tensor bias;    // [out]
  Tensor forward(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-5;
  Tensor forward(const Tensor& x) const;
};

struct Linear {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
  Tensor forward(const Tensor& x) const;
};

/// Interleaved sin/cos features of t at geometrically spaced frequencies:
/// element 2i is sin(scale * t * f_i), element 2i+1 is cos(scale * t * f_i),
/// with f_i = 10000^(-i / (dim/2 - 1)). Throws on odd or zero dim.
std::vector<double> sinusoidal_encoding(double t, std::size_t dim, double scale = 1000.0);

/// Sinusoidal encoding followed by Linear(dim, hidden) -> ReLU -> Linear(hidden, dim).
struct TimeEmbedding {
  std::size_t dim = 0;
  double scale = 1000.0;
  Linear fc1;
  Linear fc2;

  /// One column per entry of `t`: [dim x t.size()].
  Tensor forward(std::span<const double> t) const;
};

/// Embedding vector of a single step t, shape [dim].
Tensor sinusoidal_time_embedding(double t, const TimeEmbedding& embedding);

/// Creates named, seed-initialised layers and keeps the parameter list and
/// layer specs in creation order. Each layer draws from its own stream.
class ParameterRegistry {
 public:
  explicit ParameterRegistry(std::uint64_t seed) : seed_(seed) {}

  Embedding embedding(const std::string& name, std::size_t vocab, std::size_t dim);
  Conv1d conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel);
  LayerNorm layer_norm(const std::string& name, std::size_t dim, double eps = 1e-5);
  Linear linear(const std::string& name, std::size_t in, std::size_t out);
  TimeEmbedding time_embedding(const std::string& name, std::size_t dim, std::size_t hidden);

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

 private:
  Tensor add(const std::string& name, Shape shape, std::vector<double> data);

  std::uint64_t seed_;
  std::vector<Parameter> params_;
  std::vector<LayerSpec> layers_;
};

}  // namespace durflow
