#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "durflow/tensor.hpp"

namespace durflow {

struct Parameter {
  std::string name;
  Tensor value;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::int64_t step = 0;

  /// Zeroed moment buffers shaped like `params`.
  static AdamState for_parameters(std::span<const Parameter> params);
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// Throws std::domain_error naming the parameter on a non-finite gradient;
/// in that case nothing is updated.
void adam_step(std::span<Parameter> params, AdamState& state, const AdamConfig& config);

void zero_grad(std::span<Parameter> params);

}  // namespace durflow
