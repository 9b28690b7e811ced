#include "durflow/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace durflow {

AdamState AdamState::for_parameters(std::span<const Parameter> params) {
  AdamState state;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.value.size(), 0.0);
    state.second_moment.emplace_back(p.value.size(), 0.0);
  }
  return state;
}

void adam_step(std::span<Parameter> params, AdamState& state, const AdamConfig& config) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adam: state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (state.first_moment[i].size() != p.value.size()) {
      throw std::invalid_argument("adam: moment buffer shape mismatch for " + p.name);
    }
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) throw std::domain_error("adam: non-finite gradient in parameter " + p.name);
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto grad = p.value.grad();
    if (grad.empty()) continue;
    auto data = p.value.mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      data[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void zero_grad(std::span<Parameter> params) {
  for (auto& p : params) p.value.zero_grad();
}

}  // namespace durflow
