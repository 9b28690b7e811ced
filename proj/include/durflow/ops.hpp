#pragma once

#include <cstddef>
#include <span>

#include "durflow/tensor.hpp"

// Differentiable tensor operations. Each records onto the active tape when
// one is active and at least one input requires grad.
//
// Broadcasting: only the second operand of a binary op broadcasts. Its shape
// is aligned with the first operand's trailing dimensions; each aligned size
// must match or be 1. Anything else throws std::invalid_argument naming both
// shapes.

namespace durflow {

enum class ElementwiseOp { add, sub, mul, scale, exp, log, relu };

const char* to_string(ElementwiseOp op);

/// `b` is required for add/sub/mul and ignored otherwise; `factor` is used by
/// scale only.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b = Tensor(),
                   double factor = 1.0);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);

/// [m x k] * [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Same-padded 1-D convolution (cross-correlation, zero padding).
/// x: [c_in x T], kernel: [c_out x c_in x k] with odd k, bias: [c_out] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias = Tensor());

/// Normalises every column of x: [C x T] over its C channels, then applies
/// per-channel gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// weight: [out x in], x: [in x T], bias: [out] or undefined. Returns [out x T].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Stacks [ra x T] on top of [rb x T].
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// out[:, j] = x[:, index[j]]; gradient scatter-adds back.
Tensor gather_columns(const Tensor& x, std::span<const std::size_t> index);

/// table: [V x E]; returns [E x T] with column t equal to row ids[t].
Tensor embedding(const Tensor& table, std::span<const int> ids);

Tensor reshape(const Tensor& a, Shape shape);

}  // namespace durflow
