#include "durflow/ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace durflow {

namespace {

using detail::Buffer;
using detail::Node;
using NodePtr = std::shared_ptr<Node>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Buffer& v, std::size_t rows, std::size_t cols) {
  return ConstMatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap as_matrix(Buffer& v, std::size_t rows, std::size_t cols) {
  return MatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

bool tracks(const Tensor& t) { return t.defined() && t.requires_grad(); }

/// Active tape if any of `inputs` needs a gradient, otherwise nullptr.
Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = Tape::current();
  if (tape == nullptr) return nullptr;
  for (const Tensor* t : inputs) {
    if (tracks(*t)) return tape;
  }
  return nullptr;
}

Buffer* grad_of(const NodePtr& node) {
  return node && node->requires_grad ? &node->ensure_grad() : nullptr;
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_to_string(a) + " vs " +
                              shape_to_string(b));
}

void require_rank(const char* op, const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " +
                                std::to_string(rank) + ", got " + shape_to_string(t.shape()));
  }
}

/// Maps each flat index of `a` to the flat index of the broadcast operand.
/// Empty result means the shapes are identical.
std::vector<std::size_t> broadcast_index(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return {};
  if (b.size() > a.size()) shape_error(op, a, b);
  const std::size_t offset = a.size() - b.size();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] != a[offset + i] && b[i] != 1) shape_error(op, a, b);
  }
  std::vector<std::size_t> b_strides(a.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = b.size(); i-- > 0;) {
    b_strides[offset + i] = b[i] == 1 ? 0 : stride;
    stride *= b[i];
  }
  const std::size_t n = shape_size(a);
  std::vector<std::size_t> index(n);
  std::vector<std::size_t> coord(a.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t bi = 0;
    for (std::size_t d = 0; d < a.size(); ++d) bi += coord[d] * b_strides[d];
    index[flat] = bi;
    for (std::size_t d = a.size(); d-- > 0;) {
      if (++coord[d] < a[d]) break;
      coord[d] = 0;
    }
  }
  return index;
}

Tensor binary(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  const char* name = to_string(op);
  if (!b.defined()) throw std::invalid_argument(std::string(name) + ": missing second operand");
  auto index = broadcast_index(name, a.shape(), b.shape());
  const auto& av = a.node()->data;
  const auto& bv = b.node()->data;
  const std::size_t n = av.size();
  Buffer out(n);
  auto bidx = [&](std::size_t i) { return index.empty() ? i : index[i]; };
  switch (op) {
    case ElementwiseOp::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[bidx(i)];
      break;
    case ElementwiseOp::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[bidx(i)];
      break;
    case ElementwiseOp::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[bidx(i)];
      break;
    default:
      throw std::logic_error("binary: not a binary op");
  }
  Tensor result = Tensor::from_buffer(a.shape(), std::move(out));
  if (Tape* tape = recording_tape({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    tape->record({an, bn}, on, [op, an, bn, on, index = std::move(index)] {
      const auto& g = on->grad;
      auto bidx = [&](std::size_t i) { return index.empty() ? i : index[i]; };
      // a and b may alias; read values before accumulating.
      if (auto* ga = grad_of(an)) {
        if (op == ElementwiseOp::mul) {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bn->data[bidx(i)];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        }
      }
      if (auto* gb = grad_of(bn)) {
        const double sign = op == ElementwiseOp::sub ? -1.0 : 1.0;
        if (op == ElementwiseOp::mul) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[bidx(i)] += g[i] * an->data[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[bidx(i)] += sign * g[i];
        }
      }
    });
  }
  return result;
}

Tensor unary(ElementwiseOp op, const Tensor& a, double factor) {
  const auto& av = a.node()->data;
  Buffer out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    switch (op) {
      case ElementwiseOp::scale: out[i] = av[i] * factor; break;
      case ElementwiseOp::exp: out[i] = std::exp(av[i]); break;
      case ElementwiseOp::log: out[i] = std::log(av[i]); break;
      case ElementwiseOp::relu: out[i] = av[i] > 0.0 ? av[i] : 0.0; break;
      default: throw std::logic_error("unary: not a unary op");
    }
  }
  Tensor result = Tensor::from_buffer(a.shape(), std::move(out));
  if (Tape* tape = recording_tape({&a})) {
    NodePtr an = a.node(), on = result.node();
    tape->record({an}, on, [op, factor, an, on] {
      const auto& g = on->grad;
      auto& ga = an->ensure_grad();
      const auto& x = an->data;
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (op) {
          case ElementwiseOp::scale: ga[i] += g[i] * factor; break;
          case ElementwiseOp::exp: ga[i] += g[i] * on->data[i]; break;
          case ElementwiseOp::log: ga[i] += g[i] / x[i]; break;
          case ElementwiseOp::relu: ga[i] += x[i] > 0.0 ? g[i] : 0.0; break;
          default: break;
        }
      }
    });
  }
  return result;
}

}  // namespace

const char* to_string(ElementwiseOp op) {
  switch (op) {
    case ElementwiseOp::add: return "add";
    case ElementwiseOp::sub: return "sub";
    case ElementwiseOp::mul: return "mul";
    case ElementwiseOp::scale: return "scale";
    case ElementwiseOp::exp: return "exp";
    case ElementwiseOp::log: return "log";
    case ElementwiseOp::relu: return "relu";
  }
  return "?";
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b, double factor) {
  switch (op) {
    case ElementwiseOp::add:
    case ElementwiseOp::sub:
    case ElementwiseOp::mul:
      return binary(op, a, b);
    default:
      return unary(op, a, factor);
  }
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(ElementwiseOp::mul, a, b); }
Tensor scale(const Tensor& a, double factor) { return unary(ElementwiseOp::scale, a, factor); }
Tensor exp(const Tensor& a) { return unary(ElementwiseOp::exp, a, 1.0); }
Tensor log(const Tensor& a) { return unary(ElementwiseOp::log, a, 1.0); }
Tensor relu(const Tensor& a) { return unary(ElementwiseOp::relu, a, 1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2, "left operand");
  require_rank("matmul", b, 2, "right operand");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
  Buffer out(m * n);
  as_matrix(out, m, n).noalias() = as_matrix(a.node()->data, m, k) * as_matrix(b.node()->data, k, n);
  Tensor result = Tensor::from_buffer({m, n}, std::move(out));
  if (Tape* tape = recording_tape({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    tape->record({an, bn}, on, [an, bn, on, m, k, n] {
      auto g = as_matrix(on->grad, m, n);
      if (auto* ga = grad_of(an)) {
        as_matrix(*ga, m, k).noalias() += g * as_matrix(bn->data, k, n).transpose();
      }
      if (auto* gb = grad_of(bn)) {
        as_matrix(*gb, k, n).noalias() += as_matrix(an->data, m, k).transpose() * g;
      }
    });
  }
  return result;
}

namespace {

// col[(c * k + j), t] = x[c, t + j - pad], zero outside [0, T).
void im2col(const Buffer& x, std::size_t c_in, std::size_t steps, std::size_t k,
            Buffer& col) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  col.assign(c_in * k * steps, 0.0);
  for (std::size_t c = 0; c < c_in; ++c) {
    const double* src = x.data() + c * steps;
    for (std::size_t j = 0; j < k; ++j) {
      double* dst = col.data() + (c * k + j) * steps;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t hi =
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(steps), static_cast<std::ptrdiff_t>(steps) - shift);
      for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t] = src[t + shift];
    }
  }
}

void col2im_add(const Buffer& col, std::size_t c_in, std::size_t steps, std::size_t k,
                Buffer& gx) {
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t c = 0; c < c_in; ++c) {
    double* dst = gx.data() + c * steps;
    for (std::size_t j = 0; j < k; ++j) {
      const double* src = col.data() + (c * k + j) * steps;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
      const std::ptrdiff_t hi =
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(steps), static_cast<std::ptrdiff_t>(steps) - shift);
      for (std::ptrdiff_t t = lo; t < hi; ++t) dst[t + shift] += src[t];
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require_rank("conv1d", x, 2, "input");
  require_rank("conv1d", kernel, 3, "kernel");
  const std::size_t c_in = x.dim(0), steps = x.dim(1);
  const std::size_t c_out = kernel.dim(0), k = kernel.dim(2);
  if (k % 2 == 0) {
    throw std::invalid_argument("conv1d: kernel width must be odd for same padding, got " +
                                std::to_string(k));
  }
  if (kernel.dim(1) != c_in) shape_error("conv1d", x.shape(), kernel.shape());
  if (bias.defined() && bias.shape() != Shape{c_out}) shape_error("conv1d", kernel.shape(), bias.shape());

  Buffer col;
  im2col(x.node()->data, c_in, steps, k, col);
  Buffer out(c_out * steps);
  auto out_m = as_matrix(out, c_out, steps);
  out_m.noalias() = as_matrix(kernel.node()->data, c_out, c_in * k) * as_matrix(col, c_in * k, steps);
  if (bias.defined()) {
    const auto& bv = bias.node()->data;
    for (std::size_t o = 0; o < c_out; ++o) out_m.row(static_cast<Eigen::Index>(o)).array() += bv[o];
  }
  Tensor result = Tensor::from_buffer({c_out, steps}, std::move(out));
  if (Tape* tape = recording_tape({&x, &kernel, &bias})) {
    NodePtr xn = x.node(), wn = kernel.node(), bn = bias.defined() ? bias.node() : nullptr;
    NodePtr on = result.node();
    tape->record({xn, wn}, on, [xn, wn, bn, on, c_in, c_out, steps, k, col = std::move(col)] {
      auto g = as_matrix(on->grad, c_out, steps);
      if (auto* gw = grad_of(wn)) {
        as_matrix(*gw, c_out, c_in * k).noalias() += g * as_matrix(col, c_in * k, steps).transpose();
      }
      if (auto* gb = grad_of(bn)) {
        for (std::size_t o = 0; o < c_out; ++o) (*gb)[o] += g.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (auto* gx = grad_of(xn)) {
        Buffer gcol(c_in * k * steps);
        as_matrix(gcol, c_in * k, steps).noalias() =
            as_matrix(wn->data, c_out, c_in * k).transpose() * g;
        col2im_add(gcol, c_in, steps, k, *gx);
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank("layer_norm", x, 2, "input");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  const std::size_t channels = x.dim(0), steps = x.dim(1);
  if (gain.shape() != Shape{channels}) shape_error("layer_norm", x.shape(), gain.shape());
  if (bias.shape() != Shape{channels}) shape_error("layer_norm", x.shape(), bias.shape());

  const auto& xv = x.node()->data;
  Buffer mean_col(steps, 0.0), inv_std(steps, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < steps; ++t) mean_col[t] += xv[c * steps + t];
  }
  for (auto& m : mean_col) m /= static_cast<double>(channels);
  Buffer var_col(steps, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double d = xv[c * steps + t] - mean_col[t];
      var_col[t] += d * d;
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    inv_std[t] = 1.0 / std::sqrt(var_col[t] / static_cast<double>(channels) + eps);
  }
  Buffer xhat(xv.size()), out(xv.size());
  const auto& gv = gain.node()->data;
  const auto& bv = bias.node()->data;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < steps; ++t) {
      const std::size_t i = c * steps + t;
      xhat[i] = (xv[i] - mean_col[t]) * inv_std[t];
      out[i] = xhat[i] * gv[c] + bv[c];
    }
  }
  Tensor result = Tensor::from_buffer(x.shape(), std::move(out));
  if (Tape* tape = recording_tape({&x, &gain, &bias})) {
    NodePtr xn = x.node(), gn = gain.node(), bn = bias.node(), on = result.node();
    tape->record({xn, gn, bn}, on,
                 [xn, gn, bn, on, channels, steps, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
                   const auto& g = on->grad;
                   if (auto* gg = grad_of(gn)) {
                     for (std::size_t c = 0; c < channels; ++c) {
                       double acc = 0.0;
                       for (std::size_t t = 0; t < steps; ++t) acc += g[c * steps + t] * xhat[c * steps + t];
                       (*gg)[c] += acc;
                     }
                   }
                   if (auto* gb = grad_of(bn)) {
                     for (std::size_t c = 0; c < channels; ++c) {
                       double acc = 0.0;
                       for (std::size_t t = 0; t < steps; ++t) acc += g[c * steps + t];
                       (*gb)[c] += acc;
                     }
                   }
                   if (auto* gx = grad_of(xn)) {
                     // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                     const auto& gv = gn->data;
                     Buffer m1(steps, 0.0), m2(steps, 0.0);
                     for (std::size_t c = 0; c < channels; ++c) {
                       for (std::size_t t = 0; t < steps; ++t) {
                         const std::size_t i = c * steps + t;
                         const double dxhat = g[i] * gv[c];
                         m1[t] += dxhat;
                         m2[t] += dxhat * xhat[i];
                       }
                     }
                     const double inv_c = 1.0 / static_cast<double>(channels);
                     for (std::size_t c = 0; c < channels; ++c) {
                       for (std::size_t t = 0; t < steps; ++t) {
                         const std::size_t i = c * steps + t;
                         const double dxhat = g[i] * gv[c];
                         (*gx)[i] += inv_std[t] * (dxhat - m1[t] * inv_c - xhat[i] * m2[t] * inv_c);
                       }
                     }
                   }
                 });
  }
  return result;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear", x, 2, "input");
  require_rank("linear", weight, 2, "weight");
  const std::size_t out_dim = weight.dim(0), in_dim = weight.dim(1), steps = x.dim(1);
  if (x.dim(0) != in_dim) shape_error("linear", weight.shape(), x.shape());
  if (bias.defined() && bias.shape() != Shape{out_dim}) shape_error("linear", weight.shape(), bias.shape());
  Buffer out(out_dim * steps);
  auto out_m = as_matrix(out, out_dim, steps);
  out_m.noalias() = as_matrix(weight.node()->data, out_dim, in_dim) * as_matrix(x.node()->data, in_dim, steps);
  if (bias.defined()) {
    const auto& bv = bias.node()->data;
    for (std::size_t o = 0; o < out_dim; ++o) out_m.row(static_cast<Eigen::Index>(o)).array() += bv[o];
  }
  Tensor result = Tensor::from_buffer({out_dim, steps}, std::move(out));
  if (Tape* tape = recording_tape({&x, &weight, &bias})) {
    NodePtr xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : nullptr;
    NodePtr on = result.node();
    tape->record({xn, wn}, on, [xn, wn, bn, on, out_dim, in_dim, steps] {
      auto g = as_matrix(on->grad, out_dim, steps);
      if (auto* gw = grad_of(wn)) {
        as_matrix(*gw, out_dim, in_dim).noalias() += g * as_matrix(xn->data, in_dim, steps).transpose();
      }
      if (auto* gb = grad_of(bn)) {
        for (std::size_t o = 0; o < out_dim; ++o) (*gb)[o] += g.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (auto* gx = grad_of(xn)) {
        as_matrix(*gx, in_dim, steps).noalias() += as_matrix(wn->data, out_dim, in_dim).transpose() * g;
      }
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  Tensor result = Tensor::scalar(acc);
  if (Tape* tape = recording_tape({&a})) {
    NodePtr an = a.node(), on = result.node();
    tape->record({an}, on, [an, on] {
      const double g = on->grad[0];
      for (auto& v : an->ensure_grad()) v += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  require_rank("concat_rows", a, 2, "first operand");
  require_rank("concat_rows", b, 2, "second operand");
  if (a.dim(1) != b.dim(1)) shape_error("concat_rows", a.shape(), b.shape());
  Buffer out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  const std::size_t split = a.size();
  Tensor result = Tensor::from_buffer({a.dim(0) + b.dim(0), a.dim(1)}, std::move(out));
  if (Tape* tape = recording_tape({&a, &b})) {
    NodePtr an = a.node(), bn = b.node(), on = result.node();
    tape->record({an, bn}, on, [an, bn, on, split] {
      const auto& g = on->grad;
      if (auto* ga = grad_of(an)) {
        for (std::size_t i = 0; i < split; ++i) (*ga)[i] += g[i];
      }
      if (auto* gb = grad_of(bn)) {
        for (std::size_t i = split; i < g.size(); ++i) (*gb)[i - split] += g[i];
      }
    });
  }
  return result;
}

Tensor gather_columns(const Tensor& x, std::span<const std::size_t> index) {
  require_rank("gather_columns", x, 2, "input");
  const std::size_t rows = x.dim(0), cols = x.dim(1), n = index.size();
  for (auto j : index) {
    if (j >= cols) {
      throw std::out_of_range("gather_columns: column " + std::to_string(j) + " out of range for " +
                              shape_to_string(x.shape()));
    }
  }
  const auto& xv = x.node()->data;
  Buffer out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] = xv[r * cols + index[j]];
  }
  Tensor result = Tensor::from_buffer({rows, n}, std::move(out));
  if (Tape* tape = recording_tape({&x})) {
    NodePtr xn = x.node(), on = result.node();
    tape->record({xn}, on, [xn, on, rows, cols, n, idx = std::vector<std::size_t>(index.begin(), index.end())] {
      auto& gx = xn->ensure_grad();
      const auto& g = on->grad;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) gx[r * cols + idx[j]] += g[r * n + j];
      }
    });
  }
  return result;
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  require_rank("embedding", table, 2, "table");
  const std::size_t vocab = table.dim(0), width = table.dim(1), steps = ids.size();
  for (std::size_t t = 0; t < steps; ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[t]) + " at position " +
                              std::to_string(t) + " outside vocabulary of size " + std::to_string(vocab));
    }
  }
  const auto& tv = table.node()->data;
  Buffer out(width * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* row = tv.data() + static_cast<std::size_t>(ids[t]) * width;
    for (std::size_t e = 0; e < width; ++e) out[e * steps + t] = row[e];
  }
  Tensor result = Tensor::from_buffer({width, steps}, std::move(out));
  if (Tape* tape = recording_tape({&table})) {
    NodePtr tn = table.node(), on = result.node();
    tape->record({tn}, on, [tn, on, width, steps, idv = std::vector<int>(ids.begin(), ids.end())] {
      auto& gt = tn->ensure_grad();
      const auto& g = on->grad;
      for (std::size_t t = 0; t < steps; ++t) {
        double* row = gt.data() + static_cast<std::size_t>(idv[t]) * width;
        for (std::size_t e = 0; e < width; ++e) row[e] += g[e * steps + t];
      }
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  Tensor result = Tensor::from_buffer(std::move(shape), Buffer(a.data().begin(), a.data().end()));
  if (Tape* tape = recording_tape({&a})) {
    NodePtr an = a.node(), on = result.node();
    tape->record({an}, on, [an, on] { an->accumulate(on->grad); });
  }
  return result;
}

}  // namespace durflow
