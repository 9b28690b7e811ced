#include "durflow/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace durflow {

namespace {

#if defined(__GLIBC__)
// Activation buffers are freed and reallocated every step. Past glibc's
// default mmap threshold each one becomes an mmap/munmap pair, which cost
// about a third of training time.
const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace detail {

Buffer& Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

void Node::accumulate(std::span<const double> g) {
  auto& dst = ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace detail

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::Node>()) {
  node_->data.assign(shape_size(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("tensor: shape " + shape_to_string(shape) + " holds " +
                                std::to_string(shape_size(shape)) + " values, got " +
                                std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data.assign(data.begin(), data.end());
}

Tensor Tensor::from_buffer(Shape shape, detail::Buffer data) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("tensor: shape " + shape_to_string(shape) + " holds " +
                                std::to_string(shape_size(shape)) + " values, got " +
                                std::to_string(data.size()));
  }
  Tensor t;
  t.node_ = std::make_shared<detail::Node>();
  t.node_->shape = std::move(shape);
  t.node_->data = std::move(data);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  t.node_->ensure_grad();
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw std::out_of_range("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                            shape_to_string(shape()));
  }
  return node_->shape[axis];
}

std::span<double> Tensor::mutable_data() {
  if (node_->tape != nullptr) {
    throw std::logic_error("tensor: cannot mutate the output of a recorded operation");
  }
  return node_->data;
}

std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() {
  if (node_->requires_grad) {
    node_->grad.assign(node_->data.size(), 0.0);
  } else {
    node_->grad.clear();
  }
}

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->ensure_grad();
  } else {
    node_->grad.clear();
  }
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("tensor: item() on shape " + shape_to_string(shape()));
  }
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return node_->data.at(i); }

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) {
    throw std::invalid_argument("tensor: at(row, col) on shape " + shape_to_string(shape()));
  }
  return node_->data.at(row * node_->shape[1] + col);
}

Tensor Tensor::detach() const { return from_buffer(node_->shape, node_->data); }

namespace {
thread_local Tape* current_tape = nullptr;
}

Tape::Recording::Recording(Tape& tape) : previous_(current_tape) { current_tape = &tape; }

Tape::Recording::~Recording() { current_tape = previous_; }

Tape::NoGrad::NoGrad() : previous_(current_tape) { current_tape = nullptr; }

Tape::NoGrad::~NoGrad() { current_tape = previous_; }

Tape* Tape::current() { return current_tape; }

Tape::~Tape() {
  for (auto& entry : entries_) {
    entry.output->tape = nullptr;
    entry.output->requires_grad = false;
  }
}

void Tape::record(std::vector<std::shared_ptr<detail::Node>> inputs,
                  std::shared_ptr<detail::Node> output, BackwardFn backward) {
  if (consumed_) throw std::logic_error("tape: cannot record after backward()");
  output->tape = this;
  output->requires_grad = true;
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("tape: backward() already ran on this tape");
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("tape: backward() needs a scalar loss, got shape " +
                                (loss.defined() ? shape_to_string(loss.shape()) : "undefined"));
  }
  if (loss.node()->tape != this) {
    throw std::invalid_argument("tape: loss was not recorded on this tape");
  }
  consumed_ = true;
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from loss
    it->backward();
  }
}

}  // namespace durflow
