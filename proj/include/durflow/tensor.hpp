#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace durflow {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tape;

namespace detail {

// Eigen peels unaligned leading elements before its vectorised loops, and a
// different peel changes rounding. Aligning every buffer the same way keeps
// results bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct Node {
  Shape shape;
  Buffer data;
  Buffer grad;  // empty until first accumulation
  bool requires_grad = false;
  Tape* tape = nullptr;  // set for outputs of recorded operations

  void accumulate(std::span<const double> g);
  Buffer& ensure_grad();
};

}  // namespace detail

/// Dense row-major float64 array.
///
/// A Tensor is a shared handle: copies alias the same storage, which is what
/// lets the tape route gradients back to parameters. Use clone() or detach()
/// for an independent copy.
class Tensor {
 public:
  /// Undefined handle; used for optional operands.
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  /// Leaf that accumulates gradient; grad buffer is allocated and zeroed.
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor from_buffer(Shape shape, detail::Buffer data);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  /// Writable view. Only legal on tensors that are not tape outputs.
  std::span<double> mutable_data();

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool on_tape() const { return node_->tape != nullptr; }

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t row, std::size_t col) const;

  /// Same data, fresh node, no gradient tracking.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode tape. Operations record here while a Recording scope is
/// active on the current thread and at least one input requires grad.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  /// Outputs recorded here become plain constants once the tape is gone.
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  class Recording {
   public:
    explicit Recording(Tape& tape);
    ~Recording();
    Recording(const Recording&) = delete;
    Recording& operator=(const Recording&) = delete;

   private:
    Tape* previous_;
  };

  /// Suspends recording on this thread for its lifetime.
  class NoGrad {
   public:
    NoGrad();
    ~NoGrad();
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* current();

  /// Appends an operation. `backward` reads output->grad and accumulates into
  /// the inputs that require grad.
  void record(std::vector<std::shared_ptr<detail::Node>> inputs,
              std::shared_ptr<detail::Node> output, BackwardFn backward);

  /// Propagates d(loss)/d(node) to every node reachable from `loss`.
  /// A tape can be replayed only once.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Entry {
    std::vector<std::shared_ptr<detail::Node>> inputs;
    std::shared_ptr<detail::Node> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

}  // namespace durflow
