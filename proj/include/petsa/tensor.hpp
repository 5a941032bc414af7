#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace petsa {

using Shape = std::vector<std::size_t>;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;      // sized lazily, see Tape::touch
  std::uint64_t grad_epoch = 0;  // tape epoch that last zeroed grad
  bool requires_grad = false;
};

/// Dense row-major double tensor. Copies are shallow (shared storage); tensors
/// participating in an open tape are treated as immutable until backward has
/// run. A rank-0 tensor is a scalar.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rank() const { return impl_->shape.size(); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& values() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  /// Value of a size-1 tensor.
  double value() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  /// True once backward has materialized a gradient for this tensor.
  bool has_grad() const;
  const std::vector<double>& grad() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Reverse-mode tape. Constructing a Tape makes it the active recorder for the
/// current thread (restoring the previous one on destruction); ops record
/// backward closures in execution order and backward() replays them in
/// reverse, visiting each node exactly once. One backward per tape.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  /// Ensure impl's gradient is allocated and zeroed for this tape. Gradients
  /// never accumulate across tapes: the first touch by a new tape resets.
  void touch(const std::shared_ptr<TensorImpl>& impl);

  void record(std::function<void()> node);

  void backward_from(const Tensor& root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
  std::uint64_t epoch_;
  Tape* prev_ = nullptr;
  bool consumed_ = false;
};

/// Backward pass on the thread's active tape; root must be scalar.
void backward(const Tensor& root);

// ---- differentiable operations ----

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor tanh(const Tensor& x);

// Elementwise with broadcasting: shapes are right-aligned, missing leading
// axes count as 1, and only size-1 axes stretch. Covers the shapes the
// calibration math needs (scalars, [V] over [B×S×V], [S×V] over [B×S×V]).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double k);
Tensor abs(const Tensor& x);   // subgradient 0 at x = 0
Tensor sqrt(const Tensor& x);  // subgradient 0 at x = 0 (callers keep x away from 0)

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor reduce_sum(const Tensor& x);
Tensor reduce_mean(const Tensor& x);
Tensor reduce_sum(const Tensor& x, std::size_t axis);
Tensor reduce_mean(const Tensor& x, std::size_t axis);
/// Population variance (divide by count) along axis.
Tensor reduce_var(const Tensor& x, std::size_t axis);

/// Contiguous slice along an axis.
Tensor slice_axis(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len);
/// Slice along the time axis of a [B×S×V] tensor.
inline Tensor slice_time(const Tensor& x, std::size_t start, std::size_t len) {
  return slice_axis(x, 1, start, len);
}

Tensor reshape(const Tensor& x, Shape new_shape);
/// [A×B×C] -> [A×B], picking index v on the last axis.
Tensor channel(const Tensor& x, std::size_t v);
/// V tensors of [A×B] -> [A×B×V].
Tensor stack_channels(const std::vector<Tensor>& channels);
/// [A×B×C] -> [A×C×B].
Tensor transpose_12(const Tensor& x);

}  // namespace petsa
