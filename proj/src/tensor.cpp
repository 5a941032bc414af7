#include "petsa/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <utility>

#include "petsa/errors.hpp"
#include "petsa/kernels.hpp"

namespace petsa {
namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_epoch{1};

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Right-aligned broadcast: pad the shorter rank with leading 1s, stretch
// size-1 axes. Strides are 0 on stretched axes so the same walk serves
// forward and backward.
struct BcastPlan {
  Shape out_shape;
  std::vector<std::size_t> a_stride, b_stride;
  std::size_t count = 1;
};

BcastPlan make_bcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape ap(rank, 1), bp(rank, 1);
  std::copy(a.begin(), a.end(), ap.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), bp.begin() + (rank - b.size()));

  BcastPlan plan;
  plan.out_shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (ap[i] != bp[i] && ap[i] != 1 && bp[i] != 1) {
      throw DimensionError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                           " are not broadcastable");
    }
    plan.out_shape[i] = std::max(ap[i], bp[i]);
  }
  plan.a_stride.assign(rank, 0);
  plan.b_stride.assign(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    plan.a_stride[i] = (ap[i] == 1) ? 0 : sa;
    plan.b_stride[i] = (bp[i] == 1) ? 0 : sb;
    sa *= ap[i];
    sb *= bp[i];
  }
  plan.count = numel(plan.out_shape);
  return plan;
}

template <class F>
void bcast_for_each(const BcastPlan& p, F&& f) {
  const std::size_t rank = p.out_shape.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t offa = 0, offb = 0;
  for (std::size_t lin = 0; lin < p.count; ++lin) {
    f(lin, offa, offb);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      offa += p.a_stride[ax];
      offb += p.b_stride[ax];
      if (idx[ax] < p.out_shape[ax]) break;
      idx[ax] = 0;
      offa -= p.a_stride[ax] * p.out_shape[ax];
      offb -= p.b_stride[ax] * p.out_shape[ax];
    }
  }
}

}  // namespace

// ---- Tensor ----

Tensor Tensor::zeros(Shape shape) {
  auto impl = std::make_shared<TensorImpl>();
  const std::size_t n = numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(n, 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.impl()->data.begin(), t.impl()->data.end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " needs " +
                         std::to_string(numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({}, {value}); }

double Tensor::value() const {
  if (size() != 1) {
    throw DimensionError("Tensor::value: tensor " + shape_str(shape()) + " is not a scalar");
  }
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) {
    throw DimensionError("Tensor::at: index rank mismatch");
  }
  std::size_t off = 0, i = 0;
  for (std::size_t idx : index) {
    off = off * impl_->shape[i] + idx;
    ++i;
  }
  return impl_->data[off];
}

Tensor& Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const {
  return impl_ && impl_->grad.size() == impl_->data.size() && !impl_->data.empty();
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw std::runtime_error("Tensor::grad: gradient not materialized (run backward first)");
  }
  return impl_->grad;
}

// ---- Tape ----

Tape::Tape() : epoch_(g_next_epoch.fetch_add(1)) {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::touch(const std::shared_ptr<TensorImpl>& impl) {
  if (impl->grad_epoch != epoch_) {
    impl->grad.assign(impl->data.size(), 0.0);
    impl->grad_epoch = epoch_;
  }
}

void Tape::record(std::function<void()> node) { nodes_.push_back(std::move(node)); }

void Tape::backward_from(const Tensor& root) {
  if (consumed_) {
    throw std::runtime_error("Tape: backward already ran on this tape");
  }
  if (root.size() != 1) {
    throw DimensionError("backward: root must be a scalar, got " + shape_str(root.shape()));
  }
  consumed_ = true;
  touch(root.impl());
  root.impl()->grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) nodes_[i]();
}

void backward(const Tensor& root) {
  Tape* t = Tape::active();
  if (!t) throw std::runtime_error("backward: no active tape");
  t->backward_from(root);
}

// ---- op plumbing ----

namespace {

bool tracing(std::initializer_list<const Tensor*> inputs) {
  if (!Tape::active()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Mark the output as a graph participant and zero the grads this op will
// accumulate into.
void prepare(Tape* tape, Tensor& out, std::initializer_list<const Tensor*> inputs) {
  out.set_requires_grad(true);
  tape->touch(out.impl());
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) tape->touch(t->impl());
  }
}

enum class BinOp { add, sub, mul, div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const auto& k = kernels::active();
  Tensor out;
  bool same = a.shape() == b.shape();
  BcastPlan plan;
  if (same) {
    out = Tensor::zeros(a.shape());
    switch (op) {
      case BinOp::add: k.add(a.data(), b.data(), out.data(), out.size()); break;
      case BinOp::sub: k.sub(a.data(), b.data(), out.data(), out.size()); break;
      case BinOp::mul: k.mul(a.data(), b.data(), out.data(), out.size()); break;
      case BinOp::div: {
        const double* av = a.data();
        const double* bv = b.data();
        double* ov = out.data();
        for (std::size_t i = 0; i < out.size(); ++i) ov[i] = av[i] / bv[i];
        break;
      }
    }
  } else {
    plan = make_bcast(a.shape(), b.shape(), name);
    out = Tensor::zeros(plan.out_shape);
    const double* av = a.data();
    const double* bv = b.data();
    double* ov = out.data();
    switch (op) {
      case BinOp::add:
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { ov[o] = av[ia] + bv[ib]; });
        break;
      case BinOp::sub:
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { ov[o] = av[ia] - bv[ib]; });
        break;
      case BinOp::mul:
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { ov[o] = av[ia] * bv[ib]; });
        break;
      case BinOp::div:
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { ov[o] = av[ia] / bv[ib]; });
        break;
    }
  }

  if (!tracing({&a, &b})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&a, &b});
  const bool na = a.requires_grad(), nb = b.requires_grad();
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  if (same) {
    tape->record([=]() {
      const auto& kk = kernels::active();
      const std::size_t n = oi->grad.size();
      if (op == BinOp::add) {
        if (na) kk.axpy(1.0, oi->grad.data(), ai->grad.data(), n);
        if (nb) kk.axpy(1.0, oi->grad.data(), bi->grad.data(), n);
      } else if (op == BinOp::sub) {
        if (na) kk.axpy(1.0, oi->grad.data(), ai->grad.data(), n);
        if (nb) kk.axpy(-1.0, oi->grad.data(), bi->grad.data(), n);
      } else if (op == BinOp::mul) {
        const double* g = oi->grad.data();
        if (na) {
          double* ga = ai->grad.data();
          const double* bv = bi->data.data();
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
        }
        if (nb) {
          double* gb = bi->grad.data();
          const double* av = ai->data.data();
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * av[i];
        }
      } else {
        // out = a/b: ga += g/b, gb -= g·out/b
        const double* g = oi->grad.data();
        const double* bv = bi->data.data();
        const double* ov = oi->data.data();
        if (na) {
          double* ga = ai->grad.data();
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / bv[i];
        }
        if (nb) {
          double* gb = bi->grad.data();
          for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i] * ov[i] / bv[i];
        }
      }
    });
  } else {
    tape->record([=]() {
      const double* g = oi->grad.data();
      if (op == BinOp::mul) {
        const double* av = ai->data.data();
        const double* bv = bi->data.data();
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
          if (na) ai->grad[ia] += g[o] * bv[ib];
          if (nb) bi->grad[ib] += g[o] * av[ia];
        });
      } else if (op == BinOp::div) {
        const double* bv = bi->data.data();
        const double* ov = oi->data.data();
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
          if (na) ai->grad[ia] += g[o] / bv[ib];
          if (nb) bi->grad[ib] -= g[o] * ov[o] / bv[ib];
        });
      } else {
        const double sb = (op == BinOp::sub) ? -1.0 : 1.0;
        bcast_for_each(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
          if (na) ai->grad[ia] += g[o];
          if (nb) bi->grad[ib] += sb * g[o];
        });
      }
    });
  }
  return out;
}

// outer/axis/inner decomposition for axis-wise walks
struct AxisSplit {
  std::size_t outer = 1, axis = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(s));
  }
  AxisSplit sp;
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  sp.axis = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  if (sp.axis == 0) {
    throw DimensionError(std::string(op) + ": cannot reduce over empty axis of " + shape_str(s));
  }
  return sp;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out.push_back(s[i]);
  }
  return out;
}

}  // namespace

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = Tensor::zeros({m, n});
  kernels::active().gemm_nn(a.data(), b.data(), out.data(), m, k, n);

  if (!tracing({&a, &b})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&a, &b});
  const bool na = a.requires_grad(), nb = b.requires_grad();
  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  tape->record([=]() {
    const auto& kk = kernels::active();
    // a_grad += g · bᵀ ; b_grad += aᵀ · g
    if (na) kk.gemm_nt(oi->grad.data(), bi->data.data(), ai->grad.data(), m, n, k);
    if (nb) kk.gemm_tn(ai->data.data(), oi->grad.data(), bi->grad.data(), k, m, n);
  });
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) ov[i] = std::tanh(xv[i]);

  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double* y = oi->data.data();
    const double* g = oi->grad.data();
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < oi->data.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::div, "div"); }

Tensor sqrt(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) ov[i] = std::sqrt(xv[i]);
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double* y = oi->data.data();
    const double* g = oi->grad.data();
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < oi->data.size(); ++i) {
      if (y[i] > 0.0) gx[i] += g[i] * 0.5 / y[i];
    }
  });
  return out;
}

Tensor scale(const Tensor& x, double k) {
  Tensor out = Tensor::zeros(x.shape());
  kernels::active().scale(x.data(), k, out.data(), x.size());
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() { kernels::active().axpy(k, oi->grad.data(), xi->grad.data(), oi->grad.size()); });
  return out;
}

Tensor abs(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  kernels::active().abs(x.data(), out.data(), x.size());
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double* xv = xi->data.data();
    const double* g = oi->grad.data();
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < xi->data.size(); ++i) {
      if (xv[i] > 0.0) {
        gx[i] += g[i];
      } else if (xv[i] < 0.0) {
        gx[i] -= g[i];
      }
      // x == 0: subgradient 0
    }
  });
  return out;
}

Tensor reduce_sum(const Tensor& x) {
  Tensor out = Tensor::scalar(kernels::active().sum(x.data(), x.size()));
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double g = oi->grad[0];
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += g;
  });
  return out;
}

Tensor reduce_mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("reduce_mean: empty tensor");
  const double inv = 1.0 / static_cast<double>(x.size());
  Tensor out = Tensor::scalar(kernels::active().sum(x.data(), x.size()) * inv);
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double g = oi->grad[0] * inv;
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += g;
  });
  return out;
}

namespace {

enum class Reduce { sum, mean, var };

Tensor reduce_axis_op(const Tensor& x, std::size_t axis, Reduce kind, const char* name) {
  const AxisSplit sp = split_axis(x.shape(), axis, name);
  Tensor out = Tensor::zeros(drop_axis(x.shape(), axis));
  const double* xv = x.data();
  double* ov = out.data();
  const double inv = 1.0 / static_cast<double>(sp.axis);

  std::vector<double> means;
  if (kind == Reduce::var) means.resize(sp.outer * sp.inner);

  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.axis * sp.inner + i;
      double acc = 0.0;
      for (std::size_t r = 0; r < sp.axis; ++r) acc += xv[base + r * sp.inner];
      const std::size_t oix = o * sp.inner + i;
      switch (kind) {
        case Reduce::sum: ov[oix] = acc; break;
        case Reduce::mean: ov[oix] = acc * inv; break;
        case Reduce::var: {
          const double mu = acc * inv;
          means[oix] = mu;
          double ss = 0.0;
          for (std::size_t r = 0; r < sp.axis; ++r) {
            const double d = xv[base + r * sp.inner] - mu;
            ss += d * d;
          }
          ov[oix] = ss * inv;  // population variance
          break;
        }
      }
    }
  }

  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=, means = std::move(means)]() {
    const double* g = oi->grad.data();
    double* gx = xi->grad.data();
    const double* xd = xi->data.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.axis * sp.inner + i;
        const std::size_t oix = o * sp.inner + i;
        switch (kind) {
          case Reduce::sum:
            for (std::size_t r = 0; r < sp.axis; ++r) gx[base + r * sp.inner] += g[oix];
            break;
          case Reduce::mean:
            for (std::size_t r = 0; r < sp.axis; ++r) gx[base + r * sp.inner] += g[oix] * inv;
            break;
          case Reduce::var:
            // d var / d x_r = 2 (x_r − mean) / count
            for (std::size_t r = 0; r < sp.axis; ++r) {
              gx[base + r * sp.inner] += g[oix] * 2.0 * (xd[base + r * sp.inner] - means[oix]) * inv;
            }
            break;
        }
      }
    }
  });
  return out;
}

}  // namespace

Tensor reduce_sum(const Tensor& x, std::size_t axis) {
  return reduce_axis_op(x, axis, Reduce::sum, "reduce_sum");
}
Tensor reduce_mean(const Tensor& x, std::size_t axis) {
  return reduce_axis_op(x, axis, Reduce::mean, "reduce_mean");
}
Tensor reduce_var(const Tensor& x, std::size_t axis) {
  return reduce_axis_op(x, axis, Reduce::var, "reduce_var");
}

Tensor slice_axis(const Tensor& x, std::size_t axis, std::size_t start, std::size_t len) {
  const AxisSplit sp = split_axis(x.shape(), axis, "slice_axis");
  if (len == 0 || start + len > sp.axis) {
    throw DimensionError("slice_axis: range [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of bounds for axis of size " +
                         std::to_string(sp.axis));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  Tensor out = Tensor::zeros(out_shape);
  const double* xv = x.data();
  double* ov = out.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    const double* src = xv + (o * sp.axis + start) * sp.inner;
    double* dst = ov + o * len * sp.inner;
    std::copy(src, src + len * sp.inner, dst);
  }

  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const auto& kk = kernels::active();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      kk.axpy(1.0, oi->grad.data() + o * len * sp.inner,
              xi->grad.data() + (o * sp.axis + start) * sp.inner, len * sp.inner);
    }
  });
  return out;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (numel(new_shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                         " changes element count");
  }
  Tensor out = Tensor::from(std::move(new_shape), x.values());
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record(
      [=]() { kernels::active().axpy(1.0, oi->grad.data(), xi->grad.data(), oi->grad.size()); });
  return out;
}

Tensor channel(const Tensor& x, std::size_t v) {
  if (x.rank() != 3) {
    throw DimensionError("channel: expected rank-3 tensor, got " + shape_str(x.shape()));
  }
  const std::size_t a = x.shape()[0], b = x.shape()[1], c = x.shape()[2];
  if (v >= c) {
    throw DimensionError("channel: index " + std::to_string(v) + " out of range for " +
                         shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros({a, b});
  const double* xv = x.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < a * b; ++i) ov[i] = xv[i * c + v];

  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double* g = oi->grad.data();
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < a * b; ++i) gx[i * c + v] += g[i];
  });
  return out;
}

Tensor stack_channels(const std::vector<Tensor>& channels) {
  if (channels.empty()) throw DimensionError("stack_channels: no inputs");
  const Shape& s0 = channels[0].shape();
  if (s0.size() != 2) {
    throw DimensionError("stack_channels: expected rank-2 inputs, got " + shape_str(s0));
  }
  const std::size_t a = s0[0], b = s0[1], c = channels.size();
  for (const Tensor& t : channels) {
    if (t.shape() != s0) {
      throw DimensionError("stack_channels: mismatched input shapes " + shape_str(s0) + " and " +
                           shape_str(t.shape()));
    }
  }
  Tensor out = Tensor::zeros({a, b, c});
  double* ov = out.data();
  for (std::size_t v = 0; v < c; ++v) {
    const double* xv = channels[v].data();
    for (std::size_t i = 0; i < a * b; ++i) ov[i * c + v] = xv[i];
  }

  bool any = false;
  if (Tape::active()) {
    for (const Tensor& t : channels) any = any || t.requires_grad();
  }
  if (!any) return out;
  Tape* tape = Tape::active();
  out.set_requires_grad(true);
  tape->touch(out.impl());
  std::vector<std::shared_ptr<TensorImpl>> parts;
  parts.reserve(c);
  for (const Tensor& t : channels) {
    if (t.requires_grad()) {
      tape->touch(t.impl());
      parts.push_back(t.impl());
    } else {
      parts.push_back(nullptr);
    }
  }
  auto oi = out.impl();
  tape->record([=]() {
    const double* g = oi->grad.data();
    for (std::size_t v = 0; v < c; ++v) {
      if (!parts[v]) continue;
      double* gx = parts[v]->grad.data();
      for (std::size_t i = 0; i < a * b; ++i) gx[i] += g[i * c + v];
    }
  });
  return out;
}

Tensor transpose_12(const Tensor& x) {
  if (x.rank() != 3) {
    throw DimensionError("transpose_12: expected rank-3 tensor, got " + shape_str(x.shape()));
  }
  const std::size_t a = x.shape()[0], b = x.shape()[1], c = x.shape()[2];
  Tensor out = Tensor::zeros({a, c, b});
  const double* xv = x.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < a; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        ov[(i * c + k) * b + j] = xv[(i * b + j) * c + k];
      }
    }
  }
  if (!tracing({&x})) return out;
  Tape* tape = Tape::active();
  prepare(tape, out, {&x});
  auto xi = x.impl(), oi = out.impl();
  tape->record([=]() {
    const double* g = oi->grad.data();
    double* gx = xi->grad.data();
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        for (std::size_t k = 0; k < c; ++k) {
          gx[(i * b + j) * c + k] += g[(i * c + k) * b + j];
        }
      }
    }
  });
  return out;
}

}  // namespace petsa
