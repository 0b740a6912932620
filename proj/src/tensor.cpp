#include "numerion/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace numerion {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343819;

std::int64_t product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

void check_shape(const std::vector<std::int64_t>& shape) {
  for (auto e : shape)
    if (e <= 0)
      throw std::invalid_argument("tensor: shape extents must be positive");
}

int norm_axis(int axis, int ndim, const char* who) {
  if (axis < 0) axis += ndim;
  if (axis < 0 || axis >= ndim)
    throw std::invalid_argument(std::string(who) + ": axis out of range");
  return axis;
}

std::vector<std::int64_t> row_major_strides(
    const std::vector<std::int64_t>& shape) {
  std::vector<std::int64_t> s(shape.size(), 1);
  for (int d = static_cast<int>(shape.size()) - 2; d >= 0; --d)
    s[d] = s[d + 1] * shape[d + 1];
  return s;
}

// Right-aligned broadcast plan for two shapes: the output shape plus per-axis
// element strides into each operand (0 where that operand's axis stretches).
struct Bcast {
  std::vector<std::int64_t> out_shape;
  std::vector<std::int64_t> a_stride, b_stride;
  std::int64_t out_numel = 1;
};

Bcast make_bcast(const std::vector<std::int64_t>& as,
                 const std::vector<std::int64_t>& bs, const char* who) {
  const int nd = static_cast<int>(std::max(as.size(), bs.size()));
  Bcast bc;
  bc.out_shape.assign(nd, 1);
  const auto a_str = row_major_strides(as);
  const auto b_str = row_major_strides(bs);
  bc.a_stride.assign(nd, 0);
  bc.b_stride.assign(nd, 0);
  for (int d = 0; d < nd; ++d) {
    const int ai = d - (nd - static_cast<int>(as.size()));
    const int bi = d - (nd - static_cast<int>(bs.size()));
    const std::int64_t ae = ai >= 0 ? as[ai] : 1;
    const std::int64_t be = bi >= 0 ? bs[bi] : 1;
    if (ae != be && ae != 1 && be != 1)
      throw std::invalid_argument(std::string(who) +
                                  ": shapes are not broadcast-compatible");
    bc.out_shape[d] = std::max(ae, be);
    if (ai >= 0 && ae != 1) bc.a_stride[d] = a_str[ai];
    if (bi >= 0 && be != 1) bc.b_stride[d] = b_str[bi];
  }
  bc.out_numel = product(bc.out_shape);
  return bc;
}

// Walks the broadcast output space once, handing (a_off, b_off, out_flat) to
// the visitor via an odometer (no per-element division).
template <class F>
void bcast_walk(const Bcast& bc, F&& visit) {
  const int nd = static_cast<int>(bc.out_shape.size());
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t ao = 0, bo = 0;
  for (std::int64_t i = 0; i < bc.out_numel; ++i) {
    visit(ao, bo, i);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      ao += bc.a_stride[d];
      bo += bc.b_stride[d];
      if (idx[d] < bc.out_shape[d]) break;
      idx[d] = 0;
      ao -= bc.a_stride[d] * bc.out_shape[d];
      bo -= bc.b_stride[d] * bc.out_shape[d];
    }
  }
}

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<std::int64_t>& shape, int axis) {
  AxisSplit s;
  for (int d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (int d = axis + 1; d < static_cast<int>(shape.size()); ++d)
    s.inner *= shape[d];
  return s;
}

// Generic binary elementwise op with broadcasting. `fwd(x, y)` computes the
// value; `da(x, y)` and `db(x, y)` are the partial derivatives.
template <class FwdF, class DaF, class DbF>
TensorPtr binary_elementwise(Tape* tape, const TensorPtr& a, const TensorPtr& b,
                             const char* who, FwdF fwd, DaF da, DbF db) {
  Bcast bc = make_bcast(a->shape, b->shape, who);
  auto out = Tensor::zeros(bc.out_shape);
  const double* pa = a->data.data();
  const double* pb = b->data.data();
  double* po = out->data.data();
  bcast_walk(bc, [&](std::int64_t ao, std::int64_t bo, std::int64_t i) {
    po[i] = fwd(pa[ao], pb[bo]);
  });
  if (tape) {
    tape->record(out, {a, b}, [a, b, out, bc, da, db]() {
      ensure_grad(a);
      ensure_grad(b);
      const double* pa = a->data.data();
      const double* pb = b->data.data();
      const double* g = out->grad.data();
      double* ga = a->grad.data();
      double* gb = b->grad.data();
      bcast_walk(bc, [&](std::int64_t ao, std::int64_t bo, std::int64_t i) {
        ga[ao] += da(pa[ao], pb[bo]) * g[i];
        gb[bo] += db(pa[ao], pb[bo]) * g[i];
      });
    });
  }
  return out;
}

// Generic unary elementwise op. `dfd` receives (x, y) so derivatives can be
// phrased in terms of the cached output (e.g. tanh).
template <class FwdF, class DF>
TensorPtr unary_elementwise(Tape* tape, const TensorPtr& a, FwdF fwd, DF dfd) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->data.size(); ++i)
    out->data[i] = fwd(a->data[i]);
  if (tape) {
    tape->record(out, {a}, [a, out, dfd]() {
      ensure_grad(a);
      for (std::size_t i = 0; i < a->data.size(); ++i)
        a->grad[i] += dfd(a->data[i], out->data[i]) * out->grad[i];
    });
  }
  return out;
}

} // namespace

// ---------------------------------------------------------------------------
// Tensor factories
// ---------------------------------------------------------------------------
TensorPtr Tensor::make(std::vector<std::int64_t> shape,
                       std::vector<double> data, bool requires_grad) {
  check_shape(shape);
  if (product(shape) != static_cast<std::int64_t>(data.size()))
    throw std::invalid_argument(
        "tensor: data length does not match the shape product");
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->data = std::move(data);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  check_shape(shape);
  auto t = std::make_shared<Tensor>();
  t->data.assign(product(shape), 0.0);
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  return t;
}

TensorPtr Tensor::full(std::vector<std::int64_t> shape, double value,
                       bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::fill(t->data.begin(), t->data.end(), value);
  return t;
}

TensorPtr Tensor::randn(std::vector<std::int64_t> shape, std::mt19937_64& rng,
                        double stddev, bool requires_grad) {
  auto t = zeros(std::move(shape), requires_grad);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t->data) v = dist(rng);
  return t;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------
void ensure_grad(const TensorPtr& t) {
  if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
}

void Tape::record(TensorPtr output, std::vector<TensorPtr> inputs,
                  std::function<void()> backward) {
  nodes_.push_back({std::move(output), std::move(inputs), std::move(backward)});
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  ensure_grad(loss);
  loss->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (!it->output->grad.empty()) it->backward();
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------
TensorPtr op_add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_elementwise(
      tape, a, b, "op_add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

TensorPtr op_sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_elementwise(
      tape, a, b, "op_sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

TensorPtr op_mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  return binary_elementwise(
      tape, a, b, "op_mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

TensorPtr op_scale(Tape* tape, const TensorPtr& a, double c) {
  return unary_elementwise(
      tape, a, [c](double x) { return c * x; },
      [c](double, double) { return c; });
}

TensorPtr op_tanh(Tape* tape, const TensorPtr& a) {
  return unary_elementwise(
      tape, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

TensorPtr op_gelu(Tape* tape, const TensorPtr& a) {
  // Exact form: x * Phi(x), Phi the standard normal CDF via erf.
  return unary_elementwise(
      tape, a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x, double) {
        const double Phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        const double phi = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return Phi + x * phi;
      });
}

TensorPtr op_abs(Tape* tape, const TensorPtr& a) {
  return unary_elementwise(
      tape, a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

TensorPtr op_dropout(Tape* tape, const TensorPtr& a, double rate,
                     bool training, std::mt19937_64& rng,
                     std::int64_t group_size) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("op_dropout: rate must lie in [0, 1)");
  if (group_size <= 0 || a->numel() % group_size != 0)
    throw std::invalid_argument(
        "op_dropout: group_size must divide the element count");
  if (!training || rate == 0.0) return op_scale(tape, a, 1.0);

  const std::int64_t groups = a->numel() / group_size;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(groups);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& m : *mask) m = uni(rng) >= rate ? keep_scale : 0.0;

  auto out = Tensor::zeros(a->shape);
  for (std::int64_t g = 0; g < groups; ++g) {
    const double m = (*mask)[g];
    for (std::int64_t c = 0; c < group_size; ++c)
      out->data[g * group_size + c] = a->data[g * group_size + c] * m;
  }
  if (tape) {
    tape->record(out, {a}, [a, out, mask, group_size, groups]() {
      ensure_grad(a);
      for (std::int64_t g = 0; g < groups; ++g) {
        const double m = (*mask)[g];
        for (std::int64_t c = 0; c < group_size; ++c)
          a->grad[g * group_size + c] += out->grad[g * group_size + c] * m;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------
TensorPtr op_reshape(Tape* tape, const TensorPtr& a,
                     std::vector<std::int64_t> new_shape) {
  check_shape(new_shape);
  if (product(new_shape) != a->numel())
    throw std::invalid_argument("op_reshape: element count must be preserved");
  auto out = Tensor::make(std::move(new_shape), a->data);
  if (tape) {
    tape->record(out, {a}, [a, out]() {
      ensure_grad(a);
      for (std::size_t i = 0; i < a->grad.size(); ++i)
        a->grad[i] += out->grad[i];
    });
  }
  return out;
}

TensorPtr op_permute(Tape* tape, const TensorPtr& a,
                     const std::vector<int>& axes) {
  const int nd = static_cast<int>(a->shape.size());
  if (static_cast<int>(axes.size()) != nd)
    throw std::invalid_argument("op_permute: axes length must match rank");
  std::vector<bool> seen(nd, false);
  for (int ax : axes) {
    if (ax < 0 || ax >= nd || seen[ax])
      throw std::invalid_argument("op_permute: axes must be a permutation");
    seen[ax] = true;
  }
  std::vector<std::int64_t> out_shape(nd);
  for (int d = 0; d < nd; ++d) out_shape[d] = a->shape[axes[d]];
  const auto in_str = row_major_strides(a->shape);
  std::vector<std::int64_t> gather_stride(nd);
  for (int d = 0; d < nd; ++d) gather_stride[d] = in_str[axes[d]];

  auto out = Tensor::zeros(out_shape);
  const std::int64_t n = out->numel();
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t src = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    out->data[i] = a->data[src];
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      src += gather_stride[d];
      if (idx[d] < out_shape[d]) break;
      idx[d] = 0;
      src -= gather_stride[d] * out_shape[d];
    }
  }
  if (tape) {
    tape->record(out, {a}, [a, out, out_shape, gather_stride, nd, n]() {
      ensure_grad(a);
      std::vector<std::int64_t> idx(nd, 0);
      std::int64_t src = 0;
      for (std::int64_t i = 0; i < n; ++i) {
        a->grad[src] += out->grad[i];
        for (int d = nd - 1; d >= 0; --d) {
          ++idx[d];
          src += gather_stride[d];
          if (idx[d] < out_shape[d]) break;
          idx[d] = 0;
          src -= gather_stride[d] * out_shape[d];
        }
      }
    });
  }
  return out;
}

TensorPtr op_narrow(Tape* tape, const TensorPtr& a, int axis,
                    std::int64_t start, std::int64_t length) {
  axis = norm_axis(axis, static_cast<int>(a->shape.size()), "op_narrow");
  const AxisSplit s = split_axis(a->shape, axis);
  if (length <= 0 || start < 0 || start + length > s.extent)
    throw std::out_of_range("op_narrow: slice exceeds the axis extent");
  auto out_shape = a->shape;
  out_shape[axis] = length;
  auto out = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t e = 0; e < length; ++e)
      std::copy_n(&a->data[(o * s.extent + start + e) * s.inner], s.inner,
                  &out->data[(o * length + e) * s.inner]);
  if (tape) {
    tape->record(out, {a}, [a, out, s, start, length]() {
      ensure_grad(a);
      for (std::int64_t o = 0; o < s.outer; ++o)
        for (std::int64_t e = 0; e < length; ++e) {
          const double* g = &out->grad[(o * length + e) * s.inner];
          double* ga = &a->grad[(o * s.extent + start + e) * s.inner];
          for (std::int64_t i = 0; i < s.inner; ++i) ga[i] += g[i];
        }
    });
  }
  return out;
}

TensorPtr op_concat(Tape* tape, const std::vector<TensorPtr>& parts, int axis) {
  if (parts.empty())
    throw std::invalid_argument("op_concat: needs at least one part");
  const int nd = static_cast<int>(parts[0]->shape.size());
  axis = norm_axis(axis, nd, "op_concat");
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (static_cast<int>(p->shape.size()) != nd)
      throw std::invalid_argument("op_concat: rank mismatch");
    for (int d = 0; d < nd; ++d)
      if (d != axis && p->shape[d] != parts[0]->shape[d])
        throw std::invalid_argument("op_concat: extent mismatch off-axis");
    total += p->shape[axis];
  }
  auto out_shape = parts[0]->shape;
  out_shape[axis] = total;
  auto out = Tensor::zeros(out_shape);
  const AxisSplit so = split_axis(out_shape, axis);
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const AxisSplit sp = split_axis(p->shape, axis);
    for (std::int64_t o = 0; o < sp.outer; ++o)
      std::copy_n(&p->data[o * sp.extent * sp.inner], sp.extent * sp.inner,
                  &out->data[(o * so.extent + offset) * so.inner]);
    offset += sp.extent;
  }
  if (tape) {
    tape->record(out, {parts.begin(), parts.end()}, [parts, out, so, axis]() {
      std::int64_t offset = 0;
      for (const auto& p : parts) {
        ensure_grad(p);
        const AxisSplit sp = split_axis(p->shape, axis);
        for (std::int64_t o = 0; o < sp.outer; ++o) {
          const double* g = &out->grad[(o * so.extent + offset) * so.inner];
          double* gp = &p->grad[o * sp.extent * sp.inner];
          for (std::int64_t i = 0; i < sp.extent * sp.inner; ++i)
            gp[i] += g[i];
        }
        offset += sp.extent;
      }
    });
  }
  return out;
}

TensorPtr op_gather(Tape* tape, const TensorPtr& a,
                    const std::vector<std::int64_t>& indices, int axis) {
  axis = norm_axis(axis, static_cast<int>(a->shape.size()), "op_gather");
  const AxisSplit s = split_axis(a->shape, axis);
  for (auto ix : indices)
    if (ix < 0 || ix >= s.extent)
      throw std::out_of_range("op_gather: index out of range");
  auto out_shape = a->shape;
  out_shape[axis] = static_cast<std::int64_t>(indices.size());
  const std::int64_t m = out_shape[axis];
  auto out = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t j = 0; j < m; ++j)
      std::copy_n(&a->data[(o * s.extent + indices[j]) * s.inner], s.inner,
                  &out->data[(o * m + j) * s.inner]);
  if (tape) {
    tape->record(out, {a}, [a, out, s, indices, m]() {
      ensure_grad(a);
      for (std::int64_t o = 0; o < s.outer; ++o)
        for (std::int64_t j = 0; j < m; ++j) {
          const double* g = &out->grad[(o * m + j) * s.inner];
          double* ga = &a->grad[(o * s.extent + indices[j]) * s.inner];
          for (std::int64_t i = 0; i < s.inner; ++i) ga[i] += g[i];
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------
namespace {

TensorPtr reduce_axis(Tape* tape, const TensorPtr& a, int axis, bool keepdim,
                      bool mean, const char* who) {
  axis = norm_axis(axis, static_cast<int>(a->shape.size()), who);
  const AxisSplit s = split_axis(a->shape, axis);
  std::vector<std::int64_t> out_shape;
  for (int d = 0; d < static_cast<int>(a->shape.size()); ++d) {
    if (d == axis) {
      if (keepdim) out_shape.push_back(1);
    } else {
      out_shape.push_back(a->shape[d]);
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);
  const double w = mean ? 1.0 / static_cast<double>(s.extent) : 1.0;
  auto out = Tensor::zeros(out_shape);
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t e = 0; e < s.extent; ++e)
      for (std::int64_t i = 0; i < s.inner; ++i)
        out->data[o * s.inner + i] +=
            w * a->data[(o * s.extent + e) * s.inner + i];
  if (tape) {
    tape->record(out, {a}, [a, out, s, w]() {
      ensure_grad(a);
      for (std::int64_t o = 0; o < s.outer; ++o)
        for (std::int64_t e = 0; e < s.extent; ++e)
          for (std::int64_t i = 0; i < s.inner; ++i)
            a->grad[(o * s.extent + e) * s.inner + i] +=
                w * out->grad[o * s.inner + i];
    });
  }
  return out;
}

} // namespace

TensorPtr op_sum(Tape* tape, const TensorPtr& a, int axis, bool keepdim) {
  return reduce_axis(tape, a, axis, keepdim, /*mean=*/false, "op_sum");
}

TensorPtr op_mean(Tape* tape, const TensorPtr& a, int axis, bool keepdim) {
  return reduce_axis(tape, a, axis, keepdim, /*mean=*/true, "op_mean");
}

TensorPtr op_sum_all(Tape* tape, const TensorPtr& a) {
  auto out = Tensor::make({1}, {std::accumulate(a->data.begin(),
                                                a->data.end(), 0.0)});
  if (tape) {
    tape->record(out, {a}, [a, out]() {
      ensure_grad(a);
      const double g = out->grad[0];
      for (auto& v : a->grad) v += g;
    });
  }
  return out;
}

TensorPtr op_mean_all(Tape* tape, const TensorPtr& a) {
  return op_scale(tape, op_sum_all(tape, a),
                  1.0 / static_cast<double>(a->numel()));
}

TensorPtr op_softmax(Tape* tape, const TensorPtr& a, int axis) {
  axis = norm_axis(axis, static_cast<int>(a->shape.size()), "op_softmax");
  const AxisSplit s = split_axis(a->shape, axis);
  auto out = Tensor::zeros(a->shape);
  for (std::int64_t o = 0; o < s.outer; ++o)
    for (std::int64_t i = 0; i < s.inner; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t e = 0; e < s.extent; ++e)
        mx = std::max(mx, a->data[(o * s.extent + e) * s.inner + i]);
      double z = 0.0;
      for (std::int64_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(a->data[(o * s.extent + e) * s.inner + i] - mx);
        out->data[(o * s.extent + e) * s.inner + i] = v;
        z += v;
      }
      for (std::int64_t e = 0; e < s.extent; ++e)
        out->data[(o * s.extent + e) * s.inner + i] /= z;
    }
  if (tape) {
    tape->record(out, {a}, [a, out, s]() {
      ensure_grad(a);
      for (std::int64_t o = 0; o < s.outer; ++o)
        for (std::int64_t i = 0; i < s.inner; ++i) {
          double dot = 0.0;
          for (std::int64_t e = 0; e < s.extent; ++e) {
            const std::int64_t k = (o * s.extent + e) * s.inner + i;
            dot += out->grad[k] * out->data[k];
          }
          for (std::int64_t e = 0; e < s.extent; ++e) {
            const std::int64_t k = (o * s.extent + e) * s.inner + i;
            a->grad[k] += out->data[k] * (out->grad[k] - dot);
          }
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix multiplication (cblas dgemm on the trailing two axes)
// ---------------------------------------------------------------------------
TensorPtr op_matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() < 2 || b->shape.size() < 2)
    throw std::invalid_argument("op_matmul: operands need at least rank 2");
  const std::int64_t m = a->shape[a->shape.size() - 2];
  const std::int64_t k = a->shape.back();
  const std::int64_t k2 = b->shape[b->shape.size() - 2];
  const std::int64_t q = b->shape.back();
  if (k != k2)
    throw std::invalid_argument("op_matmul: inner extents differ");

  const std::vector<std::int64_t> a_batch(a->shape.begin(),
                                          a->shape.end() - 2);
  const std::vector<std::int64_t> b_batch(b->shape.begin(),
                                          b->shape.end() - 2);
  Bcast bc = make_bcast(a_batch, b_batch, "op_matmul");

  std::vector<std::int64_t> out_shape = bc.out_shape;
  out_shape.push_back(m);
  out_shape.push_back(q);
  auto out = Tensor::zeros(out_shape);

  // Flat element offsets of each (A, B, C) matrix triple in the batch.
  auto triples =
      std::make_shared<std::vector<std::array<std::int64_t, 3>>>();
  triples->reserve(bc.out_numel);
  bcast_walk(bc, [&](std::int64_t ao, std::int64_t bo, std::int64_t i) {
    triples->push_back({ao * m * k, bo * k * q, i * m * q});
  });

  for (const auto& t : *triples)
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans,
                static_cast<int>(m), static_cast<int>(q), static_cast<int>(k),
                1.0, a->data.data() + t[0], static_cast<int>(k),
                b->data.data() + t[1], static_cast<int>(q), 0.0,
                out->data.data() + t[2], static_cast<int>(q));

  if (tape) {
    tape->record(out, {a, b}, [a, b, out, triples, m, k, q]() {
      ensure_grad(a);
      ensure_grad(b);
      for (const auto& t : *triples) {
        // dA += dC * B^T
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans,
                    static_cast<int>(m), static_cast<int>(k),
                    static_cast<int>(q), 1.0, out->grad.data() + t[2],
                    static_cast<int>(q), b->data.data() + t[1],
                    static_cast<int>(q), 1.0, a->grad.data() + t[0],
                    static_cast<int>(k));
        // dB += A^T * dC
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans,
                    static_cast<int>(k), static_cast<int>(q),
                    static_cast<int>(m), 1.0, a->data.data() + t[0],
                    static_cast<int>(k), out->grad.data() + t[2],
                    static_cast<int>(q), 1.0, b->grad.data() + t[1],
                    static_cast<int>(q));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------
double grad_check(const std::function<TensorPtr(Tape&, const TensorPtr&)>& f,
                  const TensorPtr& x, double h) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
  const bool saved = x->requires_grad;
  x->requires_grad = true;
  x->grad.clear();
  {
    Tape tape;
    auto y = f(tape, x);
    if (y->numel() != 1)
      throw std::invalid_argument("grad_check: f must be scalar-valued");
    tape.backward(y);
  }
  std::vector<double> analytic = x->grad.empty()
                                     ? std::vector<double>(x->data.size(), 0.0)
                                     : x->grad;
  auto eval = [&]() {
    Tape tape;
    return f(tape, x)->data[0];
  };
  double max_rel = 0.0;
  for (std::size_t i = 0; i < x->data.size(); ++i) {
    const double orig = x->data[i];
    x->data[i] = orig + h;
    const double fp = eval();
    x->data[i] = orig - h;
    const double fm = eval();
    x->data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  x->requires_grad = saved;
  return max_rel;
}

} // namespace numerion
