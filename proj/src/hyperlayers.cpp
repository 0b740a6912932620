#include "numerion/hyperlayers.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace numerion {

namespace {

constexpr double kEps = 1e-12; // HNTanh identity ball

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check_htensor(const HTensor& x, const char* who) {
  if (!x.base || x.base->shape.empty())
    throw std::invalid_argument(std::string(who) + ": empty tensor");
  if (!is_pow2(x.dim) || x.base->shape.back() != x.dim)
    throw std::invalid_argument(
        std::string(who) + ": trailing extent must equal the power-of-two dim");
}

void check_hlinear_args(const HTensor& x, const HLinearParams& p,
                        const AlgebraTable& t, const char* who) {
  check_htensor(x, who);
  const int n = t.dim;
  if (x.dim != n)
    throw std::invalid_argument(std::string(who) +
                                ": tensor dim does not match the table");
  if (p.weight->shape.size() != 3 || p.weight->shape[2] != n)
    throw std::invalid_argument(std::string(who) + ": weight must be "
                                "[d_out, d_in, n]");
  if (x.base->shape.size() < 2 ||
      x.base->shape[x.base->shape.size() - 2] != p.weight->shape[1])
    throw std::invalid_argument(std::string(who) +
                                ": input width does not match d_in");
  if (p.bias->shape !=
      std::vector<std::int64_t>{p.weight->shape[0], n})
    throw std::invalid_argument(std::string(who) + ": bias must be [d_out, n]");
}

// Constant [n, n] tensor of the left-gather signs, (i, c) layout.
TensorPtr sign_tensor(const AlgebraTable& t) {
  const int n = t.dim;
  std::vector<double> s(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c)
      s[static_cast<std::size_t>(i) * n + c] = t.sign[i][c];
  return Tensor::make({n, n}, std::move(s));
}

// Leading (batch) extents of x.base, excluding the trailing `drop` axes.
std::vector<std::int64_t> lead_shape(const TensorPtr& x, int drop) {
  return {x->shape.begin(), x->shape.end() - drop};
}

std::vector<std::int64_t> with_tail(std::vector<std::int64_t> lead,
                                    std::initializer_list<std::int64_t> tail) {
  lead.insert(lead.end(), tail);
  return lead;
}

} // namespace

// ---------------------------------------------------------------------------
// Dimension maps
// ---------------------------------------------------------------------------
HTensor hmap(Tape* tape, const HTensor& x, int n_high) {
  check_htensor(x, "hmap");
  if (!is_pow2(n_high) || n_high < x.dim)
    throw std::invalid_argument("hmap: target dim must be a power of two >= "
                                "the current dim");
  if (n_high == x.dim) return x;
  auto pad_shape = x.base->shape;
  pad_shape.back() = n_high - x.dim;
  auto pad = Tensor::zeros(pad_shape);
  return {op_concat(tape, {x.base, pad}, -1), n_high};
}

HTensor lmap(Tape* tape, const HTensor& x, int n_low) {
  check_htensor(x, "lmap");
  if (!is_pow2(n_low) || n_low > x.dim)
    throw std::invalid_argument("lmap: target dim must be a power of two <= "
                                "the current dim");
  if (n_low == x.dim) return x;
  return {op_narrow(tape, x.base, -1, 0, n_low), n_low};
}

// ---------------------------------------------------------------------------
// Hypercomplex linear layer
// ---------------------------------------------------------------------------
HTensor hlinear(Tape* tape, const HTensor& x, const HLinearParams& p,
                const AlgebraTable& t) {
  check_hlinear_args(x, p, t, "hlinear");
  const int n = t.dim;
  const std::int64_t d_out = p.weight->shape[0];
  const std::int64_t d_in = p.weight->shape[1];

  // Weight entry for output coefficient i and input coefficient c is
  // weight[o][j][select[i][c]] with sign sign[i][c]: one gather along the
  // coefficient axis in (i, c) order, then the sign mask.
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < n; ++c)
      idx[static_cast<std::size_t>(i) * n + c] = t.select[i][c];
  auto g = op_gather(tape, p.weight, idx, 2);        // [d_out, d_in, n*n]
  g = op_reshape(tape, g, {d_out, d_in, n, n});      // (o, j, i, c)
  g = op_mul(tape, g, sign_tensor(t));               // broadcast over (o, j)
  g = op_permute(tape, g, {1, 3, 0, 2});             // (j, c, o, i)
  auto op_mat = op_reshape(tape, g, {d_in * n, d_out * n});

  const std::int64_t rows = x.base->numel() / (d_in * n);
  auto x_flat = op_reshape(tape, x.base, {rows, d_in * n});
  auto out = op_matmul(tape, x_flat, op_mat);        // [rows, d_out*n]
  out = op_add(tape, out, op_reshape(tape, p.bias, {d_out * n}));
  out = op_reshape(tape, out, with_tail(lead_shape(x.base, 2), {d_out, n}));
  return {out, n};
}

HTensor hlinear_naive(const HTensor& x, const HLinearParams& p,
                      const AlgebraTable& t) {
  check_hlinear_args(x, p, t, "hlinear_naive");
  const int n = t.dim;
  const std::int64_t d_out = p.weight->shape[0];
  const std::int64_t d_in = p.weight->shape[1];
  const std::int64_t rows = x.base->numel() / (d_in * n);

  auto out = Tensor::zeros(with_tail(lead_shape(x.base, 2), {d_out, n}));
  HScalar w_entry(n), x_entry(n);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t o = 0; o < d_out; ++o) {
      double* acc = &out->data[(r * d_out + o) * n];
      for (int i = 0; i < n; ++i) acc[i] = p.bias->data[o * n + i];
      for (std::int64_t j = 0; j < d_in; ++j) {
        for (int c = 0; c < n; ++c) {
          w_entry[c] = p.weight->data[(o * d_in + j) * n + c];
          x_entry[c] = x.base->data[(r * d_in + j) * n + c];
        }
        const HScalar prod = hmul(w_entry, x_entry, t);
        for (int i = 0; i < n; ++i) acc[i] += prod[i];
      }
    }
  return {out, n};
}

HTensor hlinear_from_real(Tape* tape, const TensorPtr& x,
                          const HLinearParams& p, const AlgebraTable& t) {
  const int n = t.dim;
  const std::int64_t d_out = p.weight->shape[0];
  const std::int64_t d_in = p.weight->shape[1];
  if (p.weight->shape.size() != 3 || p.weight->shape[2] != n ||
      x->shape.empty() || x->shape.back() != d_in)
    throw std::invalid_argument("hlinear_from_real: shape mismatch");

  // Only input coefficient 0 is nonzero; sign[i][0] = +1 and select[i][0] = i,
  // so out[.., o, i] = sum_j weight[o][j][i] * x[.., j] + bias[o][i].
  auto w_mat = op_reshape(
      tape, op_permute(tape, p.weight, {1, 0, 2}), {d_in, d_out * n});
  const std::int64_t rows = x->numel() / d_in;
  auto out = op_matmul(tape, op_reshape(tape, x, {rows, d_in}), w_mat);
  out = op_add(tape, out, op_reshape(tape, p.bias, {d_out * n}));
  out = op_reshape(tape, out, with_tail(lead_shape(x, 1), {d_out, n}));
  return {out, n};
}

TensorPtr hlinear_to_real(Tape* tape, const HTensor& x, const HLinearParams& p,
                          const AlgebraTable& t) {
  check_hlinear_args(x, p, t, "hlinear_to_real");
  const int n = t.dim;
  const std::int64_t d_out = p.weight->shape[0];
  const std::int64_t d_in = p.weight->shape[1];

  // Output coefficient 0 only: select[0][c] = c and sign[0][c] = (+1, -1, ...),
  // so out[.., o] = sum_{j,c} sign0[c] * weight[o][j][c] * x[.., j, c] + b0[o].
  std::vector<double> s0(n);
  for (int c = 0; c < n; ++c) s0[c] = t.sign[0][c];
  auto ws = op_mul(tape, p.weight, Tensor::make({n}, std::move(s0)));
  auto w_mat = op_reshape(
      tape, op_permute(tape, ws, {1, 2, 0}), {d_in * n, d_out});
  const std::int64_t rows = x.base->numel() / (d_in * n);
  auto out = op_matmul(tape, op_reshape(tape, x.base, {rows, d_in * n}), w_mat);
  auto b0 = op_reshape(tape, op_narrow(tape, p.bias, 1, 0, 1), {d_out});
  out = op_add(tape, out, b0);
  return op_reshape(tape, out, with_tail(lead_shape(x.base, 2), {d_out}));
}

// ---------------------------------------------------------------------------
// HNTanh
// ---------------------------------------------------------------------------
HTensor hntanh(Tape* tape, const HTensor& x, double p_norm) {
  check_htensor(x, "hntanh");
  if (!(p_norm >= 1.0) || !std::isfinite(p_norm))
    throw std::invalid_argument("hntanh: p_norm must be finite and >= 1");
  const int n = x.dim;
  const std::int64_t slices = x.base->numel() / n;

  auto out = Tensor::zeros(x.base->shape);
  auto norms = std::make_shared<std::vector<double>>(slices);
  for (std::int64_t s = 0; s < slices; ++s) {
    const double* c = &x.base->data[s * n];
    const double m = pnorm(c, n, p_norm);
    (*norms)[s] = m;
    double* y = &out->data[s * n];
    if (m < kEps) {
      for (int i = 0; i < n; ++i) y[i] = c[i];
    } else {
      const double scale = std::tanh(m) / m;
      for (int i = 0; i < n; ++i) y[i] = c[i] * scale;
    }
  }
  if (tape) {
    auto a = x.base;
    tape->record(out, {a}, [a, out, norms, n, slices, p_norm]() {
      ensure_grad(a);
      for (std::int64_t s = 0; s < slices; ++s) {
        const double m = (*norms)[s];
        const double* c = &a->data[s * n];
        const double* g = &out->grad[s * n];
        double* gi = &a->grad[s * n];
        if (m < kEps) {
          for (int i = 0; i < n; ++i) gi[i] += g[i];
          continue;
        }
        // J = (tanh m / m) I + q * c u^T with u_j = |c_j|^{p-1} sign(c_j);
        // the vector-Jacobian product only needs <c, g>.
        const double th = std::tanh(m);
        const double diag = th / m;
        const double q =
            ((1.0 - th * th) * m - th) / (m * m) * std::pow(m, 1.0 - p_norm);
        double dot = 0.0;
        for (int i = 0; i < n; ++i) dot += c[i] * g[i];
        for (int j = 0; j < n; ++j) {
          const double u =
              c[j] == 0.0
                  ? 0.0
                  : std::pow(std::abs(c[j]), p_norm - 1.0) *
                        (c[j] > 0.0 ? 1.0 : -1.0);
          gi[j] += diag * g[j] + q * dot * u;
        }
      }
    });
  }
  return {out, n};
}

std::vector<std::vector<double>> hntanh_jacobian(const std::vector<double>& c,
                                                 double p_norm) {
  const int n = static_cast<int>(c.size());
  std::vector<std::vector<double>> J(n, std::vector<double>(n, 0.0));
  const double m = pnorm(c, p_norm);
  if (m < kEps) {
    for (int i = 0; i < n; ++i) J[i][i] = 1.0;
    return J;
  }
  const double th = std::tanh(m);
  const double diag = th / m;
  const double q =
      ((1.0 - th * th) * m - th) / (m * m) * std::pow(m, 1.0 - p_norm);
  for (int j = 0; j < n; ++j) {
    const double u = c[j] == 0.0
                         ? 0.0
                         : std::pow(std::abs(c[j]), p_norm - 1.0) *
                               (c[j] > 0.0 ? 1.0 : -1.0);
    for (int i = 0; i < n; ++i) J[i][j] = c[i] * u * q;
    J[j][j] += diag;
  }
  return J;
}

// ---------------------------------------------------------------------------
// RHR-MLP
// ---------------------------------------------------------------------------
HLinearParams init_hlinear(int d_out, int d_in, int n, std::mt19937_64& rng) {
  auto weight = Tensor::zeros({d_out, d_in, n}, /*requires_grad=*/true);
  std::normal_distribution<double> dist(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (std::int64_t e = 0; e < static_cast<std::int64_t>(d_out) * d_in; ++e) {
    double* w = &weight->data[e * n];
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      w[i] = dist(rng);
      ss += w[i] * w[i];
    }
    const double norm = std::sqrt(ss);
    if (norm < kEps) {
      w[0] = scale;
      continue;
    }
    for (int i = 0; i < n; ++i) w[i] *= scale / norm;
  }
  return {weight, Tensor::zeros({d_out, n}, /*requires_grad=*/true)};
}

RhrMlpParams make_rhr_mlp(int d_in, int d_hidden, int layers, int d_out, int n,
                          double dropout_rate, double p_norm,
                          std::mt19937_64& rng) {
  if (layers < 1 || d_in < 1 || d_hidden < 1 || d_out < 1 || !is_pow2(n))
    throw std::invalid_argument("make_rhr_mlp: invalid configuration");
  RhrMlpParams p;
  p.dim = n;
  p.dropout_rate = dropout_rate;
  p.p_norm = p_norm;
  int prev = d_in;
  int width = d_hidden;
  int total = 0;
  for (int l = 0; l < layers; ++l) {
    p.layers.push_back(init_hlinear(width, prev, n, rng));
    total += width;
    prev = width;
    width = std::min(width, std::max(8, width / 2)); // halve, floor 8
  }
  p.head = init_hlinear(d_out, total, n, rng);
  return p;
}

TensorPtr rhr_mlp(Tape* tape, const TensorPtr& x, const RhrMlpParams& p,
                  const AlgebraTable& t, bool training, std::mt19937_64& rng) {
  if (p.dim != t.dim)
    throw std::invalid_argument("rhr_mlp: params dim does not match the table");
  if (p.layers.empty())
    throw std::invalid_argument("rhr_mlp: needs at least one hidden layer");

  std::vector<TensorPtr> acts;
  HTensor h = hlinear_from_real(tape, x, p.layers[0], t);
  for (std::size_t l = 0;;) {
    h = hntanh(tape, h, p.p_norm);
    if (p.dropout_rate > 0.0)
      h = {op_dropout(tape, h.base, p.dropout_rate, training, rng,
                      /*group_size=*/t.dim),
           t.dim};
    acts.push_back(h.base);
    if (++l >= p.layers.size()) break;
    h = hlinear(tape, h, p.layers[l], t);
  }
  HTensor cat{acts.size() == 1 ? acts[0] : op_concat(tape, acts, -2), t.dim};
  return hlinear_to_real(tape, cat, p.head, t);
}

} // namespace numerion
