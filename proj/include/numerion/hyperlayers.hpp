// ============================================================================
// Hypercomplex neural building blocks.
//
// An HTensor is a real tensor whose trailing axis holds the n coefficients of
// each hypercomplex element. All layers are expressed through the real
// autodiff engine: the hypercomplex linear layer materializes its real block
// operator with gather/sign ops (gradients reach the original weight entries
// through the gather), and HNTanh registers a custom backward built from its
// analytic Jacobian.
//
// Two exact shortcuts avoid redundant arithmetic without changing any value:
//   * hlinear_from_real: input lifted from the reals has only coefficient 0
//     nonzero, so the layer collapses to one real matmul (sign[i][0] = +1 and
//     select[i][0] = i for every i).
//   * hlinear_to_real: when only the output's real part is kept (head followed
//     by lmap to dim 1), row 0 of the sign table — (+1, -1, ..., -1) — is the
//     only one needed.
// Both equal the generic layer to machine precision (tested).
// ============================================================================
#pragma once

#include <random>
#include <vector>

#include "numerion/algebra.hpp"
#include "numerion/tensor.hpp"

namespace numerion {

// Real tensor with trailing axis of extent dim (the coefficient axis).
struct HTensor {
  TensorPtr base;
  int dim = 1;
};

struct HLinearParams {
  TensorPtr weight; // [d_out, d_in, n]
  TensorPtr bias;   // [d_out, n]
};

struct RhrMlpParams {
  std::vector<HLinearParams> layers; // hidden stack (layer 0 consumes reals)
  HLinearParams head;                // maps concatenated hidden widths out
  int dim = 1;                       // algebra dimension n
  double dropout_rate = 0.0;
  double p_norm = 6.0;               // HNTanh norm exponent
};

// Dimension maps: zero-pad up / truncate down the coefficient axis.
HTensor hmap(Tape* tape, const HTensor& x, int n_high);
HTensor lmap(Tape* tape, const HTensor& x, int n_low);

// out[o][i] = sum_j sum_c sign[i][c] * weight[o][j][select[i][c]] * x[j][c]
//           + bias[o][i]
// over x of shape [.., d_in, n], giving [.., d_out, n].
HTensor hlinear(Tape* tape, const HTensor& x, const HLinearParams& p,
                const AlgebraTable& t);

// Reference implementation: per-entry hmul loop (forward only; oracle).
HTensor hlinear_naive(const HTensor& x, const HLinearParams& p,
                      const AlgebraTable& t);

// Exact shortcuts (see file header). x: [.., d_in] real / [.., d_in, n].
HTensor hlinear_from_real(Tape* tape, const TensorPtr& x,
                          const HLinearParams& p, const AlgebraTable& t);
TensorPtr hlinear_to_real(Tape* tape, const HTensor& x, const HLinearParams& p,
                          const AlgebraTable& t);

// Per element c of length n: y = (c / m) * tanh(m) with m = ||c||_p; identity
// when m < 1e-12 (the analytic limit). Requires finite p_norm >= 1.
HTensor hntanh(Tape* tape, const HTensor& x, double p_norm);

// Analytic n-by-n Jacobian of hntanh at one element; identity below epsilon.
std::vector<std::vector<double>> hntanh_jacobian(const std::vector<double>& c,
                                                 double p_norm);

// Weight entries: n coefficients drawn standard normal, normalized to unit
// 2-norm per entry, then scaled by 1/sqrt(d_in). Biases start at zero.
HLinearParams init_hlinear(int d_out, int d_in, int n, std::mt19937_64& rng);

// Builds an RHR-MLP with the halving width schedule (floor 8, never above the
// previous width) and a head of width d_out over the concatenated stack.
RhrMlpParams make_rhr_mlp(int d_in, int d_hidden, int layers, int d_out, int n,
                          double dropout_rate, double p_norm,
                          std::mt19937_64& rng);

// x: [.., d_in] real. Lift, L x (hlinear -> hntanh -> dropout), concatenate
// the per-layer activations, head, keep the real part: [.., d_out].
// Dropout draws one Bernoulli per hypercomplex element (all n coefficients
// share the mask) from `rng` when training.
TensorPtr rhr_mlp(Tape* tape, const TensorPtr& x, const RhrMlpParams& p,
                  const AlgebraTable& t, bool training, std::mt19937_64& rng);

} // namespace numerion
