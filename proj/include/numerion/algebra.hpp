#pragma once
// Multiplication rules for hypercomplex algebras of dimension n = 2^k, built
// by the Cayley-Dickson construction, plus scalar arithmetic and an
// independent recursive oracle.
//
// The product is linearized into two n x n matrices so that it can be
// evaluated as gather + sign flip + matrix multiply. There are two equivalent
// layouts of the sign data, depending on which operand is gathered:
//
//   left gather   out[i] = sum_j sign[i][j]       * a[select[i][j]] * b[j]
//   right gather  out[i] = sum_j sign_right[i][j] * a[j] * b[select[i][j]]
//
// Both compute the same product a*b; the matrices are one another's row-wise
// reindexing (sign_right[i][j] == sign[i][i^j]). Published rule listings use
// the left-gather orientation for octonions and the right-gather orientation
// for quaternions, so AlgebraTable carries both.

#include <vector>

namespace numerion {

// A hypercomplex scalar: coeffs[0] is the real part, coeffs[1..n-1] the
// imaginary coefficients. Length must be a power of two.
using HScalar = std::vector<double>;

struct AlgebraTable {
    int dim = 1;  // n = 2^k
    // select[i][j]: which coefficient of the gathered operand multiplies the
    // plain operand's j-th coefficient in output i. Every row and column is a
    // permutation of 0..n-1 (in fact select[i][j] == i XOR j).
    std::vector<std::vector<int>> select;
    std::vector<std::vector<int>> sign;        // left-gather orientation
    std::vector<std::vector<int>> sign_right;  // right-gather orientation
};

// Table for dim 2^k, derived by pushing basis units through the recursive
// product (single source of truth). Cached; the returned reference is
// immutable and safe to share across threads. Throws std::invalid_argument
// for k < 0 or k > 6 (tables grow as 4^k).
const AlgebraTable& build_table(int k);

// Table-driven product (left-gather form). Throws on dimension mismatch.
HScalar hmul(const HScalar& a, const HScalar& b, const AlgebraTable& t);

// Independent oracle: literal recursion on coefficient-pair halves,
//   (a1,b1) x (a2,b2) = (a1*a2 - conj(b2)*b1, b2*a1 + b1*conj(a2)),
// bottoming out at real multiplication. Throws unless both lengths are the
// same power of two.
HScalar hmul_recursive(const HScalar& a, const HScalar& b);

// conj(a): real part kept, imaginary coefficients negated. Equivalent to the
// recursive definition (alpha, beta)* = (alpha*, -beta).
HScalar conjugate(const HScalar& a);

// p-norm of the coefficient array; p = infinity gives the max absolute
// coefficient. Throws for p < 1.
double pnorm(const HScalar& a, double p);
double pnorm(const double* a, int n, double p); // same, over a raw slice

}  // namespace numerion
