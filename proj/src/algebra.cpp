#include "numerion/algebra.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace numerion {

namespace {

bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void check_same_power_of_two(const HScalar& a, const HScalar& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("hmul: operand dimensions differ (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    if (!is_power_of_two(a.size()))
        throw std::invalid_argument("hmul: dimension " + std::to_string(a.size()) +
                                    " is not a power of two");
}

// Recursive conjugation; identical to the closed form (negate imaginaries)
// for every Cayley-Dickson algebra, kept recursive to mirror the definition.
void conj_recursive(double* a, size_t n) {
    if (n == 1) return;  // real conjugation is the identity
    conj_recursive(a, n / 2);
    for (size_t i = n / 2; i < n; ++i) a[i] = -a[i];
}

// (a1,b1) x (a2,b2) = (a1*a2 - conj(b2)*b1, b2*a1 + b1*conj(a2))
void mul_recursive(const double* a, const double* b, double* out, size_t n) {
    if (n == 1) {
        out[0] = a[0] * b[0];
        return;
    }
    const size_t h = n / 2;
    const double* a1 = a;
    const double* b1 = a + h;
    const double* a2 = b;
    const double* b2 = b + h;

    std::vector<double> tmp1(h), tmp2(h), scratch(h);

    // First half: a1*a2 - conj(b2)*b1
    mul_recursive(a1, a2, tmp1.data(), h);
    scratch.assign(b2, b2 + h);
    conj_recursive(scratch.data(), h);
    mul_recursive(scratch.data(), b1, tmp2.data(), h);
    for (size_t i = 0; i < h; ++i) out[i] = tmp1[i] - tmp2[i];

    // Second half: b2*a1 + b1*conj(a2)
    mul_recursive(b2, a1, tmp1.data(), h);
    scratch.assign(a2, a2 + h);
    conj_recursive(scratch.data(), h);
    mul_recursive(b1, scratch.data(), tmp2.data(), h);
    for (size_t i = 0; i < h; ++i) out[h + i] = tmp1[i] + tmp2[i];
}

std::unique_ptr<AlgebraTable> derive_table(int k) {
    const int n = 1 << k;
    auto t = std::make_unique<AlgebraTable>();
    t->dim = n;
    t->select.assign(n, std::vector<int>(n, -1));
    t->sign.assign(n, std::vector<int>(n, 0));
    t->sign_right.assign(n, std::vector<int>(n, 0));

    // Multiply every pair of basis units through the recursion and read off
    // which input coefficient, with which sign, lands in each output slot.
    HScalar ea(n, 0.0), eb(n, 0.0), prod(n, 0.0);
    for (int g = 0; g < n; ++g) {
        ea[g] = 1.0;
        for (int j = 0; j < n; ++j) {
            eb[j] = 1.0;
            mul_recursive(ea.data(), eb.data(), prod.data(), n);
            int out_idx = -1;
            int sign = 0;
            for (int i = 0; i < n; ++i) {
                if (prod[i] == 0.0) continue;
                if (out_idx != -1 || (prod[i] != 1.0 && prod[i] != -1.0))
                    throw std::logic_error("algebra: basis product is not a signed unit");
                out_idx = i;
                sign = prod[i] > 0 ? 1 : -1;
            }
            if (out_idx < 0)
                throw std::logic_error("algebra: basis product vanished");
            if (t->sign[out_idx][j] != 0 || t->sign_right[out_idx][g] != 0)
                throw std::logic_error("algebra: duplicate table entry");
            // e_g * e_j = sign * e_out: in output `out_idx`, the plain
            // operand's coefficient j pairs with gathered coefficient g.
            t->select[out_idx][j] = g;
            t->sign[out_idx][j] = sign;
            t->sign_right[out_idx][g] = sign;
            eb[j] = 0.0;
        }
        ea[g] = 0.0;
    }

    // Sanity: the right-gather matrix must use the same selection pattern
    // (select is symmetric under operand swap).
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (t->select[i][t->select[i][j]] != j)
                throw std::logic_error("algebra: select rows are not involutions");
    return t;
}

}  // namespace

const AlgebraTable& build_table(int k) {
    constexpr int kMaxK = 6;
    if (k < 0 || k > kMaxK)
        throw std::invalid_argument("build_table: k must be in [0, 6], got " +
                                    std::to_string(k));
    static std::unique_ptr<AlgebraTable> cache[kMaxK + 1];
    static std::once_flag flags[kMaxK + 1];
    std::call_once(flags[k], [k] { cache[k] = derive_table(k); });
    return *cache[k];
}

HScalar hmul(const HScalar& a, const HScalar& b, const AlgebraTable& t) {
    check_same_power_of_two(a, b);
    if (static_cast<int>(a.size()) != t.dim)
        throw std::invalid_argument("hmul: operand dimension " +
                                    std::to_string(a.size()) +
                                    " does not match table dimension " +
                                    std::to_string(t.dim));
    const int n = t.dim;
    HScalar out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j)
            acc += t.sign[i][j] * a[t.select[i][j]] * b[j];
        out[i] = acc;
    }
    return out;
}

HScalar hmul_recursive(const HScalar& a, const HScalar& b) {
    check_same_power_of_two(a, b);
    HScalar out(a.size());
    mul_recursive(a.data(), b.data(), out.data(), a.size());
    return out;
}

HScalar conjugate(const HScalar& a) {
    HScalar out = a;
    for (size_t i = 1; i < out.size(); ++i) out[i] = -out[i];
    return out;
}

double pnorm(const double* a, int n, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (int i = 0; i < n; ++i) m = std::max(m, std::abs(a[i]));
        return m;
    }
    if (!(p >= 1.0))
        throw std::invalid_argument("pnorm: p must be >= 1 or infinity");
    double acc = 0.0;
    if (p == 2.0) {
        for (int i = 0; i < n; ++i) acc += a[i] * a[i];
        return std::sqrt(acc);
    }
    for (int i = 0; i < n; ++i) acc += std::pow(std::abs(a[i]), p);
    return std::pow(acc, 1.0 / p);
}

double pnorm(const HScalar& a, double p) {
    return pnorm(a.data(), static_cast<int>(a.size()), p);
}

}  // namespace numerion
