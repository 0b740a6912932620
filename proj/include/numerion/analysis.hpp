// ============================================================================
// Frequency-domain analysis of per-space model outputs: direct DFT power
// spectra, band filtering, per-bin PVE, power-share bins, mean absolute
// frequency (MAF), Pearson correlation, and the decomposition report.
//
// Conventions
//   * Normalized frequency f_k = k / N in cycles per sample, k = 0..floor(N/2)
//     (one-sided spectrum).
//   * dft_power returns raw squared magnitudes |X_k|^2. Parseval with this
//     convention: sum_t x_t^2 = (1/N) * [P_0 + 2 * sum_middle P_k + P_{N/2}],
//     where the Nyquist bin P_{N/2} exists (and appears once) only for even N.
//   * A Band covers (lo, hi]; the first report bin has lo < 0 so it includes
//     DC, matching the published bin header [0, 0.01].
//   * MAF keeps DC power in the denominator (|f| weighting zeroes its
//     numerator contribution), matching the boxed formula literally.
//   * power_share_bins excludes DC entirely: shares are fractions of the
//     non-DC one-sided power.
// ============================================================================
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "numerion/data.hpp"
#include "numerion/model.hpp"

namespace numerion {

// One-sided power spectrum by direct O(N^2) evaluation. Requires N >= 2.
std::vector<double> dft_power(const std::vector<double>& x);

struct Band {
  double lo = 0.0; // exclusive
  double hi = 0.0; // inclusive
  bool contains(double f) const { return f > lo && f <= hi; }
};

// The seven report bins [0,0.01], (0.01,0.04], (0.04,0.09], (0.09,0.14],
// (0.14,0.20], (0.20,0.27], (0.27,0.50]. The first bin's lo is negative so
// Band::contains admits f = 0.
const std::array<Band, 7>& spectral_bins();

// Zeroes every DFT coefficient whose one-sided frequency falls outside the
// band and inverse-transforms back to the time domain (hard spectral mask).
std::vector<double> band_filter(const std::vector<double>& x, Band band);

// PVE_band = 1 - Var(Y_band - Yhat_band) / Var(Y_band) after band-filtering
// both signals. Absent (nullopt) when the band variance of y is zero.
std::optional<double> pve(const std::vector<double>& y,
                          const std::vector<double>& yhat, Band band);

// Fraction of non-DC one-sided power per report bin; sums to 1. Throws when
// the signal has no non-DC power.
std::array<double, 7> power_share_bins(const std::vector<double>& x);

// MAF = sum_k f_k * P_k / sum_k P_k over the one-sided spectrum (DC power
// stays in the denominator). Throws on an all-zero signal.
double maf(const std::vector<double>& x);

// Sample Pearson correlation; absent when either input has zero variance.
std::optional<double> pearson(const std::vector<double>& a,
                              const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Decomposition report
// ---------------------------------------------------------------------------
struct SpaceSpectralStats {
  int space_dim = 0;
  double maf = 0.0;          // mean over analyzed windows
  double pearson = 0.0;      // mean over windows where defined; NaN if never
  double weight_share = 0.0; // mean fusion weight
  std::array<double, 7> pve{};         // NaN marks bins absent everywhere
  std::array<double, 7> power_share{}; // mean share per bin
};

struct SpectralReport {
  std::vector<SpaceSpectralStats> per_space; // aligned with enabled_spaces
  std::int64_t windows_used = 0;
};

struct DecompositionOptions {
  std::int64_t max_windows = 256; // windows are stride-subsampled to this cap
  std::int64_t trace_windows = 3; // windows dumped to traces.csv
  std::string out_dir;            // empty: skip file output
};

// Runs the frozen model over (a subsample of) the split's windows, collects
// per-space outputs and fusion weights for one channel, and aggregates MAF,
// Pearson, per-bin PVE, and power share per space. Horizon series are mean-
// centered per window before the spectral statistics so the report measures
// fluctuation structure rather than each window's shared offset (maf() and
// power_share_bins() themselves stay literal). When out_dir is set, writes
//   summary.csv  one row per space: maf, pearson, weight_share
//   bins.csv     one row per (space, bin): pve, power_share
//   traces.csv   (window, t, truth, fused, one column per space)
SpectralReport decomposition_report(const NumerionParams& params,
                                    const NumerionConfig& cfg,
                                    const WindowedDataset& ds, int channel,
                                    const DecompositionOptions& opt = {});

} // namespace numerion
