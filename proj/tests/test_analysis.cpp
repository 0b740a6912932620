// ============================================================================
// Unit tests: direct DFT power, band filtering, PVE, power-share bins, MAF,
// Pearson correlation, and the decomposition report.
//
// Oracles pinned up front:
//   * pure-tone spectra at exact bins: one-sided power (N·A/2)^2,
//   * Parseval's identity with the documented one-sided doubling convention,
//   * band filtering recovers an exact-bin tone bitwise-near (1e-9),
//   * MAF closed forms (pure tone, weighted mean, DC in denominator only),
//   * PVE boxed-formula cases.
// ============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "numerion/analysis.hpp"
#include "numerion/data.hpp"
#include "numerion/model.hpp"

using namespace numerion;

namespace {

std::vector<double> tone(std::int64_t N, double f, double amp, double phase) {
  std::vector<double> x(N);
  for (std::int64_t t = 0; t < N; ++t)
    x[t] = amp * std::sin(2.0 * std::numbers::pi * f * t + phase);
  return x;
}

std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

} // namespace

// ---------------------------------------------------------------------------
// dft_power
// ---------------------------------------------------------------------------
TEST_CASE("dft_power: constant series puts all power at f = 0") {
  std::vector<double> x(50, 3.0);
  auto P = dft_power(x);
  REQUIRE(P.size() == 26);
  CHECK(P[0] == doctest::Approx(150.0 * 150.0).epsilon(1e-12));
  for (std::size_t k = 1; k < P.size(); ++k) CHECK(std::abs(P[k]) < 1e-16);
}

TEST_CASE("dft_power: pure cosine at 0.25 spikes in exactly one bin") {
  const std::int64_t N = 64;
  std::vector<double> x(N);
  for (std::int64_t t = 0; t < N; ++t)
    x[t] = std::cos(2.0 * std::numbers::pi * 0.25 * t);
  auto P = dft_power(x);
  REQUIRE(P.size() == 33);
  CHECK(P[16] == doctest::Approx(32.0 * 32.0).epsilon(1e-9));
  for (std::size_t k = 0; k < P.size(); ++k)
    if (k != 16) CHECK(std::abs(P[k]) < 1e-14);
}

TEST_CASE("dft_power: Parseval identity, even and odd N") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::int64_t N : {64, 101}) {
    std::vector<double> x(N);
    for (auto& v : x) v = g(rng);
    double sumsq = 0.0;
    for (double v : x) sumsq += v * v;
    auto P = dft_power(x);
    // One-sided doubling convention: k = 0 (and k = N/2 for even N) appear
    // once in the full spectrum; every other bin represents two conjugate
    // coefficients.
    double spec = P[0];
    const std::size_t last = P.size() - 1;
    for (std::size_t k = 1; k < last; ++k) spec += 2.0 * P[k];
    spec += (N % 2 == 0) ? P[last] : 2.0 * P[last];
    CHECK(sumsq ==
          doctest::Approx(spec / static_cast<double>(N)).epsilon(1e-9));
  }
}

TEST_CASE("dft_power: rejects N < 2") {
  CHECK_THROWS_AS(dft_power({1.0}), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// band filter + PVE
// ---------------------------------------------------------------------------
TEST_CASE("band_filter: recovers an exact-bin tone from a mixture") {
  const std::int64_t N = 200;
  auto lo_tone = tone(N, 0.05, 1.3, 0.7);
  auto hi_tone = tone(N, 0.30, 0.8, 1.1);
  auto mix = add(lo_tone, hi_tone);
  auto got = band_filter(mix, Band{0.04, 0.09});
  REQUIRE(got.size() == static_cast<std::size_t>(N));
  for (std::int64_t t = 0; t < N; ++t)
    CHECK(got[t] == doctest::Approx(lo_tone[t]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("band_filter: bin 1 keeps DC, other bins drop it") {
  std::vector<double> x(64, 2.0);
  auto bins = spectral_bins();
  auto kept = band_filter(x, bins[0]); // [0, 0.01] includes f = 0
  auto dropped = band_filter(x, bins[3]);
  for (double v : kept) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
  for (double v : dropped) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("pve: boxed-formula cases") {
  const std::int64_t N = 200;
  auto y = add(tone(N, 0.05, 1.0, 0.3), tone(N, 0.30, 0.5, 0.9));
  Band in_band{0.04, 0.09};

  // yhat = y -> 1 in every band with signal.
  auto p1 = pve(y, y, in_band);
  REQUIRE(p1.has_value());
  CHECK(*p1 == doctest::Approx(1.0).epsilon(1e-9));

  // yhat = 0 and y zero-mean in band -> 0.
  std::vector<double> zeros(N, 0.0);
  auto p0 = pve(y, zeros, in_band);
  REQUIRE(p0.has_value());
  CHECK(*p0 == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  // yhat = band-limited copy of y plus out-of-band noise -> in-band PVE = 1.
  auto yhat = add(band_filter(y, in_band), tone(N, 0.40, 2.0, 0.1));
  auto pb = pve(y, yhat, in_band);
  REQUIRE(pb.has_value());
  CHECK(*pb == doctest::Approx(1.0).epsilon(1e-9));

  // Zero band variance -> absent.
  auto none = pve(y, y, Band{0.11, 0.13});
  CHECK_FALSE(none.has_value());
}

// ---------------------------------------------------------------------------
// power_share_bins
// ---------------------------------------------------------------------------
TEST_CASE("power_share_bins: pure tone lands fully in its bin") {
  auto share = power_share_bins(tone(200, 0.05, 1.0, 0.2));
  // Bins: [0,.01], (.01,.04], (.04,.09], (.09,.14], (.14,.20], (.20,.27],
  // (.27,.50]; f = 0.05 is in bin index 2.
  for (int b = 0; b < 7; ++b)
    CHECK(share[b] ==
          doctest::Approx(b == 2 ? 1.0 : 0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("power_share_bins: equal-power tones split 0.5 / 0.5") {
  auto x = add(tone(200, 0.02, 1.0, 0.4), tone(200, 0.30, 1.0, 1.3));
  auto share = power_share_bins(x);
  CHECK(share[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(share[6] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("power_share_bins: shares sum to 1 on random signals; DC excluded") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(96);
  for (auto& v : x) v = g(rng) + 10.0; // large DC offset must not matter
  auto share = power_share_bins(x);
  double sum = 0.0;
  for (double s : share) sum += s;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> zero(32, 0.0);
  CHECK_THROWS_AS(power_share_bins(zero), std::invalid_argument);
  // A constant series has no non-DC power at all.
  std::vector<double> flat(32, 5.0);
  CHECK_THROWS_AS(power_share_bins(flat), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// maf
// ---------------------------------------------------------------------------
TEST_CASE("maf: closed-form cases") {
  // DC-only signal -> 0 (up to DFT round-off dust in the empty bins).
  CHECK(std::abs(maf(std::vector<double>(40, 2.5))) < 1e-12);

  // Pure tone at 0.25 -> 0.25.
  CHECK(maf(tone(64, 0.25, 1.0, 0.6)) ==
        doctest::Approx(0.25).epsilon(1e-9));

  // Half power at 0.1 and half at 0.3 -> 0.2.
  auto x = add(tone(200, 0.1, 1.0, 0.2), tone(200, 0.3, 1.0, 1.0));
  CHECK(maf(x) == doctest::Approx(0.2).epsilon(1e-9));

  // DC contributes zero to the numerator but stays in the denominator:
  // x = 1 + sin(2pi*0.25 t), N = 64: P0 = 64^2, P16 = 32^2,
  // MAF = 0.25 * 1024 / (4096 + 1024) = 0.05.
  std::vector<double> y(64);
  for (int t = 0; t < 64; ++t)
    y[t] = 1.0 + std::sin(2.0 * std::numbers::pi * 0.25 * t);
  CHECK(maf(y) == doctest::Approx(0.05).epsilon(1e-9));

  // Amplitude invariance.
  auto a = tone(128, 0.125, 0.3, 0.9);
  auto b = tone(128, 0.125, 7.0, 0.9);
  CHECK(maf(a) == doctest::Approx(maf(b)).epsilon(1e-12));

  CHECK_THROWS_AS(maf(std::vector<double>(16, 0.0)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// pearson
// ---------------------------------------------------------------------------
TEST_CASE("pearson: identities") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> y(64);
  for (auto& v : y) v = g(rng);

  auto same = pearson(y, y);
  REQUIRE(same.has_value());
  CHECK(*same == doctest::Approx(1.0).epsilon(1e-12));

  auto neg = y;
  for (auto& v : neg) v = -v;
  CHECK(*pearson(y, neg) == doctest::Approx(-1.0).epsilon(1e-12));

  auto shifted = y;
  for (auto& v : shifted) v += 4.2;
  CHECK(*pearson(y, shifted) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> flat(64, 1.0);
  CHECK_FALSE(pearson(y, flat).has_value());
}

// ---------------------------------------------------------------------------
// decomposition_report
// ---------------------------------------------------------------------------
TEST_CASE("decomposition_report: aggregates per-space stats over windows") {
  auto tbl = synthetic(SyntheticKind::SineMix, 400, 2, 13, {0.05, 0.3});
  auto splits = split_standardize_window(tbl, 32, 16, {60, 20, 20});

  NumerionConfig cfg;
  cfg.lookback = 32;
  cfg.horizon = 16;
  cfg.channels = 2;
  cfg.patch_levels = 2;
  cfg.embed_dim = 8;
  cfg.rhr_layers = 1;
  cfg.rhr_hidden = 8;
  cfg.dropout = 0.0;
  cfg.enabled_spaces = {1, 4};
  std::mt19937_64 rng(1);
  auto params = make_numerion_params(cfg, rng);

  auto rep = decomposition_report(params, cfg, splits.test, 0);
  REQUIRE(rep.per_space.size() == 2);
  CHECK(rep.per_space[0].space_dim == 1);
  CHECK(rep.per_space[1].space_dim == 4);
  CHECK(rep.windows_used > 0);

  double wsum = 0.0;
  for (const auto& s : rep.per_space) {
    wsum += s.weight_share;
    CHECK(s.maf >= 0.0);
    CHECK(s.maf <= 0.5);
    if (std::isfinite(s.pearson)) {
      CHECK(s.pearson >= -1.0 - 1e-12);
      CHECK(s.pearson <= 1.0 + 1e-12);
    }
    double psum = 0.0;
    for (double p : s.power_share) psum += p;
    CHECK(psum == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(decomposition_report(params, cfg, splits.test, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(decomposition_report(params, cfg, splits.test, -1),
                  std::invalid_argument);
}

TEST_CASE("decomposition_report: single-space weight share is exactly 1") {
  auto tbl = synthetic(SyntheticKind::SineMix, 300, 1, 4, {0.1});
  auto splits = split_standardize_window(tbl, 16, 8, {40, 12, 12});
  NumerionConfig cfg;
  cfg.lookback = 16;
  cfg.horizon = 8;
  cfg.channels = 1;
  cfg.patch_levels = 1;
  cfg.embed_dim = 8;
  cfg.rhr_layers = 1;
  cfg.rhr_hidden = 8;
  cfg.dropout = 0.0;
  cfg.enabled_spaces = {2};
  std::mt19937_64 rng(2);
  auto params = make_numerion_params(cfg, rng);
  auto rep = decomposition_report(params, cfg, splits.test, 0);
  REQUIRE(rep.per_space.size() == 1);
  CHECK(rep.per_space[0].weight_share == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decomposition_report: writes plot-ready tabular files") {
  namespace fs = std::filesystem;
  auto tbl = synthetic(SyntheticKind::SineMix, 300, 1, 4, {0.1});
  auto splits = split_standardize_window(tbl, 16, 8, {40, 12, 12});
  NumerionConfig cfg;
  cfg.lookback = 16;
  cfg.horizon = 8;
  cfg.channels = 1;
  cfg.patch_levels = 1;
  cfg.embed_dim = 8;
  cfg.rhr_layers = 1;
  cfg.rhr_hidden = 8;
  cfg.dropout = 0.0;
  cfg.enabled_spaces = {1, 2};
  std::mt19937_64 rng(2);
  auto params = make_numerion_params(cfg, rng);

  DecompositionOptions opt;
  opt.out_dir = "tmp_report_dir";
  auto rep = decomposition_report(params, cfg, splits.test, 0, opt);
  (void)rep;
  for (const char* f : {"summary.csv", "bins.csv", "traces.csv"}) {
    const fs::path p = fs::path(opt.out_dir) / f;
    REQUIRE(fs::exists(p));
    std::ifstream in(p);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header.find(',') != std::string::npos);
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows > 0);
  }
  fs::remove_all(opt.out_dir);
}
