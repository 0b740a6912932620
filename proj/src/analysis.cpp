#include "numerion/analysis.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <stdexcept>

namespace numerion {
namespace {

// Full complex DFT, direct O(N^2).
std::vector<std::complex<double>> dft_full(const std::vector<double>& x) {
  const std::int64_t N = static_cast<std::int64_t>(x.size());
  std::vector<std::complex<double>> X(N);
  for (std::int64_t k = 0; k < N; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::int64_t t = 0; t < N; ++t) {
      const double ang =
          -2.0 * std::numbers::pi * static_cast<double>(k) *
          static_cast<double>(t) / static_cast<double>(N);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    X[k] = acc;
  }
  return X;
}

double population_var(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  return var / n;
}

double mean_of(const std::vector<double>& x) {
  double mu = 0.0;
  for (double v : x) mu += v;
  return mu / static_cast<double>(x.size());
}

} // namespace

std::vector<double> dft_power(const std::vector<double>& x) {
  const std::int64_t N = static_cast<std::int64_t>(x.size());
  if (N < 2) throw std::invalid_argument("dft_power: need N >= 2");
  const std::int64_t K = N / 2;
  std::vector<double> P(K + 1, 0.0);
  for (std::int64_t k = 0; k <= K; ++k) {
    double re = 0.0, im = 0.0;
    for (std::int64_t t = 0; t < N; ++t) {
      const double ang =
          2.0 * std::numbers::pi * static_cast<double>(k) *
          static_cast<double>(t) / static_cast<double>(N);
      re += x[t] * std::cos(ang);
      im -= x[t] * std::sin(ang);
    }
    P[k] = re * re + im * im;
  }
  return P;
}

const std::array<Band, 7>& spectral_bins() {
  // First bin's lo is negative so it admits DC (published header [0, 0.01]).
  static const std::array<Band, 7> bins = {
      Band{-1.0, 0.01}, Band{0.01, 0.04}, Band{0.04, 0.09}, Band{0.09, 0.14},
      Band{0.14, 0.20}, Band{0.20, 0.27}, Band{0.27, 0.50}};
  return bins;
}

std::vector<double> band_filter(const std::vector<double>& x, Band band) {
  const std::int64_t N = static_cast<std::int64_t>(x.size());
  if (N < 2) throw std::invalid_argument("band_filter: need N >= 2");
  auto X = dft_full(x);
  for (std::int64_t k = 0; k < N; ++k) {
    const std::int64_t one_sided = std::min(k, N - k);
    const double f = static_cast<double>(one_sided) / static_cast<double>(N);
    if (!band.contains(f)) X[k] = {0.0, 0.0};
  }
  std::vector<double> out(N, 0.0);
  for (std::int64_t t = 0; t < N; ++t) {
    std::complex<double> acc{0.0, 0.0};
    for (std::int64_t k = 0; k < N; ++k) {
      const double ang =
          2.0 * std::numbers::pi * static_cast<double>(k) *
          static_cast<double>(t) / static_cast<double>(N);
      acc += X[k] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[t] = acc.real() / static_cast<double>(N);
  }
  return out;
}

std::optional<double> pve(const std::vector<double>& y,
                          const std::vector<double>& yhat, Band band) {
  if (y.size() != yhat.size())
    throw std::invalid_argument("pve: length mismatch");
  auto yf = band_filter(y, band);
  auto pf = band_filter(yhat, band);
  const double var_y = population_var(yf);
  // "Zero band variance" up to DFT round trip dust, relative to the full
  // signal's variance.
  const double floor = 1e-18 * std::max(population_var(y), 1e-300);
  if (var_y <= floor) return std::nullopt;
  std::vector<double> diff(yf.size());
  for (std::size_t i = 0; i < yf.size(); ++i) diff[i] = yf[i] - pf[i];
  return 1.0 - population_var(diff) / var_y;
}

std::array<double, 7> power_share_bins(const std::vector<double>& x) {
  auto P = dft_power(x);
  const std::int64_t N = static_cast<std::int64_t>(x.size());
  double total = 0.0;
  for (std::size_t k = 1; k < P.size(); ++k) total += P[k];
  double scale = 0.0;
  for (double v : x) scale += v * v;
  if (total <= 1e-18 * std::max(scale * static_cast<double>(N), 1e-300))
    throw std::invalid_argument("power_share_bins: no non-DC power");
  std::array<double, 7> share{};
  const auto& bins = spectral_bins();
  for (std::size_t k = 1; k < P.size(); ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(N);
    for (std::size_t b = 0; b < bins.size(); ++b)
      if (bins[b].contains(f)) {
        share[b] += P[k] / total;
        break;
      }
  }
  return share;
}

double maf(const std::vector<double>& x) {
  auto P = dft_power(x);
  const std::int64_t N = static_cast<std::int64_t>(x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < P.size(); ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(N);
    num += f * P[k];
    den += P[k];
  }
  if (den <= 0.0) throw std::invalid_argument("maf: zero signal");
  return num / den;
}

std::optional<double> pearson(const std::vector<double>& a,
                              const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need equal lengths >= 2");
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------
// Decomposition report
// ---------------------------------------------------------------------------
SpectralReport decomposition_report(const NumerionParams& params,
                                    const NumerionConfig& cfg,
                                    const WindowedDataset& ds, int channel,
                                    const DecompositionOptions& opt) {
  if (channel < 0 || channel >= cfg.channels)
    throw std::invalid_argument("decomposition_report: channel " +
                                std::to_string(channel) + " out of range [0, " +
                                std::to_string(cfg.channels) + ")");
  const std::int64_t N = ds.num_windows();
  if (N == 0)
    throw std::invalid_argument("decomposition_report: split has no windows");
  const std::int64_t S = static_cast<std::int64_t>(cfg.enabled_spaces.size());
  const std::int64_t F = cfg.channels;
  const std::int64_t P = cfg.horizon;

  const std::int64_t stride =
      std::max<std::int64_t>(1, (N + opt.max_windows - 1) / opt.max_windows);
  std::vector<std::int64_t> selected;
  for (std::int64_t i = 0; i < N; i += stride) selected.push_back(i);

  struct Acc {
    double maf_sum = 0.0;
    std::int64_t maf_n = 0;
    double pearson_sum = 0.0;
    std::int64_t pearson_n = 0;
    double weight_sum = 0.0;
    std::int64_t weight_n = 0;
    std::array<double, 7> pve_sum{};
    std::array<std::int64_t, 7> pve_n{};
    std::array<double, 7> share_sum{};
    std::int64_t share_n = 0;
  };
  std::vector<Acc> acc(S);

  std::ofstream traces;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    traces.open(std::filesystem::path(opt.out_dir) / "traces.csv");
    traces << std::setprecision(17) << "window,t,truth,fused";
    for (int d : cfg.enabled_spaces) traces << ",space_" << d;
    traces << "\n";
  }

  std::mt19937_64 dummy(0);
  const auto& bins = spectral_bins();
  std::int64_t traced = 0;
  const std::int64_t chunk = 64;
  for (std::size_t at = 0; at < selected.size();
       at += static_cast<std::size_t>(chunk)) {
    const std::size_t n = std::min<std::size_t>(chunk, selected.size() - at);
    std::vector<std::int64_t> idx(selected.begin() + at,
                                  selected.begin() + at + n);
    auto [x, y] = ds.batch(idx);
    auto out = numerion_forward(nullptr, x, params, cfg, false, dummy);

    for (std::size_t b = 0; b < n; ++b) {
      std::vector<double> truth(static_cast<std::size_t>(P));
      for (std::int64_t p = 0; p < P; ++p)
        truth[p] = y->data[(b * F + channel) * P + p];
      const double truth_mean = mean_of(truth);
      std::vector<double> truth_c = truth;
      for (auto& v : truth_c) v -= truth_mean;

      for (std::int64_t s = 0; s < S; ++s) {
        std::vector<double> pred(static_cast<std::size_t>(P));
        for (std::int64_t p = 0; p < P; ++p)
          pred[p] = out.per_space[s]->data[(b * F + channel) * P + p];

        // Fusion weight share over this window's horizon positions.
        for (std::int64_t p = 0; p < P; ++p) {
          acc[s].weight_sum +=
              out.weights->data[((s * static_cast<std::int64_t>(n) + b) * F +
                                 channel) * P + p];
          ++acc[s].weight_n;
        }

        if (auto r = pearson(pred, truth)) {
          acc[s].pearson_sum += *r;
          ++acc[s].pearson_n;
        }

        // Mean-center before spectral statistics: the report measures
        // fluctuation structure, not each window's shared offset.
        std::vector<double> pred_c = pred;
        const double pm = mean_of(pred_c);
        for (auto& v : pred_c) v -= pm;

        double energy = 0.0;
        for (double v : pred_c) energy += v * v;
        if (energy > 1e-24) {
          acc[s].maf_sum += maf(pred_c);
          ++acc[s].maf_n;
          auto share = power_share_bins(pred_c);
          for (std::size_t bi = 0; bi < bins.size(); ++bi)
            acc[s].share_sum[bi] += share[bi];
          ++acc[s].share_n;
        }
        for (std::size_t bi = 0; bi < bins.size(); ++bi)
          if (auto v = pve(truth_c, pred_c, bins[bi])) {
            acc[s].pve_sum[bi] += *v;
            ++acc[s].pve_n[bi];
          }
      }

      if (traces.is_open() && traced < opt.trace_windows) {
        for (std::int64_t p = 0; p < P; ++p) {
          traces << selected[at + b] << "," << p << "," << truth[p] << ","
                 << out.prediction->data[(b * F + channel) * P + p];
          for (std::int64_t s = 0; s < S; ++s)
            traces << ","
                   << out.per_space[s]->data[(b * F + channel) * P + p];
          traces << "\n";
        }
        ++traced;
      }
    }
  }

  SpectralReport rep;
  rep.windows_used = static_cast<std::int64_t>(selected.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::int64_t s = 0; s < S; ++s) {
    SpaceSpectralStats st;
    st.space_dim = cfg.enabled_spaces[s];
    st.maf = acc[s].maf_n ? acc[s].maf_sum / acc[s].maf_n : nan;
    st.pearson = acc[s].pearson_n ? acc[s].pearson_sum / acc[s].pearson_n : nan;
    st.weight_share = acc[s].weight_sum / static_cast<double>(acc[s].weight_n);
    for (std::size_t bi = 0; bi < bins.size(); ++bi) {
      st.pve[bi] = acc[s].pve_n[bi] ? acc[s].pve_sum[bi] / acc[s].pve_n[bi]
                                    : nan;
      st.power_share[bi] =
          acc[s].share_n ? acc[s].share_sum[bi] / acc[s].share_n : 0.0;
    }
    rep.per_space.push_back(st);
  }

  if (!opt.out_dir.empty()) {
    const auto dir = std::filesystem::path(opt.out_dir);
    std::ofstream summary(dir / "summary.csv");
    summary << std::setprecision(17) << "space,maf,pearson,weight_share\n";
    for (const auto& st : rep.per_space) {
      summary << st.space_dim << ",";
      if (std::isfinite(st.maf)) summary << st.maf;
      summary << ",";
      if (std::isfinite(st.pearson)) summary << st.pearson;
      summary << "," << st.weight_share << "\n";
    }
    std::ofstream bf(dir / "bins.csv");
    bf << std::setprecision(17) << "space,bin_lo,bin_hi,pve,power_share\n";
    for (const auto& st : rep.per_space)
      for (std::size_t bi = 0; bi < bins.size(); ++bi) {
        bf << st.space_dim << "," << std::max(0.0, bins[bi].lo) << ","
           << bins[bi].hi << ",";
        if (std::isfinite(st.pve[bi])) bf << st.pve[bi];
        bf << "," << st.power_share[bi] << "\n";
      }
  }
  return rep;
}

} // namespace numerion
