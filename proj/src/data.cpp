#include "numerion/data.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace numerion {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void cell_error(const std::string& path, std::size_t row_1based,
                             std::size_t col_1based, const std::string& what) {
  throw std::runtime_error(path + ": row " + std::to_string(row_1based) +
                           ", column " + std::to_string(col_1based) + ": " +
                           what);
}

} // namespace

SeriesTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  auto header = split_line(line);
  if (header.size() < 2)
    throw std::runtime_error(path +
                             ": header needs a timestamp column and at least "
                             "one channel column");

  SeriesTable tbl;
  const auto stem_begin = path.find_last_of("/\\");
  std::string stem =
      stem_begin == std::string::npos ? path : path.substr(stem_begin + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  tbl.name = stem;
  for (std::size_t c = 1; c < header.size(); ++c)
    tbl.channel_names.push_back(trim(header[c]));
  const std::size_t F = tbl.channel_names.size();

  std::vector<double> values;
  std::size_t row = 1; // 1-based, counting the header as row 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != F + 1)
      throw std::runtime_error(path + ": row " + std::to_string(row) +
                               ": expected " + std::to_string(F + 1) +
                               " cells, got " + std::to_string(cells.size()));
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (cell.empty()) cell_error(path, row, c + 1, "missing value");
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size())
        cell_error(path, row, c + 1, "non-numeric value '" + cell + "'");
      if (!std::isfinite(v))
        cell_error(path, row, c + 1, "non-finite value '" + cell + "'");
      values.push_back(v);
    }
  }
  if (values.empty()) throw std::runtime_error(path + ": no data rows");

  const std::int64_t rows = static_cast<std::int64_t>(values.size() / F);
  tbl.values = Tensor::zeros({rows, static_cast<std::int64_t>(F)});
  tbl.values->data = std::move(values);
  return tbl;
}

// ---------------------------------------------------------------------------
// Windowed splits
// ---------------------------------------------------------------------------
Window WindowedDataset::window(std::int64_t i) const {
  if (i < 0 || i >= num_windows())
    throw std::out_of_range("window index " + std::to_string(i) +
                            " out of range [0, " +
                            std::to_string(num_windows()) + ")");
  const std::int64_t F = rows->shape[1];
  Window w;
  w.x = Tensor::zeros({F, T});
  w.y = Tensor::zeros({F, P});
  for (std::int64_t f = 0; f < F; ++f) {
    for (std::int64_t t = 0; t < T; ++t)
      w.x->data[f * T + t] = rows->data[(i + t) * F + f];
    for (std::int64_t p = 0; p < P; ++p)
      w.y->data[f * P + p] = rows->data[(i + T + p) * F + f];
  }
  return w;
}

std::pair<TensorPtr, TensorPtr> WindowedDataset::batch(
    const std::vector<std::int64_t>& indices) const {
  const std::int64_t B = static_cast<std::int64_t>(indices.size());
  const std::int64_t F = rows->shape[1];
  auto x = Tensor::zeros({B, F, T});
  auto y = Tensor::zeros({B, F, P});
  for (std::int64_t b = 0; b < B; ++b) {
    const Window w = window(indices[b]);
    std::copy(w.x->data.begin(), w.x->data.end(),
              x->data.begin() + b * F * T);
    std::copy(w.y->data.begin(), w.y->data.end(),
              y->data.begin() + b * F * P);
  }
  return {x, y};
}

SplitResult split_standardize_window(const SeriesTable& table, std::int64_t T,
                                     std::int64_t P, Partition part,
                                     SplitMode mode) {
  if (!table.values || table.values->shape.size() != 2)
    throw std::invalid_argument("series table has no [rows, F] values");
  if (T < 1) throw std::invalid_argument("lookback T must be >= 1");
  if (P < 1) throw std::invalid_argument("horizon P must be >= 1");
  if (part.train < 1 || part.val < 0 || part.test < 0)
    throw std::invalid_argument("partition needs train >= 1, val/test >= 0");

  const std::int64_t rows = table.values->shape[0];
  const std::int64_t F = table.values->shape[1];
  const std::int64_t pad = T + P - 1;

  // Resolve each split to an absolute row range [begin, end).
  struct Range {
    std::int64_t begin, end;
  };
  Range r_train{}, r_val{}, r_test{};
  std::int64_t train_fit_end = 0; // scaler statistics use rows [0, this)
  if (mode == SplitMode::WindowCounts) {
    r_train = {0, part.train + pad};
    r_val = {r_train.end, r_train.end + (part.val > 0 ? part.val + pad : 0)};
    r_test = {r_val.end, r_val.end + (part.test > 0 ? part.test + pad : 0)};
    train_fit_end = r_train.end;
  } else {
    // Benchmark convention: partition holds raw row counts; the lookback of
    // val/test windows reaches back T rows into the preceding split.
    r_train = {0, part.train};
    r_val = {part.train - T, part.train + part.val};
    r_test = {part.train + part.val - T, part.train + part.val + part.test};
    if (r_val.begin < 0)
      throw std::invalid_argument("benchmark split: train rows < lookback");
    train_fit_end = part.train;
  }
  if (r_test.end > rows)
    throw std::invalid_argument(
        "partition needs " + std::to_string(r_test.end) + " rows but table has " +
        std::to_string(rows));
  if (train_fit_end < 2)
    throw std::invalid_argument("training split needs at least 2 rows");

  SplitResult res;

  // Fit the scaler on training rows only (population statistics).
  res.scaler.mean.assign(F, 0.0);
  res.scaler.std.assign(F, 0.0);
  for (std::int64_t r = 0; r < train_fit_end; ++r)
    for (std::int64_t f = 0; f < F; ++f)
      res.scaler.mean[f] += table.values->data[r * F + f];
  for (std::int64_t f = 0; f < F; ++f)
    res.scaler.mean[f] /= static_cast<double>(train_fit_end);
  for (std::int64_t r = 0; r < train_fit_end; ++r)
    for (std::int64_t f = 0; f < F; ++f) {
      const double d = table.values->data[r * F + f] - res.scaler.mean[f];
      res.scaler.std[f] += d * d;
    }
  for (std::int64_t f = 0; f < F; ++f) {
    res.scaler.std[f] = std::sqrt(res.scaler.std[f] /
                                  static_cast<double>(train_fit_end));
    if (res.scaler.std[f] < 1e-12) {
      res.scaler.std[f] = 1.0;
      const std::string name = f < static_cast<std::int64_t>(
                                       table.channel_names.size())
                                   ? table.channel_names[f]
                                   : std::to_string(f);
      res.warnings.push_back("channel '" + name +
                             "' is constant on the training split; std "
                             "clamped to 1");
    }
  }

  auto make_split = [&](const char* name, Range r) {
    WindowedDataset ds;
    ds.split = name;
    ds.T = T;
    ds.P = P;
    ds.row_offset = r.begin;
    const std::int64_t n = r.end - r.begin;
    ds.rows = Tensor::zeros({n, F});
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t f = 0; f < F; ++f)
        ds.rows->data[i * F + f] =
            (table.values->data[(r.begin + i) * F + f] - res.scaler.mean[f]) /
            res.scaler.std[f];
    return ds;
  };
  res.train = make_split("train", r_train);
  res.val = make_split("val", r_val);
  res.test = make_split("test", r_test);
  return res;
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------
SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "sine_mix") return SyntheticKind::SineMix;
  if (s == "trend_plus_noise") return SyntheticKind::TrendPlusNoise;
  if (s == "step") return SyntheticKind::Step;
  throw std::invalid_argument(
      "unknown synthetic kind '" + s +
      "' (expected sine_mix, trend_plus_noise, or step)");
}

SeriesTable synthetic(SyntheticKind kind, std::int64_t rows, std::int64_t F,
                      std::uint64_t seed, std::vector<double> frequencies,
                      double noise) {
  if (rows < 1 || F < 1)
    throw std::invalid_argument("synthetic needs rows >= 1 and F >= 1");
  SeriesTable tbl;
  tbl.frequency = "synthetic";
  for (std::int64_t f = 0; f < F; ++f)
    tbl.channel_names.push_back("ch" + std::to_string(f));
  tbl.values = Tensor::zeros({rows, F});
  std::mt19937_64 rng(seed);

  switch (kind) {
    case SyntheticKind::SineMix: {
      tbl.name = "sine_mix";
      if (frequencies.empty()) frequencies = {0.05, 0.125, 0.35};
      for (double fr : frequencies)
        if (!(fr > 0.0) || fr > 0.5)
          throw std::invalid_argument(
              "sine_mix frequencies must lie in (0, 0.5]");
      tbl.known_frequencies = frequencies;
      std::uniform_real_distribution<double> phase(0.0,
                                                   2.0 * std::numbers::pi);
      for (std::int64_t f = 0; f < F; ++f) {
        std::vector<double> phases;
        for (std::size_t k = 0; k < frequencies.size(); ++k)
          phases.push_back(phase(rng));
        for (std::int64_t t = 0; t < rows; ++t) {
          double v = 0.0;
          for (std::size_t k = 0; k < frequencies.size(); ++k) {
            const double amp = 1.0 / static_cast<double>(k + 1);
            v += amp * std::sin(2.0 * std::numbers::pi * frequencies[k] *
                                    static_cast<double>(t) +
                                phases[k]);
          }
          tbl.values->data[t * F + f] = v;
        }
      }
      break;
    }
    case SyntheticKind::TrendPlusNoise: {
      tbl.name = "trend_plus_noise";
      std::uniform_real_distribution<double> slope(-0.05, 0.05);
      std::uniform_real_distribution<double> intercept(-2.0, 2.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (std::int64_t f = 0; f < F; ++f) {
        const double a = slope(rng);
        const double b = intercept(rng);
        for (std::int64_t t = 0; t < rows; ++t) {
          const double eps = noise > 0.0 ? noise * gauss(rng) : 0.0;
          tbl.values->data[t * F + f] = a * static_cast<double>(t) + b + eps;
        }
      }
      break;
    }
    case SyntheticKind::Step: {
      tbl.name = "step";
      std::uniform_int_distribution<int> seg_count(3, 8);
      std::uniform_real_distribution<double> level(-3.0, 3.0);
      for (std::int64_t f = 0; f < F; ++f) {
        const int segs = seg_count(rng);
        // Segment boundaries: distinct interior rows, sorted.
        std::vector<std::int64_t> cuts{0, rows};
        std::uniform_int_distribution<std::int64_t> cut(1, rows - 1);
        while (static_cast<int>(cuts.size()) < segs + 1) {
          const std::int64_t c = cut(rng);
          if (std::find(cuts.begin(), cuts.end(), c) == cuts.end())
            cuts.push_back(c);
        }
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
          const double v = level(rng);
          for (std::int64_t t = cuts[s]; t < cuts[s + 1]; ++t)
            tbl.values->data[t * F + f] = v;
        }
      }
      break;
    }
  }
  return tbl;
}

} // namespace numerion
