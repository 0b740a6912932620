// ============================================================================
// Dataset ingestion, standardization, chronological splitting, and stride-1
// windowing, plus deterministic synthetic generators for analytic checks.
//
// Conventions
//   * A SeriesTable holds raw values as a [rows, F] tensor in time-major
//     order (row r, channel f at data[r * F + f]).
//   * Splits are chronological: train, then validation, then test.
//   * The scaler (per-channel mean / std) is fit on TRAINING rows only and
//     applied to every split. A constant channel has its std clamped to 1
//     and a warning is recorded.
//   * Windows advance with stride 1. Window i of a split pairs a lookback
//     block x = rows[i .. i+T) with a horizon block y = rows[i+T .. i+T+P),
//     both transposed to channel-major [F, T] / [F, P].
//
// Two split conventions are supported:
//   * SplitMode::WindowCounts (default) — the partition gives the number of
//     windows per split. Each split receives its own contiguous row range of
//     n_windows + T + P - 1 rows, so no window ever reads a row outside its
//     split (strict leak-freedom).
//   * SplitMode::BenchmarkRows — the partition gives raw row counts per
//     split. Validation and test lookbacks are back-extended by T rows into
//     the preceding split, matching the common public-benchmark loader;
//     target rows still never leave their split.
// ============================================================================
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "numerion/tensor.hpp"

namespace numerion {

struct SeriesTable {
  std::string name;                        // e.g. CSV stem or synthetic kind
  std::vector<std::string> channel_names;  // size F
  TensorPtr values;                        // [rows, F]
  std::string frequency;                   // free-text sampling frequency
  // For synthetic sine mixtures: the normalized frequencies (cycles/sample)
  // used to build the series, kept for analytic spectral references.
  std::vector<double> known_frequencies;
};

// Parses a CSV whose first column is a timestamp/index (ignored) and whose
// remaining columns are numeric channels. Any missing or non-numeric cell
// raises std::runtime_error naming the file, row, and column.
SeriesTable load_csv(const std::string& path);

struct Scaler {
  std::vector<double> mean; // size F
  std::vector<double> std;  // size F, clamped to 1 for constant channels
};

struct Window {
  TensorPtr x; // [F, T]
  TensorPtr y; // [F, P]
};

struct WindowedDataset {
  std::string split;      // "train" | "val" | "test"
  TensorPtr rows;         // standardized [rows, F] slice backing this split
  std::int64_t row_offset = 0; // absolute index of rows[0] in the source table
  std::int64_t T = 0;
  std::int64_t P = 0;

  std::int64_t num_windows() const {
    const std::int64_t n = rows ? rows->shape[0] - T - P + 1 : 0;
    return n > 0 ? n : 0;
  }
  Window window(std::int64_t i) const;
  // Stacks the given windows into x [B, F, T], y [B, F, P].
  std::pair<TensorPtr, TensorPtr> batch(
      const std::vector<std::int64_t>& indices) const;
};

struct Partition {
  std::int64_t train = 0;
  std::int64_t val = 0;
  std::int64_t test = 0;
};

enum class SplitMode { WindowCounts, BenchmarkRows };

struct SplitResult {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  Scaler scaler;
  std::vector<std::string> warnings;
};

SplitResult split_standardize_window(const SeriesTable& table, std::int64_t T,
                                     std::int64_t P, Partition partition,
                                     SplitMode mode = SplitMode::WindowCounts);

enum class SyntheticKind { SineMix, TrendPlusNoise, Step };

SyntheticKind synthetic_kind_from_string(const std::string& s);

// Deterministic synthetic series, identical for identical arguments.
//   * SineMix: sum of sinusoids at `frequencies` (cycles/sample; default
//     {0.05, 0.125, 0.35}) with per-channel phases; frequencies are recorded
//     in the returned table's known_frequencies.
//   * TrendPlusNoise: per-channel affine trend plus N(0, noise^2) samples.
//   * Step: piecewise-constant levels over a few random segments.
// `frequencies` applies to SineMix only; `noise` to TrendPlusNoise only.
SeriesTable synthetic(SyntheticKind kind, std::int64_t rows, std::int64_t F,
                      std::uint64_t seed,
                      std::vector<double> frequencies = {},
                      double noise = 0.1);

} // namespace numerion
