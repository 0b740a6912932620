// ============================================================================
// Adam optimizer, MAE training loop with validation-based early stopping,
// evaluation metrics, and the ablation runner.
//
// Determinism: a single std::mt19937_64 seeded from TrainConfig::seed drives
// parameter init, per-epoch shuffling, and dropout, in that order, so two
// runs with identical inputs agree bitwise.
// ============================================================================
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "numerion/data.hpp"
#include "numerion/model.hpp"

namespace numerion {

using ParamList = std::vector<std::pair<std::string, TensorPtr>>;

struct TrainConfig {
  double learning_rate = 1e-3; // Adam step size (typical range [1e-4, 1e-2])
  std::int64_t batch_size = 32;
  std::int64_t max_epochs = 100;
  std::int64_t patience = 3; // epochs without val improvement before stopping
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m; // first moments, aligned with ParamList
  std::vector<std::vector<double>> v; // second moments
};

// One in-place Adam update with bias correction. Parameters whose grad is
// unallocated or all-zero simply do not move. A non-finite gradient aborts
// the whole step (no parameter is touched) with the offending name.
void adam_step(ParamList& params, AdamState& state, const TrainConfig& cfg);

void zero_grads(ParamList& params);

struct Metrics {
  double mae = 0.0;
  double mse = 0.0;
};

// Metrics over every window of the split, in standardized space.
Metrics evaluate(const NumerionParams& params, const NumerionConfig& cfg,
                 const WindowedDataset& ds);

// MAE of the last-value persistence predictor (ŷ[f, p] = x[f, T-1]).
double persistence_mae(const WindowedDataset& ds);

struct EpochStats {
  std::int64_t epoch = 0; // 1-based
  double train_mae = 0.0;
  double val_mae = 0.0;
  bool improved = false;
};

struct TrainResult {
  NumerionParams params; // best-validation parameters
  std::vector<EpochStats> history;
  double best_val_mae = 0.0;
  std::int64_t best_epoch = 0; // 1-based; 0 if no epoch completed
  bool diverged = false;
};

TrainResult train(const NumerionConfig& model_cfg, const TrainConfig& train_cfg,
                  const WindowedDataset& train_ds, const WindowedDataset& val_ds);

// ---------------------------------------------------------------------------
// Ablation runner (published 17-case table + the full model)
// ---------------------------------------------------------------------------
struct AblationCase {
  std::string id;   // "full" or "1".."17"
  std::string name; // human-readable label
  bool patch = true;
  std::vector<int> spaces; // enabled space dimensions
  bool fusion = true;
};

// All cases: "full", then the 17 numbered rows (1-5 drop one space, 6 drops
// fusion, 7-11 keep a single space with fusion off, 12 drops the multi-level
// patch, 13-17 drop one space with fusion off).
std::vector<AblationCase> ablation_cases();

// Lookup by id ("7"), canonical name ("Real only"), or published alias
// ("w/o Sede", "w/o Adaptive Fusion", "w/o Multi-Level Patch", ...).
AblationCase ablation_case(const std::string& id_or_name);

struct AblationRow {
  AblationCase c;
  Metrics test;
  double mae = 0.0;
  double mse = 0.0;
  double delta_mae_pct = 0.0; // (full - case) / full * 100, negative = worse
  double delta_mse_pct = 0.0;
};

// Trains and evaluates each requested case on the given splits. The "full"
// baseline is always trained (and reported first) so deltas are well-defined.
std::vector<AblationRow> run_ablation(const std::vector<std::string>& ids,
                                      const NumerionConfig& base_cfg,
                                      const TrainConfig& train_cfg,
                                      const SplitResult& splits);

} // namespace numerion
