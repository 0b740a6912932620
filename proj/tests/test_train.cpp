// ============================================================================
// Unit tests: Adam optimizer, training loop with early stopping, evaluation,
// and the ablation case table.
//
// Oracles pinned up front:
//   * Adam first-step arithmetic from the update formula (bias correction),
//   * quadratic-bowl convergence,
//   * persistence baseline on a hand-computed 3-row toy split,
//   * determinism (two identical runs agree bitwise),
//   * ablation case structure (which spaces / fusion flags per named case).
// ============================================================================
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "numerion/data.hpp"
#include "numerion/model.hpp"
#include "numerion/train.hpp"

using namespace numerion;

namespace {

NumerionConfig tiny_config(int F) {
  NumerionConfig cfg;
  cfg.lookback = 16;
  cfg.horizon = 4;
  cfg.channels = F;
  cfg.patch_levels = 2;
  cfg.embed_dim = 8;
  cfg.rhr_layers = 2;
  cfg.rhr_hidden = 8;
  cfg.dropout = 0.0;
  cfg.enabled_spaces = {1, 2};
  return cfg;
}

} // namespace

// ---------------------------------------------------------------------------
// adam_step
// ---------------------------------------------------------------------------
TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto w = Tensor::make({2}, {1.5, -2.5}, true);
  ensure_grad(w);
  ParamList params{{"w", w}};
  AdamState st;
  TrainConfig cfg;
  adam_step(params, st, cfg);
  CHECK(w->data[0] == 1.5);
  CHECK(w->data[1] == -2.5);
  CHECK(st.step == 1);
}

TEST_CASE("adam: first-step arithmetic matches the bias-corrected formula") {
  auto w = Tensor::make({1}, {1.0}, true);
  ensure_grad(w);
  w->grad[0] = 0.5;
  ParamList params{{"w", w}};
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(params, st, cfg);
  // m̂ = g, v̂ = g² after bias correction at t=1, so the update is
  // lr · g / (|g| + eps).
  const double expect = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(w->data[0] == doctest::Approx(expect).epsilon(1e-12));
  // State mirrors parameter shapes.
  REQUIRE(st.m.size() == 1);
  CHECK(st.m[0].size() == w->data.size());
  CHECK(st.v[0].size() == w->data.size());
}

TEST_CASE("adam: descent on f(w) = w^2 via the tape") {
  auto w = Tensor::make({1}, {1.0}, true);
  ParamList params{{"w", w}};
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  Tape tape;
  auto loss = op_mul(&tape, w, w);
  tape.backward(loss);
  adam_step(params, st, cfg);
  CHECK(w->data[0] < 1.0);
}

TEST_CASE("adam: quadratic bowl converges to |w| < 1e-6 within 500 steps") {
  auto w = Tensor::make({1}, {1.0}, true);
  ensure_grad(w);
  ParamList params{{"w", w}};
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  for (int i = 0; i < 500; ++i) {
    w->grad[0] = 2.0 * w->data[0]; // d/dw w^2
    adam_step(params, st, cfg);
  }
  CHECK(std::abs(w->data[0]) < 1e-6);
}

TEST_CASE("adam: non-finite gradient aborts the step with diagnostics") {
  auto w = Tensor::make({1}, {1.0}, true);
  ensure_grad(w);
  w->grad[0] = std::numeric_limits<double>::quiet_NaN();
  ParamList params{{"bad_param", w}};
  AdamState st;
  TrainConfig cfg;
  CHECK_THROWS_WITH_AS(adam_step(params, st, cfg),
                       doctest::Contains("bad_param"), std::runtime_error);
  CHECK(w->data[0] == 1.0); // untouched
}

// ---------------------------------------------------------------------------
// persistence baseline + evaluate
// ---------------------------------------------------------------------------
TEST_CASE("persistence baseline matches hand arithmetic on a toy split") {
  WindowedDataset ds;
  ds.split = "test";
  ds.T = 2;
  ds.P = 1;
  ds.rows = Tensor::make({4, 1}, {1.0, 2.0, 3.0, 5.0});
  // Window 0: x = (1,2), y = 3, persistence pred = 2, |err| = 1.
  // Window 1: x = (2,3), y = 5, persistence pred = 3, |err| = 2.
  CHECK(ds.num_windows() == 2);
  CHECK(persistence_mae(ds) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("evaluate matches a manual per-window forward pass") {
  auto tbl = synthetic(SyntheticKind::SineMix, 200, 2, 11);
  auto splits = split_standardize_window(tbl, 16, 4, {40, 12, 12});
  auto cfg = tiny_config(2);
  std::mt19937_64 rng(3);
  auto params = make_numerion_params(cfg, rng);

  auto m = evaluate(params, cfg, splits.test);
  double abs_sum = 0.0, sq_sum = 0.0;
  std::int64_t count = 0;
  std::mt19937_64 dummy(0);
  for (std::int64_t i = 0; i < splits.test.num_windows(); ++i) {
    auto w = splits.test.window(i);
    auto out = numerion_forward(nullptr, w.x, params, cfg, false, dummy);
    for (std::size_t k = 0; k < w.y->data.size(); ++k) {
      const double d = out.prediction->data[k] - w.y->data[k];
      abs_sum += std::abs(d);
      sq_sum += d * d;
      ++count;
    }
  }
  CHECK(m.mae == doctest::Approx(abs_sum / count).epsilon(1e-10));
  CHECK(m.mse == doctest::Approx(sq_sum / count).epsilon(1e-10));
}

TEST_CASE("evaluate rejects an empty split") {
  WindowedDataset ds;
  ds.split = "test";
  ds.T = 8;
  ds.P = 8;
  ds.rows = Tensor::zeros({4, 1}); // too short for any window
  auto cfg = tiny_config(1);
  std::mt19937_64 rng(0);
  auto params = make_numerion_params(cfg, rng);
  CHECK(ds.num_windows() == 0);
  CHECK_THROWS_AS(evaluate(params, cfg, ds), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
TEST_CASE("train: max_epochs = 0 returns seeded init params, empty history") {
  auto tbl = synthetic(SyntheticKind::SineMix, 300, 2, 5);
  auto splits = split_standardize_window(tbl, 16, 4, {60, 20, 20});
  auto cfg = tiny_config(2);
  TrainConfig tc;
  tc.max_epochs = 0;
  tc.seed = 123;
  auto res = train(cfg, tc, splits.train, splits.val);
  CHECK(res.history.empty());
  CHECK_FALSE(res.diverged);

  std::mt19937_64 rng(123);
  auto fresh = make_numerion_params(cfg, rng);
  auto got = named_params(res.params);
  auto want = named_params(fresh);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].first == want[i].first);
    CHECK(got[i].second->data == want[i].second->data);
  }
}

TEST_CASE("train: two runs with the same seed agree bitwise") {
  auto tbl = synthetic(SyntheticKind::SineMix, 300, 2, 5);
  auto splits = split_standardize_window(tbl, 16, 4, {60, 20, 20});
  auto cfg = tiny_config(2);
  cfg.dropout = 0.1; // exercise the dropout stream in the determinism claim
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 16;
  tc.seed = 7;

  auto a = train(cfg, tc, splits.train, splits.val);
  auto b = train(cfg, tc, splits.train, splits.val);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_mae == b.history[e].train_mae);
    CHECK(a.history[e].val_mae == b.history[e].val_mae);
  }
  auto pa = named_params(a.params);
  auto pb = named_params(b.params);
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].second->data == pb[i].second->data);

  TrainConfig tc2 = tc;
  tc2.seed = 8;
  auto c = train(cfg, tc2, splits.train, splits.val);
  REQUIRE(!c.history.empty());
  CHECK(c.history[0].train_mae != a.history[0].train_mae);
}

TEST_CASE("train: beats the persistence baseline on a single sine") {
  auto tbl = synthetic(SyntheticKind::SineMix, 400, 1, 9, {0.1});
  auto splits = split_standardize_window(tbl, 16, 4, {120, 40, 40});
  auto cfg = tiny_config(1);
  cfg.rhr_hidden = 16;
  TrainConfig tc;
  tc.max_epochs = 20;
  tc.patience = 20; // no early stop; give it the full budget
  tc.batch_size = 16;
  tc.learning_rate = 1e-2;
  tc.seed = 1;
  auto res = train(cfg, tc, splits.train, splits.val);
  const double baseline = persistence_mae(splits.val);
  CHECK(res.best_val_mae < baseline);
  CHECK_FALSE(res.diverged);
  // History bookkeeping: best-val is the minimum of recorded val MAEs.
  double lo = 1e300;
  for (const auto& e : res.history) lo = std::min(lo, e.val_mae);
  CHECK(res.best_val_mae == doctest::Approx(lo).epsilon(1e-15));
}

TEST_CASE("train: early stopping halts after `patience` stale epochs") {
  auto tbl = synthetic(SyntheticKind::SineMix, 300, 1, 2, {0.1});
  auto splits = split_standardize_window(tbl, 16, 4, {60, 20, 20});
  auto cfg = tiny_config(1);
  TrainConfig tc;
  tc.max_epochs = 200;
  tc.patience = 2;
  tc.batch_size = 16;
  tc.learning_rate = 1e-2;
  tc.seed = 4;
  auto res = train(cfg, tc, splits.train, splits.val);
  REQUIRE(!res.history.empty());
  CHECK(res.history.size() < 200); // stopped early
  // The run ends exactly `patience` epochs after the best one.
  CHECK(static_cast<std::int64_t>(res.history.size()) ==
        res.best_epoch + tc.patience);
}

TEST_CASE("train: non-finite loss aborts with the last good parameters") {
  WindowedDataset bad;
  bad.split = "train";
  bad.T = 16;
  bad.P = 4;
  bad.rows = Tensor::zeros({40, 1});
  for (std::int64_t i = 0; i < 40; ++i) bad.rows->data[i] = 0.1 * i;
  bad.rows->data[25] = std::numeric_limits<double>::infinity();

  WindowedDataset val;
  val.split = "val";
  val.T = 16;
  val.P = 4;
  val.rows = Tensor::zeros({25, 1});

  auto cfg = tiny_config(1);
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 8;
  tc.seed = 5;
  auto res = train(cfg, tc, bad, val);
  CHECK(res.diverged);
  // Divergence hit during epoch 1, so the best checkpoint is the init.
  std::mt19937_64 rng(5);
  auto fresh = make_numerion_params(cfg, rng);
  auto got = named_params(res.params);
  auto want = named_params(fresh);
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i].second->data == want[i].second->data);
}

// ---------------------------------------------------------------------------
// ablation case table
// ---------------------------------------------------------------------------
TEST_CASE("ablation: named cases map to the documented configurations") {
  auto sede = ablation_case("w/o Sede");
  CHECK(sede.spaces == std::vector<int>{1, 2, 4, 8});
  CHECK(sede.fusion);
  CHECK(sede.patch);

  auto fusion = ablation_case("w/o Adaptive Fusion");
  CHECK(fusion.spaces == std::vector<int>{1, 2, 4, 8, 16});
  CHECK_FALSE(fusion.fusion);

  auto comp_only = ablation_case("Comp only");
  CHECK(comp_only.spaces == std::vector<int>{2});
  CHECK_FALSE(comp_only.fusion);

  auto patch = ablation_case("w/o Multi-Level Patch");
  CHECK(patch.spaces == std::vector<int>{1, 2, 4, 8, 16});
  CHECK_FALSE(patch.patch);
  CHECK(patch.fusion);

  auto full = ablation_case("full");
  CHECK(full.spaces == std::vector<int>{1, 2, 4, 8, 16});
  CHECK(full.fusion);
  CHECK(full.patch);

  // Numeric ids 1..17 resolve; case 7 is "Real only" per the published table.
  CHECK(ablation_case("7").spaces == std::vector<int>{1});
  CHECK(ablation_case("13").spaces == std::vector<int>{2, 4, 8, 16});
  CHECK_FALSE(ablation_case("13").fusion);
  CHECK(ablation_cases().size() == 18); // full + 17 numbered cases

  CHECK_THROWS_AS(ablation_case("w/o Everything"), std::invalid_argument);
}

TEST_CASE("ablation: runner trains each case and reports deltas vs full") {
  auto tbl = synthetic(SyntheticKind::SineMix, 260, 1, 6, {0.1});
  auto splits = split_standardize_window(tbl, 16, 4, {40, 12, 12});
  auto cfg = tiny_config(1);
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.batch_size = 16;
  tc.seed = 2;
  auto rows =
      run_ablation({"full", "w/o Adaptive Fusion"}, cfg, tc, splits);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].c.id == "full");
  CHECK(rows[0].delta_mae_pct == 0.0);
  CHECK(std::isfinite(rows[0].mae));
  CHECK(std::isfinite(rows[1].mae));
  // delta = (full - case) / full, per the published table convention.
  const double want =
      (rows[0].mae - rows[1].mae) / rows[0].mae * 100.0;
  CHECK(rows[1].delta_mae_pct == doctest::Approx(want).epsilon(1e-12));
}
