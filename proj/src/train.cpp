#include "numerion/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace numerion {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------
void zero_grads(ParamList& params) {
  for (auto& [name, t] : params)
    std::fill(t->grad.begin(), t->grad.end(), 0.0);
}

void adam_step(ParamList& params, AdamState& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].second->data.size(), 0.0);
      state.v[i].assign(params[i].second->data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match params");

  // Validate every gradient before touching any parameter so a non-finite
  // gradient aborts the step atomically.
  for (auto& [name, t] : params)
    for (double g : t->grad)
      if (!std::isfinite(g))
        throw std::runtime_error("adam_step: non-finite gradient in '" + name +
                                 "'");

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].second;
    if (t->grad.empty()) continue; // parameter unreached by backward
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < t->data.size(); ++k) {
      const double g = t->grad[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      t->data[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------
Metrics evaluate(const NumerionParams& params, const NumerionConfig& cfg,
                 const WindowedDataset& ds) {
  const std::int64_t N = ds.num_windows();
  if (N == 0)
    throw std::invalid_argument("evaluate: split '" + ds.split +
                                "' has no windows");
  Metrics m;
  std::int64_t count = 0;
  std::mt19937_64 dummy(0); // inference path draws no random numbers
  const std::int64_t chunk = 256;
  for (std::int64_t at = 0; at < N; at += chunk) {
    const std::int64_t n = std::min(chunk, N - at);
    std::vector<std::int64_t> idx(n);
    std::iota(idx.begin(), idx.end(), at);
    auto [x, y] = ds.batch(idx);
    auto out = numerion_forward(nullptr, x, params, cfg, false, dummy);
    for (std::size_t k = 0; k < y->data.size(); ++k) {
      const double d = out.prediction->data[k] - y->data[k];
      m.mae += std::abs(d);
      m.mse += d * d;
    }
    count += static_cast<std::int64_t>(y->data.size());
  }
  m.mae /= static_cast<double>(count);
  m.mse /= static_cast<double>(count);
  return m;
}

double persistence_mae(const WindowedDataset& ds) {
  const std::int64_t N = ds.num_windows();
  if (N == 0)
    throw std::invalid_argument("persistence_mae: split has no windows");
  const std::int64_t F = ds.rows->shape[1];
  double acc = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t f = 0; f < F; ++f) {
      const double last = ds.rows->data[(i + ds.T - 1) * F + f];
      for (std::int64_t p = 0; p < ds.P; ++p)
        acc += std::abs(ds.rows->data[(i + ds.T + p) * F + f] - last);
    }
  }
  return acc / static_cast<double>(N * F * ds.P);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------
namespace {

std::vector<std::vector<double>> snapshot(const ParamList& params) {
  std::vector<std::vector<double>> s;
  s.reserve(params.size());
  for (const auto& [name, t] : params) s.push_back(t->data);
  return s;
}

void restore(ParamList& params, const std::vector<std::vector<double>>& s) {
  for (std::size_t i = 0; i < params.size(); ++i)
    params[i].second->data = s[i];
}

} // namespace

TrainResult train(const NumerionConfig& model_cfg, const TrainConfig& train_cfg,
                  const WindowedDataset& train_ds,
                  const WindowedDataset& val_ds) {
  validate_config(model_cfg);
  if (train_cfg.batch_size < 1)
    throw std::invalid_argument("train: batch_size must be >= 1");
  if (train_ds.num_windows() == 0)
    throw std::invalid_argument("train: training split has no windows");

  TrainResult res;
  std::mt19937_64 rng(train_cfg.seed);
  res.params = make_numerion_params(model_cfg, rng);
  auto plist = named_params(res.params);
  for (auto& [name, t] : plist) ensure_grad(t);

  auto best = snapshot(plist);
  double best_val = std::numeric_limits<double>::infinity();
  std::int64_t stale = 0;

  AdamState adam;
  const std::int64_t N = train_ds.num_windows();
  std::vector<std::int64_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  for (std::int64_t epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double abs_err = 0.0;
    std::int64_t count = 0;
    for (std::int64_t at = 0; at < N; at += train_cfg.batch_size) {
      const std::int64_t n = std::min(train_cfg.batch_size, N - at);
      std::vector<std::int64_t> idx(order.begin() + at,
                                    order.begin() + at + n);
      auto [x, y] = train_ds.batch(idx);
      Tape tape;
      auto out =
          numerion_forward(&tape, x, res.params, model_cfg, true, rng);
      auto loss = mae_loss(&tape, out.prediction, y);
      const double batch_mae = loss->data[0];
      if (!std::isfinite(batch_mae)) {
        restore(plist, best);
        res.diverged = true;
        return res;
      }
      abs_err += batch_mae * static_cast<double>(y->data.size());
      count += static_cast<std::int64_t>(y->data.size());
      zero_grads(plist);
      tape.backward(loss);
      try {
        adam_step(plist, adam, train_cfg);
      } catch (const std::runtime_error&) {
        restore(plist, best);
        res.diverged = true;
        return res;
      }
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_mae = abs_err / static_cast<double>(count);
    st.val_mae = val_ds.num_windows() > 0
                     ? evaluate(res.params, model_cfg, val_ds).mae
                     : st.train_mae;
    if (st.val_mae < best_val) {
      best_val = st.val_mae;
      best = snapshot(plist);
      res.best_epoch = epoch;
      stale = 0;
      st.improved = true;
    } else {
      ++stale;
    }
    res.history.push_back(st);
    if (stale >= train_cfg.patience) break;
  }

  restore(plist, best);
  res.best_val_mae = best_val;
  return res;
}

// ---------------------------------------------------------------------------
// Ablation cases
// ---------------------------------------------------------------------------
namespace {

const std::vector<int> kAllSpaces = {1, 2, 4, 8, 16};

std::vector<int> drop_space(int dim) {
  std::vector<int> s;
  for (int d : kAllSpaces)
    if (d != dim) s.push_back(d);
  return s;
}

const char* space_label(int dim) {
  switch (dim) {
    case 1: return "Real";
    case 2: return "Comp";
    case 4: return "Quat";
    case 8: return "Octo";
    case 16: return "Sede";
  }
  return "?";
}

} // namespace

std::vector<AblationCase> ablation_cases() {
  std::vector<AblationCase> cases;
  cases.push_back({"full", "full", true, kAllSpaces, true});
  // 1-5: drop one space.
  for (int i = 0; i < 5; ++i) {
    const int dim = kAllSpaces[i];
    cases.push_back({std::to_string(i + 1),
                     std::string("w/o ") + space_label(dim), true,
                     drop_space(dim), true});
  }
  // 6: no adaptive fusion.
  cases.push_back({"6", "w/o Adaptive Fusion", true, kAllSpaces, false});
  // 7-11: single space only (fusion not applicable, disabled).
  for (int i = 0; i < 5; ++i) {
    const int dim = kAllSpaces[i];
    cases.push_back({std::to_string(i + 7),
                     std::string(space_label(dim)) + " only", true,
                     std::vector<int>{dim}, false});
  }
  // 12: no multi-level patch.
  cases.push_back({"12", "w/o Multi-Level Patch", false, kAllSpaces, true});
  // 13-17: drop one space, fusion off.
  for (int i = 0; i < 5; ++i) {
    const int dim = kAllSpaces[i];
    cases.push_back({std::to_string(i + 13),
                     std::string("w/o ") + space_label(dim) +
                         ", w/o Adaptive Fusion",
                     true, drop_space(dim), false});
  }
  return cases;
}

AblationCase ablation_case(const std::string& key) {
  for (const auto& c : ablation_cases())
    if (c.id == key || c.name == key) return c;
  throw std::invalid_argument("unknown ablation case '" + key + "'");
}

std::vector<AblationRow> run_ablation(const std::vector<std::string>& ids,
                                      const NumerionConfig& base_cfg,
                                      const TrainConfig& train_cfg,
                                      const SplitResult& splits) {
  // Resolve, dedupe, and put the full baseline first.
  std::vector<AblationCase> cases{ablation_case("full")};
  for (const auto& id : ids) {
    auto c = ablation_case(id);
    bool seen = false;
    for (const auto& have : cases) seen |= have.id == c.id;
    if (!seen) cases.push_back(c);
  }

  std::vector<AblationRow> rows;
  for (const auto& c : cases) {
    NumerionConfig cfg = base_cfg;
    cfg.enabled_spaces = c.spaces;
    cfg.fusion_enabled = c.fusion;
    if (!c.patch) cfg.patch_levels = 1;
    auto trained = train(cfg, train_cfg, splits.train, splits.val);
    AblationRow row;
    row.c = c;
    row.test = evaluate(trained.params, cfg, splits.test);
    row.mae = row.test.mae;
    row.mse = row.test.mse;
    rows.push_back(row);
  }
  const double full_mae = rows[0].mae;
  const double full_mse = rows[0].mse;
  for (auto& r : rows) {
    r.delta_mae_pct = (full_mae - r.mae) / full_mae * 100.0;
    r.delta_mse_pct = (full_mse - r.mse) / full_mse * 100.0;
  }
  return rows;
}

} // namespace numerion
