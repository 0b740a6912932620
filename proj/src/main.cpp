// ============================================================================
// numerion — command-line entry point.
//
// Subcommands: rules, gradcheck, train, eval, ablate, analyze, synth.
// Training-style runs write a manifest.json (config echo, seed, dataset hash,
// artifact paths, timings) before work begins and finalize it on exit, so a
// run is reproducible from its manifest alone. The output root is the
// NUMERION_OUT_DIR environment variable when set, else the current directory;
// `--out` names the run directory under that root.
// ============================================================================
#include <cblas.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "numerion/algebra.hpp"
#include "numerion/analysis.hpp"
#include "numerion/data.hpp"
#include "numerion/hyperlayers.hpp"
#include "numerion/model.hpp"
#include "numerion/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace numerion;

namespace {

// ---------------------------------------------------------------------------
// Small utilities
// ---------------------------------------------------------------------------
std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "unavailable";
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 15];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (!in) break;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string fnv1a64_doubles(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(v.data());
  for (std::size_t i = 0; i < v.size() * sizeof(double); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

fs::path resolve_out_dir(const std::string& out_name) {
  const char* root = std::getenv("NUMERION_OUT_DIR");
  fs::path dir = root && *root ? fs::path(root) : fs::path(".");
  dir /= out_name;
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& dir, const json& m) {
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Dataset options shared by train/eval/ablate/analyze (+ synth's generator)
// ---------------------------------------------------------------------------
struct DataOpts {
  std::string data_path;
  std::string synth_kind;
  std::int64_t synth_rows = 2000;
  std::int64_t synth_channels = 1;
  std::vector<double> synth_freqs;
  double synth_noise = 0.1;
  std::uint64_t synth_seed = 0;
  std::vector<std::int64_t> partition; // empty: derived 60/20/20
  bool benchmark_split = false;
};

void add_data_flags(CLI::App* cmd, DataOpts& d, bool need_source) {
  auto* data = cmd->add_option("--data", d.data_path, "CSV dataset path");
  auto* synth = cmd->add_option("--synth", d.synth_kind,
                                "synthetic kind: sine_mix, trend_plus_noise, "
                                "or step (alternative to --data)");
  if (need_source) {
    data->excludes(synth);
    synth->excludes(data);
  }
  cmd->add_option("--rows", d.synth_rows, "synthetic rows")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--channels", d.synth_channels, "synthetic channels")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--freqs", d.synth_freqs,
                  "sine_mix frequencies, cycles/sample")
      ->delimiter(',');
  cmd->add_option("--noise", d.synth_noise, "trend_plus_noise sigma");
  cmd->add_option("--data-seed", d.synth_seed, "synthetic generator seed");
  cmd->add_option("--partition", d.partition,
                  "train,val,test split sizes (window counts by default; raw "
                  "row counts with --benchmark-split); default: 60/20/20 rows")
      ->delimiter(',')
      ->expected(3);
  cmd->add_flag("--benchmark-split", d.benchmark_split,
                "treat --partition as raw row counts with val/test lookback "
                "back-extended into the preceding split");
}

SeriesTable load_table(const DataOpts& d) {
  if (!d.data_path.empty()) return load_csv(d.data_path);
  if (!d.synth_kind.empty())
    return synthetic(synthetic_kind_from_string(d.synth_kind), d.synth_rows,
                     d.synth_channels, d.synth_seed, d.synth_freqs,
                     d.synth_noise);
  throw std::invalid_argument("need a dataset: pass --data or --synth");
}

Partition resolve_partition(const DataOpts& d, std::int64_t rows,
                            std::int64_t T, std::int64_t P) {
  if (!d.partition.empty())
    return {d.partition[0], d.partition[1], d.partition[2]};
  // Default: 60/20/20 chronological row shares.
  const std::int64_t r_tr = rows * 6 / 10;
  const std::int64_t r_va = rows * 2 / 10;
  const std::int64_t r_te = rows - r_tr - r_va;
  if (d.benchmark_split) return {r_tr, r_va, r_te};
  const std::int64_t pad = T + P - 1;
  return {std::max<std::int64_t>(1, r_tr - pad),
          std::max<std::int64_t>(0, r_va - pad),
          std::max<std::int64_t>(0, r_te - pad)};
}

json dataset_json(const SeriesTable& tbl, const DataOpts& d) {
  json j;
  j["name"] = tbl.name;
  j["rows"] = tbl.values->shape[0];
  j["channels"] = tbl.values->shape[1];
  j["channel_names"] = tbl.channel_names;
  if (!d.data_path.empty()) {
    j["path"] = d.data_path;
    j["fnv1a64"] = fnv1a64_file(d.data_path);
  } else {
    j["synth"] = {{"kind", d.synth_kind},
                  {"rows", d.synth_rows},
                  {"channels", d.synth_channels},
                  {"seed", d.synth_seed},
                  {"freqs", d.synth_freqs},
                  {"noise", d.synth_noise}};
    j["fnv1a64"] = fnv1a64_doubles(tbl.values->data);
  }
  if (!tbl.known_frequencies.empty())
    j["known_frequencies"] = tbl.known_frequencies;
  return j;
}

json split_json(const SplitResult& s, Partition part, bool benchmark) {
  return json{{"mode", benchmark ? "benchmark_rows" : "window_counts"},
              {"partition", {part.train, part.val, part.test}},
              {"window_counts",
               {s.train.num_windows(), s.val.num_windows(),
                s.test.num_windows()}},
              {"warnings", s.warnings}};
}

json train_config_json(const TrainConfig& t) {
  return json{{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
              {"max_epochs", t.max_epochs},       {"patience", t.patience},
              {"seed", t.seed},                   {"beta1", t.beta1},
              {"beta2", t.beta2},                 {"eps", t.eps}};
}

// Model-config flags shared by train/ablate.
struct ModelFlags {
  int T = 96, P = 96, levels = 3, embed_dim = 64, layers = 2, hidden = 64;
  int fusion_hidden = 0;
  double dropout = 0.5, pnorm = 6.0;
  std::vector<int> spaces = {1, 2, 4, 8, 16};
  bool no_fusion = false;
};

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
  cmd->add_option("--T", m.T, "lookback length")->check(CLI::PositiveNumber);
  cmd->add_option("--P", m.P, "forecast horizon")->check(CLI::PositiveNumber);
  cmd->add_option("--levels", m.levels, "patch pyramid levels");
  cmd->add_option("--embed-dim", m.embed_dim, "patch embedding width");
  cmd->add_option("--layers", m.layers, "RHR-MLP hidden layers");
  cmd->add_option("--hidden", m.hidden, "first RHR-MLP hidden width");
  cmd->add_option("--dropout", m.dropout, "dropout rate in [0, 1)");
  cmd->add_option("--pnorm", m.pnorm, "HNTanh p-norm order (>= 1)");
  cmd->add_option("--spaces", m.spaces,
                  "hypercomplex space dims, subset of {1,2,4,8,16}")
      ->delimiter(',');
  cmd->add_flag("--no-fusion", m.no_fusion,
                "disable adaptive fusion (uniform averaging)");
  cmd->add_option("--fusion-hidden", m.fusion_hidden,
                  "fusion MLP hidden width (0: use the horizon)");
}

NumerionConfig to_config(const ModelFlags& m, int channels) {
  NumerionConfig cfg;
  cfg.lookback = m.T;
  cfg.horizon = m.P;
  cfg.channels = channels;
  cfg.patch_levels = m.levels;
  cfg.embed_dim = m.embed_dim;
  cfg.rhr_layers = m.layers;
  cfg.rhr_hidden = m.hidden;
  cfg.dropout = m.dropout;
  cfg.p_norm = m.pnorm;
  cfg.fusion_hidden = m.fusion_hidden;
  cfg.enabled_spaces = m.spaces;
  cfg.fusion_enabled = !m.no_fusion;
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// rules
// ---------------------------------------------------------------------------
void print_matrix(std::ostream& os, const char* title,
                  const std::vector<std::vector<int>>& m) {
  os << title << "\n";
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j)
      os << std::setw(3) << row[j] << (j + 1 < row.size() ? " " : "");
    os << "\n";
  }
}

int run_rules(int dim) {
  if (dim < 1 || (dim & (dim - 1)) != 0 || dim > 64)
    throw std::invalid_argument(
        "--dim must be a power of two in {1,2,4,8,16,32,64}");
  const int k = std::countr_zero(static_cast<unsigned>(dim));
  static const char* names[] = {"real",     "complex",      "quaternion",
                                "octonion", "sedenion",     "32-dimensional",
                                "64-dimensional"};
  const auto& t = build_table(k);
  std::cout << "Cayley-Dickson algebra: n = " << dim << " (" << names[k]
            << ")\n\n";
  print_matrix(std::cout, "select matrix (basis index i XOR j):", t.select);
  std::cout << "\n";
  print_matrix(std::cout,
               "sign matrix, left-operand gather (published n=8 orientation):",
               t.sign);
  std::cout << "\n";
  print_matrix(
      std::cout,
      "sign matrix, right-operand gather (published n=4 orientation):",
      t.sign_right);
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------
int run_gradcheck(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  bool ok = true;

  // Suite 1: HNTanh analytic Jacobian vs central finite differences at
  // well-conditioned points (uniform-magnitude coordinates, norm in
  // [0.1, 5]).
  double worst1 = 0.0;
  std::uniform_real_distribution<double> mag(0.5, 1.5);
  std::uniform_real_distribution<double> norm_target(0.1, 5.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int n : {2, 4, 8, 16}) {
    for (double p : {2.0, 3.0, 6.0}) {
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> c(n);
        for (auto& v : c) v = (coin(rng) ? 1.0 : -1.0) * mag(rng);
        const double scale = norm_target(rng) / pnorm(c.data(), n, p);
        for (auto& v : c) v *= scale;
        auto J = hntanh_jacobian(c, p);
        // Five-point central stencil: truncation O(h^4) keeps the bound
        // sharp even near tanh saturation.
        const double h = 1e-3;
        for (int j = 0; j < n; ++j) {
          auto eval = [&](double step) {
            auto cs = c;
            cs[j] += step;
            return hntanh(nullptr, HTensor{Tensor::make({n}, cs), n}, p)
                .base->data;
          };
          const auto y1 = eval(h), y2 = eval(-h), y3 = eval(2 * h),
                     y4 = eval(-2 * h);
          for (int i = 0; i < n; ++i) {
            const double fd =
                (8.0 * (y1[i] - y2[i]) - (y3[i] - y4[i])) / (12.0 * h);
            const double a = J[i][j];
            const double rel = std::abs(a - fd) /
                               std::max({std::abs(a), std::abs(fd), 1e-8});
            worst1 = std::max(worst1, rel);
          }
        }
      }
    }
  }
  std::cout << "hntanh jacobian vs finite differences: max rel err "
            << std::scientific << std::setprecision(3) << worst1
            << (worst1 < 1e-5 ? "  [ok]" : "  [FAIL > 1e-5]") << "\n";
  ok &= worst1 < 1e-5;

  // Suite 2: full model loss, every parameter tensor.
  NumerionConfig cfg;
  cfg.lookback = 16;
  cfg.horizon = 4;
  cfg.channels = 2;
  cfg.patch_levels = 2;
  cfg.embed_dim = 8;
  cfg.rhr_layers = 2;
  cfg.rhr_hidden = 8;
  cfg.dropout = 0.0;
  cfg.enabled_spaces = {1, 2, 4, 8, 16};
  auto params = make_numerion_params(cfg, rng);
  auto x = Tensor::randn({2, cfg.channels, cfg.lookback}, rng, 0.5);
  auto target = Tensor::randn({2, cfg.channels, cfg.horizon}, rng, 0.5);
  for (auto& v : target->data) v -= 5.0; // keep |pred - y| off the MAE kink

  double worst2 = 0.0;
  std::string worst_name;
  std::mt19937_64 fwd_rng(0);
  for (auto& [name, p] : named_params(params)) {
    auto f = [&](Tape& tape, const TensorPtr&) {
      auto out = numerion_forward(&tape, x, params, cfg, false, fwd_rng);
      return mae_loss(&tape, out.prediction, target);
    };
    const double rel = grad_check(f, p, 1e-4);
    if (rel > worst2) {
      worst2 = rel;
      worst_name = name;
    }
  }
  std::cout << "full-model loss grad check over "
            << named_params(params).size() << " tensors: max rel err "
            << std::scientific << std::setprecision(3) << worst2 << " ("
            << worst_name << ")"
            << (worst2 < 1e-4 ? "  [ok]" : "  [FAIL > 1e-4]") << "\n";
  ok &= worst2 < 1e-4;

  std::cout << (ok ? "gradcheck: PASS\n" : "gradcheck: FAIL\n");
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train / eval / ablate / analyze / synth
// ---------------------------------------------------------------------------
struct TrainFlags {
  DataOpts data;
  ModelFlags model;
  double lr = 1e-3;
  std::int64_t batch = 32;
  std::int64_t epochs = 30;
  std::int64_t patience = 3;
  std::uint64_t seed = 0;
  std::string out = "numerion_run";
};

TrainConfig to_train_config(const TrainFlags& f) {
  TrainConfig t;
  t.learning_rate = f.lr;
  t.batch_size = f.batch;
  t.max_epochs = f.epochs;
  t.patience = f.patience;
  t.seed = f.seed;
  return t;
}

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  add_data_flags(cmd, f.data, true);
  add_model_flags(cmd, f.model);
  cmd->add_option("--lr", f.lr, "Adam learning rate");
  cmd->add_option("--batch", f.batch, "minibatch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", f.epochs, "max training epochs");
  cmd->add_option("--patience", f.patience,
                  "early-stopping patience on validation MAE");
  cmd->add_option("--seed", f.seed, "run seed (init, shuffle, dropout)");
  cmd->add_option("--out", f.out, "run directory under the output root");
}

void write_metrics_csv(const fs::path& dir,
                       const std::vector<EpochStats>& history) {
  std::ofstream out(dir / "metrics.csv");
  out << std::setprecision(17) << "epoch,train_mae,val_mae,improved\n";
  for (const auto& e : history)
    out << e.epoch << "," << e.train_mae << "," << e.val_mae << ","
        << (e.improved ? 1 : 0) << "\n";
}

int run_train(const TrainFlags& f) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = resolve_out_dir(f.out);
  auto tbl = load_table(f.data);
  const auto part = resolve_partition(f.data, tbl.values->shape[0], f.model.T,
                                      f.model.P);
  auto splits = split_standardize_window(
      tbl, f.model.T, f.model.P, part,
      f.data.benchmark_split ? SplitMode::BenchmarkRows
                             : SplitMode::WindowCounts);
  for (const auto& w : splits.warnings) std::cerr << "warning: " << w << "\n";
  const auto cfg = to_config(f.model, static_cast<int>(tbl.values->shape[1]));
  const auto tcfg = to_train_config(f);

  json manifest;
  manifest["command"] = "train";
  manifest["status"] = "running";
  manifest["started_utc"] = utc_now();
  manifest["seed"] = f.seed;
  manifest["dataset"] = dataset_json(tbl, f.data);
  manifest["model_config"] = config_to_json(cfg);
  manifest["train_config"] = train_config_json(tcfg);
  manifest["split"] = split_json(splits, part, f.data.benchmark_split);
  manifest["artifacts"] = {{"checkpoint", (dir / "checkpoint.nmn").string()},
                           {"metrics_csv", (dir / "metrics.csv").string()},
                           {"manifest", (dir / "manifest.json").string()}};
  write_manifest(dir, manifest);

  try {
    auto res = train(cfg, tcfg, splits.train, splits.val);
    auto test = evaluate(res.params, cfg, splits.test);
    save_checkpoint((dir / "checkpoint.nmn").string(), cfg, res.params);
    write_metrics_csv(dir, res.history);

    manifest["status"] = res.diverged ? "diverged" : "ok";
    manifest["metrics"] = {{"best_val_mae", res.best_val_mae},
                           {"best_epoch", res.best_epoch},
                           {"epochs_run", res.history.size()},
                           {"test_mae", test.mae},
                           {"test_mse", test.mse}};
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    write_manifest(dir, manifest);

    std::cout << std::fixed << std::setprecision(6);
    std::cout << "trained " << res.history.size() << " epochs (best epoch "
              << res.best_epoch << ", val MAE " << res.best_val_mae << ")\n"
              << "test MAE " << test.mae << "  test MSE " << test.mse << "\n"
              << "artifacts in " << dir.string() << "\n";
    if (res.diverged) {
      std::cerr << "training diverged; kept the last good checkpoint\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    manifest["status"] = std::string("error: ") + e.what();
    write_manifest(dir, manifest);
    throw;
  }
}

struct EvalFlags {
  DataOpts data;
  std::string checkpoint;
  std::string out = "numerion_eval";
};

int run_eval(const EvalFlags& f) {
  const auto started = std::chrono::steady_clock::now();
  auto [cfg, params] = load_checkpoint(f.checkpoint);
  auto tbl = load_table(f.data);
  const auto part = resolve_partition(f.data, tbl.values->shape[0],
                                      cfg.lookback, cfg.horizon);
  auto splits = split_standardize_window(
      tbl, cfg.lookback, cfg.horizon, part,
      f.data.benchmark_split ? SplitMode::BenchmarkRows
                             : SplitMode::WindowCounts);
  auto test = evaluate(params, cfg, splits.test);

  const fs::path dir = resolve_out_dir(f.out);
  json manifest;
  manifest["command"] = "eval";
  manifest["status"] = "ok";
  manifest["started_utc"] = utc_now();
  manifest["checkpoint"] = f.checkpoint;
  manifest["dataset"] = dataset_json(tbl, f.data);
  manifest["model_config"] = config_to_json(cfg);
  manifest["split"] = split_json(splits, part, f.data.benchmark_split);
  manifest["metrics"] = {{"test_mae", test.mae}, {"test_mse", test.mse}};
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  write_manifest(dir, manifest);

  std::cout << std::fixed << std::setprecision(6) << "test MAE " << test.mae
            << "  test MSE " << test.mse << "\n";
  return 0;
}

struct AblateFlags {
  TrainFlags base;
  std::vector<std::string> cases; // empty: all
};

int run_ablate(const AblateFlags& f) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path dir = resolve_out_dir(f.base.out);
  auto tbl = load_table(f.base.data);
  const auto part = resolve_partition(f.base.data, tbl.values->shape[0],
                                      f.base.model.T, f.base.model.P);
  auto splits = split_standardize_window(
      tbl, f.base.model.T, f.base.model.P, part,
      f.base.data.benchmark_split ? SplitMode::BenchmarkRows
                                  : SplitMode::WindowCounts);
  const auto cfg =
      to_config(f.base.model, static_cast<int>(tbl.values->shape[1]));
  const auto tcfg = to_train_config(f.base);

  std::vector<std::string> ids = f.cases;
  if (ids.empty())
    for (const auto& c : ablation_cases()) ids.push_back(c.id);

  json manifest;
  manifest["command"] = "ablate";
  manifest["status"] = "running";
  manifest["started_utc"] = utc_now();
  manifest["seed"] = f.base.seed;
  manifest["dataset"] = dataset_json(tbl, f.base.data);
  manifest["model_config"] = config_to_json(cfg);
  manifest["train_config"] = train_config_json(tcfg);
  manifest["split"] = split_json(splits, part, f.base.data.benchmark_split);
  manifest["cases"] = ids;
  manifest["artifacts"] = {{"ablation_csv", (dir / "ablation.csv").string()}};
  write_manifest(dir, manifest);

  try {
    auto rows = run_ablation(ids, cfg, tcfg, splits);
    std::ofstream csv(dir / "ablation.csv");
    csv << std::setprecision(17)
        << "case,name,patch,spaces,fusion,test_mae,test_mse,delta_mae_pct,"
           "delta_mse_pct\n";
    std::cout << std::fixed << std::setprecision(6);
    json jrows = json::array();
    for (const auto& r : rows) {
      std::string spaces;
      for (std::size_t i = 0; i < r.c.spaces.size(); ++i)
        spaces += (i ? "|" : "") + std::to_string(r.c.spaces[i]);
      csv << r.c.id << ",\"" << r.c.name << "\"," << r.c.patch << "," << spaces
          << "," << r.c.fusion << "," << r.mae << "," << r.mse << ","
          << r.delta_mae_pct << "," << r.delta_mse_pct << "\n";
      std::cout << std::left << std::setw(36) << r.c.name << " MAE "
                << r.mae << "  MSE " << r.mse << "  dMAE% " << std::showpos
                << r.delta_mae_pct << std::noshowpos << "\n";
      jrows.push_back({{"case", r.c.id},
                       {"name", r.c.name},
                       {"test_mae", r.mae},
                       {"test_mse", r.mse},
                       {"delta_mae_pct", r.delta_mae_pct},
                       {"delta_mse_pct", r.delta_mse_pct}});
    }
    manifest["status"] = "ok";
    manifest["results"] = jrows;
    manifest["wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      started)
            .count();
    write_manifest(dir, manifest);
    std::cout << "artifacts in " << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    manifest["status"] = std::string("error: ") + e.what();
    write_manifest(dir, manifest);
    throw;
  }
}

struct AnalyzeFlags {
  DataOpts data;
  std::string checkpoint;
  int channel = 0;
  std::int64_t max_windows = 256;
  std::string out = "numerion_analysis";
};

int run_analyze(const AnalyzeFlags& f) {
  const auto started = std::chrono::steady_clock::now();
  auto [cfg, params] = load_checkpoint(f.checkpoint);
  auto tbl = load_table(f.data);
  const auto part = resolve_partition(f.data, tbl.values->shape[0],
                                      cfg.lookback, cfg.horizon);
  auto splits = split_standardize_window(
      tbl, cfg.lookback, cfg.horizon, part,
      f.data.benchmark_split ? SplitMode::BenchmarkRows
                             : SplitMode::WindowCounts);

  const fs::path dir = resolve_out_dir(f.out);
  DecompositionOptions opt;
  opt.max_windows = f.max_windows;
  opt.out_dir = dir.string();
  auto rep = decomposition_report(params, cfg, splits.test, f.channel, opt);

  std::cout << std::fixed << std::setprecision(6)
            << "decomposition over " << rep.windows_used
            << " test windows, channel " << f.channel << ":\n";
  std::vector<std::pair<double, int>> order;
  json jspaces = json::array();
  for (const auto& s : rep.per_space) {
    std::cout << "  space " << std::setw(2) << s.space_dim << ": MAF "
              << s.maf << "  pearson " << s.pearson << "  weight "
              << s.weight_share << "\n";
    order.push_back({s.maf, s.space_dim});
    jspaces.push_back({{"space", s.space_dim},
                       {"maf", s.maf},
                       {"pearson", s.pearson},
                       {"weight_share", s.weight_share}});
  }
  std::sort(order.rbegin(), order.rend());
  std::cout << "MAF ordering (high to low):";
  for (auto& [m, d] : order) std::cout << " " << d;
  std::cout << "\n" << "artifacts in " << dir.string() << "\n";

  json manifest;
  manifest["command"] = "analyze";
  manifest["status"] = "ok";
  manifest["started_utc"] = utc_now();
  manifest["checkpoint"] = f.checkpoint;
  manifest["channel"] = f.channel;
  manifest["dataset"] = dataset_json(tbl, f.data);
  manifest["split"] = split_json(splits, part, f.data.benchmark_split);
  manifest["windows_used"] = rep.windows_used;
  manifest["per_space"] = jspaces;
  manifest["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  write_manifest(dir, manifest);
  return 0;
}

struct SynthFlags {
  std::string kind = "sine_mix";
  std::int64_t rows = 2000;
  std::int64_t channels = 1;
  std::uint64_t seed = 0;
  std::vector<double> freqs;
  double noise = 0.1;
  std::string out = "synthetic.csv";
};

int run_synth(const SynthFlags& f) {
  auto tbl = synthetic(synthetic_kind_from_string(f.kind), f.rows, f.channels,
                       f.seed, f.freqs, f.noise);
  std::ofstream out(f.out);
  if (!out) throw std::runtime_error("cannot write " + f.out);
  out << std::setprecision(17) << "date";
  for (const auto& c : tbl.channel_names) out << "," << c;
  out << "\n";
  for (std::int64_t r = 0; r < tbl.values->shape[0]; ++r) {
    out << r;
    for (std::int64_t c = 0; c < tbl.values->shape[1]; ++c)
      out << "," << tbl.values->data[r * tbl.values->shape[1] + c];
    out << "\n";
  }
  std::cout << "wrote " << tbl.values->shape[0] << " rows x "
            << tbl.values->shape[1] << " channels to " << f.out << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerion: hypercomplex time-series forecasting toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "key-value config file; sections per subcommand, flags "
                 "override file values");

  int threads = 1;
  app.add_option("--threads", threads,
                 "BLAS worker threads (default 1 for reproducibility)")
      ->check(CLI::PositiveNumber);

  int rules_dim = 4;
  auto* rules = app.add_subcommand("rules", "print Cayley-Dickson rule tables");
  rules->add_option("--dim", rules_dim, "algebra dimension (power of two)");

  std::uint64_t gradcheck_seed = 0;
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "run the gradient verification suites");
  gradcheck->add_option("--seed", gradcheck_seed, "rng seed");

  TrainFlags tf;
  auto* train_cmd =
      app.add_subcommand("train", "train a model and write a checkpoint");
  add_train_flags(train_cmd, tf);

  EvalFlags ef;
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_data_flags(eval_cmd, ef.data, true);
  eval_cmd->add_option("--checkpoint", ef.checkpoint, "checkpoint path")
      ->required();
  eval_cmd->add_option("--out", ef.out, "run directory under the output root");

  AblateFlags af;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "train and compare ablation cases");
  add_train_flags(ablate_cmd, af.base);
  ablate_cmd->add_option("--cases", af.cases,
                         "case ids or names (default: all 18)")
      ->delimiter(',');

  AnalyzeFlags anf;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "frequency-domain decomposition report for a checkpoint");
  add_data_flags(analyze_cmd, anf.data, true);
  analyze_cmd->add_option("--checkpoint", anf.checkpoint, "checkpoint path")
      ->required();
  analyze_cmd->add_option("--channel", anf.channel, "channel to analyze");
  analyze_cmd->add_option("--max-windows", anf.max_windows,
                          "cap on analyzed windows (stride-subsampled)");
  analyze_cmd->add_option("--out", anf.out,
                          "run directory under the output root");

  SynthFlags sf;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic CSV dataset");
  synth_cmd->add_option("--kind", sf.kind,
                        "sine_mix | trend_plus_noise | step");
  synth_cmd->add_option("--rows", sf.rows, "rows")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--channels", sf.channels, "channels")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--seed", sf.seed, "generator seed");
  synth_cmd->add_option("--freqs", sf.freqs, "sine_mix frequencies")
      ->delimiter(',');
  synth_cmd->add_option("--noise", sf.noise, "trend_plus_noise sigma");
  synth_cmd->add_option("--out", sf.out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n"
              << "run '" << (argv[0] ? argv[0] : "numerion")
              << " --help' for usage\n";
    return 2;
  }

  openblas_set_num_threads(threads);

  try {
    if (*rules) return run_rules(rules_dim);
    if (*gradcheck) return run_gradcheck(gradcheck_seed);
    if (*train_cmd) return run_train(tf);
    if (*eval_cmd) return run_eval(ef);
    if (*ablate_cmd) return run_ablate(af);
    if (*analyze_cmd) return run_analyze(anf);
    if (*synth_cmd) return run_synth(sf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
