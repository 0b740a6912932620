#include "numerion/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace numerion {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'N', 'M', 'R', 'N', '0', '0', '0', '1'};

int space_log2(int n) { return std::countr_zero(static_cast<unsigned>(n)); }

AffineParams make_affine(int d_in, int d_out, std::mt19937_64& rng) {
  return {Tensor::randn({d_in, d_out}, rng,
                        1.0 / std::sqrt(static_cast<double>(d_in)),
                        /*requires_grad=*/true),
          Tensor::zeros({d_out}, /*requires_grad=*/true)};
}

void check_series(const TensorPtr& x, const NumerionConfig& cfg,
                  const char* who) {
  if (x->shape.size() < 2 || x->shape.back() != cfg.lookback ||
      x->shape[x->shape.size() - 2] != cfg.channels)
    throw std::invalid_argument(std::string(who) +
                                ": input must be [.., F, T] per the config");
}

} // namespace

json config_to_json(const NumerionConfig& c) {
  return json{{"lookback", c.lookback},
              {"horizon", c.horizon},
              {"channels", c.channels},
              {"patch_levels", c.patch_levels},
              {"embed_dim", c.embed_dim},
              {"rhr_layers", c.rhr_layers},
              {"rhr_hidden", c.rhr_hidden},
              {"dropout", c.dropout},
              {"p_norm", c.p_norm},
              {"fusion_hidden", c.fusion_hidden},
              {"enabled_spaces", c.enabled_spaces},
              {"fusion_enabled", c.fusion_enabled}};
}

NumerionConfig config_from_json(const json& j) {
  NumerionConfig c;
  c.lookback = j.at("lookback").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.channels = j.at("channels").get<int>();
  c.patch_levels = j.at("patch_levels").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.rhr_layers = j.at("rhr_layers").get<int>();
  c.rhr_hidden = j.at("rhr_hidden").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.p_norm = j.at("p_norm").get<double>();
  c.fusion_hidden = j.at("fusion_hidden").get<int>();
  c.enabled_spaces = j.at("enabled_spaces").get<std::vector<int>>();
  c.fusion_enabled = j.at("fusion_enabled").get<bool>();
  return c;
}

void validate_config(const NumerionConfig& cfg) {
  if (cfg.lookback < 1 || cfg.horizon < 1 || cfg.channels < 1 ||
      cfg.embed_dim < 1 || cfg.rhr_layers < 1 || cfg.rhr_hidden < 1 ||
      cfg.fusion_hidden < 0)
    throw std::invalid_argument("config: extents must be positive");
  if (cfg.patch_levels < 1 || (cfg.lookback >> (cfg.patch_levels - 1)) < 1)
    throw std::invalid_argument(
        "config: need patch_levels >= 1 and floor(T / 2^(l_p-1)) >= 1");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
    throw std::invalid_argument("config: dropout must lie in [0, 1)");
  if (!(cfg.p_norm >= 1.0) || !std::isfinite(cfg.p_norm))
    throw std::invalid_argument("config: p_norm must be finite and >= 1");
  if (cfg.enabled_spaces.empty())
    throw std::invalid_argument("config: enabled_spaces must be non-empty");
  std::set<int> seen;
  for (int n : cfg.enabled_spaces) {
    if (n != 1 && n != 2 && n != 4 && n != 8 && n != 16)
      throw std::invalid_argument(
          "config: enabled spaces must come from {1, 2, 4, 8, 16}");
    if (!seen.insert(n).second)
      throw std::invalid_argument("config: duplicate enabled space");
  }
}

FusionParams make_fusion_params(int horizon, int hidden,
                                std::mt19937_64& rng) {
  return {make_affine(horizon, hidden, rng), make_affine(hidden, horizon, rng)};
}

NumerionParams make_numerion_params(const NumerionConfig& cfg,
                                    std::mt19937_64& rng) {
  validate_config(cfg);
  NumerionParams p;
  for (int lvl = 0; lvl < cfg.patch_levels; ++lvl)
    p.patch_maps.push_back(
        make_affine(cfg.lookback >> lvl, cfg.embed_dim, rng));
  const int feat = cfg.embed_dim * cfg.patch_levels;
  for (int n : cfg.enabled_spaces)
    p.rhr.push_back(make_rhr_mlp(feat, cfg.rhr_hidden, cfg.rhr_layers,
                                 cfg.horizon, n, cfg.dropout, cfg.p_norm, rng));
  p.fusion = make_fusion_params(cfg.horizon, cfg.fusion_width(), rng);
  return p;
}

std::pair<TensorPtr, TensorPtr> normalize(Tape* tape, const TensorPtr& x) {
  auto means_keep = op_mean(tape, x, -1, /*keepdim=*/true); // [.., F, 1]
  auto xn = op_sub(tape, x, means_keep);
  std::vector<std::int64_t> squeezed(x->shape.begin(), x->shape.end() - 1);
  return {xn, op_reshape(tape, means_keep, squeezed)};
}

TensorPtr denormalize(Tape* tape, const TensorPtr& y, const TensorPtr& means) {
  auto shape = means->shape;
  shape.push_back(1);
  return op_add(tape, y, op_reshape(tape, means, shape));
}

TensorPtr patch_embed(Tape* tape, const TensorPtr& x,
                      const NumerionParams& params, const NumerionConfig& cfg) {
  validate_config(cfg);
  check_series(x, cfg, "patch_embed");
  if (static_cast<int>(params.patch_maps.size()) != cfg.patch_levels)
    throw std::invalid_argument("patch_embed: wrong number of level maps");

  const std::int64_t T = cfg.lookback;
  std::vector<TensorPtr> levels;
  for (int lvl = 0; lvl < cfg.patch_levels; ++lvl) {
    const std::int64_t seg = T >> lvl;
    const std::int64_t cnt = T / seg;
    const auto& map = params.patch_maps[lvl];
    if (map.weight->shape !=
        std::vector<std::int64_t>{seg, cfg.embed_dim})
      throw std::invalid_argument("patch_embed: level map shape mismatch");

    auto xi = op_narrow(tape, x, -1, 0, cnt * seg); // drop the remainder
    std::vector<std::int64_t> split(x->shape.begin(), x->shape.end() - 1);
    split.push_back(cnt);
    split.push_back(seg);
    xi = op_reshape(tape, xi, split);
    auto enc = op_add(tape, op_matmul(tape, xi, map.weight), map.bias);
    levels.push_back(op_mean(tape, enc, -2)); // average segment encodings
  }
  return levels.size() == 1 ? levels[0] : op_concat(tape, levels, -1);
}

std::pair<TensorPtr, TensorPtr> adaptive_fusion(Tape* tape,
                                                const TensorPtr& stacked,
                                                const FusionParams& fp,
                                                bool enabled) {
  if (stacked->shape.size() < 3)
    throw std::invalid_argument("adaptive_fusion: expected [S, .., F, P]");
  const std::int64_t S = stacked->shape[0];
  if (!enabled) {
    auto weights = Tensor::full(stacked->shape, 1.0 / static_cast<double>(S));
    auto fused = op_scale(tape, op_sum(tape, stacked, 0),
                          1.0 / static_cast<double>(S));
    return {fused, weights};
  }
  auto h = op_gelu(
      tape, op_add(tape, op_matmul(tape, stacked, fp.f1.weight), fp.f1.bias));
  auto scores =
      op_add(tape, op_matmul(tape, h, fp.f2.weight), fp.f2.bias);
  auto weights = op_softmax(tape, scores, 0);
  auto fused = op_sum(tape, op_mul(tape, weights, stacked), 0);
  return {fused, weights};
}

ForwardResult numerion_forward(Tape* tape, const TensorPtr& x,
                               const NumerionParams& params,
                               const NumerionConfig& cfg, bool training,
                               std::mt19937_64& rng) {
  validate_config(cfg);
  check_series(x, cfg, "numerion_forward");
  if (params.rhr.size() != cfg.enabled_spaces.size())
    throw std::invalid_argument(
        "numerion_forward: params do not match enabled_spaces");

  auto [xn, means] = normalize(tape, x);
  auto feat = patch_embed(tape, xn, params, cfg);

  std::vector<TensorPtr> outs; // normalized per-space forecasts [.., F, P]
  for (std::size_t i = 0; i < params.rhr.size(); ++i) {
    const auto& table = build_table(space_log2(cfg.enabled_spaces[i]));
    outs.push_back(
        rhr_mlp(tape, feat, params.rhr[i], table, training, rng));
  }

  std::vector<TensorPtr> lifted;
  for (const auto& o : outs) {
    auto shape = o->shape;
    shape.insert(shape.begin(), 1);
    lifted.push_back(op_reshape(tape, o, shape));
  }
  auto stacked = lifted.size() == 1 ? lifted[0] : op_concat(tape, lifted, 0);
  auto [fused, weights] =
      adaptive_fusion(tape, stacked, params.fusion, cfg.fusion_enabled);

  ForwardResult res;
  res.prediction = denormalize(tape, fused, means);
  for (const auto& o : outs) res.per_space.push_back(denormalize(tape, o, means));
  res.weights = weights;
  return res;
}

TensorPtr mae_loss(Tape* tape, const TensorPtr& yhat, const TensorPtr& y) {
  if (yhat->shape != y->shape)
    throw std::invalid_argument("mae_loss: shape mismatch");
  return op_mean_all(tape, op_abs(tape, op_sub(tape, yhat, y)));
}

TensorPtr mse_metric(Tape* tape, const TensorPtr& yhat, const TensorPtr& y) {
  if (yhat->shape != y->shape)
    throw std::invalid_argument("mse_metric: shape mismatch");
  auto d = op_sub(tape, yhat, y);
  return op_mean_all(tape, op_mul(tape, d, d));
}

std::vector<std::pair<std::string, TensorPtr>> named_params(
    const NumerionParams& params) {
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (std::size_t i = 0; i < params.patch_maps.size(); ++i) {
    out.emplace_back("patch." + std::to_string(i) + ".weight",
                     params.patch_maps[i].weight);
    out.emplace_back("patch." + std::to_string(i) + ".bias",
                     params.patch_maps[i].bias);
  }
  for (const auto& r : params.rhr) {
    const std::string prefix = "space" + std::to_string(r.dim) + ".";
    for (std::size_t l = 0; l < r.layers.size(); ++l) {
      out.emplace_back(prefix + "layer" + std::to_string(l) + ".weight",
                       r.layers[l].weight);
      out.emplace_back(prefix + "layer" + std::to_string(l) + ".bias",
                       r.layers[l].bias);
    }
    out.emplace_back(prefix + "head.weight", r.head.weight);
    out.emplace_back(prefix + "head.bias", r.head.bias);
  }
  out.emplace_back("fusion.f1.weight", params.fusion.f1.weight);
  out.emplace_back("fusion.f1.bias", params.fusion.f1.bias);
  out.emplace_back("fusion.f2.weight", params.fusion.f2.weight);
  out.emplace_back("fusion.f2.bias", params.fusion.f2.bias);
  return out;
}

void save_checkpoint(const std::string& path, const NumerionConfig& cfg,
                     const NumerionParams& params) {
  auto named = named_params(params);
  json header;
  header["config"] = config_to_json(cfg);
  header["tensors"] = json::array();
  for (const auto& [name, t] : named)
    header["tensors"].push_back({{"name", name}, {"shape", t->shape}});
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t len = head.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& [name, t] : named)
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::pair<NumerionConfig, NumerionParams> load_checkpoint(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len == 0 || len > (1u << 26))
    throw std::runtime_error("checkpoint: bad header length in " + path);
  std::string head(len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception&) {
    throw std::runtime_error("checkpoint: unparsable header in " + path);
  }

  NumerionConfig cfg = config_from_json(header.at("config"));
  std::mt19937_64 scratch(0); // structure only; data is overwritten below
  NumerionParams params = make_numerion_params(cfg, scratch);
  auto named = named_params(params);

  const auto& tensors = header.at("tensors");
  if (tensors.size() != named.size())
    throw std::runtime_error("checkpoint: tensor count mismatch in " + path);
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = tensors.at(i);
    if (entry.at("name").get<std::string>() != named[i].first ||
        entry.at("shape").get<std::vector<std::int64_t>>() !=
            named[i].second->shape)
      throw std::runtime_error("checkpoint: tensor layout mismatch in " + path);
    auto& t = named[i].second;
    in.read(reinterpret_cast<char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (!in)
      throw std::runtime_error("checkpoint: truncated tensor data in " + path);
  }
  return {cfg, params};
}

} // namespace numerion
