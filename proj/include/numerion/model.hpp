// ============================================================================
// The full forecaster: per-channel mean normalization, multi-level patch
// embedding, parallel RHR-MLPs over the enabled hypercomplex spaces, adaptive
// fusion across spaces, and the MAE training loss.
//
// All entry points accept inputs of shape [F, T] or batched [.., F, T]; the
// leading axes pass through untouched. Channels are processed independently
// throughout (no cross-channel mixing), so permuting input channels permutes
// outputs identically.
// ============================================================================
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "numerion/hyperlayers.hpp"
#include "numerion/tensor.hpp"

namespace numerion {

struct NumerionConfig {
  int lookback = 96;   // T
  int horizon = 96;    // P
  int channels = 7;    // F
  int patch_levels = 3;
  int embed_dim = 64;
  int rhr_layers = 2;
  int rhr_hidden = 64;
  double dropout = 0.5;
  double p_norm = 6.0;
  int fusion_hidden = 0; // 0 means "use the horizon"
  std::vector<int> enabled_spaces = {1, 2, 4, 8, 16};
  bool fusion_enabled = true;

  int fusion_width() const { return fusion_hidden > 0 ? fusion_hidden : horizon; }
};

// Throws std::invalid_argument on any violated invariant.
void validate_config(const NumerionConfig& cfg);

// JSON round trip for configs (used by checkpoints and run manifests).
nlohmann::json config_to_json(const NumerionConfig& cfg);
NumerionConfig config_from_json(const nlohmann::json& j);

struct AffineParams {
  TensorPtr weight; // [d_in, d_out]
  TensorPtr bias;   // [d_out]
};

struct FusionParams {
  AffineParams f1; // horizon -> fusion_hidden
  AffineParams f2; // fusion_hidden -> horizon
};

struct NumerionParams {
  std::vector<AffineParams> patch_maps; // level i: floor(T / 2^i) -> embed_dim
  std::vector<RhrMlpParams> rhr;        // aligned with cfg.enabled_spaces
  FusionParams fusion;
};

struct ForwardResult {
  TensorPtr prediction;               // [.., F, P], denormalized
  std::vector<TensorPtr> per_space;   // each [.., F, P], denormalized
  TensorPtr weights;                  // [S, .., F, P], rows sum to 1 over S
};

NumerionParams make_numerion_params(const NumerionConfig& cfg,
                                    std::mt19937_64& rng);
FusionParams make_fusion_params(int horizon, int hidden, std::mt19937_64& rng);

// Subtracts each channel's lookback mean; returns (normalized, means) where
// means drops the time axis ([.., F, T] -> [.., F]).
std::pair<TensorPtr, TensorPtr> normalize(Tape* tape, const TensorPtr& x);
TensorPtr denormalize(Tape* tape, const TensorPtr& y, const TensorPtr& means);

// Level i (segment length s_i = floor(T / 2^i)): split into floor(T / s_i)
// segments (trailing remainder dropped), apply the level's affine map, average
// within the level, concatenate levels: [.., F, T] -> [.., F, d_e * l_p].
TensorPtr patch_embed(Tape* tape, const TensorPtr& x,
                      const NumerionParams& params, const NumerionConfig& cfg);

// stacked: [S, .., F, P]. Scores run along the horizon axis
// (P -> fusion_hidden -> P, gelu between); weights are the softmax over the
// space axis. Disabled mode uses uniform 1/S. Returns (fused, weights).
std::pair<TensorPtr, TensorPtr> adaptive_fusion(Tape* tape,
                                                const TensorPtr& stacked,
                                                const FusionParams& fp,
                                                bool enabled);

ForwardResult numerion_forward(Tape* tape, const TensorPtr& x,
                               const NumerionParams& params,
                               const NumerionConfig& cfg, bool training,
                               std::mt19937_64& rng);

TensorPtr mae_loss(Tape* tape, const TensorPtr& yhat, const TensorPtr& y);
TensorPtr mse_metric(Tape* tape, const TensorPtr& yhat, const TensorPtr& y);

// Stable (name, tensor) list covering every trainable parameter.
std::vector<std::pair<std::string, TensorPtr>> named_params(
    const NumerionParams& params);

// Checkpoint file: magic "NMRN0001", a uint64 little-endian JSON header
// length, a JSON header {"config": .., "tensors": [{"name", "shape"}, ..]},
// then each tensor's doubles in listed order (little-endian raw).
void save_checkpoint(const std::string& path, const NumerionConfig& cfg,
                     const NumerionParams& params);
std::pair<NumerionConfig, NumerionParams> load_checkpoint(
    const std::string& path);

} // namespace numerion
