#pragma once

// Hybrid memory: pixel-level local bank read out through an L2 affinity, plus
// one foreground and one background token aggregated from the reference
// frames and matched against every target node.
//
// Memory values are the encoded mask features followed by two extra columns
// holding the node's (foreground, background) probability pair. Reading the
// bank out therefore yields a soft mask directly.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "htr/feature_map.hpp"
#include "htr/numerics.hpp"

namespace htr::memory {

inline constexpr int kKeyWidth = 64;
inline constexpr int kGridSize = 16;
inline constexpr int kGridCells = kGridSize * kGridSize;
inline constexpr int kDefaultMaskChannels = 16;
inline constexpr double kForegroundThreshold = 0.5;

/// Projections used by the memory.
///   key_proj:   C x 64, shared by memory keys and target queries.
///   joint_proj: (C_y + 2 + C) x 64, applied to [values | visual features].
///   mask_proj:  256 x C_y, maps a flattened 16x16 mask cell to C_y channels.
struct MemoryWeights {
  Tensor key_proj;
  Tensor joint_proj;
  Tensor mask_proj;

  Eigen::Index channels() const { return key_proj.rows(); }
  Eigen::Index mask_channels() const { return mask_proj.cols(); }
  Eigen::Index value_width() const { return mask_proj.cols() + 2; }

  /// Throws ShapeMismatch unless the three matrices agree with each other and
  /// with `channels`.
  void validate(Eigen::Index channels) const;

  static MemoryWeights random(int channels, int mask_channels, std::uint64_t seed);
};

/// Encoded mask features of one frame and the per-node foreground
/// probability (mean of the node's 16x16 cell).
struct MaskFeatures {
  Eigen::Index grid_height = 0;
  Eigen::Index grid_width = 0;
  Tensor data;
  Eigen::VectorXf probabilities;
};

/// Post-processing of encoded mask features given the frame's visual features.
using MaskEnhancer = std::function<Tensor(const Tensor& mask_features, const FeatureMap& visual)>;

MaskEnhancer identity_enhancer();

/// mask_features + visual * weight, weight of shape C x C_y.
MaskEnhancer residual_linear_enhancer(Tensor weight);

struct LocalMemoryBank {
  Tensor keys;    // (T*H*W) x 64
  Tensor values;  // (T*H*W) x (C_y + 2)
  std::vector<int> frame_index;
};

struct GlobalTokens {
  std::optional<Tensor> foreground;  // 1 x 64
  std::optional<Tensor> background;  // 1 x 64

  bool defined() const { return foreground.has_value() && background.has_value(); }
};

struct HybridMemory {
  LocalMemoryBank local;
  GlobalTokens global;
  std::vector<int> reference_frames;
  Eigen::VectorXf reference_probabilities;  // M^m, one entry per bank row
  Tensor joint;                             // (T*H*W) x 64 joint features of the bank
};

struct Propagation {
  Tensor values;                   // H*W x (C_y + 2), the local readout
  std::optional<Tensor> affinity;  // H*W x 2 node-object affinity, fg column first
  Tensor soft_mask;                // H x W, renormalized propagated fg probability
  Tensor hybrid_mask;              // H x W, soft_mask refined by the global affinity
};

/// Pads `mask` on the bottom/right with background to a multiple of 16, then
/// maps every 16x16 cell (flattened row-major) through `mask_proj`.
MaskFeatures encode_mask_grid(const Tensor& mask, const Tensor& mask_proj);

/// Stacks the reference frames into the local bank and aggregates the global
/// tokens. `frame_indices` defaults to 0..T-1 and must be strictly increasing.
HybridMemory build_memory(std::span<const FeatureMap> features, std::span<const Tensor> masks,
                          const MemoryWeights& weights, std::span<const int> frame_indices = {},
                          const MaskEnhancer& enhancer = identity_enhancer());

/// Softmax over all bank rows of -||q W^K - k||^2, one row per target node.
Tensor readout_affinity(const FeatureMap& query, const LocalMemoryBank& bank,
                        const Tensor& key_proj);

Tensor local_readout(const FeatureMap& query, const LocalMemoryBank& bank, const Tensor& key_proj);

constexpr int heaviside(double x) { return x > 0.0 ? 1 : 0; }

/// Weighted mean of `joint` rows with weights mu(M_j - tau) * M_j. Rows whose
/// probability does not exceed tau are skipped entirely.
Tensor aggregate_global(const Tensor& joint, std::span<const float> probabilities,
                        double tau = kForegroundThreshold);

/// Node-object affinity: ([values | features] W^J) [fg; bg]^T.
Tensor global_affinity(const Tensor& propagated, const FeatureMap& query,
                       const GlobalTokens& tokens, const Tensor& joint_proj);

/// local_readout followed by global_affinity. When the tokens are undefined
/// the affinity is absent and the hybrid mask equals the local soft mask.
Propagation hybrid_propagate(const FeatureMap& query, const HybridMemory& memory,
                             const MemoryWeights& weights);

/// Combines a local foreground probability with the node-object affinity.
/// The affinity margin is taken relative to the midpoint between the tokens,
/// so a node is pushed toward the token it is nearer to in joint space, and
/// added to the local logit after scaling by 1/sqrt(64).
Tensor refine_with_global(const Tensor& soft_mask, const Tensor& affinity,
                          const GlobalTokens& tokens);

}  // namespace htr::memory
