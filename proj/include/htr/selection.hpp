#pragma once

// Score targets, score-ranked reference selection, and the inter-frame
// collaboration pipeline: reference frames are segmented directly, the rest
// are filled in by propagating from the hybrid memory.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htr/feature_map.hpp"
#include "htr/fusion.hpp"
#include "htr/memory.hpp"
#include "htr/metrics.hpp"

namespace htr::selection {

inline constexpr double kDefaultRatio = 0.25;

/// One-hot vector at the minimal loss, ties to the lowest index.
std::vector<int> assign_gt_scores(std::span<const double> losses);

/// ceil(ratio * frames); ratio must lie in (0, 1].
std::size_t reference_count(std::size_t frames, double ratio);

/// Indices of the ceil(ratio * T) highest scores, ties to the lower index,
/// returned in ascending order.
std::vector<int> select_reference_frames(std::span<const double> scores,
                                         double ratio = kDefaultRatio);

struct ScoredFrame {
  int index = 0;
  double score = 0.0;
  std::optional<fusion::ConditionalKernel> kernel;
  std::optional<Tensor> reference_mask;
};

struct VideoBundle {
  std::string id;
  std::vector<FeatureMap> frames;
  std::vector<ScoredFrame> scored;
};

enum class PropagationMode {
  Hybrid,     // local readout refined by the global tokens
  LocalOnly,  // local readout only
  NoMemory,   // copy the temporally nearest reference mask
};

struct CollaborationOptions {
  double ratio = kDefaultRatio;
  std::optional<std::size_t> clip_length;  // whole video when unset
  PropagationMode mode = PropagationMode::Hybrid;
  std::size_t jobs = 1;
  // Output mask size; defaults to 16x the feature grid.
  Eigen::Index mask_height = 0;
  Eigen::Index mask_width = 0;
};

struct CollaborationResult {
  metrics::MaskSequence masks;     // binary, thresholded at 0.5
  std::vector<Tensor> soft;        // probabilities before thresholding
  std::vector<int> reference_frames;
};

/// Nearest-neighbour upsampling of a node grid by the 16x stride, cropped to
/// the requested size.
Tensor upsample_nodes(const Tensor& grid, Eigen::Index height, Eigen::Index width);

/// Pixels above 0.5 become 1, everything else 0.
Tensor binarize(const Tensor& probabilities);

CollaborationResult collaborate(const VideoBundle& video, const memory::MemoryWeights& weights,
                                const CollaborationOptions& options = {});

}  // namespace htr::selection
