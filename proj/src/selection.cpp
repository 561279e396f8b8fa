#include "htr/selection.hpp"

#include "htr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace htr::selection {
namespace {

Tensor sigmoid(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    out.data()[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(logits.data()[i]))));
  }
  return out;
}

}  // namespace

std::vector<int> assign_gt_scores(std::span<const double> losses) {
  require(!losses.empty(), ErrorCode::EmptyInput, "assign_gt_scores on an empty list");
  for (double l : losses) require(std::isfinite(l), ErrorCode::NonFinite, "loss is not finite");
  const auto best = std::min_element(losses.begin(), losses.end()) - losses.begin();
  std::vector<int> out(losses.size(), 0);
  out[static_cast<std::size_t>(best)] = 1;
  return out;
}

std::size_t reference_count(std::size_t frames, double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorCode::InvalidArgument,
          "memorized ratio must lie in (0, 1], got " + std::to_string(ratio));
  // The epsilon keeps products such as 0.01 * 100 from rounding up past an
  // exact integer.
  const double raw = std::ceil(ratio * static_cast<double>(frames) - 1e-9);
  return std::min(frames, static_cast<std::size_t>(std::max(raw, 0.0)));
}

std::vector<int> select_reference_frames(std::span<const double> scores, double ratio) {
  require(!scores.empty(), ErrorCode::EmptyInput, "no frames to select from");
  const std::size_t count = reference_count(scores.size(), ratio);
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

Tensor upsample_nodes(const Tensor& grid, Eigen::Index height, Eigen::Index width) {
  Tensor out(height, width);
  for (Eigen::Index r = 0; r < height; ++r) {
    for (Eigen::Index c = 0; c < width; ++c) {
      const Eigen::Index gr = std::min(r / memory::kGridSize, grid.rows() - 1);
      const Eigen::Index gc = std::min(c / memory::kGridSize, grid.cols() - 1);
      out(r, c) = grid(gr, gc);
    }
  }
  return out;
}

Tensor binarize(const Tensor& probabilities) {
  return (probabilities.array() > 0.5f).cast<float>().matrix();
}

CollaborationResult collaborate(const VideoBundle& video, const memory::MemoryWeights& weights,
                                const CollaborationOptions& options) {
  const std::size_t frames = video.frames.size();
  require(frames >= 1, ErrorCode::EmptyInput, "video '" + video.id + "' has no frames");
  require(video.scored.size() == frames, ErrorCode::FrameMismatch,
          "video '" + video.id + "' has " + std::to_string(frames) + " feature maps but " +
              std::to_string(video.scored.size()) + " scored frames");
  std::set<int> seen;
  for (const ScoredFrame& s : video.scored) {
    require(seen.insert(s.index).second, ErrorCode::InvalidArgument,
            "duplicate frame index " + std::to_string(s.index));
  }

  const FeatureMap& first = video.frames.front();
  Eigen::Index mask_h = options.mask_height;
  Eigen::Index mask_w = options.mask_width;
  if (mask_h == 0 || mask_w == 0) {
    mask_h = first.height() * memory::kGridSize;
    mask_w = first.width() * memory::kGridSize;
    for (const ScoredFrame& s : video.scored) {
      if (s.reference_mask) {
        mask_h = s.reference_mask->rows();
        mask_w = s.reference_mask->cols();
        break;
      }
    }
  }

  CollaborationResult out;
  out.masks.video_id = video.id;
  out.masks.masks.resize(frames);
  out.soft.resize(frames);
  for (const ScoredFrame& s : video.scored) out.masks.frame_indices.push_back(s.index);

  const std::size_t clip = options.clip_length.value_or(frames);
  require(clip >= 1, ErrorCode::InvalidArgument, "clip length must be positive");

  for (std::size_t begin = 0; begin < frames; begin += clip) {
    const std::size_t end = std::min(frames, begin + clip);
    std::vector<double> scores;
    for (std::size_t t = begin; t < end; ++t) scores.push_back(video.scored[t].score);
    std::vector<int> selected = select_reference_frames(scores, options.ratio);
    require(!selected.empty(), ErrorCode::EmptyReferenceSet, "no reference frame selected");
    for (int& s : selected) s += static_cast<int>(begin);

    std::vector<FeatureMap> ref_features;
    std::vector<Tensor> ref_masks;
    std::vector<int> ref_indices;
    for (int s : selected) {
      const auto t = static_cast<std::size_t>(s);
      const ScoredFrame& sf = video.scored[t];
      Tensor soft;
      if (sf.reference_mask) {
        require(sf.reference_mask->rows() == mask_h && sf.reference_mask->cols() == mask_w,
                ErrorCode::ShapeMismatch,
                "reference mask of frame " + std::to_string(sf.index) + " is " +
                    shape_str(sf.reference_mask->rows(), sf.reference_mask->cols()) +
                    ", expected " + shape_str(mask_h, mask_w));
        soft = *sf.reference_mask;
      } else if (sf.kernel) {
        soft = upsample_nodes(sigmoid(fusion::apply_conditional_kernel(*sf.kernel, video.frames[t])),
                              mask_h, mask_w);
      } else {
        throw Error(ErrorCode::MissingReferenceMask,
                    "selected frame " + std::to_string(sf.index) + " has neither a mask nor a kernel");
      }
      out.masks.masks[t] = binarize(soft);
      out.soft[t] = soft;
      ref_features.push_back(video.frames[t]);
      ref_masks.push_back(std::move(soft));
      ref_indices.push_back(s);
      out.reference_frames.push_back(sf.index);
    }

    std::vector<std::size_t> targets;
    for (std::size_t t = begin; t < end; ++t) {
      if (!std::binary_search(selected.begin(), selected.end(), static_cast<int>(t))) {
        targets.push_back(t);
      }
    }
    if (targets.empty()) continue;

    if (options.mode == PropagationMode::NoMemory) {
      for (std::size_t t : targets) {
        std::size_t nearest = 0;
        for (std::size_t r = 1; r < ref_indices.size(); ++r) {
          const auto dist = [&](std::size_t k) {
            return std::abs(ref_indices[k] - static_cast<int>(t));
          };
          if (dist(r) < dist(nearest)) nearest = r;
        }
        out.soft[t] = ref_masks[nearest];
        out.masks.masks[t] = binarize(out.soft[t]);
      }
      continue;
    }

    const memory::HybridMemory mem = memory::build_memory(ref_features, ref_masks, weights,
                                                          ref_indices);
    parallel_for(targets.size(), options.jobs, [&](std::size_t k) {
      const std::size_t t = targets[k];
      const memory::Propagation p = memory::hybrid_propagate(video.frames[t], mem, weights);
      const Tensor& grid =
          options.mode == PropagationMode::Hybrid ? p.hybrid_mask : p.soft_mask;
      out.soft[t] = upsample_nodes(grid, mask_h, mask_w);
      out.masks.masks[t] = binarize(out.soft[t]);
    });
  }
  std::sort(out.reference_frames.begin(), out.reference_frames.end());
  return out;
}

}  // namespace htr::selection
