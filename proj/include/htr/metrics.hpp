#pragma once

// Segmentation evaluation: region Jaccard, boundary F-measure, their video
// means, the mask consistency score, and the precision/IoU/mAP suite.
//
// Masks are Tensors; a pixel is foreground when its value exceeds 0.5.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htr/numerics.hpp"

namespace htr::metrics {

inline constexpr double kBoundaryTolerance = 0.008;
inline constexpr std::array<double, 3> kDefaultMcsThresholds = {0.1, 0.5, 0.9};
inline constexpr std::array<double, 5> kPrecisionThresholds = {0.5, 0.6, 0.7, 0.8, 0.9};

struct MaskSequence {
  std::string video_id;
  std::vector<Tensor> masks;
  std::vector<int> frame_indices;
};

/// Per-video rows of per-frame Jaccard values.
using JTable = std::vector<std::vector<double>>;

/// |pred ∩ gt| / |pred ∪ gt|, 1 when both are empty.
double jaccard(const Tensor& pred, const Tensor& gt);

/// ceil(0.008 * image diagonal).
int boundary_radius(Eigen::Index height, Eigen::Index width);

/// Foreground pixels with at least one 4-neighbour in the background.
/// Pixels outside the image do not count as background.
Matrix<std::uint8_t> boundary_map(const Tensor& mask);

/// Boundary F-measure with matches accepted within Euclidean distance
/// `radius` (default: boundary_radius of the mask size).
double boundary_f(const Tensor& pred, const Tensor& gt, std::optional<double> radius = {});

struct VideoScores {
  double j = 0.0;
  double f = 0.0;
  double jf = 0.0;
  std::vector<double> frame_j;
  std::vector<double> frame_f;
};

/// Frame-aligned J and F means and their average. Throws FrameMismatch when
/// the sequences differ in length and ShapeMismatch on differing mask sizes.
VideoScores video_metrics(const MaskSequence& pred, const MaskSequence& gt,
                          std::optional<double> radius = {});

/// Fraction of videos whose every frame has J strictly above tau.
double mcs(const JTable& table, double tau);

struct A2DScores {
  std::array<double, 5> precision{};  // at 0.5, 0.6, 0.7, 0.8, 0.9
  double overall_iou = 0.0;
  double mean_iou = 0.0;
  double map = 0.0;  // mean precision over IoU thresholds 0.50:0.05:0.95
};

/// Fraction of samples with IoU strictly above `threshold`.
double precision_at(std::span<const double> ious, double threshold);

A2DScores a2d_metrics(std::span<const double> ious, std::span<const double> intersections,
                      std::span<const double> unions);

}  // namespace htr::metrics
