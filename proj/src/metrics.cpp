#include "htr/metrics.hpp"

#include <cmath>
#include <vector>

namespace htr::metrics {
namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch,
          std::string(op) + ": " + shape_str(a.rows(), a.cols()) + " vs " +
              shape_str(b.rows(), b.cols()));
}

bool fg(const Tensor& m, Eigen::Index r, Eigen::Index c) { return m(r, c) > 0.5f; }

// Fraction of `from` boundary pixels that have a `to` boundary pixel within
// `radius`; the disk is scanned as a list of offsets.
double matched_fraction(const Matrix<std::uint8_t>& from, const Matrix<std::uint8_t>& to,
                        double radius, Eigen::Index& count) {
  const auto reach = static_cast<Eigen::Index>(std::floor(radius));
  std::vector<std::pair<Eigen::Index, Eigen::Index>> disk;
  for (Eigen::Index dr = -reach; dr <= reach; ++dr) {
    for (Eigen::Index dc = -reach; dc <= reach; ++dc) {
      if (static_cast<double>(dr * dr + dc * dc) <= radius * radius) disk.emplace_back(dr, dc);
    }
  }
  Eigen::Index matched = 0;
  count = 0;
  for (Eigen::Index r = 0; r < from.rows(); ++r) {
    for (Eigen::Index c = 0; c < from.cols(); ++c) {
      if (!from(r, c)) continue;
      ++count;
      for (const auto& [dr, dc] : disk) {
        const Eigen::Index rr = r + dr;
        const Eigen::Index cc = c + dc;
        if (rr >= 0 && rr < to.rows() && cc >= 0 && cc < to.cols() && to(rr, cc)) {
          ++matched;
          break;
        }
      }
    }
  }
  return count == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(count);
}

}  // namespace

double jaccard(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt, "jaccard");
  const auto p = (pred.array() > 0.5f);
  const auto g = (gt.array() > 0.5f);
  const auto inter = (p && g).count();
  const auto uni = (p || g).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

int boundary_radius(Eigen::Index height, Eigen::Index width) {
  const double diag = std::sqrt(static_cast<double>(height * height + width * width));
  return static_cast<int>(std::ceil(kBoundaryTolerance * diag));
}

Matrix<std::uint8_t> boundary_map(const Tensor& mask) {
  Matrix<std::uint8_t> out = Matrix<std::uint8_t>::Zero(mask.rows(), mask.cols());
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (!fg(mask, r, c)) continue;
      const bool edge = (r > 0 && !fg(mask, r - 1, c)) || (r + 1 < mask.rows() && !fg(mask, r + 1, c)) ||
                        (c > 0 && !fg(mask, r, c - 1)) || (c + 1 < mask.cols() && !fg(mask, r, c + 1));
      out(r, c) = edge ? 1 : 0;
    }
  }
  return out;
}

double boundary_f(const Tensor& pred, const Tensor& gt, std::optional<double> radius) {
  require_same_shape(pred, gt, "boundary_f");
  const double r = radius.value_or(boundary_radius(pred.rows(), pred.cols()));
  require(r >= 0.0, ErrorCode::InvalidArgument, "boundary radius must be nonnegative");
  const Matrix<std::uint8_t> pb = boundary_map(pred);
  const Matrix<std::uint8_t> gb = boundary_map(gt);

  Eigen::Index n_pred = 0;
  Eigen::Index n_gt = 0;
  double precision = matched_fraction(pb, gb, r, n_pred);
  double recall = matched_fraction(gb, pb, r, n_gt);
  if (n_pred == 0 && n_gt == 0) return 1.0;
  if (n_pred == 0) {
    precision = 1.0;
    recall = 0.0;
  } else if (n_gt == 0) {
    precision = 0.0;
    recall = 1.0;
  }
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

VideoScores video_metrics(const MaskSequence& pred, const MaskSequence& gt,
                          std::optional<double> radius) {
  require(pred.masks.size() == gt.masks.size(), ErrorCode::FrameMismatch,
          "video '" + gt.video_id + "': " + std::to_string(pred.masks.size()) +
              " predicted frames vs " + std::to_string(gt.masks.size()) + " ground-truth frames");
  require(!gt.masks.empty(), ErrorCode::EmptyInput, "video '" + gt.video_id + "' has no frames");

  VideoScores out;
  double j_sum = 0.0;
  double f_sum = 0.0;
  for (std::size_t t = 0; t < gt.masks.size(); ++t) {
    const double j = jaccard(pred.masks[t], gt.masks[t]);
    const double f = boundary_f(pred.masks[t], gt.masks[t], radius);
    out.frame_j.push_back(j);
    out.frame_f.push_back(f);
    j_sum += j;
    f_sum += f;
  }
  const auto n = static_cast<double>(gt.masks.size());
  out.j = j_sum / n;
  out.f = f_sum / n;
  out.jf = (out.j + out.f) / 2.0;
  return out;
}

double mcs(const JTable& table, double tau) {
  require(!table.empty(), ErrorCode::EmptyInput, "MCS over an empty table");
  require(tau >= 0.0 && tau <= 1.0, ErrorCode::InvalidArgument, "tau must lie in [0, 1]");
  std::size_t consistent = 0;
  for (const auto& video : table) {
    require(!video.empty(), ErrorCode::EmptyInput, "MCS table row has no frames");
    int product = 1;
    for (double j : video) product *= (j - tau > 0.0) ? 1 : 0;
    consistent += static_cast<std::size_t>(product);
  }
  return static_cast<double>(consistent) / static_cast<double>(table.size());
}

double precision_at(std::span<const double> ious, double threshold) {
  require(!ious.empty(), ErrorCode::EmptyInput, "precision over no samples");
  std::size_t hits = 0;
  for (double v : ious) hits += v > threshold ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ious.size());
}

A2DScores a2d_metrics(std::span<const double> ious, std::span<const double> intersections,
                      std::span<const double> unions) {
  require(!ious.empty(), ErrorCode::EmptyInput, "a2d metrics over no samples");
  require(intersections.size() == ious.size() && unions.size() == ious.size(),
          ErrorCode::ShapeMismatch, "IoU, intersection and union lists differ in length");
  A2DScores out;
  for (std::size_t k = 0; k < kPrecisionThresholds.size(); ++k) {
    out.precision[k] = precision_at(ious, kPrecisionThresholds[k]);
  }
  double inter = 0.0;
  double uni = 0.0;
  double iou_sum = 0.0;
  for (std::size_t i = 0; i < ious.size(); ++i) {
    inter += intersections[i];
    uni += unions[i];
    iou_sum += ious[i];
  }
  out.overall_iou = uni > 0.0 ? inter / uni : 1.0;
  out.mean_iou = iou_sum / static_cast<double>(ious.size());
  double precision_sum = 0.0;
  for (int step = 0; step < 10; ++step) {
    precision_sum += precision_at(ious, (50.0 + 5.0 * step) / 100.0);
  }
  out.map = precision_sum / 10.0;
  return out;
}

}  // namespace htr::metrics
