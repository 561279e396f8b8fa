#include "htr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace htr::losses {
namespace {

void require_same_shape(const Tensor& pred, const Tensor& gt, const char* op) {
  require(pred.rows() == gt.rows() && pred.cols() == gt.cols(), ErrorCode::ShapeMismatch,
          std::string(op) + ": prediction " + shape_str(pred.rows(), pred.cols()) + " vs target " +
              shape_str(gt.rows(), gt.cols()));
  require(pred.size() > 0, ErrorCode::EmptyInput, std::string(op) + " on an empty mask");
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void require_frames(const QueryPrediction& q, const ReferTarget& gt) {
  require(!gt.masks.empty() && gt.masks.size() == gt.boxes.size(), ErrorCode::FrameMismatch,
          "target needs one mask and one box per frame");
  require(q.masks.size() == gt.masks.size() && q.boxes.size() == gt.masks.size() &&
              q.scores.size() == gt.masks.size(),
          ErrorCode::FrameMismatch, "query prediction frame count differs from the target");
}

}  // namespace

double dice_loss(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt, "dice_loss");
  const Eigen::ArrayXXd p = pred.cast<double>().array();
  const Eigen::ArrayXXd g = gt.cast<double>().array();
  const double numerator = 2.0 * (p * g).sum() + kDiceSmooth;
  const double denominator = p.sum() + g.sum() + kDiceSmooth;
  return 1.0 - numerator / denominator;
}

double focal_loss(const Tensor& pred, const Tensor& gt, double alpha, double gamma) {
  require_same_shape(pred, gt, "focal_loss");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred.data()[i]);
    const bool positive = gt.data()[i] > 0.5f;
    const double p_t = positive ? p : 1.0 - p;
    const double alpha_t = positive ? alpha : 1.0 - alpha;
    sum += -alpha_t * std::pow(1.0 - p_t, gamma) * std::log(p_t);
  }
  return sum / static_cast<double>(pred.size());
}

double box_iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double generalized_iou(const BoxXYXY& a, const BoxXYXY& b) {
  require(a.valid() && b.valid(), ErrorCode::InvalidArgument, "box corners are out of order");
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double iou = uni > 0.0 ? inter / uni : 0.0;
  const double enclosing = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) *
                           (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  if (enclosing <= 0.0) return iou;
  return iou - (enclosing - uni) / enclosing;
}

BoxLosses box_losses(const BoxXYXY& pred, const BoxXYXY& gt) {
  BoxLosses out;
  out.l1 = (std::abs(pred.x1 - gt.x1) + std::abs(pred.y1 - gt.y1) + std::abs(pred.x2 - gt.x2) +
            std::abs(pred.y2 - gt.y2)) /
           4.0;
  out.giou = 1.0 - generalized_iou(pred, gt);
  return out;
}

Tensor binary_cross_entropy(const Tensor& pred, const Tensor& gt) {
  require_same_shape(pred, gt, "binary_cross_entropy");
  Tensor out(pred.rows(), pred.cols());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double p = clamp_prob(pred.data()[i]);
    const double g = gt.data()[i];
    out.data()[i] = static_cast<float>(-(g * std::log(p) + (1.0 - g) * std::log(1.0 - p)));
  }
  return out;
}

double bootstrapped_ce(const Tensor& pred, const Tensor& gt, double ratio) {
  require(ratio > 0.0 && ratio <= 1.0, ErrorCode::InvalidArgument,
          "bootstrap ratio must lie in (0, 1]");
  const Tensor ce = binary_cross_entropy(pred, gt);
  std::vector<double> values(ce.data(), ce.data() + ce.size());
  const auto n = static_cast<double>(values.size());
  const auto keep = static_cast<std::size_t>(std::max(1.0, std::ceil(ratio * n - 1e-9)));
  std::partial_sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(keep),
                    values.end(), std::greater<>());
  double sum = 0.0;
  for (std::size_t i = 0; i < keep; ++i) sum += values[i];
  return sum / static_cast<double>(keep);
}

Assignment hungarian_match(const Matrix<double>& cost) {
  require(cost.rows() == cost.cols(), ErrorCode::ShapeMismatch,
          "hungarian_match needs a square matrix, got " + shape_str(cost.rows(), cost.cols()));
  require(cost.allFinite(), ErrorCode::NonFinite, "cost matrix contains NaN or Inf");
  const auto n = static_cast<int>(cost.rows());
  Assignment out;
  if (n == 0) return out;

  // 1-based potentials; column 0 is the virtual source of each augmenting path.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match_col(n + 1, 0), way(n + 1, 0);
  for (int row = 1; row <= n; ++row) {
    match_col[0] = row;
    int col0 = 0;
    std::vector<double> min_slack(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[col0] = true;
      const int r = match_col[col0];
      double delta = kInf;
      int next = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(r - 1, c - 1) - u[r] - v[c];
        if (reduced < min_slack[c]) {
          min_slack[c] = reduced;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          next = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match_col[c]] += delta;
          v[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = next;
    } while (match_col[col0] != 0);
    do {
      const int prev = way[col0];
      match_col[col0] = match_col[prev];
      col0 = prev;
    } while (col0 != 0);
  }

  out.row_to_col.assign(static_cast<std::size_t>(n), -1);
  for (int c = 1; c <= n; ++c) out.row_to_col[static_cast<std::size_t>(match_col[c] - 1)] = c - 1;
  for (int r = 0; r < n; ++r) out.cost += cost(r, out.row_to_col[static_cast<std::size_t>(r)]);
  return out;
}

double mask_loss(const QueryPrediction& q, const ReferTarget& gt, const LossWeights& w) {
  require_frames(q, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.masks.size(); ++t) {
    sum += w.dice * dice_loss(q.masks[t], gt.masks[t]) +
           w.focal * focal_loss(q.masks[t], gt.masks[t]);
  }
  return sum / static_cast<double>(gt.masks.size());
}

double box_loss(const QueryPrediction& q, const ReferTarget& gt, const LossWeights& w) {
  require_frames(q, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < gt.boxes.size(); ++t) {
    const BoxLosses b = box_losses(q.boxes[t], gt.boxes[t]);
    sum += w.giou * b.giou + w.l1 * b.l1;
  }
  return sum / static_cast<double>(gt.boxes.size());
}

double score_loss(const QueryPrediction& q, double target) {
  require(!q.scores.empty(), ErrorCode::EmptyInput, "query has no scores");
  Tensor pred(1, static_cast<Eigen::Index>(q.scores.size()));
  for (std::size_t t = 0; t < q.scores.size(); ++t) {
    pred(0, static_cast<Eigen::Index>(t)) = static_cast<float>(q.scores[t]);
  }
  const Tensor gt = Tensor::Constant(1, pred.cols(), static_cast<float>(target));
  return focal_loss(pred, gt);
}

ReferLoss refer_loss(std::span<const QueryPrediction> queries, const ReferTarget& gt,
                     const LossWeights& w) {
  require(!queries.empty(), ErrorCode::EmptyInput, "refer_loss needs at least one query");
  const auto n = static_cast<Eigen::Index>(queries.size());

  std::vector<double> negative(queries.size()), positive(queries.size()),
      masks(queries.size()), boxes(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    negative[i] = w.focal * score_loss(queries[i], 0.0);
    positive[i] = w.focal * score_loss(queries[i], 1.0);
    masks[i] = mask_loss(queries[i], gt, w);
    boxes[i] = box_loss(queries[i], gt, w);
  }

  // Column 0 is the referred object, the rest are no-object slots. Selecting
  // query i for column 0 changes the total by exactly cost(i, 0).
  Matrix<double> cost = Matrix<double>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    cost(i, 0) = positive[k] - negative[k] + masks[k] + boxes[k];
  }
  const Assignment match = hungarian_match(cost);

  ReferLoss out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (match.row_to_col[i] == 0) out.optimal_query = static_cast<int>(i);
  }
  // Equal-cost candidates give the same total; report the lowest index.
  for (Eigen::Index i = 0; i < n; ++i) {
    if (cost(i, 0) == cost(out.optimal_query, 0)) {
      out.optimal_query = static_cast<int>(i);
      break;
    }
  }

  const auto opt = static_cast<std::size_t>(out.optimal_query);
  out.score_terms.resize(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out.score_terms[i] = i == opt ? positive[i] : negative[i];
    out.total += out.score_terms[i];
  }
  out.mask_term = masks[opt];
  out.box_term = boxes[opt];
  out.total += out.mask_term;
  out.total += out.box_term;
  return out;
}

double propagation_loss(std::span<const Tensor> pred, std::span<const Tensor> gt,
                        const LossWeights& w, double ratio) {
  require(!pred.empty(), ErrorCode::EmptyInput, "propagation_loss needs at least one frame");
  require(pred.size() == gt.size(), ErrorCode::FrameMismatch,
          "propagation_loss frame counts differ");
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    sum += w.ce * (bootstrapped_ce(pred[t], gt[t], ratio) + dice_loss(pred[t], gt[t]));
  }
  return sum / static_cast<double>(pred.size());
}

double train_loss(const ReferLoss& refer, double propagation) { return refer.total + propagation; }

}  // namespace htr::losses
