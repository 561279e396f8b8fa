#pragma once

// Forward-only training objective: mask, box and score terms for the
// referring head, the propagation loss, and the Hungarian assignment used to
// pick the query that receives the mask and box supervision.

#include <span>
#include <vector>

#include "htr/box.hpp"
#include "htr/numerics.hpp"

namespace htr::losses {

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kDiceSmooth = 1.0;
inline constexpr double kFocalAlpha = 0.25;
inline constexpr double kFocalGamma = 2.0;
inline constexpr double kBootstrapRatio = 0.15;

struct LossWeights {
  double dice = 5.0;
  double l1 = 5.0;
  double focal = 2.0;
  double giou = 2.0;
  double ce = 1.0;
};

/// 1 - (2 sum(p g) + 1) / (sum(p) + sum(g) + 1).
double dice_loss(const Tensor& pred, const Tensor& gt);

/// Mean over elements of -alpha_t (1 - p_t)^gamma ln(p_t).
double focal_loss(const Tensor& pred, const Tensor& gt, double alpha = kFocalAlpha,
                  double gamma = kFocalGamma);

struct BoxLosses {
  double l1 = 0.0;
  double giou = 0.0;
};

double box_iou(const BoxXYXY& a, const BoxXYXY& b);
double generalized_iou(const BoxXYXY& a, const BoxXYXY& b);

/// Mean absolute coordinate difference and 1 - GIoU. Zero-area boxes have IoU 0.
BoxLosses box_losses(const BoxXYXY& pred, const BoxXYXY& gt);

/// Per-element binary cross entropy with clamped probabilities.
Tensor binary_cross_entropy(const Tensor& pred, const Tensor& gt);

/// Mean of the ceil(ratio * n) largest per-element cross entropies.
double bootstrapped_ce(const Tensor& pred, const Tensor& gt, double ratio = kBootstrapRatio);

struct Assignment {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost perfect matching of a square cost matrix (O(N^3) shortest
/// augmenting paths with potentials).
Assignment hungarian_match(const Matrix<double>& cost);

/// Predictions of one query over T frames.
struct QueryPrediction {
  std::vector<Tensor> masks;    // soft masks, one per frame
  std::vector<BoxXYXY> boxes;   // one per frame
  std::vector<double> scores;   // one per frame, in [0, 1]
};

struct ReferTarget {
  std::vector<Tensor> masks;
  std::vector<BoxXYXY> boxes;
};

struct ReferLoss {
  double total = 0.0;
  int optimal_query = 0;
  std::vector<double> score_terms;  // lambda_focal * score loss per query
  double mask_term = 0.0;           // lambda_dice * dice + lambda_focal * focal, optimal query
  double box_term = 0.0;            // lambda_GIoU * GIoU + lambda_L1 * L1, optimal query
};

/// Frame-averaged mask loss lambda_dice * dice + lambda_focal * focal.
double mask_loss(const QueryPrediction& q, const ReferTarget& gt, const LossWeights& w);

/// Frame-averaged box loss lambda_GIoU * GIoU + lambda_L1 * L1.
double box_loss(const QueryPrediction& q, const ReferTarget& gt, const LossWeights& w);

/// Focal loss of the per-frame scores against a constant target (0 or 1).
double score_loss(const QueryPrediction& q, double target);

/// sum_i lambda_focal L_S(i) + [i optimal] (L_M(i) + L_B(i)), summed in that
/// order. The optimal query minimizes this same total; it is found with the
/// Hungarian method on a query x (object + no-object slots) cost matrix.
ReferLoss refer_loss(std::span<const QueryPrediction> queries, const ReferTarget& gt,
                     const LossWeights& w = {});

/// lambda_ce * (bootstrapped CE + dice), averaged over propagated frames.
double propagation_loss(std::span<const Tensor> pred, std::span<const Tensor> gt,
                        const LossWeights& w = {}, double ratio = kBootstrapRatio);

/// Referring loss plus propagation loss.
double train_loss(const ReferLoss& refer, double propagation);

}  // namespace htr::losses
