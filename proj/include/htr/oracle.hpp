#pragma once

// Brute-force reference implementations for cross-checking. Everything here
// works on plain nested std::vector<double> with explicit loops and shares no
// code path with the Eigen-based library.

#include <vector>

#include "htr/box.hpp"

namespace htr::oracle {

using Rows = std::vector<std::vector<double>>;

struct ReadoutResult {
  Rows affinity;  // target nodes x memory rows
  Rows values;    // target nodes x value width
};

/// softmax_j(-||q_i - k_j||^2) weighted sum of value rows.
ReadoutResult readout(const Rows& queries, const Rows& keys, const Rows& values);

/// Full hybrid propagation from raw inputs: mask grid encoding, key and joint
/// projections, local readout, global aggregation and node-object affinity.
struct HybridInputs {
  Rows query_features;                // H*W x C
  std::vector<Rows> ref_features;     // T of H*W x C
  std::vector<Rows> ref_masks;        // T of (16H) x (16W) probabilities
  int grid_width = 0;                 // W in nodes
  Rows key_proj;                      // C x 64
  Rows joint_proj;                    // (C_y + 2 + C) x 64
  Rows mask_proj;                     // 256 x C_y
  double tau = 0.5;
};

struct HybridResult {
  Rows affinity;                 // local softmax affinity
  Rows values;                   // propagated values Y^q
  bool tokens_defined = false;
  std::vector<double> fg_token;
  std::vector<double> bg_token;
  Rows node_object;              // H*W x 2, empty when tokens undefined
};

HybridResult hybrid(const HybridInputs& in);

/// Probability-weighted mean of rows above tau; `defined` false when no row
/// exceeds tau.
struct Token {
  bool defined = false;
  std::vector<double> value;
};
Token aggregate(const Rows& joint, const std::vector<double>& probabilities, double tau);

/// Minimum over all N! permutations.
struct BruteAssignment {
  std::vector<int> row_to_col;
  double cost = 0.0;
};
BruteAssignment brute_force_assignment(const Rows& cost);

double iou(const BoxXYXY& a, const BoxXYXY& b);
double giou(const BoxXYXY& a, const BoxXYXY& b);

double jaccard(const Rows& pred, const Rows& gt);

/// Boundary F-measure via an explicit nearest-boundary distance for every
/// boundary pixel.
double boundary_f(const Rows& pred, const Rows& gt, double radius);

double mcs(const Rows& table, double tau);

}  // namespace htr::oracle
