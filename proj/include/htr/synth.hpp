#pragma once

// Synthetic videos with a known answer: foreground nodes are drawn around
// +separation * u and background nodes around -separation * u for a random
// unit vector u. The object is a rectangle of nodes sliding one node per
// frame, and frame scores decrease with time so selection is deterministic.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "htr/feature_map.hpp"
#include "htr/numerics.hpp"

namespace htr::synth {

struct SynthConfig {
  std::uint64_t seed = 0;
  int frames = 4;
  int height = 8;  // feature nodes; masks are 16x larger
  int width = 8;
  int channels = 8;
  double separation = 10.0;
  double noise = 1.0;
};

struct Scenario {
  std::vector<FeatureMap> features;
  std::vector<Tensor> gt_masks;
  std::vector<double> scores;
  Eigen::VectorXd direction;  // the unit vector u
};

Scenario synth_scenario(const SynthConfig& config);

/// Flips whole 16x16 cells (p -> 1 - p) independently with probability
/// `ratio`; deterministic per seed.
Tensor inject_label_noise(const Tensor& mask, double ratio, std::uint64_t seed);

/// features.htrt (T x H x W x C), scores.htrt (T), gt/ and ref_masks/ with one
/// PGM per frame.
void write_scenario(const std::filesystem::path& dir, const Scenario& scenario);

}  // namespace htr::synth
