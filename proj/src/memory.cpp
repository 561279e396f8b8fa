#include "htr/memory.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace htr::memory {
namespace {

constexpr double kProbClamp = 1e-7;

Tensor gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(dist(rng));
  return out;
}

Tensor joint_features(const Tensor& values, const Tensor& visual, const Tensor& joint_proj) {
  require(values.rows() == visual.rows(), ErrorCode::ShapeMismatch,
          "joint features: value and visual row counts differ");
  require(joint_proj.rows() == values.cols() + visual.cols(), ErrorCode::ShapeMismatch,
          "joint projection has " + std::to_string(joint_proj.rows()) + " rows, expected " +
              std::to_string(values.cols() + visual.cols()));
  Matrix<double> concat(values.rows(), values.cols() + visual.cols());
  concat << values.cast<double>(), visual.cast<double>();
  return (concat * joint_proj.cast<double>()).cast<float>();
}

}  // namespace

void MemoryWeights::validate(Eigen::Index channels) const {
  require(key_proj.rows() == channels && key_proj.cols() == kKeyWidth, ErrorCode::ShapeMismatch,
          "key projection is " + shape_str(key_proj.rows(), key_proj.cols()) + ", expected " +
              shape_str(channels, kKeyWidth));
  require(mask_proj.rows() == kGridCells && mask_proj.cols() >= 1, ErrorCode::ShapeMismatch,
          "mask projection is " + shape_str(mask_proj.rows(), mask_proj.cols()) +
              ", expected 256 x C_y");
  require(joint_proj.rows() == value_width() + channels && joint_proj.cols() == kKeyWidth,
          ErrorCode::ShapeMismatch,
          "joint projection is " + shape_str(joint_proj.rows(), joint_proj.cols()) +
              ", expected " + shape_str(value_width() + channels, kKeyWidth));
  require_finite(key_proj, "key projection");
  require_finite(joint_proj, "joint projection");
  require_finite(mask_proj, "mask projection");
}

MemoryWeights MemoryWeights::random(int channels, int mask_channels, std::uint64_t seed) {
  require(channels >= 1 && mask_channels >= 1, ErrorCode::InvalidArgument,
          "memory weights need positive widths");
  std::mt19937_64 rng(seed);
  MemoryWeights w;
  w.key_proj = gaussian(channels, kKeyWidth, 1.0 / std::sqrt(static_cast<double>(channels)), rng);
  const int joint_rows = mask_channels + 2 + channels;
  w.joint_proj =
      gaussian(joint_rows, kKeyWidth, 1.0 / std::sqrt(static_cast<double>(joint_rows)), rng);
  w.mask_proj = gaussian(kGridCells, mask_channels, 1.0 / kGridCells, rng);
  return w;
}

MaskEnhancer identity_enhancer() {
  return [](const Tensor& mask_features, const FeatureMap&) { return mask_features; };
}

MaskEnhancer residual_linear_enhancer(Tensor weight) {
  require_finite(weight, "enhancer weight");
  return [weight = std::move(weight)](const Tensor& mask_features, const FeatureMap& visual) {
    require(weight.rows() == visual.channels() && weight.cols() == mask_features.cols(),
            ErrorCode::ShapeMismatch, "enhancer weight does not match feature widths");
    return Tensor(mask_features + visual.data() * weight);
  };
}

MaskFeatures encode_mask_grid(const Tensor& mask, const Tensor& mask_proj) {
  require(mask.rows() >= 1 && mask.cols() >= 1, ErrorCode::ShapeMismatch, "empty mask");
  require(mask_proj.rows() == kGridCells, ErrorCode::ShapeMismatch,
          "mask projection must have 256 rows, got " + std::to_string(mask_proj.rows()));
  const Eigen::Index grid_h = (mask.rows() + kGridSize - 1) / kGridSize;
  const Eigen::Index grid_w = (mask.cols() + kGridSize - 1) / kGridSize;

  Matrix<double> cells = Matrix<double>::Zero(grid_h * grid_w, kGridCells);
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      const Eigen::Index node = (r / kGridSize) * grid_w + c / kGridSize;
      cells(node, (r % kGridSize) * kGridSize + c % kGridSize) = mask(r, c);
    }
  }

  MaskFeatures out;
  out.grid_height = grid_h;
  out.grid_width = grid_w;
  out.data = (cells * mask_proj.cast<double>()).cast<float>();
  out.probabilities = (cells.rowwise().sum() / static_cast<double>(kGridCells)).cast<float>();
  return out;
}

HybridMemory build_memory(std::span<const FeatureMap> features, std::span<const Tensor> masks,
                          const MemoryWeights& weights, std::span<const int> frame_indices,
                          const MaskEnhancer& enhancer) {
  require(!features.empty(), ErrorCode::EmptyReferenceSet, "memory needs a reference frame");
  require(features.size() == masks.size(), ErrorCode::ShapeMismatch,
          std::to_string(features.size()) + " reference feature maps but " +
              std::to_string(masks.size()) + " masks");
  require(frame_indices.empty() || frame_indices.size() == features.size(),
          ErrorCode::ShapeMismatch, "frame index count differs from reference count");
  const Eigen::Index channels = features.front().channels();
  weights.validate(channels);

  Eigen::Index total_rows = 0;
  for (const FeatureMap& f : features) {
    require(f.channels() == channels, ErrorCode::ShapeMismatch,
            "reference frames disagree on channel count");
    total_rows += f.nodes();
  }

  HybridMemory mem;
  mem.local.keys.resize(total_rows, kKeyWidth);
  mem.local.values.resize(total_rows, weights.value_width());
  mem.local.frame_index.reserve(static_cast<std::size_t>(total_rows));
  mem.reference_probabilities.resize(total_rows);
  Tensor visual(total_rows, channels);

  Eigen::Index row = 0;
  for (std::size_t t = 0; t < features.size(); ++t) {
    const FeatureMap& f = features[t];
    const Tensor& mask = masks[t];
    require(mask.allFinite() && mask.minCoeff() >= 0.0f && mask.maxCoeff() <= 1.0f,
            ErrorCode::InvalidArgument, "reference mask probabilities must lie in [0, 1]");
    const int index = frame_indices.empty() ? static_cast<int>(t) : frame_indices[t];
    if (t > 0) {
      require(index > mem.reference_frames.back(), ErrorCode::InvalidArgument,
              "reference frame indices must be strictly increasing");
    }
    mem.reference_frames.push_back(index);

    MaskFeatures encoded = encode_mask_grid(mask, weights.mask_proj);
    require(encoded.grid_height == f.height() && encoded.grid_width == f.width(),
            ErrorCode::ShapeMismatch,
            "mask grid of frame " + std::to_string(index) + " is " +
                shape_str(encoded.grid_height, encoded.grid_width) + " but the feature map is " +
                shape_str(f.height(), f.width()));
    const Tensor enhanced = enhancer(encoded.data, f);
    require(enhanced.rows() == f.nodes() && enhanced.cols() == weights.mask_channels(),
            ErrorCode::ShapeMismatch, "mask enhancer changed the feature shape");

    const Eigen::Index n = f.nodes();
    mem.local.keys.middleRows(row, n) =
        (f.data().cast<double>() * weights.key_proj.cast<double>()).cast<float>();
    mem.local.values.block(row, 0, n, weights.mask_channels()) = enhanced;
    mem.local.values.block(row, weights.mask_channels(), n, 1) = encoded.probabilities;
    mem.local.values.block(row, weights.mask_channels() + 1, n, 1) =
        (1.0f - encoded.probabilities.array()).matrix();
    mem.reference_probabilities.segment(row, n) = encoded.probabilities;
    visual.middleRows(row, n) = f.data();
    mem.local.frame_index.insert(mem.local.frame_index.end(), static_cast<std::size_t>(n), index);
    row += n;
  }

  mem.joint = joint_features(mem.local.values, visual, weights.joint_proj);

  const std::span<const float> fg(mem.reference_probabilities.data(),
                                  static_cast<std::size_t>(total_rows));
  const Eigen::VectorXf bg_probs = (1.0f - mem.reference_probabilities.array()).matrix();
  const std::span<const float> bg(bg_probs.data(), static_cast<std::size_t>(total_rows));
  try {
    mem.global.foreground = aggregate_global(mem.joint, fg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::GlobalTokenUndefined) throw;
  }
  try {
    mem.global.background = aggregate_global(mem.joint, bg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::GlobalTokenUndefined) throw;
  }
  return mem;
}

Tensor readout_affinity(const FeatureMap& query, const LocalMemoryBank& bank,
                        const Tensor& key_proj) {
  require(bank.keys.rows() >= 1, ErrorCode::EmptyReferenceSet, "empty memory bank");
  require(key_proj.rows() == query.channels() && key_proj.cols() == bank.keys.cols(),
          ErrorCode::ShapeMismatch,
          "key projection " + shape_str(key_proj.rows(), key_proj.cols()) +
              " does not map width " + std::to_string(query.channels()) + " to " +
              std::to_string(bank.keys.cols()));
  const Tensor projected = (query.data().cast<double>() * key_proj.cast<double>()).cast<float>();
  return softmax(pairwise_neg_l2(projected, bank.keys), Axis::Rows);
}

Tensor local_readout(const FeatureMap& query, const LocalMemoryBank& bank,
                     const Tensor& key_proj) {
  require(bank.keys.rows() == bank.values.rows(), ErrorCode::ShapeMismatch,
          "bank keys and values differ in row count");
  const Tensor affinity = readout_affinity(query, bank, key_proj);
  return (affinity.cast<double>() * bank.values.cast<double>()).cast<float>();
}

Tensor aggregate_global(const Tensor& joint, std::span<const float> probabilities, double tau) {
  require(joint.rows() == static_cast<Eigen::Index>(probabilities.size()),
          ErrorCode::ShapeMismatch,
          std::to_string(joint.rows()) + " joint rows but " +
              std::to_string(probabilities.size()) + " probabilities");
  require(tau >= 0.0 && tau <= 1.0, ErrorCode::InvalidArgument, "tau must lie in [0, 1]");

  Eigen::RowVectorXd numerator = Eigen::RowVectorXd::Zero(joint.cols());
  double denominator = 0.0;
  for (Eigen::Index j = 0; j < joint.rows(); ++j) {
    const double m = probabilities[static_cast<std::size_t>(j)];
    if (heaviside(m - tau) == 0) continue;
    numerator += m * joint.row(j).cast<double>();
    denominator += m;
  }
  require(denominator > 0.0, ErrorCode::GlobalTokenUndefined,
          "no memory node has probability above " + std::to_string(tau));
  return (numerator / denominator).cast<float>();
}

Tensor global_affinity(const Tensor& propagated, const FeatureMap& query,
                       const GlobalTokens& tokens, const Tensor& joint_proj) {
  require(tokens.defined(), ErrorCode::GlobalTokenUndefined, "global tokens are undefined");
  require(tokens.foreground->cols() == joint_proj.cols() &&
              tokens.background->cols() == joint_proj.cols(),
          ErrorCode::ShapeMismatch, "token width does not match the joint projection");
  const Tensor joint = joint_features(propagated, query.data(), joint_proj);
  Matrix<double> stacked(2, joint_proj.cols());
  stacked << tokens.foreground->cast<double>(), tokens.background->cast<double>();
  return (joint.cast<double>() * stacked.transpose()).cast<float>();
}

Tensor refine_with_global(const Tensor& soft_mask, const Tensor& affinity,
                          const GlobalTokens& tokens) {
  require(tokens.defined(), ErrorCode::GlobalTokenUndefined, "global tokens are undefined");
  require(affinity.rows() == soft_mask.size() && affinity.cols() == 2, ErrorCode::ShapeMismatch,
          "affinity does not match the soft mask");
  const double midpoint = 0.5 * (tokens.foreground->cast<double>().squaredNorm() -
                                 tokens.background->cast<double>().squaredNorm());
  const double scale = 1.0 / std::sqrt(static_cast<double>(kKeyWidth));
  Tensor out(soft_mask.rows(), soft_mask.cols());
  for (Eigen::Index i = 0; i < soft_mask.size(); ++i) {
    const double p = std::clamp(static_cast<double>(soft_mask.data()[i]), kProbClamp, 1.0 - kProbClamp);
    const double margin = (static_cast<double>(affinity(i, 0)) - affinity(i, 1) - midpoint) * scale;
    const double logit = std::log(p / (1.0 - p)) + margin;
    out.data()[i] = static_cast<float>(1.0 / (1.0 + std::exp(-logit)));
  }
  return out;
}

Propagation hybrid_propagate(const FeatureMap& query, const HybridMemory& memory,
                             const MemoryWeights& weights) {
  require(memory.local.keys.rows() >= 1, ErrorCode::EmptyReferenceSet, "memory is empty");
  weights.validate(query.channels());

  Propagation out;
  out.values = local_readout(query, memory.local, weights.key_proj);

  const Eigen::Index fg_col = weights.mask_channels();
  out.soft_mask.resize(query.height(), query.width());
  for (Eigen::Index i = 0; i < query.nodes(); ++i) {
    const double fg = out.values(i, fg_col);
    const double bg = out.values(i, fg_col + 1);
    out.soft_mask.data()[i] = static_cast<float>(fg / (fg + bg));
  }

  if (memory.global.defined()) {
    out.affinity = global_affinity(out.values, query, memory.global, weights.joint_proj);
    out.hybrid_mask = refine_with_global(out.soft_mask, *out.affinity, memory.global);
  } else {
    out.hybrid_mask = out.soft_mask;
  }
  return out;
}

}  // namespace htr::memory
