#pragma once

// Language-conditioned fusion of visual features, object-query decoding and
// conditional-kernel segmentation, all realized with dense attention at a
// single stride-16 scale.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "htr/box.hpp"
#include "htr/feature_map.hpp"
#include "htr/numerics.hpp"

namespace htr::fusion {

inline constexpr int kDefaultWidth = 256;
inline constexpr int kDefaultQueries = 5;

/// Word-level text features, one row per token.
struct WordFeatures {
  Tensor tokens;
};

/// Sentence embedding, a single row.
struct SentenceFeature {
  Tensor embedding;
};

struct ObjectQuery {
  Tensor query;
};

/// Point-wise convolution weights: one weight per feature channel.
struct ConditionalKernel {
  Tensor weights;
};

struct ObjectEmbedding {
  Tensor embedding;
  double score = 0.0;
  BoxXYXY box;
  ConditionalKernel kernel;
};

/// Names of the matrices a ProjectionSet is expected to hold.
namespace names {
inline constexpr const char* kFuseQuery = "fuse.query";
inline constexpr const char* kFuseKey = "fuse.key";
inline constexpr const char* kFuseValue = "fuse.value";
inline constexpr const char* kDecodeQuery = "decode.query";
inline constexpr const char* kDecodeKey = "decode.key";
inline constexpr const char* kDecodeValue = "decode.value";
inline constexpr const char* kScoreWeight = "head.score.weight";
inline constexpr const char* kScoreBias = "head.score.bias";
inline constexpr const char* kBoxWeight = "head.box.weight";
inline constexpr const char* kBoxBias = "head.box.bias";
inline constexpr const char* kKernelWeight = "head.kernel.weight";
inline constexpr const char* kKernelBias = "head.kernel.bias";
inline constexpr const char* kQueryEmbedding = "query.embedding";
inline constexpr const char* kQueryConcat = "query.concat";
}  // namespace names

/// Immutable-after-load table of named projection matrices.
class ProjectionSet {
 public:
  void insert(const std::string& name, Tensor matrix);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return table_.count(name) != 0; }
  const std::map<std::string, Tensor>& entries() const { return table_; }

  /// Model width implied by the fusion query projection.
  Eigen::Index width() const;

  /// Gaussian weights scaled by 1/sqrt(fan-in); deterministic per seed.
  static ProjectionSet random(int width, int num_queries, std::uint64_t seed);

  /// Every square projection is the identity, heads are zero.
  static ProjectionSet identity(int width, int num_queries);

 private:
  std::map<std::string, Tensor> table_;
};

enum class QueryCombine { Sum, ConcatProject };

/// Builds the language-guided queries from the sentence feature and the
/// learnable embeddings (one row of `query.embedding` per query).
std::vector<ObjectQuery> make_queries(const SentenceFeature& sentence,
                                      const ProjectionSet& projections,
                                      QueryCombine combine = QueryCombine::Sum);

/// visual ⊙ attention(visual·W^Q, words·W^K, words·W^V).
FeatureMap vl_fuse(const FeatureMap& visual, const WordFeatures& words,
                   const ProjectionSet& projections);

/// Residual cross-attention of each query over the fused features followed by
/// the score, box and kernel heads. Scores pass through a logistic; boxes are
/// predicted as normalized (cx, cy, w, h) and returned as corners.
std::vector<ObjectEmbedding> decode_queries(std::span<const ObjectQuery> queries,
                                            const FeatureMap& fused,
                                            const ProjectionSet& projections);

/// Per-node dot product of the kernel with the node's features, returned as an
/// H x W grid of mask logits.
Tensor apply_conditional_kernel(const ConditionalKernel& kernel, const FeatureMap& features);

}  // namespace htr::fusion
