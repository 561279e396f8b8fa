#include "htr/fusion.hpp"

#include <cmath>
#include <random>

namespace htr::fusion {
namespace {

Tensor gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Tensor out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(dist(rng));
  return out;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_width(const Tensor& m, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  require(m.rows() == rows && m.cols() == cols, ErrorCode::ShapeMismatch,
          name + " is " + shape_str(m.rows(), m.cols()) + ", expected " + shape_str(rows, cols));
}

}  // namespace

void ProjectionSet::insert(const std::string& name, Tensor matrix) {
  require(matrix.size() > 0, ErrorCode::ShapeMismatch, "projection " + name + " is empty");
  require_finite(matrix, "projection " + name);
  table_[name] = std::move(matrix);
}

const Tensor& ProjectionSet::at(const std::string& name) const {
  auto it = table_.find(name);
  require(it != table_.end(), ErrorCode::InvalidArgument, "projection set has no '" + name + "'");
  return it->second;
}

Eigen::Index ProjectionSet::width() const { return at(names::kFuseQuery).rows(); }

ProjectionSet ProjectionSet::random(int width, int num_queries, std::uint64_t seed) {
  require(width >= 1 && num_queries >= 1, ErrorCode::InvalidArgument,
          "projection width and query count must be positive");
  std::mt19937_64 rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(width));
  ProjectionSet p;
  for (const char* n : {names::kFuseQuery, names::kFuseKey, names::kFuseValue, names::kDecodeQuery,
                        names::kDecodeKey, names::kDecodeValue, names::kKernelWeight}) {
    p.insert(n, gaussian(width, width, s, rng));
  }
  p.insert(names::kScoreWeight, gaussian(width, 1, s, rng));
  p.insert(names::kScoreBias, gaussian(1, 1, 0.1, rng));
  p.insert(names::kBoxWeight, gaussian(width, 4, s, rng));
  p.insert(names::kBoxBias, gaussian(1, 4, 0.1, rng));
  p.insert(names::kKernelBias, gaussian(1, width, 0.1, rng));
  p.insert(names::kQueryEmbedding, gaussian(num_queries, width, 1.0, rng));
  p.insert(names::kQueryConcat, gaussian(2 * width, width, 1.0 / std::sqrt(2.0 * width), rng));
  return p;
}

ProjectionSet ProjectionSet::identity(int width, int num_queries) {
  require(width >= 1 && num_queries >= 1, ErrorCode::InvalidArgument,
          "projection width and query count must be positive");
  ProjectionSet p;
  const Tensor eye = Tensor::Identity(width, width);
  for (const char* n : {names::kFuseQuery, names::kFuseKey, names::kFuseValue, names::kDecodeQuery,
                        names::kDecodeKey, names::kDecodeValue, names::kKernelWeight}) {
    p.insert(n, eye);
  }
  p.insert(names::kScoreWeight, Tensor::Zero(width, 1));
  p.insert(names::kScoreBias, Tensor::Zero(1, 1));
  p.insert(names::kBoxWeight, Tensor::Zero(width, 4));
  p.insert(names::kBoxBias, Tensor::Zero(1, 4));
  p.insert(names::kKernelBias, Tensor::Zero(1, width));
  p.insert(names::kQueryEmbedding, Tensor::Zero(num_queries, width));
  Tensor concat = Tensor::Zero(2 * width, width);
  concat.topRows(width) = eye;
  concat.bottomRows(width) = eye;
  p.insert(names::kQueryConcat, concat);
  return p;
}

std::vector<ObjectQuery> make_queries(const SentenceFeature& sentence,
                                      const ProjectionSet& projections, QueryCombine combine) {
  const Tensor& learned = projections.at(names::kQueryEmbedding);
  const Eigen::Index width = learned.cols();
  require_width(sentence.embedding, 1, width, "sentence feature");

  std::vector<ObjectQuery> queries;
  queries.reserve(static_cast<std::size_t>(learned.rows()));
  for (Eigen::Index i = 0; i < learned.rows(); ++i) {
    if (combine == QueryCombine::Sum) {
      queries.push_back({sentence.embedding + learned.row(i)});
    } else {
      const Tensor& proj = projections.at(names::kQueryConcat);
      require_width(proj, 2 * width, width, names::kQueryConcat);
      Tensor joined(1, 2 * width);
      joined << sentence.embedding, learned.row(i);
      queries.push_back({joined * proj});
    }
  }
  return queries;
}

FeatureMap vl_fuse(const FeatureMap& visual, const WordFeatures& words,
                   const ProjectionSet& projections) {
  const Eigen::Index c = visual.channels();
  require(words.tokens.rows() >= 1, ErrorCode::EmptyInput, "vl_fuse needs at least one word");
  require(words.tokens.cols() == c, ErrorCode::ShapeMismatch,
          "word width " + std::to_string(words.tokens.cols()) + " vs visual width " +
              std::to_string(c));
  const Tensor& wq = projections.at(names::kFuseQuery);
  const Tensor& wk = projections.at(names::kFuseKey);
  const Tensor& wv = projections.at(names::kFuseValue);
  require(wq.rows() == c && wk.rows() == c && wv.rows() == c && wq.cols() == wk.cols() &&
              wv.cols() == c,
          ErrorCode::ShapeMismatch, "fusion projections do not match width " + std::to_string(c));

  const Tensor attended = attention(visual.data() * wq, words.tokens * wk, words.tokens * wv);
  return FeatureMap(visual.height(), visual.width(), visual.data().cwiseProduct(attended));
}

std::vector<ObjectEmbedding> decode_queries(std::span<const ObjectQuery> queries,
                                            const FeatureMap& fused,
                                            const ProjectionSet& projections) {
  require(!queries.empty(), ErrorCode::EmptyInput, "decode_queries needs at least one query");
  const Eigen::Index c = fused.channels();
  const Tensor& wq = projections.at(names::kDecodeQuery);
  const Tensor& wk = projections.at(names::kDecodeKey);
  const Tensor& wv = projections.at(names::kDecodeValue);
  require(wq.rows() == c && wk.rows() == c && wv.rows() == c && wq.cols() == wk.cols() &&
              wv.cols() == c,
          ErrorCode::ShapeMismatch, "decoder projections do not match width " + std::to_string(c));
  const Tensor& score_w = projections.at(names::kScoreWeight);
  const Tensor& score_b = projections.at(names::kScoreBias);
  const Tensor& box_w = projections.at(names::kBoxWeight);
  const Tensor& box_b = projections.at(names::kBoxBias);
  const Tensor& kernel_w = projections.at(names::kKernelWeight);
  const Tensor& kernel_b = projections.at(names::kKernelBias);
  require_width(score_w, c, 1, names::kScoreWeight);
  require_width(score_b, 1, 1, names::kScoreBias);
  require_width(box_w, c, 4, names::kBoxWeight);
  require_width(box_b, 1, 4, names::kBoxBias);
  require_width(kernel_w, c, c, names::kKernelWeight);
  require_width(kernel_b, 1, c, names::kKernelBias);

  const Tensor keys = fused.data() * wk;
  const Tensor values = fused.data() * wv;

  std::vector<ObjectEmbedding> out;
  out.reserve(queries.size());
  for (const ObjectQuery& q : queries) {
    require_width(q.query, 1, c, "object query");
    ObjectEmbedding e;
    e.embedding = q.query + attention(q.query * wq, keys, values);

    e.score = logistic(static_cast<double>((e.embedding * score_w + score_b)(0, 0)));

    const Tensor raw_box = e.embedding * box_w + box_b;
    const double cx = logistic(raw_box(0, 0));
    const double cy = logistic(raw_box(0, 1));
    const double w = logistic(raw_box(0, 2));
    const double h = logistic(raw_box(0, 3));
    e.box = {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};

    e.kernel.weights = e.embedding * kernel_w + kernel_b;
    out.push_back(std::move(e));
  }
  return out;
}

Tensor apply_conditional_kernel(const ConditionalKernel& kernel, const FeatureMap& features) {
  require(kernel.weights.rows() == 1 && kernel.weights.cols() == features.channels(),
          ErrorCode::ShapeMismatch,
          "kernel " + shape_str(kernel.weights.rows(), kernel.weights.cols()) +
              " vs feature width " + std::to_string(features.channels()));
  const Eigen::VectorXd logits =
      features.data().cast<double>() * kernel.weights.cast<double>().transpose();
  Tensor grid(features.height(), features.width());
  for (Eigen::Index i = 0; i < logits.size(); ++i) grid.data()[i] = static_cast<float>(logits(i));
  return grid;
}

}  // namespace htr::fusion
