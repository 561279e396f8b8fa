#pragma once

// Dense row-major matrices and the three primitives every matching step is
// built from: softmax, negative squared-L2 affinity and scaled dot-product
// attention. Inputs are single precision; sums are carried in double and
// rounded on the way out.

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "htr/error.hpp"

namespace htr {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Tensor = Matrix<float>;

/// Which slices of a rank-2 tensor are normalized: `Rows` makes every row a
/// distribution, `Cols` every column.
enum class Axis { Rows, Cols };

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& x) {
  return x.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& x, const std::string& what) {
  require(x.allFinite(), ErrorCode::NonFinite, what + " contains NaN or Inf");
}

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
Matrix<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& x, Axis axis) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index slice_len = axis == Axis::Rows ? x.cols() : x.rows();
  require(slice_len > 0 && x.size() > 0, ErrorCode::EmptyAxis, "softmax over an empty axis");

  Matrix<double> work = x.template cast<double>();
  if (axis == Axis::Cols) work.transposeInPlace();
  for (Eigen::Index r = 0; r < work.rows(); ++r) {
    auto row = work.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  if (axis == Axis::Cols) work.transposeInPlace();
  return work.template cast<Scalar>();
}

/// Entry (i, j) is -||q_i - k_j||^2. Differences are formed explicitly rather
/// than through the norm expansion so identical rows give exactly zero.
template <typename DerivedQ, typename DerivedK>
Matrix<typename DerivedQ::Scalar> pairwise_neg_l2(const Eigen::MatrixBase<DerivedQ>& queries,
                                                  const Eigen::MatrixBase<DerivedK>& keys) {
  using Scalar = typename DerivedQ::Scalar;
  require(queries.cols() == keys.cols(), ErrorCode::ShapeMismatch,
          "pairwise_neg_l2: query " + shape_str(queries.rows(), queries.cols()) + " vs key " +
              shape_str(keys.rows(), keys.cols()));
  const Matrix<double> q = queries.template cast<double>();
  const Matrix<double> k = keys.template cast<double>();
  Matrix<double> out(q.rows(), k.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    out.row(i) = -(k.rowwise() - q.row(i)).rowwise().squaredNorm().transpose();
  }
  return out.template cast<Scalar>();
}

/// softmax(Q K^T / sqrt(D)) V, rows of the output are convex combinations of
/// rows of V.
template <typename DerivedQ, typename DerivedK, typename DerivedV>
Matrix<typename DerivedQ::Scalar> attention(const Eigen::MatrixBase<DerivedQ>& queries,
                                            const Eigen::MatrixBase<DerivedK>& keys,
                                            const Eigen::MatrixBase<DerivedV>& values) {
  using Scalar = typename DerivedQ::Scalar;
  require(queries.cols() == keys.cols(), ErrorCode::ShapeMismatch,
          "attention: query width " + std::to_string(queries.cols()) + " vs key width " +
              std::to_string(keys.cols()));
  require(keys.rows() == values.rows(), ErrorCode::ShapeMismatch,
          "attention: " + std::to_string(keys.rows()) + " keys vs " +
              std::to_string(values.rows()) + " values");
  require(keys.rows() > 0, ErrorCode::EmptyAxis, "attention with no keys");
  require(queries.cols() > 0, ErrorCode::EmptyAxis, "attention with zero-width keys");

  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  Matrix<double> logits =
      (queries.template cast<double>() * keys.template cast<double>().transpose()) * scale;
  const Matrix<double> weights = softmax(logits, Axis::Rows);
  return (weights * values.template cast<double>()).template cast<Scalar>();
}

}  // namespace htr
