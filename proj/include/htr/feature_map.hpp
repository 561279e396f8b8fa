#pragma once

#include <Eigen/Dense>

#include "htr/numerics.hpp"

namespace htr {

/// A per-frame feature grid at stride 16: `height * width` pixel nodes, one
/// row of `channels` values per node in row-major node order.
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(Eigen::Index height, Eigen::Index width, Tensor data)
      : height_(height), width_(width), data_(std::move(data)) {
    require(height_ >= 1 && width_ >= 1, ErrorCode::ShapeMismatch,
            "feature map needs at least one node");
    require(data_.rows() == height_ * width_, ErrorCode::ShapeMismatch,
            "feature map " + shape_str(height_, width_) + " expects " +
                std::to_string(height_ * width_) + " rows, got " + std::to_string(data_.rows()));
    require(data_.cols() >= 1, ErrorCode::ShapeMismatch, "feature map needs at least one channel");
    require_finite(data_, "feature map");
  }

  Eigen::Index height() const { return height_; }
  Eigen::Index width() const { return width_; }
  Eigen::Index nodes() const { return height_ * width_; }
  Eigen::Index channels() const { return data_.cols(); }
  const Tensor& data() const { return data_; }

 private:
  Eigen::Index height_ = 0;
  Eigen::Index width_ = 0;
  Tensor data_;
};

}  // namespace htr
