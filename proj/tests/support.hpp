#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "htr/feature_map.hpp"
#include "htr/numerics.hpp"
#include "htr/oracle.hpp"

namespace htr::test {

using Rng = std::mt19937_64;

inline Tensor uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                      double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = static_cast<float>(dist(rng));
  return out;
}

inline int pick(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline Tensor binary_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double density = 0.5) {
  std::bernoulli_distribution on(density);
  Tensor out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = on(rng) ? 1.0f : 0.0f;
  return out;
}

inline oracle::Rows rows_of(const Tensor& m) {
  oracle::Rows out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[r].push_back(m(r, c));
  }
  return out;
}

inline double max_abs_diff(const Tensor& a, const oracle::Rows& b) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      worst = std::max(worst, std::abs(static_cast<double>(a(r, c)) - b[r][c]));
    }
  }
  return worst;
}

inline Tensor rect(Eigen::Index h, Eigen::Index w, Eigen::Index r0, Eigen::Index c0,
                   Eigen::Index rh, Eigen::Index cw) {
  Tensor out = Tensor::Zero(h, w);
  out.block(r0, c0, rh, cw).setOnes();
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("htr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace htr::test
