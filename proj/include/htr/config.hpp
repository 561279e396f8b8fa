#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "htr/metrics.hpp"
#include "htr/selection.hpp"

namespace htr {

struct RunConfig {
  double ratio = selection::kDefaultRatio;
  std::vector<double> mcs_thresholds{metrics::kDefaultMcsThresholds.begin(),
                                     metrics::kDefaultMcsThresholds.end()};
  std::optional<std::size_t> clip_length;
  std::optional<double> boundary_radius;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  /// Throws InvalidArgument on a ratio outside (0, 1], a threshold outside
  /// [0, 1], a zero clip length or zero jobs.
  void validate() const;

  /// Applies HTR_SEED and HTR_JOBS when set.
  void apply_environment();
};

}  // namespace htr
