#include "htr/config.hpp"

#include <cstdlib>
#include <string>

namespace htr {
namespace {

std::optional<std::uint64_t> env_integer(const char* name) {
  const char* raw = std::getenv(name);
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  const std::string text(raw);
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == text.size() && text.front() != '-', ErrorCode::InvalidArgument,
          std::string(name) + " must be a nonnegative integer, got '" + text + "'");
  return value;
}

}  // namespace

void RunConfig::validate() const {
  require(ratio > 0.0 && ratio <= 1.0, ErrorCode::InvalidArgument,
          "memorized ratio must lie in (0, 1]");
  for (double tau : mcs_thresholds) {
    require(tau >= 0.0 && tau <= 1.0, ErrorCode::InvalidArgument,
            "MCS thresholds must lie in [0, 1]");
  }
  require(!clip_length || *clip_length >= 1, ErrorCode::InvalidArgument,
          "clip length must be positive");
  require(!boundary_radius || *boundary_radius >= 0.0, ErrorCode::InvalidArgument,
          "boundary tolerance must be nonnegative");
  require(jobs >= 1, ErrorCode::InvalidArgument, "jobs must be positive");
}

void RunConfig::apply_environment() {
  if (auto s = env_integer("HTR_SEED")) seed = *s;
  if (auto j = env_integer("HTR_JOBS")) jobs = static_cast<std::size_t>(*j);
}

}  // namespace htr
