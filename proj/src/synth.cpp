#include "htr/synth.hpp"

#include <algorithm>
#include <random>

#include "htr/io.hpp"
#include "htr/memory.hpp"

namespace htr::synth {

Scenario synth_scenario(const SynthConfig& config) {
  require(config.frames >= 1 && config.height >= 1 && config.width >= 1 && config.channels >= 1,
          ErrorCode::InvalidArgument, "synthetic scenario needs positive sizes");
  require(config.separation > 0.0, ErrorCode::InvalidArgument, "separation must be positive");
  require(config.noise >= 0.0, ErrorCode::InvalidArgument, "noise must be nonnegative");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Scenario out;
  out.direction.resize(config.channels);
  do {
    for (int c = 0; c < config.channels; ++c) out.direction(c) = normal(rng);
  } while (out.direction.norm() < 1e-6);
  out.direction.normalize();

  const int obj_h = std::max(1, config.height / 2);
  const int obj_w = std::max(1, config.width / 2);
  const int top = (config.height - obj_h) / 2;
  const int travel = config.width - obj_w;

  const int g = memory::kGridSize;
  for (int t = 0; t < config.frames; ++t) {
    // Bounce between the left and right edges, one node per frame.
    int left = 0;
    if (travel > 0) {
      const int phase = t % (2 * travel);
      left = phase <= travel ? phase : 2 * travel - phase;
    }

    Tensor data(static_cast<Eigen::Index>(config.height) * config.width, config.channels);
    Tensor mask = Tensor::Zero(config.height * g, config.width * g);
    for (int r = 0; r < config.height; ++r) {
      for (int c = 0; c < config.width; ++c) {
        const bool foreground = r >= top && r < top + obj_h && c >= left && c < left + obj_w;
        const double sign = foreground ? 1.0 : -1.0;
        const Eigen::Index node = static_cast<Eigen::Index>(r) * config.width + c;
        for (int k = 0; k < config.channels; ++k) {
          data(node, k) = static_cast<float>(sign * config.separation * out.direction(k) +
                                             config.noise * normal(rng));
        }
        if (foreground) mask.block(r * g, c * g, g, g).setOnes();
      }
    }
    out.features.emplace_back(config.height, config.width, std::move(data));
    out.gt_masks.push_back(std::move(mask));
    out.scores.push_back(1.0 - static_cast<double>(t) / config.frames);
  }
  return out;
}

Tensor inject_label_noise(const Tensor& mask, double ratio, std::uint64_t seed) {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorCode::InvalidArgument,
          "label noise ratio must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(ratio);
  const int g = memory::kGridSize;
  Tensor out = mask;
  for (Eigen::Index r = 0; r < mask.rows(); r += g) {
    for (Eigen::Index c = 0; c < mask.cols(); c += g) {
      if (!flip(rng)) continue;
      const Eigen::Index h = std::min<Eigen::Index>(g, mask.rows() - r);
      const Eigen::Index w = std::min<Eigen::Index>(g, mask.cols() - c);
      out.block(r, c, h, w) = (1.0f - mask.block(r, c, h, w).array()).matrix();
    }
  }
  return out;
}

void write_scenario(const std::filesystem::path& dir, const Scenario& scenario) {
  io::write_tensor(dir / "features.htrt", io::from_feature_maps(scenario.features));
  io::TensorFile scores;
  scores.dims = {static_cast<std::uint32_t>(scenario.scores.size())};
  for (double s : scenario.scores) scores.data.push_back(static_cast<float>(s));
  io::write_tensor(dir / "scores.htrt", scores);
  for (std::size_t t = 0; t < scenario.gt_masks.size(); ++t) {
    const std::string name = io::frame_file_name(static_cast<int>(t));
    io::write_mask(dir / "gt" / name, scenario.gt_masks[t]);
    io::write_mask(dir / "ref_masks" / name, scenario.gt_masks[t]);
  }
}

}  // namespace htr::synth
