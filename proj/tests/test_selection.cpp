#include <doctest.h>

#include <numeric>
#include <set>

#include "htr/selection.hpp"
#include "htr/synth.hpp"
#include "support.hpp"

using namespace htr;
using namespace htr::selection;
using htr::test::Rng;

TEST_CASE("assign_gt_scores") {
  const std::vector<double> a{2.0, 1.0, 3.0};
  CHECK(assign_gt_scores(a) == std::vector<int>{0, 1, 0});
  const std::vector<double> b{0.5};
  CHECK(assign_gt_scores(b) == std::vector<int>{1});
  const std::vector<double> c{1.0, 1.0};
  CHECK(assign_gt_scores(c) == std::vector<int>{1, 0});
  CHECK_THROWS_AS(assign_gt_scores(std::vector<double>{}), Error);

  Rng rng(40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(static_cast<std::size_t>(test::pick(rng, 1, 9)));
    for (double& v : l) v = test::pick(rng, 0, 3);
    const auto out = assign_gt_scores(l);
    CHECK(std::accumulate(out.begin(), out.end(), 0) == 1);
  }
}

TEST_CASE("select_reference_frames worked values") {
  const std::vector<double> s{0.9, 0.1, 0.5, 0.3};
  CHECK(select_reference_frames(s, 0.25) == std::vector<int>{0});
  const std::vector<double> five{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(select_reference_frames(five, 0.25) == std::vector<int>{3, 4});
  const std::vector<double> equal(4, 0.3);
  CHECK(select_reference_frames(equal, 0.5) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(select_reference_frames(std::vector<double>{}, 0.5), Error);
  CHECK_THROWS_AS(select_reference_frames(s, 0.0), Error);
  CHECK_THROWS_AS(select_reference_frames(s, 1.5), Error);
}

TEST_CASE("select_reference_frames properties") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const int t = test::pick(rng, 1, 30);
    const double k = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    std::vector<double> scores(static_cast<std::size_t>(t));
    for (double& v : scores) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const auto sel = select_reference_frames(scores, k);
    CHECK(sel.size() == static_cast<std::size_t>(std::ceil(k * t - 1e-9)));
    CHECK(std::is_sorted(sel.begin(), sel.end()));
    CHECK(std::set<int>(sel.begin(), sel.end()).size() == sel.size());
    for (int i : sel) CHECK((i >= 0 && i < t));
    std::vector<double> shifted = scores;
    for (double& v : shifted) v += 7.0;
    CHECK(select_reference_frames(shifted, k) == sel);
  }
}

namespace {

VideoBundle bundle_from(const synth::Scenario& s) {
  VideoBundle v;
  v.id = "synthetic";
  v.frames = s.features;
  for (std::size_t t = 0; t < s.features.size(); ++t) {
    ScoredFrame f;
    f.index = static_cast<int>(t);
    f.score = s.scores[t];
    f.reference_mask = s.gt_masks[t];
    v.scored.push_back(std::move(f));
  }
  return v;
}

}  // namespace

TEST_CASE("collaborate on a separable video") {
  const synth::Scenario s = synth::synth_scenario({});
  const VideoBundle v = bundle_from(s);
  const auto w = memory::MemoryWeights::random(8, 16, 0);
  const CollaborationResult r = collaborate(v, w);
  REQUIRE(r.masks.masks.size() == 4);
  CHECK(r.reference_frames == std::vector<int>{0});
  CHECK(r.masks.masks[0] == s.gt_masks[0]);
  for (std::size_t t = 1; t < 4; ++t) CHECK(metrics::jaccard(r.masks.masks[t], s.gt_masks[t]) >= 0.99);
}

TEST_CASE("collaborate edge cases") {
  const synth::Scenario s = synth::synth_scenario({});
  const auto w = memory::MemoryWeights::random(8, 16, 0);

  VideoBundle single = bundle_from(s);
  single.frames.resize(1);
  single.scored.resize(1);
  Rng rng(3);
  single.scored[0].reference_mask = test::uniform(rng, 128, 128, 0, 1);
  const CollaborationResult one = collaborate(single, w);
  CHECK(one.soft[0] == *single.scored[0].reference_mask);

  CollaborationOptions all;
  all.ratio = 1.0;
  const CollaborationResult full = collaborate(bundle_from(s), w, all);
  for (std::size_t t = 0; t < 4; ++t) CHECK(full.masks.masks[t] == s.gt_masks[t]);

  VideoBundle missing = bundle_from(s);
  missing.scored[0].reference_mask.reset();
  try {
    collaborate(missing, w);
    FAIL("expected MissingReferenceMask");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingReferenceMask);
  }

  VideoBundle kernel_only = bundle_from(s);
  kernel_only.scored[0].reference_mask.reset();
  Tensor k = Tensor::Zero(1, 8);
  for (int c = 0; c < 8; ++c) k(0, c) = static_cast<float>(s.direction(c));
  kernel_only.scored[0].kernel = fusion::ConditionalKernel{k};
  const CollaborationResult from_kernel = collaborate(kernel_only, w);
  CHECK(metrics::jaccard(from_kernel.masks.masks[0], s.gt_masks[0]) >= 0.99);

  VideoBundle mismatch = bundle_from(s);
  mismatch.scored.pop_back();
  CHECK_THROWS_AS(collaborate(mismatch, w), Error);

  VideoBundle dup = bundle_from(s);
  dup.scored[1].index = 0;
  CHECK_THROWS_AS(collaborate(dup, w), Error);

  VideoBundle bad_mask = bundle_from(s);
  bad_mask.scored[0].reference_mask = Tensor::Zero(5, 5);
  bad_mask.scored[1].reference_mask = Tensor::Zero(128, 128);
  CHECK_THROWS_AS(collaborate(bad_mask, w), Error);
}

TEST_CASE("collaborate is independent of the job count and respects clips") {
  synth::SynthConfig cfg;
  cfg.frames = 9;
  const synth::Scenario s = synth::synth_scenario(cfg);
  const auto w = memory::MemoryWeights::random(8, 16, 0);
  CollaborationOptions serial;
  CollaborationOptions parallel;
  parallel.jobs = 4;
  const auto a = collaborate(bundle_from(s), w, serial);
  const auto b = collaborate(bundle_from(s), w, parallel);
  for (std::size_t t = 0; t < 9; ++t) CHECK(a.soft[t] == b.soft[t]);

  CollaborationOptions clipped;
  clipped.clip_length = 3;
  const auto c = collaborate(bundle_from(s), w, clipped);
  CHECK(c.reference_frames == std::vector<int>{0, 3, 6});
  CHECK(c.masks.masks.size() == 9);

  CollaborationOptions none;
  none.mode = PropagationMode::NoMemory;
  const auto d = collaborate(bundle_from(s), w, none);
  CHECK(d.reference_frames == std::vector<int>{0, 1, 2});
  for (std::size_t t = 0; t < 9; ++t) CHECK(d.soft[t] == s.gt_masks[std::min<std::size_t>(t, 2)]);
}

TEST_CASE("upsample and binarize") {
  Tensor g(1, 2);
  g << 0.2f, 0.8f;
  const Tensor up = upsample_nodes(g, 16, 32);
  CHECK(up(15, 15) == 0.2f);
  CHECK(up(0, 16) == 0.8f);
  Tensor p(1, 3);
  p << 0.5f, 0.50196f, 0.0f;
  const Tensor b = binarize(p);
  CHECK(b(0, 0) == 0.0f);
  CHECK(b(0, 1) == 1.0f);
}
