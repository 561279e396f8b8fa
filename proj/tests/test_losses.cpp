#include <doctest.h>

#include "htr/losses.hpp"
#include "support.hpp"

using namespace htr;
using namespace htr::losses;
using htr::test::Rng;

TEST_CASE("dice loss worked values") {
  const Tensor a = test::rect(4, 4, 0, 0, 2, 2);
  const Tensor b = test::rect(4, 4, 2, 2, 2, 2);
  CHECK(dice_loss(a, a) == 0.0);
  CHECK(dice_loss(a, b) == doctest::Approx(1.0 - 1.0 / 9.0).epsilon(1e-4));
  CHECK(dice_loss(Tensor::Zero(3, 3), Tensor::Zero(3, 3)) == 0.0);
  CHECK_THROWS_AS(dice_loss(a, Tensor::Zero(3, 3)), Error);
}

TEST_CASE("focal loss worked values") {
  const Tensor ones = Tensor::Ones(2, 2);
  CHECK(focal_loss(ones, ones) < 1e-12);
  Tensor p(1, 1), g(1, 1);
  p << 0.5f;
  g << 1.0f;
  CHECK(focal_loss(p, g) == doctest::Approx(0.25 * 0.25 * std::log(2.0)).epsilon(1e-4));

  Rng rng(50);
  const Tensor pred = test::uniform(rng, 3, 5, 0.01, 0.99);
  const Tensor gt = test::binary_mask(rng, 3, 5);
  const Tensor ce = binary_cross_entropy(pred, gt);
  CHECK(focal_loss(pred, gt, 0.5, 0.0) ==
        doctest::Approx(0.5 * ce.cast<double>().mean()).epsilon(1e-6));
  CHECK_THROWS_AS(focal_loss(pred, Tensor::Zero(5, 3)), Error);
}

TEST_CASE("GIoU worked values") {
  const BoxXYXY a{0, 0, 1, 1};
  const BoxXYXY b{1, 0, 2, 1};
  const BoxLosses same = box_losses(a, a);
  CHECK(same.l1 == 0.0);
  CHECK(same.giou == 0.0);
  CHECK(box_losses(a, b).giou == doctest::Approx(1.0).epsilon(1e-4));
  const BoxXYXY far{1000, 1000, 1001, 1001};
  CHECK(box_losses(a, far).giou == doctest::Approx(2.0).epsilon(1e-3));
  const BoxXYXY point{0.5, 0.5, 0.5, 0.5};
  CHECK(box_iou(point, point) == 0.0);
  CHECK(generalized_iou(point, point) == 0.0);
  CHECK_THROWS_AS(generalized_iou(BoxXYXY{1, 0, 0, 1}, a), Error);
}

TEST_CASE("GIoU loss equals one minus IoU without slack") {
  Rng rng(51);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double w = u(rng);
    const double h = u(rng);
    const double inner = std::uniform_real_distribution<double>(0.0, w)(rng);
    const BoxXYXY outer{0, 0, w, h};
    const BoxXYXY nested{0, 0, inner, h};
    CHECK(box_losses(nested, outer).giou ==
          doctest::Approx(1.0 - box_iou(nested, outer)).epsilon(1e-9));
  }
}

TEST_CASE("bootstrapped cross entropy worked values") {
  Rng rng(52);
  const Tensor pred = test::uniform(rng, 4, 4, 0.05, 0.95);
  const Tensor gt = test::binary_mask(rng, 4, 4);
  CHECK(bootstrapped_ce(pred, gt, 1.0) ==
        doctest::Approx(binary_cross_entropy(pred, gt).cast<double>().mean()).epsilon(1e-9));
  CHECK(bootstrapped_ce(gt, gt) < 1e-5);

  Tensor p(1, 4), g = Tensor::Ones(1, 4);
  p << static_cast<float>(std::exp(-1.0)), static_cast<float>(std::exp(-0.1)),
      static_cast<float>(std::exp(-0.1)), static_cast<float>(std::exp(-0.1));
  CHECK(bootstrapped_ce(p, g, 0.25) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK_THROWS_AS(bootstrapped_ce(p, g, 0.0), Error);
  CHECK_THROWS_AS(bootstrapped_ce(p, Tensor::Ones(4, 1)), Error);
}

TEST_CASE("losses are nonnegative") {
  Rng rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor pred = test::uniform(rng, 4, 3, 0, 1);
    const Tensor gt = test::binary_mask(rng, 4, 3);
    CHECK(dice_loss(pred, gt) >= 0.0);
    CHECK(focal_loss(pred, gt) >= 0.0);
    CHECK(bootstrapped_ce(pred, gt) >= 0.0);
  }
}

TEST_CASE("hungarian worked values and errors") {
  Matrix<double> a(2, 2);
  a << 1, 2, 2, 1;
  const Assignment x = hungarian_match(a);
  CHECK(x.row_to_col == std::vector<int>{0, 1});
  CHECK(x.cost == 2.0);
  a << 2, 1, 1, 2;
  const Assignment y = hungarian_match(a);
  CHECK(y.row_to_col == std::vector<int>{1, 0});
  CHECK(y.cost == 2.0);
  CHECK_THROWS_AS(hungarian_match(Matrix<double>::Zero(2, 3)), Error);
  Matrix<double> nan = Matrix<double>::Zero(2, 2);
  nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(hungarian_match(nan), Error);
  CHECK(hungarian_match(Matrix<double>(0, 0)).row_to_col.empty());
}

TEST_CASE("hungarian against brute force") {
  Rng rng(54);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = test::pick(rng, 1, 6);
    Matrix<double> cost(n, n);
    for (Eigen::Index i = 0; i < cost.size(); ++i) {
      cost.data()[i] = std::uniform_real_distribution<double>(-5, 5)(rng);
    }
    const Assignment got = hungarian_match(cost);
    oracle::Rows rows(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) rows[r].push_back(cost(r, c));
    }
    CHECK(got.cost == doctest::Approx(oracle::brute_force_assignment(rows).cost).epsilon(1e-12));
    CHECK(got.cost <= cost.trace() + 1e-12);
  }
}

namespace {

QueryPrediction prediction(Rng& rng, int frames, bool perfect, const ReferTarget& gt) {
  QueryPrediction q;
  for (int t = 0; t < frames; ++t) {
    if (perfect) {
      q.masks.push_back(gt.masks[t]);
      q.boxes.push_back(gt.boxes[t]);
      q.scores.push_back(1.0);
    } else {
      q.masks.push_back(test::uniform(rng, 4, 4, 0, 1));
      const double x = std::uniform_real_distribution<double>(0, 0.5)(rng);
      q.boxes.push_back({x, x, x + 0.4, x + 0.3});
      q.scores.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
    }
  }
  return q;
}

ReferTarget target(Rng& rng, int frames) {
  ReferTarget gt;
  for (int t = 0; t < frames; ++t) {
    gt.masks.push_back(test::binary_mask(rng, 4, 4));
    gt.boxes.push_back({0.1, 0.1, 0.6, 0.7});
  }
  return gt;
}

}  // namespace

TEST_CASE("refer_loss single perfect query") {
  Rng rng(55);
  const ReferTarget gt = target(rng, 2);
  const std::vector<QueryPrediction> q{prediction(rng, 2, true, gt)};
  const ReferLoss l = refer_loss(q, gt);
  CHECK(l.optimal_query == 0);
  CHECK(l.mask_term < 1e-5);
  CHECK(l.box_term == 0.0);
  CHECK(l.total < 1e-5);
}

TEST_CASE("refer_loss uses only the optimal query for mask and box") {
  Rng rng(56);
  const ReferTarget gt = target(rng, 3);
  const std::vector<QueryPrediction> q{prediction(rng, 3, true, gt), prediction(rng, 3, false, gt)};
  const LossWeights w;
  const ReferLoss l = refer_loss(q, gt, w);
  CHECK(l.optimal_query == 0);
  CHECK(l.mask_term == mask_loss(q[0], gt, w));
  CHECK(l.box_term == box_loss(q[0], gt, w));
  CHECK(l.score_terms[1] == w.focal * score_loss(q[1], 0.0));
}

TEST_CASE("refer_loss equals the independently summed components") {
  Rng rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    const int frames = test::pick(rng, 1, 3);
    const ReferTarget gt = target(rng, frames);
    std::vector<QueryPrediction> q;
    for (int i = 0; i < test::pick(rng, 1, 5); ++i) q.push_back(prediction(rng, frames, false, gt));
    const LossWeights w;
    const ReferLoss l = refer_loss(q, gt, w);
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      total += w.focal * score_loss(q[i], static_cast<int>(i) == l.optimal_query ? 1.0 : 0.0);
    }
    total += mask_loss(q[l.optimal_query], gt, w);
    total += box_loss(q[l.optimal_query], gt, w);
    CHECK(l.total == total);

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t o = 0; o < q.size(); ++o) {
      double t = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) t += w.focal * score_loss(q[i], i == o ? 1.0 : 0.0);
      t += mask_loss(q[o], gt, w) + box_loss(q[o], gt, w);
      best = std::min(best, t);
    }
    CHECK(l.total == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("refer_loss is monotone in each weight") {
  Rng rng(58);
  for (int trial = 0; trial < 40; ++trial) {
    const ReferTarget gt = target(rng, 2);
    std::vector<QueryPrediction> q;
    for (int i = 0; i < 3; ++i) q.push_back(prediction(rng, 2, false, gt));
    const LossWeights base;
    const double before = refer_loss(q, gt, base).total;
    for (int k = 0; k < 4; ++k) {
      LossWeights more = base;
      double* fields[] = {&more.dice, &more.l1, &more.focal, &more.giou};
      *fields[k] += std::uniform_real_distribution<double>(0.0, 3.0)(rng);
      CHECK(refer_loss(q, gt, more).total >= before - 1e-12);
    }
  }
}

TEST_CASE("refer_loss errors") {
  Rng rng(59);
  const ReferTarget gt = target(rng, 2);
  CHECK_THROWS_AS(refer_loss(std::vector<QueryPrediction>{}, gt), Error);
  std::vector<QueryPrediction> short_q{prediction(rng, 1, false, target(rng, 1))};
  CHECK_THROWS_AS(refer_loss(short_q, gt), Error);
}

TEST_CASE("propagation and training losses") {
  Rng rng(60);
  std::vector<Tensor> pred{test::uniform(rng, 4, 4, 0, 1), test::uniform(rng, 4, 4, 0, 1)};
  std::vector<Tensor> gt{test::binary_mask(rng, 4, 4), test::binary_mask(rng, 4, 4)};
  const LossWeights w;
  const double expect = (w.ce * (bootstrapped_ce(pred[0], gt[0]) + dice_loss(pred[0], gt[0])) +
                         w.ce * (bootstrapped_ce(pred[1], gt[1]) + dice_loss(pred[1], gt[1]))) /
                        2.0;
  const double prop = propagation_loss(pred, gt, w);
  CHECK(prop == doctest::Approx(expect).epsilon(1e-12));
  std::vector<Tensor> one{gt[0]};
  CHECK_THROWS_AS(propagation_loss(pred, one, w), Error);
  CHECK_THROWS_AS(propagation_loss(std::vector<Tensor>{}, std::vector<Tensor>{}, w), Error);

  const ReferTarget t = target(rng, 1);
  const std::vector<QueryPrediction> q{prediction(rng, 1, false, t)};
  const ReferLoss r = refer_loss(q, t);
  CHECK(train_loss(r, prop) == r.total + prop);
}
