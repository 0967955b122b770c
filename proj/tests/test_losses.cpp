#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rankup/losses.hpp"

using namespace rankup;

namespace {

const double kLn2 = std::log(2.0);

Eigen::VectorXd randn(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

// Central differences on the score vector itself; losses are smooth in the
// scores away from MAE kinks, so 1e-6 steps give ~1e-9 accuracy.
template <typename Fn>
Eigen::VectorXd fd_grad(const Eigen::VectorXd& s, const Fn& value_at) {
  Eigen::VectorXd g(s.size());
  const double eps = 1e-6;
  for (int i = 0; i < s.size(); ++i) {
    Eigen::VectorXd up = s;
    Eigen::VectorXd down = s;
    up(i) += eps;
    down(i) -= eps;
    g(i) = (value_at(up) - value_at(down)) / (2.0 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("regression loss values and gradients") {
  Eigen::VectorXd p(2);
  Eigen::VectorXd t(2);
  p << 1.0, 3.0;
  t << 0.0, 0.0;

  const LossGrad m = regression_loss(p, t, RegressionCriterion::Mae);
  CHECK(m.value == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(m.grad(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m.grad(1) == doctest::Approx(0.5).epsilon(1e-15));

  const LossGrad s = regression_loss(p, t, RegressionCriterion::Mse);
  CHECK(s.value == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s.grad(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.grad(1) == doctest::Approx(3.0).epsilon(1e-15));

  SUBCASE("exact match gives zero loss") {
    const LossGrad z = regression_loss(t, t, RegressionCriterion::Mae);
    CHECK(z.value == 0.0);
    CHECK(z.grad.isZero(0.0));
  }

  SUBCASE("tie has zero subgradient") {
    Eigen::VectorXd a(3);
    Eigen::VectorXd b(3);
    a << 1.0, 2.0, 3.0;
    b << 1.0, 5.0, 1.0;
    const LossGrad g = regression_loss(a, b, RegressionCriterion::Mae);
    CHECK(g.grad(0) == 0.0);
    CHECK(g.grad(1) < 0.0);
    CHECK(g.grad(2) > 0.0);
  }

  SUBCASE("matches scratch oracle on random instances") {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 50; ++it) {
      const Eigen::VectorXd a = randn(5, rng);
      const Eigen::VectorXd b = randn(5, rng);
      const auto om = oracle::mae(a, b);
      const auto os = oracle::mse(a, b);
      const LossGrad lm = regression_loss(a, b, RegressionCriterion::Mae);
      const LossGrad ls = regression_loss(a, b, RegressionCriterion::Mse);
      CHECK(lm.value == doctest::Approx(om.value).epsilon(1e-12));
      CHECK(ls.value == doctest::Approx(os.value).epsilon(1e-12));
      CHECK((lm.grad - om.grad).lpNorm<Eigen::Infinity>() < 1e-12);
      CHECK((ls.grad - os.grad).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }

  SUBCASE("length mismatch is a shape error") {
    Eigen::VectorXd short_t(1);
    short_t << 0.0;
    CHECK_THROWS_AS(regression_loss(p, short_t, RegressionCriterion::Mae), shape_error);
    CHECK_THROWS_AS(regression_loss(Eigen::VectorXd(), Eigen::VectorXd(),
                                    RegressionCriterion::Mse),
                    shape_error);
  }
}

TEST_CASE("pairwise probability") {
  CHECK(ranknet_pair_prob(1.5, 1.5).p == 0.5);
  CHECK(ranknet_pair_prob(50.0, 0.0).p == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ranknet_pair_prob(0.0, 800.0).p >= 0.0);  // no overflow
  CHECK(std::isfinite(ranknet_pair_prob(0.0, 800.0).p));

  std::mt19937_64 rng(11);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd s = randn(2, rng, 3.0);
    const double sum = ranknet_pair_prob(s(0), s(1)).p + ranknet_pair_prob(s(1), s(0)).p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("ranknet loss") {
  SUBCASE("single sample with soft target is ln 2 at zero gradient") {
    Eigen::VectorXd s(1);
    s << 0.7;
    const LossGrad g = ranknet_loss(s, [](int, int) { return 0.5; });
    CHECK(g.value == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(g.grad(0) == 0.0);
  }

  SUBCASE("equal scores with all-tie targets sit at the stationary point") {
    const Eigen::VectorXd s = Eigen::VectorXd::Constant(4, 2.5);
    const LossGrad g = ranknet_loss(s, [](int, int) { return 0.5; });
    CHECK(g.value == doctest::Approx(kLn2).epsilon(1e-14));
    CHECK(g.grad.lpNorm<Eigen::Infinity>() < 1e-15);
  }

  SUBCASE("matches brute-force oracle including ties") {
    std::mt19937_64 rng(23);
    for (int it = 0; it < 60; ++it) {
      const int n = 2 + int(rng() % 5);
      const Eigen::VectorXd s = randn(n, rng, 2.0);
      Eigen::VectorXd y = randn(n, rng);
      y(0) = y(n - 1);  // force one tie pair
      const PairTargetFn targets = pairwise_targets_from_labels(y);
      const LossGrad got = ranknet_loss(s, targets);
      const auto want = oracle::ranknet(s, [&](int i, int j) { return targets(i, j); });
      CHECK(got.value == doctest::Approx(want.value).epsilon(1e-10));
      CHECK((got.grad - want.grad).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }

  SUBCASE("gradient matches finite differences on the scores") {
    std::mt19937_64 rng(31);
    const Eigen::VectorXd s = randn(5, rng, 1.5);
    const Eigen::VectorXd y = randn(5, rng);
    const PairTargetFn targets = pairwise_targets_from_labels(y);
    const LossGrad got = ranknet_loss(s, targets);
    const Eigen::VectorXd fd =
        fd_grad(s, [&](const Eigen::VectorXd& v) { return ranknet_loss(v, targets).value; });
    CHECK((got.grad - fd).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  SUBCASE("pairwise targets follow the label order") {
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 1.0;
    const PairTargetFn t = pairwise_targets_from_labels(y);
    CHECK(t(1, 0) == 1.0);
    CHECK(t(0, 1) == 0.0);
    CHECK(t(0, 2) == 0.5);
    CHECK(t(0, 0) == 0.5);
  }

  SUBCASE("invalid targets are rejected") {
    Eigen::VectorXd s(2);
    s << 0.0, 1.0;
    CHECK_THROWS_AS(ranknet_loss(s, [](int, int) { return 0.3; }), contract_error);
    CHECK_THROWS_AS(ranknet_loss(Eigen::VectorXd(), [](int, int) { return 0.5; }), shape_error);
  }
}

TEST_CASE("pair softmax of the ranking head") {
  CHECK(arc_pair_softmax(1.0, 1.0).p_outranks == 0.5);
  CHECK(arc_pair_softmax(1.0, 1.0).p_outranked == 0.5);

  std::mt19937_64 rng(37);
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd r = randn(2, rng, 2.0);
    const PairSoftmax ps = arc_pair_softmax(r(0), r(1));
    CHECK(ps.p_outranks == doctest::Approx(oracle::pair_softmax_p1(r(0), r(1))).epsilon(1e-12));
    CHECK(ps.p_outranks + ps.p_outranked == doctest::Approx(1.0).epsilon(1e-12));
    // Antisymmetry between the two orders.
    CHECK(ps.p_outranks + arc_pair_softmax(r(1), r(0)).p_outranks ==
          doctest::Approx(1.0).epsilon(1e-12));
    // Shift invariance.
    const PairSoftmax shifted = arc_pair_softmax(r(0) + 13.25, r(1) + 13.25);
    CHECK(shifted.p_outranks == doctest::Approx(ps.p_outranks).epsilon(1e-12));
  }
}

TEST_CASE("labeled ranking-head loss") {
  SUBCASE("two samples with equal scores average four ln 2 terms") {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd y(2);
    y << 1.0, 2.0;
    const LossGrad g = arc_labeled_loss(r, y);
    CHECK(g.value == doctest::Approx(kLn2).epsilon(1e-14));
  }

  SUBCASE("a single sample sees only its diagonal pair: ln 2, zero gradient") {
    Eigen::VectorXd r(1);
    Eigen::VectorXd y(1);
    r << 4.2;
    y << 1.0;
    const LossGrad g = arc_labeled_loss(r, y);
    CHECK(g.value == doctest::Approx(kLn2).epsilon(1e-15));
    CHECK(g.grad(0) == 0.0);
  }

  SUBCASE("matches brute-force oracle") {
    std::mt19937_64 rng(41);
    for (int it = 0; it < 60; ++it) {
      const int n = 2 + int(rng() % 4);
      const Eigen::VectorXd r = randn(n, rng, 2.0);
      Eigen::VectorXd y = randn(n, rng);
      if (it % 3 == 0) y(0) = y(n - 1);  // exercise the tie rule
      const LossGrad got = arc_labeled_loss(r, y);
      const auto want = oracle::arc_labeled(r, y);
      CHECK(got.value == doctest::Approx(want.value).epsilon(1e-10));
      CHECK((got.grad - want.grad).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }

  SUBCASE("gradient matches finite differences") {
    std::mt19937_64 rng(43);
    const Eigen::VectorXd r = randn(4, rng);
    const Eigen::VectorXd y = randn(4, rng);
    const LossGrad got = arc_labeled_loss(r, y);
    const Eigen::VectorXd fd =
        fd_grad(r, [&](const Eigen::VectorXd& v) { return arc_labeled_loss(v, y).value; });
    CHECK((got.grad - fd).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  SUBCASE("loss value is invariant to shifting all scores") {
    std::mt19937_64 rng(47);
    const Eigen::VectorXd r = randn(5, rng);
    const Eigen::VectorXd y = randn(5, rng);
    const double base = arc_labeled_loss(r, y).value;
    const double shifted = arc_labeled_loss(r.array() + 7.5, y).value;
    CHECK(shifted == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("thresholded consistency loss of the ranking head") {
  ArcLossConfig cfg;

  SUBCASE("tau = 1 keeps nothing") {
    std::mt19937_64 rng(53);
    cfg.tau = 1.0;
    const Eigen::VectorXd w = randn(5, rng, 3.0);
    const Eigen::VectorXd s = randn(5, rng, 3.0);
    const FixmatchPairLoss g = arc_unlabeled_fixmatch_loss(w, s, cfg);
    CHECK(g.value == 0.0);
    CHECK(g.mask_rate == 0.0);
    CHECK(g.grad_strong.isZero(0.0));
  }

  SUBCASE("confidence comparison is strictly greater-than") {
    Eigen::VectorXd w(2);
    w << 0.0, -1.6;  // max weak prob = sigmoid(3.2) on the off-diagonal pairs
    Eigen::VectorXd s(2);
    s << 0.3, 0.1;
    const double conf = std::max(arc_pair_softmax(w(0), w(1)).p_outranks,
                                 arc_pair_softmax(w(0), w(1)).p_outranked);
    cfg.tau = conf;  // exactly at the confidence: excluded
    CHECK(arc_unlabeled_fixmatch_loss(w, s, cfg).mask_rate == 0.0);
    cfg.tau = conf - 1e-9;  // just below: both off-diagonal pairs pass
    CHECK(arc_unlabeled_fixmatch_loss(w, s, cfg).mask_rate == doctest::Approx(0.5));
  }

  SUBCASE("0.96-confidence pairs pass tau 0.95 while 0.90 pairs do not") {
    const double d96 = 0.5 * std::log(0.96 / 0.04);  // sigmoid(2 d) = 0.96
    const double d90 = 0.5 * std::log(0.90 / 0.10);
    Eigen::VectorXd s(2);
    s << 0.0, 0.0;
    cfg.tau = 0.95;
    Eigen::VectorXd w96(2);
    w96 << d96, 0.0;
    CHECK(arc_unlabeled_fixmatch_loss(w96, s, cfg).mask_rate == doctest::Approx(0.5));
    Eigen::VectorXd w90(2);
    w90 << d90, 0.0;
    CHECK(arc_unlabeled_fixmatch_loss(w90, s, cfg).mask_rate == 0.0);
  }

  SUBCASE("diagonal pairs never pass any valid tau") {
    Eigen::VectorXd one(1);
    one << 3.0;
    cfg.tau = 0.51;
    const FixmatchPairLoss g = arc_unlabeled_fixmatch_loss(one, one, cfg);
    CHECK(g.value == 0.0);
    CHECK(g.mask_rate == 0.0);
  }

  SUBCASE("matches brute-force oracle at tau 0.7") {
    std::mt19937_64 rng(59);
    cfg.tau = 0.7;
    for (int it = 0; it < 60; ++it) {
      const int n = 2 + int(rng() % 3);
      const Eigen::VectorXd w = randn(n, rng, 1.5);
      const Eigen::VectorXd s = randn(n, rng, 1.5);
      const FixmatchPairLoss got = arc_unlabeled_fixmatch_loss(w, s, cfg);
      const auto want = oracle::fixmatch(w, s, cfg.tau);
      CHECK(got.value == doctest::Approx(want.value).epsilon(1e-10));
      CHECK(got.mask_rate == doctest::Approx(want.mask_rate).epsilon(1e-15));
      CHECK((got.grad_strong - want.grad_strong).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }

  SUBCASE("normalization divides by all pairs, kept or not") {
    // Weak separations: |0 - 5| pairs sit at sigmoid(+-10) ~ 0.99995 and the
    // (0,1)/(1,0) pair at sigmoid(+-20). A threshold between the two keeps
    // exactly that one strongly separated pair in each direction.
    Eigen::VectorXd w(3);
    w << 5.0, -5.0, 0.0;
    Eigen::VectorXd s(3);
    s << 0.2, -0.1, 0.0;
    cfg.tau = 0.99999;
    const FixmatchPairLoss g = arc_unlabeled_fixmatch_loss(w, s, cfg);
    // Pairs (0,1) and (1,0) pass; their CE sums are divided by 9, not 2.
    const double ce01 = oracle::ce(1.0, oracle::pair_softmax_p1(s(0), s(1)));
    const double ce10 = oracle::ce(0.0, oracle::pair_softmax_p1(s(1), s(0)));
    CHECK(g.value == doctest::Approx((ce01 + ce10) / 9.0).epsilon(1e-12));
    CHECK(g.mask_rate == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
  }

  SUBCASE("gradient flows through strong scores only, matching finite differences") {
    std::mt19937_64 rng(61);
    cfg.tau = 0.7;
    const Eigen::VectorXd w = randn(4, rng, 2.0);
    const Eigen::VectorXd s = randn(4, rng);
    const FixmatchPairLoss got = arc_unlabeled_fixmatch_loss(w, s, cfg);
    const Eigen::VectorXd fd = fd_grad(
        s, [&](const Eigen::VectorXd& v) { return arc_unlabeled_fixmatch_loss(w, v, cfg).value; });
    CHECK((got.grad_strong - fd).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  SUBCASE("mask rate is non-increasing in tau") {
    std::mt19937_64 rng(67);
    const Eigen::VectorXd w = randn(8, rng, 2.0);
    const Eigen::VectorXd s = randn(8, rng);
    double prev = 1.0;
    for (double tau : {0.55, 0.7, 0.9, 0.99, 1.0}) {
      cfg.tau = tau;
      const double rate = arc_unlabeled_fixmatch_loss(w, s, cfg).mask_rate;
      CHECK(rate <= prev);
      prev = rate;
    }
  }

  SUBCASE("config validation") {
    cfg.tau = 0.5;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg.tau = 1.0001;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg.tau = 0.95;
    cfg.omega_ulb = -0.1;
    CHECK_THROWS_AS(cfg.validate(), config_error);
  }
}

TEST_CASE("warm-up factor") {
  CHECK(warmup_factor(100, 100) == 1.0);
  CHECK(warmup_factor(50, 100) == 0.5);
  CHECK(warmup_factor(1000, 100) == 1.0);
  CHECK(warmup_factor(0, 100) == 0.0);
  CHECK_THROWS_AS(warmup_factor(5, 0), config_error);
  CHECK_THROWS_AS(warmup_factor(-1, 10), contract_error);
}

TEST_CASE("combined objective arithmetic") {
  CHECK(rankup_total_loss(1.7, 9.0, 4.0, 0.0, 0.0, 10, 100) == 1.7);
  CHECK(rankup_total_loss(1.0, 2.0, 3.0, 1.0, 0.2, 100, 100) ==
        doctest::Approx(3.6).epsilon(1e-15));
  CHECK(rankup_total_loss(1.0, 2.0, 3.0, 1.0, 0.2, 0, 100) ==
        doctest::Approx(1.6).epsilon(1e-15));
  CHECK_THROWS_AS(rankup_total_loss(1.0, 1.0, 1.0, -1.0, 0.2, 1, 10), config_error);
}
