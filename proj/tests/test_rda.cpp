#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rankup/rda.hpp"

using namespace rankup;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<int>(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Eigen::VectorXd randn(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace

TEST_CASE("labeled distribution interpolation") {
  SUBCASE("three labels stretched onto five positions") {
    const LabeledDistribution d = interpolate_labeled_distribution(vec({2, 5, 8}), 5);
    const Eigen::VectorXd want = vec({2, 3.5, 5, 6.5, 8});
    REQUIRE(d.m() == 5);
    for (int i = 0; i < 5; ++i) CHECK(d.sorted_values(i) == doctest::Approx(want(i)).epsilon(1e-15));
  }

  SUBCASE("m equal to k reproduces the sorted labels") {
    const LabeledDistribution d = interpolate_labeled_distribution(vec({8, 2, 5}), 3);
    CHECK(d.sorted_values(0) == 2.0);
    CHECK(d.sorted_values(1) == 5.0);
    CHECK(d.sorted_values(2) == 8.0);
  }

  SUBCASE("m = 2 anchors the endpoints") {
    const LabeledDistribution d = interpolate_labeled_distribution(vec({1, 1, 1, 9}), 2);
    CHECK(d.sorted_values(0) == 1.0);
    CHECK(d.sorted_values(1) == 9.0);
  }

  SUBCASE("m = 1 degenerates to the lower median") {
    CHECK(interpolate_labeled_distribution(vec({2, 5, 8}), 1).sorted_values(0) == 5.0);
    CHECK(interpolate_labeled_distribution(vec({1, 1, 1, 9}), 1).sorted_values(0) == 1.0);
  }

  SUBCASE("fewer than two labels is an error") {
    CHECK_THROWS_AS(interpolate_labeled_distribution(vec({3}), 4), config_error);
    CHECK_THROWS_AS(interpolate_labeled_distribution(vec({3, 4}), 0), config_error);
  }

  SUBCASE("output is non-decreasing with anchored extremes, random instances") {
    std::mt19937_64 rng(3);
    for (int it = 0; it < 100; ++it) {
      const int k = 2 + int(rng() % 15);
      const int m = 1 + int(rng() % 63);
      const Eigen::VectorXd labels = randn(k, rng, 5.0);
      const LabeledDistribution d = interpolate_labeled_distribution(labels, m);
      REQUIRE(d.m() == m);
      for (int i = 1; i < m; ++i) CHECK(d.sorted_values(i) >= d.sorted_values(i - 1));
      if (m >= 2) {
        CHECK(d.sorted_values(0) == labels.minCoeff());
        CHECK(d.sorted_values(m - 1) == labels.maxCoeff());
      }
      const Eigen::VectorXd want = oracle::interpolate(labels, m);
      CHECK((d.sorted_values - want).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("rank-preserving alignment") {
  const LabeledDistribution dist = interpolate_labeled_distribution(vec({2, 5, 8}), 5);

  SUBCASE("worked example") {
    const Eigen::VectorXd aligned = align(vec({1.0, 9.0, 4.0, 3.0, 7.0}), dist);
    const Eigen::VectorXd want = vec({2, 8, 5, 3.5, 6.5});
    CHECK((aligned - want).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("already-aligned input is a fixed point") {
    const Eigen::VectorXd aligned = align(dist.sorted_values, dist);
    CHECK((aligned - dist.sorted_values).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("all-equal pseudo-labels receive the distribution in index order") {
    const Eigen::VectorXd aligned = align(Eigen::VectorXd::Constant(5, 0.3), dist);
    CHECK((aligned - dist.sorted_values).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("length mismatch is a shape error") {
    CHECK_THROWS_AS(align(vec({1, 2}), dist), shape_error);
    CHECK_THROWS_AS(align(Eigen::VectorXd(), dist), shape_error);
  }

  SUBCASE("properties on random instances") {
    std::mt19937_64 rng(17);
    for (int it = 0; it < 200; ++it) {
      const int k = 2 + int(rng() % 15);
      const int m = 2 + int(rng() % 63);
      const Eigen::VectorXd labels = randn(k, rng, 3.0);
      const LabeledDistribution d = interpolate_labeled_distribution(labels, m);
      Eigen::VectorXd pseudo = randn(m, rng, 2.0);
      if (it % 4 == 0) pseudo(0) = pseudo(m - 1);  // tie among pseudo-labels

      const Eigen::VectorXd aligned = align(pseudo, d);

      // Multiset conservation, exact.
      Eigen::VectorXd a = aligned;
      Eigen::VectorXd b = d.sorted_values;
      std::sort(a.data(), a.data() + m);
      CHECK((a - b).lpNorm<Eigen::Infinity>() == 0.0);

      // Rank preservation and range containment.
      for (int i = 0; i < m; ++i) {
        CHECK(aligned(i) >= labels.minCoeff());
        CHECK(aligned(i) <= labels.maxCoeff());
        for (int j = 0; j < m; ++j) {
          if (pseudo(i) < pseudo(j)) CHECK(aligned(i) <= aligned(j));
        }
      }

      // Exhaustive assignment oracle, both sort directions. Descending
      // pairing only matches per-index when pseudo has no ties; with ties the
      // stable order differs though the multiset result does not.
      const Eigen::VectorXd want = oracle::align(pseudo, d.sorted_values, false);
      CHECK((aligned - want).lpNorm<Eigen::Infinity>() == 0.0);
      bool has_tie = false;
      for (int i = 0; i < m && !has_tie; ++i) {
        for (int j = i + 1; j < m; ++j) {
          if (pseudo(i) == pseudo(j)) {
            has_tie = true;
            break;
          }
        }
      }
      if (!has_tie) {
        const Eigen::VectorXd want_desc = oracle::align(pseudo, d.sorted_values, true);
        CHECK((aligned - want_desc).lpNorm<Eigen::Infinity>() == 0.0);
      }

      // Idempotence needs distinct distribution values.
      bool distinct = true;
      for (int i = 1; i < m && distinct; ++i) {
        distinct = d.sorted_values(i) != d.sorted_values(i - 1);
      }
      if (distinct) {
        const Eigen::VectorXd twice = align(aligned, d);
        CHECK((twice - aligned).lpNorm<Eigen::Infinity>() == 0.0);
      }
    }
  }
}

TEST_CASE("pseudo-label table") {
  RdaConfig cfg;
  cfg.refresh_period = 4;
  const Eigen::VectorXd labels = vec({2, 5, 8});

  SUBCASE("construction and update semantics") {
    PseudoLabelTable t(5);
    CHECK(t.size() == 5);
    CHECK_FALSE(t.initialized());
    CHECK(t.last_refresh_iter() == -1);

    t.update({3}, vec({1.5}));
    t.update({3}, vec({2.5}));
    CHECK(t.raw()(3) == 2.5);

    t.update({}, Eigen::VectorXd());  // no-op

    CHECK_THROWS_AS(t.update({7}, vec({1.0})), contract_error);
    CHECK_THROWS_AS(t.update({0}, vec({std::numeric_limits<double>::quiet_NaN()})),
                    numeric_error);
    CHECK_THROWS_AS(t.update({0, 1}, vec({1.0})), shape_error);
    CHECK_THROWS_AS(PseudoLabelTable(0), config_error);
  }

  SUBCASE("first call bootstraps regardless of schedule") {
    PseudoLabelTable t(5);
    t.update({0, 1, 2, 3, 4}, vec({1.0, 9.0, 4.0, 3.0, 7.0}));
    CHECK(t.maybe_refresh(labels, 3, cfg));  // 3 % 4 != 0 but table empty
    CHECK(t.initialized());
    CHECK(t.last_refresh_iter() == 3);
    CHECK(t.bootstrap_aligns() == 1);
    CHECK(t.scheduled_aligns() == 0);
    CHECK((t.aligned() - vec({2, 8, 5, 3.5, 6.5})).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("off-schedule calls on an initialized table do nothing") {
    PseudoLabelTable t(3);
    t.update({0, 1, 2}, vec({0.3, 0.1, 0.2}));
    CHECK(t.maybe_refresh(labels, 1, cfg));
    t.update({0}, vec({-5.0}));
    CHECK_FALSE(t.maybe_refresh(labels, 5, cfg));  // 5 % 4 != 0
    CHECK(t.last_refresh_iter() == 1);
    CHECK(t.maybe_refresh(labels, 8, cfg));  // 8 % 4 == 0
    CHECK(t.last_refresh_iter() == 8);
    CHECK(t.aligned()(0) == 2.0);  // -5.0 is now the smallest raw entry
  }

  SUBCASE("alignment counters amortize to one refresh per period") {
    RdaConfig slow;
    slow.refresh_period = 1024;
    PseudoLabelTable t(6);
    std::mt19937_64 rng(5);
    for (long iter = 1; iter <= 4096; ++iter) {
      t.update({int(rng() % 6)}, vec({std::normal_distribution<double>()(rng)}));
      t.maybe_refresh(labels, iter, slow);
    }
    CHECK(t.bootstrap_aligns() == 1);
    CHECK(t.scheduled_aligns() == 4);
    CHECK(t.total_aligns() == 5);
  }

  SUBCASE("refresh every call when the period is one") {
    RdaConfig fast;
    fast.refresh_period = 1;
    PseudoLabelTable t(3);
    t.update({0, 1, 2}, vec({1.0, 2.0, 3.0}));
    for (long iter = 1; iter <= 7; ++iter) CHECK(t.maybe_refresh(labels, iter, fast));
    CHECK(t.total_aligns() == 7);
  }

  SUBCASE("config validation") {
    RdaConfig bad;
    bad.refresh_period = 0;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = RdaConfig{};
    bad.omega_rda = -1.0;
    CHECK_THROWS_AS(bad.validate(), config_error);
    bad = RdaConfig{};
    bad.alpha_warm = 0;
    CHECK_THROWS_AS(bad.validate(), config_error);
  }
}

TEST_CASE("pseudo-label batch loss") {
  const Eigen::VectorXd labels = vec({2, 5, 8});
  PseudoLabelTable t(5);
  t.update({0, 1, 2, 3, 4}, vec({1.0, 9.0, 4.0, 3.0, 7.0}));

  SUBCASE("uninitialized table yields exactly zero with a flag") {
    const RdaBatchLoss g = rda_batch_loss(t, {0, 2}, vec({0.4, 0.6}), RegressionCriterion::Mse);
    CHECK_FALSE(g.table_ready);
    CHECK(g.value == 0.0);
    CHECK(g.grad.isZero(0.0));
  }

  RdaConfig cfg;
  t.maybe_refresh(labels, 1, cfg);
  // aligned = [2, 8, 5, 3.5, 6.5]

  SUBCASE("predictions equal to the aligned targets give zero loss") {
    const RdaBatchLoss g = rda_batch_loss(t, {1, 3}, vec({8.0, 3.5}), RegressionCriterion::Mae);
    CHECK(g.table_ready);
    CHECK(g.value == 0.0);
  }

  SUBCASE("equals the regression loss against looked-up targets") {
    std::mt19937_64 rng(29);
    for (int it = 0; it < 40; ++it) {
      const std::vector<int> pos = {int(rng() % 5), int(rng() % 5), int(rng() % 5)};
      const Eigen::VectorXd preds = randn(3, rng, 4.0);
      Eigen::VectorXd targets(3);
      for (int i = 0; i < 3; ++i) targets(i) = t.aligned()(pos[i]);
      for (RegressionCriterion c : {RegressionCriterion::Mae, RegressionCriterion::Mse}) {
        const RdaBatchLoss got = rda_batch_loss(t, pos, preds, c);
        const LossGrad want = regression_loss(preds, targets, c);
        CHECK(got.value == want.value);
        CHECK((got.grad - want.grad).lpNorm<Eigen::Infinity>() == 0.0);
      }
    }
  }

  SUBCASE("bad positions and shapes are rejected") {
    CHECK_THROWS_AS(rda_batch_loss(t, {9}, vec({1.0}), RegressionCriterion::Mae),
                    contract_error);
    CHECK_THROWS_AS(rda_batch_loss(t, {0, 1}, vec({1.0}), RegressionCriterion::Mae),
                    shape_error);
  }
}
