#pragma once

#include <Eigen/Dense>

#include "rankup/common.hpp"

namespace rankup {

/// Mean absolute error. Inputs must be same-length, non-empty, finite.
double mae(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

/// Coefficient of determination: 1 - sum (t - p)^2 / sum (t - mean(t))^2.
/// Constant targets make the denominator zero; that raises config_error
/// instead of returning a silent NaN.
double r2(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

/// Fractional average ranks (1-based); tied values share the mean of the
/// positions they span.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& v);

/// Spearman rank correlation, computed as the Pearson correlation of the
/// average-rank vectors so that ties are handled exactly. Either input being
/// rank-constant leaves the correlation undefined and raises config_error.
double srcc(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

struct MetricsReport {
  double mae = 0.0;
  double r2 = 0.0;
  double srcc = 0.0;
  int n = 0;
};

MetricsReport compute_metrics(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets);

}  // namespace rankup
