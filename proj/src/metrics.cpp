#include "rankup/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rankup {
namespace {

void check_pair(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets, const char* who) {
  if (preds.size() == 0) throw shape_error(std::string(who) + ": empty input");
  if (preds.size() != targets.size()) {
    throw shape_error(std::string(who) + ": size mismatch (" + std::to_string(preds.size()) +
                      " vs " + std::to_string(targets.size()) + ")");
  }
  for (Eigen::Index i = 0; i < preds.size(); ++i) {
    if (!std::isfinite(preds(i)) || !std::isfinite(targets(i))) {
      throw numeric_error(std::string(who) + ": non-finite value at index " + std::to_string(i));
    }
  }
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* who) {
  const double n = static_cast<double>(a.size());
  const double ma = a.sum() / n;
  const double mb = b.sum() / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double da = a(i) - ma;
    const double db = b(i) - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    throw config_error(std::string(who) + ": correlation undefined for a constant input");
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

double mae(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
  check_pair(preds, targets, "mae");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < preds.size(); ++i) sum += std::abs(preds(i) - targets(i));
  return sum / static_cast<double>(preds.size());
}

double r2(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
  check_pair(preds, targets, "r2");
  const double mean_t = targets.sum() / static_cast<double>(targets.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (Eigen::Index i = 0; i < preds.size(); ++i) {
    const double e = targets(i) - preds(i);
    const double d = targets(i) - mean_t;
    ss_res += e * e;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0) {
    throw config_error("r2: undefined for constant targets");
  }
  return 1.0 - ss_res / ss_tot;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return v(a) < v(b); });

  Eigen::VectorXd ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const double shared = (static_cast<double>(i) + j) / 2.0 + 1.0;  // 1-based
    for (int k = i; k <= j; ++k) ranks(order[k]) = shared;
    i = j + 1;
  }
  return ranks;
}

double srcc(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
  check_pair(preds, targets, "srcc");
  if (preds.size() < 2) throw config_error("srcc: need at least two samples");
  return pearson(average_ranks(preds), average_ranks(targets), "srcc");
}

MetricsReport compute_metrics(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets) {
  MetricsReport r;
  r.mae = mae(preds, targets);
  r.r2 = r2(preds, targets);
  r.srcc = srcc(preds, targets);
  r.n = static_cast<int>(preds.size());
  return r;
}

}  // namespace rankup
