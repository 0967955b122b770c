#include "rankup/rda.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rankup {

LabeledDistribution interpolate_labeled_distribution(const Eigen::VectorXd& labeled_labels, int m) {
  const int k = static_cast<int>(labeled_labels.size());
  if (k < 2) {
    throw config_error("interpolate_labeled_distribution: need at least 2 labeled labels, got " +
                       std::to_string(k));
  }
  if (m < 1) {
    throw config_error("interpolate_labeled_distribution: m must be >= 1, got " +
                       std::to_string(m));
  }
  for (int i = 0; i < k; ++i) {
    if (!std::isfinite(labeled_labels(i))) {
      throw numeric_error("interpolate_labeled_distribution: non-finite label at index " +
                          std::to_string(i));
    }
  }

  std::vector<double> v(labeled_labels.data(), labeled_labels.data() + k);
  std::sort(v.begin(), v.end());

  LabeledDistribution dist;
  dist.sorted_values.resize(m);
  if (m == 1) {
    dist.sorted_values(0) = v[(k - 1) / 2];
    return dist;
  }
  for (int t = 0; t < m; ++t) {
    const double pos = static_cast<double>(t) * (k - 1) / (m - 1);
    const int i0 = std::min(static_cast<int>(pos), k - 2);
    const double frac = pos - i0;
    const double lo = v[i0];
    const double hi = v[i0 + 1];
    // Blending equal endpoints can wobble by a ulp; keep flat segments exact.
    dist.sorted_values(t) = lo == hi ? lo : lo * (1.0 - frac) + hi * frac;
  }
  // The blend is monotone only up to rounding, so enforce the ascending
  // guarantee that align() relies on.
  std::sort(dist.sorted_values.data(), dist.sorted_values.data() + m);
  return dist;
}

Eigen::VectorXd align(const Eigen::VectorXd& pseudo_labels, const LabeledDistribution& dist) {
  const int n = static_cast<int>(pseudo_labels.size());
  if (n == 0) throw shape_error("align: empty pseudo-label vector");
  if (dist.m() != n) {
    throw shape_error("align: " + std::to_string(n) + " pseudo-labels vs " +
                      std::to_string(dist.m()) + " distribution values");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pseudo_labels(a) < pseudo_labels(b); });

  Eigen::VectorXd aligned(n);
  for (int t = 0; t < n; ++t) aligned(order[t]) = dist.sorted_values(t);
  return aligned;
}

void RdaConfig::validate() const {
  if (refresh_period < 1) throw config_error("rda.refresh_period must be >= 1");
  if (!(omega_rda >= 0.0)) throw config_error("rda.omega_rda must be >= 0");
  if (alpha_warm < 1) throw config_error("rda.alpha_warm must be >= 1");
}

PseudoLabelTable::PseudoLabelTable(int n_unlabeled) {
  if (n_unlabeled < 1) {
    throw config_error("PseudoLabelTable: need at least one unlabeled sample, got " +
                       std::to_string(n_unlabeled));
  }
  raw_ = Eigen::VectorXd::Zero(n_unlabeled);
  aligned_ = Eigen::VectorXd::Zero(n_unlabeled);
}

void PseudoLabelTable::update(const std::vector<int>& positions, const Eigen::VectorXd& preds) {
  if (static_cast<Eigen::Index>(positions.size()) != preds.size()) {
    throw shape_error("PseudoLabelTable::update: " + std::to_string(positions.size()) +
                      " positions vs " + std::to_string(preds.size()) + " predictions");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const int pos = positions[i];
    if (pos < 0 || pos >= size()) {
      throw contract_error("PseudoLabelTable::update: unknown unlabeled position " +
                           std::to_string(pos));
    }
    if (!std::isfinite(preds(static_cast<Eigen::Index>(i)))) {
      throw numeric_error("PseudoLabelTable::update: non-finite prediction " +
                          std::to_string(preds(static_cast<Eigen::Index>(i))) + " for position " +
                          std::to_string(pos));
    }
    raw_(pos) = preds(static_cast<Eigen::Index>(i));
  }
}

bool PseudoLabelTable::maybe_refresh(const Eigen::VectorXd& labeled_labels, long iter,
                                     const RdaConfig& cfg) {
  cfg.validate();
  const bool bootstrap = !initialized_;
  if (!bootstrap && iter % cfg.refresh_period != 0) return false;

  const LabeledDistribution dist = interpolate_labeled_distribution(labeled_labels, size());
  aligned_ = align(raw_, dist);
  initialized_ = true;
  last_refresh_iter_ = iter;
  if (bootstrap) {
    ++bootstrap_aligns_;
  } else {
    ++scheduled_aligns_;
  }
  return true;
}

RdaBatchLoss rda_batch_loss(const PseudoLabelTable& table, const std::vector<int>& positions,
                            const Eigen::VectorXd& reg_preds, RegressionCriterion criterion) {
  if (static_cast<Eigen::Index>(positions.size()) != reg_preds.size()) {
    throw shape_error("rda_batch_loss: " + std::to_string(positions.size()) + " positions vs " +
                      std::to_string(reg_preds.size()) + " predictions");
  }
  RdaBatchLoss out;
  if (!table.initialized()) {
    out.grad = Eigen::VectorXd::Zero(reg_preds.size());
    return out;
  }

  Eigen::VectorXd targets(reg_preds.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const int pos = positions[i];
    if (pos < 0 || pos >= table.size()) {
      throw contract_error("rda_batch_loss: unknown unlabeled position " + std::to_string(pos));
    }
    targets(static_cast<Eigen::Index>(i)) = table.aligned()(pos);
  }
  const LossGrad lg = regression_loss(reg_preds, targets, criterion);
  out.value = lg.value;
  out.grad = lg.grad;
  out.table_ready = true;
  return out;
}

}  // namespace rankup
