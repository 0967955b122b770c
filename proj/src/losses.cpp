#include "rankup/losses.hpp"

#include <cmath>

namespace rankup {

RegressionCriterion parse_criterion(const std::string& name) {
  if (name == "mae") return RegressionCriterion::Mae;
  if (name == "mse") return RegressionCriterion::Mse;
  throw config_error("unknown regression criterion '" + name + "' (want mae or mse)");
}

std::string to_string(RegressionCriterion c) {
  return c == RegressionCriterion::Mae ? "mae" : "mse";
}

LossGrad regression_loss(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                         RegressionCriterion criterion) {
  const Eigen::Index n = preds.size();
  if (n == 0) throw shape_error("regression_loss: empty prediction vector");
  if (targets.size() != n) {
    throw shape_error("regression_loss: preds has " + std::to_string(n) + " entries, targets " +
                      std::to_string(targets.size()));
  }

  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = preds(i) - targets(i);
    if (criterion == RegressionCriterion::Mae) {
      sum += std::abs(r);
      out.grad(i) = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / static_cast<double>(n);
    } else {
      sum += r * r;
      out.grad(i) = 2.0 * r / static_cast<double>(n);
    }
  }
  out.value = sum / static_cast<double>(n);
  return out;
}

PairProb ranknet_pair_prob(double score_i, double score_j) {
  return PairProb{stable_sigmoid(score_i - score_j)};
}

LossGrad ranknet_loss(const Eigen::VectorXd& scores, const PairTargetFn& targets_pairwise) {
  const int n = static_cast<int>(scores.size());
  if (n == 0) throw shape_error("ranknet_loss: empty score vector");
  if (!targets_pairwise) throw contract_error("ranknet_loss: null pairwise target function");

  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double y = targets_pairwise(i, j);
      if (!(y == 0.0 || y == 0.5 || y == 1.0)) {
        throw contract_error("ranknet_loss: pairwise target must be 0, 0.5 or 1, got " +
                             std::to_string(y));
      }
      const double p = stable_sigmoid(scores(i) - scores(j));
      sum += binary_cross_entropy(y, p);
      if (i != j) {  // diagonal terms are constants in the scores
        const double d = p - y;
        out.grad(i) += d;
        out.grad(j) -= d;
      }
    }
  }
  const double norm = static_cast<double>(n) * n;
  out.value = sum / norm;
  out.grad /= norm;
  return out;
}

PairTargetFn pairwise_targets_from_labels(const Eigen::VectorXd& labels) {
  return [labels](int i, int j) {
    if (labels(i) > labels(j)) return 1.0;
    if (labels(i) < labels(j)) return 0.0;
    return 0.5;
  };
}

PairSoftmax arc_pair_softmax(double score_i, double score_j) {
  const double p = stable_sigmoid(2.0 * (score_i - score_j));
  const double q = stable_sigmoid(2.0 * (score_j - score_i));
  return PairSoftmax{p, q};
}

LossGrad arc_labeled_loss(const Eigen::VectorXd& arc_scores, const Eigen::VectorXd& labels) {
  const int n = static_cast<int>(arc_scores.size());
  if (n == 0) throw shape_error("arc_labeled_loss: empty score vector");
  if (labels.size() != n) {
    throw shape_error("arc_labeled_loss: scores have " + std::to_string(n) + " entries, labels " +
                      std::to_string(labels.size()));
  }

  LossGrad out;
  out.grad = Eigen::VectorXd::Zero(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double target = labels(i) > labels(j) ? 1.0 : 0.0;  // ties and diagonal: class 0
      const double p = arc_pair_softmax(arc_scores(i), arc_scores(j)).p_outranks;
      sum += binary_cross_entropy(target, p);
      if (i != j) {
        const double d = 2.0 * (p - target);
        out.grad(i) += d;
        out.grad(j) -= d;
      }
    }
  }
  const double norm = static_cast<double>(n) * n;
  out.value = sum / norm;
  out.grad /= norm;
  return out;
}

void ArcLossConfig::validate() const {
  if (!(tau > 0.5 && tau <= 1.0)) {
    throw config_error("arc.tau must lie in (0.5, 1], got " + std::to_string(tau));
  }
  if (!(omega_ulb >= 0.0)) throw config_error("arc.omega_ulb must be >= 0");
}

FixmatchPairLoss arc_unlabeled_fixmatch_loss(const Eigen::VectorXd& weak_scores,
                                             const Eigen::VectorXd& strong_scores,
                                             const ArcLossConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(weak_scores.size());
  if (n == 0) throw shape_error("arc_unlabeled_fixmatch_loss: empty score vector");
  if (strong_scores.size() != n) {
    throw shape_error("arc_unlabeled_fixmatch_loss: weak and strong views must pair up");
  }

  FixmatchPairLoss out;
  out.grad_strong = Eigen::VectorXd::Zero(n);
  double sum = 0.0;
  long kept = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const PairSoftmax weak = arc_pair_softmax(weak_scores(i), weak_scores(j));
      const double confidence = std::max(weak.p_outranks, weak.p_outranked);
      if (!(confidence > cfg.tau)) continue;  // strictly above the threshold
      const double target = weak.p_outranks > 0.5 ? 1.0 : 0.0;  // hard pseudo-label
      const double p = arc_pair_softmax(strong_scores(i), strong_scores(j)).p_outranks;
      sum += binary_cross_entropy(target, p);
      ++kept;
      if (i != j) {
        const double d = 2.0 * (p - target);
        out.grad_strong(i) += d;
        out.grad_strong(j) -= d;
      }
    }
  }
  const double norm = static_cast<double>(n) * n;  // masked pairs stay in the denominator
  out.value = sum / norm;
  out.grad_strong /= norm;
  out.mask_rate = static_cast<double>(kept) / norm;
  return out;
}

double warmup_factor(long iter, long alpha_warm) {
  if (alpha_warm < 1) {
    throw config_error("warmup_factor: alpha_warm must be >= 1, got " + std::to_string(alpha_warm));
  }
  if (iter < 0) throw contract_error("warmup_factor: iter must be >= 0");
  return std::min(static_cast<double>(iter) / static_cast<double>(alpha_warm), 1.0);
}

double rankup_total_loss(double l_reg, double l_rda, double l_arc, double omega_rda,
                         double omega_arc, long iter, long alpha_warm) {
  if (!(omega_rda >= 0.0) || !(omega_arc >= 0.0)) {
    throw config_error("rankup_total_loss: loss weights must be >= 0");
  }
  return l_reg + omega_rda * warmup_factor(iter, alpha_warm) * l_rda + omega_arc * l_arc;
}

}  // namespace rankup
