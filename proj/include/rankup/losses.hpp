#pragma once

#include <Eigen/Dense>

#include <functional>

#include "rankup/common.hpp"

namespace rankup {

enum class RegressionCriterion { Mae, Mse };

RegressionCriterion parse_criterion(const std::string& name);
std::string to_string(RegressionCriterion c);

struct LossGrad {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// MAE: mean |p - t|, subgradient sign(p - t)/n (0 at exact ties).
/// MSE: mean (p - t)^2, gradient 2 (p - t)/n.
LossGrad regression_loss(const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
                         RegressionCriterion criterion);

// Probability that sample i outranks sample j under the plain pairwise
// logistic formulation: sigmoid(s_i - s_j).
struct PairProb {
  double p = 0.5;
};
PairProb ranknet_pair_prob(double score_i, double score_j);

/// Pairwise logistic ranking loss over ALL ordered pairs, diagonal included:
///   (1/N^2) sum_i sum_j CE(y_ij, sigmoid(s_i - s_j)),
/// with soft targets y_ij in {0, 0.5, 1} supplied per ordered pair. Diagonal
/// pairs add a constant CE(y_ii, 1/2) and contribute exactly zero gradient.
using PairTargetFn = std::function<double(int, int)>;
LossGrad ranknet_loss(const Eigen::VectorXd& scores, const PairTargetFn& targets_pairwise);

/// Builds the conventional pairwise targets from labels:
/// 1 when y_i > y_j, 0 when y_i < y_j, 0.5 on ties.
PairTargetFn pairwise_targets_from_labels(const Eigen::VectorXd& labels);

// Two-class softmax over the logit pair (r_i - r_j, r_j - r_i). The class
// "i outranks j" therefore has probability sigmoid(2 (r_i - r_j)).
struct PairSoftmax {
  double p_outranks = 0.5;   // P[i outranks j]
  double p_outranked = 0.5;  // complement
};
PairSoftmax arc_pair_softmax(double score_i, double score_j);

/// Labeled ranking-head loss over ALL ordered pairs, diagonal included:
/// hard target class 1{y_i > y_j} (ties and the diagonal are class 0),
/// CE against arc_pair_softmax, averaged over N^2. Diagonal pairs add ln 2
/// and exactly zero gradient.
LossGrad arc_labeled_loss(const Eigen::VectorXd& arc_scores, const Eigen::VectorXd& labels);

struct ArcLossConfig {
  double tau = 0.95;       // confidence threshold, in (0.5, 1]
  double omega_ulb = 1.0;  // weight of the thresholded unlabeled term

  void validate() const;
};

struct FixmatchPairLoss {
  double value = 0.0;
  Eigen::VectorXd grad_strong;  // gradient w.r.t. strong_scores only
  double mask_rate = 0.0;       // fraction of the N^2 ordered pairs kept
};

/// Consistency loss of the ranking head across augmentation strengths.
/// For every ordered pair (diagonal included): compute the weak-view pair
/// softmax, keep the pair only when its max probability strictly exceeds tau,
/// take the argmax class as a hard pseudo-label, and score the strong-view
/// pair softmax against it with CE. The sum is divided by N^2 regardless of
/// how many pairs were kept, and weak scores are treated as constants.
FixmatchPairLoss arc_unlabeled_fixmatch_loss(const Eigen::VectorXd& weak_scores,
                                             const Eigen::VectorXd& strong_scores,
                                             const ArcLossConfig& cfg);

/// min(iter / alpha_warm, 1). alpha_warm must be >= 1.
double warmup_factor(long iter, long alpha_warm);

/// l_reg + omega_rda * warmup_factor(iter, alpha_warm) * l_rda + omega_arc * l_arc.
double rankup_total_loss(double l_reg, double l_rda, double l_arc, double omega_rda,
                         double omega_arc, long iter, long alpha_warm);

}  // namespace rankup
