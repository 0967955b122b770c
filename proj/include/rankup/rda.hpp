#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rankup/common.hpp"
#include "rankup/losses.hpp"

namespace rankup {

// m ascending anchor values summarizing the labeled label distribution.
struct LabeledDistribution {
  Eigen::VectorXd sorted_values;
  int m() const { return static_cast<int>(sorted_values.size()); }
};

/// Sorts the k labeled labels ascending and linearly interpolates them onto m
/// evenly spaced positions t * (k - 1) / (m - 1), t = 0..m-1, so the first and
/// last outputs anchor exactly to min and max. m == 1 degenerates to the lower
/// median v[(k - 1) / 2]. Requires k >= 2 and m >= 1.
LabeledDistribution interpolate_labeled_distribution(const Eigen::VectorXd& labeled_labels, int m);

/// Distribution alignment: the rank-t pseudo-label (stable ascending argsort,
/// ties broken by original index) is replaced by dist.sorted_values[t].
/// Returns the aligned values in original positions. Requires matching sizes.
Eigen::VectorXd align(const Eigen::VectorXd& pseudo_labels, const LabeledDistribution& dist);

struct RdaConfig {
  long refresh_period = 1024;  // iterations between re-alignments
  double omega_rda = 1.0;
  long alpha_warm = 1;  // warm-up denominator, in iterations

  void validate() const;
};

// Full-pool pseudo-label store: raw model predictions for every unlabeled
// sample (by position in the unlabeled set) plus their aligned counterparts
// from the most recent refresh.
class PseudoLabelTable {
 public:
  explicit PseudoLabelTable(int n_unlabeled);

  int size() const { return static_cast<int>(raw_.size()); }
  bool initialized() const { return initialized_; }
  const Eigen::VectorXd& raw() const { return raw_; }
  const Eigen::VectorXd& aligned() const { return aligned_; }
  long last_refresh_iter() const { return last_refresh_iter_; }

  // Alignment instrumentation.
  long bootstrap_aligns() const { return bootstrap_aligns_; }
  long scheduled_aligns() const { return scheduled_aligns_; }
  long total_aligns() const { return bootstrap_aligns_ + scheduled_aligns_; }

  /// Overwrites raw entries at the given positions. Unknown positions raise
  /// contract_error; non-finite predictions raise numeric_error naming the
  /// offending position and value.
  void update(const std::vector<int>& positions, const Eigen::VectorXd& preds);

  /// Re-aligns the full table when iter % refresh_period == 0, or
  /// unconditionally the first time it is called (bootstrap). Off-schedule
  /// calls on an initialized table do nothing. Returns whether a refresh ran.
  bool maybe_refresh(const Eigen::VectorXd& labeled_labels, long iter, const RdaConfig& cfg);

 private:
  Eigen::VectorXd raw_;
  Eigen::VectorXd aligned_;
  bool initialized_ = false;
  long last_refresh_iter_ = -1;
  long bootstrap_aligns_ = 0;
  long scheduled_aligns_ = 0;
};

struct RdaBatchLoss {
  double value = 0.0;
  Eigen::VectorXd grad;     // w.r.t. reg_preds
  bool table_ready = false; // false: table never aligned yet, loss forced to 0
};

/// Regression loss between the batch predictions and the table's aligned
/// pseudo-labels at the given positions. The aligned targets are constants;
/// gradients flow only through reg_preds. Before the first alignment the loss
/// is exactly zero with zero gradients and table_ready = false.
RdaBatchLoss rda_batch_loss(const PseudoLabelTable& table, const std::vector<int>& positions,
                            const Eigen::VectorXd& reg_preds, RegressionCriterion criterion);

}  // namespace rankup
