#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rankup/dataset.hpp"
#include "rankup/losses.hpp"
#include "rankup/metrics.hpp"
#include "rankup/model.hpp"
#include "rankup/rda.hpp"

namespace rankup {

enum class Method {
  Supervised,       // labeled regression loss only
  FullySupervised,  // same loss over labeled + unlabeled with true targets
  PiModel,          // + MSE between two weak views of unlabeled data
  MeanTeacher,      // + MSE against an EMA teacher on unlabeled data
  MixmatchReg,      // mixup of pooled labeled/pseudo-labeled data
  Rankup,           // + ranking-head losses (labeled + thresholded unlabeled)
  RankupRda,        // Rankup + distribution-aligned pseudo-label regression
};

Method parse_method(const std::string& name);
std::string to_string(Method m);

struct TrainConfig {
  Method method = Method::Supervised;
  long total_iters = 20000;
  long eval_every = 1000;
  int labeled_batch = 32;
  double unlabeled_batch_ratio = 7.0;

  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<int> hidden_sizes{64, 64};
  RegressionCriterion criterion = RegressionCriterion::Mae;

  double omega_arc = 0.2;
  ArcLossConfig arc;       // tau, omega_ulb
  double temperature = 0.5;  // accepted for config compatibility; unused

  long rda_refresh_period = 1024;
  double omega_rda = 1.0;
  double rda_warmup_fraction = 0.4;

  AugmentConfig augment;

  double consistency_weight = 0.1;
  double consistency_warmup_fraction = 0.4;
  double mixup_alpha = 0.5;

  double ema_decay = 0.999;
  bool eval_with_ema = false;

  void validate() const;
  long alpha_warm_rda() const;
  long alpha_warm_consistency() const;
  int unlabeled_batch() const;
};

struct IterationLog {
  long iter = 0;
  double total = 0.0;
  double reg = 0.0;
  double arc_labeled = 0.0;
  double arc_unlabeled = 0.0;
  double consistency = 0.0;
  double rda = 0.0;
  double mask_rate = 0.0;
  double warmup = 0.0;
};

struct EvalLog {
  long iter = 0;
  MetricsReport metrics;
};

struct RunRecord {
  std::uint64_t seed = 0;
  Method method = Method::Supervised;
  std::vector<IterationLog> iterations;
  std::vector<EvalLog> evals;
  MetricsReport final_metrics;
  LabelScaler scaler;
  ModelLayout layout;
  // Weights the final evaluation used (EMA shadow when eval_with_ema is set,
  // the raw final-iteration parameters otherwise).
  Eigen::VectorXd final_params;
  std::optional<PseudoLabelTable> table;  // present for the RDA method
};

// One gradient step's batches, pre-augmented. Unlabeled views may be empty
// (0 columns) for purely supervised steps.
struct RankupBatch {
  Eigen::MatrixXd labeled_X;  // d x B, weak-augmented
  Eigen::VectorXd labeled_y;  // normalized labels
  Eigen::MatrixXd unl_weak_X;    // d x Bu
  Eigen::MatrixXd unl_strong_X;  // d x Bu
  std::vector<int> unl_positions;
};

struct RankupWeights {
  RegressionCriterion criterion = RegressionCriterion::Mae;
  double omega_arc = 0.0;
  ArcLossConfig arc;
  double omega_rda = 0.0;
  long alpha_warm = 1;
};

struct RankupStepResult {
  double total = 0.0;
  double reg = 0.0;
  double arc_labeled = 0.0;
  double arc_unlabeled = 0.0;
  double rda = 0.0;
  double mask_rate = 0.0;
  double warmup = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd unl_weak_reg;  // weak-view regression output (table upkeep); empty if not run
};

/// Loss and flat parameter gradient of one step of the combined objective
///   l_reg + omega_rda * warmup * l_rda + omega_arc * (l_arc_lb + omega_ulb * l_arc_ulb)
/// on fixed batches. Zero-weight branches are skipped entirely, so a run with
/// omega_arc = omega_rda = 0 performs exactly the supervised arithmetic.
/// Pseudo-label targets and weak-view ranking scores are constants; gradients
/// flow through the labeled forward, the weak-view regression output (for the
/// aligned pseudo-label term), and the strong-view ranking scores only.
/// Shared between the trainer and verification code.
RankupStepResult rankup_step_loss(const TwoHeadModel& m, const RankupBatch& batch,
                                  const RankupWeights& weights, const PseudoLabelTable* table,
                                  long iter);

using StepObserver =
    std::function<void(long iter, const TwoHeadModel& model, const Eigen::VectorXd& ema_shadow)>;

/// Runs cfg.total_iters gradient steps (iterations are 1-based) and evaluates
/// on the test set every eval_every iterations plus once at the end.
/// Deterministic: the same inputs and seed reproduce the record bit for bit.
/// Semi-supervised methods never read the unlabeled true targets.
RunRecord train(const TrainConfig& cfg, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                const Dataset& test, std::uint64_t seed, const StepObserver& observer = {});

/// Prediction on raw features (no augmentation), denormalized through the
/// scaler, scored against raw targets.
MetricsReport evaluate(const TwoHeadModel& m, const Dataset& test, const LabelScaler& scaler);

struct AggregateStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

AggregateStats aggregate(const std::vector<double>& values);

struct ProtocolResult {
  std::vector<RunRecord> runs;
  AggregateStats mae, r2, srcc;
};

/// For each seed: draw that seed's labeled/unlabeled split of the training
/// pool, train, and evaluate. Aggregates final test metrics as mean and
/// population standard deviation across seeds. on_run fires after each seed
/// completes so partial results can be persisted before any later failure.
ProtocolResult run_protocol(const TrainConfig& cfg, const Dataset& train, const Dataset& test,
                            int n_labeled, const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const RunRecord&)>& on_run = {});

}  // namespace rankup
