#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rankup/common.hpp"

namespace rankup {

// Feed-forward trunk (tanh) with two scalar heads on the shared trunk output:
// a regression head and a ranking-score head. hidden may be empty, in which
// case both heads act directly on the input.
struct ModelLayout {
  int input_dim = 1;
  std::vector<int> hidden;

  int trunk_output_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
  std::int64_t param_count() const;
  void validate() const;
  bool operator==(const ModelLayout&) const = default;
};

// Offsets into the flat parameter vector. Order: per trunk layer the weight
// matrix (column-major) then its bias, then regression head weights + bias,
// then ranking head weights + bias.
struct ParamSegment {
  std::ptrdiff_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::ptrdiff_t size() const { return std::ptrdiff_t(rows) * cols; }
};

struct ParamSegments {
  std::vector<ParamSegment> trunk_w, trunk_b;
  ParamSegment reg_w, reg_b, arc_w, arc_b;
};

ParamSegments param_segments(const ModelLayout& layout);

class TwoHeadModel {
 public:
  // Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), biases
  // zero; draw order follows the flat layout.
  TwoHeadModel(ModelLayout layout, std::uint64_t init_seed);
  static TwoHeadModel from_params(ModelLayout layout, Eigen::VectorXd params);

  const ModelLayout& layout() const { return layout_; }
  const Eigen::VectorXd& params() const { return params_; }
  // Mutable access bumps the version, invalidating outstanding caches.
  Eigen::VectorXd& mutable_params() {
    ++version_;
    return params_;
  }
  std::uint64_t version() const { return version_; }

 private:
  ModelLayout layout_;
  Eigen::VectorXd params_;
  std::uint64_t version_ = 0;
};

struct ForwardCache {
  std::uint64_t model_version = 0;
  Eigen::MatrixXd input;                 // d x B
  std::vector<Eigen::MatrixXd> act;      // post-tanh activations per trunk layer
};

struct ForwardResult {
  Eigen::VectorXd reg_out;    // B
  Eigen::VectorXd arc_score;  // B
  ForwardCache cache;
};

/// X is d x B (columns are samples). Each column is processed independently
/// so a sample's outputs never depend on its batch neighbours.
ForwardResult forward(const TwoHeadModel& m, const Eigen::MatrixXd& X);

/// Forward without retaining a cache; for evaluation and table refreshes.
void predict(const TwoHeadModel& m, const Eigen::MatrixXd& X, Eigen::VectorXd* reg_out,
             Eigen::VectorXd* arc_score);

/// Exact reverse-mode gradient of sum_b(grad_reg[b] * reg_out[b] +
/// grad_arc[b] * arc_score[b]) with respect to the flat parameters. The cache
/// must come from a forward on the current parameters (contract_error
/// otherwise). Batch reductions run in ascending sample order.
Eigen::VectorXd backward(const TwoHeadModel& m, const ForwardCache& cache,
                         const Eigen::VectorXd& grad_reg, const Eigen::VectorXd& grad_arc);

struct OptimState {
  double learning_rate = 0.0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  Eigen::VectorXd velocity;  // zeros at start
};

/// velocity <- momentum * velocity + grads + weight_decay * params;
/// params   <- params - learning_rate * velocity.
/// Non-finite gradients or resulting parameters raise numeric_error.
void sgd_step(TwoHeadModel& m, const Eigen::VectorXd& grads, OptimState& opt);

struct EmaState {
  double decay = 0.999;
  Eigen::VectorXd shadow;
};

/// shadow <- decay * shadow + (1 - decay) * params. decay must lie in [0, 1].
void ema_update(EmaState& ema, const TwoHeadModel& m);

struct OutputLoss {
  double value = 0.0;
  Eigen::VectorXd grad_reg;
  Eigen::VectorXd grad_arc;
};
using OutputLossFn = std::function<OutputLoss(const Eigen::VectorXd& reg_out,
                                              const Eigen::VectorXd& arc_score)>;

/// Central-difference check of backward() against the scalar loss built by
/// loss_fn on the model outputs. Returns the maximum relative error
/// |a - n| / max(|a|, |n|, 1e-12) over all parameters. eps must lie in
/// [1e-7, 1e-3] (contract_error otherwise).
double gradient_check(const TwoHeadModel& m, const Eigen::MatrixXd& X, const OutputLossFn& loss_fn,
                      double eps);

/// Binary container: magic, format version, layout descriptor, then the raw
/// little-endian double parameters. Round-trips bit-exactly.
void save_checkpoint(const TwoHeadModel& m, const std::string& path);
TwoHeadModel load_checkpoint(const std::string& path);

}  // namespace rankup
