#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rankup/common.hpp"

namespace rankup {

struct Dataset {
  Eigen::MatrixXd features;  // n_samples x n_features, rows are samples
  Eigen::VectorXd targets;   // raw label units
  std::vector<int> ids;      // stable per-sample index, permutation of 0..n-1

  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

enum class SyntheticTask { Sine, Polynomial, Friedman };

SyntheticTask parse_synthetic_task(const std::string& name);
std::string to_string(SyntheticTask task);

/// Deterministic toy generators.
///
/// A single mt19937_64 stream seeded with derive_seed(seed, stream::synthetic)
/// is consumed in this exact order: all feature draws (sample-major,
/// feature-minor), then, only when noise_sigma > 0, one N(0, noise_sigma)
/// draw per sample added to its target. Tasks:
///   sine:       x ~ U(-1,1),    y = sin(3*pi*x)
///   polynomial: x ~ U(-1,1),    y = x^3 - x
///   friedman:   u ~ U(0,1)^10,  y = 10 sin(pi u0 u1) + 20 (u2 - 1/2)^2
///                                   + 10 u3 + 5 u4,
///               features stored rescaled as 2u - 1
/// Features always land in [-1, 1]; targets are finite.
Dataset generate_synthetic(SyntheticTask task, int n_samples, double noise_sigma,
                           std::uint64_t seed);

/// Strict CSV ingestion: UTF-8, one header row, comma separators. Every
/// non-target cell must parse as a finite double; failures raise data_error
/// naming the 1-based data row and the column.
Dataset load_csv(const std::string& path, const std::string& target_column);

/// Deterministic shuffle split. test_fraction in (0, 1); at least one sample
/// and at least two training samples must remain on each side. Both halves
/// are reindexed with fresh 0..n-1 ids.
std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction,
                                             std::uint64_t seed);

struct SplitSpec {
  int n_labeled = 0;
  std::uint64_t seed = 0;
};

struct LabeledSet {
  Eigen::MatrixXd features;
  Eigen::VectorXd targets;
  std::vector<int> ids;  // ids within the parent dataset

  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

class UnlabeledSet {
 public:
  Eigen::MatrixXd features;
  std::vector<int> ids;

  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  // True targets ride along solely for the fully supervised reference arm.
  // Every read is counted so tests can prove semi-supervised code never looks.
  const Eigen::VectorXd& reference_targets() const {
    ++reference_reads_;
    return targets_;
  }
  long reference_reads() const { return reference_reads_; }

 private:
  friend std::pair<LabeledSet, UnlabeledSet> split_labeled(const Dataset&,
                                                           const SplitSpec&);
  Eigen::VectorXd targets_;
  mutable long reference_reads_ = 0;
};

/// Draws spec.n_labeled samples (without replacement, seeded shuffle) as the
/// labeled set; the rest become unlabeled. Requires 1 <= n_labeled < d.n().
std::pair<LabeledSet, UnlabeledSet> split_labeled(const Dataset& d, const SplitSpec& spec);

// Affine map of raw labels onto [0, 1], fit on labeled data only.
struct LabelScaler {
  double y_min = 0.0;
  double y_max = 1.0;

  double normalize(double y) const { return (y - y_min) / (y_max - y_min); }
  double denormalize(double y) const { return y * (y_max - y_min) + y_min; }
  Eigen::VectorXd normalize(const Eigen::VectorXd& y) const;
  Eigen::VectorXd denormalize(const Eigen::VectorXd& y) const;
};

/// Throws config_error when the labeled targets are all identical (the map
/// would be degenerate) or fewer than two samples are given.
LabelScaler fit_scaler(const LabeledSet& labeled);

struct AugmentConfig {
  double weak_noise_sigma = 0.02;
  double strong_noise_sigma = 0.10;
  double strong_mask_prob = 0.20;

  void validate() const;
};

enum class AugmentKind { Weak, Strong };

/// Weak: additive per-feature N(0, weak_noise_sigma). Strong: additive
/// per-feature N(0, strong_noise_sigma) followed by zero-masking each feature
/// with probability strong_mask_prob. Draw order per call: all noise draws
/// (skipped entirely when sigma == 0), then all mask draws (skipped when
/// mask_prob == 0). Outputs are not clipped.
Eigen::VectorXd augment(const Eigen::VectorXd& x, AugmentKind kind, const AugmentConfig& cfg,
                        std::mt19937_64& rng);

}  // namespace rankup
