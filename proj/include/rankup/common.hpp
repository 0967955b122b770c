#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rankup {

// Error taxonomy. Everything user-facing derives from std::runtime_error so
// the CLI can map the exception type onto an exit code (config -> 2, rest -> 1).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class shape_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class contract_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// splitmix64, used only to spread (seed, stream tag) pairs into independent
// engine seeds. Every consumer of randomness owns a dedicated stream so that
// enabling one training branch never perturbs the draws of another.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
}

// Stream tags. Values are part of the reproducibility contract: changing one
// changes every run seeded through it.
namespace stream {
inline constexpr std::uint64_t synthetic = 1;
inline constexpr std::uint64_t train_test_split = 2;
inline constexpr std::uint64_t labeled_split = 3;
inline constexpr std::uint64_t model_init = 10;
inline constexpr std::uint64_t labeled_sampler = 11;
inline constexpr std::uint64_t labeled_aug = 12;
inline constexpr std::uint64_t unlabeled_sampler = 13;
inline constexpr std::uint64_t unlabeled_weak = 14;
inline constexpr std::uint64_t unlabeled_strong = 15;
inline constexpr std::uint64_t branch_aug = 16;
inline constexpr std::uint64_t mixup = 17;
}  // namespace stream

// Overflow-safe logistic. Never evaluates exp on a positive argument.
inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Two-way cross entropy with soft target in [0, 1]. Probabilities are clamped
// to [1e-12, 1 - 1e-12] here and nowhere else.
inline double binary_cross_entropy(double target, double p) {
  constexpr double kLo = 1e-12;
  constexpr double kHi = 1.0 - 1e-12;
  const double pc = std::clamp(p, kLo, kHi);
  const double qc = std::clamp(1.0 - p, kLo, kHi);
  return -target * std::log(pc) - (1.0 - target) * std::log(qc);
}

}  // namespace rankup
