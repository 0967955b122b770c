#include "rankup/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rankup {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& raw, int data_row, const std::string& column) {
  const std::string cell = trim(raw);
  const auto fail = [&](const std::string& what) {
    throw data_error("row " + std::to_string(data_row) + ", column '" + column + "': " + what +
                     " '" + cell + "'");
  };
  if (cell.empty()) fail("empty cell");
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) fail("non-numeric cell");
  if (!std::isfinite(value)) fail("non-finite value");
  return value;
}

}  // namespace

SyntheticTask parse_synthetic_task(const std::string& name) {
  if (name == "sine") return SyntheticTask::Sine;
  if (name == "polynomial") return SyntheticTask::Polynomial;
  if (name == "friedman") return SyntheticTask::Friedman;
  throw config_error("unknown synthetic task '" + name + "' (want sine, polynomial, friedman)");
}

std::string to_string(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::Sine: return "sine";
    case SyntheticTask::Polynomial: return "polynomial";
    case SyntheticTask::Friedman: return "friedman";
  }
  throw contract_error("unhandled synthetic task");
}

Dataset generate_synthetic(SyntheticTask task, int n_samples, double noise_sigma,
                           std::uint64_t seed) {
  if (n_samples < 2) {
    throw config_error("generate_synthetic: n_samples must be >= 2, got " +
                       std::to_string(n_samples));
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw config_error("generate_synthetic: noise_sigma must be finite and >= 0");
  }

  const int dim = task == SyntheticTask::Friedman ? 10 : 1;
  std::mt19937_64 rng(derive_seed(seed, stream::synthetic));

  Dataset d;
  d.features.resize(n_samples, dim);
  d.targets.resize(n_samples);
  d.ids.resize(n_samples);
  std::iota(d.ids.begin(), d.ids.end(), 0);

  if (task == SyntheticTask::Friedman) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < n_samples; ++i) {
      double u[10];
      for (int k = 0; k < 10; ++k) {
        u[k] = unit(rng);
        d.features(i, k) = 2.0 * u[k] - 1.0;
      }
      d.targets(i) = 10.0 * std::sin(kPi * u[0] * u[1]) + 20.0 * (u[2] - 0.5) * (u[2] - 0.5) +
                     10.0 * u[3] + 5.0 * u[4];
    }
  } else {
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    for (int i = 0; i < n_samples; ++i) {
      const double x = box(rng);
      d.features(i, 0) = x;
      d.targets(i) = task == SyntheticTask::Sine ? std::sin(3.0 * kPi * x) : x * x * x - x;
    }
  }

  if (noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int i = 0; i < n_samples; ++i) d.targets(i) += noise(rng);
  }
  return d;
}

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw data_error("file '" + path + "' is empty");

  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);
  if (header.empty() || (header.size() == 1 && header[0].empty())) {
    throw data_error("file '" + path + "' has an empty header row");
  }

  int target_idx = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == target_column) {
      if (target_idx >= 0) throw data_error("column '" + target_column + "' appears twice");
      target_idx = static_cast<int>(c);
    }
  }
  if (target_idx < 0) throw data_error("column '" + target_column + "' not found");

  const int n_cols = static_cast<int>(header.size());
  const int dim = n_cols - 1;
  if (dim < 1) throw data_error("no feature columns besides target '" + target_column + "'");

  std::vector<std::vector<double>> rows;
  int data_row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;  // ignore trailing blank lines
    ++data_row;
    std::vector<std::string> fields = split_fields(line);
    if (static_cast<int>(fields.size()) != n_cols) {
      throw data_error("row " + std::to_string(data_row) + ": expected " +
                       std::to_string(n_cols) + " fields, got " +
                       std::to_string(fields.size()));
    }
    std::vector<double> parsed(n_cols);
    for (int c = 0; c < n_cols; ++c) parsed[c] = parse_cell(fields[c], data_row, header[c]);
    rows.push_back(std::move(parsed));
  }
  if (rows.empty()) throw data_error("file '" + path + "' has no data rows");

  Dataset d;
  const int n = static_cast<int>(rows.size());
  d.features.resize(n, dim);
  d.targets.resize(n);
  d.ids.resize(n);
  std::iota(d.ids.begin(), d.ids.end(), 0);
  for (int i = 0; i < n; ++i) {
    int f = 0;
    for (int c = 0; c < n_cols; ++c) {
      if (c == target_idx) {
        d.targets(i) = rows[i][c];
      } else {
        d.features(i, f++) = rows[i][c];
      }
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw config_error("split_train_test: test_fraction must lie in (0, 1)");
  }
  const int n = d.n();
  const int n_test = std::max(1, static_cast<int>(std::lround(test_fraction * n)));
  const int n_train = n - n_test;
  if (n_train < 2) {
    throw config_error("split_train_test: only " + std::to_string(n_train) +
                       " training samples would remain");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, stream::train_test_split));
  std::shuffle(order.begin(), order.end(), rng);

  const auto take = [&](int begin, int count) {
    Dataset out;
    out.features.resize(count, d.dim());
    out.targets.resize(count);
    out.ids.resize(count);
    std::vector<int> rows(order.begin() + begin, order.begin() + begin + count);
    std::sort(rows.begin(), rows.end());
    for (int i = 0; i < count; ++i) {
      out.features.row(i) = d.features.row(rows[i]);
      out.targets(i) = d.targets(rows[i]);
      out.ids[i] = i;
    }
    return out;
  };

  Dataset test = take(0, n_test);
  Dataset train = take(n_test, n_train);
  return {std::move(train), std::move(test)};
}

std::pair<LabeledSet, UnlabeledSet> split_labeled(const Dataset& d, const SplitSpec& spec) {
  const int n = d.n();
  if (spec.n_labeled < 1 || spec.n_labeled >= n) {
    throw config_error("split_labeled: n_labeled must lie in [1, " + std::to_string(n - 1) +
                       "], got " + std::to_string(spec.n_labeled));
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(spec.seed, stream::labeled_split));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<int> lab(order.begin(), order.begin() + spec.n_labeled);
  std::vector<int> unl(order.begin() + spec.n_labeled, order.end());
  std::sort(lab.begin(), lab.end());
  std::sort(unl.begin(), unl.end());

  LabeledSet labeled;
  labeled.features.resize(spec.n_labeled, d.dim());
  labeled.targets.resize(spec.n_labeled);
  labeled.ids.resize(spec.n_labeled);
  for (int i = 0; i < spec.n_labeled; ++i) {
    labeled.features.row(i) = d.features.row(lab[i]);
    labeled.targets(i) = d.targets(lab[i]);
    labeled.ids[i] = d.ids[lab[i]];
  }

  UnlabeledSet unlabeled;
  const int m = n - spec.n_labeled;
  unlabeled.features.resize(m, d.dim());
  unlabeled.targets_.resize(m);
  unlabeled.ids.resize(m);
  for (int i = 0; i < m; ++i) {
    unlabeled.features.row(i) = d.features.row(unl[i]);
    unlabeled.targets_(i) = d.targets(unl[i]);
    unlabeled.ids[i] = d.ids[unl[i]];
  }
  return {std::move(labeled), std::move(unlabeled)};
}

Eigen::VectorXd LabelScaler::normalize(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = normalize(y(i));
  return out;
}

Eigen::VectorXd LabelScaler::denormalize(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = denormalize(y(i));
  return out;
}

LabelScaler fit_scaler(const LabeledSet& labeled) {
  if (labeled.n() < 2) {
    throw config_error("fit_scaler: need at least two labeled samples, got " +
                       std::to_string(labeled.n()));
  }
  const double lo = labeled.targets.minCoeff();
  const double hi = labeled.targets.maxCoeff();
  if (!(hi > lo)) {
    throw config_error("fit_scaler: all labeled targets equal " + std::to_string(lo) +
                       "; label scale is degenerate");
  }
  return LabelScaler{lo, hi};
}

void AugmentConfig::validate() const {
  if (!(weak_noise_sigma >= 0.0) || !std::isfinite(weak_noise_sigma)) {
    throw config_error("augment.weak_noise_sigma must be finite and >= 0");
  }
  if (!(strong_noise_sigma >= 0.0) || !std::isfinite(strong_noise_sigma)) {
    throw config_error("augment.strong_noise_sigma must be finite and >= 0");
  }
  if (!(strong_mask_prob >= 0.0 && strong_mask_prob <= 1.0)) {
    throw config_error("augment.strong_mask_prob must lie in [0, 1]");
  }
}

Eigen::VectorXd augment(const Eigen::VectorXd& x, AugmentKind kind, const AugmentConfig& cfg,
                        std::mt19937_64& rng) {
  cfg.validate();
  Eigen::VectorXd out = x;
  const double sigma = kind == AugmentKind::Weak ? cfg.weak_noise_sigma : cfg.strong_noise_sigma;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += noise(rng);
  }
  if (kind == AugmentKind::Strong && cfg.strong_mask_prob > 0.0) {
    std::bernoulli_distribution mask(cfg.strong_mask_prob);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      if (mask(rng)) out(i) = 0.0;
    }
  }
  return out;
}

}  // namespace rankup
