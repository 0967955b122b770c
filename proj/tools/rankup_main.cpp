#include <CLI11.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "rankup/common.hpp"
#include "rankup/dataset.hpp"
#include "rankup/experiment.hpp"
#include "rankup/losses.hpp"
#include "rankup/metrics.hpp"
#include "rankup/model.hpp"
#include "rankup/rda.hpp"
#include "rankup/trainer.hpp"

namespace fs = std::filesystem;
using namespace rankup;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(start, comma - start);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw config_error("--seed-list: '" + item + "' is not a non-negative integer");
    }
    out.push_back(v);
    start = comma + 1;
  }
  if (out.empty()) throw config_error("--seed-list: empty");
  return out;
}

void print_summary_lines(const nlohmann::json& summary) {
  for (const auto& row : summary.at("per_seed")) {
    std::printf("  seed %llu: mae=%.6g r2=%.6g srcc=%.6g\n",
                static_cast<unsigned long long>(row.at("seed").get<std::uint64_t>()),
                row.at("mae").get<double>(), row.at("r2").get<double>(),
                row.at("srcc").get<double>());
  }
  const auto& agg = summary.at("aggregate");
  const auto cell = [&](const char* k) {
    return format_mean_std(agg.at(k).at("mean").get<double>(), agg.at(k).at("std").get<double>());
  };
  std::printf("  aggregate: mae=%s r2=%s srcc=%s\n", cell("mae").c_str(), cell("r2").c_str(),
              cell("srcc").c_str());
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool force,
            const std::string& seed_list) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!seed_list.empty()) cfg.seeds = parse_seed_list(seed_list);
  const std::string dir = resolve_experiment_dir(out_dir, cfg);
  const nlohmann::json summary = run_experiment(cfg, dir, force);
  std::printf("%s/%s (%d labeled, %zu seeds)\n", cfg.experiment.c_str(),
              summary.at("method").get<std::string>().c_str(), cfg.n_labeled, cfg.seeds.size());
  print_summary_lines(summary);
  std::printf("wrote %s\n",
              (fs::path(dir) / summary.at("method").get<std::string>() / "summary.json")
                  .string()
                  .c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, bool force, bool resume,
              int workers) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const std::string dir = resolve_experiment_dir(out_dir, cfg);
  const SweepResult res = sweep_experiment(cfg, dir, force, resume, workers);
  for (const SweepCellResult& c : res.cells) {
    if (c.ok) {
      const auto& agg = c.summary.at("aggregate").at("mae");
      std::printf("L%d/%s: %s mae=%s\n", c.n_labeled, c.method.c_str(),
                  c.skipped ? "resumed" : "ok",
                  format_mean_std(agg.at("mean").get<double>(), agg.at("std").get<double>())
                      .c_str());
    } else {
      std::printf("L%d/%s: FAILED (%s)\n", c.n_labeled, c.method.c_str(), c.error.c_str());
    }
  }
  std::printf("wrote %s\n", (fs::path(dir) / "sweep.csv").string().c_str());
  return res.all_ok() ? 0 : 1;
}

int cmd_report(const std::string& dir, std::string csv_path) {
  const ReportTable table = report_results(dir);
  std::fputs(table.text.c_str(), stdout);
  if (csv_path.empty()) csv_path = (fs::path(dir) / "report.csv").string();
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + csv_path);
  out << table.csv;
  out.flush();
  if (!out) throw data_error("write failed: " + csv_path);
  std::printf("wrote %s\n", csv_path.c_str());
  return 0;
}

// ---- self checks ----------------------------------------------------------

struct CheckState {
  int failures = 0;
};

void record(CheckState& st, const std::string& name, bool ok, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  if (!ok) ++st.failures;
}

double unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

Eigen::MatrixXd rand_matrix(std::mt19937_64& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = unit(rng);
  }
  return m;
}

Eigen::VectorXd rand_vector(std::mt19937_64& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = unit(rng);
  return v;
}

ModelLayout rand_layout(std::mt19937_64& rng) {
  ModelLayout layout;
  layout.input_dim = 1 + static_cast<int>(rng() % 3);
  switch (rng() % 3) {
    case 0: layout.hidden = {}; break;
    case 1: layout.hidden = {6}; break;
    default: layout.hidden = {7, 4}; break;
  }
  return layout;
}

// Targets a safe distance from the current predictions so the absolute-error
// kink never sits inside the finite-difference stencil.
Eigen::VectorXd offset_targets(std::mt19937_64& rng, const Eigen::VectorXd& preds) {
  std::uniform_real_distribution<double> gap(0.05, 0.4);
  Eigen::VectorXd t(preds.size());
  for (int i = 0; i < preds.size(); ++i) {
    t(i) = preds(i) + (rng() % 2 == 0 ? 1.0 : -1.0) * gap(rng);
  }
  return t;
}

// Central-difference comparison against backward(). The denominator floor of
// 1e-6 absorbs rounding noise on coordinates whose true gradient vanishes
// (score-difference losses are exactly invariant to a head-bias shift, so the
// finite difference there is pure float noise around zero).
double fd_gradient_err(const TwoHeadModel& model, const Eigen::MatrixXd& X,
                       const OutputLossFn& loss_fn, double eps) {
  const ForwardResult fr = forward(model, X);
  const OutputLoss at = loss_fn(fr.reg_out, fr.arc_score);
  const Eigen::VectorXd analytic = backward(model, fr.cache, at.grad_reg, at.grad_arc);
  const Eigen::VectorXd p0 = model.params();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < p0.size(); ++k) {
    const auto eval = [&](double delta) {
      Eigen::VectorXd p = p0;
      p(k) += delta;
      const TwoHeadModel probe = TwoHeadModel::from_params(model.layout(), p);
      Eigen::VectorXd reg, arc;
      predict(probe, X, &reg, &arc);
      return loss_fn(reg, arc).value;
    };
    const double numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
    const double err = std::abs(analytic(k) - numeric) /
                       std::max({std::abs(analytic(k)), std::abs(numeric), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

double check_output_losses_once(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const ModelLayout layout = rand_layout(rng);
  const TwoHeadModel model(layout, rng());
  const int B = 2 + static_cast<int>(rng() % 3);
  const Eigen::MatrixXd X = rand_matrix(rng, layout.input_dim, B);
  Eigen::VectorXd reg0, arc0;
  predict(model, X, &reg0, &arc0);

  const Eigen::VectorXd mae_targets = offset_targets(rng, reg0);
  const Eigen::VectorXd mse_targets = rand_vector(rng, B);
  Eigen::VectorXd labels = rand_vector(rng, B);
  if (rng() % 2 == 0 && B >= 2) labels(1) = labels(0);  // exercise tie targets
  const Eigen::VectorXd weak = rand_vector(rng, B) * 1.5;
  const ArcLossConfig arc_cfg{0.8, 1.0};

  const auto reg_only = [&](const LossGrad& lg, const Eigen::VectorXd& arc) {
    OutputLoss ol;
    ol.value = lg.value;
    ol.grad_reg = lg.grad;
    ol.grad_arc = Eigen::VectorXd::Zero(arc.size());
    return ol;
  };
  const auto arc_only = [&](const LossGrad& lg, const Eigen::VectorXd& reg) {
    OutputLoss ol;
    ol.value = lg.value;
    ol.grad_reg = Eigen::VectorXd::Zero(reg.size());
    ol.grad_arc = lg.grad;
    return ol;
  };

  double worst = 0.0;
  const double eps = 1e-5;
  worst = std::max(worst, fd_gradient_err(
                              model, X,
                              [&](const Eigen::VectorXd& reg, const Eigen::VectorXd& arc) {
                                return reg_only(
                                    regression_loss(reg, mae_targets, RegressionCriterion::Mae),
                                    arc);
                              },
                              eps));
  worst = std::max(worst, fd_gradient_err(
                              model, X,
                              [&](const Eigen::VectorXd& reg, const Eigen::VectorXd& arc) {
                                return reg_only(
                                    regression_loss(reg, mse_targets, RegressionCriterion::Mse),
                                    arc);
                              },
                              eps));
  worst = std::max(worst, fd_gradient_err(
                              model, X,
                              [&](const Eigen::VectorXd& reg, const Eigen::VectorXd& arc) {
                                return reg_only(
                                    ranknet_loss(reg, pairwise_targets_from_labels(labels)), arc);
                              },
                              eps));
  worst = std::max(worst, fd_gradient_err(
                              model, X,
                              [&](const Eigen::VectorXd& reg, const Eigen::VectorXd& arc) {
                                return arc_only(arc_labeled_loss(arc, labels), reg);
                              },
                              eps));
  worst = std::max(worst, fd_gradient_err(
                              model, X,
                              [&](const Eigen::VectorXd& reg, const Eigen::VectorXd& arc) {
                                const FixmatchPairLoss fl =
                                    arc_unlabeled_fixmatch_loss(weak, arc, arc_cfg);
                                OutputLoss ol;
                                ol.value = fl.value;
                                ol.grad_reg = Eigen::VectorXd::Zero(reg.size());
                                ol.grad_arc = fl.grad_strong;
                                return ol;
                              },
                              eps));
  return worst;
}

double check_composite_once(std::uint64_t seed, RegressionCriterion crit) {
  std::mt19937_64 rng(seed);
  const ModelLayout layout = rand_layout(rng);
  const TwoHeadModel model(layout, rng());
  const int B = 3;
  const int Bu = 4;

  RankupBatch batch;
  batch.labeled_X = rand_matrix(rng, layout.input_dim, B);
  batch.unl_weak_X = rand_matrix(rng, layout.input_dim, Bu);
  batch.unl_strong_X = rand_matrix(rng, layout.input_dim, Bu);
  batch.unl_positions = {0, 1, 2, 3};

  Eigen::VectorXd reg0, arc0, wreg0, warc0;
  predict(model, batch.labeled_X, &reg0, &arc0);
  predict(model, batch.unl_weak_X, &wreg0, &warc0);
  batch.labeled_y =
      crit == RegressionCriterion::Mae ? offset_targets(rng, reg0) : rand_vector(rng, B);

  const RdaConfig rda_cfg{1024, 1.0, 7};
  Eigen::VectorXd dist_source = rand_vector(rng, B + 2);
  PseudoLabelTable table(Bu);
  table.update(batch.unl_positions, rand_vector(rng, Bu));
  if (crit == RegressionCriterion::Mae) {
    // Shift the anchor labels until every aligned target clears the weak
    // predictions by a margin, keeping the batch loss smooth near the base
    // parameters.
    for (int tries = 0; tries < 64; ++tries) {
      PseudoLabelTable probe(Bu);
      probe.update(batch.unl_positions, table.raw());
      probe.maybe_refresh(dist_source, 1, rda_cfg);
      double margin = 1e9;
      for (int i = 0; i < Bu; ++i) {
        margin = std::min(margin, std::abs(wreg0(i) - probe.aligned()(i)));
      }
      if (margin > 1e-3) break;
      dist_source.array() += 0.37;
    }
  }
  table.maybe_refresh(dist_source, 1, rda_cfg);

  const RankupWeights weights{crit, 0.2, ArcLossConfig{0.8, 1.0}, 1.0, 7};
  const long iter = 3;
  const RankupStepResult step = rankup_step_loss(model, batch, weights, &table, iter);

  const Eigen::VectorXd p0 = model.params();
  const double eps = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < p0.size(); ++k) {
    const auto eval = [&](double delta) {
      Eigen::VectorXd p = p0;
      p(k) += delta;
      const TwoHeadModel probe = TwoHeadModel::from_params(layout, p);
      return rankup_step_loss(probe, batch, weights, &table, iter).total;
    };
    const double numeric = (eval(eps) - eval(-eps)) / (2.0 * eps);
    const double analytic = step.grad(k);
    const double err =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    worst = std::max(worst, err);
  }
  return worst;
}

void check_gradients(CheckState& st, bool quick) {
  const int n = quick ? 4 : 12;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, check_output_losses_once(900 + i));
  record(st, "gradient/output-losses", worst < 1e-4,
         "max rel err " + std::to_string(worst) + " over " + std::to_string(n) + " instances");

  double worst_c = 0.0;
  for (int i = 0; i < (quick ? 2 : 6); ++i) {
    worst_c = std::max(worst_c, check_composite_once(7000 + i, RegressionCriterion::Mae));
    worst_c = std::max(worst_c, check_composite_once(7100 + i, RegressionCriterion::Mse));
  }
  record(st, "gradient/composite-objective", worst_c < 1e-4,
         "max rel err " + std::to_string(worst_c));
}

double oracle_ce(double y, double p) { return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)); }
double oracle_sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_loss_oracles(CheckState& st, bool quick) {
  const int n_inst = quick ? 20 : 100;
  double worst = 0.0;
  std::mt19937_64 rng(4242);
  for (int inst = 0; inst < n_inst; ++inst) {
    const int n = 1 + static_cast<int>(rng() % 5);
    const Eigen::VectorXd s = rand_vector(rng, n) * 2.0;
    const Eigen::VectorXd w = rand_vector(rng, n) * 2.0;
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = std::round(unit(rng) * 5.0) / 5.0;  // induces ties

    double ranknet_ref = 0.0;
    double arc_ref = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double target = y(i) > y(j) ? 1.0 : (y(i) < y(j) ? 0.0 : 0.5);
        ranknet_ref += oracle_ce(target, oracle_sigmoid(s(i) - s(j)));
        arc_ref += oracle_ce(y(i) > y(j) ? 1.0 : 0.0, oracle_sigmoid(2.0 * (s(i) - s(j))));
      }
    }
    ranknet_ref /= double(n) * n;
    arc_ref /= double(n) * n;
    worst = std::max(worst,
                     std::abs(ranknet_loss(s, pairwise_targets_from_labels(y)).value - ranknet_ref));
    worst = std::max(worst, std::abs(arc_labeled_loss(s, y).value - arc_ref));

    const double tau = 0.6 + 0.35 * std::abs(unit(rng));
    double fix_ref = 0.0;
    long kept = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double wp = oracle_sigmoid(2.0 * (w(i) - w(j)));
        const double conf = std::max(wp, 1.0 - wp);
        if (!(conf > tau)) continue;
        ++kept;
        const double sp = oracle_sigmoid(2.0 * (s(i) - s(j)));
        fix_ref += wp > 0.5 ? -std::log(sp) : -std::log(1.0 - sp);
      }
    }
    fix_ref /= double(n) * n;
    const FixmatchPairLoss fl = arc_unlabeled_fixmatch_loss(w, s, ArcLossConfig{tau, 1.0});
    worst = std::max(worst, std::abs(fl.value - fix_ref));
    worst = std::max(worst, std::abs(fl.mask_rate - double(kept) / (double(n) * n)));

    const Eigen::VectorXd t = rand_vector(rng, n);
    double mae_ref = 0.0;
    double mse_ref = 0.0;
    for (int i = 0; i < n; ++i) {
      mae_ref += std::abs(s(i) - t(i));
      mse_ref += (s(i) - t(i)) * (s(i) - t(i));
    }
    worst = std::max(worst,
                     std::abs(regression_loss(s, t, RegressionCriterion::Mae).value - mae_ref / n));
    worst = std::max(worst,
                     std::abs(regression_loss(s, t, RegressionCriterion::Mse).value - mse_ref / n));
  }
  record(st, "losses/pairwise-oracles", worst < 1e-10,
         "max abs deviation " + std::to_string(worst));
}

void check_rda(CheckState& st, bool quick) {
  const int n_inst = quick ? 50 : 300;
  std::mt19937_64 rng(991);
  bool ok = true;
  std::string detail = "interpolation anchors, alignment invariants";
  for (int inst = 0; inst < n_inst && ok; ++inst) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const int m = 1 + static_cast<int>(rng() % 8);
    Eigen::VectorXd labels = rand_vector(rng, k) * 4.0;
    const LabeledDistribution dist = interpolate_labeled_distribution(labels, m);
    std::vector<double> sorted(labels.data(), labels.data() + k);
    std::sort(sorted.begin(), sorted.end());
    if (m >= 2) {
      ok = ok && std::abs(dist.sorted_values(0) - sorted.front()) < 1e-12;
      ok = ok && std::abs(dist.sorted_values(m - 1) - sorted.back()) < 1e-12;
      for (int t = 0; t + 1 < m; ++t) {
        ok = ok && dist.sorted_values(t) <= dist.sorted_values(t + 1) + 1e-12;
      }
      for (int t = 0; t < m; ++t) {
        const double pos = double(t) * (k - 1) / (m - 1);
        const int i0 = std::min(static_cast<int>(pos), k - 2);
        const double ref = sorted[i0] + (pos - i0) * (sorted[i0 + 1] - sorted[i0]);
        ok = ok && std::abs(dist.sorted_values(t) - ref) < 1e-12;
      }
    } else {
      ok = ok && std::abs(dist.sorted_values(0) - sorted[(k - 1) / 2]) < 1e-12;
    }
    if (!ok) {
      detail = "interpolation mismatch at instance " + std::to_string(inst);
      break;
    }

    const int n = m;
    const Eigen::VectorXd pseudo = rand_vector(rng, n) * 3.0;
    const Eigen::VectorXd aligned = align(pseudo, dist);
    std::vector<double> a(aligned.data(), aligned.data() + n);
    std::sort(a.begin(), a.end());
    for (int t = 0; t < n; ++t) ok = ok && std::abs(a[t] - dist.sorted_values(t)) < 1e-12;
    for (int i = 0; i < n && ok; ++i) {
      for (int j = 0; j < n; ++j) {
        if (pseudo(i) < pseudo(j)) ok = ok && aligned(i) <= aligned(j) + 1e-12;
      }
    }
    const Eigen::VectorXd again = align(aligned, dist);
    for (int i = 0; i < n; ++i) ok = ok && again(i) == aligned(i);
    if (!ok) {
      detail = "alignment invariant broken at instance " + std::to_string(inst);
      break;
    }
  }
  record(st, "rda/align-invariants", ok, detail);

  PseudoLabelTable table(5);
  table.update({0, 1, 2, 3, 4}, Eigen::VectorXd::LinSpaced(5, -1.0, 1.0));
  Eigen::VectorXd anchor(3);
  anchor << 0.0, 1.0, 2.0;
  const RdaConfig cfg{1024, 1.0, 1};
  for (long iter = 1; iter <= 4096; ++iter) table.maybe_refresh(anchor, iter, cfg);
  const bool counts_ok = table.bootstrap_aligns() == 1 && table.scheduled_aligns() == 4;
  record(st, "rda/refresh-schedule", counts_ok,
         "bootstrap " + std::to_string(table.bootstrap_aligns()) + ", scheduled " +
             std::to_string(table.scheduled_aligns()) + " over 4096 iterations (period 1024)");
}

void check_metrics(CheckState& st, bool quick) {
  const int n_inst = quick ? 20 : 100;
  std::mt19937_64 rng(5151);
  double worst = 0.0;
  for (int inst = 0; inst < n_inst; ++inst) {
    const int n = 2 + static_cast<int>(rng() % 7);
    Eigen::VectorXd p = rand_vector(rng, n) * 3.0;
    Eigen::VectorXd t = rand_vector(rng, n) * 3.0;
    if (inst % 3 == 0 && n >= 3) p(2) = p(0);  // tied predictions
    if (t.maxCoeff() - t.minCoeff() < 1e-6) t(0) += 1.0;

    double mae_ref = 0.0;
    for (int i = 0; i < n; ++i) mae_ref += std::abs(p(i) - t(i));
    mae_ref /= n;
    worst = std::max(worst, std::abs(mae(p, t) - mae_ref));

    const double mean_t = t.mean();
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (int i = 0; i < n; ++i) {
      ss_res += (t(i) - p(i)) * (t(i) - p(i));
      ss_tot += (t(i) - mean_t) * (t(i) - mean_t);
    }
    worst = std::max(worst, std::abs(r2(p, t) - (1.0 - ss_res / ss_tot)));

    const auto ranks_of = [](const Eigen::VectorXd& v) {
      const int n2 = static_cast<int>(v.size());
      std::vector<int> idx(n2);
      for (int i = 0; i < n2; ++i) idx[i] = i;
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v(a) < v(b); });
      Eigen::VectorXd r(n2);
      int i = 0;
      while (i < n2) {
        int j = i;
        while (j + 1 < n2 && v(idx[j + 1]) == v(idx[i])) ++j;
        const double shared = (double(i) + double(j)) / 2.0 + 1.0;
        for (int q = i; q <= j; ++q) r(idx[q]) = shared;
        i = j + 1;
      }
      return r;
    };
    const Eigen::VectorXd rp = ranks_of(p);
    const Eigen::VectorXd rt = ranks_of(t);
    const double mp = rp.mean();
    const double mt = rt.mean();
    double cov = 0.0;
    double vp = 0.0;
    double vt = 0.0;
    for (int i = 0; i < n; ++i) {
      cov += (rp(i) - mp) * (rt(i) - mt);
      vp += (rp(i) - mp) * (rp(i) - mp);
      vt += (rt(i) - mt) * (rt(i) - mt);
    }
    if (vp > 0 && vt > 0) {
      worst = std::max(worst, std::abs(srcc(p, t) - cov / std::sqrt(vp * vt)));
    }
  }
  record(st, "metrics/oracle-agreement", worst < 1e-10,
         "max abs deviation " + std::to_string(worst));

  Eigen::VectorXd p(2), t(2);
  p << 1.0, 0.0;
  t << 0.0, 1.0;
  const bool r2_ok = std::abs(r2(p, t) - (-3.0)) < 1e-12;
  record(st, "metrics/worked-examples", r2_ok && format_mean_std(2.0, 0.816496580927726) == "2.00±0.82",
         "anti-correlated r2 and mean±std formatting");
}

void check_masks(CheckState& st) {
  std::mt19937_64 rng(616);
  bool ok = true;
  for (int inst = 0; inst < 20 && ok; ++inst) {
    const int n = 3 + static_cast<int>(rng() % 6);
    const Eigen::VectorXd w = rand_vector(rng, n) * 2.0;
    const Eigen::VectorXd s = rand_vector(rng, n) * 2.0;
    double prev = 2.0;
    for (const double tau : {0.55, 0.7, 0.9, 0.99, 1.0}) {
      const FixmatchPairLoss fl = arc_unlabeled_fixmatch_loss(w, s, ArcLossConfig{tau, 1.0});
      ok = ok && fl.mask_rate >= 0.0 && fl.mask_rate <= prev;
      if (tau == 1.0) ok = ok && fl.mask_rate == 0.0 && fl.value == 0.0;
      prev = fl.mask_rate;
    }
  }
  record(st, "arc/threshold-monotonicity", ok,
         "pair keep rate non-increasing in tau; tau=1 keeps nothing");
}

int cmd_check(bool quick) {
  CheckState st;
  check_gradients(st, quick);
  check_loss_oracles(st, quick);
  check_rda(st, quick);
  check_metrics(st, quick);
  check_masks(st);
  if (st.failures == 0) {
    std::printf("all checks passed\n");
    return 0;
  }
  std::printf("%d check(s) failed\n", st.failures);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised regression workbench: ranking-consistency training with "
               "distribution alignment, plus supervised and consistency baselines"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string seed_list;
  std::string report_dir;
  std::string csv_path;
  bool force = false;
  bool resume = false;
  bool quick = false;
  int workers = 1;

  CLI::App* run = app.add_subcommand("run", "Train one method over the configured seeds");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir,
                  "Experiment directory (default: config output.dir, else $RANKUP_OUT/<name>, "
                  "else out/<name>)");
  run->add_flag("--force", force, "Overwrite an existing method directory");
  run->add_option("--seed-list", seed_list, "Comma-separated seeds overriding the config");

  CLI::App* sweep = app.add_subcommand("sweep", "Run the methods x label-budgets grid");
  sweep->add_option("--config", config_path, "Experiment config with a sweep block")->required();
  sweep->add_option("--out", out_dir, "Experiment directory (same resolution as run)");
  sweep->add_flag("--force", force, "Overwrite existing cell directories");
  sweep->add_flag("--resume", resume, "Skip cells that already have a summary.json");
  sweep->add_option("--workers", workers, "Concurrent cells")->check(CLI::PositiveNumber);

  CLI::App* report = app.add_subcommand("report", "Tabulate summary.json files under a directory");
  report->add_option("--dir", report_dir, "Directory to scan recursively")->required();
  report->add_option("--csv", csv_path, "CSV output path (default <dir>/report.csv)");

  CLI::App* check = app.add_subcommand("check", "Run the built-in verification suites");
  check->add_flag("--quick", quick, "Smaller instance counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, force, seed_list);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, force, resume, workers);
    if (report->parsed()) return cmd_report(report_dir, csv_path);
    return cmd_check(quick);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
