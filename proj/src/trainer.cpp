#include "rankup/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rankup {
namespace {

std::vector<int> sample_with_replacement(int count, int pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, pool - 1);
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i) out[i] = pick(rng);
  return out;
}

// Gathers rows into columns, applying one augmentation per sample.
Eigen::MatrixXd gather_augmented(const Eigen::MatrixXd& rows, const std::vector<int>& idx,
                                 AugmentKind kind, const AugmentConfig& cfg,
                                 std::mt19937_64& rng) {
  Eigen::MatrixXd X(rows.cols(), idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    X.col(static_cast<Eigen::Index>(k)) =
        augment(rows.row(idx[k]).transpose(), kind, cfg, rng);
  }
  return X;
}

Eigen::VectorXd gather(const Eigen::VectorXd& values, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = values(idx[k]);
  return out;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "supervised") return Method::Supervised;
  if (name == "fully_supervised") return Method::FullySupervised;
  if (name == "pi_model") return Method::PiModel;
  if (name == "mean_teacher") return Method::MeanTeacher;
  if (name == "mixmatch_reg") return Method::MixmatchReg;
  if (name == "rankup") return Method::Rankup;
  if (name == "rankup_rda") return Method::RankupRda;
  throw config_error("unknown method '" + name +
                     "' (want supervised, fully_supervised, pi_model, mean_teacher, "
                     "mixmatch_reg, rankup, rankup_rda)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Supervised: return "supervised";
    case Method::FullySupervised: return "fully_supervised";
    case Method::PiModel: return "pi_model";
    case Method::MeanTeacher: return "mean_teacher";
    case Method::MixmatchReg: return "mixmatch_reg";
    case Method::Rankup: return "rankup";
    case Method::RankupRda: return "rankup_rda";
  }
  throw contract_error("unhandled method");
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw config_error("method.total_iters must be >= 1");
  if (eval_every < 1) throw config_error("method.eval_every must be >= 1");
  if (labeled_batch < 1) throw config_error("method.labeled_batch must be >= 1");
  if (!(unlabeled_batch_ratio >= 0.0)) throw config_error("method.unlabeled_batch_ratio must be >= 0");
  if (!(learning_rate > 0.0)) throw config_error("method.optimizer.learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw config_error("method.optimizer.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw config_error("method.optimizer.weight_decay must be >= 0");
  if (hidden_sizes.size() > 16) throw config_error("method.model.hidden_sizes: too many layers");
  for (int h : hidden_sizes) {
    if (h < 1) throw config_error("method.model.hidden_sizes entries must be >= 1");
  }
  if (!(omega_arc >= 0.0)) throw config_error("method.arc.omega_arc must be >= 0");
  arc.validate();
  if (!(temperature > 0.0)) throw config_error("method.arc.temperature must be > 0");
  if (rda_refresh_period < 1) throw config_error("method.rda.refresh_period must be >= 1");
  if (!(omega_rda >= 0.0)) throw config_error("method.rda.omega_rda must be >= 0");
  if (!(rda_warmup_fraction >= 0.0 && rda_warmup_fraction <= 1.0)) {
    throw config_error("method.rda.warmup_fraction must lie in [0, 1]");
  }
  augment.validate();
  if (!(consistency_weight >= 0.0)) throw config_error("method.consistency.weight must be >= 0");
  if (!(consistency_warmup_fraction >= 0.0 && consistency_warmup_fraction <= 1.0)) {
    throw config_error("method.consistency.warmup_fraction must lie in [0, 1]");
  }
  if (!(mixup_alpha > 0.0)) throw config_error("method.mixup_alpha must be > 0");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw config_error("method.ema_decay must lie in [0, 1]");
}

long TrainConfig::alpha_warm_rda() const {
  return std::max(1L, std::lround(rda_warmup_fraction * static_cast<double>(total_iters)));
}

long TrainConfig::alpha_warm_consistency() const {
  return std::max(1L, std::lround(consistency_warmup_fraction * static_cast<double>(total_iters)));
}

int TrainConfig::unlabeled_batch() const {
  return static_cast<int>(std::lround(unlabeled_batch_ratio * labeled_batch));
}

RankupStepResult rankup_step_loss(const TwoHeadModel& m, const RankupBatch& batch,
                                  const RankupWeights& weights, const PseudoLabelTable* table,
                                  long iter) {
  RankupStepResult r;
  r.warmup = warmup_factor(iter, weights.alpha_warm);

  // Labeled branch: regression head always, ranking head when weighted. The
  // backward call is issued with an explicit (possibly zero) ranking gradient
  // so every method runs the identical labeled arithmetic.
  const ForwardResult fl = forward(m, batch.labeled_X);
  const LossGrad reg = regression_loss(fl.reg_out, batch.labeled_y, weights.criterion);
  r.reg = reg.value;
  Eigen::VectorXd g_arc_labeled = Eigen::VectorXd::Zero(fl.arc_score.size());
  if (weights.omega_arc > 0.0) {
    const LossGrad al = arc_labeled_loss(fl.arc_score, batch.labeled_y);
    r.arc_labeled = al.value;
    g_arc_labeled = weights.omega_arc * al.grad;
  }
  r.grad = backward(m, fl.cache, reg.grad, g_arc_labeled);

  const int Bu = static_cast<int>(batch.unl_weak_X.cols());
  const bool want_strong = Bu > 0 && weights.omega_arc > 0.0 && weights.arc.omega_ulb > 0.0;
  const bool want_weak = want_strong || (Bu > 0 && table != nullptr && weights.omega_rda > 0.0);

  if (want_weak) {
    if (batch.unl_strong_X.cols() != Bu && want_strong) {
      throw shape_error("rankup_step_loss: weak and strong views must have equal batch size");
    }
    const ForwardResult fw = forward(m, batch.unl_weak_X);
    r.unl_weak_reg = fw.reg_out;

    std::optional<ForwardResult> fs;
    FixmatchPairLoss fm;
    if (want_strong) {
      fs.emplace(forward(m, batch.unl_strong_X));
      fm = arc_unlabeled_fixmatch_loss(fw.arc_score, fs->arc_score, weights.arc);
      r.arc_unlabeled = fm.value;
      r.mask_rate = fm.mask_rate;
    }

    if (table != nullptr && weights.omega_rda > 0.0) {
      const RdaBatchLoss rl = rda_batch_loss(*table, batch.unl_positions, fw.reg_out,
                                             weights.criterion);
      r.rda = rl.value;
      const double scale = weights.omega_rda * r.warmup;
      if (rl.table_ready && scale > 0.0) {
        r.grad += backward(m, fw.cache, scale * rl.grad,
                           Eigen::VectorXd::Zero(Bu));
      }
    }

    if (want_strong) {
      const double scale = weights.omega_arc * weights.arc.omega_ulb;
      r.grad += backward(m, fs->cache, Eigen::VectorXd::Zero(Bu),
                         scale * fm.grad_strong);
    }
  }

  r.total = rankup_total_loss(r.reg, r.rda, r.arc_labeled + weights.arc.omega_ulb * r.arc_unlabeled,
                              weights.omega_rda, weights.omega_arc, iter, weights.alpha_warm);
  return r;
}

RunRecord train(const TrainConfig& cfg, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                const Dataset& test, std::uint64_t seed, const StepObserver& observer) {
  cfg.validate();
  const int dim = labeled.dim();
  if (labeled.n() < 2) throw config_error("train: need at least two labeled samples");
  if (test.n() < 1) throw config_error("train: empty test set");
  if (test.dim() != dim) throw shape_error("train: test feature width differs from labeled data");
  const bool uses_unlabeled = cfg.method != Method::Supervised;
  if (uses_unlabeled) {
    if (unlabeled.n() < 1) throw config_error("train: method needs unlabeled samples");
    if (unlabeled.dim() != dim) {
      throw shape_error("train: unlabeled feature width differs from labeled data");
    }
  }
  const bool uses_unlabeled_batches =
      cfg.method == Method::PiModel || cfg.method == Method::MeanTeacher ||
      cfg.method == Method::MixmatchReg || cfg.method == Method::Rankup ||
      cfg.method == Method::RankupRda;
  const int B = cfg.labeled_batch;
  const int Bu = cfg.unlabeled_batch();
  if (uses_unlabeled_batches && Bu < 1) {
    throw config_error("train: unlabeled batch is empty; raise method.unlabeled_batch_ratio");
  }

  const LabelScaler scaler = fit_scaler(labeled);
  const Eigen::VectorXd y_lb = scaler.normalize(labeled.targets);

  // The fully supervised reference arm trains on everything with true labels.
  Eigen::MatrixXd pool_X;
  Eigen::VectorXd pool_y;
  if (cfg.method == Method::FullySupervised) {
    pool_X.resize(labeled.n() + unlabeled.n(), dim);
    pool_X.topRows(labeled.n()) = labeled.features;
    pool_X.bottomRows(unlabeled.n()) = unlabeled.features;
    pool_y.resize(labeled.n() + unlabeled.n());
    pool_y.head(labeled.n()) = y_lb;
    pool_y.tail(unlabeled.n()) = scaler.normalize(unlabeled.reference_targets());
  }

  TwoHeadModel model(ModelLayout{dim, cfg.hidden_sizes}, derive_seed(seed, stream::model_init));
  OptimState opt{cfg.learning_rate, cfg.momentum, cfg.weight_decay,
                 Eigen::VectorXd::Zero(model.params().size())};
  EmaState ema{cfg.ema_decay, model.params()};

  std::optional<PseudoLabelTable> table;
  RdaConfig rda_cfg{cfg.rda_refresh_period, cfg.omega_rda, cfg.alpha_warm_rda()};
  if (cfg.method == Method::RankupRda) table.emplace(unlabeled.n());

  std::mt19937_64 rng_lb_sampler(derive_seed(seed, stream::labeled_sampler));
  std::mt19937_64 rng_lb_aug(derive_seed(seed, stream::labeled_aug));
  std::mt19937_64 rng_ul_sampler(derive_seed(seed, stream::unlabeled_sampler));
  std::mt19937_64 rng_ul_weak(derive_seed(seed, stream::unlabeled_weak));
  std::mt19937_64 rng_ul_strong(derive_seed(seed, stream::unlabeled_strong));
  std::mt19937_64 rng_branch(derive_seed(seed, stream::branch_aug));
  std::mt19937_64 rng_mix(derive_seed(seed, stream::mixup));

  RankupWeights weights;
  weights.criterion = cfg.criterion;
  weights.arc = cfg.arc;
  weights.alpha_warm = cfg.alpha_warm_rda();
  if (cfg.method == Method::Rankup || cfg.method == Method::RankupRda) {
    weights.omega_arc = cfg.omega_arc;
  }
  if (cfg.method == Method::RankupRda) weights.omega_rda = cfg.omega_rda;

  const long alpha_cons = cfg.alpha_warm_consistency();

  RunRecord rec;
  rec.seed = seed;
  rec.method = cfg.method;
  rec.scaler = scaler;
  rec.layout = model.layout();
  rec.iterations.reserve(static_cast<std::size_t>(cfg.total_iters));

  const auto eval_now = [&]() {
    if (cfg.eval_with_ema) {
      return evaluate(TwoHeadModel::from_params(model.layout(), ema.shadow), test, scaler);
    }
    return evaluate(model, test, scaler);
  };

  for (long iter = 1; iter <= cfg.total_iters; ++iter) {
    IterationLog log;
    log.iter = iter;

    if (table) {
      if (!table->initialized()) {
        // Bootstrap: one full inference pass fills the raw table, then the
        // first alignment runs regardless of the refresh schedule.
        Eigen::VectorXd preds;
        predict(model, unlabeled.features.transpose(), &preds, nullptr);
        std::vector<int> all(unlabeled.n());
        std::iota(all.begin(), all.end(), 0);
        table->update(all, preds);
      }
      table->maybe_refresh(y_lb, iter, rda_cfg);
    }

    Eigen::VectorXd grad;
    switch (cfg.method) {
      case Method::Supervised:
      case Method::FullySupervised:
      case Method::Rankup:
      case Method::RankupRda: {
        const bool pooled = cfg.method == Method::FullySupervised;
        const Eigen::MatrixXd& src_X = pooled ? pool_X : labeled.features;
        const Eigen::VectorXd& src_y = pooled ? pool_y : y_lb;

        RankupBatch batch;
        const std::vector<int> idx =
            sample_with_replacement(B, static_cast<int>(src_X.rows()), rng_lb_sampler);
        batch.labeled_X = gather_augmented(src_X, idx, AugmentKind::Weak, cfg.augment, rng_lb_aug);
        batch.labeled_y = gather(src_y, idx);
        if (cfg.method == Method::Rankup || cfg.method == Method::RankupRda) {
          batch.unl_positions = sample_with_replacement(Bu, unlabeled.n(), rng_ul_sampler);
          batch.unl_weak_X = gather_augmented(unlabeled.features, batch.unl_positions,
                                              AugmentKind::Weak, cfg.augment, rng_ul_weak);
          batch.unl_strong_X = gather_augmented(unlabeled.features, batch.unl_positions,
                                                AugmentKind::Strong, cfg.augment, rng_ul_strong);
        }

        RankupStepResult step =
            rankup_step_loss(model, batch, weights, table ? &*table : nullptr, iter);
        if (table && step.unl_weak_reg.size() > 0) {
          table->update(batch.unl_positions, step.unl_weak_reg);
        }
        grad = std::move(step.grad);
        log.total = step.total;
        log.reg = step.reg;
        log.arc_labeled = step.arc_labeled;
        log.arc_unlabeled = step.arc_unlabeled;
        log.rda = step.rda;
        log.mask_rate = step.mask_rate;
        log.warmup = step.warmup;
        break;
      }

      case Method::PiModel:
      case Method::MeanTeacher: {
        const std::vector<int> idx = sample_with_replacement(B, labeled.n(), rng_lb_sampler);
        const Eigen::MatrixXd Xl =
            gather_augmented(labeled.features, idx, AugmentKind::Weak, cfg.augment, rng_lb_aug);
        const ForwardResult fl = forward(model, Xl);
        const LossGrad reg = regression_loss(fl.reg_out, gather(y_lb, idx), cfg.criterion);
        grad = backward(model, fl.cache, reg.grad, Eigen::VectorXd::Zero(B));

        const std::vector<int> upos = sample_with_replacement(Bu, unlabeled.n(), rng_ul_sampler);
        const Eigen::MatrixXd X1 = gather_augmented(unlabeled.features, upos, AugmentKind::Weak,
                                                    cfg.augment, rng_ul_weak);
        const Eigen::MatrixXd X2 = gather_augmented(unlabeled.features, upos, AugmentKind::Weak,
                                                    cfg.augment, rng_branch);
        const ForwardResult f1 = forward(model, X1);
        Eigen::VectorXd target;  // gradient-stopped branch
        if (cfg.method == Method::PiModel) {
          predict(model, X2, &target, nullptr);
        } else {
          const TwoHeadModel teacher = TwoHeadModel::from_params(model.layout(), ema.shadow);
          predict(teacher, X2, &target, nullptr);
        }
        const LossGrad cons = regression_loss(f1.reg_out, target, RegressionCriterion::Mse);
        const double warm = warmup_factor(iter, alpha_cons);
        const double w = cfg.consistency_weight * warm;
        if (w > 0.0) grad += backward(model, f1.cache, w * cons.grad, Eigen::VectorXd::Zero(Bu));
        log.reg = reg.value;
        log.consistency = cons.value;
        log.warmup = warm;
        log.total = reg.value + w * cons.value;
        break;
      }

      case Method::MixmatchReg: {
        const std::vector<int> idx = sample_with_replacement(B, labeled.n(), rng_lb_sampler);
        const Eigen::MatrixXd Xl =
            gather_augmented(labeled.features, idx, AugmentKind::Weak, cfg.augment, rng_lb_aug);
        const Eigen::VectorXd yl = gather(y_lb, idx);
        const std::vector<int> upos = sample_with_replacement(Bu, unlabeled.n(), rng_ul_sampler);
        const Eigen::MatrixXd Xu = gather_augmented(unlabeled.features, upos, AugmentKind::Weak,
                                                    cfg.augment, rng_ul_weak);
        Eigen::VectorXd qu;  // gradient-stopped pseudo-targets
        predict(model, Xu, &qu, nullptr);

        const int P = B + Bu;
        Eigen::MatrixXd W(dim, P);
        W.leftCols(B) = Xl;
        W.rightCols(Bu) = Xu;
        Eigen::VectorXd t(P);
        t.head(B) = yl;
        t.tail(Bu) = qu;

        std::vector<int> perm(P);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng_mix);

        std::gamma_distribution<double> gamma(cfg.mixup_alpha, 1.0);
        Eigen::MatrixXd Xmix(dim, P);
        Eigen::VectorXd tmix(P);
        for (int k = 0; k < P; ++k) {
          const double g1 = gamma(rng_mix);
          const double g2 = gamma(rng_mix);
          double lam = g1 + g2 > 0.0 ? g1 / (g1 + g2) : 0.5;
          lam = std::max(lam, 1.0 - lam);  // keep the original sample dominant
          Xmix.col(k) = lam * W.col(k) + (1.0 - lam) * W.col(perm[k]);
          tmix(k) = lam * t(k) + (1.0 - lam) * t(perm[k]);
        }

        const ForwardResult fm = forward(model, Xmix);
        const LossGrad lab = regression_loss(fm.reg_out.head(B), tmix.head(B), cfg.criterion);
        const LossGrad unl =
            regression_loss(fm.reg_out.tail(Bu), tmix.tail(Bu), RegressionCriterion::Mse);
        const double warm = warmup_factor(iter, alpha_cons);
        const double w = cfg.consistency_weight * warm;
        Eigen::VectorXd g_out(P);
        g_out.head(B) = lab.grad;
        g_out.tail(Bu) = w * unl.grad;
        grad = backward(model, fm.cache, g_out, Eigen::VectorXd::Zero(P));
        log.reg = lab.value;
        log.consistency = unl.value;
        log.warmup = warm;
        log.total = lab.value + w * unl.value;
        break;
      }
    }

    if (!std::isfinite(log.total)) {
      throw numeric_error("train: non-finite loss " + std::to_string(log.total) + " at iteration " +
                          std::to_string(iter) + " (" + to_string(cfg.method) + ")");
    }
    try {
      sgd_step(model, grad, opt);
    } catch (const numeric_error& e) {
      throw numeric_error("train: iteration " + std::to_string(iter) + " (" +
                          to_string(cfg.method) + "): " + e.what());
    }
    ema_update(ema, model);
    if (observer) observer(iter, model, ema.shadow);
    rec.iterations.push_back(log);

    if (iter % cfg.eval_every == 0 && iter != cfg.total_iters) {
      rec.evals.push_back({iter, eval_now()});
    }
  }

  rec.final_metrics = eval_now();
  rec.evals.push_back({cfg.total_iters, rec.final_metrics});
  rec.final_params = cfg.eval_with_ema ? ema.shadow : model.params();
  if (table) rec.table = std::move(table);
  return rec;
}

MetricsReport evaluate(const TwoHeadModel& m, const Dataset& test, const LabelScaler& scaler) {
  if (test.n() < 1) throw config_error("evaluate: empty test set");
  Eigen::VectorXd preds;
  predict(m, test.features.transpose(), &preds, nullptr);
  return compute_metrics(scaler.denormalize(preds), test.targets);
}

AggregateStats aggregate(const std::vector<double>& values) {
  if (values.empty()) throw config_error("aggregate: no values");
  AggregateStats s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

ProtocolResult run_protocol(const TrainConfig& cfg, const Dataset& train_pool, const Dataset& test,
                            int n_labeled, const std::vector<std::uint64_t>& seeds,
                            const std::function<void(const RunRecord&)>& on_run) {
  if (seeds.empty()) throw config_error("run_protocol: need at least one seed");

  ProtocolResult result;
  std::vector<double> maes, r2s, srccs;
  for (std::uint64_t seed : seeds) {
    auto [labeled, unlabeled] = split_labeled(train_pool, SplitSpec{n_labeled, seed});
    RunRecord rec = train(cfg, labeled, unlabeled, test, seed);
    maes.push_back(rec.final_metrics.mae);
    r2s.push_back(rec.final_metrics.r2);
    srccs.push_back(rec.final_metrics.srcc);
    if (on_run) on_run(rec);
    result.runs.push_back(std::move(rec));
  }
  result.mae = aggregate(maes);
  result.r2 = aggregate(r2s);
  result.srcc = aggregate(srccs);
  return result;
}

}  // namespace rankup
