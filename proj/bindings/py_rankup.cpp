#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "rankup/dataset.hpp"
#include "rankup/experiment.hpp"
#include "rankup/losses.hpp"
#include "rankup/metrics.hpp"
#include "rankup/model.hpp"
#include "rankup/rda.hpp"
#include "rankup/trainer.hpp"

namespace py = pybind11;
using namespace rankup;

namespace {

RegressionCriterion criterion_from(const std::string& name) { return parse_criterion(name); }

// The trainer RNG draws are all keyed off explicit seeds, so releasing the
// GIL during long runs keeps notebooks responsive without changing results.
RunRecord train_nogil(const TrainConfig& cfg, const LabeledSet& lab, const UnlabeledSet& unl,
                      const Dataset& test, std::uint64_t seed) {
  py::gil_scoped_release release;
  return train(cfg, lab, unl, test, seed);
}

ProtocolResult protocol_nogil(const TrainConfig& cfg, const Dataset& train_pool,
                              const Dataset& test, int n_labeled,
                              const std::vector<std::uint64_t>& seeds) {
  py::gil_scoped_release release;
  return run_protocol(cfg, train_pool, test, n_labeled, seeds);
}

}  // namespace

PYBIND11_MODULE(rankup, m) {
  m.doc() = "Semi-supervised regression with an auxiliary ranking head";

  py::register_exception<config_error>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
  py::register_exception<shape_error>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<contract_error>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<numeric_error>(m, "NumericError", PyExc_ArithmeticError);

  // ------------------------------------------------------------------ data
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("features", &Dataset::features)
      .def_readwrite("targets", &Dataset::targets)
      .def_readwrite("ids", &Dataset::ids)
      .def_property_readonly("n", &Dataset::n)
      .def_property_readonly("dim", &Dataset::dim);

  py::class_<LabeledSet>(m, "LabeledSet")
      .def(py::init<>())
      .def_readwrite("features", &LabeledSet::features)
      .def_readwrite("targets", &LabeledSet::targets)
      .def_readwrite("ids", &LabeledSet::ids)
      .def_property_readonly("n", &LabeledSet::n);

  py::class_<UnlabeledSet>(m, "UnlabeledSet")
      .def(py::init<>())
      .def_readwrite("features", &UnlabeledSet::features)
      .def_readwrite("ids", &UnlabeledSet::ids)
      .def_property_readonly("n", &UnlabeledSet::n)
      .def("reference_targets", &UnlabeledSet::reference_targets,
           py::return_value_policy::copy)
      .def_property_readonly("reference_reads", &UnlabeledSet::reference_reads);

  m.def(
      "generate_synthetic",
      [](const std::string& task, int n_samples, double noise_sigma, std::uint64_t seed) {
        return generate_synthetic(parse_synthetic_task(task), n_samples, noise_sigma, seed);
      },
      py::arg("task"), py::arg("n_samples"), py::arg("noise_sigma") = 0.1, py::arg("seed") = 0);
  m.def("load_csv", &load_csv, py::arg("path"), py::arg("target_column"));
  m.def("split_train_test", &split_train_test, py::arg("dataset"), py::arg("test_fraction"),
        py::arg("seed"));
  m.def(
      "split_labeled",
      [](const Dataset& d, int n_labeled, std::uint64_t seed) {
        return split_labeled(d, SplitSpec{n_labeled, seed});
      },
      py::arg("dataset"), py::arg("n_labeled"), py::arg("seed"));

  py::class_<LabelScaler>(m, "LabelScaler")
      .def(py::init<>())
      .def(py::init([](double lo, double hi) { return LabelScaler{lo, hi}; }), py::arg("y_min"),
           py::arg("y_max"))
      .def_readwrite("y_min", &LabelScaler::y_min)
      .def_readwrite("y_max", &LabelScaler::y_max)
      .def("normalize",
           py::overload_cast<const Eigen::VectorXd&>(&LabelScaler::normalize, py::const_))
      .def("denormalize",
           py::overload_cast<const Eigen::VectorXd&>(&LabelScaler::denormalize, py::const_))
      .def("normalize_value", py::overload_cast<double>(&LabelScaler::normalize, py::const_))
      .def("denormalize_value", py::overload_cast<double>(&LabelScaler::denormalize, py::const_));
  m.def("fit_scaler", &fit_scaler, py::arg("labeled"));

  // ---------------------------------------------------------------- losses
  m.def(
      "regression_loss",
      [](const Eigen::VectorXd& preds, const Eigen::VectorXd& targets,
         const std::string& criterion) {
        const LossGrad r = regression_loss(preds, targets, criterion_from(criterion));
        return py::make_tuple(r.value, r.grad);
      },
      py::arg("preds"), py::arg("targets"), py::arg("criterion") = "mae",
      "Returns (value, gradient w.r.t. preds).");
  m.def(
      "ranknet_loss",
      [](const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
        const LossGrad r = ranknet_loss(scores, pairwise_targets_from_labels(labels));
        return py::make_tuple(r.value, r.grad);
      },
      py::arg("scores"), py::arg("labels"),
      "Pairwise logistic ranking loss with targets built from the labels.");
  m.def(
      "arc_labeled_loss",
      [](const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
        const LossGrad r = arc_labeled_loss(scores, labels);
        return py::make_tuple(r.value, r.grad);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "arc_unlabeled_fixmatch_loss",
      [](const Eigen::VectorXd& weak, const Eigen::VectorXd& strong, double tau,
         double omega_ulb) {
        ArcLossConfig cfg;
        cfg.tau = tau;
        cfg.omega_ulb = omega_ulb;
        const FixmatchPairLoss r = arc_unlabeled_fixmatch_loss(weak, strong, cfg);
        return py::make_tuple(r.value, r.grad_strong, r.mask_rate);
      },
      py::arg("weak_scores"), py::arg("strong_scores"), py::arg("tau") = 0.95,
      py::arg("omega_ulb") = 1.0, "Returns (value, gradient w.r.t. strong scores, mask_rate).");
  m.def("warmup_factor", &warmup_factor, py::arg("iter"), py::arg("alpha_warm"));

  // ------------------------------------------------------------------- rda
  m.def(
      "interpolate_labeled_distribution",
      [](const Eigen::VectorXd& labels, int m_anchors) {
        return interpolate_labeled_distribution(labels, m_anchors).sorted_values;
      },
      py::arg("labels"), py::arg("m"),
      "m ascending anchor values interpolated from the sorted labels.");
  m.def(
      "align",
      [](const Eigen::VectorXd& pseudo, const Eigen::VectorXd& sorted_values) {
        LabeledDistribution dist;
        dist.sorted_values = sorted_values;
        return align(pseudo, dist);
      },
      py::arg("pseudo_labels"), py::arg("sorted_values"),
      "Rank-preserving replacement of pseudo-labels by the anchor values.");

  py::class_<PseudoLabelTable>(m, "PseudoLabelTable")
      .def(py::init<int>(), py::arg("n_unlabeled"))
      .def_property_readonly("size", &PseudoLabelTable::size)
      .def_property_readonly("initialized", &PseudoLabelTable::initialized)
      .def_property_readonly("raw", [](const PseudoLabelTable& t) { return t.raw(); })
      .def_property_readonly("aligned", [](const PseudoLabelTable& t) { return t.aligned(); })
      .def_property_readonly("last_refresh_iter", &PseudoLabelTable::last_refresh_iter)
      .def_property_readonly("bootstrap_aligns", &PseudoLabelTable::bootstrap_aligns)
      .def_property_readonly("scheduled_aligns", &PseudoLabelTable::scheduled_aligns)
      .def_property_readonly("total_aligns", &PseudoLabelTable::total_aligns)
      .def("update", &PseudoLabelTable::update, py::arg("positions"), py::arg("preds"))
      .def(
          "maybe_refresh",
          [](PseudoLabelTable& t, const Eigen::VectorXd& labels, long iter, long refresh_period) {
            RdaConfig cfg;
            cfg.refresh_period = refresh_period;
            return t.maybe_refresh(labels, iter, cfg);
          },
          py::arg("labeled_labels"), py::arg("iter"), py::arg("refresh_period") = 1024);

  m.def(
      "rda_batch_loss",
      [](const PseudoLabelTable& table, const std::vector<int>& positions,
         const Eigen::VectorXd& preds, const std::string& criterion) {
        const RdaBatchLoss r = rda_batch_loss(table, positions, preds, criterion_from(criterion));
        return py::make_tuple(r.value, r.grad, r.table_ready);
      },
      py::arg("table"), py::arg("positions"), py::arg("preds"), py::arg("criterion") = "mae");

  // --------------------------------------------------------------- metrics
  m.def("mae", &mae, py::arg("preds"), py::arg("targets"));
  m.def("r2", &r2, py::arg("preds"), py::arg("targets"));
  m.def("srcc", &srcc, py::arg("preds"), py::arg("targets"));
  m.def("average_ranks", &average_ranks, py::arg("values"));

  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("mae", &MetricsReport::mae)
      .def_readonly("r2", &MetricsReport::r2)
      .def_readonly("srcc", &MetricsReport::srcc)
      .def_readonly("n", &MetricsReport::n)
      .def("__repr__", [](const MetricsReport& r) {
        return "MetricsReport(mae=" + std::to_string(r.mae) + ", r2=" + std::to_string(r.r2) +
               ", srcc=" + std::to_string(r.srcc) + ", n=" + std::to_string(r.n) + ")";
      });
  m.def("compute_metrics", &compute_metrics, py::arg("preds"), py::arg("targets"));

  // ----------------------------------------------------------------- model
  py::class_<ModelLayout>(m, "ModelLayout")
      .def(py::init([](int input_dim, std::vector<int> hidden) {
             ModelLayout l;
             l.input_dim = input_dim;
             l.hidden = std::move(hidden);
             l.validate();
             return l;
           }),
           py::arg("input_dim"), py::arg("hidden"))
      .def_readonly("input_dim", &ModelLayout::input_dim)
      .def_readonly("hidden", &ModelLayout::hidden)
      .def_property_readonly("param_count", &ModelLayout::param_count);

  py::class_<TwoHeadModel>(m, "TwoHeadModel")
      .def(py::init<const ModelLayout&, std::uint64_t>(), py::arg("layout"), py::arg("seed"))
      .def_static("from_params", &TwoHeadModel::from_params, py::arg("layout"), py::arg("params"))
      .def_property_readonly("params", [](const TwoHeadModel& m2) { return m2.params(); })
      .def_property_readonly("layout", [](const TwoHeadModel& m2) { return m2.layout(); });

  m.def(
      "forward",
      [](const TwoHeadModel& model, const Eigen::MatrixXd& X) {
        const ForwardResult r = forward(model, X);
        return py::make_tuple(r.reg_out, r.arc_score);
      },
      py::arg("model"), py::arg("X"),
      "X is d x B (columns are samples); returns (reg_out, arc_score).");
  m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  // --------------------------------------------------------------- trainer
  py::class_<ArcLossConfig>(m, "ArcLossConfig")
      .def(py::init<>())
      .def_readwrite("tau", &ArcLossConfig::tau)
      .def_readwrite("omega_ulb", &ArcLossConfig::omega_ulb);

  py::class_<AugmentConfig>(m, "AugmentConfig")
      .def(py::init<>())
      .def_readwrite("weak_noise_sigma", &AugmentConfig::weak_noise_sigma)
      .def_readwrite("strong_noise_sigma", &AugmentConfig::strong_noise_sigma)
      .def_readwrite("strong_mask_prob", &AugmentConfig::strong_mask_prob);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_property(
          "method", [](const TrainConfig& c) { return to_string(c.method); },
          [](TrainConfig& c, const std::string& s) { c.method = parse_method(s); })
      .def_property(
          "criterion", [](const TrainConfig& c) { return to_string(c.criterion); },
          [](TrainConfig& c, const std::string& s) { c.criterion = parse_criterion(s); })
      .def_readwrite("total_iters", &TrainConfig::total_iters)
      .def_readwrite("eval_every", &TrainConfig::eval_every)
      .def_readwrite("labeled_batch", &TrainConfig::labeled_batch)
      .def_readwrite("unlabeled_batch_ratio", &TrainConfig::unlabeled_batch_ratio)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("hidden_sizes", &TrainConfig::hidden_sizes)
      .def_readwrite("omega_arc", &TrainConfig::omega_arc)
      .def_readwrite("arc", &TrainConfig::arc)
      .def_readwrite("rda_refresh_period", &TrainConfig::rda_refresh_period)
      .def_readwrite("omega_rda", &TrainConfig::omega_rda)
      .def_readwrite("rda_warmup_fraction", &TrainConfig::rda_warmup_fraction)
      .def_readwrite("augment", &TrainConfig::augment)
      .def_readwrite("consistency_weight", &TrainConfig::consistency_weight)
      .def_readwrite("consistency_warmup_fraction", &TrainConfig::consistency_warmup_fraction)
      .def_readwrite("mixup_alpha", &TrainConfig::mixup_alpha)
      .def_readwrite("ema_decay", &TrainConfig::ema_decay)
      .def_readwrite("eval_with_ema", &TrainConfig::eval_with_ema)
      .def("validate", &TrainConfig::validate);

  py::class_<IterationLog>(m, "IterationLog")
      .def_readonly("iter", &IterationLog::iter)
      .def_readonly("total", &IterationLog::total)
      .def_readonly("reg", &IterationLog::reg)
      .def_readonly("arc_labeled", &IterationLog::arc_labeled)
      .def_readonly("arc_unlabeled", &IterationLog::arc_unlabeled)
      .def_readonly("consistency", &IterationLog::consistency)
      .def_readonly("rda", &IterationLog::rda)
      .def_readonly("mask_rate", &IterationLog::mask_rate)
      .def_readonly("warmup", &IterationLog::warmup);

  py::class_<EvalLog>(m, "EvalLog")
      .def_readonly("iter", &EvalLog::iter)
      .def_readonly("metrics", &EvalLog::metrics);

  py::class_<RunRecord>(m, "RunRecord")
      .def_readonly("seed", &RunRecord::seed)
      .def_property_readonly("method",
                             [](const RunRecord& r) { return to_string(r.method); })
      .def_readonly("iterations", &RunRecord::iterations)
      .def_readonly("evals", &RunRecord::evals)
      .def_readonly("final_metrics", &RunRecord::final_metrics)
      .def_readonly("scaler", &RunRecord::scaler)
      .def_readonly("final_params", &RunRecord::final_params);

  py::class_<AggregateStats>(m, "AggregateStats")
      .def_readonly("mean", &AggregateStats::mean)
      .def_readonly("stddev", &AggregateStats::stddev);

  py::class_<ProtocolResult>(m, "ProtocolResult")
      .def_readonly("runs", &ProtocolResult::runs)
      .def_readonly("mae", &ProtocolResult::mae)
      .def_readonly("r2", &ProtocolResult::r2)
      .def_readonly("srcc", &ProtocolResult::srcc);

  m.def("train", &train_nogil, py::arg("config"), py::arg("labeled"), py::arg("unlabeled"),
        py::arg("test"), py::arg("seed"));
  m.def("evaluate", &evaluate, py::arg("model"), py::arg("test"), py::arg("scaler"));
  m.def("run_protocol", &protocol_nogil, py::arg("config"), py::arg("train_pool"), py::arg("test"),
        py::arg("n_labeled"), py::arg("seeds"));
  m.def("aggregate", &aggregate, py::arg("values"));

  // ------------------------------------------------------------ experiment
  m.def(
      "load_experiment_config",
      [](const std::string& path) { return load_experiment_config(path); },
      py::arg("path"));
  m.def(
      "parse_experiment_config",
      [](const std::string& text) { return parse_experiment_config(nlohmann::json::parse(text)); },
      py::arg("json_text"));
  m.def(
      "config_to_json",
      [](const ExperimentConfig& cfg) { return to_json(cfg).dump(2); },
      py::arg("config"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("experiment", &ExperimentConfig::experiment)
      .def_readwrite("n_labeled", &ExperimentConfig::n_labeled)
      .def_readwrite("method", &ExperimentConfig::method)
      .def_readwrite("seeds", &ExperimentConfig::seeds);

  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, const std::string& dir, bool force) {
        py::gil_scoped_release release;
        return run_experiment(cfg, dir, force).dump(2);
      },
      py::arg("config"), py::arg("experiment_dir"), py::arg("force") = false,
      "Trains over the configured seeds, writes the output tree, returns the summary JSON text.");
  m.def(
      "report_results",
      [](const std::string& dir) {
        const ReportTable t = report_results(dir);
        return py::make_tuple(t.text, t.csv);
      },
      py::arg("results_dir"), "Returns (text_table, csv).");
  m.def("format_mean_std", &format_mean_std, py::arg("mean"), py::arg("stddev"));
}
