#include "rankup/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "rankup/common.hpp"
#include "rankup/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rankup {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw config_error(path.empty() ? msg : path + ": " + msg);
}

// Reads one JSON object with exact key accounting: every key must be consumed
// by a getter or finish() rejects it, naming the full path. Getters check the
// JSON type themselves; nlohmann's implicit numeric conversions would silently
// truncate 3.5 to 3 otherwise.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) bad(path_, "expected an object");
  }

  bool contains(const std::string& key) const { return j_.contains(key); }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    const json& v = j_.at(key);
    if (!v.is_object()) bad(at(key), "expected an object");
    return &v;
  }

  long get_int(const std::string& key, long fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) bad(at(key), "expected an integer");
    return v->get<long>();
  }

  double get_double(const std::string& key, double fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_number()) bad(at(key), "expected a number");
    return v->get<double>();
  }

  bool get_bool(const std::string& key, bool fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_boolean()) bad(at(key), "expected true or false");
    return v->get<bool>();
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_string()) bad(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::vector<int> get_int_array(const std::string& key, std::vector<int> fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_array()) bad(at(key), "expected an array of integers");
    std::vector<int> out;
    for (const json& e : *v) {
      if (!e.is_number_integer()) bad(at(key), "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  std::vector<std::uint64_t> get_seed_array(const std::string& key,
                                            std::vector<std::uint64_t> fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_array()) bad(at(key), "expected an array of non-negative integers");
    std::vector<std::uint64_t> out;
    for (const json& e : *v) {
      if (!(e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0))) {
        bad(at(key), "expected an array of non-negative integers");
      }
      out.push_back(e.get<std::uint64_t>());
    }
    return out;
  }

  std::vector<std::string> get_string_array(const std::string& key,
                                            std::vector<std::string> fallback) {
    const json* v = take(key);
    if (!v) return fallback;
    if (!v->is_array()) bad(at(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const json& e : *v) {
      if (!e.is_string()) bad(at(key), "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) bad(at(it.key()), "unknown key");
    }
  }

 private:
  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  const json* take(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void validate_name(const std::string& name, const std::string& path) {
  if (name.empty()) bad(path, "must not be empty");
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      bad(path, "may contain only letters, digits, '_', '-', '.'");
    }
  }
}

void validate_dataset(const DatasetConfig& d) {
  if (d.kind == "synthetic") {
    if (d.n_samples < 4) bad("dataset.n_samples", "must be >= 4");
    if (!(d.noise_sigma >= 0.0) || !std::isfinite(d.noise_sigma)) {
      bad("dataset.noise_sigma", "must be a finite number >= 0");
    }
  } else if (d.kind == "csv") {
    if (d.path.empty()) bad("dataset.path", "required when dataset.kind is \"csv\"");
    if (d.target_column.empty()) {
      bad("dataset.target_column", "required when dataset.kind is \"csv\"");
    }
  } else {
    bad("dataset.kind", "must be \"synthetic\" or \"csv\"");
  }
  if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) {
    bad("dataset.test_fraction", "must lie in (0, 1)");
  }
}

void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.format_version != 1) bad("format_version", "unsupported (this build reads version 1)");
  validate_name(cfg.experiment, "experiment");
  validate_dataset(cfg.dataset);
  if (cfg.n_labeled < 2) bad("split.n_labeled", "must be >= 2");
  cfg.method.validate();
  if (cfg.seeds.empty()) bad("seeds", "must list at least one seed");
  if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
    bad("seeds", "must not repeat a seed");
  }
  if (cfg.sweep) {
    if (cfg.sweep->methods.empty()) bad("sweep.methods", "must list at least one method");
    std::set<std::string> mseen;
    for (const std::string& m : cfg.sweep->methods) {
      parse_method(m);  // throws on an unknown name
      if (!mseen.insert(m).second) bad("sweep.methods", "repeats '" + m + "'");
    }
    if (cfg.sweep->label_budgets.empty()) {
      bad("sweep.label_budgets", "must list at least one budget");
    }
    std::set<int> bseen;
    for (int b : cfg.sweep->label_budgets) {
      if (b < 2) bad("sweep.label_budgets", "entries must be >= 2");
      if (!bseen.insert(b).second) {
        bad("sweep.label_budgets", "repeats " + std::to_string(b));
      }
    }
  }
}

DatasetConfig parse_dataset_block(const json& j) {
  Fields f(j, "dataset");
  DatasetConfig d;
  d.kind = f.get_string("kind", d.kind);
  if (d.kind == "synthetic") {
    d.task = parse_synthetic_task(f.get_string("task", to_string(d.task)));
    d.n_samples = static_cast<int>(f.get_int("n_samples", d.n_samples));
    d.noise_sigma = f.get_double("noise_sigma", d.noise_sigma);
  } else if (d.kind == "csv") {
    d.path = f.get_string("path", d.path);
    d.target_column = f.get_string("target_column", d.target_column);
  }
  // Unknown kinds fall through to validate_dataset for the error message;
  // nothing extra is consumed here so stray keys still get named.
  const long ds = f.get_int("data_seed", static_cast<long>(d.data_seed));
  if (ds < 0) bad("dataset.data_seed", "must be >= 0");
  d.data_seed = static_cast<std::uint64_t>(ds);
  d.test_fraction = f.get_double("test_fraction", d.test_fraction);
  f.finish();
  return d;
}

TrainConfig parse_method_block(const json& j) {
  Fields f(j, "method");
  TrainConfig c;
  c.method = parse_method(f.get_string("name", to_string(c.method)));
  c.total_iters = f.get_int("total_iters", c.total_iters);
  c.eval_every = f.get_int("eval_every", c.eval_every);
  c.labeled_batch = static_cast<int>(f.get_int("labeled_batch", c.labeled_batch));
  c.unlabeled_batch_ratio = f.get_double("unlabeled_batch_ratio", c.unlabeled_batch_ratio);
  c.criterion = parse_criterion(f.get_string("criterion", to_string(c.criterion)));
  if (const json* o = f.sub("optimizer")) {
    Fields fo(*o, "method.optimizer");
    c.learning_rate = fo.get_double("learning_rate", c.learning_rate);
    c.momentum = fo.get_double("momentum", c.momentum);
    c.weight_decay = fo.get_double("weight_decay", c.weight_decay);
    fo.finish();
  }
  if (const json* m = f.sub("model")) {
    Fields fm(*m, "method.model");
    c.hidden_sizes = fm.get_int_array("hidden_sizes", c.hidden_sizes);
    fm.finish();
  }
  if (const json* a = f.sub("arc")) {
    Fields fa(*a, "method.arc");
    c.arc.tau = fa.get_double("tau", c.arc.tau);
    c.arc.omega_ulb = fa.get_double("omega_ulb", c.arc.omega_ulb);
    c.omega_arc = fa.get_double("omega_arc", c.omega_arc);
    c.temperature = fa.get_double("temperature", c.temperature);
    fa.finish();
  }
  if (const json* r = f.sub("rda")) {
    Fields fr(*r, "method.rda");
    c.rda_refresh_period = fr.get_int("refresh_period", c.rda_refresh_period);
    c.omega_rda = fr.get_double("omega_rda", c.omega_rda);
    c.rda_warmup_fraction = fr.get_double("warmup_fraction", c.rda_warmup_fraction);
    fr.finish();
  }
  if (const json* a = f.sub("augment")) {
    Fields fa(*a, "method.augment");
    c.augment.weak_noise_sigma = fa.get_double("weak_noise_sigma", c.augment.weak_noise_sigma);
    c.augment.strong_noise_sigma = fa.get_double("strong_noise_sigma", c.augment.strong_noise_sigma);
    c.augment.strong_mask_prob = fa.get_double("strong_mask_prob", c.augment.strong_mask_prob);
    fa.finish();
  }
  if (const json* s = f.sub("consistency")) {
    Fields fc(*s, "method.consistency");
    c.consistency_weight = fc.get_double("weight", c.consistency_weight);
    c.consistency_warmup_fraction = fc.get_double("warmup_fraction", c.consistency_warmup_fraction);
    fc.finish();
  }
  c.mixup_alpha = f.get_double("mixup_alpha", c.mixup_alpha);
  c.ema_decay = f.get_double("ema_decay", c.ema_decay);
  c.eval_with_ema = f.get_bool("eval_with_ema", c.eval_with_ema);
  f.finish();
  return c;
}

json dataset_to_json(const DatasetConfig& d) {
  json j{{"kind", d.kind},
         {"data_seed", d.data_seed},
         {"test_fraction", d.test_fraction}};
  if (d.kind == "csv") {
    j["path"] = d.path;
    j["target_column"] = d.target_column;
  } else {
    j["task"] = to_string(d.task);
    j["n_samples"] = d.n_samples;
    j["noise_sigma"] = d.noise_sigma;
  }
  return j;
}

json method_to_json(const TrainConfig& c) {
  return json{
      {"name", to_string(c.method)},
      {"total_iters", c.total_iters},
      {"eval_every", c.eval_every},
      {"labeled_batch", c.labeled_batch},
      {"unlabeled_batch_ratio", c.unlabeled_batch_ratio},
      {"criterion", to_string(c.criterion)},
      {"optimizer",
       {{"learning_rate", c.learning_rate},
        {"momentum", c.momentum},
        {"weight_decay", c.weight_decay}}},
      {"model", {{"hidden_sizes", c.hidden_sizes}}},
      {"arc",
       {{"tau", c.arc.tau},
        {"omega_ulb", c.arc.omega_ulb},
        {"omega_arc", c.omega_arc},
        {"temperature", c.temperature}}},
      {"rda",
       {{"refresh_period", c.rda_refresh_period},
        {"omega_rda", c.omega_rda},
        {"warmup_fraction", c.rda_warmup_fraction}}},
      {"augment",
       {{"weak_noise_sigma", c.augment.weak_noise_sigma},
        {"strong_noise_sigma", c.augment.strong_noise_sigma},
        {"strong_mask_prob", c.augment.strong_mask_prob}}},
      {"consistency",
       {{"weight", c.consistency_weight},
        {"warmup_fraction", c.consistency_warmup_fraction}}},
      {"mixup_alpha", c.mixup_alpha},
      {"ema_decay", c.ema_decay},
      {"eval_with_ema", c.eval_with_ema},
  };
}

void write_text_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path.string());
  out << body;
  out.flush();
  if (!out) throw data_error("write failed: " + path.string());
}

json metrics_entry(std::uint64_t seed, const MetricsReport& m) {
  return json{{"seed", seed}, {"mae", m.mae}, {"r2", m.r2}, {"srcc", m.srcc}, {"n_test", m.n}};
}

json stats_entry(const AggregateStats& s) {
  return json{{"mean", s.mean}, {"std", s.stddev}};
}

void write_run_log(const RunRecord& rec, const ExperimentConfig& cfg, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path.string());
  const json meta{{"type", "meta"},
                  {"format_version", 1},
                  {"experiment", cfg.experiment},
                  {"method", to_string(rec.method)},
                  {"seed", rec.seed},
                  {"n_labeled", cfg.n_labeled},
                  {"total_iters", cfg.method.total_iters},
                  {"eval_every", cfg.method.eval_every}};
  out << meta.dump() << '\n';
  std::size_t e = 0;
  auto emit_eval = [&](const EvalLog& ev) {
    const json r{{"type", "eval"},   {"iter", ev.iter},        {"mae", ev.metrics.mae},
                 {"r2", ev.metrics.r2}, {"srcc", ev.metrics.srcc}, {"n_test", ev.metrics.n}};
    out << r.dump() << '\n';
  };
  for (const IterationLog& it : rec.iterations) {
    const json r{{"type", "iter"},
                 {"iter", it.iter},
                 {"total", it.total},
                 {"reg", it.reg},
                 {"arc_labeled", it.arc_labeled},
                 {"arc_unlabeled", it.arc_unlabeled},
                 {"consistency", it.consistency},
                 {"rda", it.rda},
                 {"mask_rate", it.mask_rate},
                 {"warmup", it.warmup}};
    out << r.dump() << '\n';
    while (e < rec.evals.size() && rec.evals[e].iter == it.iter) emit_eval(rec.evals[e++]);
  }
  while (e < rec.evals.size()) emit_eval(rec.evals[e++]);
  out.flush();
  if (!out) throw data_error("write failed: " + path.string());
}

void write_pseudo_table(const PseudoLabelTable& t, const fs::path& path) {
  const auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  const json j{{"format_version", 1},
               {"n", t.raw().size()},
               {"last_refresh_iter", t.last_refresh_iter()},
               {"bootstrap_aligns", t.bootstrap_aligns()},
               {"scheduled_aligns", t.scheduled_aligns()},
               {"raw", vec(t.raw())},
               {"aligned", vec(t.aligned())}};
  write_text_file(path, j.dump(2) + "\n");
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  Fields f(j, "");
  ExperimentConfig cfg;
  cfg.format_version = static_cast<int>(f.get_int("format_version", cfg.format_version));
  cfg.experiment = f.get_string("experiment", cfg.experiment);
  if (const json* d = f.sub("dataset")) cfg.dataset = parse_dataset_block(*d);
  if (const json* s = f.sub("split")) {
    Fields fs_(*s, "split");
    cfg.n_labeled = static_cast<int>(fs_.get_int("n_labeled", cfg.n_labeled));
    fs_.finish();
  }
  if (const json* m = f.sub("method")) cfg.method = parse_method_block(*m);
  cfg.seeds = f.get_seed_array("seeds", cfg.seeds);
  if (const json* o = f.sub("output")) {
    Fields fo(*o, "output");
    cfg.output.dir = fo.get_string("dir", cfg.output.dir);
    cfg.output.save_checkpoints = fo.get_bool("save_checkpoints", cfg.output.save_checkpoints);
    cfg.output.dump_pseudo_table = fo.get_bool("dump_pseudo_table", cfg.output.dump_pseudo_table);
    fo.finish();
  }
  if (const json* s = f.sub("sweep")) {
    Fields fw(*s, "sweep");
    SweepConfig sw;
    sw.methods = fw.get_string_array("methods", {});
    sw.label_budgets = [&] {
      std::vector<int> v = fw.get_int_array("label_budgets", {});
      return v;
    }();
    fw.finish();
    cfg.sweep = std::move(sw);
  }
  f.finish();
  validate_experiment(cfg);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

json to_json(const ExperimentConfig& cfg) {
  json j{{"format_version", cfg.format_version},
         {"experiment", cfg.experiment},
         {"dataset", dataset_to_json(cfg.dataset)},
         {"split", {{"n_labeled", cfg.n_labeled}}},
         {"method", method_to_json(cfg.method)},
         {"seeds", cfg.seeds},
         {"output",
          {{"dir", cfg.output.dir},
           {"save_checkpoints", cfg.output.save_checkpoints},
           {"dump_pseudo_table", cfg.output.dump_pseudo_table}}}};
  if (cfg.sweep) {
    j["sweep"] = json{{"methods", cfg.sweep->methods},
                      {"label_budgets", cfg.sweep->label_budgets}};
  }
  return j;
}

Dataset make_dataset(const DatasetConfig& cfg) {
  validate_dataset(cfg);
  if (cfg.kind == "synthetic") {
    return generate_synthetic(cfg.task, cfg.n_samples, cfg.noise_sigma, cfg.data_seed);
  }
  return load_csv(cfg.path, cfg.target_column);
}

std::string resolve_experiment_dir(const std::string& cli_out, const ExperimentConfig& cfg) {
  if (!cli_out.empty()) return cli_out;
  if (!cfg.output.dir.empty()) return cfg.output.dir;
  const char* env = std::getenv("RANKUP_OUT");
  const std::string root = (env != nullptr && *env != '\0') ? env : "out";
  return (fs::path(root) / cfg.experiment).string();
}

json run_experiment(const ExperimentConfig& cfg, const std::string& experiment_dir, bool force) {
  validate_experiment(cfg);
  const Dataset full = make_dataset(cfg.dataset);
  const auto [train_pool, test] =
      split_train_test(full, cfg.dataset.test_fraction, cfg.dataset.data_seed);

  const std::string method_name = to_string(cfg.method.method);
  const fs::path method_dir = fs::path(experiment_dir) / method_name;
  if (fs::exists(method_dir)) {
    if (!force) {
      throw data_error("output directory already exists: " + method_dir.string() +
                       " (pass --force to overwrite)");
    }
    fs::remove_all(method_dir);
  }
  fs::create_directories(method_dir);

  json per_seed = json::array();
  const auto on_run = [&](const RunRecord& rec) {
    const fs::path seed_dir = method_dir / ("seed_" + std::to_string(rec.seed));
    fs::create_directories(seed_dir);
    write_run_log(rec, cfg, seed_dir / "log.jsonl");
    if (cfg.output.save_checkpoints) {
      const TwoHeadModel final_model = TwoHeadModel::from_params(rec.layout, rec.final_params);
      save_checkpoint(final_model, (seed_dir / "model.ckpt").string());
    }
    if (cfg.output.dump_pseudo_table && rec.table) {
      write_pseudo_table(*rec.table, seed_dir / "pseudo_table.json");
    }
    per_seed.push_back(metrics_entry(rec.seed, rec.final_metrics));
  };

  const ProtocolResult res =
      run_protocol(cfg.method, train_pool, test, cfg.n_labeled, cfg.seeds, on_run);

  const json summary{{"format_version", 1},
                     {"experiment", cfg.experiment},
                     {"method", method_name},
                     {"n_labeled", cfg.n_labeled},
                     {"seeds", cfg.seeds},
                     {"n_train_pool", train_pool.n()},
                     {"n_test", test.n()},
                     {"dataset", dataset_to_json(cfg.dataset)},
                     {"config", to_json(cfg)},
                     {"per_seed", per_seed},
                     {"aggregate",
                      {{"mae", stats_entry(res.mae)},
                       {"r2", stats_entry(res.r2)},
                       {"srcc", stats_entry(res.srcc)}}}};
  write_text_file(method_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

bool SweepResult::all_ok() const {
  for (const SweepCellResult& c : cells) {
    if (!c.ok) return false;
  }
  return true;
}

SweepResult sweep_experiment(const ExperimentConfig& cfg, const std::string& experiment_dir,
                             bool force, bool resume, int workers) {
  validate_experiment(cfg);
  if (!cfg.sweep) throw config_error("sweep: config has no sweep block");
  if (workers < 1) throw config_error("sweep: workers must be >= 1");
  const SweepConfig& sw = *cfg.sweep;

  struct Cell {
    std::string method;
    int budget = 0;
  };
  std::vector<Cell> cells;
  for (int b : sw.label_budgets) {
    for (const std::string& m : sw.methods) cells.push_back({m, b});
  }

  SweepResult result;
  result.cells.resize(cells.size());

  std::atomic<std::size_t> next{0};
  const auto run_cell = [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    SweepCellResult& out = result.cells[idx];
    out.method = cell.method;
    out.n_labeled = cell.budget;
    const fs::path cell_root = fs::path(experiment_dir) / ("L" + std::to_string(cell.budget));
    const fs::path summary_path = cell_root / cell.method / "summary.json";
    try {
      if (resume && fs::exists(summary_path)) {
        std::ifstream in(summary_path, std::ios::binary);
        json j;
        in >> j;
        out.summary = std::move(j);
        out.ok = true;
        out.skipped = true;
        return;
      }
      ExperimentConfig cell_cfg = cfg;
      cell_cfg.method.method = parse_method(cell.method);
      cell_cfg.n_labeled = cell.budget;
      out.summary = run_experiment(cell_cfg, cell_root.string(), force);
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
  };

  const int n_threads = std::min<int>(workers, static_cast<int>(cells.size()));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          run_cell(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // Wide CSV: one row per method, columns grouped per budget.
  std::ostringstream csv;
  csv << "format_version,method";
  for (int b : sw.label_budgets) {
    const std::string p = "L" + std::to_string(b) + ".";
    for (const char* m : {"mae_mean", "mae_std", "r2_mean", "r2_std", "srcc_mean", "srcc_std"}) {
      csv << ',' << p << m;
    }
  }
  csv << '\n';
  const auto find_cell = [&](const std::string& m, int b) -> const SweepCellResult* {
    for (const SweepCellResult& c : result.cells) {
      if (c.method == m && c.n_labeled == b) return &c;
    }
    return nullptr;
  };
  for (const std::string& m : sw.methods) {
    csv << "1," << m;
    for (int b : sw.label_budgets) {
      const SweepCellResult* c = find_cell(m, b);
      if (c != nullptr && c->ok) {
        const json& agg = c->summary.at("aggregate");
        for (const char* metric : {"mae", "r2", "srcc"}) {
          csv << ',' << fmt_g(agg.at(metric).at("mean").get<double>()) << ','
              << fmt_g(agg.at(metric).at("std").get<double>());
        }
      } else {
        csv << ",,,,,,";
      }
    }
    csv << '\n';
  }
  fs::create_directories(experiment_dir);
  write_text_file(fs::path(experiment_dir) / "sweep.csv", csv.str());

  json jcells = json::array();
  for (const SweepCellResult& c : result.cells) {
    json jc{{"method", c.method},
            {"n_labeled", c.n_labeled},
            {"status", c.ok ? (c.skipped ? "resumed" : "ok") : "failed"}};
    if (!c.ok) jc["error"] = c.error;
    jcells.push_back(std::move(jc));
  }
  const json jsweep{{"format_version", 1},
                    {"experiment", cfg.experiment},
                    {"methods", sw.methods},
                    {"label_budgets", sw.label_budgets},
                    {"cells", jcells}};
  write_text_file(fs::path(experiment_dir) / "sweep_summary.json", jsweep.dump(2) + "\n");
  return result;
}

std::string format_mean_std(double mean, double stddev) {
  const char* f = std::fabs(mean) < 1.0 ? "%.3f" : "%.2f";
  char a[64];
  char b[64];
  std::snprintf(a, sizeof(a), f, mean);
  std::snprintf(b, sizeof(b), f, stddev);
  return std::string(a) + "±" + b;
}

ReportTable report_results(const std::string& results_dir) {
  if (!fs::exists(results_dir)) throw data_error("no such directory: " + results_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "summary.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw data_error("no summary.json files under " + results_dir);

  struct Row {
    double mae_m = 0, mae_s = 0, r2_m = 0, r2_s = 0, srcc_m = 0, srcc_s = 0;
  };
  std::map<std::pair<int, std::string>, Row> rows;  // (budget, method) -> stats
  for (const fs::path& p : files) {
    json j;
    try {
      std::ifstream in(p, std::ios::binary);
      in >> j;
      const std::string method = j.at("method").get<std::string>();
      const int budget = j.at("n_labeled").get<int>();
      const json& agg = j.at("aggregate");
      Row r;
      r.mae_m = agg.at("mae").at("mean").get<double>();
      r.mae_s = agg.at("mae").at("std").get<double>();
      r.r2_m = agg.at("r2").at("mean").get<double>();
      r.r2_s = agg.at("r2").at("std").get<double>();
      r.srcc_m = agg.at("srcc").at("mean").get<double>();
      r.srcc_s = agg.at("srcc").at("std").get<double>();
      rows.emplace(std::make_pair(budget, method), r);  // first path wins on duplicates
    } catch (const json::exception& e) {
      throw data_error("malformed summary " + p.string() + ": " + e.what());
    }
  }

  std::vector<int> budgets;
  std::vector<std::string> methods;
  for (const auto& [key, r] : rows) {
    if (budgets.empty() || budgets.back() != key.first) budgets.push_back(key.first);
    if (std::find(methods.begin(), methods.end(), key.second) == methods.end()) {
      methods.push_back(key.second);
    }
  }
  std::sort(budgets.begin(), budgets.end());
  budgets.erase(std::unique(budgets.begin(), budgets.end()), budgets.end());
  std::sort(methods.begin(), methods.end());

  // Best mean per (budget, metric) column: MAE low, R2/SRCC high.
  struct Best {
    double mae = 0, r2 = 0, srcc = 0;
    bool any = false;
  };
  std::map<int, Best> best;
  for (const auto& [key, r] : rows) {
    Best& b = best[key.first];
    if (!b.any) {
      b = {r.mae_m, r.r2_m, r.srcc_m, true};
    } else {
      b.mae = std::min(b.mae, r.mae_m);
      b.r2 = std::max(b.r2, r.r2_m);
      b.srcc = std::max(b.srcc, r.srcc_m);
    }
  }

  const bool multi = budgets.size() > 1;
  std::vector<std::string> headers{"method"};
  for (int b : budgets) {
    const std::string prefix = multi ? "L" + std::to_string(b) + " " : "";
    headers.push_back(prefix + "MAE");
    headers.push_back(prefix + "R2");
    headers.push_back(prefix + "SRCC");
  }

  std::vector<std::vector<std::string>> grid;
  grid.push_back(headers);
  for (const std::string& m : methods) {
    std::vector<std::string> line{m};
    for (int b : budgets) {
      const auto it = rows.find({b, m});
      if (it == rows.end()) {
        line.insert(line.end(), {"-", "-", "-"});
        continue;
      }
      const Row& r = it->second;
      const Best& bb = best.at(b);
      line.push_back(format_mean_std(r.mae_m, r.mae_s) + (r.mae_m == bb.mae ? "*" : ""));
      line.push_back(format_mean_std(r.r2_m, r.r2_s) + (r.r2_m == bb.r2 ? "*" : ""));
      line.push_back(format_mean_std(r.srcc_m, r.srcc_s) + (r.srcc_m == bb.srcc ? "*" : ""));
    }
    grid.push_back(std::move(line));
  }

  // Column widths measured in display characters; the ± glyph is two bytes.
  const auto display_width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) {
      if ((c & 0xC0) != 0x80) ++w;
    }
    return w;
  };
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      width[i] = std::max(width[i], display_width(line[i]));
    }
  }
  std::ostringstream text;
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      text << line[i];
      if (i + 1 < line.size()) {
        text << std::string(width[i] - display_width(line[i]) + 2, ' ');
      }
    }
    text << '\n';
  }

  std::ostringstream csv;
  csv << "format_version,method,n_labeled,mae_mean,mae_std,r2_mean,r2_std,srcc_mean,srcc_std\n";
  for (int b : budgets) {
    for (const std::string& m : methods) {
      const auto it = rows.find({b, m});
      if (it == rows.end()) continue;
      const Row& r = it->second;
      csv << "1," << m << ',' << b << ',' << fmt_g(r.mae_m) << ',' << fmt_g(r.mae_s) << ','
          << fmt_g(r.r2_m) << ',' << fmt_g(r.r2_s) << ',' << fmt_g(r.srcc_m) << ','
          << fmt_g(r.srcc_s) << '\n';
    }
  }

  return ReportTable{text.str(), csv.str()};
}

}  // namespace rankup
