#include "rankup/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace rankup {
namespace {

constexpr char kCkptMagic[8] = {'R', 'K', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kCkptVersion = 1;

// Read-only matrix views into the flat parameter vector.
struct ParamView {
  std::vector<Eigen::Map<const Eigen::MatrixXd>> W;
  std::vector<Eigen::Map<const Eigen::VectorXd>> b;
  Eigen::Map<const Eigen::VectorXd> reg_w, arc_w;
  double reg_b, arc_b;

  ParamView(const ModelLayout& layout, const Eigen::VectorXd& p, const ParamSegments& seg)
      : reg_w(p.data() + seg.reg_w.offset, seg.reg_w.rows),
        arc_w(p.data() + seg.arc_w.offset, seg.arc_w.rows),
        reg_b(p(seg.reg_b.offset)),
        arc_b(p(seg.arc_b.offset)) {
    for (std::size_t l = 0; l < layout.hidden.size(); ++l) {
      W.emplace_back(p.data() + seg.trunk_w[l].offset, seg.trunk_w[l].rows, seg.trunk_w[l].cols);
      b.emplace_back(p.data() + seg.trunk_b[l].offset, seg.trunk_b[l].rows);
    }
  }
};

void check_finite(const Eigen::VectorXd& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) {
      throw numeric_error(std::string(what) + " contains non-finite value " +
                          std::to_string(v(i)) + " at index " + std::to_string(i));
    }
  }
}

}  // namespace

void ModelLayout::validate() const {
  if (input_dim < 1) throw config_error("model.input_dim must be >= 1");
  for (int h : hidden) {
    if (h < 1) throw config_error("model.hidden_sizes entries must be >= 1");
  }
}

std::int64_t ModelLayout::param_count() const {
  std::int64_t count = 0;
  int in = input_dim;
  for (int h : hidden) {
    count += std::int64_t(h) * in + h;
    in = h;
  }
  count += 2 * (std::int64_t(in) + 1);  // two scalar heads
  return count;
}

ParamSegments param_segments(const ModelLayout& layout) {
  layout.validate();
  ParamSegments seg;
  std::ptrdiff_t at = 0;
  int in = layout.input_dim;
  for (int h : layout.hidden) {
    seg.trunk_w.push_back({at, h, in});
    at += std::ptrdiff_t(h) * in;
    seg.trunk_b.push_back({at, h, 1});
    at += h;
    in = h;
  }
  seg.reg_w = {at, in, 1};
  at += in;
  seg.reg_b = {at, 1, 1};
  at += 1;
  seg.arc_w = {at, in, 1};
  at += in;
  seg.arc_b = {at, 1, 1};
  at += 1;
  return seg;
}

TwoHeadModel::TwoHeadModel(ModelLayout layout, std::uint64_t init_seed) : layout_(std::move(layout)) {
  layout_.validate();
  params_ = Eigen::VectorXd::Zero(layout_.param_count());
  const ParamSegments seg = param_segments(layout_);
  std::mt19937_64 rng(init_seed);

  const auto fill_uniform = [&](const ParamSegment& s, int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::ptrdiff_t i = 0; i < s.size(); ++i) params_(s.offset + i) = u(rng);
  };

  int in = layout_.input_dim;
  for (std::size_t l = 0; l < layout_.hidden.size(); ++l) {
    fill_uniform(seg.trunk_w[l], in, layout_.hidden[l]);
    in = layout_.hidden[l];
  }
  fill_uniform(seg.reg_w, in, 1);
  fill_uniform(seg.arc_w, in, 1);
  // biases stay zero
}

TwoHeadModel TwoHeadModel::from_params(ModelLayout layout, Eigen::VectorXd params) {
  layout.validate();
  if (params.size() != layout.param_count()) {
    throw shape_error("from_params: expected " + std::to_string(layout.param_count()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  TwoHeadModel m(layout, 0);
  m.params_ = std::move(params);
  ++m.version_;
  return m;
}

ForwardResult forward(const TwoHeadModel& m, const Eigen::MatrixXd& X) {
  if (X.rows() != m.layout().input_dim) {
    throw shape_error("forward: X has " + std::to_string(X.rows()) + " rows, model expects " +
                      std::to_string(m.layout().input_dim));
  }
  const ParamSegments seg = param_segments(m.layout());
  const ParamView v(m.layout(), m.params(), seg);
  const int B = static_cast<int>(X.cols());
  const std::size_t L = m.layout().hidden.size();

  ForwardResult r;
  r.cache.model_version = m.version();
  r.cache.input = X;
  r.cache.act.reserve(L);

  const Eigen::MatrixXd* prev = &r.cache.input;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd a(m.layout().hidden[l], B);
    for (int col = 0; col < B; ++col) {
      a.col(col).noalias() = v.W[l] * prev->col(col);
      a.col(col) += v.b[l];
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, col) = std::tanh(a(i, col));
    }
    r.cache.act.push_back(std::move(a));
    prev = &r.cache.act.back();
  }

  r.reg_out.resize(B);
  r.arc_score.resize(B);
  for (int col = 0; col < B; ++col) {
    r.reg_out(col) = v.reg_w.dot(prev->col(col)) + v.reg_b;
    r.arc_score(col) = v.arc_w.dot(prev->col(col)) + v.arc_b;
  }
  return r;
}

void predict(const TwoHeadModel& m, const Eigen::MatrixXd& X, Eigen::VectorXd* reg_out,
             Eigen::VectorXd* arc_score) {
  ForwardResult r = forward(m, X);
  if (reg_out) *reg_out = std::move(r.reg_out);
  if (arc_score) *arc_score = std::move(r.arc_score);
}

Eigen::VectorXd backward(const TwoHeadModel& m, const ForwardCache& cache,
                         const Eigen::VectorXd& grad_reg, const Eigen::VectorXd& grad_arc) {
  if (cache.model_version != m.version()) {
    throw contract_error("backward: cache is stale (model parameters changed since forward)");
  }
  const int B = static_cast<int>(cache.input.cols());
  if (grad_reg.size() != B || grad_arc.size() != B) {
    throw shape_error("backward: output gradients must have one entry per sample");
  }

  const ParamSegments seg = param_segments(m.layout());
  const ParamView v(m.layout(), m.params(), seg);
  const std::size_t L = m.layout().hidden.size();
  const Eigen::MatrixXd& trunk_out = L > 0 ? cache.act.back() : cache.input;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(m.params().size());
  Eigen::Map<Eigen::VectorXd> g_reg_w(g.data() + seg.reg_w.offset, seg.reg_w.rows);
  Eigen::Map<Eigen::VectorXd> g_arc_w(g.data() + seg.arc_w.offset, seg.arc_w.rows);

  // Heads, then trunk output gradient; all sums in ascending sample order.
  Eigen::MatrixXd dA(trunk_out.rows(), B);
  for (int col = 0; col < B; ++col) {
    g_reg_w.noalias() += grad_reg(col) * trunk_out.col(col);
    g_arc_w.noalias() += grad_arc(col) * trunk_out.col(col);
    g(seg.reg_b.offset) += grad_reg(col);
    g(seg.arc_b.offset) += grad_arc(col);
    dA.col(col).noalias() = grad_reg(col) * v.reg_w + grad_arc(col) * v.arc_w;
  }

  for (std::size_t li = L; li-- > 0;) {
    const Eigen::MatrixXd& a = cache.act[li];
    const Eigen::MatrixXd& prev = li > 0 ? cache.act[li - 1] : cache.input;
    // tanh' = 1 - a^2
    Eigen::MatrixXd dZ = (dA.array() * (1.0 - a.array().square())).matrix();

    Eigen::Map<Eigen::MatrixXd> gW(g.data() + seg.trunk_w[li].offset, seg.trunk_w[li].rows,
                                   seg.trunk_w[li].cols);
    Eigen::Map<Eigen::VectorXd> gb(g.data() + seg.trunk_b[li].offset, seg.trunk_b[li].rows);
    for (int col = 0; col < B; ++col) {
      gW.noalias() += dZ.col(col) * prev.col(col).transpose();
      gb += dZ.col(col);
    }
    if (li > 0) {
      dA.resize(prev.rows(), B);
      for (int col = 0; col < B; ++col) dA.col(col).noalias() = v.W[li].transpose() * dZ.col(col);
    }
  }
  return g;
}

void sgd_step(TwoHeadModel& m, const Eigen::VectorXd& grads, OptimState& opt) {
  if (grads.size() != m.params().size()) {
    throw shape_error("sgd_step: gradient size " + std::to_string(grads.size()) +
                      " does not match parameter count " + std::to_string(m.params().size()));
  }
  if (!(opt.learning_rate >= 0.0) || !(opt.momentum >= 0.0 && opt.momentum < 1.0) ||
      !(opt.weight_decay >= 0.0)) {
    throw config_error("sgd_step: need learning_rate >= 0, momentum in [0, 1), weight_decay >= 0");
  }
  check_finite(grads, "sgd_step: gradient");
  if (opt.velocity.size() == 0) opt.velocity = Eigen::VectorXd::Zero(grads.size());
  if (opt.velocity.size() != grads.size()) {
    throw shape_error("sgd_step: velocity size does not match gradient size");
  }

  Eigen::VectorXd& p = m.mutable_params();
  opt.velocity = opt.momentum * opt.velocity + grads + opt.weight_decay * p;
  p -= opt.learning_rate * opt.velocity;
  check_finite(p, "sgd_step: parameters after update");
}

void ema_update(EmaState& ema, const TwoHeadModel& m) {
  if (!(ema.decay >= 0.0 && ema.decay <= 1.0)) {
    throw config_error("ema_update: decay must lie in [0, 1]");
  }
  if (ema.shadow.size() == 0) ema.shadow = m.params();
  if (ema.shadow.size() != m.params().size()) {
    throw shape_error("ema_update: shadow size does not match parameter count");
  }
  ema.shadow = ema.decay * ema.shadow + (1.0 - ema.decay) * m.params();
}

double gradient_check(const TwoHeadModel& m, const Eigen::MatrixXd& X, const OutputLossFn& loss_fn,
                      double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw contract_error("gradient_check: eps must lie in [1e-7, 1e-3]");
  }

  const ForwardResult fr = forward(m, X);
  const OutputLoss at_point = loss_fn(fr.reg_out, fr.arc_score);
  if (at_point.grad_reg.size() != fr.reg_out.size() ||
      at_point.grad_arc.size() != fr.arc_score.size()) {
    throw shape_error("gradient_check: loss_fn returned gradients of the wrong size");
  }
  const Eigen::VectorXd analytic = backward(m, fr.cache, at_point.grad_reg, at_point.grad_arc);

  TwoHeadModel probe = m;
  Eigen::VectorXd& p = probe.mutable_params();
  const auto eval = [&]() {
    ForwardResult r = forward(probe, X);
    return loss_fn(r.reg_out, r.arc_score).value;
  };

  double max_rel = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double orig = p(i);
    p(i) = orig + eps;
    const double up = eval();
    p(i) = orig - eps;
    const double down = eval();
    p(i) = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double rel = std::abs(analytic(i) - numeric) /
                       std::max({std::abs(analytic(i)), std::abs(numeric), 1e-12});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

void save_checkpoint(const TwoHeadModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open checkpoint file '" + path + "' for writing");

  const auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  out.write(kCkptMagic, sizeof(kCkptMagic));
  put_u32(kCkptVersion);
  put_u32(static_cast<std::uint32_t>(m.layout().input_dim));
  put_u32(static_cast<std::uint32_t>(m.layout().hidden.size()));
  for (int h : m.layout().hidden) put_u32(static_cast<std::uint32_t>(h));
  const std::uint64_t count = static_cast<std::uint64_t>(m.params().size());
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(m.params().data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw data_error("failed writing checkpoint '" + path + "'");
}

TwoHeadModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open checkpoint file '" + path + "'");

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0) {
    throw data_error("'" + path + "' is not a model checkpoint (bad magic)");
  }
  const auto get_u32 = [&]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != kCkptVersion) {
    throw data_error("checkpoint '" + path + "' has unsupported format version " +
                     std::to_string(version));
  }
  ModelLayout layout;
  layout.input_dim = static_cast<int>(get_u32());
  const std::uint32_t n_hidden = get_u32();
  for (std::uint32_t i = 0; i < n_hidden; ++i) layout.hidden.push_back(static_cast<int>(get_u32()));
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in) throw data_error("checkpoint '" + path + "' is truncated");
  if (count != static_cast<std::uint64_t>(layout.param_count())) {
    throw data_error("checkpoint '" + path + "' parameter count does not match its layout");
  }
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw data_error("checkpoint '" + path + "' is truncated");
  return TwoHeadModel::from_params(std::move(layout), std::move(params));
}

}  // namespace rankup
