#include "surgsim/policy.hpp"

#include "surgsim/textio.hpp"
#include "surgsim/types.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace surgsim {

namespace {

Eigen::MatrixXd orthogonal(int rows, int cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool flip = rows < cols;
  const int r = flip ? cols : rows, c = flip ? rows : cols;
  Eigen::MatrixXd a(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd rr = qr.matrixQR();
  for (int j = 0; j < c; ++j) {
    if (rr(j, j) < 0.0) q.col(j) *= -1.0;
  }
  if (flip) q.transposeInPlace();
  return gain * q;
}

std::string shape_string(const NetworkSpec& s) {
  std::ostringstream o;
  o << s.obs_dim;
  for (int h : s.hidden) o << 'x' << h;
  o << "->" << s.act_dim << (s.shared_trunk ? " shared" : " separate");
  return o.str();
}

}  // namespace

void ActorCritic::layout() {
  std::size_t off = 0;
  auto add = [&](int rows, int cols) {
    Layer l{off, off + static_cast<std::size_t>(rows) * cols, rows, cols};
    off = l.b + rows;
    return l;
  };
  auto stack = [&](std::vector<Layer>& out) {
    out.clear();
    int in = spec_.obs_dim;
    for (int h : spec_.hidden) {
      out.push_back(add(h, in));
      in = h;
    }
    return in;
  };
  const int width = stack(trunk_);
  if (spec_.shared_trunk) {
    value_trunk_.clear();
  } else {
    stack(value_trunk_);
  }
  mean_head_ = add(spec_.act_dim, width);
  value_head_ = add(1, width);
  log_std_offset_ = off;
  params_ = Vector::Zero(static_cast<Eigen::Index>(off + spec_.act_dim));
}

ActorCritic::ActorCritic(const NetworkSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.obs_dim < 1 || spec.act_dim < 1) throw ValidationError("network dimensions must be positive");
  for (int h : spec.hidden) {
    if (h < 1) throw ValidationError("hidden layer widths must be positive");
  }
  layout();
  std::mt19937_64 rng(seed);
  auto fill = [&](const Layer& l, double gain) {
    Eigen::Map<Matrix>(params_.data() + l.w, l.rows, l.cols) = orthogonal(l.rows, l.cols, gain, rng);
  };
  for (const Layer& l : trunk_) fill(l, std::sqrt(2.0));
  for (const Layer& l : value_trunk_) fill(l, std::sqrt(2.0));
  fill(mean_head_, 0.01);
  fill(value_head_, 1.0);
  params_.tail(spec_.act_dim).setConstant(spec_.log_std_init);
}

Eigen::Map<const ActorCritic::Matrix> ActorCritic::weight(const Layer& l) const {
  return {params_.data() + l.w, l.rows, l.cols};
}

Eigen::Map<const ActorCritic::Vector> ActorCritic::bias(const Layer& l) const { return {params_.data() + l.b, l.rows}; }

Eigen::Map<const ActorCritic::Vector> ActorCritic::log_std() const {
  return {params_.data() + log_std_offset_, spec_.act_dim};
}

void ActorCritic::forward(const Matrix& obs, Cache& cache) const {
  if (obs.rows() != spec_.obs_dim) throw std::invalid_argument("observation width does not match the network");
  auto run = [&](const std::vector<Layer>& layers, std::vector<Matrix>& out) {
    out.resize(layers.size() + 1);
    out[0] = obs;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out[i + 1] = ((weight(layers[i]) * out[i]).colwise() + bias(layers[i])).array().tanh();
    }
  };
  run(trunk_, cache.layer);
  if (value_trunk_.empty()) {
    cache.vlayer.clear();
  } else {
    run(value_trunk_, cache.vlayer);
  }
  const Matrix& hv = value_trunk_.empty() ? cache.layer.back() : cache.vlayer.back();
  cache.mean = (weight(mean_head_) * cache.layer.back()).colwise() + bias(mean_head_);
  cache.value = ((weight(value_head_) * hv).array() + params_[static_cast<Eigen::Index>(value_head_.b)]).transpose();
}

void ActorCritic::backward(const Cache& cache, const Matrix& d_mean, const Vector& d_value,
                           const Vector& d_log_std, Vector& grad) const {
  if (grad.size() != params_.size()) grad = Vector::Zero(params_.size());
  auto gw = [&](const Layer& l) { return Eigen::Map<Matrix>(grad.data() + l.w, l.rows, l.cols); };
  auto gb = [&](const Layer& l) { return Eigen::Map<Vector>(grad.data() + l.b, l.rows); };

  const bool shared = value_trunk_.empty();
  const Matrix& h = cache.layer.back();
  const Matrix& hv = shared ? h : cache.vlayer.back();
  const Eigen::RowVectorXd dv = d_value.transpose();
  gw(mean_head_) += d_mean * h.transpose();
  gb(mean_head_) += d_mean.rowwise().sum();
  gw(value_head_) += dv * hv.transpose();
  gb(value_head_)(0) += dv.sum();

  auto back = [&](const std::vector<Layer>& layers, const std::vector<Matrix>& acts, Matrix dh) {
    for (std::size_t i = layers.size(); i-- > 0;) {
      const Matrix dz = dh.array() * (1.0 - acts[i + 1].array().square());
      gw(layers[i]) += dz * acts[i].transpose();
      gb(layers[i]) += dz.rowwise().sum();
      if (i > 0) dh = weight(layers[i]).transpose() * dz;
    }
  };
  if (shared) {
    back(trunk_, cache.layer, weight(mean_head_).transpose() * d_mean + weight(value_head_).transpose() * dv);
  } else {
    back(trunk_, cache.layer, weight(mean_head_).transpose() * d_mean);
    back(value_trunk_, cache.vlayer, weight(value_head_).transpose() * dv);
  }
  grad.segment(static_cast<Eigen::Index>(log_std_offset_), spec_.act_dim) += d_log_std;
}

ActorCritic::Vector ActorCritic::log_prob(const Matrix& mean, const Matrix& actions) const {
  const Eigen::ArrayXd ls = log_std();
  const Eigen::ArrayXd inv_std = (-ls).exp();
  const Eigen::ArrayXXd z = (actions - mean).array().colwise() * inv_std;
  const double norm = ls.sum() + 0.5 * spec_.act_dim * std::log(2.0 * std::numbers::pi);
  return (-0.5 * z.square().colwise().sum() - norm).transpose();
}

double ActorCritic::entropy() const {
  return log_std().sum() + 0.5 * spec_.act_dim * (1.0 + std::log(2.0 * std::numbers::pi));
}

void ActorCritic::save(std::ostream& out) const {
  out << "surgsim-policy 1\n";
  out << "obs_dim " << spec_.obs_dim << "\nact_dim " << spec_.act_dim << "\nhidden";
  for (int h : spec_.hidden) out << ' ' << h;
  out << "\nshared_trunk " << (spec_.shared_trunk ? 1 : 0);
  out << "\nparams " << params_.size() << '\n';
  for (Eigen::Index i = 0; i < params_.size(); ++i) out << format_double(params_[i]) << '\n';
}

ActorCritic ActorCritic::load(std::istream& in, const std::string& source, const NetworkSpec* expected) {
  LineReader reader(in, source);
  std::vector<std::string> tok = reader.next_tokens();
  if (tok.size() != 2 || tok[0] != "surgsim-policy" || tok[1] != "1") reader.fail("not a policy checkpoint");

  NetworkSpec spec;
  auto keyed = [&](const char* key) {
    std::vector<std::string> t = reader.next_tokens();
    if (t.empty() || t[0] != key) reader.fail(std::string("expected '") + key + "'");
    t.erase(t.begin());
    return t;
  };
  auto one_int = [&](const char* key) {
    const auto t = keyed(key);
    if (t.size() != 1) reader.fail(std::string("'") + key + "' takes one value");
    return static_cast<int>(reader.parse_int(t[0]));
  };
  spec.obs_dim = one_int("obs_dim");
  spec.act_dim = one_int("act_dim");
  spec.hidden.clear();
  for (const auto& t : keyed("hidden")) spec.hidden.push_back(static_cast<int>(reader.parse_int(t)));
  spec.shared_trunk = one_int("shared_trunk") != 0;

  if (expected && (expected->obs_dim != spec.obs_dim || expected->act_dim != spec.act_dim ||
                   expected->hidden != spec.hidden || expected->shared_trunk != spec.shared_trunk)) {
    throw ValidationError(source + ": checkpoint network " + shape_string(spec) + " does not match expected " +
                          shape_string(*expected));
  }
  if (spec.obs_dim < 1 || spec.act_dim < 1) reader.fail("network dimensions must be positive");

  ActorCritic net;
  net.spec_ = spec;
  net.layout();
  const long n = reader.parse_int(keyed("params").at(0));
  if (n != net.params_.size()) {
    reader.fail("parameter count " + std::to_string(n) + " does not match shape " + shape_string(spec) + " (" +
                std::to_string(net.params_.size()) + ")");
  }
  for (long i = 0; i < n; ++i) {
    const auto t = reader.next_tokens();
    if (t.size() != 1) reader.fail("expected one parameter per line");
    net.params_[i] = reader.parse_double(t[0]);
  }
  return net;
}

Adam::Adam(std::size_t n, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace surgsim
