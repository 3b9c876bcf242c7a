#include "surgsim/ppo.hpp"

#include "surgsim/textio.hpp"
#include "surgsim/types.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace surgsim {

void PPOConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("ppo: ") + what);
  };
  need(total_steps >= 1, "total_steps must be >= 1");
  need(steps_before_update >= 1, "steps_before_update must be >= 1");
  need(minibatch >= 1, "minibatch must be >= 1");
  need(epochs >= 1, "epochs must be >= 1");
  need(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  need(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  need(clip_range > 0.0, "clip_range must be > 0");
  need(clip_range_vf > 0.0, "clip_range_vf must be > 0");
  need(vf_coef >= 0.0 && ent_coef >= 0.0, "loss coefficients must be >= 0");
  need(max_grad_norm > 0.0, "max_grad_norm must be > 0");
  need(learning_rate > 0.0, "learning_rate must be > 0");
  need(network.obs_dim == kObservationDim && network.act_dim == kActionDim,
       "network must map 6 observations to 3 actions");
}

int PPOConfig::horizon(std::size_t num_envs) const {
  if (num_envs == 0 || steps_before_update % static_cast<long>(num_envs) != 0) {
    throw ValidationError("steps_before_update (" + std::to_string(steps_before_update) +
                          ") must be divisible by the environment count (" + std::to_string(num_envs) + ")");
  }
  return steps_before_update / static_cast<int>(num_envs);
}

long PPOConfig::update_count() const { return (total_steps + steps_before_update - 1) / steps_before_update; }

namespace {

using Setter = std::function<void(PPOConfig&, const std::string&)>;

const std::map<std::string, Setter>& ppo_keys() {
  static const std::map<std::string, Setter> keys = [] {
    std::map<std::string, Setter> t;
    auto real = [&](const char* name, double PPOConfig::*field) {
      t[name] = [field](PPOConfig& c, const std::string& v) { c.*field = parse_double(v); };
    };
    real("gamma", &PPOConfig::gamma);
    real("gae_lambda", &PPOConfig::gae_lambda);
    real("clip_range", &PPOConfig::clip_range);
    real("clip_range_vf", &PPOConfig::clip_range_vf);
    real("vf_coef", &PPOConfig::vf_coef);
    real("ent_coef", &PPOConfig::ent_coef);
    real("max_grad_norm", &PPOConfig::max_grad_norm);
    real("learning_rate", &PPOConfig::learning_rate);
    t["total_steps"] = [](PPOConfig& c, const std::string& v) { c.total_steps = parse_long(v); };
    t["steps_before_update"] = [](PPOConfig& c, const std::string& v) {
      c.steps_before_update = static_cast<int>(parse_long(v));
    };
    t["minibatch"] = [](PPOConfig& c, const std::string& v) { c.minibatch = static_cast<int>(parse_long(v)); };
    t["epochs"] = [](PPOConfig& c, const std::string& v) { c.epochs = static_cast<int>(parse_long(v)); };
    t["seed"] = [](PPOConfig& c, const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_long(v)); };
    t["normalize_advantage"] = [](PPOConfig& c, const std::string& v) {
      if (v != "0" && v != "1" && v != "true" && v != "false") throw ParseError("normalize_advantage: expected 0/1");
      c.normalize_advantage = v == "1" || v == "true";
    };
    t["hidden"] = [](PPOConfig& c, const std::string& v) {
      c.network.hidden.clear();
      for (const auto& part : split(v, ',')) c.network.hidden.push_back(static_cast<int>(parse_long(part)));
    };
    t["shared_trunk"] = [](PPOConfig& c, const std::string& v) {
      if (v != "0" && v != "1") throw ParseError("shared_trunk: expected 0/1");
      c.network.shared_trunk = v == "1";
    };
    t["log_std_init"] = [](PPOConfig& c, const std::string& v) { c.network.log_std_init = parse_double(v); };
    return t;
  }();
  return keys;
}

double mean_of(const std::deque<double>& d) {
  if (d.empty()) return std::nan("");
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

void apply_ppo_override(PPOConfig& config, const std::string& key, const std::string& value) {
  const auto& keys = ppo_keys();
  auto it = keys.find(key);
  if (it == keys.end()) throw ParseError("unknown ppo key '" + key + "'");
  try {
    it->second(config, value);
  } catch (const ParseError& e) {
    throw ParseError("ppo." + key + ": " + e.what());
  }
}

std::string format_ppo_config(const PPOConfig& c) {
  std::ostringstream o;
  o << "total_steps=" << c.total_steps << "\nsteps_before_update=" << c.steps_before_update
    << "\nminibatch=" << c.minibatch << "\nepochs=" << c.epochs << "\ngamma=" << format_double(c.gamma)
    << "\ngae_lambda=" << format_double(c.gae_lambda) << "\nclip_range=" << format_double(c.clip_range)
    << "\nclip_range_vf=" << format_double(c.clip_range_vf) << "\nvf_coef=" << format_double(c.vf_coef)
    << "\nent_coef=" << format_double(c.ent_coef) << "\nmax_grad_norm=" << format_double(c.max_grad_norm)
    << "\nlearning_rate=" << format_double(c.learning_rate)
    << "\nnormalize_advantage=" << (c.normalize_advantage ? 1 : 0) << "\nhidden=";
  for (std::size_t i = 0; i < c.network.hidden.size(); ++i) o << (i ? "," : "") << c.network.hidden[i];
  o << "\nshared_trunk=" << (c.network.shared_trunk ? 1 : 0);
  o << "\nlog_std_init=" << format_double(c.network.log_std_init) << "\nseed=" << c.seed << '\n';
  return o.str();
}

double linear_schedule(double x0, double t, double T) {
  const double tc = std::clamp(t, 0.0, T);
  return x0 * (1.0 - tc / T);
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> next_values, std::span<const std::uint8_t> terminated,
                      std::span<const std::uint8_t> episode_end, double gamma, double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || terminated.size() != n || episode_end.size() != n) {
    throw std::invalid_argument("compute_gae: arrays must have equal length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double keep = terminated[i] ? 0.0 : 1.0;
    const double carry = episode_end[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * keep * next_values[i] - values[i];
    next_adv = delta + gamma * lambda * carry * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + values[i];
  }
  return out;
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                      std::span<const std::uint8_t> terminated, double gamma, double lambda) {
  const std::size_t n = values.size();
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) next[i] = i + 1 < n ? values[i + 1] : bootstrap;
  return compute_gae(rewards, values, next, terminated, terminated, gamma, lambda);
}

RolloutBuffer::RolloutBuffer(int h, std::size_t n, const NetworkSpec& spec) : horizon(h), num_envs(n) {
  const std::size_t s = size();
  observations = Eigen::MatrixXd::Zero(spec.obs_dim, static_cast<Eigen::Index>(s));
  actions = Eigen::MatrixXd::Zero(spec.act_dim, static_cast<Eigen::Index>(s));
  log_probs.assign(s, 0.0);
  values.assign(s, 0.0);
  rewards.assign(s, 0.0);
  next_values.assign(s, 0.0);
  terminated.assign(s, 0);
  truncated.assign(s, 0);
  advantages.assign(s, 0.0);
  returns.assign(s, 0.0);
}

void RolloutBuffer::finish(double gamma, double lambda) {
  const std::size_t H = static_cast<std::size_t>(horizon);
  std::vector<double> r(H), v(H), nv(H);
  std::vector<std::uint8_t> term(H), end(H);
  for (std::size_t e = 0; e < num_envs; ++e) {
    for (std::size_t t = 0; t < H; ++t) {
      const std::size_t i = t * num_envs + e;
      r[t] = rewards[i];
      v[t] = values[i];
      nv[t] = next_values[i];
      term[t] = terminated[i];
      end[t] = terminated[i] || truncated[i];
    }
    const GaeResult g = compute_gae(r, v, nv, term, end, gamma, lambda);
    for (std::size_t t = 0; t < H; ++t) {
      advantages[t * num_envs + e] = g.advantages[t];
      returns[t * num_envs + e] = g.returns[t];
    }
  }
}

Surrogate clipped_surrogate(const Eigen::ArrayXd& ratio, const Eigen::ArrayXd& advantage, double eps) {
  const Eigen::ArrayXd unclipped = ratio * advantage;
  const Eigen::ArrayXd clipped = ratio.min(1.0 + eps).max(1.0 - eps) * advantage;
  // The min picks the unclipped branch or a constant.
  return {unclipped.min(clipped), (unclipped <= clipped).select(unclipped, 0.0)};
}

PPOLoss ppo_loss(const ActorCritic& net, const Minibatch& batch, const PPOConfig& config, double clip_range) {
  const Eigen::Index m = batch.observations.cols();
  const double inv_m = 1.0 / static_cast<double>(m);
  const double cv = config.clip_range_vf;
  ActorCritic::Cache cache;
  net.forward(batch.observations, cache);

  const Eigen::VectorXd logp = net.log_prob(cache.mean, batch.actions);
  const Eigen::ArrayXd log_ratio = (logp - batch.log_probs).array();
  const Eigen::ArrayXd ratio = log_ratio.exp();
  const Surrogate sur = clipped_surrogate(ratio, batch.advantages.array(), clip_range);

  const Eigen::ArrayXd dv = cache.value.array() - batch.values.array();
  const Eigen::ArrayXd v_pred = batch.values.array() + dv.min(cv).max(-cv);

  PPOLoss out;
  out.policy = -sur.value.mean();
  out.value = (batch.returns.array() - v_pred).square().mean();
  out.entropy = net.entropy();
  out.total = out.policy + config.vf_coef * out.value - config.ent_coef * out.entropy;
  out.approx_kl = ((ratio - 1.0) - log_ratio).mean();
  out.clip_fraction = ((ratio - 1.0).abs() > clip_range).cast<double>().mean();
  if (!std::isfinite(out.total)) return out;

  // log pi = sum_j -0.5 z_j^2 - s_j - c with z = (a - mu) / exp(s)
  const Eigen::ArrayXd g_logp = -sur.d_log_ratio * inv_m;
  const Eigen::ArrayXd inv_var = (-2.0 * net.log_std().array()).exp();
  const Eigen::ArrayXXd diff = (batch.actions - cache.mean).array();
  const Eigen::MatrixXd d_mean = (diff.colwise() * inv_var).rowwise() * g_logp.transpose();
  const Eigen::ArrayXXd z2 = diff.square().colwise() * inv_var;
  Eigen::VectorXd d_log_std = ((z2 - 1.0).rowwise() * g_logp.transpose()).rowwise().sum().matrix();
  d_log_std.array() -= config.ent_coef;
  const Eigen::VectorXd d_value =
      ((dv.abs() <= cv).select(2.0 * config.vf_coef * inv_m * (v_pred - batch.returns.array()), 0.0)).matrix();

  out.grad = Eigen::VectorXd::Zero(net.parameters().size());
  net.backward(cache, d_mean, d_value, d_log_std, out.grad);
  return out;
}

std::vector<double> normalize_advantages(std::span<const double> adv) {
  const std::size_t n = adv.size();
  std::vector<double> out(adv.begin(), adv.end());
  if (n < 2) return out;
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double a : adv) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  for (double& a : out) a = (a - mean) / (sd + 1e-8);
  return out;
}

UpdateStats ppo_update(ActorCritic& net, Adam& optimiser, RolloutBuffer& buffer, const PPOConfig& config,
                       double t, std::mt19937_64& rng) {
  if (!buffer.full()) throw std::logic_error("ppo_update on a partially filled buffer");
  const std::size_t n = buffer.size();
  const double T = static_cast<double>(config.total_steps);
  UpdateStats stats;
  stats.learning_rate = linear_schedule(config.learning_rate, t, T);
  stats.clip_range = linear_schedule(config.clip_range, t, T);

  const std::vector<double> adv = config.normalize_advantage ? normalize_advantages(buffer.advantages)
                                                             : buffer.advantages;
  const NetworkSpec& spec = net.spec();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Minibatch mb;
  long batches = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.minibatch)) {
      const auto M = static_cast<Eigen::Index>(std::min<std::size_t>(config.minibatch, n - start));
      mb.observations.resize(spec.obs_dim, M);
      mb.actions.resize(spec.act_dim, M);
      mb.log_probs.resize(M);
      mb.values.resize(M);
      mb.advantages.resize(M);
      mb.returns.resize(M);
      for (Eigen::Index j = 0; j < M; ++j) {
        const std::size_t i = order[start + static_cast<std::size_t>(j)];
        const auto ii = static_cast<Eigen::Index>(i);
        mb.observations.col(j) = buffer.observations.col(ii);
        mb.actions.col(j) = buffer.actions.col(ii);
        mb.log_probs[j] = buffer.log_probs[i];
        mb.values[j] = buffer.values[i];
        mb.advantages[j] = adv[i];
        mb.returns[j] = buffer.returns[i];
      }

      PPOLoss loss = ppo_loss(net, mb, config, stats.clip_range);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss (policy " << loss.policy << ", value " << loss.value << ", entropy "
            << loss.entropy << ") at epoch " << epoch << ", step count " << t;
        throw std::runtime_error(msg.str());
      }
      const double norm = loss.grad.norm();
      loss.grad *= std::min(1.0, config.max_grad_norm / (norm + 1e-6));
      optimiser.step(net.parameters(), loss.grad, stats.learning_rate);

      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.approx_kl += loss.approx_kl;
      stats.clip_fraction += loss.clip_fraction;
      stats.grad_norm += norm;
      stats.max_clipped_grad_norm = std::max(stats.max_clipped_grad_norm, loss.grad.norm());
      ++batches;
    }
  }
  const double b = static_cast<double>(batches);
  stats.policy_loss /= b;
  stats.value_loss /= b;
  stats.entropy /= b;
  stats.approx_kl /= b;
  stats.clip_fraction /= b;
  stats.grad_norm /= b;

  const Eigen::Map<const Eigen::ArrayXd> v(buffer.values.data(), static_cast<Eigen::Index>(n));
  const Eigen::Map<const Eigen::ArrayXd> r(buffer.returns.data(), static_cast<Eigen::Index>(n));
  auto var = [](const Eigen::ArrayXd& x) { return (x - x.mean()).square().mean(); };
  const double vr = var(r);
  stats.explained_variance = vr > 0.0 ? 1.0 - var(r - v) / vr : std::nan("");
  return stats;
}

bool same_outcome(const TrainRecord& a, const TrainRecord& b) {
  const UpdateStats &s = a.stats, &u = b.stats;
  return a.update == b.update && a.env_steps == b.env_steps && a.episodes == b.episodes &&
         a.diverged == b.diverged && same_bits(a.mean_episode_reward, b.mean_episode_reward) &&
         same_bits(a.mean_episode_length, b.mean_episode_length) && same_bits(s.policy_loss, u.policy_loss) &&
         same_bits(s.value_loss, u.value_loss) && same_bits(s.entropy, u.entropy) &&
         same_bits(s.approx_kl, u.approx_kl) && same_bits(s.clip_fraction, u.clip_fraction) &&
         same_bits(s.grad_norm, u.grad_norm) && same_bits(s.max_clipped_grad_norm, u.max_clipped_grad_norm) &&
         same_bits(s.learning_rate, u.learning_rate) && same_bits(s.clip_range, u.clip_range) &&
         same_bits(s.explained_variance, u.explained_variance);
}

Trainer::Trainer(EnvBatch& envs, const PPOConfig& config)
    : envs_(envs), config_(config), horizon_((config.validate(), config.horizon(envs.num_envs()))),
      net_(config.network, config.seed), optimiser_(net_.parameter_count()),
      buffer_(horizon_, envs.num_envs(), config.network), rng_(config.seed ^ 0x5DEECE66DULL) {
  last_obs_ = observation_matrix(envs_.reset_all(config.seed));
  stats_.num_envs = envs.num_envs();
  stats_.horizon = horizon_;
}

Eigen::MatrixXd Trainer::observation_matrix(std::span<const double> flat) const {
  return Eigen::Map<const Eigen::MatrixXd>(flat.data(), kObservationDim,
                                           static_cast<Eigen::Index>(envs_.num_envs()));
}

void Trainer::collect() {
  const std::size_t N = envs_.num_envs();
  const auto Ni = static_cast<Eigen::Index>(N);
  std::normal_distribution<double> normal(0.0, 1.0);
  ActorCritic::Cache cache, terminal_cache;
  buffer_.filled = 0;

  for (int t = 0; t < horizon_; ++t) {
    net_.forward(last_obs_, cache);
    const std::size_t base = static_cast<std::size_t>(t) * N;
    if (t > 0) {
      for (std::size_t e = 0; e < N; ++e) {
        if (!buffer_.truncated[base - N + e]) buffer_.next_values[base - N + e] = cache.value[static_cast<Eigen::Index>(e)];
      }
    }
    const Eigen::ArrayXd sd = net_.log_std().array().exp();
    Eigen::MatrixXd actions(kActionDim, Ni);
    for (Eigen::Index e = 0; e < Ni; ++e)
      for (int k = 0; k < kActionDim; ++k) actions(k, e) = cache.mean(k, e) + sd[k] * normal(rng_);
    const Eigen::VectorXd logp = net_.log_prob(cache.mean, actions);

    const BatchStep& out = envs_.step(std::span<const double>(actions.data(), N * kActionDim));

    std::vector<Eigen::Index> cut;
    for (std::size_t e = 0; e < N; ++e) {
      const std::size_t i = base + e;
      const auto ei = static_cast<Eigen::Index>(e);
      buffer_.observations.col(static_cast<Eigen::Index>(i)) = last_obs_.col(ei);
      buffer_.actions.col(static_cast<Eigen::Index>(i)) = actions.col(ei);
      buffer_.log_probs[i] = logp[ei];
      buffer_.values[i] = cache.value[ei];
      buffer_.rewards[i] = out.rewards[e];
      buffer_.terminated[i] = out.terminated[e];
      buffer_.truncated[i] = out.truncated[e];
      buffer_.next_values[i] = 0.0;
      if (out.truncated[e]) cut.push_back(ei);
      if (out.terminated[e] || out.truncated[e]) {
        ++episodes_;
        if (out.info.diverged[e]) ++diverged_;
        recent_returns_.push_back(out.info.episode_return[e]);
        recent_lengths_.push_back(out.info.episode_length[e]);
        if (recent_returns_.size() > 100) {
          recent_returns_.pop_front();
          recent_lengths_.pop_front();
        }
      }
    }
    if (!cut.empty()) {
      const Eigen::MatrixXd terminal = observation_matrix(out.info.terminal_observation);
      Eigen::MatrixXd obs(kObservationDim, static_cast<Eigen::Index>(cut.size()));
      for (std::size_t j = 0; j < cut.size(); ++j) obs.col(static_cast<Eigen::Index>(j)) = terminal.col(cut[j]);
      net_.forward(obs, terminal_cache);
      for (std::size_t j = 0; j < cut.size(); ++j) {
        buffer_.next_values[base + static_cast<std::size_t>(cut[j])] = terminal_cache.value[static_cast<Eigen::Index>(j)];
      }
    }
    last_obs_ = observation_matrix(out.observations);
    buffer_.filled += N;
  }
  net_.forward(last_obs_, cache);
  const std::size_t last = static_cast<std::size_t>(horizon_ - 1) * N;
  for (std::size_t e = 0; e < N; ++e) {
    if (!buffer_.truncated[last + e]) buffer_.next_values[last + e] = cache.value[static_cast<Eigen::Index>(e)];
  }
  buffer_.finish(config_.gamma, config_.gae_lambda);
}

const TrainRecord& Trainer::iterate() {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const long steps_before = env_steps_;
  collect();
  env_steps_ += static_cast<long>(buffer_.size());
  const UpdateStats s = ppo_update(net_, optimiser_, buffer_, config_, static_cast<double>(steps_before), rng_);
  const double dt = std::chrono::duration<double>(clock::now() - t0).count();
  wall_ += dt;

  TrainRecord rec;
  rec.update = ++updates_;
  rec.env_steps = env_steps_;
  rec.mean_episode_reward = mean_of(recent_returns_);
  rec.mean_episode_length = mean_of(recent_lengths_);
  rec.episodes = episodes_;
  rec.diverged = diverged_;
  rec.stats = s;
  rec.steps_per_sec = static_cast<double>(buffer_.size()) / dt;
  rec.wall_seconds = wall_;
  stats_.records.push_back(rec);
  stats_.wall_seconds = wall_;
  return stats_.records.back();
}

TrainStats Trainer::run(const std::function<void(const TrainRecord&)>& on_update) {
  while (!done()) {
    const TrainRecord& r = iterate();
    if (on_update) on_update(r);
  }
  return stats_;
}

TrainStats train(EnvBatch& envs, const PPOConfig& config, ActorCritic* trained,
                 const std::function<void(const TrainRecord&)>& on_update) {
  Trainer trainer(envs, config);
  TrainStats stats = trainer.run(on_update);
  if (trained) *trained = trainer.policy();
  return stats;
}

namespace {

const std::vector<std::string> kLogColumns = {
    "update",        "env_steps",   "mean_episode_reward", "mean_episode_length", "episodes",
    "diverged",      "policy_loss", "value_loss",          "entropy",             "approx_kl",
    "clip_fraction", "grad_norm",   "max_clipped_grad_norm", "learning_rate",     "clip_range",
    "explained_variance", "steps_per_sec", "wall_seconds"};

}  // namespace

void write_train_log(std::ostream& out, const TrainStats& stats, const PPOConfig& config) {
  out << "# num_envs=" << stats.num_envs << "\n# horizon=" << stats.horizon << "\n# seed=" << config.seed
      << "\n# total_steps=" << config.total_steps << "\n# steps_before_update=" << config.steps_before_update
      << '\n';
  for (std::size_t i = 0; i < kLogColumns.size(); ++i) out << (i ? "," : "") << kLogColumns[i];
  out << '\n';
  for (const TrainRecord& r : stats.records) {
    const UpdateStats& s = r.stats;
    const double cols[] = {s.policy_loss, s.value_loss,   s.entropy,    s.approx_kl,
                           s.clip_fraction, s.grad_norm,  s.max_clipped_grad_norm,
                           s.learning_rate, s.clip_range, s.explained_variance, r.steps_per_sec, r.wall_seconds};
    out << r.update << ',' << r.env_steps << ',' << format_double(r.mean_episode_reward) << ','
        << format_double(r.mean_episode_length) << ',' << r.episodes << ',' << r.diverged;
    for (double c : cols) out << ',' << format_double(c);
    out << '\n';
  }
}

TrainStats read_train_log(std::istream& in, const std::string& source) {
  TrainStats stats;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      if (line[0] == '#') {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        const std::string value = line.substr(eq + 1);
        if (key == "num_envs") stats.num_envs = static_cast<std::size_t>(parse_long(value));
        if (key == "horizon") stats.horizon = static_cast<int>(parse_long(value));
        continue;
      }
      const auto cells = split(line, ',');
      if (!header) {
        if (cells != kLogColumns) throw ParseError("unexpected column header");
        header = true;
        continue;
      }
      if (cells.size() != kLogColumns.size()) {
        throw ParseError("expected " + std::to_string(kLogColumns.size()) + " columns, got " +
                         std::to_string(cells.size()));
      }
      TrainRecord r;
      UpdateStats& s = r.stats;
      r.update = parse_long(cells[0]);
      r.env_steps = parse_long(cells[1]);
      r.mean_episode_reward = parse_double(cells[2]);
      r.mean_episode_length = parse_double(cells[3]);
      r.episodes = parse_long(cells[4]);
      r.diverged = parse_long(cells[5]);
      double* fields[] = {&s.policy_loss,   &s.value_loss,   &s.entropy,         &s.approx_kl,
                          &s.clip_fraction, &s.grad_norm,    &s.max_clipped_grad_norm,
                          &s.learning_rate, &s.clip_range,   &s.explained_variance, &r.steps_per_sec,
                          &r.wall_seconds};
      for (std::size_t k = 0; k < std::size(fields); ++k) *fields[k] = parse_double(cells[6 + k]);
      stats.records.push_back(r);
      stats.wall_seconds = r.wall_seconds;
    } catch (const ParseError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  if (!header) throw ParseError(source, lineno, "missing column header");
  return stats;
}

void save_checkpoint(const std::string& path, const ActorCritic& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  net.save(out);
  if (!out) throw std::runtime_error("error writing checkpoint '" + path + "'");
}

ActorCritic load_checkpoint(const std::string& path, const NetworkSpec* expected) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return ActorCritic::load(in, path, expected);
}

EvalResult run_eval(const ActorCritic& net, EnvBatch& envs, int episodes, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("episodes must be >= 1");
  if (net.spec().obs_dim != kObservationDim || net.spec().act_dim != kActionDim) {
    throw ValidationError("policy expects " + std::to_string(net.spec().obs_dim) + " observations and " +
                          std::to_string(net.spec().act_dim) + " actions; the environment has " +
                          std::to_string(kObservationDim) + " and " + std::to_string(kActionDim));
  }
  const std::size_t N = envs.num_envs();
  std::span<const double> obs = envs.reset_all(seed);
  ActorCritic::Cache cache;
  EvalResult res;
  double reward = 0.0, length = 0.0;
  while (res.episodes < episodes) {
    net.forward(Eigen::Map<const Eigen::MatrixXd>(obs.data(), kObservationDim, static_cast<Eigen::Index>(N)), cache);
    const BatchStep& out = envs.step(std::span<const double>(cache.mean.data(), N * kActionDim));
    for (std::size_t e = 0; e < N && res.episodes < episodes; ++e) {
      if (!out.terminated[e] && !out.truncated[e]) continue;
      ++res.episodes;
      res.successes += out.info.success[e] ? 1 : 0;
      reward += out.info.episode_return[e];
      length += out.info.episode_length[e];
    }
    obs = out.observations;
  }
  res.success_rate = static_cast<double>(res.successes) / res.episodes;
  res.mean_reward = reward / res.episodes;
  res.mean_length = length / res.episodes;
  return res;
}

}  // namespace surgsim
