#pragma once

#include "surgsim/env.hpp"
#include "surgsim/policy.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace surgsim {

struct PPOConfig {
  long total_steps = 500000;
  int steps_before_update = 1024;  // summed over environments
  int minibatch = 256;
  int epochs = 4;
  double gamma = 0.995;
  double gae_lambda = 0.95;
  double clip_range = 0.1;  // initial value of a linear schedule to 0
  double clip_range_vf = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 0.5;
  double learning_rate = 2.5e-4;  // initial value of a linear schedule to 0
  bool normalize_advantage = true;
  NetworkSpec network;
  std::uint64_t seed = 0;

  void validate() const;
  // Rollout steps per environment between updates.
  int horizon(std::size_t num_envs) const;
  // Updates needed for the step counter to reach total_steps.
  long update_count() const;
};

// Sets one field by name (the names printed by format_ppo_config).
// Throws ParseError for unknown keys or malformed values.
void apply_ppo_override(PPOConfig& config, const std::string& key, const std::string& value);
std::string format_ppo_config(const PPOConfig& config);

// x0 * (1 - t/T), with t clamped to [0, T].
double linear_schedule(double x0, double t, double T);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// One trajectory segment. Terminal steps do not bootstrap; the step after the
// last one bootstraps with `bootstrap`.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                      std::span<const std::uint8_t> terminated, double gamma, double lambda);

// General form: next_values[t] is the critic value of the state reached by
// step t (for a truncated step, the terminal observation). The recursion is
// cut where episode_end[t] is set; bootstrapping is cut where terminated[t] is.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const double> next_values, std::span<const std::uint8_t> terminated,
                      std::span<const std::uint8_t> episode_end, double gamma, double lambda);

// Time-major rollout storage: sample index = t * num_envs + env.
struct RolloutBuffer {
  RolloutBuffer() = default;
  RolloutBuffer(int horizon, std::size_t num_envs, const NetworkSpec& spec);

  int horizon = 0;
  std::size_t num_envs = 0;
  std::size_t filled = 0;  // samples written

  Eigen::MatrixXd observations;  // obs_dim x size
  Eigen::MatrixXd actions;       // act_dim x size
  std::vector<double> log_probs, values, rewards, next_values;
  std::vector<std::uint8_t> terminated, truncated;
  std::vector<double> advantages, returns;

  std::size_t size() const { return static_cast<std::size_t>(horizon) * num_envs; }
  bool full() const { return filled == size(); }
  // Per-environment GAE over the whole buffer; fills advantages and returns.
  void finish(double gamma, double lambda);
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // mean pre-clip global norm over minibatches
  double max_clipped_grad_norm = 0.0;
  double learning_rate = 0.0;
  double clip_range = 0.0;
  double explained_variance = 0.0;
};

struct Minibatch {
  Eigen::MatrixXd observations;  // obs_dim x M
  Eigen::MatrixXd actions;       // act_dim x M
  Eigen::VectorXd log_probs;     // behaviour policy
  Eigen::VectorXd values;        // behaviour critic
  Eigen::VectorXd advantages;    // already normalised if requested
  Eigen::VectorXd returns;
};

struct PPOLoss {
  double total = 0.0;
  double policy = 0.0;   // -mean min(rho A, clip(rho, 1 +- eps) A)
  double value = 0.0;    // mean (R - V_clipped)^2, before vf_coef
  double entropy = 0.0;  // policy entropy; enters the total with -ent_coef
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  Eigen::VectorXd grad;  // d total / d parameters
};

// Clipped-surrogate objective per sample and its derivative with respect to
// log rho. With rho in [1 - eps, 1 + eps] both branches agree.
struct Surrogate {
  Eigen::ArrayXd value;
  Eigen::ArrayXd d_log_ratio;
};
Surrogate clipped_surrogate(const Eigen::ArrayXd& ratio, const Eigen::ArrayXd& advantage, double eps);

PPOLoss ppo_loss(const ActorCritic& net, const Minibatch& batch, const PPOConfig& config, double clip_range);

// (a - mean) / (sample std + 1e-8)
std::vector<double> normalize_advantages(std::span<const double> advantages);

// Four epochs (config.epochs) of clipped-surrogate minibatch updates on a
// full buffer. `t` is the step count that drives both schedules.
// Throws std::runtime_error on a non-finite loss.
UpdateStats ppo_update(ActorCritic& net, Adam& optimiser, RolloutBuffer& buffer, const PPOConfig& config,
                       double t, std::mt19937_64& rng);

struct TrainRecord {
  long update = 0;
  long env_steps = 0;
  double mean_episode_reward = 0.0;  // over the last 100 finished episodes
  double mean_episode_length = 0.0;
  long episodes = 0;  // finished so far
  long diverged = 0;  // diverged episodes so far
  UpdateStats stats;
  double steps_per_sec = 0.0;
  double wall_seconds = 0.0;  // since training started
};

// Equality of everything except the timing fields.
bool same_outcome(const TrainRecord& a, const TrainRecord& b);

struct TrainStats {
  std::size_t num_envs = 0;
  int horizon = 0;
  std::vector<TrainRecord> records;
  double wall_seconds = 0.0;
};

class Trainer {
 public:
  Trainer(EnvBatch& envs, const PPOConfig& config);

  // Collects one rollout and runs one update.
  const TrainRecord& iterate();
  bool done() const { return env_steps_ >= config_.total_steps; }
  TrainStats run(const std::function<void(const TrainRecord&)>& on_update = {});

  const ActorCritic& policy() const { return net_; }
  const PPOConfig& config() const { return config_; }
  long env_steps() const { return env_steps_; }

 private:
  void collect();
  Eigen::MatrixXd observation_matrix(std::span<const double> flat) const;

  EnvBatch& envs_;
  PPOConfig config_;
  int horizon_;
  ActorCritic net_;
  Adam optimiser_;
  RolloutBuffer buffer_;
  std::mt19937_64 rng_;
  Eigen::MatrixXd last_obs_;
  long env_steps_ = 0;
  long updates_ = 0;
  long episodes_ = 0;
  long diverged_ = 0;
  std::deque<double> recent_returns_, recent_lengths_;
  TrainStats stats_;
  double wall_ = 0.0;
};

TrainStats train(EnvBatch& envs, const PPOConfig& config, ActorCritic* trained = nullptr,
                 const std::function<void(const TrainRecord&)>& on_update = {});

// Training log as CSV with a '# key=value' preamble (num_envs, horizon, seed).
void write_train_log(std::ostream& out, const TrainStats& stats, const PPOConfig& config);
TrainStats read_train_log(std::istream& in, const std::string& source);

void save_checkpoint(const std::string& path, const ActorCritic& net);
ActorCritic load_checkpoint(const std::string& path, const NetworkSpec* expected = nullptr);

struct EvalResult {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
  double mean_length = 0.0;
};

// Runs the mean action until `episodes` episodes have finished.
EvalResult run_eval(const ActorCritic& net, EnvBatch& envs, int episodes, std::uint64_t seed);

}  // namespace surgsim
