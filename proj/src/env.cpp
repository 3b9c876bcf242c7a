#include "surgsim/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace surgsim {

double compute_reward(const EnvConfig& config, double distance, double delta, bool success) {
  const double raw = config.w_distance * distance + config.w_delta * delta + config.w_success * (success ? 1.0 : 0.0);
  return config.reward_scale * raw;
}

Vec3 normalize_position(const EnvConfig& config, const Vec3& p) {
  const Vec3 span = config.workspace_max - config.workspace_min;
  return (2.0 * (p - config.workspace_min).cwiseQuotient(span)).array() - 1.0;
}

EnvBatch::EnvBatch(std::shared_ptr<const Scene> scene, std::size_t num_envs, ExecutionMode mode)
    : scene_(scene), world_(scene, num_envs, mode) {
  const EnvConfig& cfg = config();
  const Vec3 t = cfg.target;
  if ((t - cfg.workspace_min).minCoeff() < 0.0 || (cfg.workspace_max - t).minCoeff() < 0.0) {
    throw ValidationError("target lies outside the workspace");
  }
  step_count_.assign(num_envs, 0);
  episode_return_.assign(num_envs, 0.0);
  l_prev_.assign(num_envs, 0.0);
  rng_.resize(num_envs);
  observations_.assign(num_envs * kObservationDim, 0.0);
  commands_.resize(num_envs);

  out_.observations.assign(num_envs * kObservationDim, 0.0);
  out_.rewards.assign(num_envs, 0.0);
  out_.terminated.assign(num_envs, 0);
  out_.truncated.assign(num_envs, 0);
  out_.info.terminal_observation.assign(num_envs * kObservationDim, 0.0);
  out_.info.diverged.assign(num_envs, 0);
  out_.info.distance.assign(num_envs, 0.0);
  out_.info.delta.assign(num_envs, 0.0);
  out_.info.success.assign(num_envs, 0);
  out_.info.episode_return.assign(num_envs, 0.0);
  out_.info.episode_length.assign(num_envs, 0);
}

double EnvBatch::distance_to_target(std::size_t instance) const {
  return (world_.tool(instance).distal - config().target).norm();
}

Observation EnvBatch::observe(std::size_t instance) const {
  const Vec3 p = normalize_position(config(), instrument_position(instance));
  const Vec3 t = normalize_position(config(), config().target);
  return {p.x(), p.y(), p.z(), t.x(), t.y(), t.z()};
}

void EnvBatch::write_observation(std::size_t i, std::vector<double>& out) const {
  const Observation o = observe(i);
  std::copy(o.begin(), o.end(), out.begin() + static_cast<std::ptrdiff_t>(i * kObservationDim));
}

void EnvBatch::reset_instance(std::size_t i) {
  world_.reset_lane(i);
  step_count_[i] = 0;
  episode_return_[i] = 0.0;
  l_prev_[i] = distance_to_target(i);
  write_observation(i, observations_);
}

std::span<const double> EnvBatch::reset(std::span<const std::size_t> indices, std::uint64_t seed) {
  for (std::size_t i : indices) {
    if (i >= num_envs()) throw std::out_of_range("environment index " + std::to_string(i) + " out of range");
  }
  for (std::size_t i : indices) {
    rng_[i].seed(seed + 0x9E3779B97F4A7C15ULL * (i + 1));
    reset_instance(i);
  }
  was_reset_ = true;
  return observations_;
}

std::span<const double> EnvBatch::reset_all(std::uint64_t seed) {
  std::vector<std::size_t> all(num_envs());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return reset(all, seed);
}

const BatchStep& EnvBatch::step(std::span<const double> actions) {
  const std::size_t n = num_envs();
  if (!was_reset_) throw std::logic_error("step() before reset()");
  if (actions.size() != n * kActionDim) throw std::invalid_argument("actions must be num_envs x 3");
  for (double a : actions) {
    if (!std::isfinite(a)) throw std::invalid_argument("non-finite action");
  }
  const EnvConfig& cfg = config();
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 a(actions[3 * i], actions[3 * i + 1], actions[3 * i + 2]);
    a = a.cwiseMax(-1.0).cwiseMin(1.0);
    commands_[i].distal = world_.tool(i).distal + cfg.action_scale * a;
    commands_[i].clamp_angle_deg = cfg.clamp_angle_deg;
  }
  const StepReport report = world_.step(commands_);

  StepInfo& info = out_.info;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = distance_to_target(i);
    const double d = l - l_prev_[i];
    const bool success = l < cfg.success_threshold;
    const double r = compute_reward(cfg, l, d, success);
    ++step_count_[i];
    episode_return_[i] += r;
    l_prev_[i] = l;

    out_.rewards[i] = r;
    out_.terminated[i] = success ? 1 : 0;
    const bool diverged = report.diverged[i] != 0;
    out_.truncated[i] = (!success && (step_count_[i] >= cfg.max_episode_steps || diverged)) ? 1 : 0;
    info.diverged[i] = diverged ? 1 : 0;
    info.distance[i] = l;
    info.delta[i] = d;
    info.success[i] = success ? 1 : 0;
    info.episode_return[i] = 0.0;
    info.episode_length[i] = 0;

    write_observation(i, observations_);
    if (out_.terminated[i] || out_.truncated[i]) {
      std::copy_n(observations_.begin() + static_cast<std::ptrdiff_t>(i * kObservationDim), kObservationDim,
                  info.terminal_observation.begin() + static_cast<std::ptrdiff_t>(i * kObservationDim));
      info.episode_return[i] = episode_return_[i];
      info.episode_length[i] = step_count_[i];
      reset_instance(i);
    }
  }
  out_.observations = observations_;
  return out_;
}

}  // namespace surgsim
