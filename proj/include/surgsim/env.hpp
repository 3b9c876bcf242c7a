#pragma once

#include "surgsim/scene.hpp"
#include "surgsim/world.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

namespace surgsim {

inline constexpr int kObservationDim = 6;
inline constexpr int kActionDim = 3;

using Observation = std::array<double, kObservationDim>;

// reward_scale * (w_l * l + w_d * d + w_s * s)
double compute_reward(const EnvConfig& config, double distance, double delta, bool success);

// Affine map of the workspace box onto [-1, 1]^3.
Vec3 normalize_position(const EnvConfig& config, const Vec3& p);

struct StepInfo {
  // Observation before the automatic reset, valid where an episode ended.
  std::vector<double> terminal_observation;  // N x 6
  std::vector<std::uint8_t> diverged;
  std::vector<double> distance;  // l after the step, before any reset
  std::vector<double> delta;     // l - l_prev
  std::vector<std::uint8_t> success;
  std::vector<double> episode_return;  // where an episode ended
  std::vector<int> episode_length;     // where an episode ended, else 0
};

struct BatchStep {
  std::vector<double> observations;  // N x 6
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminated;
  std::vector<std::uint8_t> truncated;
  StepInfo info;
};

// N reach-task instances over one shared scene. Episodes that end are reset
// inside step(); the returned observation for that instance is the fresh one.
class EnvBatch {
 public:
  EnvBatch(std::shared_ptr<const Scene> scene, std::size_t num_envs,
           ExecutionMode mode = ExecutionMode::Deterministic);

  std::size_t num_envs() const { return world_.lanes(); }
  const EnvConfig& config() const { return scene_->config.env; }
  const World& world() const { return world_; }
  const Scene& scene() const { return *scene_; }

  // Resets the listed instances; returns the observations of all instances.
  std::span<const double> reset(std::span<const std::size_t> indices, std::uint64_t seed);
  std::span<const double> reset_all(std::uint64_t seed);

  // actions: N x 3, each component clamped to [-1, 1].
  const BatchStep& step(std::span<const double> actions);

  Observation observe(std::size_t instance) const;
  Vec3 instrument_position(std::size_t instance) const { return world_.tool(instance).distal; }
  double distance_to_target(std::size_t instance) const;
  int episode_step(std::size_t instance) const { return step_count_[instance]; }

 private:
  void reset_instance(std::size_t i);
  void write_observation(std::size_t i, std::vector<double>& out) const;

  std::shared_ptr<const Scene> scene_;
  World world_;
  std::vector<int> step_count_;
  std::vector<double> episode_return_;
  std::vector<double> l_prev_;
  std::vector<std::mt19937_64> rng_;  // reserved for randomised starts
  std::vector<double> observations_;
  std::vector<ToolCommand> commands_;
  BatchStep out_;
  bool was_reset_ = false;
};

}  // namespace surgsim
