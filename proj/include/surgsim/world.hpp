#pragma once

#include "surgsim/collision.hpp"
#include "surgsim/particles.hpp"
#include "surgsim/scene.hpp"
#include "surgsim/solver.hpp"
#include "surgsim/tool.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace surgsim {

struct StepReport {
  std::size_t step_index = 0;
  std::vector<std::uint8_t> diverged;  // per lane
  std::vector<std::uint8_t> clipped;   // per lane, command clipped to the workspace
  std::vector<std::size_t> contacts;   // per lane

  bool any_diverged() const;
  // Throws SimulationDiverged naming the first diverged lane.
  void throw_if_diverged() const;
};

// `lanes` independent copies of one scene, each with its own tool, stepped
// together. Lanes never read each other's state.
class World {
 public:
  World(std::shared_ptr<const Scene> scene, std::size_t lanes, ExecutionMode mode = ExecutionMode::Deterministic);

  std::size_t lanes() const { return particles_.lanes(); }
  const Scene& scene() const { return *scene_; }
  ExecutionMode mode() const { return mode_; }

  ParticleState& particles() { return particles_; }
  const ParticleState& particles() const { return particles_; }
  ToolModel& tool(std::size_t lane) { return tools_[lane]; }
  const ToolModel& tool(std::size_t lane) const { return tools_[lane]; }
  std::size_t step_count() const { return steps_; }

  // Rest positions, zero velocity, tool at its start pose, no grasp.
  void reset_lane(std::size_t lane);
  void reset_all();

  // One outer step: tool command and grasp update per lane, `substeps`
  // predict/project/average/velocity passes, then one collision pass.
  // Diverged lanes are reported, not thrown.
  StepReport step(std::span<const ToolCommand> commands);
  // Same, holding each tool at its current pose.
  StepReport step();

  // Constraint pass of one substep; public for tests.
  void substep();

  const std::vector<DistanceConstraint>& distance_constraints() const { return distance_; }
  const std::vector<VolumeConstraint>& volume_constraints() const { return volume_; }
  const std::vector<AttachmentConstraint>& attachment_constraints() const { return attachments_; }

 private:
  void project_all(CorrectionAccumulator& acc, std::size_t chunk, std::size_t chunks) const;
  void collide(std::size_t lane, StepReport& report);

  std::shared_ptr<const Scene> scene_;
  ExecutionMode mode_;
  ParticleState particles_;
  std::vector<ToolModel> tools_;
  ToolModel start_tool_;
  std::vector<DistanceConstraint> distance_;
  std::vector<VolumeConstraint> volume_;
  std::vector<AttachmentConstraint> attachments_;
  std::optional<AxisBox> workspace_;

  CorrectionAccumulator acc_;
  std::vector<CorrectionAccumulator> chunk_acc_;  // parallel mode only
  std::vector<double> x_prev_;
  std::vector<Vec3> scratch_;
  std::size_t steps_ = 0;
};

}  // namespace surgsim
