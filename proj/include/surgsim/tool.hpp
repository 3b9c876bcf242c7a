#pragma once

#include "surgsim/config.hpp"
#include "surgsim/mesh.hpp"
#include "surgsim/particles.hpp"
#include "surgsim/types.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace surgsim {

class KinematicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Capsule {
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::UnitZ();
  double radius = 0.001;
};

// Drag constraint between the tool's drag point and one tissue vertex.
struct GraspConstraint {
  Index vertex = 0;
  double rest_length = 0.0;
  double stiffness = 1.0;
};

inline constexpr double kGraspAngleDeg = 3.0;
inline constexpr double kMaxClampAngleDeg = 30.0;

// Shaft plus two jaws pivoting at the shaft tip. The shaft line always passes
// through the remote center of motion; `axis` points from it towards the tip.
struct ToolModel {
  Capsule shaft;
  Capsule clamp_a;
  Capsule clamp_b;
  Vec3 rcm = Vec3::Zero();
  Vec3 axis = -Vec3::UnitY();
  Vec3 opening = Vec3::UnitZ();  // unit, orthogonal to axis; the jaw plane
  Vec3 distal = Vec3::Zero();    // drag point, end of the closed jaws
  double clamp_angle_deg = 2.0;
  double grasp_radius = 0.005;
  double shaft_length = 0.25;
  double clamp_length = 0.01;
  std::vector<GraspConstraint> grasp_constraints;  // at most one

  const Vec3& drag_point() const { return distal; }
  Vec3 pivot() const { return distal - clamp_length * axis; }
};

struct ToolCommand {
  Vec3 distal = Vec3::Zero();
  double clamp_angle_deg = 2.0;
};

ToolModel make_tool(const ToolConfig& config);

// Recomputes the three capsules from axis, opening, distal point and angle.
void rebuild_capsules(ToolModel& tool);

struct RcmTransform {
  double angle = 0.0;  // radians, [0, pi]
  Vec3 axis = Vec3::UnitZ();
  double translation = 0.0;  // signed advance along the shaft, m
};

// Rotation about the RCM taking p1 - rcm onto the direction of p2 - rcm,
// followed by the advance that makes the lengths match.
RcmTransform rcm_transform(const Vec3& p1, const Vec3& p2, const Vec3& rcm);

struct ToolUpdate {
  ToolModel tool;
  bool clipped = false;
};

// Moves the distal point to the command (clipped into `workspace` if given),
// keeping the shaft on the RCM, and sets the jaw angle.
ToolUpdate apply_tool_command(const ToolModel& tool, const ToolCommand& cmd,
                              const std::optional<AxisBox>& workspace = std::nullopt);

// Below the grasp angle with nothing held: take the nearest free vertex within
// the grasp radius of the drag point. At or above it: release everything.
void update_grasp(ToolModel& tool, ParticleState& state, std::size_t lane = 0);

// Distance from `p` to the infinite line through the shaft capsule.
double distance_to_shaft_line(const ToolModel& tool, const Vec3& p);

}  // namespace surgsim
