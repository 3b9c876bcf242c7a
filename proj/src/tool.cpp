#include "surgsim/tool.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace surgsim {

namespace {

constexpr double kSingularDistance = 1e-9;
constexpr double kMinAngle = 1e-9;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

Vec3 any_perpendicular(const Vec3& v) {
  Vec3 trial = std::abs(v.x()) < 0.9 * v.norm() ? Vec3::UnitX() : Vec3::UnitY();
  return v.cross(trial).normalized();
}

void check_clamp_angle(double deg) {
  if (!(deg > 0.0 && deg < kMaxClampAngleDeg)) {
    throw KinematicError("clamp angle " + std::to_string(deg) + " deg outside (0, 30)");
  }
}

}  // namespace

void rebuild_capsules(ToolModel& tool) {
  const Vec3 pivot = tool.pivot();
  tool.shaft.p1 = pivot;
  tool.shaft.p0 = pivot - tool.shaft_length * tool.axis;
  const double a = deg2rad(tool.clamp_angle_deg);
  const Vec3 jaw_a = std::cos(a) * tool.axis + std::sin(a) * tool.opening;
  const Vec3 jaw_b = std::cos(a) * tool.axis - std::sin(a) * tool.opening;
  tool.clamp_a.p0 = pivot;
  tool.clamp_a.p1 = pivot + tool.clamp_length * jaw_a;
  tool.clamp_b.p0 = pivot;
  tool.clamp_b.p1 = pivot + tool.clamp_length * jaw_b;
}

ToolModel make_tool(const ToolConfig& config) {
  check_clamp_angle(config.initial_clamp_angle_deg);
  const Vec3 v = config.start - config.rcm;
  if (v.norm() < kSingularDistance) throw KinematicError("tool start point coincides with the RCM");
  ToolModel tool;
  tool.rcm = config.rcm;
  tool.axis = v.normalized();
  Vec3 opening = config.clamp_plane - config.clamp_plane.dot(tool.axis) * tool.axis;
  tool.opening = opening.norm() > 1e-9 ? opening.normalized() : any_perpendicular(tool.axis);
  tool.distal = config.start;
  tool.clamp_angle_deg = config.initial_clamp_angle_deg;
  tool.grasp_radius = config.grasp_radius;
  tool.shaft_length = config.shaft_length;
  tool.clamp_length = config.clamp_length;
  tool.shaft.radius = config.shaft_radius;
  tool.clamp_a.radius = config.clamp_radius;
  tool.clamp_b.radius = config.clamp_radius;
  rebuild_capsules(tool);
  return tool;
}

RcmTransform rcm_transform(const Vec3& p1, const Vec3& p2, const Vec3& rcm) {
  const Vec3 v1 = p1 - rcm;
  const Vec3 v2 = p2 - rcm;
  const double n1 = v1.norm(), n2 = v2.norm();
  if (n1 < kSingularDistance || n2 < kSingularDistance) {
    throw KinematicError("distal point at the remote center of motion is singular");
  }
  RcmTransform t;
  const double c = std::clamp(v1.dot(v2) / (n1 * n2), -1.0, 1.0);
  t.angle = std::acos(c);
  t.translation = n2 - n1;
  if (t.angle > kMinAngle) {
    const Vec3 cross = v1.cross(v2);
    // Antiparallel vectors have no unique axis; any perpendicular works.
    t.axis = cross.norm() > 1e-12 * n1 * n2 ? cross.normalized() : any_perpendicular(v1);
  } else {
    t.angle = 0.0;
    t.axis = Vec3::UnitZ();
  }
  return t;
}

ToolUpdate apply_tool_command(const ToolModel& tool, const ToolCommand& cmd, const std::optional<AxisBox>& workspace) {
  check_clamp_angle(cmd.clamp_angle_deg);
  ToolUpdate out{tool, false};
  Vec3 target = cmd.distal;
  if (workspace) {
    Vec3 clipped = target.cwiseMax(workspace->lo).cwiseMin(workspace->hi);
    out.clipped = clipped != target;
    target = clipped;
  }
  const RcmTransform t = rcm_transform(tool.distal, target, tool.rcm);
  ToolModel& next = out.tool;
  if (t.angle > 0.0) {
    const Eigen::AngleAxisd rot(t.angle, t.axis);
    next.axis = (rot * tool.axis).normalized();
    next.opening = rot * tool.opening;
  }
  next.opening = (next.opening - next.opening.dot(next.axis) * next.axis).normalized();
  const double reach = (tool.distal - tool.rcm).norm() + t.translation;
  next.distal = tool.rcm + reach * next.axis;
  next.clamp_angle_deg = cmd.clamp_angle_deg;
  rebuild_capsules(next);
  return out;
}

void update_grasp(ToolModel& tool, ParticleState& state, std::size_t lane) {
  if (tool.clamp_angle_deg >= kGraspAngleDeg) {
    for (const auto& g : tool.grasp_constraints) state.set_grasped(g.vertex, lane, false);
    tool.grasp_constraints.clear();
    return;
  }
  if (!tool.grasp_constraints.empty()) return;

  const auto& w = state.inverse_mass();
  const double r2 = tool.grasp_radius * tool.grasp_radius;
  std::optional<Index> best;
  double best_d2 = r2;
  for (std::size_t i = 0; i < state.vertices(); ++i) {
    if (w[i] == 0.0) continue;
    const double d2 = (state.position(i, lane) - tool.distal).squaredNorm();
    if (d2 <= best_d2) {
      if (!best || d2 < best_d2) {
        best = static_cast<Index>(i);
        best_d2 = d2;
      }
    }
  }
  if (best) {
    tool.grasp_constraints.push_back({*best, 0.0, 1.0});
    state.set_grasped(*best, lane, true);
  }
}

double distance_to_shaft_line(const ToolModel& tool, const Vec3& p) {
  const Vec3 dir = (tool.shaft.p1 - tool.shaft.p0).normalized();
  const Vec3 r = p - tool.shaft.p0;
  return (r - r.dot(dir) * dir).norm();
}

}  // namespace surgsim
