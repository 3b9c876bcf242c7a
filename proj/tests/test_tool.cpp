#include "support.hpp"

#include "surgsim/tool.hpp"
#include "surgsim/world.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace surgsim;
using surgsim::testing::random_vec;

namespace {

ToolModel default_tool() { return make_tool(ToolConfig{}); }

AxisBox default_workspace() {
  const EnvConfig e;
  return {e.workspace_min, e.workspace_max};
}

// Free vertices at the given offsets from the tool's drag point.
ParticleState cloud(const ToolModel& tool, const std::vector<Vec3>& offsets, std::vector<double> w = {}) {
  std::vector<Vec3> x;
  for (const Vec3& o : offsets) x.push_back(tool.distal + o);
  if (w.empty()) w.assign(x.size(), 1.0);
  return ParticleState::from_positions(x, w);
}

}  // namespace

TEST_CASE("rcm_transform examples") {
  const Vec3 rcm = Vec3::Zero();
  SUBCASE("identity") {
    const RcmTransform t = rcm_transform(Vec3(0, 0, -1), Vec3(0, 0, -1), rcm);
    CHECK(t.angle == 0.0);
    CHECK(t.translation == 0.0);
  }
  SUBCASE("quarter turn") {
    const RcmTransform t = rcm_transform(Vec3(1, 0, 0), Vec3(0, 1, 0), rcm);
    CHECK(t.angle == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
    CHECK((t.axis - Vec3(0, 0, 1)).norm() < 1e-15);
    CHECK(t.translation == 0.0);
  }
  SUBCASE("collinear advance") {
    const RcmTransform t = rcm_transform(Vec3(0, 0, -1), Vec3(0, 0, -2), rcm);
    CHECK(t.angle == 0.0);
    CHECK(t.translation == 1.0);
  }
  SUBCASE("offset rcm") {
    const Vec3 c(1, 2, 3);
    const RcmTransform t = rcm_transform(c + Vec3(2, 0, 0), c + Vec3(0, 0, 3), c);
    CHECK(t.angle == doctest::Approx(std::numbers::pi / 2));
    CHECK((t.axis - Vec3(0, -1, 0)).norm() < 1e-15);
    CHECK(t.translation == doctest::Approx(1.0));
  }
  SUBCASE("antiparallel") {
    const RcmTransform t = rcm_transform(Vec3(0, 0, 1), Vec3(0, 0, -1), rcm);
    CHECK(t.angle == doctest::Approx(std::numbers::pi));
    CHECK(std::abs(t.axis.z()) < 1e-12);
    CHECK(t.axis.norm() == doctest::Approx(1.0));
  }
  SUBCASE("singular at the rcm") {
    CHECK_THROWS_AS(rcm_transform(Vec3(0, 0, 1e-10), Vec3(0, 0, 1), rcm), KinematicError);
    CHECK_THROWS_AS(rcm_transform(Vec3(0, 0, 1), Vec3(1e-10, 0, 0), rcm), KinematicError);
  }
}

TEST_CASE("rcm_transform maps p1 onto p2") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const Vec3 rcm = random_vec(rng), p1 = random_vec(rng, -2, 2), p2 = random_vec(rng, -2, 2);
    const RcmTransform t = rcm_transform(p1, p2, rcm);
    CHECK(t.angle >= 0.0);
    CHECK(t.angle <= std::numbers::pi);
    const Vec3 v1 = p1 - rcm;
    const Vec3 rotated = Eigen::AngleAxisd(t.angle, t.axis) * v1;
    const Vec3 moved = rcm + rotated.normalized() * (v1.norm() + t.translation);
    CHECK((moved - p2).norm() < 1e-12);
  }
}

TEST_CASE("tool commands") {
  const ToolModel tool = default_tool();
  SUBCASE("command at the current pose leaves the tool unchanged") {
    const ToolUpdate u = apply_tool_command(tool, {tool.distal, tool.clamp_angle_deg});
    CHECK(u.tool.distal == tool.distal);
    CHECK(u.tool.axis == tool.axis);
    CHECK(u.tool.shaft.p0 == tool.shaft.p0);
    CHECK(!u.clipped);
  }
  SUBCASE("pure advance along the shaft") {
    const ToolUpdate u = apply_tool_command(tool, {tool.distal + 0.01 * tool.axis, 2.0});
    CHECK((u.tool.distal - tool.distal).norm() == doctest::Approx(0.01).epsilon(1e-12));
    CHECK((u.tool.axis - tool.axis).norm() < 1e-15);
  }
  SUBCASE("lateral target keeps the shaft on the rcm") {
    const ToolUpdate u = apply_tool_command(tool, {tool.distal + Vec3(0.03, -0.02, 0.01), 2.0});
    CHECK((u.tool.distal - (tool.distal + Vec3(0.03, -0.02, 0.01))).norm() < 1e-12);
    CHECK(distance_to_shaft_line(u.tool, u.tool.rcm) < 1e-9 * tool.shaft_length);
  }
  SUBCASE("commands outside the workspace are clipped and flagged") {
    const AxisBox box = default_workspace();
    const ToolUpdate u = apply_tool_command(tool, {Vec3(0.5, 0.05, 0.02), 2.0}, box);
    CHECK(u.clipped);
    CHECK(u.tool.distal.x() == doctest::Approx(box.hi.x()).epsilon(1e-12));
    const ToolUpdate inside = apply_tool_command(tool, {Vec3(0.05, 0.05, 0.02), 2.0}, box);
    CHECK(!inside.clipped);
  }
  SUBCASE("invalid clamp angles are rejected") {
    CHECK_THROWS_AS(apply_tool_command(tool, {tool.distal, 30.0}), KinematicError);
    CHECK_THROWS_AS(apply_tool_command(tool, {tool.distal, 0.0}), KinematicError);
    CHECK_THROWS_AS(apply_tool_command(tool, {tool.distal, -4.0}), KinematicError);
    CHECK_NOTHROW(apply_tool_command(tool, {tool.distal, 29.9}));
  }
  SUBCASE("command onto the rcm is rejected") {
    CHECK_THROWS_AS(apply_tool_command(tool, {tool.rcm, 2.0}), KinematicError);
  }
}

TEST_CASE("rcm invariant over random commands") {
  std::mt19937_64 rng(42);
  const AxisBox box = default_workspace();
  ToolModel tool = default_tool();
  std::uniform_real_distribution<double> angle(0.5, 29.5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 target = box.lo + random_vec(rng, 0.0, 1.0).cwiseProduct(box.hi - box.lo);
    tool = apply_tool_command(tool, {target, angle(rng)}, box).tool;
    worst = std::max(worst, distance_to_shaft_line(tool, tool.rcm));
    CHECK((tool.distal - target).norm() < 1e-9);
    CHECK(std::abs(tool.axis.norm() - 1.0) < 1e-12);
    CHECK(std::abs(tool.opening.dot(tool.axis)) < 1e-12);
  }
  CHECK(worst < 1e-6 * tool.shaft_length);
}

TEST_CASE("capsules follow the pose") {
  ToolModel tool = default_tool();
  tool = apply_tool_command(tool, {tool.distal + Vec3(0.01, 0, 0), 10.0}).tool;
  CHECK((tool.shaft.p1 - tool.pivot()).norm() < 1e-15);
  CHECK(((tool.shaft.p1 - tool.shaft.p0).norm()) == doctest::Approx(tool.shaft_length));
  const Vec3 ja = (tool.clamp_a.p1 - tool.clamp_a.p0).normalized();
  const Vec3 jb = (tool.clamp_b.p1 - tool.clamp_b.p0).normalized();
  CHECK(std::acos(ja.dot(jb)) * 180.0 / std::numbers::pi == doctest::Approx(20.0));
  CHECK(std::acos(ja.dot(tool.axis)) * 180.0 / std::numbers::pi == doctest::Approx(10.0));
}

TEST_CASE("grasp rules") {
  ToolModel tool = default_tool();
  const double r = tool.grasp_radius;
  SUBCASE("vertex inside the grasp radius is taken") {
    ParticleState s = cloud(tool, {Vec3(0.8 * r, 0, 0), Vec3(0, 0.9 * r, 0)});
    update_grasp(tool, s);
    REQUIRE(tool.grasp_constraints.size() == 1);
    CHECK(tool.grasp_constraints[0].vertex == 0);
    CHECK(s.grasped(0, 0));
    CHECK(!s.grasped(1, 0));
  }
  SUBCASE("vertex outside the grasp radius is ignored") {
    ParticleState s = cloud(tool, {Vec3(1.2 * r, 0, 0)});
    update_grasp(tool, s);
    CHECK(tool.grasp_constraints.empty());
    CHECK(!s.grasped(0, 0));
  }
  SUBCASE("pinned vertices cannot be grasped") {
    ParticleState s = cloud(tool, {Vec3(0.1 * r, 0, 0), Vec3(0.5 * r, 0, 0)}, {0.0, 1.0});
    update_grasp(tool, s);
    REQUIRE(tool.grasp_constraints.size() == 1);
    CHECK(tool.grasp_constraints[0].vertex == 1);
  }
  SUBCASE("opening the jaws releases") {
    ParticleState s = cloud(tool, {Vec3(0.8 * r, 0, 0)});
    update_grasp(tool, s);
    REQUIRE(tool.grasp_constraints.size() == 1);
    tool = apply_tool_command(tool, {tool.distal, 10.0}).tool;
    update_grasp(tool, s);
    CHECK(tool.grasp_constraints.empty());
    CHECK(!s.grasped(0, 0));
  }
  SUBCASE("no grasp at or above the threshold") {
    tool = apply_tool_command(tool, {tool.distal, kGraspAngleDeg}).tool;
    ParticleState s = cloud(tool, {Vec3(0.1 * r, 0, 0)});
    update_grasp(tool, s);
    CHECK(tool.grasp_constraints.empty());
  }
  SUBCASE("a held grasp is kept while closed") {
    ParticleState s = cloud(tool, {Vec3(0.8 * r, 0, 0), Vec3(0.1 * r, 0, 0)});
    s.set_position(1, 0, tool.distal + Vec3(0, 0, 10 * r));
    update_grasp(tool, s);
    s.set_position(1, 0, tool.distal);
    update_grasp(tool, s);
    REQUIRE(tool.grasp_constraints.size() == 1);
    CHECK(tool.grasp_constraints[0].vertex == 0);
  }
}

TEST_CASE("grasped vertex tracks the drag point") {
  // A pinned tet far away and one lone free vertex beside the tool tip.
  SceneConfig c = surgsim::testing::isolated_config();
  const auto dir = std::filesystem::temp_directory_path() / "surgsim_test_tool";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "lone.mesh");
    out << "tetmesh 1\n5 1\n10.1 10.0 10.1\n10.11 10.0 10.1\n10.1 10.01 10.1\n10.1 10.0 10.11\n"
        << "10.0 10.087 10.025\n0 1 2 3\npinned 4 0 1 2 3\n";
  }
  c.mesh_path = dir / "lone.mesh";
  World world(build_scene(c), 1);
  world.reset_all();
  const Vec3 start = world.tool(0).distal;
  world.step(std::vector<ToolCommand>{{start, 2.0}}).throw_if_diverged();
  REQUIRE(world.tool(0).grasp_constraints.size() == 1);
  std::mt19937_64 rng(9);
  for (int step = 0; step < 100; ++step) {
    const Vec3 d = start + random_vec(rng, -0.004, 0.004);
    world.step(std::vector<ToolCommand>{{d, 2.0}}).throw_if_diverged();
    REQUIRE(world.tool(0).grasp_constraints.size() == 1);
    CHECK((world.particles().position(4) - world.tool(0).drag_point()).norm() < 1e-9);
  }
  world.step(std::vector<ToolCommand>{{start, 12.0}});
  CHECK(world.tool(0).grasp_constraints.empty());
  CHECK(!world.particles().grasped(4, 0));
  std::filesystem::remove_all(dir);
}

TEST_CASE("make_tool validation") {
  ToolConfig c;
  c.initial_clamp_angle_deg = 45.0;
  CHECK_THROWS_AS(make_tool(c), KinematicError);
  c = ToolConfig{};
  c.start = c.rcm;
  CHECK_THROWS_AS(make_tool(c), KinematicError);
  const ToolModel t = make_tool(ToolConfig{});
  CHECK(t.distal == ToolConfig{}.start);
  CHECK(distance_to_shaft_line(t, t.rcm) < 1e-15);
}
