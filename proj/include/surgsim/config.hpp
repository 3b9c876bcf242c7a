#pragma once

#include "surgsim/types.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace surgsim {

struct SolverParams {
  double dt = 0.01;  // outer step, s
  int substeps = 20;
  Vec3 gravity{0.0, -9.81, 0.0};
  double k_distance = 1.0;
  double k_volume = 0.9;
  double k_contact = 1.0;

  double substep() const { return dt / substeps; }
};

struct ToolConfig {
  Vec3 rcm{0.065, 0.16, 0.025};
  Vec3 start{0.03, 0.09, 0.025};  // initial distal point
  Vec3 clamp_plane{0.0, 0.0, 1.0};  // jaws open in the plane spanned by the shaft axis and this
  double shaft_length = 0.25;
  double shaft_radius = 0.0025;
  double clamp_length = 0.01;
  double clamp_radius = 0.0015;
  double grasp_radius = 0.005;
  double initial_clamp_angle_deg = 2.0;
};

struct EnvConfig {
  Vec3 target{0.08, 0.03, 0.025};
  Vec3 workspace_min{0.0, 0.02, -0.01};
  Vec3 workspace_max{0.13, 0.12, 0.06};
  int max_episode_steps = 200;
  double action_scale = 0.005;  // m per step at |action| = 1
  double success_threshold = 0.003;
  double w_distance = -1.0;
  double w_delta = -10.0;
  double w_success = 100.0;
  double reward_scale = 1.0;
  double clamp_angle_deg = 2.0;  // held during reach
};

// Vertex tied to a static point, or to the centroid of a surface face.
struct AttachmentSpec {
  std::size_t vertex = 0;
  std::optional<std::size_t> face;
  Vec3 anchor = Vec3::Zero();
  double rest_length = 0.0;
  double stiffness = 1.0;
};

struct PinBox {
  Vec3 lo;
  Vec3 hi;
};

struct SlabSpec {
  int nx = 13, ny = 3, nz = 5;  // cells; 6 tets per cell
  Vec3 origin{0.0, 0.0, 0.0};
  Vec3 size{0.13, 0.03, 0.05};
};

struct SceneConfig {
  // Either a mesh file or a generated slab.
  std::optional<std::filesystem::path> mesh_path;
  SlabSpec slab;
  std::vector<PinBox> pin_boxes{PinBox{Vec3(-1.0, -1.0, -1e-6), Vec3(1.0, 1.0, 1e-6)}};
  double total_mass = 0.18;  // kg, spread evenly over vertices

  SolverParams solver;
  ToolConfig tool;
  EnvConfig env;
  std::vector<AttachmentSpec> attachments;

  void validate() const;
};

// Parses `key = value` text. Unknown keys are a ParseError. Relative mesh paths
// resolve against `base_dir`.
SceneConfig parse_scene_config(std::string_view text, const std::filesystem::path& base_dir = {},
                               const std::string& source = "<scene>");
SceneConfig load_scene_config(const std::filesystem::path& path);

// Applies one `key=value` override on top of an existing config.
void apply_scene_override(SceneConfig& config, std::string_view assignment);

std::string format_scene_config(const SceneConfig& config);

}  // namespace surgsim
