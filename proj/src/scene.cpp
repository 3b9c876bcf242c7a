#include "surgsim/scene.hpp"

#include "surgsim/textio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace surgsim {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> tokens_of(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Values {
  std::vector<std::string_view> tok;
  std::string key;

  void expect(std::size_t n) const {
    if (tok.size() != n) {
      throw ParseError("key '" + key + "' expects " + std::to_string(n) + " value(s), got " +
                       std::to_string(tok.size()));
    }
  }
  template <typename T>
  T num(std::size_t i) const {
    T v{};
    auto [p, ec] = std::from_chars(tok[i].data(), tok[i].data() + tok[i].size(), v);
    if (ec != std::errc() || p != tok[i].data() + tok[i].size()) {
      throw ParseError("key '" + key + "': bad number '" + std::string(tok[i]) + "'");
    }
    return v;
  }
  double scalar() const {
    expect(1);
    return num<double>(0);
  }
  int integer() const {
    expect(1);
    return num<int>(0);
  }
  Vec3 vec3(std::size_t off = 0) const { return {num<double>(off), num<double>(off + 1), num<double>(off + 2)}; }
};

using Setter = std::function<void(SceneConfig&, const Values&, const std::filesystem::path&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["mesh"] = [](SceneConfig& c, const Values& v, const std::filesystem::path& base) {
      v.expect(1);
      std::filesystem::path p(std::string(v.tok[0]));
      c.mesh_path = p.is_relative() && !base.empty() ? base / p : p;
    };
    t["slab_cells"] = [](SceneConfig& c, const Values& v, const auto&) {
      v.expect(3);
      c.slab.nx = v.num<int>(0);
      c.slab.ny = v.num<int>(1);
      c.slab.nz = v.num<int>(2);
    };
    t["slab_origin"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.slab.origin = v.vec3(); };
    t["slab_size"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.slab.size = v.vec3(); };
    t["pin_box"] = [](SceneConfig& c, const Values& v, const auto&) {
      if (v.tok.size() == 1 && v.tok[0] == "none") {
        c.pin_boxes.clear();
        return;
      }
      v.expect(6);
      c.pin_boxes.push_back({v.vec3(0), v.vec3(3)});
    };
    t["total_mass"] = [](SceneConfig& c, const Values& v, const auto&) { c.total_mass = v.scalar(); };
    t["dt"] = [](SceneConfig& c, const Values& v, const auto&) { c.solver.dt = v.scalar(); };
    t["substeps"] = [](SceneConfig& c, const Values& v, const auto&) { c.solver.substeps = v.integer(); };
    t["gravity"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.solver.gravity = v.vec3(); };
    t["stiffness_distance"] = [](SceneConfig& c, const Values& v, const auto&) { c.solver.k_distance = v.scalar(); };
    t["stiffness_volume"] = [](SceneConfig& c, const Values& v, const auto&) { c.solver.k_volume = v.scalar(); };
    t["stiffness_contact"] = [](SceneConfig& c, const Values& v, const auto&) { c.solver.k_contact = v.scalar(); };
    t["tool_rcm"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.tool.rcm = v.vec3(); };
    t["tool_start"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.tool.start = v.vec3(); };
    t["tool_clamp_plane"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.tool.clamp_plane = v.vec3(); };
    t["tool_shaft_length"] = [](SceneConfig& c, const Values& v, const auto&) { c.tool.shaft_length = v.scalar(); };
    t["tool_shaft_radius"] = [](SceneConfig& c, const Values& v, const auto&) { c.tool.shaft_radius = v.scalar(); };
    t["tool_clamp_length"] = [](SceneConfig& c, const Values& v, const auto&) { c.tool.clamp_length = v.scalar(); };
    t["tool_clamp_radius"] = [](SceneConfig& c, const Values& v, const auto&) { c.tool.clamp_radius = v.scalar(); };
    t["tool_clamp_angle"] = [](SceneConfig& c, const Values& v, const auto&) { c.tool.initial_clamp_angle_deg = v.scalar(); };
    t["grasp_radius"] = [](SceneConfig& c, const Values& v, const auto&) { c.tool.grasp_radius = v.scalar(); };
    t["target"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.env.target = v.vec3(); };
    t["workspace_min"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.env.workspace_min = v.vec3(); };
    t["workspace_max"] = [](SceneConfig& c, const Values& v, const auto&) { v.expect(3); c.env.workspace_max = v.vec3(); };
    t["max_episode_steps"] = [](SceneConfig& c, const Values& v, const auto&) { c.env.max_episode_steps = v.integer(); };
    t["action_scale"] = [](SceneConfig& c, const Values& v, const auto&) { c.env.action_scale = v.scalar(); };
    t["success_threshold"] = [](SceneConfig& c, const Values& v, const auto&) { c.env.success_threshold = v.scalar(); };
    t["reward_weights"] = [](SceneConfig& c, const Values& v, const auto&) {
      v.expect(3);
      c.env.w_distance = v.num<double>(0);
      c.env.w_delta = v.num<double>(1);
      c.env.w_success = v.num<double>(2);
    };
    t["reward_scale"] = [](SceneConfig& c, const Values& v, const auto&) { c.env.reward_scale = v.scalar(); };
    t["reach_clamp_angle"] = [](SceneConfig& c, const Values& v, const auto&) { c.env.clamp_angle_deg = v.scalar(); };
    t["attach_anchor"] = [](SceneConfig& c, const Values& v, const auto&) {
      v.expect(6);  // vertex x y z rest stiffness
      AttachmentSpec a;
      a.vertex = v.num<std::size_t>(0);
      a.anchor = v.vec3(1);
      a.rest_length = v.num<double>(4);
      a.stiffness = v.num<double>(5);
      c.attachments.push_back(a);
    };
    t["attach_face"] = [](SceneConfig& c, const Values& v, const auto&) {
      v.expect(4);  // vertex face rest stiffness
      AttachmentSpec a;
      a.vertex = v.num<std::size_t>(0);
      a.face = v.num<std::size_t>(1);
      a.rest_length = v.num<double>(2);
      a.stiffness = v.num<double>(3);
      c.attachments.push_back(a);
    };
    return t;
  }();
  return table;
}

void apply_line(SceneConfig& config, std::string_view line, const std::filesystem::path& base_dir) {
  auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ParseError("expected 'key = value'");
  std::string key(trim(line.substr(0, eq)));
  const auto& table = setters();
  auto it = table.find(key);
  if (it == table.end()) throw ParseError("unknown key '" + key + "'");
  Values v{tokens_of(trim(line.substr(eq + 1))), key};
  it->second(config, v, base_dir);
}

bool in_unit(double k) { return k >= 0.0 && k <= 1.0; }

std::string fmt3(const Vec3& v) {
  return format_double(v.x()) + ' ' + format_double(v.y()) + ' ' + format_double(v.z());
}

}  // namespace

void SceneConfig::validate() const {
  if (!(solver.dt > 0.0)) throw ValidationError("dt must be positive");
  if (solver.substeps < 1) throw ValidationError("substeps must be >= 1");
  if (!in_unit(solver.k_distance) || !in_unit(solver.k_volume) || !in_unit(solver.k_contact)) {
    throw ValidationError("stiffnesses must lie in [0, 1]");
  }
  for (const auto& a : attachments) {
    if (!in_unit(a.stiffness)) throw ValidationError("attachment stiffness must lie in [0, 1]");
    if (a.rest_length < 0.0) throw ValidationError("attachment rest length must be >= 0");
  }
  if (!(total_mass > 0.0)) throw ValidationError("total_mass must be positive");
  if (!(tool.shaft_length > 0.0 && tool.shaft_radius > 0.0 && tool.clamp_length > 0.0 && tool.clamp_radius > 0.0)) {
    throw ValidationError("tool capsule dimensions must be positive");
  }
  if (!(tool.grasp_radius > 0.0)) throw ValidationError("grasp_radius must be positive");
  if (!(tool.initial_clamp_angle_deg > 0.0 && tool.initial_clamp_angle_deg < 30.0) ||
      !(env.clamp_angle_deg > 0.0 && env.clamp_angle_deg < 30.0)) {
    throw ValidationError("clamp angles must lie in (0, 30) degrees");
  }
  if ((env.workspace_max - env.workspace_min).minCoeff() <= 0.0) throw ValidationError("empty workspace bounds");
  Vec3 rcm_clamped = tool.rcm.cwiseMax(env.workspace_min).cwiseMin(env.workspace_max);
  if ((rcm_clamped - tool.rcm).norm() < 1e-6) throw ValidationError("remote center of motion lies inside the workspace");
  if (!(env.success_threshold > 0.0)) throw ValidationError("success_threshold must be positive");
  if (env.max_episode_steps < 1) throw ValidationError("max_episode_steps must be >= 1");
  if (!(env.action_scale > 0.0)) throw ValidationError("action_scale must be positive");
}

SceneConfig parse_scene_config(std::string_view text, const std::filesystem::path& base_dir,
                               const std::string& source) {
  SceneConfig config;
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_line(config, line, base_dir);
    } catch (const ParseError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return config;
}

SceneConfig load_scene_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scene file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scene_config(buf.str(), path.parent_path(), path.string());
}

void apply_scene_override(SceneConfig& config, std::string_view assignment) {
  apply_line(config, trim(assignment), std::filesystem::current_path());
}

std::string format_scene_config(const SceneConfig& c) {
  std::ostringstream o;
  if (c.mesh_path) {
    o << "mesh = " << c.mesh_path->string() << '\n';
  } else {
    o << "slab_cells = " << c.slab.nx << ' ' << c.slab.ny << ' ' << c.slab.nz << '\n';
    o << "slab_origin = " << fmt3(c.slab.origin) << '\n';
    o << "slab_size = " << fmt3(c.slab.size) << '\n';
  }
  o << "pin_box = none\n";
  for (const auto& b : c.pin_boxes) o << "pin_box = " << fmt3(b.lo) << ' ' << fmt3(b.hi) << '\n';
  o << "total_mass = " << format_double(c.total_mass) << '\n';
  o << "dt = " << format_double(c.solver.dt) << '\n';
  o << "substeps = " << c.solver.substeps << '\n';
  o << "gravity = " << fmt3(c.solver.gravity) << '\n';
  o << "stiffness_distance = " << format_double(c.solver.k_distance) << '\n';
  o << "stiffness_volume = " << format_double(c.solver.k_volume) << '\n';
  o << "stiffness_contact = " << format_double(c.solver.k_contact) << '\n';
  o << "tool_rcm = " << fmt3(c.tool.rcm) << '\n';
  o << "tool_start = " << fmt3(c.tool.start) << '\n';
  o << "tool_clamp_plane = " << fmt3(c.tool.clamp_plane) << '\n';
  o << "tool_shaft_length = " << format_double(c.tool.shaft_length) << '\n';
  o << "tool_shaft_radius = " << format_double(c.tool.shaft_radius) << '\n';
  o << "tool_clamp_length = " << format_double(c.tool.clamp_length) << '\n';
  o << "tool_clamp_radius = " << format_double(c.tool.clamp_radius) << '\n';
  o << "tool_clamp_angle = " << format_double(c.tool.initial_clamp_angle_deg) << '\n';
  o << "grasp_radius = " << format_double(c.tool.grasp_radius) << '\n';
  o << "target = " << fmt3(c.env.target) << '\n';
  o << "workspace_min = " << fmt3(c.env.workspace_min) << '\n';
  o << "workspace_max = " << fmt3(c.env.workspace_max) << '\n';
  o << "max_episode_steps = " << c.env.max_episode_steps << '\n';
  o << "action_scale = " << format_double(c.env.action_scale) << '\n';
  o << "success_threshold = " << format_double(c.env.success_threshold) << '\n';
  o << "reward_weights = " << format_double(c.env.w_distance) << ' ' << format_double(c.env.w_delta) << ' ' << format_double(c.env.w_success) << '\n';
  o << "reward_scale = " << format_double(c.env.reward_scale) << '\n';
  o << "reach_clamp_angle = " << format_double(c.env.clamp_angle_deg) << '\n';
  for (const auto& a : c.attachments) {
    if (a.face) {
      o << "attach_face = " << a.vertex << ' ' << *a.face << ' ' << format_double(a.rest_length) << ' ' << format_double(a.stiffness) << '\n';
    } else {
      o << "attach_anchor = " << a.vertex << ' ' << fmt3(a.anchor) << ' ' << format_double(a.rest_length) << ' ' << a.stiffness
        << '\n';
    }
  }
  return o.str();
}

std::shared_ptr<const Scene> build_scene(const SceneConfig& config) {
  config.validate();
  MeshFile file = config.mesh_path ? read_mesh_file(*config.mesh_path) : make_slab(config.slab);
  for (std::size_t i = 0; i < file.positions.size(); ++i) {
    const Vec3& p = file.positions[i];
    for (const PinBox& b : config.pin_boxes) {
      if ((p - b.lo).minCoeff() >= 0.0 && (b.hi - p).minCoeff() >= 0.0) {
        file.pinned.push_back(static_cast<Index>(i));
        break;
      }
    }
  }
  auto scene = std::make_shared<Scene>();
  scene->mesh = build_mesh(std::move(file), config.total_mass);
  scene->rest = compute_rest_state(scene->mesh);
  scene->config = config;
  for (const auto& a : config.attachments) {
    if (a.vertex >= scene->mesh.vertex_count()) {
      throw ValidationError("attachment vertex " + std::to_string(a.vertex) + " out of range");
    }
    if (a.face && *a.face >= scene->mesh.surface_faces.size()) {
      throw ValidationError("attachment face " + std::to_string(*a.face) + " out of range");
    }
  }
  return scene;
}

std::shared_ptr<const Scene> load_scene(const std::filesystem::path& path) {
  return build_scene(load_scene_config(path));
}

}  // namespace surgsim
