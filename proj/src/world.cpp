#include "surgsim/world.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <thread>

namespace surgsim {

bool StepReport::any_diverged() const {
  return std::any_of(diverged.begin(), diverged.end(), [](std::uint8_t d) { return d != 0; });
}

void StepReport::throw_if_diverged() const {
  for (std::size_t i = 0; i < diverged.size(); ++i) {
    if (diverged[i]) throw SimulationDiverged(step_index, i);
  }
}

World::World(std::shared_ptr<const Scene> scene, std::size_t lanes, ExecutionMode mode)
    : scene_(std::move(scene)), mode_(mode) {
  if (lanes == 0) throw ValidationError("a world needs at least one lane");
  const TetMesh& mesh = scene_->mesh;
  const RestState& rest = scene_->rest;
  const SceneConfig& cfg = scene_->config;

  particles_ = ParticleState(mesh.vertex_count(), lanes);
  particles_.inverse_mass() = rest.inverse_mass;

  distance_.reserve(mesh.edges.size());
  for (std::size_t i = 0; i < mesh.edges.size(); ++i) {
    distance_.push_back({mesh.edges[i][0], mesh.edges[i][1], rest.rest_length[i], cfg.solver.k_distance});
  }
  volume_.reserve(mesh.tets.size());
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) {
    volume_.push_back({mesh.tets[i], rest.rest_volume[i], cfg.solver.k_volume});
  }
  for (const AttachmentSpec& a : cfg.attachments) {
    AttachmentConstraint c;
    c.vertex = static_cast<Index>(a.vertex);
    if (a.face) c.face = mesh.surface_faces.at(*a.face);
    c.anchor = a.anchor;
    c.rest_length = a.rest_length;
    c.stiffness = a.stiffness;
    attachments_.push_back(c);
  }
  workspace_ = AxisBox{cfg.env.workspace_min, cfg.env.workspace_max};
  start_tool_ = make_tool(cfg.tool);
  tools_.assign(lanes, start_tool_);

  acc_ = CorrectionAccumulator(mesh.vertex_count(), lanes);
  if (mode_ == ExecutionMode::Parallel) {
    const std::size_t chunks = std::max<std::size_t>(4, std::thread::hardware_concurrency());
    chunk_acc_.assign(chunks, CorrectionAccumulator(mesh.vertex_count(), lanes));
  }
  reset_all();
}

void World::reset_lane(std::size_t lane) {
  const auto& rest = scene_->mesh.positions_rest;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    particles_.set_position(i, lane, rest[i]);
    particles_.set_velocity(i, lane, Vec3::Zero());
    particles_.set_grasped(i, lane, false);
  }
  tools_[lane] = start_tool_;
}

void World::reset_all() {
  for (std::size_t e = 0; e < lanes(); ++e) reset_lane(e);
}

void World::project_all(CorrectionAccumulator& acc, std::size_t chunk, std::size_t chunks) const {
  auto range = [&](std::size_t n) {
    return std::pair<std::size_t, std::size_t>{n * chunk / chunks, n * (chunk + 1) / chunks};
  };
  auto [d0, d1] = range(distance_.size());
  for (std::size_t i = d0; i < d1; ++i) project_distance(distance_[i], particles_, acc);
  if (chunk == 0) {
    for (std::size_t e = 0; e < lanes(); ++e) {
      const ToolModel& t = tools_[e];
      for (const GraspConstraint& g : t.grasp_constraints) {
        project_anchor(g.vertex, t.drag_point(), g.rest_length, g.stiffness, particles_, acc, e);
      }
    }
  }
  auto [a0, a1] = range(attachments_.size());
  for (std::size_t i = a0; i < a1; ++i) project_attachment(attachments_[i], particles_, acc);
  auto [v0, v1] = range(volume_.size());
  for (std::size_t i = v0; i < v1; ++i) project_volume(volume_[i], particles_, acc);
}

void World::substep() {
  const SolverParams& p = scene_->config.solver;
  const double h = p.substep();
  integrate_predict(particles_, x_prev_, h, p.gravity);
  if (mode_ == ExecutionMode::Deterministic) {
    acc_.reset();
    project_all(acc_, 0, 1);
  } else {
    const std::size_t chunks = chunk_acc_.size();
    tbb::parallel_for(std::size_t{0}, chunks, [&](std::size_t c) {
      chunk_acc_[c].reset();
      project_all(chunk_acc_[c], c, chunks);
    });
    acc_.reset();
    for (const auto& part : chunk_acc_) acc_.add(part);
  }
  apply_accumulated_corrections(acc_, particles_);
  update_velocities(particles_, x_prev_, h);
}

void World::collide(std::size_t lane, StepReport& report) {
  const TetMesh& mesh = scene_->mesh;
  particles_.gather_positions(lane, scratch_);
  auto contacts = detect_face_contacts(mesh.surface_faces, scratch_, tools_[lane]);
  report.contacts[lane] = contacts.size();
  if (contacts.empty()) return;
  resolve_contacts(contacts, mesh.surface_faces, scratch_, particles_.inverse_mass(), scene_->config.solver.k_contact);
  particles_.scatter_positions(lane, scratch_);
}

StepReport World::step(std::span<const ToolCommand> commands) {
  if (commands.size() != lanes()) throw std::invalid_argument("one tool command per lane required");
  StepReport report;
  report.step_index = steps_;
  report.diverged.assign(lanes(), 0);
  report.clipped.assign(lanes(), 0);
  report.contacts.assign(lanes(), 0);

  for (std::size_t e = 0; e < lanes(); ++e) {
    ToolUpdate up = apply_tool_command(tools_[e], commands[e], workspace_);
    tools_[e] = std::move(up.tool);
    report.clipped[e] = up.clipped ? 1 : 0;
    update_grasp(tools_[e], particles_, e);
  }

  for (int s = 0; s < scene_->config.solver.substeps; ++s) substep();

  for (std::size_t e = 0; e < lanes(); ++e) {
    if (!particles_.lane_finite(e)) {
      report.diverged[e] = 1;
      continue;
    }
    collide(e, report);
  }
  ++steps_;
  return report;
}

StepReport World::step() {
  std::vector<ToolCommand> hold(lanes());
  for (std::size_t e = 0; e < lanes(); ++e) hold[e] = {tools_[e].distal, tools_[e].clamp_angle_deg};
  return step(hold);
}

}  // namespace surgsim
