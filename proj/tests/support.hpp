// Small scenes and helpers shared by the unit tests.
#pragma once

#include "surgsim/scene.hpp"

#include <memory>
#include <random>

namespace surgsim::testing {

inline MeshFile unit_tet() {
  MeshFile m;
  m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  m.tets = {{0, 1, 2, 3}};
  return m;
}

// A scene config whose tool sits far from the tissue: nothing but the
// solver acts on the mesh.
inline SceneConfig isolated_config() {
  SceneConfig c;
  c.pin_boxes.clear();
  c.tool.rcm = Vec3(10.0, 10.16, 10.025);
  c.tool.start = Vec3(10.0, 10.09, 10.025);
  c.env.workspace_min = Vec3(9.9, 10.0, 9.9);
  c.env.workspace_max = Vec3(10.1, 10.12, 10.1);
  c.env.target = Vec3(10.0, 10.05, 10.0);
  return c;
}

// One 1 cm cube cell (6 tets) at `origin` with no pins, isolated from the tool.
inline std::shared_ptr<const Scene> single_cell_scene(double k_distance, double k_volume, int substeps,
                                                     const Vec3& origin = Vec3::Zero()) {
  SceneConfig c = isolated_config();
  c.solver.k_distance = k_distance;
  c.solver.k_volume = k_volume;
  c.solver.substeps = substeps;
  c.slab.nx = c.slab.ny = c.slab.nz = 1;
  c.slab.origin = origin;
  c.slab.size = Vec3(0.01, 0.01, 0.01);
  return build_scene(c);
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace surgsim::testing
