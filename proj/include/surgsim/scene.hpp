#pragma once

#include "surgsim/config.hpp"
#include "surgsim/mesh.hpp"

#include <filesystem>
#include <memory>

namespace surgsim {

// Everything an environment instance reads but never writes.
struct Scene {
  TetMesh mesh;
  RestState rest;
  SceneConfig config;
};

// Loads the mesh named by the config (or generates its slab), applies pin
// boxes, and derives the rest state.
std::shared_ptr<const Scene> build_scene(const SceneConfig& config);
std::shared_ptr<const Scene> load_scene(const std::filesystem::path& path);

}  // namespace surgsim
