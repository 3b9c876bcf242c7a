#pragma once

#include "surgsim/config.hpp"
#include "surgsim/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace surgsim {

using Index = std::uint32_t;
using Tet = std::array<Index, 4>;
using Face = std::array<Index, 3>;
using Edge = std::array<Index, 2>;  // lower index first

struct TetMesh {
  std::vector<Vec3> positions_rest;
  std::vector<Tet> tets;
  std::vector<Face> surface_faces;  // outward winding
  std::vector<Edge> edges;
  std::vector<Index> pinned;  // sorted, unique
  std::vector<double> vertex_mass;

  std::size_t vertex_count() const { return positions_rest.size(); }
  bool is_pinned(Index v) const;
};

struct RestState {
  std::vector<double> rest_length;  // per edge
  std::vector<double> rest_volume;  // per tet
  std::vector<double> inverse_mass;  // per vertex, 0 for pinned
};

struct Topology {
  std::vector<Edge> edges;
  std::vector<Face> surface_faces;
};

// Unique undirected edges and the faces that belong to exactly one tet.
// Faces keep the winding that points away from their tet for positively
// oriented input.
Topology derive_topology(std::span<const Tet> tets);

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

RestState compute_rest_state(const TetMesh& mesh);

// Raw file contents before derivation.
struct MeshFile {
  std::vector<Vec3> positions;
  std::vector<Tet> tets;
  std::vector<Index> pinned;
};

MeshFile parse_mesh(std::string_view text, const std::string& source = "<mesh>");
MeshFile read_mesh_file(const std::filesystem::path& path);
std::string format_mesh(const MeshFile& mesh);

// Validates indices, reorients negative tets, derives topology and assigns
// total_mass / V to every vertex.
TetMesh build_mesh(MeshFile file, double total_mass);

// Regular cell grid, each cell split into 6 tets around its main diagonal.
MeshFile make_slab(const SlabSpec& spec);

// Cell counts with the default slab proportions whose tet count is closest to
// `target_tets`.
SlabSpec slab_for_tet_count(const SlabSpec& base, std::size_t target_tets);

struct AxisBox {
  Vec3 lo;
  Vec3 hi;
  double diagonal() const { return (hi - lo).norm(); }
};
AxisBox bounding_box(std::span<const Vec3> points);

}  // namespace surgsim
