#include "surgsim/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace surgsim {

namespace {

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

struct LineReader {
  std::string_view text;
  std::string source;
  std::size_t pos = 0;
  std::size_t line_no = 0;

  // Next non-blank, non-comment line split into tokens; empty at EOF.
  std::vector<std::string_view> next() {
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      auto tokens = split_tokens(line);
      if (!tokens.empty()) return tokens;
    }
    return {};
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line_no, what); }
};

template <typename T>
T parse_number(const LineReader& reader, std::string_view token) {
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    reader.fail("expected a number, got '" + std::string(token) + "'");
  }
  return value;
}

std::array<Index, 3> sorted_face(const Face& f) {
  std::array<Index, 3> k = f;
  std::sort(k.begin(), k.end());
  return k;
}

}  // namespace

bool TetMesh::is_pinned(Index v) const { return std::binary_search(pinned.begin(), pinned.end(), v); }

double signed_tet_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).cross(c - a).dot(d - a) / 6.0;
}

Topology derive_topology(std::span<const Tet> tets) {
  Topology topo;
  std::vector<Edge> edges;
  edges.reserve(tets.size() * 6);
  // Face key -> (multiplicity, first oriented instance).
  std::map<std::array<Index, 3>, std::pair<int, Face>> faces;

  for (const Tet& t : tets) {
    constexpr int kEdgePairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& p : kEdgePairs) {
      Index a = t[p[0]], b = t[p[1]];
      edges.push_back(a < b ? Edge{a, b} : Edge{b, a});
    }
    const Face oriented[4] = {
        {t[0], t[2], t[1]}, {t[0], t[1], t[3]}, {t[1], t[2], t[3]}, {t[0], t[3], t[2]}};
    for (const Face& f : oriented) {
      auto [it, inserted] = faces.try_emplace(sorted_face(f), 0, f);
      ++it->second.first;
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  topo.edges = std::move(edges);

  for (const auto& [key, entry] : faces) {
    if (entry.first == 1) topo.surface_faces.push_back(entry.second);
  }
  return topo;
}

AxisBox bounding_box(std::span<const Vec3> points) {
  if (points.empty()) return {Vec3::Zero(), Vec3::Zero()};
  AxisBox box{points.front(), points.front()};
  for (const Vec3& p : points) {
    box.lo = box.lo.cwiseMin(p);
    box.hi = box.hi.cwiseMax(p);
  }
  return box;
}

RestState compute_rest_state(const TetMesh& mesh) {
  RestState rest;
  const auto& x = mesh.positions_rest;
  const double scale = bounding_box(x).diagonal();
  const double min_volume = 1e-12 * scale * scale * scale;

  rest.rest_length.reserve(mesh.edges.size());
  for (const Edge& e : mesh.edges) {
    double len = (x[e[0]] - x[e[1]]).norm();
    if (!(len > 0.0)) {
      throw ValidationError("edge " + std::to_string(e[0]) + "-" + std::to_string(e[1]) +
                            " has zero rest length");
    }
    rest.rest_length.push_back(len);
  }

  rest.rest_volume.reserve(mesh.tets.size());
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) {
    const Tet& t = mesh.tets[i];
    double vol = signed_tet_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]);
    if (!(std::abs(vol) >= min_volume) || vol <= 0.0) {
      throw ValidationError("degenerate tetrahedron " + std::to_string(i) +
                            " (rest volume " + std::to_string(vol) + ")");
    }
    rest.rest_volume.push_back(vol);
  }

  rest.inverse_mass.resize(mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    rest.inverse_mass[i] = mesh.is_pinned(static_cast<Index>(i)) ? 0.0 : 1.0 / mesh.vertex_mass[i];
  }
  return rest;
}

MeshFile parse_mesh(std::string_view text, const std::string& source) {
  LineReader reader{text, source};
  auto header = reader.next();
  if (header.size() != 2 || header[0] != "tetmesh" || header[1] != "1") {
    reader.fail("expected header 'tetmesh 1'");
  }
  auto counts = reader.next();
  std::size_t nv = 0, nt = 0;
  if (counts.size() == 2) {
    nv = parse_number<std::size_t>(reader, counts[0]);
    nt = parse_number<std::size_t>(reader, counts[1]);
  } else if (counts.size() == 4) {
    // V E F T; edge and face counts are derived, so only checked for syntax.
    nv = parse_number<std::size_t>(reader, counts[0]);
    parse_number<std::size_t>(reader, counts[1]);
    parse_number<std::size_t>(reader, counts[2]);
    nt = parse_number<std::size_t>(reader, counts[3]);
  } else {
    reader.fail("expected counts line 'V T' or 'V E F T'");
  }

  MeshFile mesh;
  mesh.positions.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    auto tok = reader.next();
    if (tok.size() != 3) reader.fail("expected vertex line 'x y z'");
    mesh.positions.emplace_back(parse_number<double>(reader, tok[0]), parse_number<double>(reader, tok[1]),
                                parse_number<double>(reader, tok[2]));
  }
  mesh.tets.reserve(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    auto tok = reader.next();
    if (tok.size() != 4) reader.fail("expected tet line 'i0 i1 i2 i3'");
    Tet t;
    for (int k = 0; k < 4; ++k) t[k] = parse_number<Index>(reader, tok[k]);
    mesh.tets.push_back(t);
  }
  auto tail = reader.next();
  if (!tail.empty()) {
    if (tail[0] != "pinned" || tail.size() < 2) reader.fail("unexpected content after tets");
    std::size_t k = parse_number<std::size_t>(reader, tail[1]);
    if (tail.size() != k + 2) reader.fail("pinned count does not match the listed indices");
    for (std::size_t i = 0; i < k; ++i) mesh.pinned.push_back(parse_number<Index>(reader, tail[i + 2]));
    if (!reader.next().empty()) reader.fail("unexpected content after pinned line");
  }
  return mesh;
}

MeshFile read_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mesh(buf.str(), path.string());
}

std::string format_mesh(const MeshFile& mesh) {
  std::ostringstream out;
  out.precision(17);
  out << "tetmesh 1\n" << mesh.positions.size() << ' ' << mesh.tets.size() << '\n';
  for (const Vec3& p : mesh.positions) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const Tet& t : mesh.tets) out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  if (!mesh.pinned.empty()) {
    out << "pinned " << mesh.pinned.size();
    for (Index i : mesh.pinned) out << ' ' << i;
    out << '\n';
  }
  return out.str();
}

TetMesh build_mesh(MeshFile file, double total_mass) {
  const std::size_t nv = file.positions.size();
  if (nv == 0) throw ValidationError("mesh has no vertices");
  if (!(total_mass > 0.0)) throw ValidationError("total mass must be positive (free vertices need mass)");

  for (std::size_t i = 0; i < file.tets.size(); ++i) {
    Tet& t = file.tets[i];
    for (Index v : t) {
      if (v >= nv) {
        throw ValidationError("tet " + std::to_string(i) + " references vertex " + std::to_string(v) +
                              " but V = " + std::to_string(nv));
      }
    }
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        if (t[a] == t[b]) throw ValidationError("tet " + std::to_string(i) + " repeats a vertex");
    const auto& x = file.positions;
    if (signed_tet_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) < 0.0) std::swap(t[2], t[3]);
  }
  for (Index p : file.pinned) {
    if (p >= nv) throw ValidationError("pinned vertex " + std::to_string(p) + " out of range");
  }

  TetMesh mesh;
  mesh.positions_rest = std::move(file.positions);
  mesh.tets = std::move(file.tets);
  auto topo = derive_topology(mesh.tets);
  mesh.edges = std::move(topo.edges);
  mesh.surface_faces = std::move(topo.surface_faces);
  mesh.pinned = std::move(file.pinned);
  std::sort(mesh.pinned.begin(), mesh.pinned.end());
  mesh.pinned.erase(std::unique(mesh.pinned.begin(), mesh.pinned.end()), mesh.pinned.end());
  mesh.vertex_mass.assign(nv, total_mass / static_cast<double>(nv));
  return mesh;
}

MeshFile make_slab(const SlabSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1 || spec.nz < 1) throw ValidationError("slab needs at least one cell per axis");
  MeshFile mesh;
  const int px = spec.nx + 1, py = spec.ny + 1, pz = spec.nz + 1;
  auto id = [&](int i, int j, int k) { return static_cast<Index>((k * py + j) * px + i); };
  for (int k = 0; k < pz; ++k)
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i) {
        mesh.positions.emplace_back(spec.origin.x() + spec.size.x() * i / spec.nx,
                                    spec.origin.y() + spec.size.y() * j / spec.ny,
                                    spec.origin.z() + spec.size.z() * k / spec.nz);
      }

  // Paths 0 -> e_a -> e_a + e_b -> 7 through the cell corners, one per axis
  // permutation; shared cell faces get the same diagonal on both sides.
  constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < spec.nz; ++k)
    for (int j = 0; j < spec.ny; ++j)
      for (int i = 0; i < spec.nx; ++i) {
        auto corner = [&](int bits) { return id(i + (bits & 1), j + ((bits >> 1) & 1), k + ((bits >> 2) & 1)); };
        for (const auto& p : kPerms) {
          int b1 = 1 << p[0];
          int b2 = b1 | (1 << p[1]);
          Tet t{corner(0), corner(b1), corner(b2), corner(7)};
          const auto& x = mesh.positions;
          if (signed_tet_volume(x[t[0]], x[t[1]], x[t[2]], x[t[3]]) < 0.0) std::swap(t[2], t[3]);
          mesh.tets.push_back(t);
        }
      }
  return mesh;
}

SlabSpec slab_for_tet_count(const SlabSpec& base, std::size_t target_tets) {
  const double base_tets = 6.0 * base.nx * base.ny * base.nz;
  const double s = std::cbrt(static_cast<double>(target_tets) / base_tets);
  SlabSpec best = base;
  double best_score = 1e300;
  auto around = [](double v) {
    int c = static_cast<int>(std::lround(v));
    return std::array<int, 5>{c - 2, c - 1, c, c + 1, c + 2};
  };
  for (int nx : around(base.nx * s))
    for (int ny : around(base.ny * s))
      for (int nz : around(base.nz * s)) {
        if (nx < 1 || ny < 1 || nz < 1) continue;
        double tets = 6.0 * nx * ny * nz;
        double count_err = std::abs(tets - static_cast<double>(target_tets)) / static_cast<double>(target_tets);
        double shape_err = std::abs(std::log(nx / (base.nx * s))) + std::abs(std::log(ny / (base.ny * s))) +
                           std::abs(std::log(nz / (base.nz * s)));
        double score = count_err + 0.05 * shape_err;
        if (score < best_score) {
          best_score = score;
          best.nx = nx;
          best.ny = ny;
          best.nz = nz;
        }
      }
  return best;
}

}  // namespace surgsim
