#pragma once

#include "surgsim/mesh.hpp"
#include "surgsim/tool.hpp"
#include "surgsim/types.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace surgsim {

struct Contact {
  std::size_t face = 0;
  int capsule = 0;  // 0 shaft, 1 clamp_a, 2 clamp_b
  double depth = 0.0;
  Vec3 direction = Vec3::UnitY();  // out of the capsule
  std::array<double, 3> bary{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
};

// ||p - closest point on [p0, p1]|| - radius; negative inside.
double capsule_signed_distance(const Vec3& p, const Capsule& c);

// Unit outward gradient of the capsule SDF at p. On the segment itself the
// gradient is undefined and `fallback` is returned instead.
Vec3 capsule_sdf_gradient(const Vec3& p, const Capsule& c, const Vec3& fallback);

struct FaceQuery {
  std::array<double, 3> bary;
  double sdf;
};

inline constexpr int kFaceSearchIterations = 8;

// Minimises the capsule SDF over a triangle by projected gradient descent on
// barycentric coordinates, warm-started at the best corner. Never returns a
// worse point than that corner.
FaceQuery closest_face_point(const Vec3& a, const Vec3& b, const Vec3& c, const Capsule& capsule);

// Euclidean projection onto {b : b_i >= 0, sum b_i = 1}.
std::array<double, 3> project_to_simplex(std::array<double, 3> b);

std::vector<Contact> detect_face_contacts(std::span<const Face> faces, std::span<const Vec3> positions,
                                          const ToolModel& tool);

// Pushes each contact's face out along its direction so the witness point moves
// by k_contact * depth; vertices share the push by barycentric weight and
// inverse mass. Pinned vertices do not move.
void resolve_contacts(std::span<const Contact> contacts, std::span<const Face> faces, std::span<Vec3> positions,
                      std::span<const double> inverse_mass, double k_contact);

}  // namespace surgsim
