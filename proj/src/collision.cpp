#include "surgsim/collision.hpp"

#include <algorithm>
#include <cmath>

namespace surgsim {

namespace {

Vec3 closest_on_segment(const Vec3& p, const Capsule& c) {
  const Vec3 d = c.p1 - c.p0;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return c.p0;
  const double t = std::clamp((p - c.p0).dot(d) / len2, 0.0, 1.0);
  return c.p0 + t * d;
}

Vec3 blend(const Vec3& a, const Vec3& b, const Vec3& c, const std::array<double, 3>& w) {
  return w[0] * a + w[1] * b + w[2] * c;
}

}  // namespace

double capsule_signed_distance(const Vec3& p, const Capsule& c) {
  return (p - closest_on_segment(p, c)).norm() - c.radius;
}

Vec3 capsule_sdf_gradient(const Vec3& p, const Capsule& c, const Vec3& fallback) {
  const Vec3 r = p - closest_on_segment(p, c);
  const double n = r.norm();
  return n > 1e-12 ? Vec3(r / n) : fallback;
}

std::array<double, 3> project_to_simplex(std::array<double, 3> b) {
  std::array<double, 3> s = b;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (int i = 0; i < 3; ++i) {
    cum += s[i];
    const double t = (cum - 1.0) / (i + 1);
    if (s[i] - t > 0.0) theta = t;
  }
  for (double& v : b) v = std::max(v - theta, 0.0);
  return b;
}

FaceQuery closest_face_point(const Vec3& a, const Vec3& b, const Vec3& c, const Capsule& capsule) {
  const Vec3 x[3] = {a, b, c};
  FaceQuery best{{1.0, 0.0, 0.0}, capsule_signed_distance(a, capsule)};
  for (int i = 1; i < 3; ++i) {
    const double s = capsule_signed_distance(x[i], capsule);
    if (s < best.sdf) {
      best.sdf = s;
      best.bary = {0.0, 0.0, 0.0};
      best.bary[i] = 1.0;
    }
  }
  const double l2 = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
  if (!(l2 > 1e-24)) return best;

  // Step size in barycentric units per metre of SDF slope: doubled after an
  // accepted move, halved on failure.
  const double max_step = 64.0 / l2;
  double step = 1.0 / l2;
  const Vec3 normal = (b - a).cross(c - a);
  const Vec3 fallback = normal.norm() > 0.0 ? Vec3(normal.normalized()) : Vec3::UnitY();
  for (int it = 0; it < kFaceSearchIterations; ++it) {
    const Vec3 p = blend(a, b, c, best.bary);
    const Vec3 g = capsule_sdf_gradient(p, capsule, fallback);
    std::array<double, 3> grad{g.dot(a), g.dot(b), g.dot(c)};
    const double mean = (grad[0] + grad[1] + grad[2]) / 3.0;
    for (double& v : grad) v -= mean;  // tangent to the simplex
    bool moved = false;
    while (step * l2 > 1e-6) {
      std::array<double, 3> trial{best.bary[0] - step * grad[0], best.bary[1] - step * grad[1],
                                  best.bary[2] - step * grad[2]};
      trial = project_to_simplex(trial);
      const double s = capsule_signed_distance(blend(a, b, c, trial), capsule);
      if (s < best.sdf) {
        best = {trial, s};
        moved = true;
        step = std::min(2.0 * step, max_step);
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return best;
}

std::vector<Contact> detect_face_contacts(std::span<const Face> faces, std::span<const Vec3> positions,
                                          const ToolModel& tool) {
  std::vector<Contact> contacts;
  const Capsule* caps[3] = {&tool.shaft, &tool.clamp_a, &tool.clamp_b};
  Vec3 lo[3], hi[3];
  for (int k = 0; k < 3; ++k) {
    const Vec3 r = Vec3::Constant(caps[k]->radius);
    lo[k] = caps[k]->p0.cwiseMin(caps[k]->p1) - r;
    hi[k] = caps[k]->p0.cwiseMax(caps[k]->p1) + r;
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Vec3& a = positions[faces[f][0]];
    const Vec3& b = positions[faces[f][1]];
    const Vec3& c = positions[faces[f][2]];
    const Vec3 flo = a.cwiseMin(b).cwiseMin(c);
    const Vec3 fhi = a.cwiseMax(b).cwiseMax(c);
    for (int k = 0; k < 3; ++k) {
      if ((fhi - lo[k]).minCoeff() < 0.0 || (hi[k] - flo).minCoeff() < 0.0) continue;
      const FaceQuery q = closest_face_point(a, b, c, *caps[k]);
      if (!(q.sdf < 0.0)) continue;
      const Vec3 normal = (b - a).cross(c - a);
      const Vec3 fallback = normal.norm() > 0.0 ? Vec3(normal.normalized()) : Vec3::UnitY();
      Contact ct;
      ct.face = f;
      ct.capsule = k;
      ct.depth = -q.sdf;
      ct.bary = q.bary;
      ct.direction = capsule_sdf_gradient(blend(a, b, c, q.bary), *caps[k], fallback);
      contacts.push_back(ct);
    }
  }
  return contacts;
}

void resolve_contacts(std::span<const Contact> contacts, std::span<const Face> faces, std::span<Vec3> positions,
                      std::span<const double> inverse_mass, double k_contact) {
  for (const Contact& ct : contacts) {
    const Face& f = faces[ct.face];
    double denom = 0.0;
    for (int i = 0; i < 3; ++i) denom += inverse_mass[f[i]] * ct.bary[i] * ct.bary[i];
    if (!(denom > 0.0) || ct.depth == 0.0) continue;
    const Vec3 push = (k_contact * ct.depth / denom) * ct.direction;
    for (int i = 0; i < 3; ++i) {
      const double wi = inverse_mass[f[i]];
      if (wi == 0.0) continue;
      positions[f[i]] += (wi * ct.bary[i]) * push;
    }
  }
}

}  // namespace surgsim
