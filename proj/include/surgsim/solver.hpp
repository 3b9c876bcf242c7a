#pragma once

#include "surgsim/mesh.hpp"
#include "surgsim/particles.hpp"
#include "surgsim/types.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace surgsim {

// Constraint projections below act on every lane of a ParticleState at once
// and only read positions; corrections go to a CorrectionAccumulator that is
// averaged and applied after all constraints ran (Jacobi style).

struct DistanceConstraint {
  Index a = 0;
  Index b = 0;
  double rest_length = 0.0;
  double stiffness = 1.0;
};

struct VolumeConstraint {
  std::array<Index, 4> v{};
  double rest_volume = 0.0;
  double stiffness = 1.0;
};

// A vertex tied to the centroid of a face, or to a fixed point when `face`
// is empty.
struct AttachmentConstraint {
  Index vertex = 0;
  std::optional<Face> face;
  Vec3 anchor = Vec3::Zero();
  double rest_length = 0.0;
  double stiffness = 1.0;
};

// Below these the constraint is skipped for that lane and not counted.
inline constexpr double kCoincidentLength = 1e-12;
inline constexpr double kFlatGradientNorm2 = 1e-18;

class CorrectionAccumulator {
 public:
  CorrectionAccumulator() = default;
  CorrectionAccumulator(std::size_t vertices, std::size_t lanes);

  void reset();
  // this += other, entry by entry.
  void add(const CorrectionAccumulator& other);

  std::size_t vertices() const { return vertices_; }
  std::size_t lanes() const { return lanes_; }

  Vec3 correction(std::size_t vertex, std::size_t lane = 0) const;
  double count(std::size_t vertex, std::size_t lane = 0) const { return count_[vertex * lanes_ + lane]; }

  double* dx(std::size_t vertex, int axis) { return &dx_[(3 * vertex + axis) * lanes_]; }
  double* counts(std::size_t vertex) { return &count_[vertex * lanes_]; }
  const double* dx(std::size_t vertex, int axis) const { return &dx_[(3 * vertex + axis) * lanes_]; }
  const double* counts(std::size_t vertex) const { return &count_[vertex * lanes_]; }

 private:
  std::size_t vertices_ = 0;
  std::size_t lanes_ = 0;
  std::vector<double> dx_;
  std::vector<double> count_;  // kept as double so lane loops stay in one type
};

// v += h g for free vertices (pinned keep v = 0); x_prev <- x; x += h v.
void integrate_predict(ParticleState& state, std::vector<double>& x_prev, double h, const Vec3& gravity);

void project_distance(const DistanceConstraint& c, const ParticleState& state, CorrectionAccumulator& acc);

// Analytic gradients of C = (1/6) (x_b - x_a) x (x_c - x_a) . (x_d - x_a) - V0
// with respect to a, b, c, d.
std::array<Vec3, 4> volume_gradients(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d);

// dx_i = -s k grad_i C with s = C / sum |grad_i C|^2; no mass weighting.
void project_volume(const VolumeConstraint& c, const ParticleState& state, CorrectionAccumulator& acc);

void project_attachment(const AttachmentConstraint& c, const ParticleState& state, CorrectionAccumulator& acc);

// Distance constraint between one lane's vertex and a kinematic point of
// infinite mass; the vertex takes the full correction.
void project_anchor(Index vertex, const Vec3& anchor, double rest_length, double stiffness,
                    const ParticleState& state, CorrectionAccumulator& acc, std::size_t lane);

// x += dx / n where n > 0; pinned vertices never move.
void apply_accumulated_corrections(const CorrectionAccumulator& acc, ParticleState& state);

// v = (x - x_prev) / h; pinned vertices get v = 0.
void update_velocities(ParticleState& state, std::span<const double> x_prev, double h);

}  // namespace surgsim
