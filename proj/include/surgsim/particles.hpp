#pragma once

#include "surgsim/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace surgsim {

// Positions and velocities of `lanes` independent copies of one vertex set,
// stored component-major with the lane index fastest:
//   x[(3 * vertex + axis) * lanes + lane]
// so every per-constraint loop over lanes reads contiguous memory.
// Inverse masses are shared by all lanes (same mesh, same pins).
class ParticleState {
 public:
  ParticleState() = default;
  ParticleState(std::size_t vertices, std::size_t lanes);

  // Single-lane state from explicit per-vertex data.
  static ParticleState from_positions(std::span<const Vec3> x, std::span<const double> inverse_mass);

  std::size_t vertices() const { return vertices_; }
  std::size_t lanes() const { return lanes_; }

  std::size_t slot(std::size_t vertex, int axis, std::size_t lane) const {
    return (3 * vertex + static_cast<std::size_t>(axis)) * lanes_ + lane;
  }

  Vec3 position(std::size_t vertex, std::size_t lane = 0) const;
  void set_position(std::size_t vertex, std::size_t lane, const Vec3& p);
  Vec3 velocity(std::size_t vertex, std::size_t lane = 0) const;
  void set_velocity(std::size_t vertex, std::size_t lane, const Vec3& v);

  bool grasped(std::size_t vertex, std::size_t lane) const { return grasped_[vertex * lanes_ + lane] != 0; }
  void set_grasped(std::size_t vertex, std::size_t lane, bool on) { grasped_[vertex * lanes_ + lane] = on ? 1 : 0; }

  // Copies one lane's positions out / in.
  void gather_positions(std::size_t lane, std::vector<Vec3>& out) const;
  void scatter_positions(std::size_t lane, std::span<const Vec3> in);

  double kinetic_energy(std::size_t lane, std::span<const double> vertex_mass) const;
  bool lane_finite(std::size_t lane) const;

  std::vector<double>& x() { return x_; }
  const std::vector<double>& x() const { return x_; }
  std::vector<double>& v() { return v_; }
  const std::vector<double>& v() const { return v_; }
  std::vector<double>& inverse_mass() { return w_; }
  const std::vector<double>& inverse_mass() const { return w_; }

 private:
  std::size_t vertices_ = 0;
  std::size_t lanes_ = 0;
  std::vector<double> x_;
  std::vector<double> v_;
  std::vector<double> w_;
  std::vector<std::uint8_t> grasped_;
};

}  // namespace surgsim
