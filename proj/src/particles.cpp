#include "surgsim/particles.hpp"

#include <cmath>
#include <stdexcept>

namespace surgsim {

ParticleState::ParticleState(std::size_t vertices, std::size_t lanes)
    : vertices_(vertices),
      lanes_(lanes),
      x_(3 * vertices * lanes, 0.0),
      v_(3 * vertices * lanes, 0.0),
      w_(vertices, 1.0),
      grasped_(vertices * lanes, 0) {}

ParticleState ParticleState::from_positions(std::span<const Vec3> x, std::span<const double> inverse_mass) {
  if (x.size() != inverse_mass.size()) throw std::invalid_argument("positions and inverse masses differ in length");
  ParticleState s(x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.set_position(i, 0, x[i]);
    s.w_[i] = inverse_mass[i];
  }
  return s;
}

Vec3 ParticleState::position(std::size_t vertex, std::size_t lane) const {
  return {x_[slot(vertex, 0, lane)], x_[slot(vertex, 1, lane)], x_[slot(vertex, 2, lane)]};
}

void ParticleState::set_position(std::size_t vertex, std::size_t lane, const Vec3& p) {
  for (int k = 0; k < 3; ++k) x_[slot(vertex, k, lane)] = p[k];
}

Vec3 ParticleState::velocity(std::size_t vertex, std::size_t lane) const {
  return {v_[slot(vertex, 0, lane)], v_[slot(vertex, 1, lane)], v_[slot(vertex, 2, lane)]};
}

void ParticleState::set_velocity(std::size_t vertex, std::size_t lane, const Vec3& v) {
  for (int k = 0; k < 3; ++k) v_[slot(vertex, k, lane)] = v[k];
}

void ParticleState::gather_positions(std::size_t lane, std::vector<Vec3>& out) const {
  out.resize(vertices_);
  for (std::size_t i = 0; i < vertices_; ++i) out[i] = position(i, lane);
}

void ParticleState::scatter_positions(std::size_t lane, std::span<const Vec3> in) {
  for (std::size_t i = 0; i < vertices_; ++i) {
    if (w_[i] == 0.0) continue;
    set_position(i, lane, in[i]);
  }
}

double ParticleState::kinetic_energy(std::size_t lane, std::span<const double> vertex_mass) const {
  double ke = 0.0;
  for (std::size_t i = 0; i < vertices_; ++i) ke += 0.5 * vertex_mass[i] * velocity(i, lane).squaredNorm();
  return ke;
}

bool ParticleState::lane_finite(std::size_t lane) const {
  for (std::size_t i = 0; i < 3 * vertices_; ++i) {
    if (!std::isfinite(x_[i * lanes_ + lane]) || !std::isfinite(v_[i * lanes_ + lane])) return false;
  }
  return true;
}

}  // namespace surgsim
