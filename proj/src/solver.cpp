#include "surgsim/solver.hpp"

#include <algorithm>
#include <cmath>

namespace surgsim {

CorrectionAccumulator::CorrectionAccumulator(std::size_t vertices, std::size_t lanes)
    : vertices_(vertices), lanes_(lanes), dx_(3 * vertices * lanes, 0.0), count_(vertices * lanes, 0.0) {}

void CorrectionAccumulator::reset() {
  std::fill(dx_.begin(), dx_.end(), 0.0);
  std::fill(count_.begin(), count_.end(), 0.0);
}

void CorrectionAccumulator::add(const CorrectionAccumulator& other) {
  const std::size_t n = dx_.size();
  const double* src = other.dx_.data();
  double* dst = dx_.data();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
  const std::size_t m = count_.size();
  const double* csrc = other.count_.data();
  double* cdst = count_.data();
#pragma omp simd
  for (std::size_t i = 0; i < m; ++i) cdst[i] += csrc[i];
}

Vec3 CorrectionAccumulator::correction(std::size_t vertex, std::size_t lane) const {
  return {dx_[(3 * vertex) * lanes_ + lane], dx_[(3 * vertex + 1) * lanes_ + lane],
          dx_[(3 * vertex + 2) * lanes_ + lane]};
}

void integrate_predict(ParticleState& state, std::vector<double>& x_prev, double h, const Vec3& gravity) {
  const std::size_t N = state.lanes();
  auto& x = state.x();
  auto& v = state.v();
  const auto& w = state.inverse_mass();
  x_prev = x;
  for (std::size_t i = 0; i < state.vertices(); ++i) {
    const bool free = w[i] > 0.0;
    for (int k = 0; k < 3; ++k) {
      double* xs = &x[state.slot(i, k, 0)];
      double* vs = &v[state.slot(i, k, 0)];
      if (!free) {
        std::fill(vs, vs + N, 0.0);
        continue;
      }
      const double dv = h * gravity[k];
#pragma omp simd
      for (std::size_t e = 0; e < N; ++e) {
        vs[e] += dv;
        xs[e] += h * vs[e];
      }
    }
  }
}

void project_distance(const DistanceConstraint& c, const ParticleState& state, CorrectionAccumulator& acc) {
  const auto& w = state.inverse_mass();
  const double wsum = w[c.a] + w[c.b];
  if (wsum == 0.0) return;
  const double ka = c.stiffness * w[c.a] / wsum;
  const double kb = c.stiffness * w[c.b] / wsum;
  const double rest = c.rest_length;
  const std::size_t N = state.lanes();

  const double* xa = &state.x()[state.slot(c.a, 0, 0)];
  const double* xb = &state.x()[state.slot(c.b, 0, 0)];
  double* da0 = acc.dx(c.a, 0);
  double* da1 = acc.dx(c.a, 1);
  double* da2 = acc.dx(c.a, 2);
  double* db0 = acc.dx(c.b, 0);
  double* db1 = acc.dx(c.b, 1);
  double* db2 = acc.dx(c.b, 2);
  double* na = acc.counts(c.a);
  double* nb = acc.counts(c.b);

#pragma omp simd
  for (std::size_t e = 0; e < N; ++e) {
    const double d0 = xa[e] - xb[e];
    const double d1 = xa[N + e] - xb[N + e];
    const double d2 = xa[2 * N + e] - xb[2 * N + e];
    const double len = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
    const bool ok = len >= kCoincidentLength;
    // (|x_ab| - d) / |x_ab|, the unit direction folded in.
    const double q = (len - rest) / (ok ? len : 1.0);
    const double f = ok ? q : 0.0;
    da0[e] -= ka * f * d0;
    da1[e] -= ka * f * d1;
    da2[e] -= ka * f * d2;
    db0[e] += kb * f * d0;
    db1[e] += kb * f * d1;
    db2[e] += kb * f * d2;
    const double inc = ok ? 1.0 : 0.0;
    na[e] += inc;
    nb[e] += inc;
  }
}

std::array<Vec3, 4> volume_gradients(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 e1 = b - a, e2 = c - a, e3 = d - a;
  std::array<Vec3, 4> g;
  g[1] = e2.cross(e3) / 6.0;
  g[2] = e3.cross(e1) / 6.0;
  g[3] = e1.cross(e2) / 6.0;
  g[0] = -(g[1] + g[2] + g[3]);
  return g;
}

void project_volume(const VolumeConstraint& c, const ParticleState& state, CorrectionAccumulator& acc) {
  if (c.stiffness == 0.0) return;
  const std::size_t N = state.lanes();
  const double* pa = &state.x()[state.slot(c.v[0], 0, 0)];
  const double* pb = &state.x()[state.slot(c.v[1], 0, 0)];
  const double* pc = &state.x()[state.slot(c.v[2], 0, 0)];
  const double* pd = &state.x()[state.slot(c.v[3], 0, 0)];
  double* d[4][3];
  double* n[4];
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 3; ++k) d[i][k] = acc.dx(c.v[i], k);
    n[i] = acc.counts(c.v[i]);
  }
  const double k = c.stiffness;
  const double v0 = c.rest_volume;
  constexpr double sixth = 1.0 / 6.0;

#pragma omp simd
  for (std::size_t e = 0; e < N; ++e) {
    const double ax = pa[e], ay = pa[N + e], az = pa[2 * N + e];
    const double e1x = pb[e] - ax, e1y = pb[N + e] - ay, e1z = pb[2 * N + e] - az;
    const double e2x = pc[e] - ax, e2y = pc[N + e] - ay, e2z = pc[2 * N + e] - az;
    const double e3x = pd[e] - ax, e3y = pd[N + e] - ay, e3z = pd[2 * N + e] - az;
    // grad_b = e2 x e3 / 6, grad_c = e3 x e1 / 6, grad_d = e1 x e2 / 6
    const double gbx = sixth * (e2y * e3z - e2z * e3y);
    const double gby = sixth * (e2z * e3x - e2x * e3z);
    const double gbz = sixth * (e2x * e3y - e2y * e3x);
    const double gcx = sixth * (e3y * e1z - e3z * e1y);
    const double gcy = sixth * (e3z * e1x - e3x * e1z);
    const double gcz = sixth * (e3x * e1y - e3y * e1x);
    const double gdx = sixth * (e1y * e2z - e1z * e2y);
    const double gdy = sixth * (e1z * e2x - e1x * e2z);
    const double gdz = sixth * (e1x * e2y - e1y * e2x);
    const double gax = -(gbx + gcx + gdx);
    const double gay = -(gby + gcy + gdy);
    const double gaz = -(gbz + gcz + gdz);
    const double vol = e1x * gbx + e1y * gby + e1z * gbz;
    const double C = vol - v0;
    const double norm2 = gax * gax + gay * gay + gaz * gaz + gbx * gbx + gby * gby + gbz * gbz + gcx * gcx +
                         gcy * gcy + gcz * gcz + gdx * gdx + gdy * gdy + gdz * gdz;
    const bool ok = norm2 >= kFlatGradientNorm2;
    const double q = -(C / (ok ? norm2 : 1.0)) * k;
    const double sk = ok ? q : 0.0;
    d[0][0][e] += sk * gax;
    d[0][1][e] += sk * gay;
    d[0][2][e] += sk * gaz;
    d[1][0][e] += sk * gbx;
    d[1][1][e] += sk * gby;
    d[1][2][e] += sk * gbz;
    d[2][0][e] += sk * gcx;
    d[2][1][e] += sk * gcy;
    d[2][2][e] += sk * gcz;
    d[3][0][e] += sk * gdx;
    d[3][1][e] += sk * gdy;
    d[3][2][e] += sk * gdz;
    const double inc = ok ? 1.0 : 0.0;
    n[0][e] += inc;
    n[1][e] += inc;
    n[2][e] += inc;
    n[3][e] += inc;
  }
}

void project_attachment(const AttachmentConstraint& c, const ParticleState& state, CorrectionAccumulator& acc) {
  const std::size_t N = state.lanes();
  const auto& w = state.inverse_mass();
  const double wv = w[c.vertex];
  const double* pv = &state.x()[state.slot(c.vertex, 0, 0)];
  double* dv[3] = {acc.dx(c.vertex, 0), acc.dx(c.vertex, 1), acc.dx(c.vertex, 2)};
  double* nv = acc.counts(c.vertex);
  const double k = c.stiffness;
  const double rest = c.rest_length;

  if (!c.face) {
    if (wv == 0.0) return;
    const double ax = c.anchor.x(), ay = c.anchor.y(), az = c.anchor.z();
#pragma omp simd
    for (std::size_t e = 0; e < N; ++e) {
      const double d0 = pv[e] - ax, d1 = pv[N + e] - ay, d2 = pv[2 * N + e] - az;
      const double len = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
      const bool ok = len >= kCoincidentLength;
      const double q = k * (len - rest) / (ok ? len : 1.0);
      const double f = ok ? q : 0.0;
      dv[0][e] -= f * d0;
      dv[1][e] -= f * d1;
      dv[2][e] -= f * d2;
      nv[e] += ok ? 1.0 : 0.0;
    }
    return;
  }

  const Face& face = *c.face;
  // The centroid acts as one particle carrying the mean face inverse mass;
  // its share is split evenly over the three face vertices.
  const double wc = (w[face[0]] + w[face[1]] + w[face[2]]) / 3.0;
  const double wsum = wv + wc;
  if (wsum == 0.0) return;
  const double kv = k * wv / wsum;
  const double kc = k * wc / wsum / 3.0;
  const double* pf[3];
  double* df[3][3];
  double* nf[3];
  for (int i = 0; i < 3; ++i) {
    pf[i] = &state.x()[state.slot(face[i], 0, 0)];
    for (int a = 0; a < 3; ++a) df[i][a] = acc.dx(face[i], a);
    nf[i] = acc.counts(face[i]);
  }
  constexpr double third = 1.0 / 3.0;
#pragma omp simd
  for (std::size_t e = 0; e < N; ++e) {
    const double cx = (pf[0][e] + pf[1][e] + pf[2][e]) * third;
    const double cy = (pf[0][N + e] + pf[1][N + e] + pf[2][N + e]) * third;
    const double cz = (pf[0][2 * N + e] + pf[1][2 * N + e] + pf[2][2 * N + e]) * third;
    const double d0 = pv[e] - cx, d1 = pv[N + e] - cy, d2 = pv[2 * N + e] - cz;
    const double len = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
    const bool ok = len >= kCoincidentLength;
    const double q = (len - rest) / (ok ? len : 1.0);
    const double f = ok ? q : 0.0;
    dv[0][e] -= kv * f * d0;
    dv[1][e] -= kv * f * d1;
    dv[2][e] -= kv * f * d2;
    for (int i = 0; i < 3; ++i) {
      df[i][0][e] += kc * f * d0;
      df[i][1][e] += kc * f * d1;
      df[i][2][e] += kc * f * d2;
    }
    const double inc = ok ? 1.0 : 0.0;
    nv[e] += inc;
    nf[0][e] += inc;
    nf[1][e] += inc;
    nf[2][e] += inc;
  }
}

void project_anchor(Index vertex, const Vec3& anchor, double rest_length, double stiffness,
                    const ParticleState& state, CorrectionAccumulator& acc, std::size_t lane) {
  if (state.inverse_mass()[vertex] == 0.0) return;
  const Vec3 d = state.position(vertex, lane) - anchor;
  const double len = d.norm();
  if (len < kCoincidentLength) return;
  const Vec3 corr = -stiffness * (len - rest_length) / len * d;
  for (int k = 0; k < 3; ++k) acc.dx(vertex, k)[lane] += corr[k];
  acc.counts(vertex)[lane] += 1.0;
}

void apply_accumulated_corrections(const CorrectionAccumulator& acc, ParticleState& state) {
  const std::size_t N = state.lanes();
  const auto& w = state.inverse_mass();
  auto& x = state.x();
  for (std::size_t i = 0; i < state.vertices(); ++i) {
    if (w[i] == 0.0) continue;
    const double* n = acc.counts(i);
    for (int k = 0; k < 3; ++k) {
      double* xs = &x[state.slot(i, k, 0)];
      const double* dx = acc.dx(i, k);
#pragma omp simd
      for (std::size_t e = 0; e < N; ++e) {
        const bool hit = n[e] > 0.0;
        const double moved = xs[e] + dx[e] / (hit ? n[e] : 1.0);
        xs[e] = hit ? moved : xs[e];
      }
    }
  }
}

void update_velocities(ParticleState& state, std::span<const double> x_prev, double h) {
  const std::size_t N = state.lanes();
  const auto& w = state.inverse_mass();
  const auto& x = state.x();
  auto& v = state.v();
  for (std::size_t i = 0; i < state.vertices(); ++i) {
    const std::size_t base = state.slot(i, 0, 0);
    if (w[i] == 0.0) {
      std::fill(v.begin() + base, v.begin() + base + 3 * N, 0.0);
      continue;
    }
#pragma omp simd
    for (std::size_t j = base; j < base + 3 * N; ++j) v[j] = (x[j] - x_prev[j]) / h;
  }
}

}  // namespace surgsim
