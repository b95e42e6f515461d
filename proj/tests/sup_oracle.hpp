#pragma once

// Test-side brute-force maximizer for
//   sup { (1/n) sum <v_i, u_i> : (1/n) sum |u_i|^2 <= r^2 }
// kept independent of the library's sup implementation. Projected gradient in
// flattened value space from random starts, plus an exhaustive boundary grid
// in spherical coordinates when the flattened dimension is small.

#include <cmath>
#include <random>
#include <vector>

#include "riskwild/common.hpp"

namespace sup_oracle {

inline double value_space_pga(const std::vector<riskwild::Vec>& v, double r, int restarts,
                              std::uint64_t seed) {
  const int n = static_cast<int>(v.size());
  const int d = static_cast<int>(v.front().size());
  const int dim = n * d;
  riskwild::Vec flat_v(dim);
  for (int i = 0; i < n; ++i) flat_v.segment(i * d, d) = v[i];
  const double ball = r * std::sqrt(static_cast<double>(n));  // |u|_2 bound

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double best = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < restarts; ++restart) {
    riskwild::Vec u(dim);
    if (restart == 0) {
      u.setZero();
    } else {
      for (int j = 0; j < dim; ++j) u(j) = normal(rng);
      if (u.norm() > 0) u *= ball / u.norm();
    }
    const double vnorm = flat_v.norm();
    if (vnorm == 0.0) return 0.0;
    const double step = 8.0 * ball / vnorm;
    for (int it = 0; it < 300; ++it) {
      u += step * flat_v;
      const double un = u.norm();
      if (un > ball) u *= ball / un;
    }
    best = std::max(best, flat_v.dot(u) / n);
  }
  return best;
}

// Recursive spherical-coordinate sweep of the boundary sphere.
inline void sphere_grid_walk(const riskwild::Vec& flat_v, riskwild::Vec& point, int axis,
                             double remaining, int divisions, double scale, double* best) {
  const int dim = static_cast<int>(point.size());
  if (axis == dim - 1) {
    point(axis) = remaining;
    *best = std::max(*best, scale * flat_v.dot(point));
    if (remaining != 0.0) {
      point(axis) = -remaining;
      *best = std::max(*best, scale * flat_v.dot(point));
    }
    return;
  }
  for (int k = 0; k <= divisions; ++k) {
    const double angle = M_PI * k / divisions;  // polar angle in [0, pi]
    point(axis) = remaining * std::cos(angle);
    sphere_grid_walk(flat_v, point, axis + 1, remaining * std::sin(angle), divisions, scale,
                     best);
  }
}

inline double boundary_grid(const std::vector<riskwild::Vec>& v, double r) {
  const int n = static_cast<int>(v.size());
  const int d = static_cast<int>(v.front().size());
  const int dim = n * d;
  riskwild::Vec flat_v(dim);
  for (int i = 0; i < n; ++i) flat_v.segment(i * d, d) = v[i];
  const double ball = r * std::sqrt(static_cast<double>(n));
  const int divisions = dim <= 2 ? 20000 : dim == 3 ? 1200 : dim == 4 ? 120 : dim == 5 ? 40 : 20;
  riskwild::Vec point(dim);
  double best = -std::numeric_limits<double>::infinity();
  sphere_grid_walk(flat_v, point, 0, ball, divisions, 1.0 / n, &best);
  return best;
}

inline double brute_force(const std::vector<riskwild::Vec>& v, double r, std::uint64_t seed) {
  double best = value_space_pga(v, r, 10, seed);
  const int dim = static_cast<int>(v.size()) * static_cast<int>(v.front().size());
  if (dim <= 6) best = std::max(best, boundary_grid(v, r));
  return best;
}

}  // namespace sup_oracle
