#pragma once

// The 2-D scalar factorization f(x,y) = 1/2 (xy - mu)^2: GD dynamics, the
// balancing-decay gap series over the region xy > mu, the sufficient
// positivity condition for iterates, and the exact 2x2 Hessian.

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "eoslab/dynamics.hpp"

namespace eoslab::factor2d {

struct Factor2DConfig {
  double mu = 1.0;   // target product, > 0
  double K = 1.05;   // eta = K / mu
  double x0 = 1.0;
  double y0 = 1.0;
  int steps = 1;
};

/// Simultaneous update x -= eta (xy - mu) y, y -= eta (xy - mu) x.
/// Trajectory points are (x, y); scalars "loss" and "xy".
dynamics::Trajectory gd_2d(const Factor2DConfig& cfg);

/// (step, |x - y|) restricted to steps with x_t y_t > mu.
std::vector<std::pair<std::size_t, double>> balance_gap_series(
    const dynamics::Trajectory& traj, double mu);

struct PositivityReport {
  bool holds = false;
  double p = 0.0;
  double lhs = 0.0;
};

/// Sufficient condition for all iterates to stay positive. Requires
/// x0 y0 > mu and x0, y0 > 0. Sufficient only: when it fails, iterates may
/// still stay positive empirically.
PositivityReport positivity_condition(double x0, double y0, double mu,
                                      double K);

struct Hessian2D {
  std::array<double, 4> matrix{};  // row-major [ [y^2, 2xy-mu], [2xy-mu, x^2] ]
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

/// Exact entries and closed-form eigenvalues; at xy = mu this gives
/// lambda1 = x^2 + y^2 and lambda2 = 0.
Hessian2D hessian_2d(double x, double y, double mu);

}  // namespace eoslab::factor2d
