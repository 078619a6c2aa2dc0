#pragma once

// Fixed-step gradient descent over real vectors, trajectory recording,
// numerical period detection and sharpness probing via Hessian-vector
// products. Everything here is deterministic given its inputs.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eoslab/errors.hpp"

namespace eoslab::dynamics {

using Vector = std::vector<double>;
using GradFn = std::function<Vector(const Vector&)>;

/// Read-only per-step metric attached to a GD run.
struct Probe {
  std::string name;
  std::function<double(const Vector&)> fn;
};

struct Trajectory {
  std::vector<Vector> points;                     // length steps+1
  std::map<std::string, std::vector<double>> scalars;  // same length each
  double eta = 0.0;
  std::optional<std::uint64_t> seed;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] const Vector& back() const { return points.back(); }
};

struct OrbitReport {
  std::optional<int> period;   // 1 = fixed point; nullopt = none found
  std::vector<Vector> orbit_points;
  double residual = 0.0;       // sup over tail of |theta_t - theta_{t+p}|_inf
  std::optional<std::size_t> settled_at;
};

struct EigResult {
  double lambda = 0.0;
  Vector vector;
  int iters = 0;
};

/// theta_{t+1} = theta_t - eta * grad(theta_t). Probes are evaluated at every
/// recorded point (including the initialization) and never see a mutable
/// state, so a probed run is bit-identical to an unprobed one.
/// Throws DivergenceError on a non-finite iterate.
Trajectory run_gd(const GradFn& grad, Vector theta0, double eta, int steps,
                  const std::vector<Probe>& probes = {});

/// Smallest p <= max_period such that the infinity-norm gap between theta_t
/// and theta_{t+p} stays within tol over the trailing tail_window steps.
OrbitReport detect_period(const Trajectory& traj, int max_period, double tol,
                          int tail_window);

/// Central-difference Hessian-vector product: (grad(x+hv) - grad(x-hv))/(2h).
Vector hessian_vector_product(const GradFn& grad, const Vector& theta,
                              const Vector& v, double h);

/// cbrt(machine eps) * max(1, |theta|): balances truncation vs rounding for
/// the central difference above.
double default_fd_step(const Vector& theta);

/// Power iteration on Hessian-vector products from a seeded random start.
/// Returns the Rayleigh quotient; the eigenvector sign is fixed by making its
/// largest-magnitude entry positive. Throws NonConvergedError past max_iters.
EigResult top_eigenvalue(const GradFn& grad, const Vector& theta, double tol,
                         int max_iters, std::uint64_t seed);

double norm2(const Vector& v);
double norm_inf_diff(const Vector& a, const Vector& b);
double dot(const Vector& a, const Vector& b);

}  // namespace eoslab::dynamics
