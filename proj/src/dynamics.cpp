#include "eoslab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace eoslab::dynamics {

double norm2(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double norm_inf_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

bool all_finite(const Vector& v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

void record_probes(Trajectory& traj, const std::vector<Probe>& probes,
                   const Vector& theta) {
  for (const auto& p : probes) traj.scalars[p.name].push_back(p.fn(theta));
}

}  // namespace

Trajectory run_gd(const GradFn& grad, Vector theta0, double eta, int steps,
                  const std::vector<Probe>& probes) {
  if (steps < 1) throw PreconditionError("run_gd: steps must be >= 1");
  Trajectory traj;
  traj.eta = eta;
  traj.points.reserve(static_cast<std::size_t>(steps) + 1);
  traj.points.push_back(theta0);
  record_probes(traj, probes, theta0);

  Vector theta = std::move(theta0);
  for (int t = 0; t < steps; ++t) {
    Vector g = grad(theta);
    if (g.size() != theta.size())
      throw PreconditionError("run_gd: gradient dimension mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= eta * g[i];
    if (!all_finite(theta)) {
      throw DivergenceError("run_gd: non-finite iterate at step " +
                                std::to_string(t + 1),
                            static_cast<std::size_t>(t), traj.points.back());
    }
    traj.points.push_back(theta);
    record_probes(traj, probes, theta);
  }
  return traj;
}

OrbitReport detect_period(const Trajectory& traj, int max_period, double tol,
                          int tail_window) {
  const std::size_t n = traj.size();
  if (n < static_cast<std::size_t>(tail_window + max_period))
    throw PreconditionError(
        "detect_period: trajectory shorter than tail_window + max_period");

  const std::size_t last = n - 1;
  for (int p = 1; p <= max_period; ++p) {
    // Check |theta_t - theta_{t+p}|_inf over the trailing window.
    double residual = 0.0;
    bool ok = true;
    for (int k = 0; k < tail_window; ++k) {
      const std::size_t t = last - static_cast<std::size_t>(p) - k;
      residual = std::max(
          residual, norm_inf_diff(traj.points[t], traj.points[t + p]));
      if (residual > tol) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    OrbitReport report;
    report.period = p;
    report.residual = residual;
    for (int k = p; k >= 1; --k)
      report.orbit_points.push_back(traj.points[last - k + 1]);
    // Earliest step from which the p-periodicity holds through the end.
    std::size_t settled = last - static_cast<std::size_t>(p);
    while (settled > 0 &&
           norm_inf_diff(traj.points[settled - 1],
                         traj.points[settled - 1 + p]) <= tol)
      --settled;
    report.settled_at = settled;
    return report;
  }

  OrbitReport none;
  none.residual = std::numeric_limits<double>::infinity();
  return none;
}

Vector hessian_vector_product(const GradFn& grad, const Vector& theta,
                              const Vector& v, double h) {
  if (h <= 0.0) throw PreconditionError("hessian_vector_product: h must be > 0");
  Vector plus = theta, minus = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    plus[i] += h * v[i];
    minus[i] -= h * v[i];
  }
  Vector gp = grad(plus), gm = grad(minus);
  Vector out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i)
    out[i] = (gp[i] - gm[i]) / (2.0 * h);
  return out;
}

double default_fd_step(const Vector& theta) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) *
         std::max(1.0, norm2(theta));
}

EigResult top_eigenvalue(const GradFn& grad, const Vector& theta, double tol,
                         int max_iters, std::uint64_t seed) {
  const std::size_t d = theta.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(d);
  for (auto& x : v) x = gauss(rng);
  double nv = norm2(v);
  for (auto& x : v) x /= nv;

  auto finalize = [](double lambda, Vector vec, int iters) {
    // Fix the sign: largest-magnitude entry positive.
    std::size_t imax = 0;
    for (std::size_t i = 1; i < vec.size(); ++i)
      if (std::abs(vec[i]) > std::abs(vec[imax])) imax = i;
    if (vec[imax] < 0.0)
      for (auto& x : vec) x = -x;
    return EigResult{lambda, std::move(vec), iters};
  };

  const double h = default_fd_step(theta);
  double lambda_prev = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    Vector hv = hessian_vector_product(grad, theta, v, h);
    const double lambda = dot(v, hv);  // Rayleigh quotient, |v| = 1
    const double nhv = norm2(hv);
    if (nhv == 0.0) {
      // Hessian annihilates v: the quotient is exact already.
      return finalize(lambda, v, it);
    }
    for (std::size_t i = 0; i < d; ++i) v[i] = hv[i] / nhv;
    if (it > 1 &&
        std::abs(lambda - lambda_prev) <= tol * std::max(1.0, std::abs(lambda)))
      return finalize(lambda, v, it);
    lambda_prev = lambda;
  }
  throw NonConvergedError("top_eigenvalue: power iteration hit max_iters",
                          lambda_prev, max_iters);
}

}  // namespace eoslab::dynamics
