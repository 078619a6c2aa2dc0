#include "eoslab/factor2d.hpp"

#include <cmath>
#include <string>

namespace eoslab::factor2d {

dynamics::Trajectory gd_2d(const Factor2DConfig& cfg) {
  if (cfg.mu <= 0.0) throw PreconditionError("gd_2d: mu must be positive");
  if (cfg.K <= 0.0) throw PreconditionError("gd_2d: K must be positive");
  if (cfg.steps < 1) throw PreconditionError("gd_2d: steps must be >= 1");

  const double eta = cfg.K / cfg.mu;
  const double bound =
      1e6 * std::max({1.0, std::abs(cfg.x0), std::abs(cfg.y0)});

  dynamics::Trajectory traj;
  traj.eta = eta;
  auto& loss = traj.scalars["loss"];
  auto& prod = traj.scalars["xy"];

  double x = cfg.x0, y = cfg.y0;
  auto record = [&] {
    traj.points.push_back({x, y});
    const double r = x * y - cfg.mu;
    loss.push_back(0.5 * r * r);
    prod.push_back(x * y);
  };
  record();

  for (int t = 0; t < cfg.steps; ++t) {
    const double r = x * y - cfg.mu;
    const double xn = x - eta * r * y;
    const double yn = y - eta * r * x;
    x = xn;
    y = yn;
    if (!std::isfinite(x) || !std::isfinite(y) ||
        std::max(std::abs(x), std::abs(y)) > bound) {
      throw DivergenceError("gd_2d: diverged at step " + std::to_string(t + 1),
                            static_cast<std::size_t>(t), traj.points.back());
    }
    record();
  }
  return traj;
}

std::vector<std::pair<std::size_t, double>> balance_gap_series(
    const dynamics::Trajectory& traj, double mu) {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const double x = traj.points[t][0], y = traj.points[t][1];
    if (x * y > mu) out.emplace_back(t, std::abs(x - y));
  }
  return out;
}

PositivityReport positivity_condition(double x0, double y0, double mu,
                                      double K) {
  if (x0 <= 0.0 || y0 <= 0.0)
    throw PreconditionError("positivity_condition: x0, y0 must be positive");
  if (x0 * y0 <= mu)
    throw PreconditionError("positivity_condition: requires x0*y0 > mu");

  const double eta = K / mu;
  const double m = std::abs(y0 - x0) / std::sqrt(mu);
  const double root = m + std::sqrt(m * m + 4.0);
  const double p = 4.0 / (root * root);
  const double q = (1.0 + p) * (1.0 + p);

  const double a = eta * (x0 * y0 - mu);
  const double b = (4.0 / 27.0) * std::pow(1.0 + K, 3) +
                   ((2.0 / 3.0) * K * K - K / 3.0 +
                    q * K * K * m * m / (2.0 * (K + 1.0))) *
                       q * m * m -
                   K;

  PositivityReport rep;
  rep.p = p;
  rep.lhs = std::max(a, b);
  rep.holds = rep.lhs < p;
  return rep;
}

Hessian2D hessian_2d(double x, double y, double mu) {
  Hessian2D h;
  const double off = 2.0 * x * y - mu;
  h.matrix = {y * y, off, off, x * x};
  const double half_tr = 0.5 * (x * x + y * y);
  const double rad =
      std::sqrt(0.25 * (y * y - x * x) * (y * y - x * x) + off * off);
  h.lambda1 = half_tr + rad;
  h.lambda2 = half_tr - rad;
  return h;
}

}  // namespace eoslab::factor2d
