#include "eoslab/neuron.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace eoslab::neuron {

namespace {

constexpr double kPi = std::numbers::pi;

struct Deltas {
  double dv, dwx, dwy;
};

Deltas population_deltas(const NeuronState& s, double K) {
  if (s.v <= 0.0)
    throw PreconditionError("population_step: requires v > 0");
  if (s.w_x < 0.0 || s.w_y < 0.0)
    throw PreconditionError("population_step: requires w_x, w_y >= 0");
  const double nw2 = s.w_x * s.w_x + s.w_y * s.w_y;
  if (nw2 == 0.0)
    throw PreconditionError("population_step: |w| must be positive");

  const double alpha = std::atan2(s.w_y, s.w_x);  // pi/2 exactly at w_x = 0
  const double t = (1.0 - s.v * s.w_x) -
                   (alpha - s.w_x * s.w_y / nw2) / kPi;
  const double b = K * (-s.v * s.v + s.v * s.w_y / (kPi * nw2));
  return {K * s.w_x * t + (s.w_y * s.w_y / s.v) * b, K * s.v * t,
          s.w_y * b};
}

}  // namespace

double NeuronState::w_norm() const { return std::hypot(w_x, w_y); }
double NeuronState::angle() const { return std::atan2(w_y, w_x); }

NeuronState population_step(const NeuronState& s, double K) {
  const Deltas d = population_deltas(s, K);
  NeuronState next;
  next.v = s.v + d.dv;
  next.w_x = s.w_x + d.dwx;
  next.w_y = std::abs(s.w_y + d.dwy);
  if (!std::isfinite(next.v) || !std::isfinite(next.w_x) ||
      !std::isfinite(next.w_y))
    throw DivergenceError("population_step: non-finite state", 0,
                          {s.v, s.w_x, s.w_y});
  return next;
}

double population_loss(const NeuronState& s, int d) {
  const double nw2 = s.w_x * s.w_x + s.w_y * s.w_y;
  const double alpha = std::atan2(s.w_y, s.w_x);
  return (s.v * s.v * nw2 + 1.0 -
          (2.0 * s.v / kPi) * (s.w_y + (kPi - alpha) * s.w_x)) /
         (2.0 * d);
}

int t1_bound(double eps) {
  const double beta = (1.0 + 1.1 / kPi) * eps;
  return static_cast<int>(
      std::ceil(std::log(1.35 / (kPi * beta * beta)) / std::log(2.56)));
}

NeuronRun simulate_neuron(const NeuronConfig& cfg, int steps) {
  if (cfg.d < 2) throw PreconditionError("simulate_neuron: d must be >= 2");
  if (steps < 1) throw PreconditionError("simulate_neuron: steps must be >= 1");
  if (cfg.init_angle < 0.0 || cfg.init_angle > kPi / 2.0 + 1e-12)
    throw PreconditionError("simulate_neuron: init_angle must be in [0, pi/2]");
  if (cfg.theorem_mode) {
    if (cfg.K <= 1.0 || cfg.K > 1.1)
      throw PreconditionError("simulate_neuron: theorem mode needs K in (1, 1.1]");
    if (cfg.eps <= 0.0 || cfg.eps > 0.10)
      throw PreconditionError(
          "simulate_neuron: theorem mode needs eps in (0, 0.10]");
  }

  NeuronRun run;
  run.t1_bound = t1_bound(cfg.eps);
  run.traj.eta = cfg.K * cfg.d;

  NeuronState s;
  s.v = cfg.eps;
  s.w_x = cfg.eps * std::cos(cfg.init_angle);
  s.w_y = cfg.eps * std::sin(cfg.init_angle);
  if (cfg.init_angle == kPi / 2.0) {  // exact orthogonal start
    s.w_x = 0.0;
    s.w_y = cfg.eps;
  }

  auto& loss = run.traj.scalars["loss"];
  auto record = [&] {
    run.traj.points.push_back({s.v, s.w_x, s.w_y});
    loss.push_back(population_loss(s, cfg.d));
  };
  record();

  for (int t = 0; t < steps; ++t) {
    const Deltas d = population_deltas(s, cfg.K);
    if (!run.stage_boundary && d.dwy < 0.0)
      run.stage_boundary = static_cast<std::size_t>(t);
    s.v += d.dv;
    s.w_x += d.dwx;
    s.w_y = std::abs(s.w_y + d.dwy);
    if (!std::isfinite(s.v) || !std::isfinite(s.w_x) || !std::isfinite(s.w_y) ||
        std::abs(s.v) > 1e6)
      throw DivergenceError(
          "simulate_neuron: diverged at step " + std::to_string(t + 1),
          static_cast<std::size_t>(t), run.traj.points.back());
    record();
  }
  return run;
}

double neuron_hessian_top(double v, double w_norm, int d) {
  if (d < 2) throw PreconditionError("neuron_hessian_top: d must be >= 2");
  if (std::abs(v * w_norm - 1.0) > 1e-9)
    throw PreconditionError(
        "neuron_hessian_top: off the minimum manifold v|w| = 1; use "
        "dynamics::top_eigenvalue instead");
  return (w_norm * w_norm + v * v) / d;
}

dynamics::Trajectory empirical_neuron_gd(int n_samples, int d,
                                         std::uint64_t seed, double eta,
                                         const NeuronState& init, int steps) {
  if (n_samples < 1)
    throw PreconditionError("empirical_neuron_gd: n_samples must be >= 1");
  if (d < 2) throw PreconditionError("empirical_neuron_gd: d must be >= 2");
  if (steps < 1)
    throw PreconditionError("empirical_neuron_gd: steps must be >= 1");

  // Sample set drawn once, uniform on the unit sphere, immutable afterwards.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(n_samples),
                                      std::vector<double>(d));
  for (auto& x : xs) {
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (auto& c : x) {
        c = gauss(rng);
        n2 += c * c;
      }
    } while (n2 == 0.0);
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& c : x) c *= inv;
  }

  // Teacher w_tilde = e_1; labels relu(x[0]).
  double v = init.v;
  std::vector<double> w(d, 0.0);
  w[0] = init.w_x;
  w[1] = init.w_y;

  dynamics::Trajectory traj;
  traj.eta = eta;
  traj.seed = seed;
  auto& loss = traj.scalars["loss"];

  std::vector<double> grad_w(d);
  auto record = [&] {
    double wy2 = 0.0;
    for (int i = 1; i < d; ++i) wy2 += w[i] * w[i];
    traj.points.push_back({v, w[0], std::sqrt(wy2)});
  };

  const double inv_n = 1.0 / n_samples;
  for (int t = 0; t <= steps; ++t) {
    double grad_v = 0.0, l = 0.0;
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    for (const auto& x : xs) {  // fixed order: bit-reproducible reduction
      double a = 0.0;
      for (int i = 0; i < d; ++i) a += w[i] * x[i];
      const double act = a > 0.0 ? a : 0.0;
      const double y = x[0] > 0.0 ? x[0] : 0.0;
      const double res = v * act - y;
      l += res * res;
      grad_v += res * act;
      if (a > 0.0) {
        const double c = res * v;
        for (int i = 0; i < d; ++i) grad_w[i] += c * x[i];
      }
    }
    record();
    loss.push_back(l * inv_n);
    if (t == steps) break;

    v -= eta * 2.0 * inv_n * grad_v;
    for (int i = 0; i < d; ++i) w[i] -= eta * 2.0 * inv_n * grad_w[i];
    bool finite = std::isfinite(v) && std::abs(v) < 1e6;
    for (double c : w) finite = finite && std::isfinite(c) && std::abs(c) < 1e6;
    if (!finite)
      throw DivergenceError(
          "empirical_neuron_gd: diverged at step " + std::to_string(t + 1),
          static_cast<std::size_t>(t), traj.points.back());
  }
  return traj;
}

}  // namespace eoslab::neuron
