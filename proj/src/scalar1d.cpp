#include "eoslab/scalar1d.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace eoslab::scalar1d {

struct ScalarFunction::Impl {
  std::function<double(double, int)> oracle;
  int max_order = 0;
};

ScalarFunction::ScalarFunction(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

int ScalarFunction::max_order() const { return impl_->max_order; }

double ScalarFunction::derivative(double x, int order) const {
  if (order < 0 || order > impl_->max_order) {
    std::ostringstream msg;
    msg << "derivative order " << order << " unsupported (max_order = "
        << impl_->max_order << ")";
    throw PreconditionError(msg.str());
  }
  return impl_->oracle(x, order);
}

std::vector<double> ScalarFunction::derivatives(double x, int k) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) out.push_back(derivative(x, i));
  return out;
}

namespace {

constexpr int kBuiltinMaxOrder = 64;

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / i;
  return r;
}

}  // namespace

ScalarFunction ScalarFunction::make(std::function<double(double, int)> oracle,
                                    int max_order) {
  auto impl = std::make_shared<Impl>();
  impl->oracle = std::move(oracle);
  impl->max_order = max_order;
  return ScalarFunction(std::move(impl));
}

ScalarFunction ScalarFunction::quartic(double mu) {
  if (mu <= 0.0) throw PreconditionError("quartic: mu must be positive");
  return make(
      [mu](double x, int k) -> double {
        switch (k) {
          case 0: {
            const double r = x * x - mu;
            return 0.25 * r * r;
          }
          case 1: return x * x * x - mu * x;
          case 2: return 3.0 * x * x - mu;
          case 3: return 6.0 * x;
          case 4: return 6.0;
          default: return 0.0;
        }
      },
      kBuiltinMaxOrder);
}

ScalarFunction ScalarFunction::scaled_sine(double amplitude) {
  return make(
      [amplitude](double x, int k) -> double {
        switch (k % 4) {
          case 0: return amplitude * std::sin(x);
          case 1: return amplitude * std::cos(x);
          case 2: return -amplitude * std::sin(x);
          default: return -amplitude * std::cos(x);
        }
      },
      kBuiltinMaxOrder);
}

ScalarFunction ScalarFunction::quadratic(double lambda) {
  return make(
      [lambda](double x, int k) -> double {
        switch (k) {
          case 0: return 0.5 * lambda * x * x;
          case 1: return lambda * x;
          case 2: return lambda;
          default: return 0.0;
        }
      },
      kBuiltinMaxOrder);
}

ScalarFunction ScalarFunction::squared_loss_of(ScalarFunction g,
                                               double target) {
  const int mo = g.max_order();
  // f = h^2 with h = g - y; general Leibniz gives
  // f^(k) = sum_j C(k,j) h^(j) h^(k-j).
  return make(
      [g = std::move(g), target](double x, int k) -> double {
        std::vector<double> h(static_cast<std::size_t>(k) + 1);
        h[0] = g.derivative(x, 0) - target;
        for (int j = 1; j <= k; ++j)
          h[static_cast<std::size_t>(j)] = g.derivative(x, j);
        double s = 0.0;
        for (int j = 0; j <= k; ++j)
          s += binomial(k, j) * h[static_cast<std::size_t>(j)] *
               h[static_cast<std::size_t>(k - j)];
        return s;
      },
      mo);
}

ScalarFunction ScalarFunction::custom(std::function<double(double, int)> oracle,
                                      int max_order) {
  if (max_order < 4)
    throw PreconditionError("custom: max_order must be >= 4");
  return make(std::move(oracle), max_order);
}

void require_local_minimum(const ScalarFunction& f, double x_bar) {
  const double f1 = f.derivative(x_bar, 1);
  const double f2 = f.derivative(x_bar, 2);
  if (std::abs(f1) > kMinimumTol || f2 <= kMinimumTol) {
    std::ostringstream msg;
    msg << "x_bar = " << x_bar << " is not a local minimum: f' = " << f1
        << ", f'' = " << f2;
    throw PreconditionError(msg.str());
  }
}

ThirdOrderCondition check_condition_third_order(const ScalarFunction& f,
                                                double x_bar) {
  require_local_minimum(f, x_bar);
  const double f2 = f.derivative(x_bar, 2);
  const double f3 = f.derivative(x_bar, 3);
  const double f4 = f.derivative(x_bar, 4);
  ThirdOrderCondition out;
  out.margin = 3.0 * f3 * f3 - f2 * f4;
  out.applicable = std::abs(f3) > kMinimumTol && out.margin > 0.0;
  return out;
}

HigherOrderCondition check_condition_higher_order(const ScalarFunction& f,
                                                  double x_bar) {
  require_local_minimum(f, x_bar);
  const double f3 = f.derivative(x_bar, 3);
  if (std::abs(f3) > kMinimumTol)
    throw PreconditionError(
        "f'''(x_bar) != 0: use check_condition_third_order instead");

  HigherOrderCondition out;
  for (int k = 4; k <= f.max_order(); ++k) {
    const double fk = f.derivative(x_bar, k);
    if (std::abs(fk) <= kMinimumTol) continue;
    out.k = k;
    out.fk = fk;
    if (k % 2 == 0) {
      out.cls = fk < 0.0 ? HigherOrderClass::StableOscillation
                         : HigherOrderClass::NotStable;
    } else {
      // Odd k with fk < 0: mirror x -> -x, which flips fk positive and
      // leaves f^(k+1) unchanged.
      out.mirrored = fk < 0.0;
      if (k + 1 > f.max_order()) {
        out.cls = HigherOrderClass::NotStable;
      } else {
        const double fk1 = f.derivative(x_bar, k + 1);
        out.cls = fk1 < 0.0 ? HigherOrderClass::StableOscillation
                            : HigherOrderClass::NotStable;
      }
    }
    return out;
  }
  out.cls = HigherOrderClass::AllZero;
  return out;
}

bool check_l2_condition(const ScalarFunction& g, double x_bar, double y) {
  const double g0 = g.derivative(x_bar, 0);
  if (std::abs(g0 - y) > kMinimumTol) {
    std::ostringstream msg;
    msg << "g(x_bar) = " << g0 << " does not match target y = " << y;
    throw PreconditionError(msg.str());
  }
  const double g1 = g.derivative(x_bar, 1);
  const double g2 = g.derivative(x_bar, 2);
  const double g3 = g.derivative(x_bar, 3);
  return std::abs(g1) > kMinimumTol && g1 * g3 < 6.0 * g2 * g2;
}

EtaWindow eta_window(const ScalarFunction& f, double x_bar, double eps) {
  require_local_minimum(f, x_bar);
  const double f2 = f.derivative(x_bar, 2);
  const double f3 = f.derivative(x_bar, 3);

  EtaWindow w;
  if (std::abs(f3) > kMinimumTol) {
    const auto cond = check_condition_third_order(f, x_bar);
    if (!cond.applicable)
      throw PreconditionError("eta_window: third-order condition fails");
    if (eps * f3 <= 0.0)
      throw PreconditionError(
          "eta_window: need eps * f'''(x_bar) > 0 for a two-step return");
    w.lower = 2.0 / f2;
    w.upper = 2.0 / (f2 - eps * f3);
    w.validity = WindowValidity::ThirdOrder;
    return w;
  }

  const auto cond = check_condition_higher_order(f, x_bar);
  if (cond.cls != HigherOrderClass::StableOscillation)
    throw PreconditionError(
        "eta_window: no stable-oscillation branch applies (NotApplicable)");
  const double step = std::pow(std::abs(eps), cond.k - 2);
  double denom;
  if (cond.k % 2 == 0) {
    denom = f2 + cond.fk * step;  // fk < 0 here
    w.validity = WindowValidity::HigherOrderEven;
  } else {
    denom = f2 - std::abs(cond.fk) * step;  // mirrored when fk < 0
    w.validity = WindowValidity::HigherOrderOdd;
  }
  if (denom <= 0.0)
    throw PreconditionError("eta_window: eps too large, window degenerates");
  w.lower = 2.0 / f2;
  w.upper = 2.0 / denom;
  return w;
}

OrbitPrediction solve_period2(double mu, double eta) {
  if (mu <= 0.0) throw PreconditionError("solve_period2: mu must be positive");
  const double em = eta * mu;
  if (em < 1.0)
    throw PreconditionError(
        "solve_period2: eta*mu < 1, the orbit degenerates to the fixed point "
        "sqrt(mu)");

  OrbitPrediction out;
  out.eta = eta;
  out.mu = mu;
  if (em <= std::sqrt(4.5) - 1.0)
    out.stability = OrbitStability::ConvergentMonotone;
  else if (em < std::sqrt(5.0) - 1.0)
    out.stability = OrbitStability::ConvergentOscillating;
  else if (em <= 1.5)
    out.stability = OrbitStability::ExistsUnstable;
  else
    out.stability = OrbitStability::None;

  if (em == 1.0) {
    out.x_low = out.x_high = std::sqrt(mu);
    return out;
  }

  // Quadratic in u = x^2: u^2 - (mu + 1/eta) u + 1/eta^2 = 0. Compute the
  // larger root directly, the smaller via the product, so nothing cancels as
  // eta*mu -> 1+.
  const double s = mu + 1.0 / eta;
  const double disc = s * s - 4.0 / (eta * eta);
  const double u_high = 0.5 * (s + std::sqrt(disc));
  const double u_low = (1.0 / (eta * eta)) / u_high;
  out.x_low = std::sqrt(u_low);
  out.x_high = std::sqrt(u_high);
  return out;
}

dynamics::Trajectory gd_1d(const ScalarFunction& f, double x0, double eta,
                           int steps) {
  if (steps < 1) throw PreconditionError("gd_1d: steps must be >= 1");
  const double bound = 1e6 * std::max(1.0, std::abs(x0));

  dynamics::Trajectory traj;
  traj.eta = eta;
  traj.points.reserve(static_cast<std::size_t>(steps) + 1);
  auto& loss = traj.scalars["loss"];
  loss.reserve(static_cast<std::size_t>(steps) + 1);

  double x = x0;
  traj.points.push_back({x});
  loss.push_back(f(x));
  for (int t = 0; t < steps; ++t) {
    x -= eta * f.derivative(x, 1);
    if (!std::isfinite(x) || std::abs(x) > bound) {
      throw DivergenceError("gd_1d: diverged at step " + std::to_string(t + 1),
                            static_cast<std::size_t>(t),
                            traj.points.back());
    }
    traj.points.push_back({x});
    loss.push_back(f(x));
  }
  return traj;
}

}  // namespace eoslab::scalar1d
