#pragma once

// 1-D objectives with exact high-order derivatives, the stable-oscillation
// condition checkers, the closed-form period-2 orbit of the quartic
// f(x) = 1/4 (x^2 - mu)^2, and plain 1-D gradient descent.

#include <functional>
#include <memory>
#include <vector>

#include "eoslab/dynamics.hpp"
#include "eoslab/errors.hpp"

namespace eoslab::scalar1d {

/// A 1-D objective answering derivative queries exactly (closed form) up to
/// max_order. Custom functions supply their own oracle; finite differences
/// are never used here.
class ScalarFunction {
 public:
  /// f(x) = 1/4 (x^2 - mu)^2, mu > 0.
  static ScalarFunction quartic(double mu);
  /// f(x) = a * sin(x).
  static ScalarFunction scaled_sine(double amplitude);
  /// f(x) = 1/2 lambda x^2.
  static ScalarFunction quadratic(double lambda);
  /// f(x) = (g(x) - y)^2.
  static ScalarFunction squared_loss_of(ScalarFunction g, double target);
  /// oracle(x, k) must return the exact k-th derivative for k <= max_order.
  static ScalarFunction custom(std::function<double(double, int)> oracle,
                               int max_order);

  /// k-th derivative at x (k = 0 is the value). Throws PreconditionError for
  /// k > max_order.
  [[nodiscard]] double derivative(double x, int order) const;
  [[nodiscard]] double operator()(double x) const { return derivative(x, 0); }
  [[nodiscard]] int max_order() const;

  /// Orders 0..k in one call.
  [[nodiscard]] std::vector<double> derivatives(double x, int k) const;

 private:
  struct Impl;
  explicit ScalarFunction(std::shared_ptr<const Impl> impl);
  static ScalarFunction make(std::function<double(double, int)> oracle,
                             int max_order);
  std::shared_ptr<const Impl> impl_;
};

struct ThirdOrderCondition {
  bool applicable = false;
  double margin = 0.0;  // 3 [f'''(x)]^2 - f''(x) f''''(x)
};

enum class HigherOrderClass { StableOscillation, NotStable, AllZero };

struct HigherOrderCondition {
  HigherOrderClass cls = HigherOrderClass::AllZero;
  int k = 0;          // lowest order >= 4 with nonzero derivative (0 if none)
  double fk = 0.0;    // that derivative's value
  bool mirrored = false;  // odd k with fk < 0 handled via x -> -x
};

enum class WindowValidity {
  ThirdOrder,
  HigherOrderOdd,
  HigherOrderEven,
  NotApplicable
};

struct EtaWindow {
  double lower = 0.0;
  double upper = 0.0;
  WindowValidity validity = WindowValidity::NotApplicable;
};

enum class OrbitStability {
  ConvergentMonotone,     // eta*mu <= sqrt(4.5) - 1
  ConvergentOscillating,  // eta*mu <  sqrt(5)   - 1
  ExistsUnstable,         // eta*mu <= 1.5
  None
};

struct OrbitPrediction {
  double x_low = 0.0;
  double x_high = 0.0;
  double eta = 0.0;
  double mu = 0.0;
  OrbitStability stability = OrbitStability::None;
};

inline constexpr double kMinimumTol = 1e-9;

/// Throws PreconditionError (reporting f' and f'') unless |f'(x)| <= 1e-9 and
/// f''(x) > 1e-9.
void require_local_minimum(const ScalarFunction& f, double x_bar);

/// Third-order stable-oscillation check at a local minimum:
/// applicable iff f'''(x) != 0 and 3 [f''']^2 - f'' f'''' > 0.
ThirdOrderCondition check_condition_third_order(const ScalarFunction& f,
                                                double x_bar);

/// Higher-order check for f'''(x_bar) = 0: classifies by the lowest nonzero
/// derivative of order >= 4. Throws PreconditionError when f''' != 0.
HigherOrderCondition check_condition_higher_order(const ScalarFunction& f,
                                                  double x_bar);

/// For f(x) = (g(x) - y)^2 at g(x_bar) = y: true iff g' != 0 and
/// g' g''' < 6 [g'']^2 at x_bar.
bool check_l2_condition(const ScalarFunction& g, double x_bar, double y);

/// Learning-rate interval admitting a 2-step return, per the branch selected
/// by the condition checks. eps is the initial offset x0 = x_bar - eps.
EtaWindow eta_window(const ScalarFunction& f, double x_bar, double eps);

/// Closed-form period-2 orbit of the quartic: roots of
/// x^4 - (mu + 1/eta) x^2 + 1/eta^2 = 0 with x_low < sqrt(mu) < x_high.
/// Requires eta*mu >= 1 (equality gives the degenerate double root sqrt(mu)).
OrbitPrediction solve_period2(double mu, double eta);

/// x_{t+1} = x_t - eta f'(x_t). Points are 1-vectors; per-step scalar "loss".
dynamics::Trajectory gd_1d(const ScalarFunction& f, double x0, double eta,
                           int steps);

}  // namespace eoslab::scalar1d
