#include "eoslab/cli.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "eoslab/dynamics.hpp"
#include "eoslab/factor2d.hpp"
#include "eoslab/matfac.hpp"
#include "eoslab/neuron.hpp"
#include "eoslab/scalar1d.hpp"

namespace eoslab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Oscillate1D: return "oscillate1d";
    case Experiment::Balance2D: return "balance2d";
    case Experiment::Neuron: return "neuron";
    case Experiment::NeuronEmpirical: return "neuron_empirical";
    case Experiment::MatfacSym: return "matfac_sym";
    case Experiment::MatfacQuasi: return "matfac_quasi";
    case Experiment::ConditionCheck: return "condition_check";
    case Experiment::OrbitPredict: return "orbit_predict";
    case Experiment::SharpnessTrace: return "sharpness_trace";
  }
  return "?";
}

namespace {

constexpr double kPi = std::numbers::pi;

struct NumKey {
  const char* key;
  bool required;
  double def;
};

struct StrKey {
  const char* key;
  bool required;
  const char* def;
};

struct Schema {
  Experiment exp;
  std::vector<NumKey> nums;
  std::vector<StrKey> strs;
};

const std::vector<Schema>& schemas() {
  static const std::vector<Schema> s = {
      {Experiment::Oscillate1D,
       {{"mu", true, 0}, {"eta", true, 0}, {"x0", true, 0},
        {"steps", false, 10000}, {"tol", false, 1e-9}},
       {}},
      {Experiment::Balance2D,
       {{"mu", true, 0}, {"K", true, 0}, {"x0", true, 0}, {"y0", true, 0},
        {"steps", false, 5000}, {"theorem_mode", false, 1},
        {"tol", false, 1e-9}},
       {}},
      {Experiment::Neuron,
       {{"d", false, 2}, {"K", true, 0}, {"eps", true, 0},
        {"init_angle", false, kPi / 2.0}, {"steps", false, 500},
        {"theorem_mode", false, 1}},
       {}},
      {Experiment::NeuronEmpirical,
       {{"n", true, 0}, {"d", true, 0}, {"eta", true, 0}, {"v0", true, 0},
        {"wx0", false, 0.0}, {"wy0", true, 0}, {"steps", false, 500}},
       {}},
      {Experiment::MatfacSym,
       {{"n", false, 8}, {"sigma1", false, 2.0}, {"sigma_decay", false, 0.5},
        {"eta_rel", false, 1.02}, {"eps_rel", false, 1e-3},
        {"steps", false, 1500}},
       {}},
      {Experiment::MatfacQuasi,
       {{"n", false, 8}, {"sigma1", false, 2.0}, {"sigma_decay", false, 0.5},
        {"eta_rel", false, 1.02}, {"eps_rel", false, 1e-3},
        {"alpha", false, 0.8}, {"simulation_only", false, 0},
        {"steps", false, 1500}},
       {}},
      {Experiment::ConditionCheck,
       {{"mu", false, 1.0}, {"amplitude", false, 1.0}, {"lambda", false, 1.0},
        {"x_bar", false, std::numeric_limits<double>::quiet_NaN()},
        {"eps", false, 0.1}},
       {{"fn", true, ""}}},
      {Experiment::OrbitPredict, {{"mu", true, 0}, {"eta", true, 0}}, {}},
      {Experiment::SharpnessTrace,
       {{"mu", false, 1.0}, {"eta", false, 1.05}, {"K", false, 1.05},
        {"x0", true, 0}, {"y0", false, 1.0}, {"steps", false, 1000}},
       {{"model", true, ""}}},
  };
  return s;
}

const Schema& schema_for(Experiment e) {
  for (const auto& s : schemas())
    if (s.exp == e) return s;
  throw Error("no schema");  // unreachable
}

Experiment experiment_from_name(const std::string& name) {
  for (const auto& s : schemas())
    if (name == experiment_name(s.exp)) return s.exp;
  throw PreconditionError("unknown experiment '" + name + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& v, const std::string& where) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double x = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(x))
    throw PreconditionError("non-numeric value '" + v + "' at " + where);
  return x;
}

void apply_key(ExperimentConfig& cfg, const Schema& sch, const std::string& key,
               const std::string& value, const std::string& where) {
  if (key == "seed") {
    const double s = parse_number(value, where);
    if (s < 0.0 || s != std::floor(s))
      throw PreconditionError("seed must be a non-negative integer at " + where);
    cfg.seed = static_cast<std::uint64_t>(s);
    return;
  }
  if (key == "output") {
    cfg.output_dir = trim(value);
    return;
  }
  for (const auto& k : sch.nums)
    if (key == k.key) {
      cfg.params[key] = parse_number(value, where);
      return;
    }
  for (const auto& k : sch.strs)
    if (key == k.key) {
      cfg.strings[key] = trim(value);
      return;
    }
  throw PreconditionError("unknown key '" + key + "' for experiment " +
                          experiment_name(sch.exp) + " at " + where);
}

void validate(ExperimentConfig& cfg) {
  const Schema& sch = schema_for(cfg.experiment);
  for (const auto& k : sch.nums) {
    if (cfg.params.count(k.key)) continue;
    if (k.required)
      throw PreconditionError(std::string("missing required key '") + k.key +
                              "' for experiment " +
                              experiment_name(cfg.experiment));
    cfg.params[k.key] = k.def;
  }
  for (const auto& k : sch.strs) {
    if (cfg.strings.count(k.key)) continue;
    if (k.required)
      throw PreconditionError(std::string("missing required key '") + k.key +
                              "' for experiment " +
                              experiment_name(cfg.experiment));
    cfg.strings[k.key] = k.def;
  }

  if (cfg.experiment == Experiment::Balance2D &&
      cfg.params.at("theorem_mode") != 0.0) {
    const double K = cfg.params.at("K");
    if (K <= 1.0 || K >= 1.5)
      throw PreconditionError(
          "balance2d theorem mode requires 1 < K < 1.5; got K = " +
          std::to_string(K));
  }
  if (cfg.experiment == Experiment::ConditionCheck) {
    const std::string& fn = cfg.strings.at("fn");
    if (fn != "quartic" && fn != "sine" && fn != "quadratic")
      throw PreconditionError(
          "condition_check: fn must be quartic, sine or quadratic");
  }
  if (cfg.experiment == Experiment::SharpnessTrace) {
    const std::string& m = cfg.strings.at("model");
    if (m != "quartic1d" && m != "factor2d")
      throw PreconditionError(
          "sharpness_trace: model must be quartic1d or factor2d");
  }
}

ExperimentConfig parse_ini(const std::string& text) {
  ExperimentConfig cfg;
  bool have_section = false;
  const Schema* sch = nullptr;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw PreconditionError("malformed section header at " + where);
      if (have_section)
        throw PreconditionError("multiple sections at " + where);
      cfg.experiment = experiment_from_name(trim(line.substr(1, line.size() - 2)));
      sch = &schema_for(cfg.experiment);
      have_section = true;
      continue;
    }
    if (!have_section)
      throw PreconditionError("key before [experiment] section at " + where);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw PreconditionError("expected 'key = value' at " + where);
    const std::string key = trim(line.substr(0, eq));
    if (cfg.params.count(key) || cfg.strings.count(key))
      throw PreconditionError("duplicate key '" + key + "' at " + where);
    apply_key(cfg, *sch, key, line.substr(eq + 1), where);
  }
  if (!have_section)
    throw PreconditionError("config contains no [experiment] section");
  validate(cfg);
  return cfg;
}

ExperimentConfig parse_json_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw PreconditionError(std::string("JSON parse error: ") + e.what());
  }
  if (!j.is_object())
    throw PreconditionError("JSON config must be a single object");
  if (!j.contains("experiment") || !j["experiment"].is_string())
    throw PreconditionError("JSON config needs a string 'experiment' key");

  ExperimentConfig cfg;
  cfg.experiment = experiment_from_name(j["experiment"].get<std::string>());
  const Schema& sch = schema_for(cfg.experiment);
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "experiment") continue;
    const json& v = it.value();
    std::string as_text;
    if (v.is_string())
      as_text = v.get<std::string>();
    else if (v.is_number())
      as_text = v.dump();
    else
      throw PreconditionError("key '" + key + "' must be numeric or string");
    apply_key(cfg, sch, key, as_text, "key '" + key + "'");
  }
  validate(cfg);
  return cfg;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// ---- CSV emission ---------------------------------------------------------

void write_trajectory_csv(const fs::path& path,
                          const dynamics::Trajectory& traj,
                          const std::vector<std::string>& coord_names,
                          const std::vector<std::string>& scalar_order) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "step";
  for (const auto& c : coord_names) out << ',' << c;
  for (const auto& s : scalar_order) out << ',' << s;
  out << '\n';
  for (std::size_t t = 0; t < traj.size(); ++t) {
    out << t;
    for (double x : traj.points[t]) out << ',' << format_double(x);
    for (const auto& s : scalar_order)
      out << ',' << format_double(traj.scalars.at(s)[t]);
    out << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

// ---- shared numerics ------------------------------------------------------

double fd_sharpness(const dynamics::GradFn& grad,
                    const dynamics::Vector& theta, std::uint64_t seed) {
  try {
    return dynamics::top_eigenvalue(grad, theta, 1e-10, 500, seed).lambda;
  } catch (const NonConvergedError& e) {
    return e.last_estimate;
  }
}

/// Power iteration on an analytic Hessian-vector product; probe-grade (falls
/// back to the last Rayleigh quotient instead of throwing).
double top_eig_analytic(
    const std::function<std::vector<double>(const std::vector<double>&)>& hvp,
    std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = gauss(rng);
  double nv = dynamics::norm2(v);
  for (auto& x : v) x /= nv;
  double lambda = 0.0;
  for (int it = 1; it <= 500; ++it) {
    std::vector<double> hv = hvp(v);
    const double l = dynamics::dot(v, hv);
    const double nhv = dynamics::norm2(hv);
    if (nhv == 0.0) return l;
    for (std::size_t i = 0; i < dim; ++i) v[i] = hv[i] / nhv;
    if (it > 1 && std::abs(l - lambda) <= 1e-10 * std::max(1.0, std::abs(l)))
      return l;
    lambda = l;
  }
  return lambda;
}

json orbit_prediction_json(const scalar1d::OrbitPrediction& p) {
  const char* stab = "none";
  switch (p.stability) {
    case scalar1d::OrbitStability::ConvergentMonotone:
      stab = "convergent_monotone";
      break;
    case scalar1d::OrbitStability::ConvergentOscillating:
      stab = "convergent_oscillating";
      break;
    case scalar1d::OrbitStability::ExistsUnstable:
      stab = "exists_unstable";
      break;
    case scalar1d::OrbitStability::None: stab = "none"; break;
  }
  return {{"x_low", p.x_low}, {"x_high", p.x_high}, {"mu", p.mu},
          {"eta", p.eta}, {"stability", stab}};
}

json orbit_report_json(const dynamics::OrbitReport& rep) {
  json j;
  if (rep.period) {
    j["period"] = *rep.period;
    j["points"] = rep.orbit_points;
    j["residual"] = rep.residual;
    if (rep.settled_at) j["settled_at"] = *rep.settled_at;
  } else {
    j["period"] = nullptr;
  }
  return j;
}

struct RunArtifacts {
  dynamics::Trajectory traj;
  std::vector<std::string> coord_names;
  std::vector<std::string> scalar_order;
  json detected_orbit;
  json predicted_orbit;
  json extra;  // experiment-specific report fields
  std::map<std::string, bool> flags;
  std::optional<double> max_deviation;
};

// ---- experiments ----------------------------------------------------------

RunArtifacts run_oscillate1d(const ExperimentConfig& cfg) {
  const double mu = cfg.params.at("mu");
  const double eta = cfg.params.at("eta");
  const double x0 = cfg.params.at("x0");
  const int steps = static_cast<int>(cfg.params.at("steps"));
  const double tol = cfg.params.at("tol");

  const auto f = scalar1d::ScalarFunction::quartic(mu);
  RunArtifacts art;
  art.traj = scalar1d::gd_1d(f, x0, eta, steps);
  auto& sharp = art.traj.scalars["sharpness"];
  const dynamics::GradFn grad = [&f](const dynamics::Vector& th) {
    return dynamics::Vector{f.derivative(th[0], 1)};
  };
  sharp.reserve(art.traj.size());
  for (const auto& p : art.traj.points)
    sharp.push_back(fd_sharpness(grad, p, cfg.seed));

  art.coord_names = {"x"};
  art.scalar_order = {"loss", "sharpness"};

  const int tail = std::min(100, steps / 4);
  const auto rep = dynamics::detect_period(art.traj, 8, tol, std::max(tail, 1));
  art.detected_orbit = orbit_report_json(rep);

  if (eta * mu >= 1.0) {
    const auto pred = scalar1d::solve_period2(mu, eta);
    art.predicted_orbit = orbit_prediction_json(pred);
    if (rep.period && *rep.period == 2) {
      std::array<double, 2> sim = {std::abs(rep.orbit_points[0][0]),
                                   std::abs(rep.orbit_points[1][0])};
      if (sim[0] > sim[1]) std::swap(sim[0], sim[1]);
      const double dev = std::max(std::abs(sim[0] - pred.x_low),
                                  std::abs(sim[1] - pred.x_high));
      art.max_deviation = dev;
      art.flags["matches_prediction"] = dev <= 1e-8;
    }
  } else {
    art.predicted_orbit = nullptr;
  }
  art.flags["period_detected"] = rep.period.has_value();
  return art;
}

RunArtifacts run_balance2d(const ExperimentConfig& cfg) {
  factor2d::Factor2DConfig fc;
  fc.mu = cfg.params.at("mu");
  fc.K = cfg.params.at("K");
  fc.x0 = cfg.params.at("x0");
  fc.y0 = cfg.params.at("y0");
  fc.steps = static_cast<int>(cfg.params.at("steps"));
  const double tol = cfg.params.at("tol");

  RunArtifacts art;
  art.traj = factor2d::gd_2d(fc);
  auto& sharp = art.traj.scalars["sharpness"];
  sharp.reserve(art.traj.size());
  for (const auto& p : art.traj.points)
    sharp.push_back(factor2d::hessian_2d(p[0], p[1], fc.mu).lambda1);
  art.coord_names = {"x", "y"};
  art.scalar_order = {"loss", "xy", "sharpness"};

  const int tail = std::min(100, fc.steps / 4);
  const auto rep = dynamics::detect_period(art.traj, 8, tol, std::max(tail, 1));
  art.detected_orbit = orbit_report_json(rep);
  art.predicted_orbit = nullptr;
  art.flags["period_detected"] = rep.period.has_value();

  const auto gaps = factor2d::balance_gap_series(art.traj, fc.mu);
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < gaps.size(); ++i)
    if (gaps[i].second >= 1e-12 && gaps[i + 1].second >= gaps[i].second)
      decreasing = false;
  art.flags["gap_strictly_decreasing"] = decreasing && !gaps.empty();
  art.flags["gap_tail_small"] =
      !gaps.empty() && gaps.back().second < 1e-8;

  // Exact one-step recursions of the gap and the product.
  bool rec = true;
  for (std::size_t t = 0; t + 1 < art.traj.size(); ++t) {
    const double x = art.traj.points[t][0], y = art.traj.points[t][1];
    const double xn = art.traj.points[t + 1][0], yn = art.traj.points[t + 1][1];
    const double r = x * y - fc.mu;
    const double d_pred = (y - x) * (1.0 + art.traj.eta * r);
    const double p_pred = x * y * (1.0 - art.traj.eta * r) *
                              (1.0 - art.traj.eta * r) -
                          art.traj.eta * r * (x - y) * (x - y);
    const double sc = std::max({1.0, std::abs(x * y), std::abs(y - x)});
    if (std::abs((yn - xn) - d_pred) > 1e-12 * sc ||
        std::abs(xn * yn - p_pred) > 1e-12 * sc)
      rec = false;
  }
  art.flags["recursions_hold"] = rec;

  art.extra["balance_gap_tail"] =
      gaps.empty() ? 0.0 : gaps.back().second;
  return art;
}

RunArtifacts run_neuron(const ExperimentConfig& cfg) {
  neuron::NeuronConfig nc;
  nc.d = static_cast<int>(cfg.params.at("d"));
  nc.K = cfg.params.at("K");
  nc.eps = cfg.params.at("eps");
  nc.init_angle = cfg.params.at("init_angle");
  nc.theorem_mode = cfg.params.at("theorem_mode") != 0.0;
  const int steps = static_cast<int>(cfg.params.at("steps"));

  RunArtifacts art;
  neuron::NeuronRun run = neuron::simulate_neuron(nc, steps);
  art.traj = std::move(run.traj);
  art.coord_names = {"v", "w_x", "w_y"};
  art.scalar_order = {"loss"};
  art.detected_orbit = nullptr;
  art.predicted_orbit = nullptr;

  art.extra["t1_bound"] = run.t1_bound;
  if (run.stage_boundary)
    art.extra["stage_boundary"] = *run.stage_boundary;

  // w_y^(t) < 0.1 (1 - 0.030 K)^(t - T1 - 4) for all t >= T1 + 4.
  const double rate = 1.0 - 0.030 * nc.K;
  const int start = run.t1_bound + 4;
  bool bound_holds = true;
  for (std::size_t t = static_cast<std::size_t>(std::max(start, 0));
       t < art.traj.size(); ++t) {
    const double envelope =
        0.1 * std::pow(rate, static_cast<double>(t) - start);
    if (art.traj.points[t][2] >= envelope) bound_holds = false;
  }
  art.flags["decay_bound_holds"] = bound_holds;
  return art;
}

RunArtifacts run_neuron_empirical(const ExperimentConfig& cfg) {
  const int n = static_cast<int>(cfg.params.at("n"));
  const int d = static_cast<int>(cfg.params.at("d"));
  const double eta = cfg.params.at("eta");
  const int steps = static_cast<int>(cfg.params.at("steps"));
  neuron::NeuronState init;
  init.v = cfg.params.at("v0");
  init.w_x = cfg.params.at("wx0");
  init.w_y = cfg.params.at("wy0");

  RunArtifacts art;
  art.traj = neuron::empirical_neuron_gd(n, d, cfg.seed, eta, init, steps);
  art.coord_names = {"v", "w_x", "w_y"};
  art.scalar_order = {"loss"};
  art.detected_orbit = nullptr;
  art.predicted_orbit = nullptr;
  const auto& last = art.traj.back();
  art.extra["final"] = {{"v", last[0]}, {"w_x", last[1]}, {"w_y", last[2]}};
  return art;
}

std::vector<double> geometric_sigmas(int n, double sigma1, double decay) {
  std::vector<double> s(static_cast<std::size_t>(n));
  double v = sigma1;
  for (auto& x : s) {
    x = v;
    v *= decay;
  }
  return s;
}

matfac::Matrix seeded_perturbation(int rows, int cols, double norm,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  matfac::Matrix P(rows, cols);
  for (double& x : P.a) x = gauss(rng);
  const double f = norm / matfac::frob_norm(P);
  for (double& x : P.a) x *= f;
  return P;
}

std::vector<std::string> matrix_coord_names(const std::string& prefix, int rows,
                                            int cols) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      names.push_back(prefix + "_" + std::to_string(i) + "_" +
                      std::to_string(j));
  return names;
}

RunArtifacts run_matfac_sym(const ExperimentConfig& cfg) {
  const int n = static_cast<int>(cfg.params.at("n"));
  const double sigma1 = cfg.params.at("sigma1");
  const double decay = cfg.params.at("sigma_decay");
  const double eta_rel = cfg.params.at("eta_rel");
  const double eps_rel = cfg.params.at("eps_rel");
  const int steps = static_cast<int>(cfg.params.at("steps"));
  if (eta_rel <= 1.0)
    throw PreconditionError("matfac_sym: eta_rel must exceed 1");

  const matfac::Matrix X0 =
      matfac::seeded_factor(n, n, geometric_sigmas(n, sigma1, decay), cfg.seed);
  const double eps = eps_rel * sigma1;
  const matfac::Matrix dX0 = seeded_perturbation(n, n, eps, cfg.seed + 1);
  const double beta = (eta_rel - 1.0) / (sigma1 * sigma1);

  matfac::MatfacRun run = matfac::gd_symmetric(X0, dX0, beta, steps);

  RunArtifacts art;
  art.traj = std::move(run.traj);
  art.coord_names = matrix_coord_names("x", n, n);
  art.scalar_order = {"loss", "sigma_top", "sharpness"};

  const matfac::Matrix C = matfac::matmul(X0, matfac::transpose(X0));
  auto& sharp = art.traj.scalars["sharpness"];
  sharp.reserve(art.traj.size());
  for (const auto& pt : art.traj.points) {
    matfac::Matrix X(n, n);
    X.a = pt;
    const matfac::Matrix R = matfac::matmul(X, matfac::transpose(X)) - C;
    auto hv = [&](const std::vector<double>& vflat) {
      matfac::Matrix dX(n, n);
      dX.a = vflat;
      const matfac::Matrix A = matfac::matmul(dX, matfac::transpose(X)) +
                               matfac::matmul(X, matfac::transpose(dX));
      const matfac::Matrix G =
          matfac::matmul(A, X) + matfac::matmul(R, dX);
      return G.a;
    };
    sharp.push_back(
        top_eig_analytic(hv, static_cast<std::size_t>(n) * n, cfg.seed));
  }

  const double env = 10.0 * eps + 1e-6;
  const auto rep = dynamics::detect_period(
      art.traj, 4, env, std::max(1, std::min(50, steps / 4)));
  art.detected_orbit = orbit_report_json(rep);
  art.predicted_orbit = {{"delta1", run.orbit.delta1},
                         {"delta2", run.orbit.delta2},
                         {"sigma1", run.orbit.sigma1},
                         {"beta", run.orbit.beta},
                         {"sigma_high", sigma1 * (1.0 + run.orbit.delta1)},
                         {"sigma_low", sigma1 * (1.0 + run.orbit.delta2)}};

  const auto& st = art.traj.scalars.at("sigma_top");
  std::array<double, 2> tail = {st[st.size() - 2], st[st.size() - 1]};
  if (tail[0] > tail[1]) std::swap(tail[0], tail[1]);
  const double pred_ratio =
      (1.0 + run.orbit.delta1) / (1.0 + run.orbit.delta2);
  const double sim_ratio = tail[1] / tail[0];
  art.extra["cycle_ratio"] = sim_ratio;
  art.extra["predicted_ratio"] = pred_ratio;
  art.extra["epsilon"] = eps;
  if (run.zero_leading_projection)
    art.extra["zero_leading_projection"] = true;
  art.flags["ratio_within_1pct"] =
      std::abs(sim_ratio / pred_ratio - 1.0) <= 0.01;
  const double dev = std::max(
      std::abs(tail[0] - sigma1 * (1.0 + run.orbit.delta2)),
      std::abs(tail[1] - sigma1 * (1.0 + run.orbit.delta1)));
  art.max_deviation = dev;
  art.flags["orbit_membership"] = dev <= env;
  return art;
}

RunArtifacts run_matfac_quasi(const ExperimentConfig& cfg) {
  const int n = static_cast<int>(cfg.params.at("n"));
  const double sigma1 = cfg.params.at("sigma1");
  const double decay = cfg.params.at("sigma_decay");
  const double eta_rel = cfg.params.at("eta_rel");
  const double eps_rel = cfg.params.at("eps_rel");
  const double alpha = cfg.params.at("alpha");
  const bool sim_only = cfg.params.at("simulation_only") != 0.0;
  const int steps = static_cast<int>(cfg.params.at("steps"));
  if (eta_rel <= 1.0)
    throw PreconditionError("matfac_quasi: eta_rel must exceed 1");

  const matfac::Matrix X0 =
      matfac::seeded_factor(n, n, geometric_sigmas(n, sigma1, decay), cfg.seed);
  const double eps = eps_rel * sigma1;
  const matfac::Matrix dY0 = seeded_perturbation(n, n, eps, cfg.seed + 1);
  const matfac::Matrix dZ0 = seeded_perturbation(n, n, eps, cfg.seed + 2);
  const double beta = (eta_rel - 1.0) / (sigma1 * sigma1);

  matfac::MatfacRun run =
      matfac::gd_quasisymmetric(X0, alpha, dY0, dZ0, beta, steps, sim_only);

  RunArtifacts art;
  art.traj = std::move(run.traj);
  art.coord_names = matrix_coord_names("y", n, n);
  {
    auto zn = matrix_coord_names("z", n, n);
    art.coord_names.insert(art.coord_names.end(), zn.begin(), zn.end());
  }
  art.scalar_order = {"loss", "sigma_top_y", "sigma_top_z", "sharpness"};

  const matfac::Matrix C = matfac::matmul(X0, matfac::transpose(X0));
  const std::size_t block = static_cast<std::size_t>(n) * n;
  auto& sharp = art.traj.scalars["sharpness"];
  sharp.reserve(art.traj.size());
  for (const auto& pt : art.traj.points) {
    matfac::Matrix Y(n, n), Z(n, n);
    std::copy(pt.begin(), pt.begin() + static_cast<std::ptrdiff_t>(block),
              Y.a.begin());
    std::copy(pt.begin() + static_cast<std::ptrdiff_t>(block), pt.end(),
              Z.a.begin());
    const matfac::Matrix R = matfac::matmul(Y, Z) - C;
    auto hv = [&](const std::vector<double>& vflat) {
      matfac::Matrix dY(n, n), dZ(n, n);
      std::copy(vflat.begin(),
                vflat.begin() + static_cast<std::ptrdiff_t>(block),
                dY.a.begin());
      std::copy(vflat.begin() + static_cast<std::ptrdiff_t>(block),
                vflat.end(), dZ.a.begin());
      const matfac::Matrix S =
          matfac::matmul(dY, Z) + matfac::matmul(Y, dZ);
      const matfac::Matrix GY = matfac::matmul(S, matfac::transpose(Z)) +
                                matfac::matmul(R, matfac::transpose(dZ));
      const matfac::Matrix GZ = matfac::matmul(matfac::transpose(Y), S) +
                                matfac::matmul(matfac::transpose(dY), R);
      std::vector<double> out = GY.a;
      out.insert(out.end(), GZ.a.begin(), GZ.a.end());
      return out;
    };
    sharp.push_back(top_eig_analytic(hv, 2 * block, cfg.seed));
  }

  const double env = 10.0 * eps + 1e-6;
  const auto rep = dynamics::detect_period(
      art.traj, 4, env, std::max(1, std::min(50, steps / 4)));
  art.detected_orbit = orbit_report_json(rep);
  art.predicted_orbit = {{"rho1", run.orbit.rho1},
                         {"rho2", run.orbit.rho2},
                         {"alpha", alpha},
                         {"sigma1", run.orbit.sigma1},
                         {"beta", run.orbit.beta},
                         {"sigma_high", sigma1 * run.orbit.rho1},
                         {"sigma_low", sigma1 * run.orbit.rho2}};

  const auto& sy = art.traj.scalars.at("sigma_top_y");
  const auto& sz = art.traj.scalars.at("sigma_top_z");
  std::array<double, 2> tail = {sy[sy.size() - 2], sy[sy.size() - 1]};
  if (tail[0] > tail[1]) std::swap(tail[0], tail[1]);
  const double dev =
      std::max(std::abs(tail[0] - sigma1 * run.orbit.rho2),
               std::abs(tail[1] - sigma1 * run.orbit.rho1));
  art.max_deviation = dev;
  art.flags["orbit_membership"] = dev <= env;
  art.flags["factors_agree"] =
      std::abs(sy[sy.size() - 1] - sz[sz.size() - 1]) <= 1e-6 &&
      std::abs(sy[sy.size() - 2] - sz[sz.size() - 2]) <= 1e-6;
  art.extra["epsilon"] = eps;
  art.extra["cycle"] = {tail[0], tail[1]};
  if (run.zero_leading_projection)
    art.extra["zero_leading_projection"] = true;
  return art;
}

RunArtifacts run_condition_check(const ExperimentConfig& cfg) {
  const std::string& fn = cfg.strings.at("fn");
  double x_bar = cfg.params.at("x_bar");
  scalar1d::ScalarFunction f = [&] {
    if (fn == "quartic") {
      const double mu = cfg.params.at("mu");
      if (std::isnan(x_bar)) x_bar = std::sqrt(mu);
      return scalar1d::ScalarFunction::quartic(mu);
    }
    if (fn == "sine") {
      const double a = cfg.params.at("amplitude");
      if (std::isnan(x_bar)) x_bar = a > 0.0 ? -kPi / 2.0 : kPi / 2.0;
      return scalar1d::ScalarFunction::scaled_sine(a);
    }
    if (std::isnan(x_bar)) x_bar = 0.0;
    return scalar1d::ScalarFunction::quadratic(cfg.params.at("lambda"));
  }();

  RunArtifacts art;
  art.traj.eta = 0.0;
  art.traj.points.push_back({x_bar});
  art.traj.scalars["loss"].push_back(f(x_bar));
  art.coord_names = {"x"};
  art.scalar_order = {"loss"};
  art.detected_orbit = nullptr;
  art.predicted_orbit = nullptr;

  json rep;
  rep["x_bar"] = x_bar;
  const double f3 = f.derivative(x_bar, 3);
  std::string cls;
  bool stable = false;
  if (std::abs(f3) > scalar1d::kMinimumTol) {
    const auto c = scalar1d::check_condition_third_order(f, x_bar);
    rep["margin"] = c.margin;
    stable = c.applicable;
    cls = c.applicable ? "third_order_stable" : "third_order_inapplicable";
  } else {
    const auto c = scalar1d::check_condition_higher_order(f, x_bar);
    switch (c.cls) {
      case scalar1d::HigherOrderClass::StableOscillation:
        cls = "higher_order_stable";
        stable = true;
        rep["k"] = c.k;
        rep["fk"] = c.fk;
        rep["mirrored"] = c.mirrored;
        break;
      case scalar1d::HigherOrderClass::NotStable:
        cls = "not_stable";
        rep["k"] = c.k;
        rep["fk"] = c.fk;
        break;
      case scalar1d::HigherOrderClass::AllZero:
        cls = "not_applicable";
        break;
    }
  }
  rep["classification"] = cls;
  if (stable) {
    const auto w = scalar1d::eta_window(f, x_bar, cfg.params.at("eps"));
    rep["eta_window"] = {{"lower", w.lower}, {"upper", w.upper}};
  }
  art.extra["condition"] = rep;
  art.flags["stable_oscillation"] = stable;
  return art;
}

RunArtifacts run_orbit_predict(const ExperimentConfig& cfg) {
  const auto pred =
      scalar1d::solve_period2(cfg.params.at("mu"), cfg.params.at("eta"));
  const auto f = scalar1d::ScalarFunction::quartic(cfg.params.at("mu"));
  RunArtifacts art;
  art.traj.eta = cfg.params.at("eta");
  art.traj.points.push_back({pred.x_low});
  art.traj.points.push_back({pred.x_high});
  art.traj.scalars["loss"] = {f(pred.x_low), f(pred.x_high)};
  art.coord_names = {"x"};
  art.scalar_order = {"loss"};
  art.detected_orbit = nullptr;
  art.predicted_orbit = orbit_prediction_json(pred);
  return art;
}

RunArtifacts run_sharpness_trace(const ExperimentConfig& cfg) {
  const std::string& model = cfg.strings.at("model");
  const double mu = cfg.params.at("mu");
  const int steps = static_cast<int>(cfg.params.at("steps"));

  RunArtifacts art;
  if (model == "quartic1d") {
    const auto f = scalar1d::ScalarFunction::quartic(mu);
    const dynamics::GradFn grad = [f](const dynamics::Vector& th) {
      return dynamics::Vector{f.derivative(th[0], 1)};
    };
    const std::vector<dynamics::Probe> probes = {
        {"loss", [f](const dynamics::Vector& th) { return f(th[0]); }},
        {"sharpness", [grad, &cfg](const dynamics::Vector& th) {
           return fd_sharpness(grad, th, cfg.seed);
         }}};
    art.traj = dynamics::run_gd(grad, {cfg.params.at("x0")},
                                cfg.params.at("eta"), steps, probes);
    art.coord_names = {"x"};
  } else {
    const double eta = cfg.params.at("K") / mu;
    const dynamics::GradFn grad = [mu](const dynamics::Vector& th) {
      const double r = th[0] * th[1] - mu;
      return dynamics::Vector{r * th[1], r * th[0]};
    };
    const std::vector<dynamics::Probe> probes = {
        {"loss",
         [mu](const dynamics::Vector& th) {
           const double r = th[0] * th[1] - mu;
           return 0.5 * r * r;
         }},
        {"sharpness", [grad, &cfg](const dynamics::Vector& th) {
           return fd_sharpness(grad, th, cfg.seed);
         }}};
    art.traj = dynamics::run_gd(grad, {cfg.params.at("x0"),
                                       cfg.params.at("y0")},
                                eta, steps, probes);
    art.coord_names = {"x", "y"};
  }
  art.scalar_order = {"loss", "sharpness"};
  art.detected_orbit = nullptr;
  art.predicted_orbit = nullptr;
  return art;
}

RunArtifacts dispatch(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case Experiment::Oscillate1D: return run_oscillate1d(cfg);
    case Experiment::Balance2D: return run_balance2d(cfg);
    case Experiment::Neuron: return run_neuron(cfg);
    case Experiment::NeuronEmpirical: return run_neuron_empirical(cfg);
    case Experiment::MatfacSym: return run_matfac_sym(cfg);
    case Experiment::MatfacQuasi: return run_matfac_quasi(cfg);
    case Experiment::ConditionCheck: return run_condition_check(cfg);
    case Experiment::OrbitPredict: return run_orbit_predict(cfg);
    case Experiment::SharpnessTrace: return run_sharpness_trace(cfg);
  }
  throw Error("unreachable");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
    if (c == '{') return parse_json_config(text);
    break;
  }
  return parse_ini(text);
}

json config_echo(const ExperimentConfig& cfg) {
  json j;
  j["experiment"] = experiment_name(cfg.experiment);
  for (const auto& [k, v] : cfg.params) j[k] = v;
  for (const auto& [k, v] : cfg.strings) j[k] = v;
  j["seed"] = cfg.seed;
  j["output"] = cfg.output_dir;
  return j;
}

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

RunSummary run(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const json echo = config_echo(cfg);

  fs::create_directories(cfg.output_dir);
  {
    std::ofstream out(fs::path(cfg.output_dir) / "config.echo.json",
                      std::ios::binary);
    out << echo.dump(2) << '\n';
  }

  RunSummary sum;
  sum.j["version"] = kVersion;
  sum.j["experiment"] = experiment_name(cfg.experiment);
  sum.j["config"] = echo;
  sum.j["config_hash"] = hex64(fnv1a(echo.dump()));
  sum.j["seed"] = cfg.seed;

  std::optional<RunArtifacts> art;
  try {
    art = dispatch(cfg);
  } catch (const DivergenceError& e) {
    sum.j["divergence"] = {{"message", e.what()},
                           {"last_finite_step", e.last_finite_step},
                           {"last_finite_state", e.last_finite_state}};
    sum.passed = false;
  }

  if (art) {
    write_trajectory_csv(fs::path(cfg.output_dir) / "trajectory.csv",
                         art->traj, art->coord_names, art->scalar_order);
    sum.j["detected_orbit"] = art->detected_orbit;
    sum.j["predicted_orbit"] = art->predicted_orbit;
    if (art->max_deviation) sum.j["max_deviation"] = *art->max_deviation;
    json flags = json::object();
    for (const auto& [k, v] : art->flags) {
      flags[k] = v;
      if (!v) sum.passed = false;
    }
    sum.j["flags"] = flags;
    for (auto it = art->extra.begin(); it != art->extra.end(); ++it)
      sum.j[it.key()] = it.value();
  }
  sum.j["passed"] = sum.passed;
  sum.j["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();

  std::ofstream out(fs::path(cfg.output_dir) / "summary.json",
                    std::ios::binary);
  out << sum.j.dump(2) << '\n';
  if (!out) throw Error("write failed for summary.json");
  return sum;
}

}  // namespace eoslab::cli
