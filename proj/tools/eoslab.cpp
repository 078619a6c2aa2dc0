#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "eoslab/cli.hpp"
#include "eoslab/scalar1d.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw eoslab::Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("EOSLAB_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0')
    throw eoslab::Error("EOSLAB_SEED must be a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

// Precedence: CLI flag > EOSLAB_SEED > config.
void apply_seed(eoslab::cli::ExperimentConfig& cfg,
                const std::optional<std::uint64_t>& flag) {
  if (flag) {
    cfg.seed = *flag;
    return;
  }
  if (auto e = env_seed()) cfg.seed = *e;
}

int cmd_run(const std::string& file, bool strict, const std::string& out,
            const std::optional<std::uint64_t>& seed_flag) {
  auto cfg = eoslab::cli::parse_config(slurp(file));
  if (!out.empty()) cfg.output_dir = out;
  apply_seed(cfg, seed_flag);
  const auto sum = eoslab::cli::run(cfg);
  std::cout << sum.j.dump(2) << '\n';
  return strict && !sum.passed ? 1 : 0;
}

int cmd_batch(const std::string& dir, int jobs, bool strict,
              const std::string& out,
              const std::optional<std::uint64_t>& seed_flag) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".json" || ext == ".ini" || ext == ".cfg" || ext == ".conf")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "batch: no config files in " << dir << '\n';
    return 1;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<int> failures{0};
  std::mutex io;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      const fs::path& f = files[i];
      std::string line;
      try {
        auto cfg = eoslab::cli::parse_config(slurp(f));
        const fs::path base = out.empty() ? f.parent_path() : fs::path(out);
        cfg.output_dir = (base / (f.stem().string() + ".out")).string();
        apply_seed(cfg, seed_flag);
        const auto sum = eoslab::cli::run(cfg);
        if (!sum.passed) ++failures;
        line = f.filename().string() + ": " +
               (sum.passed ? "pass" : "FAIL") + " -> " + cfg.output_dir;
      } catch (const std::exception& e) {
        ++failures;
        line = f.filename().string() + ": ERROR " + e.what();
      }
      std::lock_guard<std::mutex> lock(io);
      std::cout << line << '\n';
    }
  };
  const int n = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int i = 0; i < n - 1; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return strict && failures.load() > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for gradient descent beyond the edge of "
               "stability"};
  app.require_subcommand(1);

  std::string config_file, out_dir, batch_dir;
  bool strict = false;
  std::uint64_t seed_val = 0;
  int jobs = 1;
  double mu = 1.0, eta = 1.05, x_bar = std::numeric_limits<double>::quiet_NaN();
  double amplitude = 1.0, lambda = 1.0;
  std::string fn = "quartic";

  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_file, "Config file (INI-style or JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_flag("--strict", strict, "Exit nonzero if any checked flag fails");
  run->add_option("--out", out_dir, "Output directory (overrides config)");
  auto* run_seed = run->add_option("--seed", seed_val, "Seed override");

  auto* orbit = app.add_subcommand("orbit", "Predict the period-2 orbit of "
                                            "the quartic");
  orbit->add_option("--mu", mu, "Quartic parameter")->required();
  orbit->add_option("--eta", eta, "Learning rate")->required();

  auto* check = app.add_subcommand("check-1d", "Stable-oscillation condition "
                                               "check for a 1-D objective");
  check->add_option("--fn", fn, "quartic | sine | quadratic");
  check->add_option("--mu", mu, "Quartic parameter");
  check->add_option("--amplitude", amplitude, "Sine amplitude");
  check->add_option("--lambda", lambda, "Quadratic curvature");
  auto* check_xbar = check->add_option("--x-bar", x_bar, "Minimum to test");
  check->add_option("--out", out_dir, "Output directory");

  auto* batch = app.add_subcommand("batch", "Run every config in a directory");
  batch->add_option("dir", batch_dir, "Directory of config files")
      ->required()
      ->check(CLI::ExistingDirectory);
  batch->add_option("--jobs", jobs, "Parallel workers")->default_val(1);
  batch->add_flag("--strict", strict, "Exit nonzero on any failed run");
  batch->add_option("--out", out_dir, "Base directory for outputs");
  auto* batch_seed = batch->add_option("--seed", seed_val, "Seed override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      std::optional<std::uint64_t> sf;
      if (run_seed->count()) sf = seed_val;
      return cmd_run(config_file, strict, out_dir, sf);
    }
    if (orbit->parsed()) {
      const auto p = eoslab::scalar1d::solve_period2(mu, eta);
      const char* stab = "none";
      switch (p.stability) {
        case eoslab::scalar1d::OrbitStability::ConvergentMonotone:
          stab = "convergent_monotone";
          break;
        case eoslab::scalar1d::OrbitStability::ConvergentOscillating:
          stab = "convergent_oscillating";
          break;
        case eoslab::scalar1d::OrbitStability::ExistsUnstable:
          stab = "exists_unstable";
          break;
        case eoslab::scalar1d::OrbitStability::None: break;
      }
      nlohmann::json j = {{"mu", p.mu}, {"eta", p.eta}, {"x_low", p.x_low},
                          {"x_high", p.x_high}, {"stability", stab}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (check->parsed()) {
      if (fn != "quartic" && fn != "sine" && fn != "quadratic")
        throw eoslab::PreconditionError(
            "check-1d: --fn must be quartic, sine or quadratic");
      eoslab::cli::ExperimentConfig cfg;
      cfg.experiment = eoslab::cli::Experiment::ConditionCheck;
      cfg.strings["fn"] = fn;
      cfg.params["mu"] = mu;
      cfg.params["amplitude"] = amplitude;
      cfg.params["lambda"] = lambda;
      cfg.params["eps"] = 0.1;
      cfg.params["x_bar"] = check_xbar->count()
                                ? x_bar
                                : std::numeric_limits<double>::quiet_NaN();
      cfg.output_dir = out_dir.empty() ? "out/check-1d" : out_dir;
      const auto sum = eoslab::cli::run(cfg);
      std::cout << sum.j["condition"].dump(2) << '\n';
      return 0;
    }
    if (batch->parsed()) {
      std::optional<std::uint64_t> sf;
      if (batch_seed->count()) sf = seed_val;
      return cmd_batch(batch_dir, jobs, strict, out_dir, sf);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
