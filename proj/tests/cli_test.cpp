#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "eoslab/cli.hpp"
#include "eoslab/errors.hpp"

using namespace eoslab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("eoslab_test_" + tag);
  fs::remove_all(p);
  return p;
}

const char* kOscConfig =
    "[oscillate1d]\n"
    "mu = 1.0\n"
    "eta = 1.05\n"
    "x0 = 0.5\n"
    "steps = 2000\n";

}  // namespace

TEST_CASE("INI config parsing") {
  SUBCASE("minimal config with defaults") {
    const auto cfg = cli::parse_config(kOscConfig);
    CHECK(cfg.experiment == cli::Experiment::Oscillate1D);
    CHECK(cfg.params.at("mu") == 1.0);
    CHECK(cfg.params.at("steps") == 2000.0);
    CHECK(cfg.params.at("tol") == 1e-9);  // default filled in
    CHECK(cfg.seed == 0);
  }
  SUBCASE("comments, blank lines and seed/output keys") {
    const auto cfg = cli::parse_config(
        "# comment\n\n[balance2d]\nmu = 1\nK = 1.25\nx0 = 1.3\ny0 = 0.8\n"
        "; another comment\nseed = 7\noutput = /tmp/somewhere\n");
    CHECK(cfg.experiment == cli::Experiment::Balance2D);
    CHECK(cfg.seed == 7);
    CHECK(cfg.output_dir == "/tmp/somewhere");
  }
  SUBCASE("unknown key is rejected with its line") {
    try {
      cli::parse_config("[oscillate1d]\nmu = 1\neta = 1.05\nx0 = 0.5\nzz = 3\n");
      FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
      CHECK(std::string(e.what()).find("zz") != std::string::npos);
      CHECK(std::string(e.what()).find("line 5") != std::string::npos);
    }
  }
  SUBCASE("missing required key names the key") {
    try {
      cli::parse_config("[oscillate1d]\nmu = 1\neta = 1.05\n");
      FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
      CHECK(std::string(e.what()).find("x0") != std::string::npos);
    }
  }
  SUBCASE("non-numeric value is rejected") {
    CHECK_THROWS_AS(
        cli::parse_config("[oscillate1d]\nmu = abc\neta = 1.05\nx0 = 0.5\n"),
        PreconditionError);
  }
  SUBCASE("unknown experiment") {
    CHECK_THROWS_AS(cli::parse_config("[warp_drive]\nmu = 1\n"),
                    PreconditionError);
  }
  SUBCASE("duplicate key") {
    CHECK_THROWS_AS(
        cli::parse_config("[oscillate1d]\nmu = 1\nmu = 2\neta = 1.05\nx0 = 1\n"),
        PreconditionError);
  }
  SUBCASE("theorem-mode range check for balance2d") {
    CHECK_THROWS_AS(
        cli::parse_config("[balance2d]\nmu = 1\nK = 1.6\nx0 = 1.3\ny0 = 0.8\n"),
        PreconditionError);
    CHECK_NOTHROW(cli::parse_config(
        "[balance2d]\nmu = 1\nK = 1.6\nx0 = 1.3\ny0 = 0.8\ntheorem_mode = 0\n"));
  }
}

TEST_CASE("JSON config parsing") {
  const auto cfg = cli::parse_config(
      R"({"experiment": "oscillate1d", "mu": 1.0, "eta": 1.05, "x0": 0.5,
          "steps": 100, "seed": 3})");
  CHECK(cfg.experiment == cli::Experiment::Oscillate1D);
  CHECK(cfg.params.at("steps") == 100.0);
  CHECK(cfg.seed == 3);
  CHECK_THROWS_AS(cli::parse_config("{ not json"), PreconditionError);
  CHECK_THROWS_AS(cli::parse_config(R"({"mu": 1.0})"), PreconditionError);
}

TEST_CASE("config echo includes every default") {
  const auto cfg = cli::parse_config(kOscConfig);
  const auto echo = cli::config_echo(cfg);
  CHECK(echo.at("experiment") == "oscillate1d");
  CHECK(echo.at("tol") == 1e-9);
  CHECK(echo.contains("seed"));
  CHECK(echo.contains("output"));
}

TEST_CASE("format_double round-trips") {
  for (const double x : {0.0, 1.0, -1.5, 0.1, 1e-300, 3.141592653589793,
                         0.8728715609439694}) {
    CHECK(std::stod(cli::format_double(x)) == x);
  }
}

TEST_CASE("oscillate1d run writes artifacts and passes its checks") {
  auto cfg = cli::parse_config(kOscConfig);
  const fs::path out = fresh_dir("osc");
  cfg.output_dir = out.string();
  const auto sum = cli::run(cfg);
  CHECK(sum.passed);
  CHECK(sum.j.at("flags").at("period_detected") == true);
  CHECK(sum.j.at("flags").at("matches_prediction") == true);
  CHECK(sum.j.at("detected_orbit").at("period") == 2);
  CHECK(sum.j.at("version") == std::string(cli::kVersion));
  CHECK(sum.j.at("config_hash").get<std::string>().size() == 16);

  REQUIRE(fs::exists(out / "trajectory.csv"));
  REQUIRE(fs::exists(out / "summary.json"));
  REQUIRE(fs::exists(out / "config.echo.json"));

  const std::string csv = slurp(out / "trajectory.csv");
  CHECK(csv.rfind("step,x,loss,sharpness\n", 0) == 0);
  // steps+1 data rows plus the header.
  CHECK(static_cast<int>(std::count(csv.begin(), csv.end(), '\n')) == 2002);
  fs::remove_all(out);
}

TEST_CASE("reruns with the same seed are bit-identical") {
  auto cfg = cli::parse_config(
      "[neuron_empirical]\nn = 300\nd = 3\neta = 2.2\nv0 = 0.1\nwy0 = 0.1\n"
      "steps = 50\nseed = 11\n");
  const fs::path a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
  cfg.output_dir = a.string();
  cli::run(cfg);
  cfg.output_dir = b.string();
  cli::run(cfg);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "config.echo.json") != "");
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("balance2d run raises its invariant flags") {
  auto cfg = cli::parse_config(
      "[balance2d]\nmu = 1\nK = 1.25\nx0 = 1.2\ny0 = 1.0\nsteps = 4000\n");
  const fs::path out = fresh_dir("bal");
  cfg.output_dir = out.string();
  const auto sum = cli::run(cfg);
  CHECK(sum.passed);
  CHECK(sum.j.at("flags").at("gap_strictly_decreasing") == true);
  CHECK(sum.j.at("flags").at("recursions_hold") == true);
  CHECK(sum.j.at("flags").at("period_detected") == true);
  fs::remove_all(out);
}

TEST_CASE("condition_check reports classification and window") {
  auto cfg = cli::parse_config("[condition_check]\nfn = sine\n");
  const fs::path out = fresh_dir("cond");
  cfg.output_dir = out.string();
  const auto sum = cli::run(cfg);
  CHECK(sum.passed);
  const auto& rep = sum.j.at("condition");
  CHECK(rep.at("classification") == "higher_order_stable");
  CHECK(rep.at("k") == 4);
  CHECK(rep.at("eta_window").at("lower").get<double>() ==
        doctest::Approx(2.0));
  fs::remove_all(out);

  auto q = cli::parse_config("[condition_check]\nfn = quadratic\n");
  const fs::path out2 = fresh_dir("cond2");
  q.output_dir = out2.string();
  const auto sq = cli::run(q);
  CHECK_FALSE(sq.passed);  // no stable oscillation for the quadratic
  CHECK(sq.j.at("condition").at("classification") == "not_applicable");
  fs::remove_all(out2);
}

TEST_CASE("a diverging run is recorded, not thrown") {
  auto cfg = cli::parse_config(
      "[balance2d]\nmu = 1\nK = 1.45\nx0 = 40\ny0 = 40\nsteps = 200\n");
  const fs::path out = fresh_dir("div");
  cfg.output_dir = out.string();
  const auto sum = cli::run(cfg);
  CHECK_FALSE(sum.passed);
  CHECK(sum.j.contains("divergence"));
  CHECK(sum.j.at("passed") == false);
  REQUIRE(fs::exists(out / "config.echo.json"));  // written before dispatch
  fs::remove_all(out);
}

TEST_CASE("orbit_predict emits the closed-form pair") {
  auto cfg = cli::parse_config("[orbit_predict]\nmu = 1\neta = 1.05\n");
  const fs::path out = fresh_dir("orb");
  cfg.output_dir = out.string();
  const auto sum = cli::run(cfg);
  CHECK(sum.passed);
  CHECK(sum.j.at("predicted_orbit").at("x_low").get<double>() ==
        doctest::Approx(0.8728715609439694).epsilon(1e-12));
  CHECK(sum.j.at("predicted_orbit").at("stability") == "convergent_monotone");
  fs::remove_all(out);
}

TEST_CASE("sharpness_trace crosses 2/eta on the quartic") {
  auto cfg = cli::parse_config(
      "[sharpness_trace]\nmodel = quartic1d\nmu = 1\neta = 1.05\nx0 = 0.5\n"
      "steps = 400\n");
  const fs::path out = fresh_dir("sharp");
  cfg.output_dir = out.string();
  const auto sum = cli::run(cfg);
  CHECK(sum.passed);
  const std::string csv = slurp(out / "trajectory.csv");
  CHECK(csv.rfind("step,x,loss,sharpness\n", 0) == 0);
  // Tail alternates around the orbit, whose mean curvature exceeds 2/eta
  // at one endpoint; simply require some recorded sharpness above 2/eta.
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  bool above = false;
  while (std::getline(in, line)) {
    const auto pos = line.rfind(',');
    if (std::stod(line.substr(pos + 1)) > 2.0 / 1.05) above = true;
  }
  CHECK(above);
  fs::remove_all(out);
}
