#include "eitopt/errors.hpp"
#include "eitopt/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace eitopt;
constexpr double kPi = std::numbers::pi;

namespace {

DesignSetup two_electrodes(double h) {
  DesignSetup s;
  s.mesh.target_h = h;
  s.initial = ElectrodeLayout::equidistant(2, kPi / 16).with_angles({0.0, kPi / 2});
  s.prior.kind = PriorKind::White;
  s.prior.kappa = 0.2;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("central difference weights are exact on polynomials") {
  for (int order : {2, 4, 6, 8}) {
    const auto w = central_difference_weights(order);
    const int half = order / 2;
    REQUIRE(static_cast<int>(w.size()) == order + 1);
    for (int deg = 0; deg <= order; ++deg) {
      const double x = 0.3, h = 0.1;
      double fd = 0.0;
      for (int k = -half; k <= half; ++k) fd += w[k + half] * std::pow(x + k * h, deg) / h;
      const double exact = deg == 0 ? 0.0 : deg * std::pow(x, deg - 1);
      CHECK(fd == doctest::Approx(exact).epsilon(1e-10).scale(1.0));
    }
  }
  CHECK_THROWS_AS(central_difference_weights(3), ConfigError);
}

TEST_CASE("brute-force enumeration") {
  CHECK(brute_force_count(4, 24) == 42504);
  CHECK(brute_force_count(2, 8) == 56);
  CHECK(brute_force_count(5, 4) == 0);

  auto s = two_electrodes(0.2);
  const DesignEvaluator ev(s);
  BruteForceOptions opt;
  opt.resolution = 8;
  const auto r = brute_force(ev, opt, 0.0, 1);
  REQUIRE(static_cast<long>(r.tuples.size()) == 56);
  for (const auto& t : r.tuples) {
    CHECK(t[0] < t[1]);
    CHECK(t[1] < t[0] + 8);
  }
  for (std::size_t i = 0; i < r.tuples.size(); ++i) {
    CHECK(r.psi_a[r.argmin_a] <= r.psi_a[i]);
    CHECK(r.psi_d[r.argmin_d] <= r.psi_d[i]);
  }
  // The grid contains the initial layout.
  CHECK(r.psi_a[r.argmin_a] <= ev.value(s.initial) + 1e-12);

  const auto threaded = brute_force(ev, opt, 0.0, 3);
  CHECK(threaded.psi_a == r.psi_a);
  CHECK(threaded.argmin_d == r.argmin_d);

  const auto j = to_json(r);
  CHECK(j.at("tuples").size() == 56);
  CHECK(j.at("argmin_a").at("theta_minus").size() == 2);

  opt.resolution = 24;
  opt.max_evaluations = 100;
  CHECK_THROWS_WITH_AS(brute_force(ev, opt), doctest::Contains("552 evaluations"), ConfigError);
}

TEST_CASE("two-electrode grid minimum agrees with the optimizer") {
  const auto s = two_electrodes(0.15);
  const DesignEvaluator ev(s);
  BruteForceOptions opt;
  opt.resolution = 16;
  const auto grid = brute_force(ev, opt, 0.0, 1);
  const auto st = optimize(design_objective(ev), s.initial);
  const auto best = grid.layout(s.initial, grid.argmin_a);
  const double cell = 2.0 * kPi / opt.resolution;
  // The disk makes psi nearly rotation invariant, so compare separations.
  auto sep = [](const ElectrodeLayout& l) { return wrap_angle(l.theta_minus[1] - l.theta_minus[0]); };
  CHECK(std::abs(sep(st.layout) - sep(best)) <= cell);
  CHECK(st.value <= grid.psi_a[grid.argmin_a] + 1e-3 * std::abs(grid.psi_a[grid.argmin_a]));
}

TEST_CASE("derivative comparison") {
  FdCheckOptions fd;
  fd.step_min = 1e-3;
  fd.step_max = 1e-2;
  fd.step_count = 2;
  fd.remesh = false;
  const auto c = derivative_comparison(two_electrodes(0.05), fd);
  CHECK(c.entries.size() == 8);
  for (int order : {6, 8}) {
    const auto& e = c.find("morph", order, 1e-3);
    CHECK(e.step == doctest::Approx(1e-3));
    CHECK(e.rel_a <= 0.05);
    CHECK(e.rel_d <= 0.05);
    CHECK(e.angle_a <= 5.0);
    CHECK(e.angle_d <= 5.0);
    CHECK(e.rel_measurements <= 0.05);
  }
  const auto& e2 = c.find("morph", 2, 1e-2);
  const auto& e4 = c.find("morph", 4, 1e-2);
  const auto& e6 = c.find("morph", 6, 1e-2);
  const auto& e8 = c.find("morph", 8, 1e-2);
  CHECK((e2.fd_d - e4.fd_d).norm() > (e6.fd_d - e8.fd_d).norm());
  CHECK((e2.fd_a - e4.fd_a).norm() > (e6.fd_a - e8.fd_a).norm());
  const auto j = to_json(c);
  CHECK(j.at("entries").size() == 8);
  CHECK(j.at("analytic_a").size() == 2);
  CHECK_THROWS_AS(c.find("remesh", 2, 1e-3), ConfigError);
}

TEST_CASE("run artifacts are complete and reproducible") {
  ExperimentConfig c;
  c.name = "tiny";
  c.design.mesh.target_h = 0.2;
  c.design.background_spacing = 0.2;
  c.design.initial = ElectrodeLayout::equidistant(3, kPi / 16).with_angles({0.0, 1.5, 3.5});
  c.optimizer.max_iters = 2;
  const auto dir = std::filesystem::temp_directory_path() / "eitopt_run_test";
  std::filesystem::remove_all(dir);
  const auto r = run_case(c);
  write_run_artifacts(r, (dir / "a").string());
  for (const char* f : {"config.json", "history.jsonl", "final_layout.json", "variance_fields.json", "summary.json"})
    CHECK(std::filesystem::exists(dir / "a" / f));

  const auto vf = nlohmann::json::parse(slurp(dir / "a" / "variance_fields.json"));
  const auto nodes = vf.at("background").at("nodes").size();
  CHECK(vf.at("prior_variance").size() == nodes);
  CHECK(vf.at("initial").at("posterior_variance").size() == nodes);
  CHECK(vf.at("final").at("layout").at("theta_minus").size() == 3);
  for (std::size_t i = 0; i < nodes; ++i)
    CHECK(vf["final"]["posterior_variance"][i].get<double>() <= vf["prior_variance"][i].get<double>() + 1e-12);

  std::istringstream hist(slurp(dir / "a" / "history.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(hist, line)) ++lines;
  CHECK(lines == r.state.history.size());

  // Re-running from the echoed config reproduces every artifact.
  const auto echoed = load_config((dir / "a" / "config.json").string());
  write_run_artifacts(run_case(echoed), (dir / "b").string());
  for (const char* f : {"config.json", "history.jsonl", "final_layout.json", "variance_fields.json", "summary.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  std::filesystem::remove_all(dir);
}

TEST_CASE("errors name the failing stage") {
  ExperimentConfig c;
  c.design.mesh.target_h = 0.2;
  c.design.background_spacing = 0.2;
  c.design.initial = ElectrodeLayout::equidistant(3, kPi / 16);
  c.optimizer.max_iters = 0;
  c.evaluate = true;
  c.evaluation.fine_factor = 0.9;
  CHECK_THROWS_WITH_AS(run_case(c), doctest::Contains("evaluate:"), ConfigError);
  c.design.initial = c.design.initial.with_angles({0.0, 0.1, 3.0});
  CHECK_THROWS_WITH_AS(run_case(c), doctest::Contains("setup:"), ConfigError);
}

TEST_CASE("mesh dump") {
  ExperimentConfig c;
  c.design.mesh.target_h = 0.2;
  c.design.initial = ElectrodeLayout::equidistant(3, kPi / 16);
  const auto j = mesh_dump_json(c);
  CHECK(j.at("mesh").at("nodes").size() > 10);
  CHECK(j.at("background").at("nodes").size() > 10);
  CHECK(j.at("layout").at("theta_plus").size() == 3);
}
