#include "eitopt/errors.hpp"
#include "eitopt/optimizer.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace eitopt;
constexpr double kPi = std::numbers::pi;

namespace {

Eigen::VectorXd angles(const ElectrodeLayout& l) {
  return Eigen::Map<const Eigen::VectorXd>(l.theta_minus.data(), l.size());
}

// psi(theta) = |theta - target|^2 on the disk.
Objective bowl(const Eigen::VectorXd& target) {
  Objective obj;
  obj.value = [target](const ElectrodeLayout& l) { return (angles(l) - target).squaredNorm(); };
  obj.value_and_gradient = [target](const ElectrodeLayout& l) {
    const Eigen::VectorXd d = angles(l) - target;
    return std::make_pair(d.squaredNorm(), Eigen::VectorXd(2.0 * d));
  };
  return obj;
}

ElectrodeLayout four() { return ElectrodeLayout::equidistant(4, 0.2); }

}  // namespace

TEST_CASE("line search finds the minimizer of a quadratic along the ray") {
  const auto l = four();
  Eigen::VectorXd d(4);
  d << 1.0, 2.0, -1.0, 0.5;
  d.normalize();
  const Eigen::VectorXd target = angles(l) + 0.2 * d;
  const auto obj = bowl(target);
  OptimizerOptions opt;
  const auto r = line_search(obj, l, obj.value(l), d, 0.01, opt);
  CHECK(r.success);
  CHECK(std::abs(r.t_min - 0.2) < 1e-3);
  CHECK(r.value <= obj.value(l));
  CHECK(r.evaluations == opt.golden_evaluations + 1);
}

TEST_CASE("line search boundary cases") {
  const auto l = four();
  Eigen::VectorXd d(4);
  d << 0.3, -0.2, 0.1, 0.4;
  d.normalize();
  OptimizerOptions opt;
  Objective down;
  down.value = [d](const ElectrodeLayout& x) { return -d.dot(angles(x)); };
  const auto r = line_search(down, l, down.value(l), d, 0.01, opt);
  CHECK(r.success);
  CHECK(r.t_min == r.step_bound);

  Objective up;
  up.value = [d](const ElectrodeLayout& x) { return d.dot(angles(x)); };
  const auto r2 = line_search(up, l, up.value(l), d, 0.01, opt);
  CHECK_FALSE(r2.success);
  CHECK(r2.t_min == 0.0);
  CHECK(r2.value == up.value(l));
}

TEST_CASE("step bound stops short of electrode collision") {
  const auto l = ElectrodeLayout::equidistant(4, 0.2).with_angles({0.0, 1.0, 3.0, 4.5});
  Eigen::VectorXd d(4);
  d << 1.0, -1.0, 0.0, 0.0;
  d.normalize();
  const double floor = 0.05;
  const double collision = 0.8 / std::sqrt(2.0);
  const double bound = admissible_step(BoundaryCurve::disk(), l, d, floor, 1.0);
  CHECK(bound < collision);
  CHECK(bound == doctest::Approx((0.8 - floor) / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(admissible_step(BoundaryCurve::disk(), l, d, floor, 0.1) == 0.1);
  CHECK_THROWS_AS(admissible_step(BoundaryCurve::disk(), l, d, 1.0, 1.0), GeometryError);

  // On a non-circular boundary the bound still keeps every gap at the floor.
  const auto p = BoundaryCurve::peanut();
  const double pb = admissible_step(p, l, d, floor, 1.0);
  const auto g = gap_lengths(p, step_layout(l, d, pb));
  CHECK(*std::min_element(g.gaps.begin(), g.gaps.end()) >= floor);
  CHECK(*std::min_element(g.gaps.begin(), g.gaps.end()) < floor + 1e-9);
}

TEST_CASE("zero gradient is stationary at once") {
  Objective flat;
  flat.value = [](const ElectrodeLayout&) { return 1.0; };
  flat.value_and_gradient = [](const ElectrodeLayout& l) {
    return std::make_pair(1.0, Eigen::VectorXd(Eigen::VectorXd::Zero(l.size())));
  };
  const auto s = optimize(flat, four());
  CHECK(s.status == OptimizerStatus::Stationary);
  CHECK(s.iteration == 0);
  CHECK(s.layout.theta_minus == four().theta_minus);
  CHECK(s.history.size() == 1);
}

TEST_CASE("steepest descent on a bowl: monotone, admissible, deterministic, logged") {
  const auto l = four();
  Eigen::VectorXd target(4);
  target << 0.3, 1.2, 3.5, 4.4;
  auto obj = bowl(target);
  std::vector<ElectrodeLayout> seen;
  const auto inner = obj.value;
  obj.value = [&](const ElectrodeLayout& x) {
    seen.push_back(x);
    return inner(x);
  };
  std::ostringstream log;
  const auto s = optimize(obj, l, {}, &log);
  CHECK(s.status != OptimizerStatus::MaxIterations);
  CHECK((angles(s.layout) - target).norm() < 1e-3);
  for (std::size_t k = 1; k < s.history.size(); ++k) CHECK(s.history[k].value <= s.history[k - 1].value);
  for (const auto& x : seen) {
    const auto g = gap_lengths(obj.curve, x);
    REQUIRE(g.admissible);
    CHECK(*std::min_element(g.gaps.begin(), g.gaps.end()) >= s.gap_floor - 1e-12);
  }
  const double avg_gap = (2.0 * kPi - 4 * 0.2) / 4;
  CHECK(s.gap_floor == doctest::Approx(0.02 * avg_gap));

  std::istringstream lines(log.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("iteration").get<int>() == s.history[count].iteration);
    CHECK(j.at("theta_minus").size() == 4);
    for (const char* key : {"psi", "grad_norm", "t_min", "step_bound"}) CHECK(j.contains(key));
    ++count;
  }
  CHECK(count == s.history.size());

  const auto again = optimize(bowl(target), l);
  REQUIRE(again.history.size() == s.history.size());
  for (std::size_t k = 0; k < s.history.size(); ++k) {
    CHECK(again.history[k].theta_minus == s.history[k].theta_minus);
    CHECK(again.history[k].value == s.history[k].value);
  }
}

TEST_CASE("iteration cap") {
  OptimizerOptions opt;
  opt.max_iters = 2;
  Eigen::VectorXd target(4);
  target << 0.3, 1.2, 3.5, 4.4;
  const auto s = optimize(bowl(target), four(), opt);
  CHECK(s.iteration <= 2);
  if (s.status == OptimizerStatus::MaxIterations) CHECK(s.iteration == 2);
}

TEST_CASE("design optimization decreases the criterion") {
  DesignSetup setup;
  setup.mesh.target_h = 0.15;
  setup.initial = ElectrodeLayout::equidistant(4, kPi / 16);
  setup.prior.kind = PriorKind::DiskInclusion;
  setup.prior.center = Point2(0.5 * std::cos(2.2), 0.5 * std::sin(2.2));
  const DesignEvaluator ev(setup);
  OptimizerOptions opt;
  opt.max_iters = 4;
  const auto s = optimize(design_objective(ev), setup.initial, opt);
  CHECK(s.iteration >= 1);
  CHECK(s.value < s.history.front().value);
  for (std::size_t k = 1; k < s.history.size(); ++k) CHECK(s.history[k].value <= s.history[k - 1].value);
  const auto again = optimize(design_objective(ev), setup.initial, opt);
  CHECK(again.layout.theta_minus == s.layout.theta_minus);
}
