#include "eitopt/optimizer.hpp"

#include "eitopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace eitopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double min_gap(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  const auto g = gap_lengths(curve, layout);
  if (!g.admissible) return -kInf;
  return *std::min_element(g.gaps.begin(), g.gaps.end());
}

double safe_value(const Objective& objective, const ElectrodeLayout& layout) {
  try {
    const double v = objective.value(layout);
    return std::isfinite(v) ? v : kInf;
  } catch (const NumericalError&) {
    return kInf;
  }
}

}  // namespace

Objective design_objective(const DesignEvaluator& evaluator) {
  Objective obj;
  obj.curve = evaluator.curve();
  obj.value = [&evaluator](const ElectrodeLayout& l) { return evaluator.value(l); };
  obj.value_and_gradient = [&evaluator](const ElectrodeLayout& l) {
    auto p = evaluator.evaluate(l, true);
    return std::make_pair(p.value, std::move(p.gradient));
  };
  return obj;
}

std::string to_string(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::Converged: return "converged";
    case OptimizerStatus::MaxIterations: return "max-iterations";
    case OptimizerStatus::Stationary: return "stationary within tolerance";
  }
  return "unknown";
}

nlohmann::json to_json(const IterationRecord& r) {
  return {{"iteration", r.iteration}, {"theta_minus", r.theta_minus}, {"psi", r.value},
          {"grad_norm", r.gradient_norm}, {"t_min", r.t_min}, {"step_bound", r.step_bound}};
}

ElectrodeLayout step_layout(const ElectrodeLayout& layout, const Eigen::VectorXd& direction, double t) {
  if (direction.size() != layout.size()) throw ConfigError("direction length differs from electrode count");
  auto angles = layout.theta_minus;
  for (int m = 0; m < layout.size(); ++m) angles[m] += t * direction[m];
  return layout.with_angles(std::move(angles));
}

double admissible_step(const BoundaryCurve& curve, const ElectrodeLayout& layout,
                       const Eigen::VectorXd& direction, double gap_floor, double max_step) {
  if (min_gap(curve, layout) < gap_floor) throw GeometryError("start layout violates the gap floor");
  auto ok = [&](double t) { return min_gap(curve, step_layout(layout, direction, t)) >= gap_floor; };
  // Scan for the first violation, then bisect it.
  constexpr int kScan = 64;
  double lo = 0.0;
  for (int i = 1; i <= kScan; ++i) {
    const double t = max_step * i / kScan;
    if (!ok(t)) {
      double hi = t;
      for (int k = 0; k < 60 && hi - lo > 1e-14; ++k) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
      }
      return lo;
    }
    lo = t;
  }
  return max_step;
}

LineSearchResult line_search(const Objective& objective, const ElectrodeLayout& layout, double value,
                             const Eigen::VectorXd& direction, double gap_floor,
                             const OptimizerOptions& options) {
  LineSearchResult r;
  r.value = value;
  r.step_bound = admissible_step(objective.curve, layout, direction, gap_floor, options.max_step);
  if (!(r.step_bound > 0.0)) return r;

  auto f = [&](double t) {
    ++r.evaluations;
    const double v = safe_value(objective, step_layout(layout, direction, t));
    if (v < r.value) {
      r.value = v;
      r.t_min = t;
    }
    return v;
  };

  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = r.step_bound;
  f(b);
  int budget = std::max(options.golden_evaluations, 2);
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  budget -= 2;
  for (; budget > 0; --budget) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  r.success = r.t_min > 0.0;
  return r;
}

OptimizerState optimize(const Objective& objective, const ElectrodeLayout& initial,
                        const OptimizerOptions& options, std::ostream* progress) {
  const auto gaps = gap_lengths(objective.curve, initial);
  if (!gaps.admissible) throw GeometryError("initial layout is inadmissible");
  OptimizerState s;
  s.layout = initial;
  s.gap_floor = options.gap_floor_fraction *
                std::accumulate(gaps.gaps.begin(), gaps.gaps.end(), 0.0) / static_cast<double>(gaps.gaps.size());

  auto record = [&](double t_min) {
    IterationRecord rec{s.iteration, s.layout.theta_minus, s.value, s.gradient.norm(), t_min, s.step_bound};
    if (progress) *progress << to_json(rec).dump() << '\n';
    s.history.push_back(std::move(rec));
  };

  std::tie(s.value, s.gradient) = objective.value_and_gradient(s.layout);
  ++s.evaluations;
  if (!std::isfinite(s.value)) throw NumericalError("objective is not finite at the initial layout");
  record(0.0);

  while (true) {
    if (s.iteration >= options.max_iters) {
      s.status = OptimizerStatus::MaxIterations;
      break;
    }
    const double gnorm = s.gradient.norm();
    if (!(gnorm > 0.0)) {
      s.status = OptimizerStatus::Stationary;
      break;
    }
    const Eigen::VectorXd dir = -s.gradient / gnorm;
    const auto ls = line_search(objective, s.layout, s.value, dir, s.gap_floor, options);
    s.evaluations += ls.evaluations;
    s.step_bound = ls.step_bound;
    if (!ls.success) {
      s.status = OptimizerStatus::Stationary;
      break;
    }
    const double previous = s.value;
    s.layout = step_layout(s.layout, dir, ls.t_min);
    std::tie(s.value, s.gradient) = objective.value_and_gradient(s.layout);
    ++s.evaluations;
    ++s.iteration;
    record(ls.t_min);
    if (previous - s.value < options.tol_rel * std::abs(previous)) {
      s.status = OptimizerStatus::Converged;
      break;
    }
  }
  return s;
}

}  // namespace eitopt
