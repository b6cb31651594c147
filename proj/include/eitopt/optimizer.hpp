#pragma once

#include "eitopt/design.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace eitopt {

/// The function minimized over electrode angles. `value` returns +infinity where it cannot be evaluated.
struct Objective {
  BoundaryCurve curve = BoundaryCurve::disk();
  std::function<double(const ElectrodeLayout&)> value;
  std::function<std::pair<double, Eigen::VectorXd>(const ElectrodeLayout&)> value_and_gradient;
};

/// Objective backed by a design evaluator (value, then value and gradient of the chosen criterion).
Objective design_objective(const DesignEvaluator& evaluator);

struct OptimizerOptions {
  double tol_rel = 1e-6;
  int max_iters = 200;
  int golden_evaluations = 20;
  double max_step = 0.5;             // radians, along the unit direction
  double gap_floor_fraction = 0.02;  // of the average initial gap
};

enum class OptimizerStatus { Converged, MaxIterations, Stationary };

std::string to_string(OptimizerStatus s);

struct IterationRecord {
  int iteration = 0;
  std::vector<double> theta_minus;
  double value = 0.0;
  double gradient_norm = 0.0;
  double t_min = 0.0;
  double step_bound = 0.0;
};

nlohmann::json to_json(const IterationRecord& r);

struct OptimizerState {
  ElectrodeLayout layout;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iteration = 0;
  double step_bound = 0.0;
  double gap_floor = 0.0;
  int evaluations = 0;
  OptimizerStatus status = OptimizerStatus::MaxIterations;
  std::vector<IterationRecord> history;  // record 0 is the initial layout
};

/// Largest t in [0, max_step] with every gap of theta + s * direction at least `gap_floor` for all s <= t.
double admissible_step(const BoundaryCurve& curve, const ElectrodeLayout& layout,
                       const Eigen::VectorXd& direction, double gap_floor, double max_step);

struct LineSearchResult {
  double t_min = 0.0;  // 0 when no trial point improved on the start
  double value = 0.0;
  double step_bound = 0.0;
  int evaluations = 0;
  bool success = false;
};

/// Golden-section search of t -> psi(theta + t * direction) on [0, step bound];
/// the bound itself is also tried.  `direction` is a unit descent direction.
LineSearchResult line_search(const Objective& objective, const ElectrodeLayout& layout, double value,
                             const Eigen::VectorXd& direction, double gap_floor,
                             const OptimizerOptions& options);

/// Moves every electrode start angle by t * direction.
ElectrodeLayout step_layout(const ElectrodeLayout& layout, const Eigen::VectorXd& direction, double t);

/// Steepest descent from `initial`.  When `progress` is set, one JSON line is written per iteration.
OptimizerState optimize(const Objective& objective, const ElectrodeLayout& initial,
                        const OptimizerOptions& options = {}, std::ostream* progress = nullptr);

}  // namespace eitopt
