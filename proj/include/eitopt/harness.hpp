#pragma once

#include "eitopt/config.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace eitopt {

struct RunResult {
  ExperimentConfig config;
  OptimizerState state;
  DesignPoint initial;
  DesignPoint final;
  Eigen::VectorXd prior_variance;  // on background nodes
  std::optional<EvaluationReport> evaluation;
  BackgroundMesh background;
};

/// Optimizes the layout of `config` (and runs the Monte-Carlo comparison when enabled).
/// Errors carry the failing stage in their message.
RunResult run_case(const ExperimentConfig& config, std::ostream* progress = nullptr);

/// Variance fields, layouts and the background triangulation.
nlohmann::json variance_fields_json(const RunResult& r);
nlohmann::json run_summary_json(const RunResult& r);

/// Writes config.json, history.jsonl, final_layout.json, variance_fields.json,
/// summary.json and (if present) evaluation.json into `dir`.
void write_run_artifacts(const RunResult& r, const std::string& dir);

struct BruteForceResult {
  int resolution = 0;
  std::vector<double> grid;               // candidate start angles
  std::vector<std::vector<int>> tuples;   // grid indices per evaluation, unwrapped (i0 < i1 < ... < i0 + resolution)
  std::vector<double> psi_a, psi_d;       // alpha * penalty + trace / log det; +inf where inadmissible
  int argmin_a = -1, argmin_d = -1;

  ElectrodeLayout layout(const ElectrodeLayout& like, int index) const;
};

/// Number of order-preserving tuples with the feeding electrode first.
long brute_force_count(int electrodes, int resolution);

/// Exhaustive evaluation over grid angles offset + 2 pi k / resolution.
/// Refuses (ConfigError with the budget estimate) when the count exceeds max_evaluations.
/// `threads` = 0 uses the hardware concurrency.
BruteForceResult brute_force(const DesignEvaluator& evaluator, const BruteForceOptions& options,
                             double offset = 0.0, unsigned threads = 0,
                             const std::function<void(long, long)>& progress = {});

nlohmann::json to_json(const BruteForceResult& r);

/// Central-difference weights for d/dx with the given even order, c_k for k = -order/2 .. order/2.
std::vector<double> central_difference_weights(int order);

struct FdEntry {
  std::string mode;  // "morph" or "remesh"
  int order = 0;
  double step = 0.0;
  Eigen::VectorXd fd_a, fd_d;
  double rel_a = 0.0, rel_d = 0.0;
  double angle_a = 0.0, angle_d = 0.0;  // degrees
  double rel_measurements = -1.0;       // Frobenius error of d(stacked U)/d theta (morph only)
};

struct FdComparison {
  ElectrodeLayout layout;
  Eigen::VectorXd analytic_a, analytic_d;
  Eigen::MatrixXd analytic_measurements;  // (M N) x M
  std::vector<FdEntry> entries;

  /// Entry for (mode, order, step), nearest step.
  const FdEntry& find(const std::string& mode, int order, double step) const;
};

/// Analytic criterion gradients and measurement derivatives against central differences.
FdComparison derivative_comparison(const ExperimentConfig& config);
FdComparison derivative_comparison(const DesignSetup& setup, const FdCheckOptions& options);

nlohmann::json to_json(const FdComparison& c);

double angle_between_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Mesh of the initial layout plus the background triangulation.
nlohmann::json mesh_dump_json(const ExperimentConfig& config);

}  // namespace eitopt
