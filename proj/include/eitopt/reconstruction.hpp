#pragma once

#include "eitopt/design.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace eitopt {

/// Stacked potentials as a function of background conductivity.
struct ForwardModel {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> predict;
  std::function<std::pair<Eigen::VectorXd, Eigen::MatrixXd>(const Eigen::VectorXd&)> predict_with_jacobian;
};

/// CEM model on a fixed mesh; background conductivity enters through exact element averages.
ForwardModel cem_forward_model(std::shared_ptr<const CemMesh> mesh, const BackgroundMesh& bg,
                               const ElectrodeLayout& layout, const Eigen::MatrixXd& patterns);

/// Affine model U(s) = u0 + J (s - s0).
ForwardModel linear_forward_model(Eigen::VectorXd u0, Eigen::MatrixXd jacobian, Eigen::VectorXd s0);

struct GaussNewtonOptions {
  int max_iters = 30;
  int max_halvings = 10;
  double tol_rel = 1e-6;
  double sigma_floor = 0.01;
};

struct MapEstimate {
  Eigen::VectorXd sigma;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step, starting at the initial guess
};

/// 0.5 |U(s) - v|^2 / sd^2 + 0.5 (s - mean)^T Gamma_pr^{-1} (s - mean).
double map_objective(const Eigen::VectorXd& predicted, const Eigen::VectorXd& measured,
                     const Eigen::VectorXd& sigma, const GaussianPrior& prior, const NoiseModel& noise);

/// Gauss-Newton MAP estimate started at the prior mean.
MapEstimate map_estimate(const ForwardModel& model, const Eigen::VectorXd& measured,
                         const GaussianPrior& prior, const NoiseModel& noise,
                         const GaussNewtonOptions& options = {});

/// Potentials of sigma_true on `fine_mesh` plus white noise drawn from `seed`.
Eigen::VectorXd simulate_measurement(const Eigen::VectorXd& sigma_true, const ElectrodeLayout& layout,
                                     const CemMesh& fine_mesh, const BackgroundMesh& bg,
                                     const Eigen::MatrixXd& patterns, const NoiseModel& noise,
                                     std::uint64_t seed);

struct EvaluationOptions {
  int n_draw = 500;
  std::uint64_t seed = 1;
  double fine_factor = 0.5;  // fine-mesh target_h relative to the reconstruction mesh
  bool exclude_nonconverged = true;  // a stalled Gauss-Newton run counts as a failed reconstruction
  GaussNewtonOptions gauss_newton;
};

struct EvaluationReport {
  int n_draw = 0;
  int failures = 0;  // draws where either reconstruction failed; excluded from both layouts
  std::vector<int> failed_draws;
  std::vector<int> draw_index;
  std::vector<double> errors_a, errors_b;  // |sigma_draw - sigma_hat|^2 over background nodes
  Eigen::VectorXd field_a, field_b;        // pointwise mean squared errors
  std::vector<double> running_ratio;
  double mean_a = 0.0, mean_b = 0.0;
  double stderr_a = 0.0, stderr_b = 0.0;
  double ratio = 0.0;  // mean_b / mean_a
  bool stable = false;  // last-quarter means within two standard errors of the full means
  double ratio_all = 0.0;  // including non-converged reconstructions
};

nlohmann::json to_json(const EvaluationReport& r);

/// Deterministic per-draw seed from a master seed and a stream index.
std::uint64_t draw_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream);

/// Monte-Carlo mean-square reconstruction error of layout_b relative to layout_a,
/// with the same prior draws and noise realizations for both.
EvaluationReport evaluate_layouts(const DesignEvaluator& evaluator, const ElectrodeLayout& layout_a,
                                  const ElectrodeLayout& layout_b, const EvaluationOptions& options = {});

}  // namespace eitopt
