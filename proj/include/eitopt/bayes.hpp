#pragma once

#include "eitopt/geometry.hpp"
#include "eitopt/mesh.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>
#include <vector>

namespace eitopt {

enum class PriorKind { Homogeneous, DiskInclusion, HalfPlaneSplit, White };

std::string to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string& name);

/// Squared-exponential smoothness prior with region-wise covariance factors:
/// Gamma_ij = kappa_ij^2 exp(-|x_i - x_j|^2 / (2 lambda^2)), kappa_ij = 0 across regions.
struct PriorSpec {
  PriorKind kind = PriorKind::Homogeneous;
  double mean = 1.0;
  double lambda = 0.5;
  double kappa = 0.4;  // homogeneous factor, or the standard deviation of the white prior
  double kappa_in = 0.4;
  double kappa_out = 0.03;
  Point2 center = Point2::Zero();
  double radius = 0.3;
  double kappa_upper = 0.03;  // x_2 >= 0
  double kappa_lower = 0.4;   // x_2 < 0
  double jitter = 1e-10;      // relative to the largest prior variance
};

struct GaussianPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // jitter included
  Eigen::MatrixXd cholesky;    // lower factor of covariance
  std::vector<int> region;     // region id per node
  double jitter = 0.0;
  double log_det = 0.0;

  int size() const { return static_cast<int>(mean.size()); }
  /// mean + L xi with xi standard normal.
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
};

GaussianPrior build_prior(const std::vector<Point2>& nodes, const PriorSpec& spec);
GaussianPrior build_prior(const BackgroundMesh& bg, const PriorSpec& spec);

/// White measurement noise with variance sd^2 per stacked entry.
struct NoiseModel {
  double sd = 0.0;
  int size = 0;
  double variance() const { return sd * sd; }
};

/// sd = factor * max_{k,l} |U_k - U_l| over the stacked potentials.
NoiseModel build_noise(const Eigen::VectorXd& stacked, double factor = 1e-3);

enum class Criterion { A, D };
std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& name);

/// Linearized Gaussian posterior, kept in data-space form.
///
/// With S = Gamma_n + J Gamma_pr J^T and K = Gamma_pr J^T S^{-1}:
/// Gamma_* = Gamma_pr - K J Gamma_pr and
/// log det Gamma_* = log det Gamma_pr + log det Gamma_n - log det S.
class PosteriorModel {
 public:
  PosteriorModel(const Eigen::MatrixXd& jacobian, const GaussianPrior& prior, const NoiseModel& noise);

  double trace() const { return trace_; }
  double log_det() const { return log_det_; }
  /// log det Gamma_pr - log det Gamma_*.
  double information_gain() const { return prior_log_det_ - log_det_; }
  /// Diagonal of Gamma_* without forming it.
  Eigen::VectorXd variance() const;
  /// Full Gamma_*.
  Eigen::MatrixXd covariance() const;
  /// Lower Cholesky factor of the full Gamma_*.
  Eigen::MatrixXd covariance_cholesky() const;
  /// K = Gamma_pr J^T S^{-1}, size nodes x measurements.
  const Eigen::MatrixXd& gain() const { return gain_; }

  /// W with d(criterion) = <dJ, W> (Frobenius) for a Jacobian perturbation dJ.
  Eigen::MatrixXd gradient_weights(Criterion c) const;

  double criterion(Criterion c) const { return c == Criterion::A ? trace_ : log_det_; }

 private:
  Eigen::MatrixXd jacobian_;
  Eigen::MatrixXd prior_cov_;
  Eigen::MatrixXd jg_;    // J Gamma_pr
  Eigen::MatrixXd gain_;  // K
  double prior_log_det_ = 0.0;
  double trace_ = 0.0;
  double log_det_ = 0.0;
};

/// (J^T Gamma_n^{-1} J + Gamma_pr^{-1})^{-1} in the information form, for small cross-checks.
Eigen::MatrixXd posterior_covariance_direct(const Eigen::MatrixXd& jacobian, const GaussianPrior& prior,
                                            const NoiseModel& noise);

/// 2 sum log l_ii of the Cholesky factor; throws NumericalError when not SPD.
double cholesky_log_det(const Eigen::MatrixXd& spd);

/// sum_m 1 / g_m; +infinity when the layout is inadmissible.
double gap_penalty(const BoundaryCurve& curve, const ElectrodeLayout& layout);
/// d(sum 1/g)/d theta_minus_m = |gamma'(theta_minus_m)| (1/g_m^2 - 1/g_{m-1}^2).
Eigen::VectorXd gap_penalty_gradient(const BoundaryCurve& curve, const ElectrodeLayout& layout);

double criterion_value(const PosteriorModel& post, Criterion c, const BoundaryCurve& curve,
                       const ElectrodeLayout& layout, double alpha);

/// Gradient from explicit Jacobian angle derivatives (one matrix per electrode, background columns).
Eigen::VectorXd criterion_gradient(const PosteriorModel& post, const std::vector<Eigen::MatrixXd>& djac,
                                   Criterion c, const BoundaryCurve& curve,
                                   const ElectrodeLayout& layout, double alpha);

}  // namespace eitopt
