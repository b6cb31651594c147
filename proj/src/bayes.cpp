#include "eitopt/bayes.hpp"

#include "eitopt/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace eitopt {

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::Homogeneous: return "homogeneous";
    case PriorKind::DiskInclusion: return "disk-inclusion";
    case PriorKind::HalfPlaneSplit: return "half-plane-split";
    case PriorKind::White: return "white";
  }
  return "unknown";
}

PriorKind prior_kind_from_string(const std::string& name) {
  if (name == "homogeneous") return PriorKind::Homogeneous;
  if (name == "disk-inclusion") return PriorKind::DiskInclusion;
  if (name == "half-plane-split") return PriorKind::HalfPlaneSplit;
  if (name == "white") return PriorKind::White;
  throw ConfigError("unknown prior kind '" + name + "'");
}

std::string to_string(Criterion c) { return c == Criterion::A ? "A" : "D"; }

Criterion criterion_from_string(const std::string& name) {
  if (name == "A" || name == "a" || name == "trace") return Criterion::A;
  if (name == "D" || name == "d" || name == "logdet") return Criterion::D;
  throw ConfigError("unknown criterion '" + name + "' (expected A or D)");
}

Eigen::VectorXd GaussianPrior::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  Eigen::VectorXd xi(size());
  for (auto& v : xi) v = normal(rng);
  return mean + cholesky.triangularView<Eigen::Lower>() * xi;
}

double cholesky_log_det(const Eigen::MatrixXd& spd) {
  Eigen::LLT<Eigen::MatrixXd> llt(spd);
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

GaussianPrior build_prior(const std::vector<Point2>& nodes, const PriorSpec& spec) {
  const int n = static_cast<int>(nodes.size());
  if (n == 0) throw ConfigError("prior needs at least one node");
  if (spec.kind != PriorKind::White && !(spec.lambda > 0.0))
    throw ConfigError("prior correlation length must be positive");
  GaussianPrior prior;
  prior.mean = Eigen::VectorXd::Constant(n, spec.mean);
  prior.region.assign(n, 0);
  Eigen::VectorXd factor(n);
  for (int i = 0; i < n; ++i) {
    const Point2& x = nodes[i];
    switch (spec.kind) {
      case PriorKind::Homogeneous:
      case PriorKind::White:
        factor[i] = spec.kappa;
        break;
      case PriorKind::DiskInclusion: {
        const bool inside = (x - spec.center).norm() <= spec.radius;
        prior.region[i] = inside ? 1 : 0;
        factor[i] = inside ? spec.kappa_in : spec.kappa_out;
        break;
      }
      case PriorKind::HalfPlaneSplit: {
        const bool upper = x.y() >= 0.0;
        prior.region[i] = upper ? 0 : 1;
        factor[i] = upper ? spec.kappa_upper : spec.kappa_lower;
        break;
      }
    }
    if (!(factor[i] > 0.0)) throw ConfigError("prior covariance factors must be positive");
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  if (spec.kind == PriorKind::White) {
    cov.diagonal() = factor.array().square();
  } else {
    const double inv = 1.0 / (2.0 * spec.lambda * spec.lambda);
    for (int j = 0; j < n; ++j)
      for (int i = j; i < n; ++i) {
        if (prior.region[i] != prior.region[j]) continue;
        const double v = factor[i] * factor[j] * std::exp(-(nodes[i] - nodes[j]).squaredNorm() * inv);
        cov(i, j) = v;
        cov(j, i) = v;
      }
  }
  prior.jitter = spec.jitter * cov.diagonal().maxCoeff();
  cov.diagonal().array() += prior.jitter;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "prior covariance is indefinite after jitter; smallest eigenvalue " << eig.eigenvalues()[0];
    throw NumericalError(msg.str());
  }
  prior.cholesky = llt.matrixL();
  prior.log_det = 2.0 * prior.cholesky.diagonal().array().log().sum();
  prior.covariance = std::move(cov);
  return prior;
}

GaussianPrior build_prior(const BackgroundMesh& bg, const PriorSpec& spec) {
  return build_prior(bg.nodes, spec);
}

NoiseModel build_noise(const Eigen::VectorXd& stacked, double factor) {
  if (stacked.size() == 0) throw ConfigError("noise model needs at least one measurement");
  if (!(factor > 0.0)) throw ConfigError("noise factor must be positive");
  const double spread = stacked.maxCoeff() - stacked.minCoeff();
  if (!(spread > 0.0)) throw NumericalError("degenerate potentials: zero spread, noise level undefined");
  return {factor * spread, static_cast<int>(stacked.size())};
}

PosteriorModel::PosteriorModel(const Eigen::MatrixXd& jacobian, const GaussianPrior& prior,
                               const NoiseModel& noise)
    : jacobian_(jacobian), prior_cov_(prior.covariance), prior_log_det_(prior.log_det) {
  const int rows = static_cast<int>(jacobian.rows());
  if (jacobian.cols() != prior.size())
    throw ConfigError("Jacobian columns differ from the prior dimension");
  if (noise.size != rows) throw ConfigError("noise dimension differs from the measurement count");
  if (!(noise.variance() > 0.0)) throw ConfigError("noise variance must be positive");

  jg_.noalias() = jacobian_ * prior_cov_;
  Eigen::MatrixXd s = jg_ * jacobian_.transpose();
  s = 0.5 * (s + s.transpose());
  s.diagonal().array() += noise.variance();
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("data-space covariance is not positive definite");
  gain_ = llt.solve(jg_).transpose();
  trace_ = prior_cov_.trace() - (gain_.array() * jg_.transpose().array()).sum();
  const double log_det_s = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  log_det_ = prior_log_det_ + rows * std::log(noise.variance()) - log_det_s;
}

Eigen::VectorXd PosteriorModel::variance() const {
  return prior_cov_.diagonal() - (gain_.array() * jg_.transpose().array()).rowwise().sum().matrix();
}

Eigen::MatrixXd PosteriorModel::covariance() const {
  Eigen::MatrixXd c = prior_cov_ - gain_ * jg_;
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd PosteriorModel::covariance_cholesky() const {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance());
  if (llt.info() != Eigen::Success) throw NumericalError("posterior covariance is not positive definite");
  return llt.matrixL();
}

Eigen::MatrixXd PosteriorModel::gradient_weights(Criterion c) const {
  if (c == Criterion::D) return -2.0 * gain_.transpose();
  // Gamma_* K = Gamma_pr K - K (J Gamma_pr K)
  const Eigen::MatrixXd gk = prior_cov_ * gain_ - gain_ * (jg_ * gain_);
  return -2.0 * gk.transpose();
}

Eigen::MatrixXd posterior_covariance_direct(const Eigen::MatrixXd& jacobian, const GaussianPrior& prior,
                                            const NoiseModel& noise) {
  const int n = prior.size();
  const Eigen::MatrixXd prior_inv = Eigen::LLT<Eigen::MatrixXd>(prior.covariance).solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd info = jacobian.transpose() * jacobian / noise.variance() + prior_inv;
  info = 0.5 * (info + info.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior information matrix is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(n, n));
}

double gap_penalty(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  const auto gaps = gap_lengths(curve, layout);
  if (!gaps.admissible) return std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (double g : gaps.gaps) total += 1.0 / g;
  return total;
}

Eigen::VectorXd gap_penalty_gradient(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  const auto gaps = gap_lengths(curve, layout);
  if (!gaps.admissible) throw GeometryError("gap penalty gradient at an inadmissible layout");
  const int m_count = layout.size();
  Eigen::VectorXd grad(m_count);
  for (int m = 0; m < m_count; ++m) {
    const double g_next = gaps.gaps[m];
    const double g_prev = gaps.gaps[(m + m_count - 1) % m_count];
    grad[m] = curve.speed(layout.theta_minus[m]) * (1.0 / (g_next * g_next) - 1.0 / (g_prev * g_prev));
  }
  return grad;
}

double criterion_value(const PosteriorModel& post, Criterion c, const BoundaryCurve& curve,
                       const ElectrodeLayout& layout, double alpha) {
  const double pen = (alpha == 0.0) ? 0.0 : alpha * gap_penalty(curve, layout);
  return pen + post.criterion(c);
}

Eigen::VectorXd criterion_gradient(const PosteriorModel& post, const std::vector<Eigen::MatrixXd>& djac,
                                   Criterion c, const BoundaryCurve& curve,
                                   const ElectrodeLayout& layout, double alpha) {
  if (static_cast<int>(djac.size()) != layout.size())
    throw ConfigError("one Jacobian derivative per electrode is required");
  const Eigen::MatrixXd w = post.gradient_weights(c);
  Eigen::VectorXd grad(layout.size());
  for (int m = 0; m < layout.size(); ++m) {
    if (djac[m].rows() != w.rows() || djac[m].cols() != w.cols())
      throw ConfigError("Jacobian derivative has the wrong shape");
    grad[m] = (djac[m].array() * w.array()).sum();
  }
  if (alpha != 0.0) grad += alpha * gap_penalty_gradient(curve, layout);
  return grad;
}

}  // namespace eitopt
