#pragma once

#include "eitopt/bayes.hpp"
#include "eitopt/sensitivity.hpp"

#include <memory>
#include <optional>

namespace eitopt {

/// Everything that stays fixed while the electrode angles move.
struct DesignSetup {
  BoundaryCurve curve = BoundaryCurve::disk();
  ElectrodeLayout initial;
  MeshOptions mesh;
  double background_spacing = 0.1;
  PriorSpec prior;
  double noise_factor = 1e-3;
  Criterion criterion = Criterion::A;
  double alpha = 1e-4;
};

/// Criterion values (and optionally gradients) at one layout.
struct DesignPoint {
  ElectrodeLayout layout;
  double trace = 0.0;
  double log_det = 0.0;
  double penalty = 0.0;  // sum 1/g_m, without alpha
  double value = 0.0;    // alpha * penalty + chosen criterion
  Eigen::VectorXd gradient;    // of `value`; empty unless requested
  Eigen::VectorXd gradient_a;  // alpha * penalty + trace
  Eigen::VectorXd gradient_d;  // alpha * penalty + log det
  std::shared_ptr<const CemMesh> mesh;
  std::shared_ptr<const PosteriorModel> posterior;
  Eigen::VectorXd measurements;
};

/// Maps electrode layouts to the linearized-posterior design criterion.
///
/// Each evaluation builds a fresh mesh for the layout (or, when morphing is
/// enabled, moves the nodes of a fixed base mesh), solves the forward and
/// dual problems at the prior mean, and forms the posterior on the fixed
/// background mesh. The noise level is frozen at the initial layout.
class DesignEvaluator {
 public:
  explicit DesignEvaluator(DesignSetup setup);

  const DesignSetup& setup() const { return setup_; }
  const BoundaryCurve& curve() const { return setup_.curve; }
  const BackgroundMesh& background() const { return background_; }
  const GaussianPrior& prior() const { return prior_; }
  const NoiseModel& noise() const { return noise_; }
  const Eigen::MatrixXd& patterns() const { return patterns_; }
  Criterion criterion() const { return setup_.criterion; }
  double alpha() const { return setup_.alpha; }
  int num_electrodes() const { return setup_.initial.size(); }

  ElectrodeLayout layout_at(const std::vector<double>& theta_minus) const {
    return setup_.initial.with_angles(theta_minus);
  }

  /// Throws GeometryError on inadmissible layouts.
  DesignPoint evaluate(const ElectrodeLayout& layout, bool with_gradient) const;
  /// Criterion value, +infinity when the layout is inadmissible or cannot be meshed.
  double value(const ElectrodeLayout& layout) const;

  /// Later evaluations move the nodes of the mesh built for `base` instead of re-meshing.
  void enable_morphing(const ElectrodeLayout& base);
  void disable_morphing() { morpher_.reset(); }
  bool morphing() const { return morpher_ != nullptr; }

  CemMesh mesh_for(const ElectrodeLayout& layout) const;

 private:
  DesignSetup setup_;
  BackgroundMesh background_;
  GaussianPrior prior_;
  NoiseModel noise_;
  Eigen::MatrixXd patterns_;
  std::shared_ptr<const MeshMorpher> morpher_;
};

/// Stacked potentials at the prior mean for a layout.
Eigen::VectorXd prior_mean_measurements(const DesignSetup& setup, const BackgroundMesh& bg,
                                        const GaussianPrior& prior, const ElectrodeLayout& layout);

}  // namespace eitopt
