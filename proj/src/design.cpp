#include "eitopt/design.hpp"

#include "eitopt/errors.hpp"

#include <limits>

namespace eitopt {

Eigen::VectorXd prior_mean_measurements(const DesignSetup& setup, const BackgroundMesh& bg,
                                        const GaussianPrior& prior, const ElectrodeLayout& layout) {
  const auto mesh = build_mesh(setup.curve, layout, setup.mesh);
  const auto proj = build_element_projection(bg, mesh);
  return measurement_map(mesh, proj.weights * prior.mean, layout,
                         feeding_patterns(layout.size(), layout.feeding_index), SigmaBasis::Element);
}

DesignEvaluator::DesignEvaluator(DesignSetup setup) : setup_(std::move(setup)) {
  validate_layout(setup_.initial);
  if (setup_.initial.size() < 2) throw ConfigError("at least two electrodes are required");
  if (!(setup_.background_spacing > 0.0)) throw ConfigError("background spacing must be positive");
  if (!(setup_.alpha >= 0.0)) throw ConfigError("alpha must be nonnegative");
  if (!gap_lengths(setup_.curve, setup_.initial).admissible)
    throw ConfigError("initial electrode layout is inadmissible");
  background_ = build_background(setup_.curve, setup_.background_spacing);
  prior_ = build_prior(background_, setup_.prior);
  patterns_ = feeding_patterns(setup_.initial.size(), setup_.initial.feeding_index);
  noise_ = build_noise(prior_mean_measurements(setup_, background_, prior_, setup_.initial),
                       setup_.noise_factor);
}

void DesignEvaluator::enable_morphing(const ElectrodeLayout& base) {
  morpher_ = std::make_shared<MeshMorpher>(setup_.curve, build_mesh(setup_.curve, base, setup_.mesh),
                                           setup_.mesh);
}

CemMesh DesignEvaluator::mesh_for(const ElectrodeLayout& layout) const {
  return morpher_ ? morpher_->morph(layout) : build_mesh(setup_.curve, layout, setup_.mesh);
}

DesignPoint DesignEvaluator::evaluate(const ElectrodeLayout& layout, bool with_gradient) const {
  validate_layout(layout);
  if (layout.size() != num_electrodes()) throw ConfigError("layout has the wrong number of electrodes");
  DesignPoint pt;
  pt.layout = layout;
  pt.penalty = gap_penalty(setup_.curve, layout);
  if (!std::isfinite(pt.penalty)) throw GeometryError("electrode layout is inadmissible");

  auto mesh = std::make_shared<CemMesh>(mesh_for(layout));
  const auto proj = build_element_projection(background_, *mesh);
  const Eigen::VectorXd sigma = proj.weights * prior_.mean;
  const auto state = solve_forward(*mesh, sigma, layout, patterns_, SigmaBasis::Element);
  const Eigen::MatrixXd jac = conductivity_jacobian(*mesh, state, proj);
  auto post = std::make_shared<PosteriorModel>(jac, prior_, noise_);

  pt.trace = post->trace();
  pt.log_det = post->log_det();
  pt.value = setup_.alpha * pt.penalty + post->criterion(setup_.criterion);
  pt.measurements = state.measurements();

  if (with_gradient) {
    const auto adj = endpoint_adjoints(setup_.curve, *mesh, layout, state);
    const Eigen::VectorXd pen = setup_.alpha * gap_penalty_gradient(setup_.curve, layout);
    const SparseMatrix pt_weights = proj.weights.transpose();
    auto contract = [&](Criterion c) -> Eigen::VectorXd {
      const Eigen::MatrixXd w = post->gradient_weights(c) * pt_weights;
      return contract_jacobian_angle_derivative_elements(*mesh, state, adj, w) + pen;
    };
    pt.gradient_a = contract(Criterion::A);
    pt.gradient_d = contract(Criterion::D);
    pt.gradient = setup_.criterion == Criterion::A ? pt.gradient_a : pt.gradient_d;
  }
  pt.mesh = std::move(mesh);
  pt.posterior = std::move(post);
  return pt;
}

double DesignEvaluator::value(const ElectrodeLayout& layout) const {
  if (!gap_lengths(setup_.curve, layout).admissible) return std::numeric_limits<double>::infinity();
  try {
    return evaluate(layout, false).value;
  } catch (const GeometryError&) {
    return std::numeric_limits<double>::infinity();
  } catch (const MeshError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace eitopt
