#include "eitopt/reconstruction.hpp"

#include "eitopt/errors.hpp"

#include <cmath>
#include <random>

namespace eitopt {

ForwardModel cem_forward_model(std::shared_ptr<const CemMesh> mesh, const BackgroundMesh& bg,
                               const ElectrodeLayout& layout, const Eigen::MatrixXd& patterns) {
  auto proj = std::make_shared<const ElementProjection>(build_element_projection(bg, *mesh));
  ForwardModel model;
  model.predict = [mesh, proj, layout, patterns](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return measurement_map(*mesh, proj->weights * s, layout, patterns, SigmaBasis::Element);
  };
  model.predict_with_jacobian = [mesh, proj, layout, patterns](const Eigen::VectorXd& s) {
    const auto state = solve_forward(*mesh, proj->weights * s, layout, patterns, SigmaBasis::Element);
    return std::make_pair(state.measurements(), conductivity_jacobian(*mesh, state, *proj));
  };
  return model;
}

ForwardModel linear_forward_model(Eigen::VectorXd u0, Eigen::MatrixXd jacobian, Eigen::VectorXd s0) {
  if (jacobian.rows() != u0.size() || jacobian.cols() != s0.size())
    throw ConfigError("linear model dimensions disagree");
  ForwardModel model;
  model.predict = [u0, jacobian, s0](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    return u0 + jacobian * (s - s0);
  };
  model.predict_with_jacobian = [u0, jacobian, s0](const Eigen::VectorXd& s) {
    return std::make_pair(Eigen::VectorXd(u0 + jacobian * (s - s0)), jacobian);
  };
  return model;
}

double map_objective(const Eigen::VectorXd& predicted, const Eigen::VectorXd& measured,
                     const Eigen::VectorXd& sigma, const GaussianPrior& prior, const NoiseModel& noise) {
  const Eigen::VectorXd z =
      prior.cholesky.triangularView<Eigen::Lower>().solve(sigma - prior.mean);
  return 0.5 * (predicted - measured).squaredNorm() / noise.variance() + 0.5 * z.squaredNorm();
}

MapEstimate map_estimate(const ForwardModel& model, const Eigen::VectorXd& measured,
                         const GaussianPrior& prior, const NoiseModel& noise,
                         const GaussNewtonOptions& options) {
  MapEstimate est;
  est.sigma = prior.mean.cwiseMax(options.sigma_floor);
  auto [u, jac] = model.predict_with_jacobian(est.sigma);
  if (u.size() != measured.size()) throw ConfigError("measurement vector has the wrong length");
  est.objective = map_objective(u, measured, est.sigma, prior, noise);
  est.history.push_back(est.objective);

  while (est.iterations < options.max_iters) {
    // Linearized MAP in data-space form: s_lin = mean + Gamma_pr J^T S^{-1} (v - U(s) + J (s - mean)).
    const Eigen::MatrixXd jg = jac * prior.covariance;
    Eigen::MatrixXd s = jg * jac.transpose();
    s.diagonal().array() += noise.variance();
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success) throw NumericalError("Gauss-Newton data-space matrix is not SPD");
    const Eigen::VectorXd rhs = measured - u + jac * (est.sigma - prior.mean);
    const Eigen::VectorXd step = prior.mean + jg.transpose() * llt.solve(rhs) - est.sigma;
    if (step.norm() <= 1e-14 * est.sigma.norm()) {
      est.converged = true;
      break;
    }

    bool accepted = false;
    double t = 1.0;
    Eigen::VectorXd trial;
    double trial_obj = 0.0;
    for (int k = 0; k <= options.max_halvings; ++k, t *= 0.5) {
      trial = (est.sigma + t * step).cwiseMax(options.sigma_floor);
      try {
        trial_obj = map_objective(model.predict(trial), measured, trial, prior, noise);
      } catch (const NumericalError&) {
        continue;
      }
      if (trial_obj < est.objective) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // stalled: keep the current iterate, not converged

    const double previous = est.objective;
    est.sigma = std::move(trial);
    est.objective = trial_obj;
    est.history.push_back(trial_obj);
    ++est.iterations;
    if (previous - trial_obj < options.tol_rel * std::abs(previous)) {
      est.converged = true;
      break;
    }
    std::tie(u, jac) = model.predict_with_jacobian(est.sigma);
  }
  return est;
}

Eigen::VectorXd simulate_measurement(const Eigen::VectorXd& sigma_true, const ElectrodeLayout& layout,
                                     const CemMesh& fine_mesh, const BackgroundMesh& bg,
                                     const Eigen::MatrixXd& patterns, const NoiseModel& noise,
                                     std::uint64_t seed) {
  const auto proj = build_element_projection(bg, fine_mesh);
  Eigen::VectorXd v = measurement_map(fine_mesh, proj.weights * sigma_true, layout, patterns, SigmaBasis::Element);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise.sd);
  for (auto& x : v) x += normal(rng);
  return v;
}

std::uint64_t draw_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream) {
  // splitmix64 finalizer over a combined key
  std::uint64_t z = master * 0x9E3779B97F4A7C15ULL + index * 0xBF58476D1CE4E5B9ULL + stream * 0x94D049BB133111EBULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

struct LayoutPipeline {
  ElectrodeLayout layout;
  CemMesh fine;
  ForwardModel model;
};

LayoutPipeline make_pipeline(const DesignEvaluator& ev, const ElectrodeLayout& layout, double fine_factor) {
  if (!gap_lengths(ev.curve(), layout).admissible) throw GeometryError("evaluation layout is inadmissible");
  MeshOptions fine_opts = ev.setup().mesh;
  fine_opts.target_h *= fine_factor;
  auto mesh = std::make_shared<const CemMesh>(build_mesh(ev.curve(), layout, ev.setup().mesh));
  return {layout, build_mesh(ev.curve(), layout, fine_opts),
          cem_forward_model(mesh, ev.background(), layout, ev.patterns())};
}

double mean_of(const std::vector<double>& v, std::size_t from = 0) {
  double s = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) s += v[i];
  return v.size() > from ? s / static_cast<double>(v.size() - from) : 0.0;
}

double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

EvaluationReport evaluate_layouts(const DesignEvaluator& ev, const ElectrodeLayout& layout_a,
                                  const ElectrodeLayout& layout_b, const EvaluationOptions& options) {
  if (options.n_draw < 1) throw ConfigError("n_draw must be positive");
  if (!(options.fine_factor > 0.0 && options.fine_factor <= 0.5))
    throw ConfigError("fine mesh must have at most half the reconstruction target_h");
  const auto pa = make_pipeline(ev, layout_a, options.fine_factor);
  const auto pb = make_pipeline(ev, layout_b, options.fine_factor);
  const auto& prior = ev.prior();
  const double floor = options.gauss_newton.sigma_floor;

  EvaluationReport r;
  r.n_draw = options.n_draw;
  r.field_a = Eigen::VectorXd::Zero(prior.size());
  r.field_b = Eigen::VectorXd::Zero(prior.size());
  double sum_a = 0.0, sum_b = 0.0, all_a = 0.0, all_b = 0.0;
  for (int i = 0; i < options.n_draw; ++i) {
    std::mt19937_64 rng(draw_seed(options.seed, i, 0));
    const Eigen::VectorXd truth = prior.sample(rng).cwiseMax(floor);
    const std::uint64_t noise_seed = draw_seed(options.seed, i, 1);
    Eigen::VectorXd ea, eb;
    bool converged = true;
    try {
      auto reconstruct = [&](const LayoutPipeline& p) -> Eigen::VectorXd {
        const auto v = simulate_measurement(truth, p.layout, p.fine, ev.background(), ev.patterns(), ev.noise(),
                                            noise_seed);
        const auto est = map_estimate(p.model, v, prior, ev.noise(), options.gauss_newton);
        converged = converged && est.converged;
        return (est.sigma - truth).array().square().matrix();
      };
      ea = reconstruct(pa);
      eb = reconstruct(pb);
    } catch (const NumericalError&) {
      ++r.failures;
      r.failed_draws.push_back(i);
      continue;
    }
    all_a += ea.sum();
    all_b += eb.sum();
    if (!converged && options.exclude_nonconverged) {
      ++r.failures;
      r.failed_draws.push_back(i);
      continue;
    }
    r.draw_index.push_back(i);
    r.errors_a.push_back(ea.sum());
    r.errors_b.push_back(eb.sum());
    r.field_a += ea;
    r.field_b += eb;
    sum_a += ea.sum();
    sum_b += eb.sum();
    r.running_ratio.push_back(sum_b / sum_a);
  }
  const auto kept = r.errors_a.size();
  if (kept == 0) throw NumericalError("every Monte-Carlo reconstruction failed");
  r.field_a /= static_cast<double>(kept);
  r.field_b /= static_cast<double>(kept);
  r.mean_a = mean_of(r.errors_a);
  r.mean_b = mean_of(r.errors_b);
  r.stderr_a = standard_error(r.errors_a);
  r.stderr_b = standard_error(r.errors_b);
  r.ratio = r.mean_b / r.mean_a;
  r.ratio_all = all_b / all_a;
  const std::size_t q = kept - std::max<std::size_t>(1, kept / 4);
  r.stable = std::abs(mean_of(r.errors_a, q) - r.mean_a) <= 2.0 * r.stderr_a &&
             std::abs(mean_of(r.errors_b, q) - r.mean_b) <= 2.0 * r.stderr_b;
  return r;
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json draws = nlohmann::json::array();
  for (std::size_t i = 0; i < r.errors_a.size(); ++i)
    draws.push_back({{"draw", r.draw_index[i]}, {"error_a", r.errors_a[i]}, {"error_b", r.errors_b[i]},
                     {"running_ratio", r.running_ratio[i]}});
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  std::vector<double> ratio_field(r.field_a.size());
  for (int i = 0; i < r.field_a.size(); ++i)
    ratio_field[i] = r.field_a[i] > 0.0 ? r.field_b[i] / r.field_a[i] : 1.0;
  return {{"n_draw", r.n_draw},       {"failures", r.failures},     {"mean_a", r.mean_a},
          {"mean_b", r.mean_b},       {"stderr_a", r.stderr_a},     {"stderr_b", r.stderr_b},
          {"ratio", r.ratio},         {"ratio_all", r.ratio_all},   {"stable", r.stable},
          {"failed_draws", r.failed_draws}, {"draws", draws},
          {"mse_field_a", vec(r.field_a)}, {"mse_field_b", vec(r.field_b)}, {"ratio_field", ratio_field}};
}

}  // namespace eitopt
