#include "eitopt/harness.hpp"

#include "eitopt/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

namespace eitopt {

namespace {

using nlohmann::json;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
auto staged(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  }
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

double angle_between_deg(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double n = a.norm() * b.norm();
  if (!(n > 0.0)) return 0.0;
  return std::acos(std::clamp(a.dot(b) / n, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

RunResult run_case(const ExperimentConfig& config, std::ostream* progress) {
  RunResult r;
  r.config = config;
  const auto ev = staged("setup", [&] { return std::make_shared<DesignEvaluator>(config.design); });
  r.background = ev->background();
  r.prior_variance = ev->prior().covariance.diagonal();
  r.state = staged("optimize", [&] {
    return optimize(design_objective(*ev), config.design.initial, config.optimizer, progress);
  });
  r.initial = staged("posterior", [&] { return ev->evaluate(config.design.initial, true); });
  r.final = staged("posterior", [&] { return ev->evaluate(r.state.layout, true); });
  if (config.evaluate)
    r.evaluation = staged("evaluate", [&] {
      return evaluate_layouts(*ev, config.design.initial, r.state.layout, config.evaluation);
    });
  return r;
}

json variance_fields_json(const RunResult& r) {
  const auto& curve = r.config.design.curve;
  return {{"schema", "eitopt.variance/1"},
          {"background", background_to_json(r.background)},
          {"curve", curve_to_json(curve)},
          {"prior_variance", to_vector(r.prior_variance)},
          {"initial", {{"layout", layout_to_json(curve, r.initial.layout)},
                       {"posterior_variance", to_vector(r.initial.posterior->variance())}}},
          {"final", {{"layout", layout_to_json(curve, r.final.layout)},
                     {"posterior_variance", to_vector(r.final.posterior->variance())}}}};
}

json run_summary_json(const RunResult& r) {
  auto point = [](const DesignPoint& p) {
    return json{{"psi", p.value}, {"trace", p.trace}, {"log_det", p.log_det}, {"penalty", p.penalty},
                {"gradient_norm", p.gradient.norm()}};
  };
  json j{{"schema", "eitopt.summary/1"},
         {"name", r.config.name},
         {"criterion", to_string(r.config.design.criterion)},
         {"status", to_string(r.state.status)},
         {"iterations", r.state.iteration},
         {"evaluations", r.state.evaluations},
         {"gap_floor", r.state.gap_floor},
         {"initial", point(r.initial)},
         {"final", point(r.final)},
         {"prior_log_det", r.initial.posterior ? r.initial.log_det + r.initial.posterior->information_gain() : 0.0},
         {"information_gain_initial", r.initial.posterior->information_gain()},
         {"information_gain_final", r.final.posterior->information_gain()}};
  if (r.evaluation) j["evaluation_ratio"] = r.evaluation->ratio;
  return j;
}

void write_run_artifacts(const RunResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  write_file(root / "config.json", config_to_json(r.config).dump(2) + "\n");
  std::string history;
  for (const auto& rec : r.state.history) history += to_json(rec).dump() + "\n";
  write_file(root / "history.jsonl", history);
  json final_layout = layout_to_json(r.config.design.curve, r.state.layout);
  final_layout["schema"] = "eitopt.layout/1";
  final_layout["psi"] = r.state.value;
  write_file(root / "final_layout.json", final_layout.dump(2) + "\n");
  write_file(root / "variance_fields.json", variance_fields_json(r).dump() + "\n");
  write_file(root / "summary.json", run_summary_json(r).dump(2) + "\n");
  if (r.evaluation) {
    json e = to_json(*r.evaluation);
    e["schema"] = "eitopt.evaluation/1";
    e["trace_initial"] = r.initial.trace;
    e["trace_final"] = r.final.trace;
    write_file(root / "evaluation.json", e.dump() + "\n");
  }
}

// ---------------------------------------------------------------------------- brute force

long brute_force_count(int electrodes, int resolution) {
  if (electrodes > resolution) return 0;
  // resolution * C(resolution - 1, electrodes - 1)
  double c = 1.0;
  for (int k = 1; k < electrodes; ++k) c = c * (resolution - k) / k;
  return static_cast<long>(std::llround(c * resolution));
}

ElectrodeLayout BruteForceResult::layout(const ElectrodeLayout& like, int index) const {
  std::vector<double> angles;
  const double step = 2.0 * std::numbers::pi / resolution;
  for (int i : tuples.at(index)) angles.push_back(grid[0] + step * i);
  return like.with_angles(std::move(angles));
}

BruteForceResult brute_force(const DesignEvaluator& ev, const BruteForceOptions& options, double offset,
                             unsigned threads, const std::function<void(long, long)>& progress) {
  const int m = ev.num_electrodes(), res = options.resolution;
  const long count = brute_force_count(m, res);
  if (count > options.max_evaluations) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)ev.value(ev.setup().initial);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    throw ConfigError("brute force needs " + std::to_string(count) + " evaluations (limit " +
                      std::to_string(options.max_evaluations) + "), about " +
                      std::to_string(static_cast<long>(std::ceil(secs * count / 60.0))) + " min on one core");
  }
  BruteForceResult r;
  r.resolution = res;
  for (int k = 0; k < res; ++k) r.grid.push_back(offset + 2.0 * std::numbers::pi * k / res);

  // Enumerate i0 in [0, res) and i0 < i1 < ... < i_{m-1} < i0 + res.
  std::vector<int> t(m);
  for (int i0 = 0; i0 < res; ++i0) {
    t[0] = i0;
    for (int k = 1; k < m; ++k) t[k] = i0 + k;
    while (true) {
      r.tuples.push_back(t);
      int k = m - 1;
      while (k >= 1 && t[k] == i0 + res - (m - k)) --k;
      if (k < 1) break;
      ++t[k];
      for (int q = k + 1; q < m; ++q) t[q] = t[q - 1] + 1;
    }
  }
  const long n = static_cast<long>(r.tuples.size());
  r.psi_a.assign(n, kInf);
  r.psi_d.assign(n, kInf);

  const double alpha = ev.alpha();
  std::atomic<long> next{0}, done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (long i = next++; i < n; i = next++) {
      const auto layout = r.layout(ev.setup().initial, static_cast<int>(i));
      try {
        if (gap_lengths(ev.curve(), layout).admissible) {
          const auto p = ev.evaluate(layout, false);
          r.psi_a[i] = alpha * p.penalty + p.trace;
          r.psi_d[i] = alpha * p.penalty + p.log_det;
        }
      } catch (const NumericalError&) {
      }
      const long d = ++done;
      if (progress && (d % 500 == 0 || d == n)) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(d, n);
      }
    }
  };
  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<long>(workers, std::max<long>(n, 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // Reduction in index order keeps ties deterministic.
  for (long i = 0; i < n; ++i) {
    if (r.argmin_a < 0 || r.psi_a[i] < r.psi_a[r.argmin_a]) r.argmin_a = static_cast<int>(i);
    if (r.argmin_d < 0 || r.psi_d[i] < r.psi_d[r.argmin_d]) r.argmin_d = static_cast<int>(i);
  }
  if (!std::isfinite(r.psi_a[r.argmin_a])) throw NumericalError("no admissible grid layout");
  return r;
}

json to_json(const BruteForceResult& r) {
  auto finite = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return a;
  };
  const double step = 2.0 * std::numbers::pi / r.resolution;
  auto angles = [&](int i) {
    std::vector<double> a;
    for (int k : r.tuples[i]) a.push_back(r.grid[0] + step * k);
    return a;
  };
  return {{"schema", "eitopt.bruteforce/1"},
          {"resolution", r.resolution},
          {"grid", r.grid},
          {"tuples", r.tuples},
          {"psi_a", finite(r.psi_a)},
          {"psi_d", finite(r.psi_d)},
          {"argmin_a", {{"index", r.argmin_a}, {"theta_minus", angles(r.argmin_a)}, {"psi", r.psi_a[r.argmin_a]}}},
          {"argmin_d", {{"index", r.argmin_d}, {"theta_minus", angles(r.argmin_d)}, {"psi", r.psi_d[r.argmin_d]}}}};
}

// ---------------------------------------------------------------------------- finite differences

std::vector<double> central_difference_weights(int order) {
  switch (order) {
    case 2: return {-1.0 / 2, 0.0, 1.0 / 2};
    case 4: return {1.0 / 12, -2.0 / 3, 0.0, 2.0 / 3, -1.0 / 12};
    case 6: return {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
    case 8: return {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280};
    default: throw ConfigError("finite-difference order must be 2, 4, 6 or 8");
  }
}

const FdEntry& FdComparison::find(const std::string& mode, int order, double step) const {
  const FdEntry* best = nullptr;
  for (const auto& e : entries)
    if (e.mode == mode && e.order == order &&
        (!best || std::abs(std::log(e.step / step)) < std::abs(std::log(best->step / step))))
      best = &e;
  if (!best) throw ConfigError("no finite-difference entry for mode " + mode + " order " + std::to_string(order));
  return *best;
}

FdComparison derivative_comparison(const DesignSetup& setup, const FdCheckOptions& options) {
  DesignEvaluator ev(setup);
  const auto& layout = setup.initial;
  const int m_count = layout.size();
  FdComparison c;
  c.layout = layout;
  {
    const auto pt = ev.evaluate(layout, true);
    c.analytic_a = pt.gradient_a;
    c.analytic_d = pt.gradient_d;
    const auto mesh = ev.mesh_for(layout);
    const auto proj = build_element_projection(ev.background(), mesh);
    const auto state = solve_forward(mesh, proj.weights * ev.prior().mean, layout, ev.patterns(), SigmaBasis::Element);
    c.analytic_measurements = measurement_angle_derivative(endpoint_adjoints(setup.curve, mesh, layout, state), m_count);
  }
  int max_half = 0;
  for (int o : options.orders) max_half = std::max(max_half, o / 2);

  std::vector<double> steps;
  for (int i = 0; i < options.step_count; ++i)
    steps.push_back(options.step_count == 1
                        ? options.step_min
                        : options.step_min * std::pow(options.step_max / options.step_min,
                                                      static_cast<double>(i) / (options.step_count - 1)));

  std::vector<std::string> modes;
  if (options.morph) modes.push_back("morph");
  if (options.remesh) modes.push_back("remesh");
  for (const auto& mode : modes) {
    if (mode == "morph")
      ev.enable_morphing(layout);
    else
      ev.disable_morphing();
    for (double h : steps) {
      // Values at theta + k h e_m for k = -max_half..max_half, k != 0.
      std::vector<std::vector<DesignPoint>> pts(m_count);
      for (int m = 0; m < m_count; ++m)
        for (int k = -max_half; k <= max_half; ++k) {
          if (k == 0) {
            pts[m].emplace_back();
            continue;
          }
          auto l = layout;
          l.theta_minus[m] += k * h;
          pts[m].push_back(ev.evaluate(l, false));
        }
      for (int order : options.orders) {
        const auto w = central_difference_weights(order);
        const int half = order / 2;
        FdEntry e;
        e.mode = mode;
        e.order = order;
        e.step = h;
        e.fd_a = Eigen::VectorXd::Zero(m_count);
        e.fd_d = Eigen::VectorXd::Zero(m_count);
        Eigen::MatrixXd fdu = Eigen::MatrixXd::Zero(c.analytic_measurements.rows(), m_count);
        for (int m = 0; m < m_count; ++m)
          for (int k = -half; k <= half; ++k) {
            if (k == 0) continue;
            const auto& p = pts[m][k + max_half];
            const double wk = w[k + half] / h;
            e.fd_a[m] += wk * (p.trace + setup.alpha * p.penalty);
            e.fd_d[m] += wk * (p.log_det + setup.alpha * p.penalty);
            fdu.col(m) += wk * p.measurements;
          }
        e.rel_a = (c.analytic_a - e.fd_a).norm() / e.fd_a.norm();
        e.rel_d = (c.analytic_d - e.fd_d).norm() / e.fd_d.norm();
        e.angle_a = angle_between_deg(c.analytic_a, e.fd_a);
        e.angle_d = angle_between_deg(c.analytic_d, e.fd_d);
        if (mode == "morph") e.rel_measurements = (c.analytic_measurements - fdu).norm() / fdu.norm();
        c.entries.push_back(std::move(e));
      }
    }
  }
  return c;
}

FdComparison derivative_comparison(const ExperimentConfig& config) {
  return staged("fd-check", [&] { return derivative_comparison(config.design, config.fd_check); });
}

json to_json(const FdComparison& c) {
  json entries = json::array();
  for (const auto& e : c.entries) {
    json j{{"mode", e.mode},          {"order", e.order},       {"step", e.step},
           {"fd_a", to_vector(e.fd_a)}, {"fd_d", to_vector(e.fd_d)}, {"rel_a", e.rel_a},
           {"rel_d", e.rel_d},        {"angle_a_deg", e.angle_a}, {"angle_d_deg", e.angle_d}};
    if (e.rel_measurements >= 0.0) j["rel_measurements"] = e.rel_measurements;
    entries.push_back(std::move(j));
  }
  return {{"schema", "eitopt.fdcheck/1"},
          {"theta_minus", c.layout.theta_minus},
          {"analytic_a", to_vector(c.analytic_a)},
          {"analytic_d", to_vector(c.analytic_d)},
          {"entries", entries}};
}

json mesh_dump_json(const ExperimentConfig& config) {
  return staged("mesh-dump", [&] {
    const auto& d = config.design;
    return json{{"schema", "eitopt.meshdump/1"},
                {"curve", curve_to_json(d.curve)},
                {"layout", layout_to_json(d.curve, d.initial)},
                {"mesh", mesh_to_json(build_mesh(d.curve, d.initial, d.mesh))},
                {"background", background_to_json(build_background(d.curve, d.background_spacing))}};
  });
}

}  // namespace eitopt
