#include "eitopt/errors.hpp"
#include "eitopt/harness.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace eitopt;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
};

void add_common(CLI::App* app, Common& c, const std::string& output_help) {
  app->add_option("-c,--config", c.config_path, "experiment JSON file")->required();
  app->add_option("-s,--set", c.overrides, "override a config field, e.g. mesh.target_h=0.05");
  app->add_option("-o,--output", c.output, output_help);
}

ExperimentConfig load(const Common& c) {
  auto doc = read_json_file(c.config_path);
  for (const auto& o : c.overrides) apply_override(doc, o);
  return parse_config(doc);
}

void emit(const nlohmann::json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

ElectrodeLayout read_layout(const std::string& path, const ElectrodeLayout& like) {
  const auto j = read_json_file(path);
  if (!j.contains("theta_minus")) throw ConfigError("layout file '" + path + "' has no field 'theta_minus'");
  auto angles = j.at("theta_minus").get<std::vector<double>>();
  if (static_cast<int>(angles.size()) != like.size())
    throw ConfigError("layout file '" + path + "' has the wrong number of electrodes");
  return like.with_angles(std::move(angles));
}

int run(const Common& c, bool quiet) {
  auto config = load(c);
  if (!c.output.empty()) config.output_dir = c.output;
  const auto r = run_case(config, quiet ? nullptr : &std::cout);
  write_run_artifacts(r, config.output_dir);
  std::cerr << "status: " << to_string(r.state.status) << ", iterations " << r.state.iteration << ", psi "
            << r.initial.value << " -> " << r.final.value << "; artifacts in " << config.output_dir << '\n';
  return 0;
}

int brute(const Common& c, int resolution, unsigned threads) {
  auto config = load(c);
  if (resolution > 0) config.brute_force.resolution = resolution;
  const DesignEvaluator ev(config.design);
  const auto r = brute_force(ev, config.brute_force, config.design.initial.theta_minus[0], threads,
                             [](long done, long total) { std::cerr << "\r" << done << "/" << total << std::flush; });
  std::cerr << '\n';
  const auto j = to_json(r);
  emit(j, c.output.empty() ? config.output_dir + "/bruteforce.json" : c.output);
  std::cout << nlohmann::json{{"argmin_a", j["argmin_a"]}, {"argmin_d", j["argmin_d"]}}.dump(2) << '\n';
  return 0;
}

int fd_check(const Common& c) {
  const auto config = load(c);
  emit(to_json(derivative_comparison(config)), c.output);
  return 0;
}

int evaluate(const Common& c, const std::string& layout_path, int n_draw) {
  auto config = load(c);
  if (n_draw > 0) config.evaluation.n_draw = n_draw;
  const DesignEvaluator ev(config.design);
  ElectrodeLayout other;
  if (!layout_path.empty()) {
    other = read_layout(layout_path, config.design.initial);
  } else {
    std::cerr << "no --layout given; optimizing first\n";
    other = optimize(design_objective(ev), config.design.initial, config.optimizer).layout;
  }
  auto j = to_json(evaluate_layouts(ev, config.design.initial, other, config.evaluation));
  j["schema"] = "eitopt.evaluation/1";
  j["theta_minus_a"] = config.design.initial.theta_minus;
  j["theta_minus_b"] = other.theta_minus;
  emit(j, c.output.empty() ? config.output_dir + "/evaluation.json" : c.output);
  std::cout << "ratio " << j["ratio"] << " (" << j["failures"] << " failed draws excluded)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian optimal electrode placement for the complete electrode model"};
  app.require_subcommand(1);

  Common run_opts, bf_opts, fd_opts, ev_opts, md_opts;
  bool quiet = false;
  auto* run_cmd = app.add_subcommand("run", "optimize the electrode layout and write artifacts");
  add_common(run_cmd, run_opts, "output directory (overrides output_dir)");
  run_cmd->add_flag("-q,--quiet", quiet, "no per-iteration JSON lines on stdout");

  int resolution = 0;
  unsigned threads = 0;
  auto* bf_cmd = app.add_subcommand("brute-force", "exhaustive grid search over ordered layouts");
  add_common(bf_cmd, bf_opts, "result JSON (default <output_dir>/bruteforce.json)");
  bf_cmd->add_option("-r,--resolution", resolution, "grid points per angle");
  bf_cmd->add_option("-j,--threads", threads, "worker threads (0: all cores)");

  auto* fd_cmd = app.add_subcommand("fd-check", "compare analytic gradients with finite differences");
  add_common(fd_cmd, fd_opts, "result JSON (default stdout)");

  std::string layout_path;
  int n_draw = 0;
  auto* ev_cmd = app.add_subcommand("evaluate", "Monte-Carlo MAP error of a layout against the initial one");
  add_common(ev_cmd, ev_opts, "report JSON (default <output_dir>/evaluation.json)");
  ev_cmd->add_option("-l,--layout", layout_path, "layout JSON with theta_minus (e.g. final_layout.json)");
  ev_cmd->add_option("-n,--n-draw", n_draw, "number of prior draws");

  auto* md_cmd = app.add_subcommand("mesh-dump", "write the mesh of the initial layout and the background mesh");
  add_common(md_cmd, md_opts, "mesh JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run_cmd) return run(run_opts, quiet);
    if (*bf_cmd) return brute(bf_opts, resolution, threads);
    if (*fd_cmd) return fd_check(fd_opts);
    if (*ev_cmd) return evaluate(ev_opts, layout_path, n_draw);
    if (*md_cmd) {
      emit(mesh_dump_json(load(md_opts)), md_opts.output);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
