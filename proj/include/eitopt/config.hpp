#pragma once

#include "eitopt/optimizer.hpp"
#include "eitopt/reconstruction.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace eitopt {

inline constexpr int kSchemaVersion = 1;

struct BruteForceOptions {
  int resolution = 24;
  long max_evaluations = 100000;
};

struct FdCheckOptions {
  std::vector<int> orders{2, 4, 6, 8};
  double step_min = 1e-7;
  double step_max = 1e-1;
  int step_count = 7;
  bool morph = true;
  bool remesh = true;
};

/// One experiment: geometry, electrodes, prior, noise, design criterion and solver settings.
///
/// JSON layout (schema_version 1); only `curve.kind`, `electrodes.count` and
/// `prior.kind` are required:
///   curve        {kind, radius | semi_x, semi_y | amplitude | cos, sin}
///   electrodes   {count, width | widths, theta_init, offset, contact_impedance, feeding_index}
///   prior        {kind, mean, lambda, kappa, kappa_in, kappa_out, center, radius,
///                 kappa_upper, kappa_lower, jitter}
///   noise        {factor}
///   design       {criterion, alpha}
///   mesh         {target_h, background_spacing, endpoint_fraction, endpoint_min_fraction,
///                 endpoint_grading, grading}
///   optimizer    {tol_rel, max_iters, golden_evaluations, max_step, gap_floor_fraction}
///   evaluation   {enabled, n_draw, seed, fine_factor, exclude_nonconverged,
///                 gauss_newton {max_iters, max_halvings, tol_rel, sigma_floor}}
///   brute_force  {resolution, max_evaluations}
///   fd_check     {orders, step_min, step_max, step_count, morph, remesh}
///   name, seed, output_dir
struct ExperimentConfig {
  std::string name = "experiment";
  DesignSetup design;
  OptimizerOptions optimizer;
  bool evaluate = false;
  EvaluationOptions evaluation;
  BruteForceOptions brute_force;
  FdCheckOptions fd_check;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

/// Validates and converts; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Full echo with every default filled in; parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const ExperimentConfig& config);

nlohmann::json curve_to_json(const BoundaryCurve& curve);
nlohmann::json layout_to_json(const BoundaryCurve& curve, const ElectrodeLayout& layout);

/// Reads a JSON file; a missing or malformed file is a ConfigError that names the path.
nlohmann::json read_json_file(const std::string& path);
ExperimentConfig load_config(const std::string& path);

/// Applies `dotted.key=value` overrides; the value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace eitopt
