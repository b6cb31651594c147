#include "eitopt/config.hpp"

#include "eitopt/errors.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace eitopt {

namespace {

using nlohmann::json;

/// Strict view of one JSON object: typed lookups by key, and unknown keys are errors.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + where() + "' must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <class T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError("missing required field '" + field(key) + "'");
    return convert<T>(key);
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key())) throw ConfigError("unknown field '" + field(item.key()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  template <class T>
  T convert(const std::string& key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + field(key) + "' has the wrong type");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

BoundaryCurve parse_curve(Section s) {
  const auto kind = curve_kind_from_string(s.require<std::string>("kind"));
  BoundaryCurve c = BoundaryCurve::disk();
  switch (kind) {
    case CurveKind::Disk: c = BoundaryCurve::disk(s.get("radius", 1.0)); break;
    case CurveKind::Ellipse: c = BoundaryCurve::ellipse(s.require<double>("semi_x"), s.require<double>("semi_y")); break;
    case CurveKind::Peanut: c = BoundaryCurve::peanut(s.get("amplitude", 0.35)); break;
    case CurveKind::CustomRadial:
      c = BoundaryCurve::custom_radial(s.require<std::vector<double>>("cos"),
                                       s.get("sin", std::vector<double>{}));
      break;
  }
  const double tol = s.get("tolerance", c.tolerance());
  if (!(tol > 0.0)) throw ConfigError("field 'curve.tolerance' must be positive");
  c.set_tolerance(tol);
  s.finish();
  return c;
}

ElectrodeLayout parse_electrodes(Section s) {
  const int m = s.require<int>("count");
  if (m < 2) throw ConfigError("field '" + s.field("count") + "' must be at least 2");
  ElectrodeLayout l = ElectrodeLayout::equidistant(m, 1.0, s.get("contact_impedance", 1.0), s.get("offset", 0.0));
  if (s.has("widths") && s.has("width")) throw ConfigError("give either 'electrodes.width' or 'electrodes.widths'");
  l.widths = s.has("widths") ? s.get("widths", std::vector<double>{})
                             : std::vector<double>(m, s.get("width", 0.19634954084936207));
  if (s.has("theta_init")) l.theta_minus = s.get("theta_init", std::vector<double>{});
  if (s.has("contact_impedances")) l.contact_impedance = s.get("contact_impedances", std::vector<double>{});
  l.feeding_index = s.get("feeding_index", 0);
  s.finish();
  if (static_cast<int>(l.theta_minus.size()) != m)
    throw ConfigError("field 'electrodes.theta_init' needs one angle per electrode");
  if (l.feeding_index != 0) throw ConfigError("field 'electrodes.feeding_index' must be 0 (the feeding electrode comes first)");
  validate_layout(l);
  for (int i = 1; i < m; ++i)
    if (!(l.theta_minus[i] > l.theta_minus[i - 1]))
      throw ConfigError("field 'electrodes.theta_init' must be strictly increasing");
  return l;
}

PriorSpec parse_prior(Section s) {
  PriorSpec p;
  p.kind = prior_kind_from_string(s.require<std::string>("kind"));
  p.mean = s.get("mean", p.mean);
  p.lambda = s.get("lambda", p.lambda);
  p.kappa = s.get("kappa", p.kappa);
  p.kappa_in = s.get("kappa_in", p.kappa_in);
  p.kappa_out = s.get("kappa_out", p.kappa_out);
  const auto c = s.get("center", std::vector<double>{p.center.x(), p.center.y()});
  if (c.size() != 2) throw ConfigError("field '" + s.field("center") + "' must have two entries");
  p.center = Point2(c[0], c[1]);
  p.radius = s.get("radius", p.radius);
  p.kappa_upper = s.get("kappa_upper", p.kappa_upper);
  p.kappa_lower = s.get("kappa_lower", p.kappa_lower);
  p.jitter = s.get("jitter", p.jitter);
  s.finish();
  if (!(p.mean > 0.0)) throw ConfigError("field 'prior.mean' must be positive");
  return p;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  Section root(doc, "");
  const int version = root.require<int>("schema_version");
  if (version != kSchemaVersion)
    throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                      std::to_string(kSchemaVersion) + ")");
  ExperimentConfig c;
  c.name = root.get("name", c.name);
  c.seed = root.get("seed", c.seed);
  c.output_dir = root.get("output_dir", c.output_dir);

  auto& d = c.design;
  if (!doc.contains("curve")) throw ConfigError("missing required field 'curve'");
  d.curve = parse_curve(root.sub("curve"));
  if (!doc.contains("electrodes")) throw ConfigError("missing required field 'electrodes'");
  d.initial = parse_electrodes(root.sub("electrodes"));
  if (!doc.contains("prior")) throw ConfigError("missing required field 'prior'");
  d.prior = parse_prior(root.sub("prior"));

  {
    auto s = root.sub("noise");
    d.noise_factor = s.get("factor", d.noise_factor);
    s.finish();
    if (!(d.noise_factor > 0.0)) throw ConfigError("field 'noise.factor' must be positive");
  }
  {
    auto s = root.sub("design");
    d.criterion = criterion_from_string(s.get("criterion", to_string(d.criterion)));
    d.alpha = s.get("alpha", d.alpha);
    s.finish();
  }
  {
    auto s = root.sub("mesh");
    d.mesh.target_h = s.get("target_h", d.mesh.target_h);
    d.background_spacing = s.get("background_spacing", d.background_spacing);
    d.mesh.endpoint_fraction = s.get("endpoint_fraction", d.mesh.endpoint_fraction);
    d.mesh.endpoint_min_fraction = s.get("endpoint_min_fraction", d.mesh.endpoint_min_fraction);
    d.mesh.endpoint_grading = s.get("endpoint_grading", d.mesh.endpoint_grading);
    d.mesh.grading = s.get("grading", d.mesh.grading);
    s.finish();
    if (!(d.mesh.target_h > 0.0)) throw ConfigError("field 'mesh.target_h' must be positive");
  }
  {
    auto s = root.sub("optimizer");
    auto& o = c.optimizer;
    o.tol_rel = s.get("tol_rel", o.tol_rel);
    o.max_iters = s.get("max_iters", o.max_iters);
    o.golden_evaluations = s.get("golden_evaluations", o.golden_evaluations);
    o.max_step = s.get("max_step", o.max_step);
    o.gap_floor_fraction = s.get("gap_floor_fraction", o.gap_floor_fraction);
    s.finish();
    if (o.max_iters < 0) throw ConfigError("field 'optimizer.max_iters' must be nonnegative");
    if (!(o.max_step > 0.0)) throw ConfigError("field 'optimizer.max_step' must be positive");
  }
  {
    auto s = root.sub("evaluation");
    auto& e = c.evaluation;
    c.evaluate = s.get("enabled", c.evaluate);
    e.n_draw = s.get("n_draw", e.n_draw);
    e.seed = s.get("seed", c.seed);
    e.fine_factor = s.get("fine_factor", e.fine_factor);
    e.exclude_nonconverged = s.get("exclude_nonconverged", e.exclude_nonconverged);
    auto g = s.sub("gauss_newton");
    e.gauss_newton.max_iters = g.get("max_iters", e.gauss_newton.max_iters);
    e.gauss_newton.max_halvings = g.get("max_halvings", e.gauss_newton.max_halvings);
    e.gauss_newton.tol_rel = g.get("tol_rel", e.gauss_newton.tol_rel);
    e.gauss_newton.sigma_floor = g.get("sigma_floor", e.gauss_newton.sigma_floor);
    g.finish();
    s.finish();
    if (e.n_draw < 1) throw ConfigError("field 'evaluation.n_draw' must be positive");
  }
  {
    auto s = root.sub("brute_force");
    c.brute_force.resolution = s.get("resolution", c.brute_force.resolution);
    c.brute_force.max_evaluations = s.get("max_evaluations", c.brute_force.max_evaluations);
    s.finish();
    if (c.brute_force.resolution < 2) throw ConfigError("field 'brute_force.resolution' must be at least 2");
  }
  {
    auto s = root.sub("fd_check");
    auto& f = c.fd_check;
    f.orders = s.get("orders", f.orders);
    f.step_min = s.get("step_min", f.step_min);
    f.step_max = s.get("step_max", f.step_max);
    f.step_count = s.get("step_count", f.step_count);
    f.morph = s.get("morph", f.morph);
    f.remesh = s.get("remesh", f.remesh);
    s.finish();
    for (int o : f.orders)
      if (o != 2 && o != 4 && o != 6 && o != 8) throw ConfigError("field 'fd_check.orders' allows 2, 4, 6, 8");
    if (!(f.step_min > 0.0 && f.step_max >= f.step_min) || f.step_count < 1)
      throw ConfigError("field 'fd_check' step range is invalid");
  }
  root.finish();
  return c;
}

json curve_to_json(const BoundaryCurve& curve) {
  json j{{"kind", to_string(curve.kind())}};
  switch (curve.kind()) {
    case CurveKind::Disk: j["radius"] = curve.cos_coefficients().at(0); break;
    case CurveKind::Ellipse:
      j["semi_x"] = curve.semi_x();
      j["semi_y"] = curve.semi_y();
      break;
    case CurveKind::Peanut: j["amplitude"] = curve.cos_coefficients().at(2); break;
    case CurveKind::CustomRadial:
      j["cos"] = curve.cos_coefficients();
      j["sin"] = curve.sin_coefficients();
      break;
  }
  j["tolerance"] = curve.tolerance();
  return j;
}

json layout_to_json(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  std::vector<double> centers;
  const auto ends = electrode_end_angles(curve, layout);
  for (int m = 0; m < layout.size(); ++m) {
    const double mid = angle_at_arc_length(curve, layout.theta_minus[m], 0.5 * layout.widths[m]);
    centers.push_back(wrap_angle(mid));
  }
  const auto gaps = gap_lengths(curve, layout, ends);
  return {{"theta_minus", layout.theta_minus}, {"theta_plus", ends}, {"centers", centers},
          {"widths", layout.widths}, {"contact_impedance", layout.contact_impedance},
          {"feeding_index", layout.feeding_index}, {"gaps", gaps.gaps}};
}

json config_to_json(const ExperimentConfig& c) {
  const auto& d = c.design;
  const auto& l = d.initial;
  const auto& p = d.prior;
  const auto& e = c.evaluation;
  return {
      {"schema_version", kSchemaVersion},
      {"name", c.name},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"curve", curve_to_json(d.curve)},
      {"electrodes",
       {{"count", l.size()}, {"widths", l.widths}, {"theta_init", l.theta_minus},
        {"contact_impedances", l.contact_impedance}, {"feeding_index", l.feeding_index}}},
      {"prior",
       {{"kind", to_string(p.kind)}, {"mean", p.mean}, {"lambda", p.lambda}, {"kappa", p.kappa},
        {"kappa_in", p.kappa_in}, {"kappa_out", p.kappa_out}, {"center", {p.center.x(), p.center.y()}},
        {"radius", p.radius}, {"kappa_upper", p.kappa_upper}, {"kappa_lower", p.kappa_lower},
        {"jitter", p.jitter}}},
      {"noise", {{"factor", d.noise_factor}}},
      {"design", {{"criterion", to_string(d.criterion)}, {"alpha", d.alpha}}},
      {"mesh",
       {{"target_h", d.mesh.target_h}, {"background_spacing", d.background_spacing},
        {"endpoint_fraction", d.mesh.endpoint_fraction}, {"endpoint_min_fraction", d.mesh.endpoint_min_fraction},
        {"endpoint_grading", d.mesh.endpoint_grading}, {"grading", d.mesh.grading}}},
      {"optimizer",
       {{"tol_rel", c.optimizer.tol_rel}, {"max_iters", c.optimizer.max_iters},
        {"golden_evaluations", c.optimizer.golden_evaluations}, {"max_step", c.optimizer.max_step},
        {"gap_floor_fraction", c.optimizer.gap_floor_fraction}}},
      {"evaluation",
       {{"enabled", c.evaluate}, {"n_draw", e.n_draw}, {"seed", e.seed}, {"fine_factor", e.fine_factor},
        {"exclude_nonconverged", e.exclude_nonconverged},
        {"gauss_newton",
         {{"max_iters", e.gauss_newton.max_iters}, {"max_halvings", e.gauss_newton.max_halvings},
          {"tol_rel", e.gauss_newton.tol_rel}, {"sigma_floor", e.gauss_newton.sigma_floor}}}}},
      {"brute_force",
       {{"resolution", c.brute_force.resolution}, {"max_evaluations", c.brute_force.max_evaluations}}},
      {"fd_check",
       {{"orders", c.fd_check.orders}, {"step_min", c.fd_check.step_min}, {"step_max", c.fd_check.step_max},
        {"step_count", c.fd_check.step_count}, {"morph", c.fd_check.morph}, {"remesh", c.fd_check.remesh}}},
  };
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override '" + key + "' does not address an object");
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("override '" + key + "' does not address an object");
  (*node)[parts.back()] = value;
}

}  // namespace eitopt
