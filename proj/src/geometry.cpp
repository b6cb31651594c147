#include "eitopt/geometry.hpp"

#include "eitopt/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace eitopt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double integrate_speed(const BoundaryCurve& curve, double a, double b, double tol) {
  if (a == b) return 0.0;
  if (curve.kind() == CurveKind::Disk) return curve.cos_coefficients()[0] * (b - a);
  auto f = [&curve](double phi) { return curve.speed(phi); };
  // Split long intervals so the adaptive rule never sees more than a quarter turn.
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / (0.25 * std::numbers::pi))));
  const double step = (b - a) / pieces;
  double total = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * step;
    const double hi = (i + 1 == pieces) ? b : lo + step;
    total += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 12, tol);
  }
  return total;
}

}  // namespace

std::string to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::Disk: return "disk";
    case CurveKind::Ellipse: return "ellipse";
    case CurveKind::Peanut: return "peanut";
    case CurveKind::CustomRadial: return "custom-radial";
  }
  return "unknown";
}

CurveKind curve_kind_from_string(const std::string& name) {
  if (name == "disk") return CurveKind::Disk;
  if (name == "ellipse" || name == "ellipse-like") return CurveKind::Ellipse;
  if (name == "peanut") return CurveKind::Peanut;
  if (name == "custom-radial") return CurveKind::CustomRadial;
  throw ConfigError("unknown curve kind '" + name + "'");
}

BoundaryCurve BoundaryCurve::disk(double radius) {
  if (!(radius > 0.0)) throw ConfigError("disk radius must be positive");
  BoundaryCurve c;
  c.kind_ = CurveKind::Disk;
  c.cos_ = {radius};
  c.sin_ = {0.0};
  c.finalize();
  return c;
}

BoundaryCurve BoundaryCurve::ellipse(double semi_x, double semi_y) {
  if (!(semi_x > 0.0) || !(semi_y > 0.0)) throw ConfigError("ellipse semi-axes must be positive");
  BoundaryCurve c;
  c.kind_ = CurveKind::Ellipse;
  c.semi_x_ = semi_x;
  c.semi_y_ = semi_y;
  c.finalize();
  return c;
}

BoundaryCurve BoundaryCurve::peanut(double amplitude) {
  if (!(std::abs(amplitude) < 1.0)) throw ConfigError("peanut amplitude must lie in (-1, 1)");
  BoundaryCurve c;
  c.kind_ = CurveKind::Peanut;
  c.cos_ = {1.0, 0.0, amplitude};
  c.sin_ = {0.0, 0.0, 0.0};
  c.finalize();
  return c;
}

BoundaryCurve BoundaryCurve::custom_radial(std::vector<double> cos_coeffs,
                                           std::vector<double> sin_coeffs) {
  if (cos_coeffs.empty()) throw ConfigError("custom-radial curve needs at least c_0");
  BoundaryCurve c;
  c.kind_ = CurveKind::CustomRadial;
  sin_coeffs.resize(std::max(sin_coeffs.size(), cos_coeffs.size()), 0.0);
  cos_coeffs.resize(sin_coeffs.size(), 0.0);
  c.cos_ = std::move(cos_coeffs);
  c.sin_ = std::move(sin_coeffs);
  c.finalize();
  return c;
}

void BoundaryCurve::set_tolerance(double tol) {
  if (!(tol > 0.0)) throw ConfigError("quadrature tolerance must be positive");
  tolerance_ = tol;
  finalize();
}

void BoundaryCurve::finalize() {
  constexpr int kSamples = 4096;
  r_min_ = std::numeric_limits<double>::infinity();
  r_max_ = 0.0;
  for (int i = 0; i < kSamples; ++i) {
    const double r = radius(kTwoPi * i / kSamples);
    r_min_ = std::min(r_min_, r);
    r_max_ = std::max(r_max_, r);
  }
  if (!(r_min_ > 0.0)) throw ConfigError("boundary curve is not star-shaped: r(phi) must stay positive");
  perimeter_ = integrate_speed(*this, 0.0, kTwoPi, 0.1 * tolerance_);
}

double BoundaryCurve::radius(double phi) const {
  if (kind_ == CurveKind::Ellipse) {
    const double c = std::cos(phi), s = std::sin(phi);
    return semi_x_ * semi_y_ / std::sqrt(semi_y_ * semi_y_ * c * c + semi_x_ * semi_x_ * s * s);
  }
  double r = cos_[0];
  for (std::size_t k = 1; k < cos_.size(); ++k) {
    const double kp = static_cast<double>(k) * phi;
    r += cos_[k] * std::cos(kp) + sin_[k] * std::sin(kp);
  }
  return r;
}

double BoundaryCurve::radius_derivative(double phi) const {
  if (kind_ == CurveKind::Ellipse) {
    const double c = std::cos(phi), s = std::sin(phi);
    const double a2 = semi_x_ * semi_x_, b2 = semi_y_ * semi_y_;
    const double q = b2 * c * c + a2 * s * s;
    return -semi_x_ * semi_y_ * (a2 - b2) * s * c / (q * std::sqrt(q));
  }
  double dr = 0.0;
  for (std::size_t k = 1; k < cos_.size(); ++k) {
    const double kd = static_cast<double>(k);
    dr += kd * (-cos_[k] * std::sin(kd * phi) + sin_[k] * std::cos(kd * phi));
  }
  return dr;
}

Point2 BoundaryCurve::point(double phi) const {
  const double r = radius(phi);
  return {r * std::cos(phi), r * std::sin(phi)};
}

Point2 BoundaryCurve::velocity(double phi) const {
  const double r = radius(phi), dr = radius_derivative(phi);
  const double c = std::cos(phi), s = std::sin(phi);
  return {dr * c - r * s, dr * s + r * c};
}

double BoundaryCurve::speed(double phi) const {
  const double r = radius(phi), dr = radius_derivative(phi);
  return std::sqrt(r * r + dr * dr);
}

double arc_length(const BoundaryCurve& curve, double phi_a, double phi_b) {
  return integrate_speed(curve, phi_a, phi_b, curve.tolerance());
}

double angle_at_arc_length(const BoundaryCurve& curve, double phi_a, double length) {
  if (length == 0.0) return phi_a;
  if (!(length > 0.0) || length > curve.perimeter() * (1.0 + 1e-12))
    throw GeometryError("arc length outside (0, perimeter]");
  if (curve.kind() == CurveKind::Disk) return phi_a + length / curve.cos_coefficients()[0];

  // Safeguarded Newton on F(phi) = L(phi_a, phi) - length, F' = |gamma'|.
  double lo = phi_a, hi = phi_a + kTwoPi;
  double phi = phi_a + length / curve.speed(phi_a);
  phi = std::clamp(phi, lo, hi);
  const double tol = 1e-14 * curve.perimeter();
  for (int it = 0; it < 100; ++it) {
    const double f = arc_length(curve, phi_a, phi) - length;
    if (std::abs(f) <= tol) return phi;
    if (f > 0.0) hi = phi; else lo = phi;
    double next = phi - f / curve.speed(phi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - phi) <= 1e-15 * std::max(1.0, std::abs(phi))) return next;
    phi = next;
  }
  throw GeometryError("arc-length inversion did not converge");
}

double endpoint_from_width(const BoundaryCurve& curve, double theta_minus, double width) {
  if (!(width > 0.0)) throw GeometryError("electrode width must be positive");
  if (width >= curve.perimeter()) throw GeometryError("electrode width exceeds the perimeter");
  return angle_at_arc_length(curve, theta_minus, width);
}

double width_coupling_ratio(const BoundaryCurve& curve, double theta_minus, double theta_plus) {
  return curve.speed(theta_minus) / curve.speed(theta_plus);
}

ElectrodeLayout ElectrodeLayout::equidistant(int count, double width, double impedance,
                                             double offset) {
  ElectrodeLayout layout;
  for (int m = 0; m < count; ++m) {
    layout.theta_minus.push_back(offset + kTwoPi * m / count);
    layout.widths.push_back(width);
    layout.contact_impedance.push_back(impedance);
  }
  return layout;
}

ElectrodeLayout ElectrodeLayout::with_angles(std::vector<double> angles) const {
  ElectrodeLayout out = *this;
  out.theta_minus = std::move(angles);
  return out;
}

void validate_layout(const ElectrodeLayout& layout) {
  const auto m = layout.theta_minus.size();
  if (m < 2) throw ConfigError("at least two electrodes are required");
  if (layout.widths.size() != m || layout.contact_impedance.size() != m)
    throw ConfigError("electrode widths/impedances must have one entry per electrode");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(layout.widths[i] > 0.0)) throw ConfigError("electrode widths must be positive");
    if (!(layout.contact_impedance[i] > 0.0))
      throw ConfigError("contact impedances must be positive");
  }
  if (layout.feeding_index < 0 || layout.feeding_index >= static_cast<int>(m))
    throw ConfigError("feeding electrode index out of range");
}

std::vector<double> electrode_end_angles(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  std::vector<double> plus(layout.theta_minus.size());
  for (std::size_t m = 0; m < plus.size(); ++m)
    plus[m] = endpoint_from_width(curve, layout.theta_minus[m], layout.widths[m]);
  return plus;
}

GapResult gap_lengths(const BoundaryCurve& curve, const ElectrodeLayout& layout,
                      const std::vector<double>& theta_plus) {
  const int m_count = layout.size();
  GapResult out;
  out.gaps.resize(m_count);
  for (int m = 0; m < m_count; ++m) {
    const double start = theta_plus[m];
    const double stop = (m + 1 < m_count) ? layout.theta_minus[m + 1] : layout.theta_minus[0] + kTwoPi;
    if (!(stop > start)) {
      out.gaps[m] = stop - start;
      out.admissible = false;
      continue;
    }
    out.gaps[m] = arc_length(curve, start, stop);
  }
  for (int m = 0; m + 1 < m_count; ++m)
    if (!(layout.theta_minus[m + 1] > layout.theta_minus[m])) out.admissible = false;
  return out;
}

GapResult gap_lengths(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  return gap_lengths(curve, layout, electrode_end_angles(curve, layout));
}

double wrap_angle(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

}  // namespace eitopt
