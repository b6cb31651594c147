#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace eitopt {

using Point2 = Eigen::Vector2d;

enum class CurveKind { Disk, Ellipse, Peanut, CustomRadial };

std::string to_string(CurveKind kind);
CurveKind curve_kind_from_string(const std::string& name);

/// Star-shaped boundary parametrized by the polar angle,
/// gamma(phi) = r(phi) * (cos phi, sin phi).
///
/// Radii are either a disk, an ellipse given by its semi-axes, or a real
/// Fourier series r(phi) = c_0 + sum_k (c_k cos k phi + s_k sin k phi).
/// The peanut is the series 1 + a cos 2 phi.
class BoundaryCurve {
 public:
  static BoundaryCurve disk(double radius = 1.0);
  static BoundaryCurve ellipse(double semi_x, double semi_y);
  static BoundaryCurve peanut(double amplitude = 0.35);
  static BoundaryCurve custom_radial(std::vector<double> cos_coeffs,
                                     std::vector<double> sin_coeffs);

  CurveKind kind() const { return kind_; }
  const std::vector<double>& cos_coefficients() const { return cos_; }
  const std::vector<double>& sin_coefficients() const { return sin_; }
  double semi_x() const { return semi_x_; }
  double semi_y() const { return semi_y_; }

  double radius(double phi) const;
  double radius_derivative(double phi) const;
  Point2 point(double phi) const;
  Point2 velocity(double phi) const;
  /// |gamma'(phi)|.
  double speed(double phi) const;

  /// Sampled bounds of r over one period.
  double min_radius() const { return r_min_; }
  double max_radius() const { return r_max_; }
  double perimeter() const { return perimeter_; }

  /// Relative tolerance of the arc-length quadrature.
  double tolerance() const { return tolerance_; }
  void set_tolerance(double tol);

 private:
  BoundaryCurve() = default;
  void finalize();

  CurveKind kind_ = CurveKind::Disk;
  double semi_x_ = 1.0;
  double semi_y_ = 1.0;
  std::vector<double> cos_;
  std::vector<double> sin_;
  double tolerance_ = 1e-10;
  double r_min_ = 1.0;
  double r_max_ = 1.0;
  double perimeter_ = 0.0;
};

/// Integral of |gamma'| over [phi_a, phi_b]; requires phi_a <= phi_b <= phi_a + 2 pi.
double arc_length(const BoundaryCurve& curve, double phi_a, double phi_b);

/// Angle theta_plus with arc_length(theta_minus, theta_plus) == width.
double endpoint_from_width(const BoundaryCurve& curve, double theta_minus, double width);

/// Inverse of arc length measured from phi_a.
double angle_at_arc_length(const BoundaryCurve& curve, double phi_a, double length);

/// d theta_plus / d theta_minus for a fixed-width electrode.
double width_coupling_ratio(const BoundaryCurve& curve, double theta_minus, double theta_plus);

/// Electrode layout in unwrapped angles: theta_minus is strictly increasing,
/// the feeding electrode comes first and theta_minus.back() < theta_minus[0] + 2 pi.
struct ElectrodeLayout {
  std::vector<double> theta_minus;
  std::vector<double> widths;
  std::vector<double> contact_impedance;
  int feeding_index = 0;

  int size() const { return static_cast<int>(theta_minus.size()); }

  /// Equally spaced electrodes of a common width and impedance, starting at offset.
  static ElectrodeLayout equidistant(int count, double width, double impedance = 1.0,
                                     double offset = 0.0);

  /// Same widths/impedances with new starting angles.
  ElectrodeLayout with_angles(std::vector<double> angles) const;
};

/// Throws ConfigError when sizes disagree or impedances/widths are nonpositive.
void validate_layout(const ElectrodeLayout& layout);

struct GapResult {
  std::vector<double> gaps;
  bool admissible = true;
};

/// Endpoint angles theta_plus for every electrode.
std::vector<double> electrode_end_angles(const BoundaryCurve& curve, const ElectrodeLayout& layout);

/// g_m = arc length from theta_plus_m to theta_minus_{m+1} (cyclic).
GapResult gap_lengths(const BoundaryCurve& curve, const ElectrodeLayout& layout);
GapResult gap_lengths(const BoundaryCurve& curve, const ElectrodeLayout& layout,
                      const std::vector<double>& theta_plus);

/// Wraps an angle into [0, 2 pi).
double wrap_angle(double phi);

}  // namespace eitopt
