#include "eitopt/mesh.hpp"

#include "eitopt/errors.hpp"
#include "eitopt/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>

namespace eitopt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Node density along one boundary segment: fine spacing within the
/// refinement distance of either end, linear growth up to target_h beyond.
class SegmentDensity {
 public:
  SegmentDensity(double length, double ref_start, double ref_end, const MeshOptions& opt)
      : length_(length), ref_a_(1.1 * ref_start), ref_b_(1.1 * ref_end),
        h_(opt.target_h), hf_(opt.endpoint_fraction * opt.target_h),
        hmin_(std::min(opt.endpoint_min_fraction, opt.endpoint_fraction) * opt.target_h),
        grading_(opt.grading), endpoint_grading_(opt.endpoint_grading) {
    cumulative_.resize(kSamples + 1);
    cumulative_[0] = 0.0;
    const double ds = length_ / kSamples;
    double prev = density(0.0);
    for (int k = 1; k <= kSamples; ++k) {
      const double cur = density(k * ds);
      cumulative_[k] = cumulative_[k - 1] + 0.5 * ds * (prev + cur);
      prev = cur;
    }
  }

  int natural_count(int minimum) const {
    return std::max(minimum, static_cast<int>(std::ceil(cumulative_.back() - 1e-9)));
  }

  /// Arc-length position of node `index` out of `count` equal density shares.
  double position(int index, int count) const {
    if (index <= 0) return 0.0;
    const double target = cumulative_.back() * index / count;
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), target);
    const int k = std::clamp(static_cast<int>(it - cumulative_.begin()), 1, kSamples);
    const double c0 = cumulative_[k - 1], c1 = cumulative_[k];
    const double frac = (c1 > c0) ? (target - c0) / (c1 - c0) : 0.0;
    return (k - 1 + frac) * length_ / kSamples;
  }

 private:
  static constexpr int kSamples = 4096;

  double side_size(double d, double ref) const {
    if (d <= ref) return std::min(hf_, hmin_ + endpoint_grading_ * d);
    return std::min(h_, hf_ + grading_ * (d - ref));
  }
  double density(double s) const {
    return 1.0 / std::min(side_size(s, ref_a_), side_size(length_ - s, ref_b_));
  }

  double length_, ref_a_, ref_b_, h_, hf_, hmin_, grading_, endpoint_grading_;
  std::vector<double> cumulative_;
};

struct Segment {
  double start = 0.0;
  double stop = 0.0;
  double length = 0.0;
  double ref_start = 0.0;
  double ref_end = 0.0;
  int electrode = -1;
};

std::vector<Segment> layout_segments(const BoundaryCurve& curve, const ElectrodeLayout& layout) {
  validate_layout(layout);
  const int m_count = layout.size();
  const auto plus = electrode_end_angles(curve, layout);
  const auto gaps = gap_lengths(curve, layout, plus);
  if (!gaps.admissible) throw GeometryError("electrode layout is inadmissible (overlapping electrodes)");
  std::vector<Segment> segs;
  segs.reserve(2 * m_count);
  for (int m = 0; m < m_count; ++m) {
    const int n = (m + 1) % m_count;
    const double next_minus = layout.theta_minus[n] + (n == 0 ? kTwoPi : 0.0);
    segs.push_back({layout.theta_minus[m], plus[m], layout.widths[m], layout.widths[m],
                    layout.widths[m], m});
    segs.push_back({plus[m], next_minus, gaps.gaps[m], layout.widths[m], layout.widths[n], -1});
  }
  return segs;
}

/// Point-in-polygon for a polygon that is star-shaped about the origin,
/// with vertices at increasing (unwrapped) polar angles.
class StarPolygon {
 public:
  StarPolygon(std::vector<Point2> vertices, std::vector<double> angles)
      : v_(std::move(vertices)), a_(std::move(angles)) {}

  bool contains(const Point2& p) const {
    const double phi = a_.front() + wrap_angle(std::atan2(p.y(), p.x()) - a_.front());
    const auto it = std::upper_bound(a_.begin(), a_.end(), phi);
    const int k = static_cast<int>(it - a_.begin()) - 1;
    const int n = static_cast<int>(v_.size());
    const int i = (k < 0) ? n - 1 : k;
    return detail::orient(v_[i], v_[(i + 1) % n], p) > 0.0;
  }

 private:
  std::vector<Point2> v_;
  std::vector<double> a_;
};

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_jitter(std::uint64_t key) {
  return static_cast<double>(mix64(key) >> 11) * 0x1.0p-53 - 0.5;
}

}  // namespace

double CemMesh::signed_area(int t) const {
  const auto& tri = triangles[t];
  return 0.5 * detail::orient(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

double CemMesh::min_angle() const {
  double best = std::numbers::pi;
  for (const auto& tri : triangles) {
    for (int i = 0; i < 3; ++i) {
      const Point2 u = nodes[tri[(i + 1) % 3]] - nodes[tri[i]];
      const Point2 w = nodes[tri[(i + 2) % 3]] - nodes[tri[i]];
      const double ang = std::atan2(std::abs(u.x() * w.y() - u.y() * w.x()), u.dot(w));
      best = std::min(best, ang);
    }
  }
  return best;
}

std::vector<std::pair<double, Point2>> boundary_positions_like(const BoundaryCurve& curve,
                                                               const ElectrodeLayout& layout,
                                                               const CemMesh& base,
                                                               const MeshOptions& options) {
  const auto segs = layout_segments(curve, layout);
  if (2 * base.num_electrodes() != static_cast<int>(segs.size()))
    throw MeshError("electrode count differs from the base mesh");
  std::vector<std::pair<double, Point2>> out;
  out.reserve(base.boundary_params.size());
  int cached_segment = -1;
  std::unique_ptr<SegmentDensity> density;
  for (const auto& param : base.boundary_params) {
    const auto& seg = segs[param.segment];
    if (param.segment != cached_segment) {
      density = std::make_unique<SegmentDensity>(seg.length, seg.ref_start, seg.ref_end, options);
      cached_segment = param.segment;
    }
    const double s = density->position(param.index, param.count);
    const double phi = (param.index == 0) ? seg.start : angle_at_arc_length(curve, seg.start, s);
    out.emplace_back(phi, curve.point(phi));
  }
  return out;
}

CemMesh build_mesh(const BoundaryCurve& curve, const ElectrodeLayout& layout,
                   const MeshOptions& options) {
  if (!(options.target_h > 0.0)) throw ConfigError("target_h must be positive");
  const auto segs = layout_segments(curve, layout);
  const int m_count = layout.size();

  CemMesh mesh;
  mesh.target_h = options.target_h;
  mesh.refinement_level = options.refinement_level;

  // Boundary sampling; every segment start is an electrode endpoint.
  for (int s = 0; s < static_cast<int>(segs.size()); ++s) {
    const auto& seg = segs[s];
    SegmentDensity density(seg.length, seg.ref_start, seg.ref_end, options);
    const int count = density.natural_count(seg.electrode >= 0 ? 2 : 1);
    for (int i = 0; i < count; ++i) {
      const double pos = density.position(i, count);
      const double phi = (i == 0) ? seg.start : angle_at_arc_length(curve, seg.start, pos);
      mesh.boundary_angles.push_back(phi);
      mesh.nodes.push_back(curve.point(phi));
      mesh.boundary_params.push_back({s, i, count});
    }
  }
  const int nb = static_cast<int>(mesh.nodes.size());
  for (int i = 0; i < nb; ++i) mesh.boundary_nodes.push_back(i);

  // Electrode endpoints and edge tags.
  mesh.electrode_endpoint_nodes.assign(m_count, {-1, -1});
  for (int i = 0; i < nb; ++i) {
    const auto& param = mesh.boundary_params[i];
    if (param.index != 0) continue;
    const int m = param.segment / 2;
    if (param.segment % 2 == 0) mesh.electrode_endpoint_nodes[m][0] = i;
    else mesh.electrode_endpoint_nodes[m][1] = i;
  }
  for (int i = 0; i < nb; ++i) {
    const int seg = mesh.boundary_params[i].segment;
    mesh.boundary_edges.push_back({i, (i + 1) % nb, (seg % 2 == 0) ? seg / 2 : -1});
  }

  // Element size field driven by the local boundary spacing.
  std::vector<double> local_spacing(nb);
  for (int i = 0; i < nb; ++i) {
    const double prev = (mesh.nodes[i] - mesh.nodes[(i + nb - 1) % nb]).norm();
    const double next = (mesh.nodes[(i + 1) % nb] - mesh.nodes[i]).norm();
    local_spacing[i] = std::max(prev, next);
  }
  const auto size_at = [&](const Point2& x) {
    double s = options.target_h;
    for (int i = 0; i < nb; ++i)
      s = std::min(s, local_spacing[i] + options.grading * (x - mesh.nodes[i]).norm());
    return s;
  };

  const StarPolygon polygon(mesh.nodes, mesh.boundary_angles);
  const auto encroaches = [&](const Point2& p) {
    for (int i = 0; i < nb; ++i) {
      const Point2& a = mesh.nodes[i];
      const Point2& b = mesh.nodes[(i + 1) % nb];
      const Point2 mid = 0.5 * (a + b);
      if ((p - mid).squaredNorm() < 0.25 * (b - a).squaredNorm() * (1.0 + 1e-9)) return true;
    }
    return false;
  };

  detail::Triangulation tri(mesh.nodes, Point2(0.0, 0.0));
  std::deque<std::pair<int, std::uint32_t>> queue;
  for (int t = 0; t < static_cast<int>(tri.triangles().size()); ++t)
    if (tri.triangles()[t].alive) queue.emplace_back(t, tri.triangles()[t].stamp);

  const double area_est = std::numbers::pi * curve.max_radius() * curve.max_radius();
  const double hf = options.endpoint_fraction * options.target_h;
  const std::size_t max_points = static_cast<std::size_t>(
      50.0 * area_est / (hf * options.target_h) + 20.0 * nb + 10000);
  std::vector<int> created;
  while (!queue.empty()) {
    const auto [t, stamp] = queue.front();
    queue.pop_front();
    const auto& T = tri.triangles()[t];
    if (!T.alive || T.stamp != stamp) continue;
    const Point2& a = tri.points()[T.v[0]];
    const Point2& b = tri.points()[T.v[1]];
    const Point2& c = tri.points()[T.v[2]];
    const Point2 cc = detail::circumcenter(a, b, c);
    const double radius = (cc - a).norm();
    const double shortest = std::min({(b - a).norm(), (c - b).norm(), (a - c).norm()});
    const double size = size_at((a + b + c) / 3.0);
    const bool bad = radius > 0.62 * size || radius > options.quality_bound * shortest;
    if (!bad) continue;
    if (!polygon.contains(cc) || encroaches(cc)) continue;
    created.clear();
    if (tri.insert(cc, t, &created) < 0) continue;
    for (int id : created) queue.emplace_back(id, tri.triangles()[id].stamp);
    if (tri.points().size() > max_points) throw MeshError("mesh refinement did not terminate");
  }

  mesh.nodes = tri.points();
  mesh.triangles = tri.live_triangles();
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (!(mesh.signed_area(t) > 0.0)) throw MeshError("degenerate or inverted triangle in mesh");
  if (mesh.min_angle() < options.sliver_angle_deg * std::numbers::pi / 180.0)
    throw MeshError("sliver triangles: geometry too degenerate for target_h");
  return mesh;
}

MeshMorpher::MeshMorpher(const BoundaryCurve& curve, CemMesh base, MeshOptions options)
    : curve_(curve), base_(std::move(base)), options_(options) {
  const int n = base_.num_nodes();
  const int nb = static_cast<int>(base_.boundary_nodes.size());
  interior_index_.assign(n, -1);
  int ni = 0;
  for (int i = nb; i < n; ++i) interior_index_[i] = ni++;

  std::vector<Eigen::Triplet<double>> lii, lib;
  std::vector<std::pair<int, int>> edges;
  for (const auto& tri : base_.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [a, b] : edges) {
    for (const auto& [p, q] : {std::pair{a, b}, std::pair{b, a}}) {
      const int ip = interior_index_[p];
      if (ip < 0) continue;
      lii.emplace_back(ip, ip, 1.0);
      if (interior_index_[q] >= 0) lii.emplace_back(ip, interior_index_[q], -1.0);
      else lib.emplace_back(ip, q, -1.0);
    }
  }
  SparseMatrix l(ni, ni);
  l.setFromTriplets(lii.begin(), lii.end());
  coupling_.resize(ni, nb);
  coupling_.setFromTriplets(lib.begin(), lib.end());
  laplacian_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(l);
  if (laplacian_->info() != Eigen::Success) throw MeshError("mesh Laplacian factorization failed");
}

CemMesh MeshMorpher::morph(const ElectrodeLayout& layout) const {
  const auto bnd = boundary_positions_like(curve_, layout, base_, options_);
  const int nb = static_cast<int>(bnd.size());
  CemMesh out = base_;
  Eigen::MatrixXd disp(nb, 2);
  for (int i = 0; i < nb; ++i) {
    out.boundary_angles[i] = bnd[i].first;
    disp.row(i) = (bnd[i].second - base_.nodes[i]).transpose();
    out.nodes[i] = bnd[i].second;
  }
  if (coupling_.rows() > 0) {
    const Eigen::MatrixXd rhs = -(coupling_ * disp);
    const Eigen::MatrixXd inner = laplacian_->solve(rhs);
    for (int i = nb; i < base_.num_nodes(); ++i)
      out.nodes[i] = base_.nodes[i] + inner.row(interior_index_[i]).transpose();
  }
  for (int t = 0; t < out.num_triangles(); ++t)
    if (!(out.signed_area(t) > 0.0)) throw MeshError("morphed mesh has inverted triangles");
  return out;
}

BackgroundMesh build_background(const BoundaryCurve& curve, double spacing, double scale) {
  if (!(spacing > 0.0)) throw ConfigError("background spacing must be positive");
  BackgroundMesh bg;
  bg.radius = scale * curve.max_radius();
  bg.spacing = spacing;
  const int ring = std::max(8, static_cast<int>(std::ceil(kTwoPi * bg.radius / spacing)));
  std::vector<Point2> polygon;
  for (int k = 0; k < ring; ++k) {
    const double phi = kTwoPi * k / ring;
    polygon.emplace_back(bg.radius * std::cos(phi), bg.radius * std::sin(phi));
  }
  detail::Triangulation tri(polygon, Point2(0.0, 0.0));
  const double dy = spacing * std::sqrt(3.0) / 2.0;
  const int rows = static_cast<int>(std::ceil(bg.radius / dy));
  const int cols = static_cast<int>(std::ceil(bg.radius / spacing)) + 1;
  int hint = 0;
  for (int j = -rows; j <= rows; ++j) {
    for (int i = -cols; i <= cols; ++i) {
      if (i == 0 && j == 0) continue;
      const std::uint64_t key = (static_cast<std::uint64_t>(j + 4096) << 20) ^ static_cast<std::uint64_t>(i + 4096);
      Point2 p((i + ((j & 1) ? 0.5 : 0.0)) * spacing, j * dy);
      p += 1e-3 * spacing * Point2(unit_jitter(2 * key), unit_jitter(2 * key + 1));
      if (p.norm() > bg.radius - 0.5 * spacing) continue;
      std::vector<int> created;
      if (tri.insert(p, hint, &created) >= 0 && !created.empty()) hint = created.front();
    }
  }
  bg.nodes = tri.points();
  bg.triangles = tri.live_triangles();
  return bg;
}

namespace {

/// Uniform bucket grid over the background triangles.
class BackgroundLocator {
 public:
  explicit BackgroundLocator(const BackgroundMesh& bg)
      : bg_(bg), extent_(bg.radius * 1.0001),
        cells_(std::max(1, static_cast<int>(std::ceil(2.0 * extent_ / bg.spacing)))),
        cell_(2.0 * extent_ / cells_), buckets_(static_cast<std::size_t>(cells_) * cells_) {
    for (int t = 0; t < static_cast<int>(bg.triangles.size()); ++t) {
      const auto box = bounds(bg.triangles[t], bg.nodes);
      for (int cy = cell_of(box[2]); cy <= cell_of(box[3]); ++cy)
        for (int cx = cell_of(box[0]); cx <= cell_of(box[1]); ++cx)
          buckets_[static_cast<std::size_t>(cy) * cells_ + cx].push_back(t);
    }
  }

  int cell_of(double v) const {
    return std::clamp(static_cast<int>(std::floor((v + extent_) / cell_)), 0, cells_ - 1);
  }
  const std::vector<int>& bucket(int cx, int cy) const {
    return buckets_[static_cast<std::size_t>(cy) * cells_ + cx];
  }

  /// Triangles whose bucket overlaps the box {x0, x1, y0, y1}, without duplicates.
  std::vector<int> candidates(const std::array<double, 4>& box) const {
    std::vector<int> out;
    for (int cy = cell_of(box[2]); cy <= cell_of(box[3]); ++cy)
      for (int cx = cell_of(box[0]); cx <= cell_of(box[1]); ++cx)
        for (int t : bucket(cx, cy)) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  static std::array<double, 4> bounds(const std::array<int, 3>& tri, const std::vector<Point2>& nodes) {
    std::array<double, 4> b{1e300, -1e300, 1e300, -1e300};
    for (int k : tri) {
      b[0] = std::min(b[0], nodes[k].x()); b[1] = std::max(b[1], nodes[k].x());
      b[2] = std::min(b[2], nodes[k].y()); b[3] = std::max(b[3], nodes[k].y());
    }
    return b;
  }

 private:
  const BackgroundMesh& bg_;
  double extent_;
  int cells_;
  double cell_;
  std::vector<std::vector<int>> buckets_;
};

std::array<double, 3> barycentric(const Point2& p, const Point2& a, const Point2& b, const Point2& c) {
  const double area = detail::orient(a, b, c);
  return {detail::orient(p, b, c) / area, detail::orient(a, p, c) / area, detail::orient(a, b, p) / area};
}

/// Convex polygon with room for a triangle clipped by three half-planes.
struct SmallPolygon {
  std::array<Point2, 12> v;
  int size = 0;
};

/// Sutherland-Hodgman clip of a polygon against the left side of the directed line a -> b.
SmallPolygon clip_left(const SmallPolygon& poly, const Point2& a, const Point2& b) {
  SmallPolygon out;
  for (int i = 0; i < poly.size; ++i) {
    const Point2& p = poly.v[i];
    const Point2& q = poly.v[(i + 1) % poly.size];
    const double sp = detail::orient(a, b, p), sq = detail::orient(a, b, q);
    if (sp >= 0.0) out.v[out.size++] = p;
    if ((sp >= 0.0) != (sq >= 0.0)) out.v[out.size++] = p + (q - p) * (sp / (sp - sq));
  }
  return out;
}

}  // namespace

ProjectionMap build_projection(const BackgroundMesh& bg, const std::vector<Point2>& points) {
  const BackgroundLocator grid(bg);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(3 * points.size());
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const Point2& p = points[i];
    int best = -1;
    double best_min = -1e300;
    std::array<double, 3> best_w{};
    for (int t : grid.bucket(grid.cell_of(p.x()), grid.cell_of(p.y()))) {
      const auto& tri = bg.triangles[t];
      const auto w = barycentric(p, bg.nodes[tri[0]], bg.nodes[tri[1]], bg.nodes[tri[2]]);
      const double mn = std::min({w[0], w[1], w[2]});
      if (mn > best_min) { best_min = mn; best = t; best_w = w; }
    }
    if (best < 0 || best_min < -1e-9)
      throw MeshError("mesh node lies outside the background domain");
    double sum = 0.0;
    for (auto& w : best_w) { w = std::max(w, 0.0); sum += w; }
    for (int k = 0; k < 3; ++k)
      if (best_w[k] > 0.0) trips.emplace_back(i, bg.triangles[best][k], best_w[k] / sum);
  }
  ProjectionMap out;
  out.weights.resize(static_cast<int>(points.size()), bg.num_nodes());
  out.weights.setFromTriplets(trips.begin(), trips.end());
  return out;
}

ElementProjection build_element_projection(const BackgroundMesh& bg, const CemMesh& mesh) {
  const BackgroundLocator grid(bg);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(12 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    std::vector<Point2> subject{mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]};
    if (detail::orient(subject[0], subject[1], subject[2]) < 0.0) std::swap(subject[1], subject[2]);
    const double area = 0.5 * std::abs(detail::orient(subject[0], subject[1], subject[2]));
    const auto box = BackgroundLocator::bounds(tri, mesh.nodes);
    // Fast path: the whole triangle sits inside one background triangle.
    bool inside_one = false;
    for (int b : grid.bucket(grid.cell_of(subject[0].x()), grid.cell_of(subject[0].y()))) {
      const auto& btri = bg.triangles[b];
      const Point2& p0 = bg.nodes[btri[0]];
      const Point2& p1 = bg.nodes[btri[1]];
      const Point2& p2 = bg.nodes[btri[2]];
      bool all = true;
      for (int k = 0; k < 3 && all; ++k) {
        const auto w = barycentric(subject[k], p0, p1, p2);
        all = std::min({w[0], w[1], w[2]}) >= 0.0;
      }
      if (!all) continue;
      const Point2 c = (subject[0] + subject[1] + subject[2]) / 3.0;
      const auto w = barycentric(c, p0, p1, p2);
      for (int k = 0; k < 3; ++k) trips.emplace_back(t, btri[k], w[k]);
      inside_one = true;
      break;
    }
    if (inside_one) continue;
    double covered = 0.0;
    for (int b : grid.candidates(box)) {
      const auto& btri = bg.triangles[b];
      std::array<Point2, 3> v{bg.nodes[btri[0]], bg.nodes[btri[1]], bg.nodes[btri[2]]};
      std::array<int, 3> ids = btri;
      if (detail::orient(v[0], v[1], v[2]) < 0.0) { std::swap(v[1], v[2]); std::swap(ids[1], ids[2]); }
      SmallPolygon piece;
      for (const auto& p : subject) piece.v[piece.size++] = p;
      for (int k = 0; k < 3 && piece.size >= 3; ++k) piece = clip_left(piece, v[k], v[(k + 1) % 3]);
      if (piece.size < 3) continue;
      // Area and centroid of the clipped polygon, relative to its first vertex;
      // P1 integrals are exact at the centroid.
      const Point2 o = piece.v[0];
      double a2 = 0.0;
      Point2 c = Point2::Zero();
      for (int k = 1; k + 1 < piece.size; ++k) {
        const Point2 p = piece.v[k] - o, q = piece.v[k + 1] - o;
        const double cr = p.x() * q.y() - q.x() * p.y();
        a2 += cr;
        c += (p + q) * cr;
      }
      if (a2 <= 0.0) continue;
      c = o + c / (3.0 * a2);
      const double piece_area = 0.5 * a2;
      covered += piece_area;
      const auto w = barycentric(c, v[0], v[1], v[2]);
      for (int k = 0; k < 3; ++k) trips.emplace_back(t, ids[k], piece_area * w[k] / area);
    }
    if (std::abs(covered - area) > 1e-9 * area + 1e-15)
      throw MeshError("mesh triangle is not covered by the background domain");
  }
  ElementProjection out;
  out.weights.resize(mesh.num_triangles(), bg.num_nodes());
  out.weights.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SparseMatrix element_averaging(const CemMesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(3 * mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t)
    for (int k : mesh.triangles[t]) trips.emplace_back(t, k, 1.0 / 3.0);
  SparseMatrix e(mesh.num_triangles(), mesh.num_nodes());
  e.setFromTriplets(trips.begin(), trips.end());
  return e;
}

ProjectionMap build_projection(const BackgroundMesh& bg, const CemMesh& mesh) {
  return build_projection(bg, mesh.nodes);
}

nlohmann::json mesh_to_json(const CemMesh& mesh) {
  nlohmann::json j;
  j["schema"] = "eitopt.mesh/1";
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& p : mesh.nodes) nodes.push_back({p.x(), p.y()});
  j["triangles"] = mesh.triangles;
  auto& edges = j["boundary_edges"] = nlohmann::json::array();
  for (const auto& e : mesh.boundary_edges)
    edges.push_back({{"a", e.a}, {"b", e.b}, {"electrode", e.electrode}});
  j["electrode_endpoint_nodes"] = mesh.electrode_endpoint_nodes;
  j["target_h"] = mesh.target_h;
  j["refinement_level"] = mesh.refinement_level;
  return j;
}

nlohmann::json background_to_json(const BackgroundMesh& bg) {
  nlohmann::json j;
  j["schema"] = "eitopt.background/1";
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& p : bg.nodes) nodes.push_back({p.x(), p.y()});
  j["triangles"] = bg.triangles;
  j["radius"] = bg.radius;
  j["spacing"] = bg.spacing;
  return j;
}

}  // namespace eitopt
