#include "eitopt/errors.hpp"
#include "eitopt/mesh.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <map>
#include <random>
#include <set>

using namespace eitopt;
constexpr double kPi = std::numbers::pi;

namespace {

MeshOptions with_h(double h) {
  MeshOptions o;
  o.target_h = h;
  return o;
}

int count_electrode_edges(const CemMesh& mesh, int m) {
  int c = 0;
  for (const auto& e : mesh.boundary_edges) c += (e.electrode == m);
  return c;
}

}  // namespace

TEST_CASE("mesh conforms to electrode endpoints") {
  const auto disk = BoundaryCurve::disk();
  const auto lay = ElectrodeLayout::equidistant(4, kPi / 16, 1.0, 0.1);
  const auto mesh = build_mesh(disk, lay, with_h(0.1));
  const auto plus = electrode_end_angles(disk, lay);
  REQUIRE(mesh.num_electrodes() == 4);
  for (int m = 0; m < 4; ++m) {
    const int a = mesh.electrode_endpoint_nodes[m][0];
    const int b = mesh.electrode_endpoint_nodes[m][1];
    CHECK(mesh.boundary_angles[a] == lay.theta_minus[m]);
    CHECK(mesh.boundary_angles[b] == plus[m]);
    CHECK((mesh.nodes[a] - disk.point(lay.theta_minus[m])).norm() == 0.0);
  }
  for (int t = 0; t < mesh.num_triangles(); ++t) CHECK(mesh.signed_area(t) > 0.0);
}

TEST_CASE("electrode edges form one chain between endpoints") {
  const auto p = BoundaryCurve::peanut();
  const auto lay = ElectrodeLayout::equidistant(6, 0.2, 1.0, 0.3);
  const auto mesh = build_mesh(p, lay, with_h(0.1));
  const int nb = static_cast<int>(mesh.boundary_nodes.size());
  for (int m = 0; m < 6; ++m) {
    int node = mesh.electrode_endpoint_nodes[m][0];
    int steps = 0;
    while (node != mesh.electrode_endpoint_nodes[m][1]) {
      REQUIRE(mesh.boundary_edges[node].a == node);
      CHECK(mesh.boundary_edges[node].electrode == m);
      node = mesh.boundary_edges[node].b;
      ++steps;
      REQUIRE(steps <= nb);
    }
    CHECK(steps == count_electrode_edges(mesh, m));
  }
}

TEST_CASE("boundary spacing and endpoint refinement") {
  const auto p = BoundaryCurve::peanut();
  const auto lay = ElectrodeLayout::equidistant(4, 0.25, 1.0, 0.2);
  const double h = 0.1;
  const auto mesh = build_mesh(p, lay, with_h(h));
  const auto plus = electrode_end_angles(p, lay);
  std::vector<Point2> ends;
  for (int m = 0; m < 4; ++m) {
    ends.push_back(p.point(lay.theta_minus[m]));
    ends.push_back(p.point(plus[m]));
  }
  for (const auto& e : mesh.boundary_edges) {
    const Point2& a = mesh.nodes[e.a];
    const Point2& b = mesh.nodes[e.b];
    const double len = (b - a).norm();
    CHECK(len <= h * (1 + 1e-9));
    double dist = 1e9;
    for (const auto& q : ends) dist = std::min({dist, (a - q).norm(), (b - q).norm()});
    if (dist <= 0.25) CHECK(len <= h / 4 * (1 + 1e-6));
    if (dist < 1e-12) CHECK(len <= 1.3 * h / 32);
  }
}

TEST_CASE("halving target_h roughly doubles the boundary node count") {
  const auto disk = BoundaryCurve::disk();
  const auto lay = ElectrodeLayout::equidistant(4, kPi / 16);
  auto opts = with_h(0.2);
  opts.endpoint_min_fraction = opts.endpoint_fraction;
  const auto coarse = build_mesh(disk, lay, opts);
  opts.target_h = 0.1;
  const auto fine = build_mesh(disk, lay, opts);
  const double ratio = static_cast<double>(fine.boundary_nodes.size()) / coarse.boundary_nodes.size();
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("mesh quality and determinism") {
  const auto c = BoundaryCurve::custom_radial({1.0, 0.05, 0.12, -0.04}, {0.0, 0.08, -0.03, 0.05});
  const auto lay = ElectrodeLayout::equidistant(8, 0.15, 1.0, 0.05);
  const auto a = build_mesh(c, lay, with_h(0.1));
  const auto b = build_mesh(c, lay, with_h(0.1));
  CHECK(a.min_angle() > 15.0 * kPi / 180.0);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) CHECK(a.nodes[i] == b.nodes[i]);
  CHECK(a.triangles == b.triangles);
  double area = 0.0;
  for (int t = 0; t < a.num_triangles(); ++t) area += a.signed_area(t);
  double poly = 0.0;
  const int nb = static_cast<int>(a.boundary_nodes.size());
  for (int i = 0; i < nb; ++i) {
    const Point2& p = a.nodes[i];
    const Point2& q = a.nodes[(i + 1) % nb];
    poly += 0.5 * (p.x() * q.y() - p.y() * q.x());
  }
  CHECK(area == doctest::Approx(poly).epsilon(1e-12));
}

TEST_CASE("every node belongs to a triangle and edges are shared at most twice") {
  const auto disk = BoundaryCurve::disk();
  const auto mesh = build_mesh(disk, ElectrodeLayout::equidistant(12, kPi / 16), with_h(0.15));
  std::vector<int> used(mesh.num_nodes(), 0);
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      used[t[k]] = 1;
      const int a = t[k], b = t[(k + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  CHECK(std::all_of(used.begin(), used.end(), [](int u) { return u == 1; }));
  int boundary = 0;
  for (const auto& [e, n] : edges) {
    CHECK(n <= 2);
    boundary += (n == 1);
  }
  CHECK(boundary == static_cast<int>(mesh.boundary_nodes.size()));
}

TEST_CASE("morphing the base layout reproduces the base mesh") {
  const auto p = BoundaryCurve::peanut();
  const auto lay = ElectrodeLayout::equidistant(4, 0.2, 1.0, 0.2);
  const auto opts = with_h(0.12);
  const auto base = build_mesh(p, lay, opts);
  const MeshMorpher morpher(p, base, opts);
  const auto same = morpher.morph(lay);
  for (int i = 0; i < base.num_nodes(); ++i) CHECK((same.nodes[i] - base.nodes[i]).norm() < 1e-13);

  auto moved = lay;
  moved.theta_minus[1] += 0.01;
  const auto m = morpher.morph(moved);
  const auto plus = electrode_end_angles(p, moved);
  CHECK((m.nodes[m.electrode_endpoint_nodes[1][0]] - p.point(moved.theta_minus[1])).norm() < 1e-14);
  CHECK((m.nodes[m.electrode_endpoint_nodes[1][1]] - p.point(plus[1])).norm() < 1e-12);
  for (int t = 0; t < m.num_triangles(); ++t) CHECK(m.signed_area(t) > 0.0);
}

TEST_CASE("background projection") {
  const auto p = BoundaryCurve::peanut();
  const auto bg = build_background(p, 0.1);
  const auto mesh = build_mesh(p, ElectrodeLayout::equidistant(4, 0.2), with_h(0.1));
  const auto proj = build_projection(bg, mesh);
  REQUIRE(proj.weights.rows() == mesh.num_nodes());
  REQUIRE(proj.weights.cols() == bg.num_nodes());
  for (int r = 0; r < proj.weights.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(proj.weights, r); it; ++it) CHECK(it.value() >= 0.0);

  Eigen::VectorXd one = Eigen::VectorXd::Ones(bg.num_nodes());
  Eigen::VectorXd lin(bg.num_nodes());
  for (int i = 0; i < bg.num_nodes(); ++i) lin[i] = 0.3 + 1.7 * bg.nodes[i].x() - 0.6 * bg.nodes[i].y();
  const Eigen::VectorXd pone = proj.weights * one;
  const Eigen::VectorXd plin = proj.weights * lin;
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    CHECK(std::abs(pone[i] - 1.0) < 1e-13);
    CHECK(std::abs(plin[i] - (0.3 + 1.7 * mesh.nodes[i].x() - 0.6 * mesh.nodes[i].y())) < 1e-12);
  }

  // Each value lies between the min and max of its supporting background nodes.
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  Eigen::VectorXd rnd(bg.num_nodes());
  for (auto& v : rnd) v = u(rng);
  const Eigen::VectorXd prnd = proj.weights * rnd;
  SparseMatrix rowmajor = proj.weights;
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows = rowmajor;
  for (int i = 0; i < rows.outerSize(); ++i) {
    double lo = 1e300, hi = -1e300;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, i); it; ++it) {
      lo = std::min(lo, rnd[it.col()]);
      hi = std::max(hi, rnd[it.col()]);
    }
    CHECK(prnd[i] >= lo - 1e-12);
    CHECK(prnd[i] <= hi + 1e-12);
  }

  CHECK_THROWS_AS(build_projection(bg, std::vector<Point2>{Point2(5.0, 0.0)}), MeshError);
}

TEST_CASE("background contains the domain for any layout") {
  const auto p = BoundaryCurve::peanut();
  const auto bg = build_background(p, 0.1);
  for (int i = 0; i < 720; ++i) CHECK(p.point(2 * kPi * i / 720).norm() < bg.radius);
}

TEST_CASE("element projection gives exact cell averages of background functions") {
  const auto p = BoundaryCurve::peanut();
  const auto bg = build_background(p, 0.15);
  const auto mesh = build_mesh(p, ElectrodeLayout::equidistant(4, 0.2), with_h(0.1));
  const auto q = build_element_projection(bg, mesh);
  REQUIRE(q.weights.rows() == mesh.num_triangles());
  REQUIRE(q.weights.cols() == bg.num_nodes());
  for (int r = 0; r < q.weights.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(q.weights, r); it; ++it) CHECK(it.value() >= 0.0);

  Eigen::VectorXd one = Eigen::VectorXd::Ones(bg.num_nodes());
  Eigen::VectorXd lin(bg.num_nodes()), rnd(bg.num_nodes());
  for (int i = 0; i < bg.num_nodes(); ++i) lin[i] = 0.3 + 1.7 * bg.nodes[i].x() - 0.6 * bg.nodes[i].y();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : rnd) v = u(rng);
  const Eigen::VectorXd qone = q.weights * one, qlin = q.weights * lin, qrnd = q.weights * rnd;

  // Oracle: ten-fold uniform subdivision of each triangle, interpolant at sub-centroids.
  const int k = 10;
  std::vector<Point2> pts;
  for (int t = 0; t < mesh.num_triangles(); t += 7) {
    const auto& tri = mesh.triangles[t];
    const Point2 a = mesh.nodes[tri[0]], e1 = (mesh.nodes[tri[1]] - a) / k, e2 = (mesh.nodes[tri[2]] - a) / k;
    for (int i = 0; i < k; ++i)
      for (int j = 0; i + j < k; ++j) {
        pts.push_back(a + e1 * (i + 1.0 / 3) + e2 * (j + 1.0 / 3));
        if (i + j + 1 < k) pts.push_back(a + e1 * (i + 2.0 / 3) + e2 * (j + 2.0 / 3));
      }
  }
  const Eigen::VectorXd at = build_projection(bg, pts).weights * rnd;
  const int per = k * k;
  for (int t = 0, s = 0; t < mesh.num_triangles(); ++t) {
    CHECK(std::abs(qone[t] - 1.0) < 1e-12);
    const auto& tri = mesh.triangles[t];
    const Point2 c = (mesh.nodes[tri[0]] + mesh.nodes[tri[1]] + mesh.nodes[tri[2]]) / 3.0;
    CHECK(std::abs(qlin[t] - (0.3 + 1.7 * c.x() - 0.6 * c.y())) < 1e-12);
    if (t % 7 == 0) {
      // Sub-triangles cut by a background edge carry an error of order (h/k)^2 x slope jump.
      CHECK(std::abs(qrnd[t] - at.segment(s, per).mean()) < 5e-3);
      s += per;
    }
  }
}

TEST_CASE("element averaging") {
  const auto mesh = build_mesh(BoundaryCurve::disk(), ElectrodeLayout::equidistant(3, 0.3), with_h(0.2));
  const SparseMatrix avg = element_averaging(mesh);
  CHECK(avg.rows() == mesh.num_triangles());
  CHECK(avg.cols() == mesh.num_nodes());
  CHECK(avg.nonZeros() == 3 * mesh.num_triangles());
  const Eigen::VectorXd s = avg * Eigen::VectorXd::Ones(mesh.num_nodes());
  CHECK((s.array() - 1.0).abs().maxCoeff() < 1e-15);
}
