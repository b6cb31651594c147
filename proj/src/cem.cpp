#include "eitopt/cem.hpp"

#include "eitopt/errors.hpp"

#include <cmath>
#include <vector>

namespace eitopt {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Gradients of the three P1 basis functions on a triangle; returns twice the area.
double basis_gradients(const CemMesh& mesh, const std::array<int, 3>& tri,
                       std::array<Point2, 3>& grad) {
  const Point2& a = mesh.nodes[tri[0]];
  const Point2& b = mesh.nodes[tri[1]];
  const Point2& c = mesh.nodes[tri[2]];
  const double det = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
  grad[0] = Point2(b.y() - c.y(), c.x() - b.x()) / det;
  grad[1] = Point2(c.y() - a.y(), a.x() - c.x()) / det;
  grad[2] = Point2(a.y() - b.y(), b.x() - a.x()) / det;
  return det;
}

}  // namespace

Eigen::MatrixXd feeding_patterns(int electrodes, int feeding_index) {
  if (electrodes < 2) throw ConfigError("at least two electrodes are required");
  if (feeding_index < 0 || feeding_index >= electrodes)
    throw ConfigError("feeding electrode index out of range");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(electrodes, electrodes - 1);
  int col = 0;
  for (int m = 0; m < electrodes; ++m) {
    if (m == feeding_index) continue;
    p(feeding_index, col) = 1.0;
    p(m, col) = -1.0;
    ++col;
  }
  return p;
}

Eigen::MatrixXd dual_patterns(int electrodes) {
  return Eigen::MatrixXd::Identity(electrodes, electrodes) -
         Eigen::MatrixXd::Constant(electrodes, electrodes, 1.0 / electrodes);
}

void check_conductivity(const Eigen::VectorXd& sigma, int expected_size) {
  if (sigma.size() != expected_size)
    throw ConfigError("conductivity has " + std::to_string(sigma.size()) + " values, expected " +
                      std::to_string(expected_size));
  for (int i = 0; i < sigma.size(); ++i)
    if (!(sigma[i] > 0.0)) throw ConfigError("conductivity must be strictly positive");
}

CemSystem::CemSystem(const CemMesh& mesh, const Eigen::VectorXd& sigma,
                     const ElectrodeLayout& layout, SigmaBasis basis)
    : n_(mesh.num_nodes()), m_(layout.size()) {
  const bool nodal = basis == SigmaBasis::Nodal;
  check_conductivity(sigma, nodal ? n_ : mesh.num_triangles());
  if (mesh.num_electrodes() != m_) throw ConfigError("mesh and layout disagree on electrode count");
  const int dim = n_ + m_;

  Triplets k;
  k.reserve(9 * mesh.triangles.size());
  std::array<Point2, 3> grad;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double det = basis_gradients(mesh, tri, grad);
    const double s = nodal ? (sigma[tri[0]] + sigma[tri[1]] + sigma[tri[2]]) / 3.0 : sigma[t];
    const double w = 0.5 * det * s;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) k.emplace_back(tri[a], tri[b], w * grad[a].dot(grad[b]));
  }
  stiffness_.resize(dim, dim);
  stiffness_.setFromTriplets(k.begin(), k.end());

  // (1/z) * integral over E_m of (U - u)(V - v); P1 products are integrated exactly.
  Triplets c;
  lengths_ = Eigen::VectorXd::Zero(m_);
  for (const auto& e : mesh.boundary_edges) {
    if (e.electrode < 0) continue;
    const int m = e.electrode;
    const double len = (mesh.nodes[e.b] - mesh.nodes[e.a]).norm();
    const double iz = 1.0 / layout.contact_impedance[m];
    lengths_[m] += len;
    const int um = n_ + m;
    c.emplace_back(e.a, e.a, iz * len / 3.0);
    c.emplace_back(e.b, e.b, iz * len / 3.0);
    c.emplace_back(e.a, e.b, iz * len / 6.0);
    c.emplace_back(e.b, e.a, iz * len / 6.0);
    for (int node : {e.a, e.b}) {
      c.emplace_back(node, um, -iz * len / 2.0);
      c.emplace_back(um, node, -iz * len / 2.0);
    }
    c.emplace_back(um, um, iz * len);
  }
  contact_.resize(dim, dim);
  contact_.setFromTriplets(c.begin(), c.end());

  Triplets q;
  for (int i = 0; i < n_; ++i) q.emplace_back(i, i, 1.0);
  for (int m = 0; m + 1 < m_; ++m) {
    q.emplace_back(n_ + m, n_ + m, 1.0);
    q.emplace_back(n_ + m_ - 1, n_ + m, -1.0);
  }
  reduction_.resize(dim, dim - 1);
  reduction_.setFromTriplets(q.begin(), q.end());

  const SparseMatrix reduced = SparseMatrix(reduction_.transpose()) * (stiffness_ + contact_) * reduction_;
  factor_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(reduced);
  if (factor_->info() != Eigen::Success) throw SolverError("CEM system factorization failed");
  const auto& d = factor_->vectorD();
  if (!(d.minCoeff() > 0.0)) throw SolverError("CEM system is not positive definite");
}

CemSolution CemSystem::solve_general(const Eigen::MatrixXd& f_u, const Eigen::MatrixXd& f_U) const {
  const int cols = static_cast<int>(f_u.cols());
  if (f_u.rows() != n_ || f_U.rows() != m_ || f_U.cols() != cols)
    throw ConfigError("right-hand side has inconsistent shape");
  Eigen::MatrixXd full(n_ + m_, cols);
  full.topRows(n_) = f_u;
  full.bottomRows(m_) = f_U;
  const Eigen::MatrixXd reduced = reduction_.transpose() * full;
  const Eigen::MatrixXd y = factor_->solve(reduced);
  if (factor_->info() != Eigen::Success) throw SolverError("CEM solve failed");
  const Eigen::MatrixXd x = reduction_ * y;
  return {x.topRows(n_), x.bottomRows(m_)};
}

CemSolution CemSystem::solve(const Eigen::MatrixXd& patterns) const {
  if (patterns.rows() != m_) throw ConfigError("current pattern length differs from electrode count");
  for (int j = 0; j < patterns.cols(); ++j)
    if (std::abs(patterns.col(j).sum()) > 1e-12 * std::max(1.0, patterns.col(j).cwiseAbs().sum()))
      throw ConfigError("current patterns must sum to zero");
  return solve_general(Eigen::MatrixXd::Zero(n_, patterns.cols()), patterns);
}

Eigen::VectorXd stack_potentials(const Eigen::MatrixXd& U) {
  return Eigen::Map<const Eigen::VectorXd>(U.data(), U.size());
}

Eigen::VectorXd measurement_map(const CemMesh& mesh, const Eigen::VectorXd& sigma,
                                const ElectrodeLayout& layout, const Eigen::MatrixXd& patterns,
                                SigmaBasis basis) {
  const CemSystem sys(mesh, sigma, layout, basis);
  return stack_potentials(sys.solve(patterns).U);
}

Eigen::MatrixXd resistance_matrix(const CemSystem& system) {
  const int m = system.num_electrodes();
  return system.solve(dual_patterns(m)).U;
}

Eigen::VectorXd recovered_currents(const CemMesh& mesh, const ElectrodeLayout& layout,
                                   const Eigen::VectorXd& u, const Eigen::VectorXd& U) {
  Eigen::VectorXd current = Eigen::VectorXd::Zero(layout.size());
  for (const auto& e : mesh.boundary_edges) {
    if (e.electrode < 0) continue;
    const double len = (mesh.nodes[e.b] - mesh.nodes[e.a]).norm();
    current[e.electrode] += len * (U[e.electrode] - 0.5 * (u[e.a] + u[e.b]));
  }
  for (int m = 0; m < layout.size(); ++m) current[m] /= layout.contact_impedance[m];
  return current;
}

double gap_flux(const CemSystem& system, const CemMesh& mesh, const Eigen::VectorXd& u) {
  const int n = mesh.num_nodes();
  std::vector<char> touches(mesh.boundary_nodes.size(), 0);
  for (const auto& e : mesh.boundary_edges)
    if (e.electrode >= 0) touches[e.a] = touches[e.b] = 1;
  Eigen::VectorXd full = Eigen::VectorXd::Zero(n + system.num_electrodes());
  full.head(n) = u;
  const Eigen::VectorXd flux = system.stiffness() * full;
  double worst = 0.0;
  for (std::size_t i = 0; i < touches.size(); ++i)
    if (!touches[i]) worst = std::max(worst, std::abs(flux[static_cast<int>(i)]));
  return worst;
}

}  // namespace eitopt
