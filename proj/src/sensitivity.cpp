#include "eitopt/sensitivity.hpp"

#include "eitopt/errors.hpp"

#include <array>

namespace eitopt {

namespace {

/// Per-triangle area and P1 basis gradients, computed once per mesh.
struct ElementGeometry {
  std::vector<double> third_area;
  std::vector<std::array<Point2, 3>> grad;

  explicit ElementGeometry(const CemMesh& mesh) {
    third_area.reserve(mesh.triangles.size());
    grad.reserve(mesh.triangles.size());
    for (const auto& tri : mesh.triangles) {
      const Point2& a = mesh.nodes[tri[0]];
      const Point2& b = mesh.nodes[tri[1]];
      const Point2& c = mesh.nodes[tri[2]];
      const double det = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
      third_area.push_back(det / 6.0);
      grad.push_back({Point2(b.y() - c.y(), c.x() - b.x()) / det,
                      Point2(c.y() - a.y(), a.x() - c.x()) / det,
                      Point2(a.y() - b.y(), b.x() - a.x()) / det});
    }
  }
};

/// Element gradients of every column of `values` (n x K) on triangle t, as 2 x K.
Eigen::Matrix<double, 2, Eigen::Dynamic> element_gradient(const ElementGeometry& geo,
                                                          const std::array<int, 3>& tri, int t,
                                                          const Eigen::MatrixXd& values) {
  Eigen::Matrix<double, 2, Eigen::Dynamic> g(2, values.cols());
  g.setZero();
  for (int a = 0; a < 3; ++a) g += geo.grad[t][a] * values.row(tri[a]);
  return g;
}

/// X(p, T) = -|T| grad a_p . grad b on T, for columns a_p of `a` and the vector `b`.
Eigen::MatrixXd gradient_pairing(const CemMesh& mesh, const ElementGeometry& geo,
                                 const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::MatrixXd out(a.cols(), mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto ga = element_gradient(geo, tri, t, a);
    const Point2 gb = geo.grad[t][0] * b[tri[0]] + geo.grad[t][1] * b[tri[1]] + geo.grad[t][2] * b[tri[2]];
    out.col(t) = -3.0 * geo.third_area[t] * (ga.transpose() * gb);
  }
  return out;
}

}  // namespace

ForwardState solve_forward(const CemMesh& mesh, const Eigen::VectorXd& sigma,
                           const ElectrodeLayout& layout, const Eigen::MatrixXd& patterns,
                           SigmaBasis basis) {
  ForwardState s;
  s.system = std::make_shared<const CemSystem>(mesh, sigma, layout, basis);
  if (patterns.rows() != layout.size())
    throw ConfigError("current pattern length differs from electrode count");
  s.patterns = patterns;
  s.dual = s.system->solve(dual_patterns(layout.size()));
  s.forward.u = s.dual.u * patterns;
  s.forward.U = s.dual.U * patterns;
  return s;
}

Eigen::MatrixXd jacobian_elements(const CemMesh& mesh, const ForwardState& state) {
  const int m = state.num_electrodes(), n_pat = state.num_patterns();
  const ElementGeometry geo(mesh);
  Eigen::MatrixXd jac(m * n_pat, mesh.num_triangles());
  Eigen::MatrixXd block(m, n_pat);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto gu = element_gradient(geo, tri, t, state.forward.u);
    const auto gd = element_gradient(geo, tri, t, state.dual.u);
    block.noalias() = -3.0 * geo.third_area[t] * (gd.transpose() * gu);  // (k, j)
    jac.col(t) = Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
  }
  return jac;
}

Eigen::MatrixXd jacobian_mesh(const CemMesh& mesh, const ForwardState& state) {
  return jacobian_elements(mesh, state) * element_averaging(mesh);
}

Eigen::MatrixXd jacobian_direct(const CemMesh& mesh, const ForwardState& state) {
  const int n = mesh.num_nodes(), m = state.num_electrodes(), n_pat = state.num_patterns();
  const ElementGeometry geo(mesh);
  Eigen::MatrixXd jac(m * n_pat, n);
  for (int i = 0; i < n; ++i) {
    // Right-hand side -d/d(sigma_i) of the stiffness form applied to each forward solution.
    Eigen::MatrixXd f_u = Eigen::MatrixXd::Zero(n, n_pat);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles[t];
      if (tri[0] != i && tri[1] != i && tri[2] != i) continue;
      const auto gu = element_gradient(geo, tri, t, state.forward.u);
      for (int b = 0; b < 3; ++b)
        f_u.row(tri[b]) -= geo.third_area[t] * (geo.grad[t][b].transpose() * gu);
    }
    const auto lin = state.system->solve_general(f_u, Eigen::MatrixXd::Zero(m, n_pat));
    jac.col(i) = stack_potentials(lin.U);
  }
  return jac;
}

Eigen::MatrixXd conductivity_jacobian(const CemMesh& mesh, const ForwardState& state,
                                      const ProjectionMap& projection) {
  return jacobian_mesh(mesh, state) * projection.weights;
}

Eigen::MatrixXd conductivity_jacobian(const CemMesh& mesh, const ForwardState& state,
                                      const ElementProjection& projection) {
  return jacobian_elements(mesh, state) * projection.weights;
}

EndpointAdjoints endpoint_adjoints(const BoundaryCurve& curve, const CemMesh& mesh,
                                   const ElectrodeLayout& layout, const ForwardState& state) {
  const int m_count = layout.size(), n = mesh.num_nodes();
  if (mesh.num_electrodes() != m_count) throw MeshError("mesh does not conform to the layout");
  const auto plus = electrode_end_angles(curve, layout);
  EndpointAdjoints adj;
  adj.nodes.resize(2 * m_count);
  adj.weight.resize(2 * m_count);
  adj.coupling.resize(m_count);
  Eigen::MatrixXd f_u = Eigen::MatrixXd::Zero(n, 2 * m_count);
  Eigen::MatrixXd f_U = Eigen::MatrixXd::Zero(m_count, 2 * m_count);
  for (int m = 0; m < m_count; ++m) {
    const double speed_minus = curve.speed(layout.theta_minus[m]);
    const double speed_plus = curve.speed(plus[m]);
    adj.coupling[m] = speed_minus / speed_plus;
    for (int side = 0; side < 2; ++side) {
      const int e = 2 * m + side;
      const int node = mesh.electrode_endpoint_nodes[m][side];
      if (node < 0 || node >= static_cast<int>(mesh.boundary_nodes.size()))
        throw MeshError("electrode endpoint has no boundary node");
      adj.nodes[e] = node;
      adj.weight[e] = (side == 0 ? speed_minus : -speed_plus) / layout.contact_impedance[m];
      f_u(node, e) = -1.0;
      f_U(m, e) = 1.0;
    }
  }
  adj.w = state.system->solve_general(f_u, f_U);
  adj.forward_jump.resize(2 * m_count, state.num_patterns());
  adj.dual_jump.resize(2 * m_count, m_count);
  for (int e = 0; e < 2 * m_count; ++e) {
    const int m = e / 2, node = adj.nodes[e];
    adj.forward_jump.row(e) = state.forward.U.row(m) - state.forward.u.row(node);
    adj.dual_jump.row(e) = state.dual.U.row(m) - state.dual.u.row(node);
  }
  return adj;
}

Eigen::MatrixXd measurement_endpoint_derivative(const EndpointAdjoints& adj, int electrodes) {
  const int n_pat = static_cast<int>(adj.forward_jump.cols());
  Eigen::MatrixXd d(electrodes * n_pat, 2 * electrodes);
  for (int e = 0; e < 2 * electrodes; ++e) {
    // -(d B / d theta)(u_j, u~_k) = weight * F_j * G_k
    const Eigen::MatrixXd block = adj.weight[e] * adj.dual_jump.row(e).transpose() * adj.forward_jump.row(e);
    d.col(e) = Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
  }
  return d;
}

Eigen::MatrixXd measurement_angle_derivative(const EndpointAdjoints& adj, int electrodes) {
  const Eigen::MatrixXd partial = measurement_endpoint_derivative(adj, electrodes);
  Eigen::MatrixXd total(partial.rows(), electrodes);
  for (int m = 0; m < electrodes; ++m)
    total.col(m) = partial.col(2 * m) + adj.coupling[m] * partial.col(2 * m + 1);
  return total;
}

std::vector<Eigen::MatrixXd> jacobian_angle_derivative_elements(const CemMesh& mesh,
                                                                const ForwardState& state,
                                                                const EndpointAdjoints& adj) {
  const int m_count = state.num_electrodes(), n_pat = state.num_patterns();
  const ElementGeometry geo(mesh);
  std::vector<Eigen::MatrixXd> out(m_count, Eigen::MatrixXd::Zero(m_count * n_pat, mesh.num_triangles()));
  for (int e = 0; e < 2 * m_count; ++e) {
    const int m = e / 2;
    const double scale = adj.weight[e] * ((e % 2 == 0) ? 1.0 : adj.coupling[m]);
    const Eigen::MatrixXd dfwd = gradient_pairing(mesh, geo, state.forward.u, adj.w.u.col(e));
    const Eigen::MatrixXd ddual = gradient_pairing(mesh, geo, state.dual.u, adj.w.u.col(e));
    for (int j = 0; j < n_pat; ++j)
      for (int k = 0; k < m_count; ++k)
        out[m].row(j * m_count + k) +=
            scale * (adj.dual_jump(e, k) * dfwd.row(j) + adj.forward_jump(e, j) * ddual.row(k));
  }
  return out;
}

std::vector<Eigen::MatrixXd> jacobian_angle_derivative(const CemMesh& mesh, const ForwardState& state,
                                                       const EndpointAdjoints& adj) {
  auto out = jacobian_angle_derivative_elements(mesh, state, adj);
  const SparseMatrix avg = element_averaging(mesh);
  for (auto& d : out) d = d * avg;
  return out;
}

Eigen::VectorXd contract_jacobian_angle_derivative(const CemMesh& mesh, const ForwardState& state,
                                                   const EndpointAdjoints& adj,
                                                   const Eigen::MatrixXd& weights) {
  if (weights.cols() != mesh.num_nodes()) throw ConfigError("contraction weights have the wrong shape");
  const SparseMatrix avg_t = element_averaging(mesh).transpose();
  return contract_jacobian_angle_derivative_elements(mesh, state, adj, weights * avg_t);
}

Eigen::VectorXd contract_jacobian_angle_derivative_elements(const CemMesh& mesh, const ForwardState& state,
                                                            const EndpointAdjoints& adj,
                                                            const Eigen::MatrixXd& weights) {
  const int m_count = state.num_electrodes(), n_pat = state.num_patterns(), n = mesh.num_triangles();
  if (weights.rows() != m_count * n_pat || weights.cols() != n)
    throw ConfigError("contraction weights have the wrong shape");
  const ElementGeometry geo(mesh);
  const Eigen::MatrixXd g = adj.dual_jump.transpose();     // M x 2M
  const Eigen::MatrixXd f = adj.forward_jump.transpose();  // N x 2M
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(2 * m_count);
  Eigen::Matrix<double, 2, Eigen::Dynamic> x(2, m_count), y(2, n_pat), s(2, 2 * m_count);
  for (int t = 0; t < n; ++t) {
    const auto& tri = mesh.triangles[t];
    const Eigen::Map<const Eigen::MatrixXd> wt(weights.col(t).data(), m_count, n_pat);  // (k, j)
    const auto gu = element_gradient(geo, tri, t, state.forward.u);
    const auto gd = element_gradient(geo, tri, t, state.dual.u);
    const auto gw = element_gradient(geo, tri, t, adj.w.u);
    x.noalias() = gu * wt.transpose();
    y.noalias() = gd * wt;
    s.noalias() = x * g;
    s.noalias() += y * f;
    acc.noalias() -= 3.0 * geo.third_area[t] * gw.cwiseProduct(s).colwise().sum();
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m_count);
  for (int e = 0; e < 2 * m_count; ++e) {
    const int m = e / 2;
    out[m] += adj.weight[e] * ((e % 2 == 0) ? 1.0 : adj.coupling[m]) * acc[e];
  }
  return out;
}

}  // namespace eitopt
