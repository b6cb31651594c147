#pragma once

#include "eitopt/cem.hpp"

#include <memory>
#include <vector>

namespace eitopt {

/// Forward and dual solutions at one (mesh, sigma, layout).
///
/// The dual patterns are e_k - 1/M. Because every forward pattern I equals
/// sum_k I_k (e_k - 1/M), the forward solutions are combinations of the dual
/// ones and need no extra solves.
struct ForwardState {
  std::shared_ptr<const CemSystem> system;
  Eigen::MatrixXd patterns;  // M x N
  CemSolution forward;       // N columns
  CemSolution dual;          // M columns

  int num_patterns() const { return static_cast<int>(patterns.cols()); }
  int num_electrodes() const { return static_cast<int>(patterns.rows()); }
  Eigen::VectorXd measurements() const { return stack_potentials(forward.U); }
};

ForwardState solve_forward(const CemMesh& mesh, const Eigen::VectorXd& sigma,
                           const ElectrodeLayout& layout, const Eigen::MatrixXd& patterns,
                           SigmaBasis basis = SigmaBasis::Nodal);

/// d(stacked U)/d(sigma_T) for element-wise sigma, (M N) x triangles:
/// entry (j M + k, T) = -|T| grad u_j . grad u~_k.
Eigen::MatrixXd jacobian_elements(const CemMesh& mesh, const ForwardState& state);

/// d(stacked U)/d(sigma_i) for nodal sigma on the mesh, (M N) x n, via the
/// dual solutions: entry (j M + k, i) = -sum_{T containing i} |T|/3 grad u_j . grad u~_k.
Eigen::MatrixXd jacobian_mesh(const CemMesh& mesh, const ForwardState& state);

/// Same matrix by one linearized solve per node (reference route).
Eigen::MatrixXd jacobian_direct(const CemMesh& mesh, const ForwardState& state);

/// Jacobian with respect to background nodal values: J_mesh * P.
Eigen::MatrixXd conductivity_jacobian(const CemMesh& mesh, const ForwardState& state,
                                      const ProjectionMap& projection);
/// Jacobian with respect to background nodal values carried by exact cell averages.
Eigen::MatrixXd conductivity_jacobian(const CemMesh& mesh, const ForwardState& state,
                                      const ElementProjection& projection);

/// Adjoint solutions for the point functionals V_m - v(x_e) at every electrode
/// endpoint e (e = 2m at theta_minus_m, e = 2m + 1 at theta_plus_m).
struct EndpointAdjoints {
  std::vector<int> nodes;   // 2M boundary node indices
  CemSolution w;            // 2M columns
  Eigen::MatrixXd forward_jump;  // 2M x N: U_m - u(x_e) per forward pattern
  Eigen::MatrixXd dual_jump;     // 2M x M: same for the dual patterns
  Eigen::VectorXd weight;   // 2M: +|gamma'|/z at theta_minus, -|gamma'|/z at theta_plus
  Eigen::VectorXd coupling; // M: d theta_plus / d theta_minus
};

EndpointAdjoints endpoint_adjoints(const BoundaryCurve& curve, const CemMesh& mesh,
                                   const ElectrodeLayout& layout, const ForwardState& state);

/// d(stacked U)/d(theta at each endpoint), (M N) x 2M partial derivatives.
Eigen::MatrixXd measurement_endpoint_derivative(const EndpointAdjoints& adj, int electrodes);

/// d(stacked U)/d(theta_minus_m) with the width coupling folded in, (M N) x M.
Eigen::MatrixXd measurement_angle_derivative(const EndpointAdjoints& adj, int electrodes);

/// dJ_mesh/d(theta_minus_m) with the width coupling folded in; one (M N) x n matrix per electrode.
std::vector<Eigen::MatrixXd> jacobian_angle_derivative(const CemMesh& mesh, const ForwardState& state,
                                                       const EndpointAdjoints& adj);

/// Element-wise version of jacobian_angle_derivative, (M N) x triangles per electrode.
std::vector<Eigen::MatrixXd> jacobian_angle_derivative_elements(const CemMesh& mesh,
                                                                const ForwardState& state,
                                                                const EndpointAdjoints& adj);

/// <dJ_mesh/d theta_minus_m, W> for every m without forming the derivatives; W is (M N) x n.
Eigen::VectorXd contract_jacobian_angle_derivative(const CemMesh& mesh, const ForwardState& state,
                                                   const EndpointAdjoints& adj,
                                                   const Eigen::MatrixXd& weights);
/// Same with element weights, W is (M N) x triangles.
Eigen::VectorXd contract_jacobian_angle_derivative_elements(const CemMesh& mesh,
                                                            const ForwardState& state,
                                                            const EndpointAdjoints& adj,
                                                            const Eigen::MatrixXd& weights);

}  // namespace eitopt
