#pragma once

#include "eitopt/geometry.hpp"
#include "eitopt/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>

namespace eitopt {

/// Columns e_f - e_m for every m != f (f = feeding electrode), so N = M - 1.
Eigen::MatrixXd feeding_patterns(int electrodes, int feeding_index = 0);

/// Columns e_k - 1/M, k = 1..M. Pairing a grounded potential vector with
/// column k returns its k-th entry.
Eigen::MatrixXd dual_patterns(int electrodes);

/// One solve per column. u is (nodes x N), U is (M x N) with zero column sums.
struct CemSolution {
  Eigen::MatrixXd u;
  Eigen::MatrixXd U;
};

/// Conductivity given per mesh node (element value = mean of its vertices) or per triangle.
enum class SigmaBasis { Nodal, Element };

/// Grounded CEM finite-element system for one (mesh, sigma, layout).
///
/// The full matrix acts on (u, U) in R^n x R^M and is positive semidefinite
/// with the constants as kernel. Solves use the reduction U = Q beta with
/// Q = [I; -1^T], which enforces sum(U) = 0 and yields an SPD system.
class CemSystem {
 public:
  CemSystem(const CemMesh& mesh, const Eigen::VectorXd& sigma, const ElectrodeLayout& layout,
            SigmaBasis basis = SigmaBasis::Nodal);

  int num_nodes() const { return n_; }
  int num_electrodes() const { return m_; }

  /// Full bilinear-form matrix of size (n + M).
  SparseMatrix full_matrix() const { return stiffness_ + contact_; }
  /// sigma-weighted gradient part, zero outside the (n x n) block.
  const SparseMatrix& stiffness() const { return stiffness_; }
  /// Contact-impedance part.
  const SparseMatrix& contact() const { return contact_; }

  /// Solutions for current patterns (columns of an M x N matrix, each summing to zero).
  CemSolution solve(const Eigen::MatrixXd& patterns) const;

  /// Solves B((w, W), (v, V)) = f_u . v + f_U . V for right-hand sides that
  /// vanish on constants (sum f_u + sum f_U = 0 per column).
  CemSolution solve_general(const Eigen::MatrixXd& f_u, const Eigen::MatrixXd& f_U) const;

  /// Electrode lengths on the polygonal boundary.
  const Eigen::VectorXd& electrode_lengths() const { return lengths_; }

 private:
  int n_ = 0;
  int m_ = 0;
  SparseMatrix stiffness_;
  SparseMatrix contact_;
  SparseMatrix reduction_;  // Q, (n + M) x (n + M - 1)
  Eigen::VectorXd lengths_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> factor_;
};

/// Throws ConfigError if any value is not strictly positive or the size is wrong.
void check_conductivity(const Eigen::VectorXd& sigma, int expected_size);

/// Stacked electrode potentials, pattern-major: entry j * M + k is U_k for pattern j.
Eigen::VectorXd stack_potentials(const Eigen::MatrixXd& U);

/// Stacked measurement vector for the given patterns.
Eigen::VectorXd measurement_map(const CemMesh& mesh, const Eigen::VectorXd& sigma,
                                const ElectrodeLayout& layout, const Eigen::MatrixXd& patterns,
                                SigmaBasis basis = SigmaBasis::Nodal);

/// M x M grounded current-to-voltage matrix R: U = R I for I with zero sum.
Eigen::MatrixXd resistance_matrix(const CemSystem& system);

/// Currents recovered from one solution column as (1/z_m) * integral over E_m of (U_m - u).
Eigen::VectorXd recovered_currents(const CemMesh& mesh, const ElectrodeLayout& layout,
                                   const Eigen::VectorXd& u, const Eigen::VectorXd& U);

/// Largest absolute discrete flux (K_sigma u)_i over boundary nodes that touch no electrode.
double gap_flux(const CemSystem& system, const CemMesh& mesh, const Eigen::VectorXd& u);

}  // namespace eitopt
