#pragma once

#include "eitopt/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include <array>
#include <memory>
#include <vector>

namespace eitopt {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  int electrode = -1;  // -1 on gaps
};

/// Where a boundary node sits on its boundary segment. Segment 2m is
/// electrode m, segment 2m+1 the gap after it; node `index` of `count`
/// (the segment's start node has index 0).
struct BoundaryNodeParam {
  int segment = 0;
  int index = 0;
  int count = 1;
};

/// Triangulation of the polygonal domain, conforming to the electrode endpoints.
/// The first boundary_nodes.size() nodes are the boundary, counter-clockwise,
/// starting at the first electrode's theta_minus.
struct CemMesh {
  std::vector<Point2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> boundary_nodes;
  std::vector<double> boundary_angles;
  std::vector<BoundaryNodeParam> boundary_params;
  std::vector<BoundaryEdge> boundary_edges;
  /// {node at theta_minus, node at theta_plus} per electrode.
  std::vector<std::array<int, 2>> electrode_endpoint_nodes;
  double target_h = 0.0;
  int refinement_level = 0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  int num_electrodes() const { return static_cast<int>(electrode_endpoint_nodes.size()); }
  double signed_area(int t) const;
  double min_angle() const;
};

struct MeshOptions {
  double target_h = 0.1;
  /// Boundary spacing near electrode endpoints, as a fraction of target_h.
  double endpoint_fraction = 0.25;
  /// Spacing at the endpoints themselves, reached by linear grading at `endpoint_grading`.
  double endpoint_min_fraction = 1.0 / 32.0;
  double endpoint_grading = 0.25;
  /// Growth rate of the element size away from the refined boundary.
  double grading = 0.3;
  /// Radius-edge ratio above which a triangle is refined.
  double quality_bound = 1.41421356;
  /// Minimum admissible triangle angle in degrees.
  double sliver_angle_deg = 4.0;
  int refinement_level = 0;
};

/// Deterministic Delaunay-refinement mesh of the polygonal domain for this layout.
CemMesh build_mesh(const BoundaryCurve& curve, const ElectrodeLayout& layout,
                   const MeshOptions& options);

/// Boundary node positions for a layout with the per-segment node counts of `base`.
std::vector<std::pair<double, Point2>> boundary_positions_like(const BoundaryCurve& curve,
                                                               const ElectrodeLayout& layout,
                                                               const CemMesh& base,
                                                               const MeshOptions& options);

/// Moves the nodes of a fixed-topology mesh to follow a perturbed layout.
///
/// Boundary nodes keep their segment-relative placement; interior nodes follow
/// the discrete harmonic extension of the boundary displacement. The morph of
/// the base layout itself reproduces the base mesh exactly.
class MeshMorpher {
 public:
  MeshMorpher(const BoundaryCurve& curve, CemMesh base, MeshOptions options);
  CemMesh morph(const ElectrodeLayout& layout) const;
  const CemMesh& base() const { return base_; }

 private:
  BoundaryCurve curve_;
  CemMesh base_;
  MeshOptions options_;
  std::vector<int> interior_index_;
  SparseMatrix coupling_;  // interior rows, boundary columns
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> laplacian_;
};

/// Fixed uniform triangulation of the disk D of the given radius.
struct BackgroundMesh {
  std::vector<Point2> nodes;
  std::vector<std::array<int, 3>> triangles;
  double radius = 0.0;
  double spacing = 0.0;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
};

/// Background disk of radius scale * max r(phi), uniformly triangulated at `spacing`.
BackgroundMesh build_background(const BoundaryCurve& curve, double spacing, double scale = 1.05);

/// Sparse P1 interpolation from background nodes to CEM mesh nodes
/// (rows: mesh nodes, columns: background nodes).
struct ProjectionMap {
  SparseMatrix weights;
};

ProjectionMap build_projection(const BackgroundMesh& bg, const CemMesh& mesh);
ProjectionMap build_projection(const BackgroundMesh& bg, const std::vector<Point2>& points);

/// Exact cell averages of background P1 functions over CEM triangles
/// (rows: triangles, columns: background nodes, rows sum to 1):
/// weights(T, i) = (1/|T|) * integral over T of phi_i.
struct ElementProjection {
  SparseMatrix weights;
};

ElementProjection build_element_projection(const BackgroundMesh& bg, const CemMesh& mesh);

/// Nodal-to-element averaging, (triangles x nodes) with entries 1/3.
SparseMatrix element_averaging(const CemMesh& mesh);

nlohmann::json mesh_to_json(const CemMesh& mesh);
nlohmann::json background_to_json(const BackgroundMesh& bg);

}  // namespace eitopt
