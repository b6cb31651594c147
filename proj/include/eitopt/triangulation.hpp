#pragma once

#include "eitopt/geometry.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace eitopt::detail {

double orient(const Point2& a, const Point2& b, const Point2& c);
/// Positive when d lies inside the circumcircle of the counter-clockwise triangle abc.
double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d);
Point2 circumcenter(const Point2& a, const Point2& b, const Point2& c);

/// Triangulation of a star-shaped polygon with incremental Delaunay insertion.
///
/// Polygon edges are never flipped and bound every insertion cavity, so the
/// result is a constrained Delaunay triangulation of the polygon plus the
/// inserted interior points. nbr[i] is the triangle across the edge opposite
/// v[i]; -1 marks a polygon edge.
class Triangulation {
 public:
  struct Triangle {
    std::array<int, 3> v{};
    std::array<int, 3> nbr{};
    std::uint32_t stamp = 0;
    bool alive = false;
  };

  /// Fan from `center` to the counter-clockwise polygon, followed by Lawson flips.
  Triangulation(const std::vector<Point2>& polygon, const Point2& center);

  const std::vector<Point2>& points() const { return points_; }
  const std::vector<Triangle>& triangles() const { return tris_; }
  int polygon_size() const { return polygon_size_; }

  /// Triangle containing p, walking from `hint`; -1 when p is outside.
  int locate(const Point2& p, int hint) const;

  /// Inserts p; returns the new vertex index or -1 when p is outside or
  /// too close to an existing vertex. Newly created triangles are appended to `created`.
  int insert(const Point2& p, int hint, std::vector<int>* created = nullptr);

  /// Live triangles as vertex triples.
  std::vector<std::array<int, 3>> live_triangles() const;

 private:
  void make_delaunay();
  bool try_flip(int t, int i);
  int allocate();

  std::vector<Point2> points_;
  std::vector<Triangle> tris_;
  std::vector<int> free_;
  std::uint32_t next_stamp_ = 1;
  int polygon_size_ = 0;
  int last_ = 0;
};

}  // namespace eitopt::detail
