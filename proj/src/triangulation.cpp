#include "eitopt/triangulation.hpp"

#include "eitopt/errors.hpp"

#include <algorithm>
#include <cmath>

namespace eitopt::detail {

namespace {
inline int next(int i) { return i == 2 ? 0 : i + 1; }
inline int prev(int i) { return i == 0 ? 2 : i - 1; }
}  // namespace

double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

Point2 circumcenter(const Point2& a, const Point2& b, const Point2& c) {
  const Point2 ab = b - a, ac = c - a;
  const double d = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
  return a + Point2((ac.y() * ab2 - ab.y() * ac2) / d, (ab.x() * ac2 - ac.x() * ab2) / d);
}

Triangulation::Triangulation(const std::vector<Point2>& polygon, const Point2& center) {
  const int n = static_cast<int>(polygon.size());
  if (n < 3) throw MeshError("polygon needs at least three vertices");
  points_ = polygon;
  points_.push_back(center);
  polygon_size_ = n;
  tris_.resize(n);
  for (int i = 0; i < n; ++i) {
    auto& t = tris_[i];
    t.v = {n, i, (i + 1) % n};
    t.nbr = {-1, (i + 1) % n, (i + n - 1) % n};
    t.alive = true;
    t.stamp = next_stamp_++;
    if (!(orient(points_[t.v[0]], points_[t.v[1]], points_[t.v[2]]) > 0.0))
      throw MeshError("polygon is not star-shaped with respect to its center");
  }
  make_delaunay();
}

int Triangulation::allocate() {
  if (!free_.empty()) {
    const int id = free_.back();
    free_.pop_back();
    return id;
  }
  tris_.emplace_back();
  return static_cast<int>(tris_.size()) - 1;
}

bool Triangulation::try_flip(int t, int i) {
  const int u = tris_[t].nbr[i];
  if (u < 0) return false;
  auto& T = tris_[t];
  auto& U = tris_[u];
  int j = 0;
  while (j < 3 && U.nbr[j] != t) ++j;
  if (j == 3) throw MeshError("inconsistent triangle adjacency");
  const int a = T.v[i], b = T.v[next(i)], c = T.v[prev(i)];
  const int d = U.v[j];
  if (!(incircle(points_[a], points_[b], points_[c], points_[d]) > 0.0)) return false;
  // Convexity of the quad a-b-d-c.
  if (!(orient(points_[a], points_[b], points_[d]) > 0.0) ||
      !(orient(points_[a], points_[d], points_[c]) > 0.0))
    return false;
  const int n_ca = T.nbr[next(i)];
  const int n_ab = T.nbr[prev(i)];
  const int n_bd = U.nbr[next(j)];
  const int n_dc = U.nbr[prev(j)];
  T.v = {a, b, d};
  T.nbr = {n_bd, u, n_ab};
  U.v = {a, d, c};
  U.nbr = {n_dc, n_ca, t};
  T.stamp = next_stamp_++;
  U.stamp = next_stamp_++;
  auto relink = [this](int nb, int from, int to) {
    if (nb < 0) return;
    for (auto& k : tris_[nb].nbr)
      if (k == from) { k = to; return; }
  };
  relink(n_bd, u, t);
  relink(n_ca, t, u);
  return true;
}

void Triangulation::make_delaunay() {
  bool flipped = true;
  int passes = 0;
  while (flipped) {
    flipped = false;
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
      if (!tris_[t].alive) continue;
      for (int i = 0; i < 3; ++i)
        if (try_flip(t, i)) flipped = true;
    }
    if (++passes > 100000) throw MeshError("Lawson flipping did not terminate");
  }
}

int Triangulation::locate(const Point2& p, int hint) const {
  int t = (hint >= 0 && hint < static_cast<int>(tris_.size()) && tris_[hint].alive) ? hint : last_;
  if (!tris_[t].alive) {
    t = 0;
    while (t < static_cast<int>(tris_.size()) && !tris_[t].alive) ++t;
  }
  const int max_steps = 4 * static_cast<int>(tris_.size()) + 16;
  for (int step = 0; step < max_steps; ++step) {
    const auto& T = tris_[t];
    int worst = -1;
    double worst_val = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double o = orient(points_[T.v[next(i)]], points_[T.v[prev(i)]], p);
      if (o < worst_val) { worst_val = o; worst = i; }
    }
    if (worst < 0) return t;
    if (T.nbr[worst] < 0) break;
    t = T.nbr[worst];
  }
  // Walk failed (non-convex region or cycling); fall back to a scan.
  for (int k = 0; k < static_cast<int>(tris_.size()); ++k) {
    const auto& T = tris_[k];
    if (!T.alive) continue;
    if (orient(points_[T.v[0]], points_[T.v[1]], p) >= 0.0 &&
        orient(points_[T.v[1]], points_[T.v[2]], p) >= 0.0 &&
        orient(points_[T.v[2]], points_[T.v[0]], p) >= 0.0)
      return k;
  }
  return -1;
}

int Triangulation::insert(const Point2& p, int hint, std::vector<int>* created) {
  const int t0 = locate(p, hint);
  if (t0 < 0) return -1;
  {
    const auto& T = tris_[t0];
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
      scale = std::max(scale, (points_[T.v[i]] - points_[T.v[next(i)]]).norm());
    for (int i = 0; i < 3; ++i)
      if ((points_[T.v[i]] - p).norm() <= 1e-9 * scale) return -1;
  }

  std::vector<int> cavity;
  std::vector<int> excluded;
  struct Edge { int a, b, outer, outer_slot; };
  std::vector<Edge> rim;
  const auto in_list = [](const std::vector<int>& list, int x) {
    return std::find(list.begin(), list.end(), x) != list.end();
  };

  for (int attempt = 0;; ++attempt) {
    if (attempt > 64) return -1;
    cavity.assign(1, t0);
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const auto& T = tris_[cavity[k]];
      for (int i = 0; i < 3; ++i) {
        const int u = T.nbr[i];
        if (u < 0 || in_list(cavity, u) || in_list(excluded, u)) continue;
        const auto& U = tris_[u];
        if (incircle(points_[U.v[0]], points_[U.v[1]], points_[U.v[2]], p) > 0.0) cavity.push_back(u);
      }
    }
    rim.clear();
    int bad = -1;
    for (int t : cavity) {
      const auto& T = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int u = T.nbr[i];
        if (u >= 0 && in_list(cavity, u)) continue;
        const int a = T.v[next(i)], b = T.v[prev(i)];
        if (!(orient(points_[a], points_[b], p) > 0.0)) {
          bad = t;
          break;
        }
        int slot = -1;
        if (u >= 0)
          for (int k = 0; k < 3; ++k)
            if (tris_[u].nbr[k] == t) slot = k;
        rim.push_back({a, b, u, slot});
      }
      if (bad >= 0) break;
    }
    if (bad < 0) break;
    if (bad == t0) return -1;
    excluded.push_back(bad);
  }

  const int pv = static_cast<int>(points_.size());
  points_.push_back(p);
  for (int t : cavity) {
    tris_[t].alive = false;
    free_.push_back(t);
  }
  std::vector<int> ids(rim.size());
  for (std::size_t k = 0; k < rim.size(); ++k) ids[k] = allocate();
  for (std::size_t k = 0; k < rim.size(); ++k) {
    auto& T = tris_[ids[k]];
    T.v = {pv, rim[k].a, rim[k].b};
    T.nbr = {rim[k].outer, -1, -1};
    T.alive = true;
    T.stamp = next_stamp_++;
  }
  // Rim edges form a closed loop around p: link consecutive fan triangles.
  for (std::size_t k = 0; k < rim.size(); ++k) {
    for (std::size_t l = 0; l < rim.size(); ++l) {
      if (rim[l].a == rim[k].b) tris_[ids[k]].nbr[1] = ids[l];  // edge (b, p)
      if (rim[l].b == rim[k].a) tris_[ids[k]].nbr[2] = ids[l];  // edge (p, a)
    }
    if (rim[k].outer >= 0) tris_[rim[k].outer].nbr[rim[k].outer_slot] = ids[k];
  }
  last_ = ids.front();
  if (created) created->insert(created->end(), ids.begin(), ids.end());
  return pv;
}

std::vector<std::array<int, 3>> Triangulation::live_triangles() const {
  std::vector<std::array<int, 3>> out;
  out.reserve(tris_.size());
  for (const auto& t : tris_)
    if (t.alive) out.push_back(t.v);
  return out;
}

}  // namespace eitopt::detail
