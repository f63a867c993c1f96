#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "morphosim/mesh.hpp"

namespace morphosim {
namespace {

using Real = long double;

struct P {
  Real x, y;
};

Real orient(const P &a, const P &b, const P &c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Positive when d lies inside the circle through the CCW triangle abc.
Real incircle(const P &a, const P &b, const P &c, const P &d) {
  Real adx = a.x - d.x, ady = a.y - d.y;
  Real bdx = b.x - d.x, bdy = b.y - d.y;
  Real cdx = c.x - d.x, cdy = c.y - d.y;
  Real ad = adx * adx + ady * ady;
  Real bd = bdx * bdx + bdy * bdy;
  Real cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

struct Tri {
  std::array<int, 3> v;
  std::array<int, 3> nb;  // neighbour across the edge opposite v[k]
  bool alive;
};

class Builder {
 public:
  explicit Builder(std::vector<P> pts) : p_(std::move(pts)) {}

  std::vector<std::array<int, 3>> run(int n_real) {
    const int n = n_real;
    tris_.push_back({{n, n + 1, n + 2}, {-1, -1, -1}, true});
    owner_start_.assign(p_.size(), -1);
    owner_end_.assign(p_.size(), -1);
    mark_.assign(1, 0);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    spatial_sort(order);
    int last = 0;
    for (int idx : order) last = insert(idx, last);

    std::vector<std::array<int, 3>> out;
    for (const auto &t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) continue;
      out.push_back(t.v);
    }
    return out;
  }

 private:
  void spatial_sort(std::vector<int> &order) {
    Real xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int i : order) {
      xmin = std::min(xmin, p_[i].x); xmax = std::max(xmax, p_[i].x);
      ymin = std::min(ymin, p_[i].y); ymax = std::max(ymax, p_[i].y);
    }
    int g = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(order.size()) / 4.0)));
    Real dx = (xmax - xmin) / g + 1e-30L, dy = (ymax - ymin) / g + 1e-30L;
    auto key = [&](int i) {
      int cx = std::min(g - 1, static_cast<int>((p_[i].x - xmin) / dx));
      int cy = std::min(g - 1, static_cast<int>((p_[i].y - ymin) / dy));
      if (cy % 2) cx = g - 1 - cx;
      return static_cast<long long>(cy) * g + cx;
    };
    std::vector<long long> keys(p_.size());
    for (int i : order) keys[i] = key(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  }

  int locate(int start, const P &q) {
    int t = start;
    if (!tris_[t].alive) t = any_alive();
    for (int steps = 0; steps < 1000000; ++steps) {
      const Tri &tr = tris_[t];
      bool moved = false;
      for (int s = 0; s < 3; ++s) {
        int k = (s + steps) % 3;
        const P &a = p_[tr.v[(k + 1) % 3]];
        const P &b = p_[tr.v[(k + 2) % 3]];
        if (orient(a, b, q) < 0 && tr.nb[k] >= 0) {
          t = tr.nb[k];
          moved = true;
          break;
        }
      }
      if (!moved) return t;
    }
    for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
      if (!tris_[i].alive) continue;
      const auto &v = tris_[i].v;
      if (orient(p_[v[0]], p_[v[1]], q) >= 0 && orient(p_[v[1]], p_[v[2]], q) >= 0 &&
          orient(p_[v[2]], p_[v[0]], q) >= 0)
        return i;
    }
    return t;
  }

  int any_alive() const {
    for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i)
      if (tris_[i].alive) return i;
    return 0;
  }

  int new_tri() {
    if (!free_.empty()) {
      int t = free_.back();
      free_.pop_back();
      return t;
    }
    tris_.push_back({});
    mark_.push_back(0);
    return static_cast<int>(tris_.size()) - 1;
  }

  int insert(int ip, int hint) {
    const P &q = p_[ip];
    int t0 = locate(hint, q);
    ++epoch_;
    if (static_cast<int>(mark_.size()) < static_cast<int>(tris_.size())) mark_.resize(tris_.size(), 0);
    cavity_.clear();
    stack_.clear();
    stack_.push_back(t0);
    mark_[t0] = epoch_;
    while (!stack_.empty()) {
      int t = stack_.back();
      stack_.pop_back();
      cavity_.push_back(t);
      for (int k = 0; k < 3; ++k) {
        int nb = tris_[t].nb[k];
        if (nb < 0 || mark_[nb] == epoch_) continue;
        const auto &v = tris_[nb].v;
        if (incircle(p_[v[0]], p_[v[1]], p_[v[2]], q) > 0) {
          mark_[nb] = epoch_;
          stack_.push_back(nb);
        }
      }
    }
    // Boundary of the cavity, one new triangle per edge.
    edges_.clear();
    for (int t : cavity_) {
      for (int k = 0; k < 3; ++k) {
        int nb = tris_[t].nb[k];
        if (nb >= 0 && mark_[nb] == epoch_) continue;
        edges_.push_back({tris_[t].v[(k + 1) % 3], tris_[t].v[(k + 2) % 3], nb});
      }
    }
    for (int t : cavity_) {
      tris_[t].alive = false;
      free_.push_back(t);
    }
    int created = -1;
    std::vector<int> made;
    made.reserve(edges_.size());
    for (const auto &e : edges_) {
      int t = new_tri();
      if (static_cast<int>(mark_.size()) < static_cast<int>(tris_.size())) mark_.resize(tris_.size(), 0);
      mark_[t] = 0;
      // Slot 2 is opposite ip, across the cavity edge a-b.
      tris_[t] = {{e.a, e.b, ip}, {-1, -1, e.outside}, true};
      if (e.outside >= 0) {
        auto &o = tris_[e.outside];
        for (int k = 0; k < 3; ++k)
          if (o.v[(k + 1) % 3] == e.b && o.v[(k + 2) % 3] == e.a) o.nb[k] = t;
      }
      owner_start_[e.a] = t;
      owner_end_[e.b] = t;
      made.push_back(t);
      created = t;
    }
    for (int t : made) {
      auto &tr = tris_[t];
      int a = tr.v[0], b = tr.v[1];
      tr.nb[0] = owner_start_[b];  // opposite a: edge b-ip
      tr.nb[1] = owner_end_[a];    // opposite b: edge ip-a
    }
    return created;
  }

  struct Edge {
    int a, b, outside;
  };

  std::vector<P> p_;
  std::vector<Tri> tris_;
  std::vector<int> free_, cavity_, stack_, owner_start_, owner_end_, mark_;
  std::vector<Edge> edges_;
  int epoch_ = 0;
};

}  // namespace

std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2> &pts) {
  const int n = static_cast<int>(pts.size());
  if (n < 3) return {};
  double xmin = pts[0].x, xmax = xmin, ymin = pts[0].y, ymax = ymin;
  for (const auto &p : pts) {
    xmin = std::min(xmin, p.x); xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y); ymax = std::max(ymax, p.y);
  }
  Real cx = 0.5L * (xmin + xmax), cy = 0.5L * (ymin + ymax);
  Real scale = std::max(xmax - xmin, ymax - ymin);
  if (scale <= 0) return {};
  std::vector<P> q(n + 3);
  for (int i = 0; i < n; ++i) q[i] = {(pts[i].x - cx) / scale, (pts[i].y - cy) / scale};
  const Real big = 1e4L;
  q[n] = {-big, -big};
  q[n + 1] = {big, -big};
  q[n + 2] = {0, big};
  Builder b(std::move(q));
  return b.run(n);
}

}  // namespace morphosim
