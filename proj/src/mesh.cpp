#include "morphosim/mesh.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>

namespace morphosim {

double signed_area(const Vec2 &a, const Vec2 &b, const Vec2 &c) {
  return 0.5 * cross(b - a, c - a);
}

double polygon_area(const std::vector<Vec2> &poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) s += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * s;
}

double polygon_perimeter(const std::vector<Vec2> &poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) s += norm(poly[(i + 1) % n] - poly[i]);
  return s;
}

Vec2 polygon_centroid(const std::vector<Vec2> &poly) {
  // Shifted to the first vertex to limit cancellation for far-off polygons.
  const std::size_t n = poly.size();
  const Vec2 o = poly[0];
  double a = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 p = poly[i] - o, q = poly[(i + 1) % n] - o;
    double c = cross(p, q);
    a += c;
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  return {o.x + cx / (3.0 * a), o.y + cy / (3.0 * a)};
}

bool point_in_polygon(const Vec2 &p, const std::vector<Vec2> &poly) {
  bool in = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 &a = poly[i], &b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
  }
  return in;
}

std::vector<Vec2> loop_points(const Triangulation &tri, const std::vector<int> &loop) {
  std::vector<Vec2> out;
  out.reserve(loop.size());
  for (int i : loop) out.push_back(tri.nodes[i]);
  return out;
}

namespace {

double segment_distance(const Vec2 &p, const Vec2 &a, const Vec2 &b) {
  Vec2 ab = b - a;
  double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
  return norm(p - (a + t * ab));
}

// Signed distance to a closed polygon, negative inside.
double polygon_sdf(const Vec2 &p, const std::vector<Vec2> &poly) {
  double d = 1e300;
  for (std::size_t i = 0; i < poly.size(); ++i)
    d = std::min(d, segment_distance(p, poly[i], poly[(i + 1) % poly.size()]));
  return point_in_polygon(p, poly) ? -d : d;
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

std::vector<std::pair<int, int>> unique_edges(const std::vector<std::array<int, 3>> &tris) {
  std::vector<std::uint64_t> keys;
  keys.reserve(tris.size() * 3);
  for (const auto &t : tris)
    for (int k = 0; k < 3; ++k) keys.push_back(edge_key(t[k], t[(k + 1) % 3]));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::pair<int, int>> e;
  e.reserve(keys.size());
  for (auto k : keys) e.emplace_back(static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu));
  return e;
}

std::vector<Vec2> circle_points(Vec2 c, double r, int n, double phase = 0.0) {
  std::vector<Vec2> p(n);
  for (int k = 0; k < n; ++k) {
    double t = phase + 2.0 * kPi * k / n;
    p[k] = {c.x + r * std::cos(t), c.y + r * std::sin(t)};
  }
  return p;
}

}  // namespace

Triangulation distmesh(const std::vector<Vec2> &inner_loop, const std::vector<Vec2> &outer_loop,
                       const std::function<double(const Vec2 &)> &sdf,
                       const std::function<double(const Vec2 &)> &hrel, double h0,
                       const DistmeshOptions &opt) {
  if (inner_loop.size() < 3) throw std::invalid_argument("distmesh: boundary loop too short");
  const bool annulus = !outer_loop.empty();
  auto inside_region = [&](const Vec2 &q) {
    if (annulus) return point_in_polygon(q, outer_loop) && !point_in_polygon(q, inner_loop);
    return point_in_polygon(q, inner_loop);
  };

  std::vector<Vec2> p(inner_loop);
  p.insert(p.end(), outer_loop.begin(), outer_loop.end());
  const int nfix = static_cast<int>(p.size());

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto &q : p) {
    xmin = std::min(xmin, q.x); xmax = std::max(xmax, q.x);
    ymin = std::min(ymin, q.y); ymax = std::max(ymax, q.y);
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double dy = h0 * std::sqrt(3.0) / 2.0;
  int row = 0;
  for (double y = ymin; y <= ymax; y += dy, ++row) {
    for (double x = xmin + (row % 2 ? 0.5 * h0 : 0.0); x <= xmax; x += h0) {
      Vec2 q{x + 1e-3 * h0 * (unif(rng) - 0.5), y + 1e-3 * h0 * (unif(rng) - 0.5)};
      double hr = hrel(q);
      if (sdf(q) >= -0.3 * h0 * hr) continue;
      if (!inside_region(q)) continue;
      if (unif(rng) > 1.0 / (hr * hr)) continue;
      p.push_back(q);
    }
  }

  auto keep_inside = [&](Vec2 &q) {
    const double lim = -0.2 * h0 * hrel(q);
    double d = sdf(q);
    if (d <= lim) return;
    const double eps = 1e-7 * h0;
    for (int it = 0; it < 4 && d > lim; ++it) {
      Vec2 g{(sdf({q.x + eps, q.y}) - sdf({q.x - eps, q.y})) / (2 * eps),
             (sdf({q.x, q.y + eps}) - sdf({q.x, q.y - eps})) / (2 * eps)};
      double gn = norm(g);
      if (gn < 1e-12) break;
      q -= ((d - lim) / (gn * gn)) * g;
      d = sdf(q);
    }
  };

  std::vector<std::array<int, 3>> tris;
  std::vector<std::pair<int, int>> bars;
  auto triangulate = [&]() {
    auto all = delaunay_triangulate(p);
    tris.clear();
    for (const auto &t : all) {
      Vec2 c = (1.0 / 3.0) * (p[t[0]] + p[t[1]] + p[t[2]]);
      if (inside_region(c)) tris.push_back(t);
    }
    bars = unique_edges(tris);
  };

  std::vector<Vec2> anchor = p;
  std::vector<Vec2> force(p.size());
  bool converged = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    double moved = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) moved = std::max(moved, norm(p[i] - anchor[i]));
    if (it % opt.retriangulate_every == 0 || moved > 0.1 * h0) {
      triangulate();
      anchor = p;
    }
    double sl = 0.0, sh = 0.0;
    std::vector<double> len(bars.size()), hb(bars.size());
    for (std::size_t b = 0; b < bars.size(); ++b) {
      const Vec2 &a = p[bars[b].first], &c = p[bars[b].second];
      len[b] = norm(a - c);
      hb[b] = hrel(0.5 * (a + c));
      sl += len[b] * len[b];
      sh += hb[b] * hb[b];
    }
    const double scale = opt.fscale * std::sqrt(sl / sh);
    std::fill(force.begin(), force.end(), Vec2{});
    for (std::size_t b = 0; b < bars.size(); ++b) {
      double f = std::max(hb[b] * scale - len[b], 0.0);
      if (f == 0.0) continue;
      auto [i, j] = bars[b];
      Vec2 fv = (f / len[b]) * (p[i] - p[j]);
      force[i] += fv;
      force[j] -= fv;
    }
    double dmax = 0.0;
    for (std::size_t i = nfix; i < p.size(); ++i) {
      Vec2 step = opt.deltat * force[i];
      p[i] += step;
      keep_inside(p[i]);
      dmax = std::max(dmax, norm(step));
    }
    if (dmax < opt.dptol * h0) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericalError("mesh", "truss relaxation did not converge within " +
                                     std::to_string(opt.max_iterations) + " iterations");
  triangulate();

  // Compact unused nodes, keeping fixed nodes first.
  std::vector<int> used(p.size(), 0), remap(p.size(), -1);
  for (const auto &t : tris)
    for (int v : t) used[v] = 1;
  for (int i = 0; i < nfix; ++i) used[i] = 1;
  Triangulation out;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (used[i]) {
      remap[i] = static_cast<int>(out.nodes.size());
      out.nodes.push_back(p[i]);
    }
  for (const auto &t : tris) {
    std::array<int, 3> r{remap[t[0]], remap[t[1]], remap[t[2]]};
    if (signed_area(out.nodes[r[0]], out.nodes[r[1]], out.nodes[r[2]]) < 0) std::swap(r[1], r[2]);
    out.triangles.push_back(r);
  }
  for (std::size_t i = 0; i < inner_loop.size(); ++i) out.inner_loop.push_back(static_cast<int>(i));
  for (std::size_t i = 0; i < outer_loop.size(); ++i)
    out.outer_loop.push_back(static_cast<int>(inner_loop.size() + i));
  validate_mesh(out);
  return out;
}

Triangulation generate_circle_mesh(double radius, int n_boundary, double target_h,
                                   const DistmeshOptions &opt) {
  if (!(radius > 0)) throw std::invalid_argument("generate_circle_mesh: radius must be positive");
  if (n_boundary < 8) throw std::invalid_argument("generate_circle_mesh: need at least 8 boundary nodes");
  if (!(target_h > 0)) throw std::invalid_argument("generate_circle_mesh: target_h must be positive");
  auto boundary = circle_points({0, 0}, radius, n_boundary);
  auto sdf = [radius](const Vec2 &q) { return norm(q) - radius; };
  auto hrel = [](const Vec2 &) { return 1.0; };
  return distmesh(boundary, {}, sdf, hrel, target_h, opt);
}

Triangulation generate_annulus_mesh(const std::vector<Vec2> &inner, double outer_radius,
                                    double grading, int n_outer, const DistmeshOptions &opt) {
  if (inner.size() < 3) throw std::invalid_argument("generate_annulus_mesh: inner loop too short");
  if (!(grading >= 1.0)) throw std::invalid_argument("generate_annulus_mesh: grading must be >= 1");
  const Vec2 c = polygon_centroid(inner);
  double rin_max = 0.0, rin_mean = 0.0;
  for (const auto &q : inner) {
    rin_max = std::max(rin_max, norm(q - c));
    rin_mean += norm(q - c);
  }
  rin_mean /= static_cast<double>(inner.size());
  if (!(outer_radius > rin_max))
    throw std::invalid_argument("generate_annulus_mesh: inner loop not contained in the outer circle");
  const double h_in = polygon_perimeter(inner) / static_cast<double>(inner.size());
  if (n_outer <= 0)
    n_outer = std::max(8, static_cast<int>(std::lround(2 * kPi * outer_radius / (grading * h_in))));
  auto outer = circle_points(c, outer_radius, n_outer);
  // Target size grows linearly with distance from the membrane.
  const double width = outer_radius - rin_mean;
  auto hrel = [=](const Vec2 &q) {
    double s = std::clamp((norm(q - c) - rin_mean) / width, 0.0, 1.0);
    return 1.0 + (grading - 1.0) * s;
  };
  auto sdf = [&, hrel](const Vec2 &q) {
    const double rc = norm(q - c);
    // Cheap bound away from the membrane; exact polygon distance inside the band.
    double in = rin_max - rc;
    if (in > -0.5 * h_in * hrel(q)) in = -polygon_sdf(q, inner);
    return std::max(in, rc - outer_radius);
  };
  return distmesh(inner, outer, sdf, hrel, h_in, opt);
}

Vec2 star_center() { return {0.5, 0.5}; }

double star_radius(double theta) { return 0.234 - 0.0702 * std::sin(4.0 * theta); }

namespace {

double star_speed(double t) {
  double r = star_radius(t), dr = -4.0 * 0.0702 * std::cos(4.0 * t);
  return std::sqrt(r * r + dr * dr);
}

// Arclength from 0 to theta by composite 5-point Gauss-Legendre.
double star_arclength(double theta) {
  static const double xg[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
  static const double wg[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                               0.4786286704993665, 0.2369268850561891};
  const int m = std::max(1, static_cast<int>(std::ceil(theta / (2 * kPi) * 256)));
  const double h = theta / m;
  double s = 0.0;
  for (int i = 0; i < m; ++i) {
    double a = i * h;
    for (int k = 0; k < 5; ++k) s += 0.5 * h * wg[k] * star_speed(a + 0.5 * h * (xg[k] + 1.0));
  }
  return s;
}

}  // namespace

double star_perimeter() { return star_arclength(2 * kPi); }

Triangulation generate_star_mesh(double h, const DistmeshOptions &opt) {
  if (!(h > 0)) throw std::invalid_argument("generate_star_mesh: h must be positive");
  // h is an element width; the mean edge length of a relaxed mesh is about 7% shorter.
  const double edge = h / 1.07;
  const double perim = star_perimeter();
  const int n = static_cast<int>(std::lround(perim / edge));
  if (n < 16) throw std::invalid_argument("generate_star_mesh: h too large to resolve the lobes");
  const Vec2 c = star_center();
  std::vector<Vec2> boundary(n);
  double theta = 0.0;
  for (int k = 0; k < n; ++k) {
    const double target = perim * k / n;
    for (int it = 0; it < 50; ++it) {
      double f = star_arclength(theta) - target;
      double step = f / star_speed(theta);
      theta -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double r = star_radius(theta);
    boundary[k] = {c.x + r * std::cos(theta), c.y + r * std::sin(theta)};
  }
  auto sdf = [c](const Vec2 &q) {
    Vec2 d = q - c;
    double rho = norm(d), t = std::atan2(d.y, d.x);
    double dr = -4.0 * 0.0702 * std::cos(4.0 * t);
    double g = dr / std::max(rho, 1e-3);
    return (rho - star_radius(t)) / std::sqrt(1.0 + g * g);
  };
  auto hrel = [](const Vec2 &) { return 1.0; };
  Triangulation tri = distmesh(boundary, {}, sdf, hrel, perim / n, opt);
  auto q = mesh_quality(tri);
  if (q.min_angle < 10.0)
    throw NumericalError("mesh", "star mesh too coarse to resolve the lobes (min angle " +
                                     std::to_string(q.min_angle) + " deg)");
  return tri;
}

DomainPair make_domain_pair(Triangulation interior, Triangulation exterior) {
  if (interior.inner_loop.size() != exterior.inner_loop.size())
    throw std::invalid_argument("make_domain_pair: curve node counts differ");
  DomainPair d;
  d.shared_curve_map.resize(interior.inner_loop.size());
  for (std::size_t i = 0; i < interior.inner_loop.size(); ++i) {
    int a = interior.inner_loop[i], b = exterior.inner_loop[i];
    if (!(interior.nodes[a] == exterior.nodes[b]))
      throw std::invalid_argument("make_domain_pair: curve coordinates differ");
    d.shared_curve_map[i] = b;
  }
  d.interior = std::move(interior);
  d.exterior = std::move(exterior);
  return d;
}

Triangulation refine_uniform(const Triangulation &tri,
                             const std::function<Vec2(const Vec2 &)> &project) {
  Triangulation out;
  out.nodes = tri.nodes;
  std::unordered_map<std::uint64_t, int> mid;
  std::unordered_map<std::uint64_t, int> boundary_edge;
  for (const auto *loop : {&tri.inner_loop, &tri.outer_loop})
    for (std::size_t i = 0; i < loop->size(); ++i)
      boundary_edge[edge_key((*loop)[i], (*loop)[(i + 1) % loop->size()])] = 1;
  auto midpoint = [&](int a, int b) {
    auto key = edge_key(a, b);
    auto it = mid.find(key);
    if (it != mid.end()) return it->second;
    Vec2 m = 0.5 * (tri.nodes[a] + tri.nodes[b]);
    if (boundary_edge.count(key)) m = project(m);
    int id = static_cast<int>(out.nodes.size());
    out.nodes.push_back(m);
    mid[key] = id;
    return id;
  };
  for (const auto &t : tri.triangles) {
    int a = t[0], b = t[1], c = t[2];
    int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    out.triangles.push_back({a, ab, ca});
    out.triangles.push_back({ab, b, bc});
    out.triangles.push_back({ca, bc, c});
    out.triangles.push_back({ab, bc, ca});
  }
  auto refine_loop = [&](const std::vector<int> &loop, std::vector<int> &dst) {
    for (std::size_t i = 0; i < loop.size(); ++i) {
      dst.push_back(loop[i]);
      dst.push_back(mid.at(edge_key(loop[i], loop[(i + 1) % loop.size()])));
    }
  };
  refine_loop(tri.inner_loop, out.inner_loop);
  refine_loop(tri.outer_loop, out.outer_loop);
  validate_mesh(out);
  return out;
}

MeshQualityReport mesh_quality(const Triangulation &tri) {
  MeshQualityReport r;
  r.element_count = static_cast<int>(tri.triangles.size());
  r.node_count = static_cast<int>(tri.nodes.size());
  r.boundary_node_count = static_cast<int>(tri.inner_loop.size() + tri.outer_loop.size());
  r.min_angle = 180.0;
  r.min_signed_area = std::numeric_limits<double>::infinity();
  for (const auto &t : tri.triangles) {
    const Vec2 &a = tri.nodes[t[0]], &b = tri.nodes[t[1]], &c = tri.nodes[t[2]];
    double area = signed_area(a, b, c);
    r.min_signed_area = std::min(r.min_signed_area, area);
    double la = norm(b - c), lb = norm(c - a), lc = norm(a - b);
    auto angle = [](double opp, double s1, double s2) {
      double v = (s1 * s1 + s2 * s2 - opp * opp) / (2 * s1 * s2);
      return std::acos(std::clamp(v, -1.0, 1.0)) * 180.0 / kPi;
    };
    r.min_angle = std::min({r.min_angle, angle(la, lb, lc), angle(lb, lc, la), angle(lc, la, lb)});
    // Circumradius over twice the inradius; 1 for an equilateral triangle.
    double s = 0.5 * (la + lb + lc);
    double aa = std::abs(area);
    double ratio = aa > 0 ? (la * lb * lc / (4 * aa)) / (2 * aa / s)
                          : std::numeric_limits<double>::infinity();
    r.max_aspect_ratio = std::max(r.max_aspect_ratio, ratio);
  }
  if (tri.triangles.empty()) r.min_signed_area = 0.0;
  return r;
}

void validate_mesh(const Triangulation &tri) {
  const int n = static_cast<int>(tri.nodes.size());
  for (std::size_t k = 0; k < tri.triangles.size(); ++k) {
    const auto &t = tri.triangles[k];
    for (int v : t)
      if (v < 0 || v >= n) throw NumericalError("mesh", "triangle index out of range");
    double a = signed_area(tri.nodes[t[0]], tri.nodes[t[1]], tri.nodes[t[2]]);
    if (!(a > 0))
      throw NumericalError("mesh", "triangle " + std::to_string(k) + " has non-positive signed area " +
                                       std::to_string(a));
  }
  std::unordered_map<std::uint64_t, int> count;
  for (const auto &t : tri.triangles)
    for (int k = 0; k < 3; ++k) count[edge_key(t[k], t[(k + 1) % 3])]++;
  std::size_t boundary_edges = 0;
  for (const auto &[key, c] : count) {
    if (c > 2) throw NumericalError("mesh", "edge shared by more than two triangles");
    if (c == 1) ++boundary_edges;
  }
  std::size_t loop_edges = 0;
  for (const auto *loop : {&tri.inner_loop, &tri.outer_loop}) {
    if (loop->empty()) continue;
    if (loop->size() < 3) throw NumericalError("mesh", "boundary loop shorter than three nodes");
    std::vector<int> sorted(*loop);
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw NumericalError("mesh", "boundary loop is not simple");
    for (std::size_t i = 0; i < loop->size(); ++i) {
      int a = (*loop)[i], b = (*loop)[(i + 1) % loop->size()];
      if (a < 0 || a >= n) throw NumericalError("mesh", "boundary index out of range");
      auto it = count.find(edge_key(a, b));
      if (it == count.end() || it->second != 1)
        throw NumericalError("mesh", "boundary edge " + std::to_string(a) + "-" + std::to_string(b) +
                                         " does not belong to exactly one triangle");
      ++loop_edges;
    }
  }
  if (loop_edges != boundary_edges)
    throw NumericalError("mesh", "mesh has boundary edges outside the declared loops");
}

int count_edges(const Triangulation &tri) {
  return static_cast<int>(unique_edges(tri.triangles).size());
}

double max_element_diameter(const Triangulation &tri) {
  double h = 0.0;
  for (const auto &t : tri.triangles)
    for (int k = 0; k < 3; ++k) h = std::max(h, norm(tri.nodes[t[k]] - tri.nodes[t[(k + 1) % 3]]));
  return h;
}

Triangulation read_mesh(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path);
  std::string w1, w2, w3, w4;
  long long n, t, b, o;
  if (!(in >> w1 >> n >> w2 >> t >> w3 >> b >> w4 >> o) || w1 != "nodes" || w2 != "triangles" ||
      w3 != "inner" || w4 != "outer" || n < 0 || t < 0 || b < 0 || o < 0)
    throw IoError(path + ": malformed header");
  Triangulation tri;
  tri.nodes.resize(n);
  for (auto &p : tri.nodes)
    if (!(in >> p.x >> p.y)) throw IoError(path + ": too few node lines");
  tri.triangles.resize(t);
  for (auto &tr : tri.triangles)
    for (int &v : tr) {
      if (!(in >> v)) throw IoError(path + ": too few triangle lines");
      if (v < 0 || v >= n) throw IoError(path + ": triangle index out of range");
    }
  auto read_loop = [&](long long count, std::vector<int> &dst) {
    dst.resize(count);
    for (int &v : dst) {
      if (!(in >> v)) throw IoError(path + ": too few loop indices");
      if (v < 0 || v >= n) throw IoError(path + ": loop index out of range");
    }
  };
  read_loop(b, tri.inner_loop);
  read_loop(o, tri.outer_loop);
  std::string extra;
  if (in >> extra) throw IoError(path + ": trailing data after the declared counts");
  return tri;
}

void write_mesh(const Triangulation &tri, const std::string &path) {
  std::FILE *f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("cannot write mesh file " + path);
  std::fprintf(f, "nodes %zu triangles %zu inner %zu outer %zu\n", tri.nodes.size(),
               tri.triangles.size(), tri.inner_loop.size(), tri.outer_loop.size());
  for (const auto &p : tri.nodes) std::fprintf(f, "%.17g %.17g\n", p.x, p.y);
  for (const auto &t : tri.triangles) std::fprintf(f, "%d %d %d\n", t[0], t[1], t[2]);
  for (int v : tri.inner_loop) std::fprintf(f, "%d\n", v);
  for (int v : tri.outer_loop) std::fprintf(f, "%d\n", v);
  if (std::fclose(f) != 0) throw IoError("failed to finish writing " + path);
}

}  // namespace morphosim
