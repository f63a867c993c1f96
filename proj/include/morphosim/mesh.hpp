#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "morphosim/core.hpp"

namespace morphosim {

struct Triangulation {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> inner_loop;  // membrane curve, CCW
  std::vector<int> outer_loop;  // outer circle of the annulus, CCW; empty otherwise

  bool operator==(const Triangulation &) const = default;
};

// Interior mesh plus optional exterior annulus sharing the membrane nodes.
struct DomainPair {
  Triangulation interior;
  std::optional<Triangulation> exterior;
  // shared_curve_map[i] is the exterior node matching interior.inner_loop[i].
  std::vector<int> shared_curve_map;
};

struct MeshQualityReport {
  double min_angle = 0.0;  // degrees
  double min_signed_area = 0.0;
  double max_aspect_ratio = 0.0;
  int element_count = 0;
  int node_count = 0;
  int boundary_node_count = 0;
};

struct DistmeshOptions {
  int retriangulate_every = 20;
  double dptol = 1e-3;
  int max_iterations = 4000;
  double fscale = 1.2;
  double deltat = 0.2;
  unsigned seed = 20190611u;
};

double signed_area(const Vec2 &a, const Vec2 &b, const Vec2 &c);
double polygon_area(const std::vector<Vec2> &poly);
double polygon_perimeter(const std::vector<Vec2> &poly);
Vec2 polygon_centroid(const std::vector<Vec2> &poly);
bool point_in_polygon(const Vec2 &p, const std::vector<Vec2> &poly);
std::vector<Vec2> loop_points(const Triangulation &tri, const std::vector<int> &loop);

// CCW Delaunay triangulation of a point set (Bowyer-Watson).
std::vector<std::array<int, 3>> delaunay_triangulate(const std::vector<Vec2> &pts);

// Truss relaxation with fixed boundary loops. `sdf` is negative inside and
// `hrel` is the relative size field (1 where the target size is h0).
Triangulation distmesh(const std::vector<Vec2> &inner_loop, const std::vector<Vec2> &outer_loop,
                       const std::function<double(const Vec2 &)> &sdf,
                       const std::function<double(const Vec2 &)> &hrel, double h0,
                       const DistmeshOptions &opt = {});

Triangulation generate_circle_mesh(double radius, int n_boundary, double target_h,
                                   const DistmeshOptions &opt = {});
// n_outer <= 0 picks the outer node count from the graded size at the outer circle.
Triangulation generate_annulus_mesh(const std::vector<Vec2> &inner_loop, double outer_radius,
                                    double grading, int n_outer = 0,
                                    const DistmeshOptions &opt = {});
Triangulation generate_star_mesh(double h, const DistmeshOptions &opt = {});
DomainPair make_domain_pair(Triangulation interior, Triangulation exterior);

// Star boundary radius about (0.5, 0.5).
double star_radius(double theta);
Vec2 star_center();
double star_perimeter();

// Splits every triangle into four; boundary midpoints are mapped by `project`.
Triangulation refine_uniform(const Triangulation &tri,
                             const std::function<Vec2(const Vec2 &)> &project);

MeshQualityReport mesh_quality(const Triangulation &tri);
// Throws NumericalError("mesh", ...) on inverted triangles or broken loops.
void validate_mesh(const Triangulation &tri);
int count_edges(const Triangulation &tri);
double max_element_diameter(const Triangulation &tri);

Triangulation read_mesh(const std::string &path);
void write_mesh(const Triangulation &tri, const std::string &path);

}  // namespace morphosim
