#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace csfem::mesh {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

/// One edge of the triangulation.
///
/// The endpoints are stored in the traversal order of cell_minus, so the
/// tangent v0 -> v1 is the +90 degree rotation of the normal.  The normal
/// points from cell_minus into cell_plus; on the boundary it is the outward
/// normal and cell_plus is -1.  For interior faces cell_minus always carries
/// the lower cell index, which pins the orientation of shared faces.
struct Face {
  int v0 = -1;
  int v1 = -1;
  int cell_minus = -1;
  int cell_plus = -1;
  Vec2 normal;
  double measure = 0.0;
  int dof = -1; // interior face dof id, -1 on the boundary
};

/// Conforming triangulation of a polygonal domain.
///
/// Immutable after construction; every derived quantity (face connectivity,
/// areas, mesh size, the point-location grid) is computed once in build().
/// Cells must be listed counterclockwise.
class Mesh {
public:
  int n_vertices() const { return static_cast<int>(vertices_.size()); }
  int n_cells() const { return static_cast<int>(cells_.size()); }
  int n_faces() const { return static_cast<int>(faces_.size()); }
  int n_interior_faces() const { return static_cast<int>(interior_faces_.size()); }
  int n_interior_vertices() const { return static_cast<int>(interior_vertices_.size()); }

  Vec2 vertex(int v) const { return vertices_[v]; }
  const std::array<int, 3>& cell(int c) const { return cells_[c]; }
  const Face& face(int f) const { return faces_[f]; }

  double cell_area(int c) const { return cell_area_[c]; }
  Vec2 cell_centroid(int c) const { return cell_centroid_[c]; }
  double cell_diameter(int c) const { return cell_diameter_[c]; }

  /// Face ids per cell; local face j lies opposite local vertex j.
  const std::array<int, 3>& cell_faces(int c) const { return cell_faces_[c]; }
  /// +1 where the face normal is outward for this cell, -1 otherwise.
  int face_sign(int c, int f) const {
    return faces_[f].cell_minus == c ? 1 : -1;
  }

  const std::vector<int>& interior_faces() const { return interior_faces_; }
  const std::vector<int>& interior_vertices() const { return interior_vertices_; }

  bool boundary_vertex(int v) const { return boundary_vertex_[v] != 0; }
  /// Interior vertex dof id, -1 on the boundary.
  int vertex_dof(int v) const { return vertex_dof_[v]; }
  int face_dof(int f) const { return faces_[f].dof; }
  int dof_vertex(int d) const { return interior_vertices_[d]; }
  int dof_face(int d) const { return interior_faces_[d]; }

  /// Largest cell diameter.
  double h() const { return h_; }
  /// Shape regularity: max over cells of diameter / inscribed circle diameter.
  double kappa() const { return kappa_; }

  /// Lowest-index cell whose closed hull contains x, or nullopt when x lies
  /// outside the triangulation.  Queries go through a uniform bounding-box
  /// grid, so a lookup is O(1) for shape-regular meshes.
  std::optional<int> locate_point(Vec2 x) const;

  friend Mesh build_mesh(std::vector<Vec2> vertices,
                         std::vector<std::array<int, 3>> cells);

private:
  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<Face> faces_;
  std::vector<std::array<int, 3>> cell_faces_;
  std::vector<double> cell_area_;
  std::vector<Vec2> cell_centroid_;
  std::vector<double> cell_diameter_;
  std::vector<int> interior_faces_;
  std::vector<int> interior_vertices_;
  std::vector<char> boundary_vertex_;
  std::vector<int> vertex_dof_;
  double h_ = 0.0;
  double kappa_ = 0.0;

  // Point-location grid: cells are binned by bounding box overlap.
  int grid_nx_ = 0;
  int grid_ny_ = 0;
  Vec2 grid_lo_;
  Vec2 grid_hi_;
  std::vector<std::vector<int>> grid_bins_;

  void build();
};

/// Validates connectivity and orientation, derives faces and the rest of the
/// mesh metadata.  Throws InvariantError on nonpositive cell areas, out of
/// range vertex ids, or non-manifold connectivity.
Mesh build_mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells);

/// Structured K x K triangulation of the unit square, each square split along
/// the (0,0)-(1,1) diagonal: 2K^2 cells, 3K^2 + 2K faces.
Mesh unit_square(int k);

/// Uniform 4-way refinement: every cell is split at its edge midpoints.
/// The children of cell c are cells 4c .. 4c+3 of the result (the three
/// corner triangles, then the central one); parent vertices keep their ids;
/// midpoint ids follow the lexicographic order of the parent edge (min,max)
/// pairs.
Mesh refine_uniform(const Mesh& mesh);

/// Plain text mesh interchange:
///   DIM 2 / NV n / NC m header lines, n "x y" lines, m "i j k" lines (0-based).
Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

} // namespace csfem::mesh
