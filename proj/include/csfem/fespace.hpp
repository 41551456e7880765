#pragma once

#include <array>
#include <functional>
#include <vector>

#include "csfem/linalg.hpp"
#include "csfem/mesh.hpp"

namespace csfem::fespace {

using mesh::Mesh;
using mesh::Vec2;

// ===========================================================================
// Discrete fields
//
// Three spaces make up the discretization:
//   Q_h  piecewise constants, one value per cell (densities, pressures);
//   V_h  lowest-order H(div) elements, per cell of the form a + b*x.  A
//        coefficient is the integrated normal flux over an interior face;
//        boundary faces are omitted, which imposes u.nu = 0 exactly;
//   W_h  continuous piecewise linears with zero boundary trace, one value
//        per interior vertex (vorticities, stream functions).
//
// Fields keep a pointer to their mesh; the mesh must outlive the field.
// ===========================================================================

class DensityField {
public:
  explicit DensityField(const Mesh& mesh, double fill = 0.0)
      : mesh_(&mesh), values_(static_cast<size_t>(mesh.n_cells()), fill) {}

  const Mesh& mesh() const { return *mesh_; }
  int size() const { return static_cast<int>(values_.size()); }
  double operator[](int cell) const { return values_[cell]; }
  double& operator[](int cell) { return values_[cell]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

private:
  const Mesh* mesh_;
  std::vector<double> values_;
};

class VelocityField {
public:
  explicit VelocityField(const Mesh& mesh, double fill = 0.0)
      : mesh_(&mesh),
        values_(static_cast<size_t>(mesh.n_interior_faces()), fill) {}

  const Mesh& mesh() const { return *mesh_; }
  int size() const { return static_cast<int>(values_.size()); }
  /// Coefficient by interior-face dof id (integrated normal flux).
  double operator[](int dof) const { return values_[dof]; }
  double& operator[](int dof) { return values_[dof]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

private:
  const Mesh* mesh_;
  std::vector<double> values_;
};

class VorticityField {
public:
  explicit VorticityField(const Mesh& mesh, double fill = 0.0)
      : mesh_(&mesh),
        values_(static_cast<size_t>(mesh.n_interior_vertices()), fill) {}

  const Mesh& mesh() const { return *mesh_; }
  int size() const { return static_cast<int>(values_.size()); }
  /// Coefficient by interior-vertex dof id; boundary values are zero.
  double operator[](int dof) const { return values_[dof]; }
  double& operator[](int dof) { return values_[dof]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Vertex value including the zero boundary trace.
  double at_vertex(int vertex) const {
    const int dof = mesh_->vertex_dof(vertex);
    return dof < 0 ? 0.0 : values_[dof];
  }

private:
  const Mesh* mesh_;
  std::vector<double> values_;
};

/// Analytic vector field handed to interpolation / verification routines.
/// The divergence is supplied by the caller, not differenced numerically.
struct AnalyticVectorField {
  std::function<Vec2(Vec2)> value;
  std::function<double(Vec2)> divergence;
};

// ===========================================================================
// Quadrature
//
// All integration in the library runs through two fixed rules: the 3-point
// edge-midpoint rule on triangles (exact for quadratics) and 2-point Gauss
// on faces (exact for cubics).  Weights sum to the cell area / face length.
// ===========================================================================

struct QuadPoint {
  Vec2 x;
  double w;
};

std::array<QuadPoint, 3> cell_quadrature(const Mesh& mesh, int cell);
std::array<QuadPoint, 2> face_quadrature(const Mesh& mesh, int face);

// ===========================================================================
// Canonical interpolation operators
// ===========================================================================

/// Cell averages (by the cell rule).
DensityField interp_Q(const Mesh& mesh, const std::function<double(Vec2)>& f);

/// Integrated normal fluxes over interior faces (by the face rule).
VelocityField interp_V(const Mesh& mesh, const std::function<Vec2(Vec2)>& v);

/// Interior vertex values; boundary values are dropped (zero trace).
VorticityField interp_W(const Mesh& mesh, const std::function<double(Vec2)>& w);

/// Componentwise cell averages, used for body-force ingestion.
std::vector<Vec2> interp_Q_vector(const Mesh& mesh,
                                  const std::function<Vec2(Vec2)>& f);

// ===========================================================================
// Evaluation
// ===========================================================================

/// Value of the H(div) field inside a cell.
Vec2 eval_V(const VelocityField& u, int cell, Vec2 x);

/// Divergence, constant per cell: (1/|E|) * sum of signed face coefficients.
double div_V(const VelocityField& u, int cell);
DensityField div_field(const VelocityField& u);

/// Scalar-to-vector curl (d/dy, -d/dx) of the P1 field, constant per cell.
Vec2 curl_W(const VorticityField& w, int cell);

double eval_W(const VorticityField& w, int cell, Vec2 x);

// ===========================================================================
// Integrals and norms (exact for the piecewise-polynomial fields)
// ===========================================================================

double integral(const DensityField& f);
double l2_norm(const DensityField& f);
double l2_norm(const VelocityField& u);
double l2_norm(const VorticityField& w);
/// L2 norm of the piecewise-constant curl of w.
double l2_norm_curl(const VorticityField& w);
double max_abs_div(const VelocityField& u);

// ===========================================================================
// Structure checks
// ===========================================================================

/// Max over cells of |div(interp_V v) - interp_Q(div v)|.  Zero to rounding
/// for fields whose flux and divergence the quadrature rules integrate
/// exactly (componentwise degree <= 3, divergence degree <= 2) PROVIDED
/// v.nu = 0 on the boundary: interp_V projects onto the zero-normal-trace
/// space, so a boundary flux the field actually carries is lost and shows
/// up here as an O(1) defect.
double check_commuting(const Mesh& mesh, const AnalyticVectorField& v);

// ===========================================================================
// Operator assembly on the interior dof sets
//
// G, the curl incidence map, sends W_h coefficients to the V_h coefficients
// of their (exact) curl: the integrated normal flux of curl(zeta) over a face
// is the difference of zeta at the face endpoints.  This makes the discrete
// complex and the Hodge machinery exact at coefficient level, and the
// coupling matrix R = mass_V * G inherits that exactness.
// ===========================================================================

linalg::SparseMatrix mass_W(const Mesh& mesh);
linalg::SparseMatrix stiffness_W(const Mesh& mesh); // = curl-curl form in 2D
linalg::SparseMatrix mass_V(const Mesh& mesh);
linalg::SparseMatrix divdiv_V(const Mesh& mesh);
linalg::SparseMatrix curl_incidence(const Mesh& mesh); // n_V x n_W
linalg::SparseMatrix curl_coupling(const Mesh& mesh);  // R[a,i] = (psi_a, curl phi_i)

/// Load vector F_a = (f, psi_a) for a cellwise-constant vector field f.
/// Exact: the moment of an RT0 basis function over its cell is closed form.
std::vector<double> load_V(const Mesh& mesh, const std::vector<Vec2>& f_cells);

} // namespace csfem::fespace
