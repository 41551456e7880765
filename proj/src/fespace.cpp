#include "csfem/fespace.hpp"

#include <cmath>

#include "csfem/errors.hpp"

namespace csfem::fespace {

namespace {

using linalg::SparseMatrix;
using linalg::Triplet;

// Local RT0 basis function for the face opposite local vertex j, scaled so
// that the dof is the integrated (not averaged) normal flux:
//   psi_j(x) = sign * (x - a_j) / (2|E|).
Vec2 rt0_basis(const Mesh& mesh, int cell, int local_face, Vec2 x) {
  const Vec2 opposite = mesh.vertex(mesh.cell(cell)[local_face]);
  const int face = mesh.cell_faces(cell)[local_face];
  const double scale =
      mesh.face_sign(cell, face) / (2.0 * mesh.cell_area(cell));
  return (x - opposite) * scale;
}

// Gradients of the three barycentric coordinates on a cell.
std::array<Vec2, 3> p1_gradients(const Mesh& mesh, int cell) {
  const auto& vs = mesh.cell(cell);
  const double inv = 1.0 / (2.0 * mesh.cell_area(cell));
  std::array<Vec2, 3> grad;
  for (int i = 0; i < 3; ++i) {
    const Vec2 d = mesh.vertex(vs[(i + 2) % 3]) - mesh.vertex(vs[(i + 1) % 3]);
    grad[i] = Vec2{-d.y, d.x} * inv;
  }
  return grad;
}

} // namespace

// ===========================================================================
// Quadrature
// ===========================================================================

std::array<QuadPoint, 3> cell_quadrature(const Mesh& mesh, int cell) {
  const auto& vs = mesh.cell(cell);
  const Vec2 a = mesh.vertex(vs[0]);
  const Vec2 b = mesh.vertex(vs[1]);
  const Vec2 c = mesh.vertex(vs[2]);
  const double w = mesh.cell_area(cell) / 3.0;
  return {QuadPoint{(a + b) * 0.5, w}, QuadPoint{(b + c) * 0.5, w},
          QuadPoint{(c + a) * 0.5, w}};
}

std::array<QuadPoint, 2> face_quadrature(const Mesh& mesh, int face) {
  const mesh::Face& f = mesh.face(face);
  const Vec2 a = mesh.vertex(f.v0);
  const Vec2 b = mesh.vertex(f.v1);
  const Vec2 m = (a + b) * 0.5;
  const Vec2 half = (b - a) * (0.5 / std::sqrt(3.0));
  const double w = 0.5 * f.measure;
  return {QuadPoint{m - half, w}, QuadPoint{m + half, w}};
}

// ===========================================================================
// Interpolation
// ===========================================================================

DensityField interp_Q(const Mesh& mesh, const std::function<double(Vec2)>& f) {
  DensityField out(mesh);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double acc = 0.0;
    for (const QuadPoint& q : cell_quadrature(mesh, c)) acc += q.w * f(q.x);
    out[c] = acc / mesh.cell_area(c);
  }
  return out;
}

VelocityField interp_V(const Mesh& mesh, const std::function<Vec2(Vec2)>& v) {
  VelocityField out(mesh);
  for (int f : mesh.interior_faces()) {
    const mesh::Face& face = mesh.face(f);
    double flux = 0.0;
    for (const QuadPoint& q : face_quadrature(mesh, f))
      flux += q.w * dot(v(q.x), face.normal);
    out[face.dof] = flux;
  }
  return out;
}

VorticityField interp_W(const Mesh& mesh, const std::function<double(Vec2)>& w) {
  VorticityField out(mesh);
  for (int d = 0; d < mesh.n_interior_vertices(); ++d)
    out[d] = w(mesh.vertex(mesh.dof_vertex(d)));
  return out;
}

std::vector<Vec2> interp_Q_vector(const Mesh& mesh,
                                  const std::function<Vec2(Vec2)>& f) {
  std::vector<Vec2> out(static_cast<size_t>(mesh.n_cells()));
  for (int c = 0; c < mesh.n_cells(); ++c) {
    Vec2 acc{0.0, 0.0};
    for (const QuadPoint& q : cell_quadrature(mesh, c))
      acc = acc + f(q.x) * q.w;
    out[c] = acc * (1.0 / mesh.cell_area(c));
  }
  return out;
}

// ===========================================================================
// Evaluation
// ===========================================================================

Vec2 eval_V(const VelocityField& u, int cell, Vec2 x) {
  const Mesh& mesh = u.mesh();
  Vec2 value{0.0, 0.0};
  for (int j = 0; j < 3; ++j) {
    const int face = mesh.cell_faces(cell)[j];
    const int dof = mesh.face_dof(face);
    if (dof < 0) continue; // boundary flux is zero
    value = value + rt0_basis(mesh, cell, j, x) * u[dof];
  }
  return value;
}

double div_V(const VelocityField& u, int cell) {
  const Mesh& mesh = u.mesh();
  double acc = 0.0;
  for (int j = 0; j < 3; ++j) {
    const int face = mesh.cell_faces(cell)[j];
    const int dof = mesh.face_dof(face);
    if (dof < 0) continue;
    acc += mesh.face_sign(cell, face) * u[dof];
  }
  return acc / mesh.cell_area(cell);
}

DensityField div_field(const VelocityField& u) {
  DensityField out(u.mesh());
  for (int c = 0; c < u.mesh().n_cells(); ++c) out[c] = div_V(u, c);
  return out;
}

Vec2 curl_W(const VorticityField& w, int cell) {
  const Mesh& mesh = w.mesh();
  const auto grad = p1_gradients(mesh, cell);
  Vec2 g{0.0, 0.0};
  for (int i = 0; i < 3; ++i)
    g = g + grad[i] * w.at_vertex(mesh.cell(cell)[i]);
  return {g.y, -g.x};
}

double eval_W(const VorticityField& w, int cell, Vec2 x) {
  const Mesh& mesh = w.mesh();
  const auto& vs = mesh.cell(cell);
  const Vec2 a = mesh.vertex(vs[0]);
  const Vec2 b = mesh.vertex(vs[1]);
  const Vec2 c = mesh.vertex(vs[2]);
  const double area2 = 2.0 * mesh.cell_area(cell);
  const double l0 = cross(b - x, c - x) / area2;
  const double l1 = cross(c - x, a - x) / area2;
  const double l2 = cross(a - x, b - x) / area2;
  return l0 * w.at_vertex(vs[0]) + l1 * w.at_vertex(vs[1]) +
         l2 * w.at_vertex(vs[2]);
}

// ===========================================================================
// Integrals and norms
// ===========================================================================

double integral(const DensityField& f) {
  double acc = 0.0;
  for (int c = 0; c < f.mesh().n_cells(); ++c)
    acc += f.mesh().cell_area(c) * f[c];
  return acc;
}

double l2_norm(const DensityField& f) {
  double acc = 0.0;
  for (int c = 0; c < f.mesh().n_cells(); ++c)
    acc += f.mesh().cell_area(c) * f[c] * f[c];
  return std::sqrt(acc);
}

double l2_norm(const VelocityField& u) {
  // |u|^2 is quadratic per cell, so the cell rule integrates it exactly.
  double acc = 0.0;
  for (int c = 0; c < u.mesh().n_cells(); ++c)
    for (const QuadPoint& q : cell_quadrature(u.mesh(), c)) {
      const Vec2 v = eval_V(u, c, q.x);
      acc += q.w * dot(v, v);
    }
  return std::sqrt(acc);
}

double l2_norm(const VorticityField& w) {
  double acc = 0.0;
  for (int c = 0; c < w.mesh().n_cells(); ++c)
    for (const QuadPoint& q : cell_quadrature(w.mesh(), c)) {
      const double v = eval_W(w, c, q.x);
      acc += q.w * v * v;
    }
  return std::sqrt(acc);
}

double l2_norm_curl(const VorticityField& w) {
  double acc = 0.0;
  for (int c = 0; c < w.mesh().n_cells(); ++c) {
    const Vec2 g = curl_W(w, c);
    acc += w.mesh().cell_area(c) * dot(g, g);
  }
  return std::sqrt(acc);
}

double max_abs_div(const VelocityField& u) {
  double best = 0.0;
  for (int c = 0; c < u.mesh().n_cells(); ++c)
    best = std::max(best, std::abs(div_V(u, c)));
  return best;
}

// ===========================================================================
// Structure checks
// ===========================================================================

double check_commuting(const Mesh& mesh, const AnalyticVectorField& v) {
  const VelocityField vh = interp_V(mesh, v.value);
  const DensityField dv = interp_Q(mesh, v.divergence);
  double worst = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c)
    worst = std::max(worst, std::abs(div_V(vh, c) - dv[c]));
  return worst;
}

// ===========================================================================
// Operator assembly
// ===========================================================================

SparseMatrix mass_W(const Mesh& mesh) {
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& vs = mesh.cell(c);
    const double scale = mesh.cell_area(c) / 12.0;
    for (int i = 0; i < 3; ++i) {
      const int di = mesh.vertex_dof(vs[i]);
      if (di < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int dj = mesh.vertex_dof(vs[j]);
        if (dj < 0) continue;
        t.push_back({di, dj, scale * (i == j ? 2.0 : 1.0)});
      }
    }
  }
  const int n = mesh.n_interior_vertices();
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix stiffness_W(const Mesh& mesh) {
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& vs = mesh.cell(c);
    const auto grad = p1_gradients(mesh, c);
    const double area = mesh.cell_area(c);
    for (int i = 0; i < 3; ++i) {
      const int di = mesh.vertex_dof(vs[i]);
      if (di < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int dj = mesh.vertex_dof(vs[j]);
        if (dj < 0) continue;
        t.push_back({di, dj, area * dot(grad[i], grad[j])});
      }
    }
  }
  const int n = mesh.n_interior_vertices();
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix mass_V(const Mesh& mesh) {
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto quad = cell_quadrature(mesh, c);
    for (int i = 0; i < 3; ++i) {
      const int di = mesh.face_dof(mesh.cell_faces(c)[i]);
      if (di < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int dj = mesh.face_dof(mesh.cell_faces(c)[j]);
        if (dj < 0) continue;
        double acc = 0.0;
        for (const QuadPoint& q : quad)
          acc += q.w * dot(rt0_basis(mesh, c, i, q.x), rt0_basis(mesh, c, j, q.x));
        t.push_back({di, dj, acc});
      }
    }
  }
  const int n = mesh.n_interior_faces();
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix divdiv_V(const Mesh& mesh) {
  std::vector<Triplet> t;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double inv_area = 1.0 / mesh.cell_area(c);
    for (int i = 0; i < 3; ++i) {
      const int fi = mesh.cell_faces(c)[i];
      const int di = mesh.face_dof(fi);
      if (di < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int fj = mesh.cell_faces(c)[j];
        const int dj = mesh.face_dof(fj);
        if (dj < 0) continue;
        t.push_back({di, dj,
                     mesh.face_sign(c, fi) * mesh.face_sign(c, fj) * inv_area});
      }
    }
  }
  const int n = mesh.n_interior_faces();
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix curl_incidence(const Mesh& mesh) {
  // The flux of curl(zeta) through a face is the tangential increment of
  // zeta: integral over Gamma of d(zeta)/d(tau) = zeta(v1) - zeta(v0), with
  // the stored endpoint order matching tau = rot90(normal).
  std::vector<Triplet> t;
  for (int f : mesh.interior_faces()) {
    const mesh::Face& face = mesh.face(f);
    const int row = face.dof;
    const int d1 = mesh.vertex_dof(face.v1);
    const int d0 = mesh.vertex_dof(face.v0);
    if (d1 >= 0) t.push_back({row, d1, 1.0});
    if (d0 >= 0) t.push_back({row, d0, -1.0});
  }
  return SparseMatrix::from_triplets(mesh.n_interior_faces(),
                                     mesh.n_interior_vertices(), std::move(t));
}

SparseMatrix curl_coupling(const Mesh& mesh) {
  return mass_V(mesh).multiply(curl_incidence(mesh));
}

std::vector<double> load_V(const Mesh& mesh, const std::vector<Vec2>& f_cells) {
  if (static_cast<int>(f_cells.size()) != mesh.n_cells())
    throw InvariantError("load_V: cell data size mismatch");
  std::vector<double> load(static_cast<size_t>(mesh.n_interior_faces()), 0.0);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    // (f, psi_j)_E = f_E . (centroid - opposite vertex) * sign / 2 exactly.
    const Vec2 centroid = mesh.cell_centroid(c);
    for (int j = 0; j < 3; ++j) {
      const int face = mesh.cell_faces(c)[j];
      const int dof = mesh.face_dof(face);
      if (dof < 0) continue;
      const Vec2 moment = (centroid - mesh.vertex(mesh.cell(c)[j])) *
                          (0.5 * mesh.face_sign(c, face));
      load[dof] += dot(f_cells[c], moment);
    }
  }
  return load;
}

} // namespace csfem::fespace
