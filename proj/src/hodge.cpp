#include "csfem/hodge.hpp"

#include <cmath>
#include <sstream>

#include "csfem/errors.hpp"

namespace csfem::hodge {

using linalg::SparseMatrix;
using linalg::Triplet;

HodgeSolver::HodgeSolver(const Mesh& mesh)
    : mesh_(&mesh),
      G_(fespace::curl_incidence(mesh)),
      Mv_(fespace::mass_V(mesh)),
      R_(Mv_.multiply(G_)),
      stiffness_(linalg::Factorization::compute(fespace::stiffness_W(mesh))) {}

HodgeSolver::~HodgeSolver() = default;

HodgeParts HodgeSolver::decompose(const VelocityField& u) const {
  if (&u.mesh() != mesh_) throw InvariantError("decompose: mesh mismatch");

  // (curl zeta, curl eta) = (u, curl eta): stiffness solve against G^T M u.
  const std::vector<double> rhs = R_.multiply_transpose(u.values());
  const std::vector<double> zeta = stiffness_.solve(rhs);

  HodgeParts parts{VorticityField(*mesh_), VelocityField(*mesh_)};
  parts.stream.values() = zeta;
  const std::vector<double> curl_zeta = G_.multiply(zeta);
  for (int a = 0; a < parts.complement.size(); ++a)
    parts.complement[a] = u[a] - curl_zeta[a];
  return parts;
}

VelocityField HodgeSolver::solve_div(const DensityField& q) const {
  const Mesh& mesh = *mesh_;
  if (&q.mesh() != mesh_) throw InvariantError("solve_div: mesh mismatch");

  double mean = 0.0, norm_sq = 0.0, max_abs = 0.0;
  for (int c = 0; c < q.size(); ++c) {
    mean += mesh.cell_area(c) * q[c];
    norm_sq += mesh.cell_area(c) * q[c] * q[c];
    max_abs = std::max(max_abs, std::abs(q[c]));
  }
  if (std::abs(mean) > 1e-10 * std::sqrt(norm_sq)) {
    std::ostringstream msg;
    msg << "solve_div: right-hand side must have zero mean (got " << mean
        << ", norm " << std::sqrt(norm_sq) << ")";
    throw InvariantError(msg.str());
  }

  const int nv = mesh.n_interior_faces();
  const int nw = mesh.n_interior_vertices();
  if (!saddle_) {
    std::vector<Triplet> t;
    const SparseMatrix D = fespace::divdiv_V(mesh);
    for (int r = 0; r < nv; ++r)
      for (int k = D.row_ptr()[r]; k < D.row_ptr()[r + 1]; ++k)
        t.push_back({r, D.col_idx()[k], D.values()[k]});
    for (int r = 0; r < nv; ++r)
      for (int k = R_.row_ptr()[r]; k < R_.row_ptr()[r + 1]; ++k) {
        const int i = R_.col_idx()[k];
        t.push_back({r, nv + i, R_.values()[k]});
        t.push_back({nv + i, r, R_.values()[k]});
      }
    saddle_ = std::make_unique<linalg::Factorization>(
        linalg::Factorization::compute(
            SparseMatrix::from_triplets(nv + nw, nv + nw, std::move(t))));
  }

  // g_a = (q, div psi_a) is pure incidence, like the pressure load.
  std::vector<double> rhs(static_cast<size_t>(nv + nw), 0.0);
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (int j = 0; j < 3; ++j) {
      const int face = mesh.cell_faces(c)[j];
      const int dof = mesh.face_dof(face);
      if (dof < 0) continue;
      rhs[dof] += q[c] * mesh.face_sign(c, face);
    }

  const std::vector<double> x = saddle_->solve(rhs);
  VelocityField v(mesh);
  for (int a = 0; a < nv; ++a) v[a] = x[a];

  const double tol = 1e-10 * (1.0 + max_abs);
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (std::abs(fespace::div_V(v, c) - q[c]) > tol) {
      std::ostringstream msg;
      msg << "solve_div: divergence defect " << fespace::div_V(v, c) - q[c]
          << " in cell " << c << " exceeds " << tol;
      throw InvariantError(msg.str());
    }
  return v;
}

PoincareConstants poincare_constants(const Mesh& mesh) {
  const SparseMatrix K = fespace::stiffness_W(mesh);
  const SparseMatrix Mw = fespace::mass_W(mesh);
  const SparseMatrix D = fespace::divdiv_V(mesh);
  const SparseMatrix Mv = fespace::mass_V(mesh);
  // Constraint rows G^T M_V pin the complement space; in 2D the curl
  // inequality needs no restriction since curl is injective on W_h.
  const SparseMatrix C = Mv.multiply(fespace::curl_incidence(mesh)).transpose();

  PoincareConstants out;
  const auto curl_min = linalg::smallest_rayleigh(K, Mw);
  const auto div_min = linalg::smallest_rayleigh(D, Mv, &C);
  if (!(curl_min.value > 0.0) || !(div_min.value > 0.0))
    throw InvariantError("poincare_constants: nonpositive extremal eigenvalue");
  out.c_curl = 1.0 / std::sqrt(curl_min.value);
  out.c_div = 1.0 / std::sqrt(div_min.value);
  return out;
}

} // namespace csfem::hodge
