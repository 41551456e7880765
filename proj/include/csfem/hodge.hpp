#pragma once

#include <memory>

#include "csfem/fespace.hpp"
#include "csfem/linalg.hpp"

namespace csfem::hodge {

using fespace::DensityField;
using fespace::Mesh;
using fespace::VelocityField;
using fespace::VorticityField;

/// u = curl(stream) + complement, with the complement L2-orthogonal to
/// curl(W_h).  The reconstruction is exact at coefficient level because the
/// complement is defined as u minus the incidence image of the stream.
struct HodgeParts {
  VorticityField stream;
  VelocityField complement;
};

/// Orthogonal splitting machinery on one mesh.
///
/// decompose() solves the scalar Dirichlet problem
///   (curl zeta, curl eta) = (u, curl eta)  for all eta in W_h,
/// whose matrix is the P1 stiffness matrix (SPD), then subtracts.
///
/// solve_div() produces the complement-space solution of div v = q through
/// the saddle system
///   [ D    R ] [v]   [g]        R = (psi_a, curl phi_i),
///   [ R^T  0 ] [m] = [0]        g_a = (q, div psi_a),
/// i.e. the orthogonality constraint is imposed by a multiplier on the
/// curl(W_h) subspace.  Factorizations are cached per mesh.
class HodgeSolver {
public:
  explicit HodgeSolver(const Mesh& mesh);
  ~HodgeSolver();

  const Mesh& mesh() const { return *mesh_; }

  HodgeParts decompose(const VelocityField& u) const;

  /// q must have zero mean: |int q| <= 1e-10 ||q||_L2.  The result satisfies
  /// div v = q cellwise within 1e-10 * (1 + max |q|), checked before return,
  /// and (v, curl eta) = 0 for all eta to solver precision.
  VelocityField solve_div(const DensityField& q) const;

  const linalg::SparseMatrix& curl_incidence() const { return G_; }
  const linalg::SparseMatrix& mass_V() const { return Mv_; }

private:
  const Mesh* mesh_;
  linalg::SparseMatrix G_;
  linalg::SparseMatrix Mv_;
  linalg::SparseMatrix R_; // Mv_ * G_
  linalg::Factorization stiffness_;
  mutable std::unique_ptr<linalg::Factorization> saddle_; // built on demand
};

/// Sharpest constants of the discrete Poincare inequalities
///   ||v|| <= C_div ||div v||  on the complement space,
///   ||w|| <= C_curl ||curl w|| on W_h,
/// obtained from the extremal generalized Rayleigh quotients (inverse
/// iteration; the complement restriction enters as a multiplier constraint).
struct PoincareConstants {
  double c_div = 0.0;
  double c_curl = 0.0;
};

PoincareConstants poincare_constants(const Mesh& mesh);

} // namespace csfem::hodge
