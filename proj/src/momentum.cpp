#include "csfem/momentum.hpp"

#include <cmath>
#include <sstream>

#include "csfem/errors.hpp"

namespace csfem::momentum {

using linalg::SparseMatrix;
using linalg::Triplet;

void FluidParams::validate() const {
  if (!(mu > 0.0)) throw ConfigError("fluid params: mu must be positive");
  if (!(a > 0.0)) throw ConfigError("fluid params: a must be positive");
  if (!(gamma > 1.0)) throw ConfigError("fluid params: gamma must exceed 1");
  if (2.0 * lambda + 2.0 * mu < 0.0)
    throw ConfigError("fluid params: need N lambda + 2 mu >= 0 (N = 2)");
}

double pressure_scalar(double rho, const FluidParams& params) {
  return params.a * std::pow(rho, params.gamma);
}

double potential_scalar(double rho, const FluidParams& params) {
  return params.a / (params.gamma - 1.0) * std::pow(rho, params.gamma);
}

DensityField pressure(const DensityField& rho, const FluidParams& params) {
  DensityField p(rho.mesh());
  for (int c = 0; c < rho.size(); ++c) p[c] = pressure_scalar(rho[c], params);
  return p;
}

DensityField pressure_potential(const DensityField& rho,
                                const FluidParams& params) {
  DensityField p(rho.mesh());
  for (int c = 0; c < rho.size(); ++c) p[c] = potential_scalar(rho[c], params);
  return p;
}

DensityField effective_flux(const DensityField& rho, const VelocityField& u,
                            const FluidParams& params) {
  if (&rho.mesh() != &u.mesh())
    throw InvariantError("effective_flux: mesh mismatch");
  DensityField out(rho.mesh());
  const double visc = params.mu + params.lambda;
  for (int c = 0; c < rho.size(); ++c)
    out[c] = pressure_scalar(rho[c], params) - visc * fespace::div_V(u, c);
  return out;
}

MomentumSolver::MomentumSolver(const Mesh& mesh, const FluidParams& params)
    : mesh_(&mesh), params_(params) {
  params_.validate();
  if (!(params_.mu + params_.lambda > 0.0))
    throw ConfigError(
        "momentum solver: mu + lambda must be positive (at zero the "
        "divergence part of the velocity is undetermined)");

  n_w_ = mesh.n_interior_vertices();
  n_v_ = mesh.n_interior_faces();
  if (n_w_ == 0)
    throw InvariantError("momentum solver: mesh has no interior vertices");

  const SparseMatrix Mw = fespace::mass_W(mesh);
  const SparseMatrix R = fespace::curl_coupling(mesh);
  const SparseMatrix D = fespace::divdiv_V(mesh);

  const double mu = params_.mu;
  const double visc = params_.mu + params_.lambda;
  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(Mw.nnz()) + 2 * R.nnz() + D.nnz());
  for (int r = 0; r < n_w_; ++r)
    for (int k = Mw.row_ptr()[r]; k < Mw.row_ptr()[r + 1]; ++k)
      t.push_back({r, Mw.col_idx()[k], -mu * Mw.values()[k]});
  for (int r = 0; r < n_v_; ++r)
    for (int k = R.row_ptr()[r]; k < R.row_ptr()[r + 1]; ++k) {
      const int i = R.col_idx()[k];
      const double v = mu * R.values()[k];
      t.push_back({n_w_ + r, i, v}); // mu R
      t.push_back({i, n_w_ + r, v}); // mu R^T
    }
  for (int r = 0; r < n_v_; ++r)
    for (int k = D.row_ptr()[r]; k < D.row_ptr()[r + 1]; ++k)
      t.push_back({n_w_ + r, n_w_ + D.col_idx()[k], visc * D.values()[k]});

  factor_ = linalg::Factorization::compute(
      SparseMatrix::from_triplets(n_w_ + n_v_, n_w_ + n_v_, std::move(t)));
}

MomentumSolution MomentumSolver::solve(const DensityField& rho,
                                       const std::vector<Vec2>& f,
                                       double pressure_scale) const {
  const Mesh& mesh = *mesh_;
  if (&rho.mesh() != &mesh)
    throw InvariantError("momentum solve: density on a different mesh");
  if (static_cast<int>(f.size()) != mesh.n_cells())
    throw InvariantError("momentum solve: body force size mismatch");
  for (int c = 0; c < rho.size(); ++c)
    if (!(rho[c] > 0.0)) {
      std::ostringstream msg;
      msg << "momentum solve: nonpositive density " << rho[c] << " in cell "
          << c;
      throw InvariantError(msg.str());
    }

  std::vector<double> rhs(static_cast<size_t>(n_w_ + n_v_), 0.0);
  const std::vector<double> load = fespace::load_V(mesh, f);
  for (int a = 0; a < n_v_; ++a) rhs[n_w_ + a] = load[a];

  // Pressure load (p, div psi_a): div of an RT0 basis function integrates to
  // its orientation sign, so this is pure incidence and exact.
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double p = pressure_scale * pressure_scalar(rho[c], params_);
    for (int j = 0; j < 3; ++j) {
      const int face = mesh.cell_faces(c)[j];
      const int dof = mesh.face_dof(face);
      if (dof < 0) continue;
      rhs[n_w_ + dof] += p * mesh.face_sign(c, face);
    }
  }

  const std::vector<double> x = factor_.solve(rhs);
  MomentumSolution sol{VorticityField(mesh), VelocityField(mesh)};
  for (int i = 0; i < n_w_; ++i) sol.w[i] = x[i];
  for (int a = 0; a < n_v_; ++a) sol.u[a] = x[n_w_ + a];
  return sol;
}

MomentumSolution solve_momentum(const Mesh& mesh, const FluidParams& params,
                                const DensityField& rho,
                                const std::vector<Vec2>& f) {
  return MomentumSolver(mesh, params).solve(rho, f);
}

} // namespace csfem::momentum
