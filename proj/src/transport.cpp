#include "csfem/transport.hpp"

#include <algorithm>
#include <cmath>

#include "csfem/errors.hpp"

namespace csfem::transport {

using fespace::Mesh;
using linalg::SparseMatrix;
using linalg::Triplet;

UpwindSplit upwind_split(double flux) {
  return {std::max(flux, 0.0), std::min(flux, 0.0)};
}

SparseMatrix assemble_transport(const VelocityField& u, double dt) {
  if (!(dt > 0.0)) throw InvariantError("assemble_transport: dt must be positive");
  const Mesh& mesh = u.mesh();
  const int nc = mesh.n_cells();

  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(nc) + 4 * mesh.n_interior_faces());
  for (int c = 0; c < nc; ++c) t.push_back({c, c, mesh.cell_area(c)});

  for (int f : mesh.interior_faces()) {
    const mesh::Face& face = mesh.face(f);
    const auto [qp, qm] = upwind_split(u[face.dof]);
    const int lo = face.cell_minus; // flux q > 0 leaves this cell
    const int hi = face.cell_plus;
    t.push_back({lo, lo, dt * qp});
    t.push_back({lo, hi, dt * qm});
    t.push_back({hi, lo, -dt * qp});
    t.push_back({hi, hi, -dt * qm});
  }
  return SparseMatrix::from_triplets(nc, nc, std::move(t));
}

DensityField step_density(const DensityField& rho_prev, const VelocityField& u,
                          double dt) {
  const Mesh& mesh = u.mesh();
  if (&rho_prev.mesh() != &mesh)
    throw InvariantError("step_density: density and velocity live on different meshes");

  const SparseMatrix A = assemble_transport(u, dt);
  std::vector<double> rhs(static_cast<size_t>(mesh.n_cells()));
  for (int c = 0; c < mesh.n_cells(); ++c)
    rhs[c] = mesh.cell_area(c) * rho_prev[c];

  const std::vector<double> x = linalg::factor_solve(A, rhs);
  DensityField rho(mesh);
  rho.values() = x;
  return rho;
}

double positivity_bound(const DensityField& rho_prev, const VelocityField& u,
                        double dt) {
  double min_prev = rho_prev[0];
  for (int c = 1; c < rho_prev.size(); ++c)
    min_prev = std::min(min_prev, rho_prev[c]);
  return min_prev / (1.0 + dt * fespace::max_abs_div(u));
}

// ===========================================================================
// Renormalized balance
// ===========================================================================

Renormalizer Renormalizer::quadratic() {
  Renormalizer r;
  r.B = [](double z) { return z * z; };
  r.Bprime = [](double z) { return 2.0 * z; };
  r.Bpp = [](double) { return 2.0; };
  r.constant_second_derivative = true;
  return r;
}

Renormalizer Renormalizer::power(double exponent, double scale) {
  if (!(exponent > 1.0))
    throw InvariantError("Renormalizer::power: exponent must exceed 1");
  Renormalizer r;
  r.B = [=](double z) { return scale * std::pow(z, exponent); };
  r.Bprime = [=](double z) { return scale * exponent * std::pow(z, exponent - 1.0); };
  r.Bpp = [=](double z) {
    return scale * exponent * (exponent - 1.0) * std::pow(z, exponent - 2.0);
  };
  r.constant_second_derivative = (exponent == 2.0);
  return r;
}

namespace {

// Exact first-order Taylor remainder of B around y, evaluated at z.
double remainder(const Renormalizer& r, double z, double y) {
  return r.B(z) - r.B(y) - r.Bprime(y) * (z - y);
}

// Endpoint lower bound (1/2) B''(rho_dagger) jump^2.  For the power laws in
// use B'' is monotone, so the endpoint minimizing B'' minimizes it on the
// whole interval between the traces.
double bounded_remainder(const Renormalizer& r, double z, double y) {
  const double coeff = 0.5 * std::min(r.Bpp(z), r.Bpp(y));
  return coeff * (z - y) * (z - y);
}

} // namespace

BalanceTerms balance_terms(const DensityField& rho,
                           const DensityField& rho_prev,
                           const VelocityField& u, double dt,
                           const Renormalizer& renorm) {
  const Mesh& mesh = u.mesh();
  if (&rho.mesh() != &mesh || &rho_prev.mesh() != &mesh)
    throw InvariantError("balance_terms: mesh mismatch");

  BalanceTerms terms;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double area = mesh.cell_area(c);
    terms.b_div += dt * area * renorm.b(rho[c]) * fespace::div_V(u, c);
    terms.time_exact += area * remainder(renorm, rho_prev[c], rho[c]);
    terms.time_bounded += area * bounded_remainder(renorm, rho_prev[c], rho[c]);
  }
  for (int f : mesh.interior_faces()) {
    const mesh::Face& face = mesh.face(f);
    const auto [qp, qm] = upwind_split(u[face.dof]);
    const double lo = rho[face.cell_minus];
    const double hi = rho[face.cell_plus];
    // Outflow dissipates the remainder at the receiving trace: the q > 0
    // part transports the cell_minus value and pays remainder(lo around hi),
    // the q < 0 part the mirror image.
    terms.face_exact +=
        dt * (remainder(renorm, lo, hi) * qp - remainder(renorm, hi, lo) * qm);
    terms.face_bounded += dt * bounded_remainder(renorm, lo, hi) * (qp - qm);
  }
  return terms;
}

double renormalized_residual(const DensityField& rho,
                             const DensityField& rho_prev,
                             const VelocityField& u, double dt,
                             const Renormalizer& renorm) {
  const BalanceTerms terms = balance_terms(rho, rho_prev, u, dt, renorm);
  double slack = -terms.b_div;
  for (int c = 0; c < rho.size(); ++c)
    slack +=
        rho.mesh().cell_area(c) * (renorm.B(rho_prev[c]) - renorm.B(rho[c]));
  if (renorm.constant_second_derivative)
    slack -= terms.time_exact + terms.face_exact;
  else
    slack -= terms.time_bounded + terms.face_bounded;
  return slack;
}

} // namespace csfem::transport
