#pragma once

#include <functional>

#include "csfem/fespace.hpp"
#include "csfem/linalg.hpp"

namespace csfem::transport {

using fespace::DensityField;
using fespace::VelocityField;

/// flux = positive + negative with positive = max(flux, 0).
struct UpwindSplit {
  double positive = 0.0;
  double negative = 0.0;
};
UpwindSplit upwind_split(double flux);

/// Implicit upwind matrix of the density update: row E reads
///   |E| rho_E + dt * (outflow of E) * rho_E - dt * (inflow into E) * rho_nb.
///
/// The upwind donor is the cell the flux leaves: a face coefficient q > 0
/// transports the cell_minus value into cell_plus.  The result is an
/// M-matrix whose column sums are the cell areas, which is what makes the
/// update conservative and positivity-preserving.
linalg::SparseMatrix assemble_transport(const VelocityField& u, double dt);

/// One implicit step of the upwind density scheme:
///   A(u, dt) rho_new = |E| rho_prev.
DensityField step_density(const DensityField& rho_prev, const VelocityField& u,
                          double dt);

/// Lower bound the implicit step is guaranteed to respect:
///   min rho_new >= min rho_prev / (1 + dt * max_E |div u|).
double positivity_bound(const DensityField& rho_prev, const VelocityField& u,
                        double dt);

/// Convex function driving a renormalized balance of the density update.
///
/// b(z) = z B'(z) - B(z) is derived from B rather than stored, so the pair
/// cannot drift apart.  constant_second_derivative marks the quadratic-like
/// case in which the Taylor remainders of the balance are exact.
struct Renormalizer {
  std::function<double(double)> B;
  std::function<double(double)> Bprime;
  std::function<double(double)> Bpp;
  bool constant_second_derivative = false;

  double b(double z) const { return z * Bprime(z) - B(z); }

  static Renormalizer quadratic();                     // B(z) = z^2
  static Renormalizer power(double exponent, double scale = 1.0);
};

/// Ingredients of the renormalized balance of one accepted step, tested
/// against the constant function.  Dissipation comes in two flavours: the
/// exact first-order Taylor remainders of B (which close the balance as an
/// identity), and the endpoint lower bounds (1/2) B''(rho_dagger) * jump^2
/// with rho_dagger the trace value minimizing B'' (which close it as an
/// inequality for convex B).
struct BalanceTerms {
  double b_div = 0.0;         // dt * int b(rho) div u
  double time_exact = 0.0;    // sum_E |E| * remainder(rho_prev around rho)
  double face_exact = 0.0;    // dt * sum_faces of upwinded remainders
  double time_bounded = 0.0;
  double face_bounded = 0.0;
};

BalanceTerms balance_terms(const DensityField& rho,
                           const DensityField& rho_prev,
                           const VelocityField& u, double dt,
                           const Renormalizer& renorm);

/// Signed slack of the renormalized balance:
///
///   slack = int B(rho_prev) - int B(rho) - dt * int b(rho) div u
///           - time_dissipation - face_dissipation.
///
/// With constant B'' the exact remainders are used and the slack vanishes to
/// rounding; otherwise the bounded remainders are used and convexity of B
/// makes the slack nonnegative.  (rho, u) must satisfy the implicit step
/// exactly, i.e. come out of step_density.
double renormalized_residual(const DensityField& rho,
                             const DensityField& rho_prev,
                             const VelocityField& u, double dt,
                             const Renormalizer& renorm);

} // namespace csfem::transport
