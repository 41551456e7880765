#pragma once

#include <functional>
#include <vector>

#include "csfem/momentum.hpp"
#include "csfem/stepper.hpp"
#include "csfem/transport.hpp"

namespace csfem::diagnostics {

using fespace::DensityField;
using fespace::Mesh;
using fespace::Vec2;
using fespace::VelocityField;
using stepper::Trajectory;

// ===========================================================================
// Per-step balances
//
// Every estimate the scheme is built on has a computable discrete form, and
// the point of this module is to evaluate those forms term by term instead
// of trusting the implementation.  Two closure flavours appear throughout:
// with exact Taylor remainders of the convex potential the balances are
// identities (residual at rounding/solver level), while the endpoint-bounded
// remainders turn them into one-sided inequalities (slack nonnegative).
// ===========================================================================

struct EnergyBalance {
  double potential_prev = 0.0; // int P(rho^{m-1})
  double potential = 0.0;      // int P(rho^m)
  double time_dissipation = 0.0;
  double face_dissipation = 0.0;
  double time_dissipation_lb = 0.0; // endpoint-bounded variants
  double face_dissipation_lb = 0.0;
  double viscous_div = 0.0; // dt (mu+lambda) ||div u||^2
  double viscous_w = 0.0;   // dt mu ||w||^2
  double work = 0.0;        // dt (f, u)
  double residual = 0.0;    // exact closure, signed
  double slack = 0.0;       // bounded closure, nonnegative up to solver error
  double scale = 0.0;       // sum of term magnitudes, for relative reporting
};

/// Energy accounting of one accepted step: the pressure-potential balance
/// obtained by renormalizing the transport step with B = P and eliminating
/// the pressure work through the momentum system tested with u.  The
/// residual absorbs the fixed-point mismatch between the density whose
/// pressure drove the velocity and the density transported by it, so it is
/// bounded by the Picard tolerance rather than machine rounding.
EnergyBalance energy_balance(const momentum::FluidParams& params,
                             const DensityField& rho_prev,
                             const stepper::TimeLevel& level, double dt);

struct MomentumIdentities {
  double vorticity_residual = 0.0; // mu ||curl w||^2 = (f, curl w), relative
  double pairing_residual = 0.0;   // pressure work identity, relative
};

/// Exact consequences of the solved momentum system.  The vorticity identity
/// tests with curl w (density independent, holds at solver precision); the
/// pairing identity (p, div u) = (mu+lambda)||div u||^2 + mu ||w||^2 - (f, u)
/// tests with u and inherits the Picard mismatch through p(rho).
MomentumIdentities momentum_identities(const momentum::FluidParams& params,
                                       const stepper::TimeLevel& level);

struct RenormReport {
  double residual = 0.0; // signed slack of the renormalized balance
  double scale = 0.0;
};

/// Renormalized balance of one transport step against a caller-chosen convex
/// B, with a magnitude scale assembled from the participating terms.
RenormReport renormalized_report(const DensityField& rho,
                                 const DensityField& rho_prev,
                                 const VelocityField& u, double dt,
                                 const transport::Renormalizer& renorm);

// ===========================================================================
// Trajectory-level stability ledger
// ===========================================================================

struct LedgerRow {
  int step = 0;
  double potential = 0.0;
  double time_dissipation = 0.0;
  double face_dissipation = 0.0;
  double velocity_sq = 0.0;  // dt ||u||^2
  double div_sq = 0.0;       // dt ||div u||^2
  double vorticity_sq = 0.0; // dt ||w||^2
  double curl_w_sq = 0.0;    // dt ||curl w||^2
  double force_sq = 0.0;     // dt ||f||^2
  double balance_residual = 0.0; // relative, exact closure
  double balance_slack = 0.0;    // relative, bounded closure
};

struct EnergyLedger {
  double initial_potential = 0.0;
  std::vector<LedgerRow> rows;
  double max_residual = 0.0; // worst |balance_residual|
  double min_slack = 0.0;    // worst balance_slack
};

/// Evaluates every term of the stability estimate along a trajectory.  All
/// dissipation entries are sums of squares with nonnegative weights; the
/// accumulated potential-plus-dissipation total is bounded by the initial
/// potential plus the force work, which the per-step balances certify.
EnergyLedger energy_ledger(const Trajectory& traj);

// ===========================================================================
// Compactness diagnostics
//
// The estimates below drive the convergence argument.  None of them are
// needed to run the scheme; they measure that the discrete solution family
// behaves the way the theory demands (bounded ratios, h-decay rates).
// ===========================================================================

struct SpaceTimeScalar {
  std::function<double(double, Vec2)> value;
  std::function<Vec2(double, Vec2)> gradient; // spatial gradient
};

struct BoundReport {
  double lhs = 0.0;
  double reference = 0.0; // bound without its unknown constant
  double ratio = 0.0;     // lhs / reference, the trend quantity
};

/// Artificial-diffusion pairing of the upwind flux against a smooth test
/// function:
///   lhs = | sum_m dt sum_E sum_{faces of E} [rho] (u.nu)^- int (avg phi - phi) |
/// reported against ||grad phi||_inf h^{1/2}.  Time samples at step
/// midpoints stand in for the step averages of phi.
BoundReport upwind_diffusion_bound(const Trajectory& traj,
                                   const SpaceTimeScalar& phi);

/// Weak time continuity of the piecewise-linear-in-time density interpolant:
///   lhs = | sum_m sum_E (rho^m_E - rho^{m-1}_E) int_E phi(t_{m-1/2}) |
/// reported against (1 + h^{1/2}) ||grad phi||_inf.
BoundReport time_continuity_bound(const Trajectory& traj,
                                  const SpaceTimeScalar& phi);

/// Time integral of the mass-weighted effective viscous flux,
///   int_0^t int (p(rho) - (mu+lambda) div u) rho dx ds,
/// exact in space (all factors cellwise constant) and in time (piecewise
/// constant states); the final step may be partial.
double flux_pairing(const Trajectory& traj, double t);

/// L2 norm of z - z(. - xi) over the interior subdomain of points farther
/// than |xi| from the boundary, by per-cell quadrature with point location
/// for the shifted evaluations.  Throws when no quadrature point lies in
/// that subdomain (shift comparable to the domain size).
double translation_norm(const VelocityField& z, Vec2 xi);

struct JumpSums {
  double max_jump = 0.0; // max_faces |int_face [z x nu]|
  double sum_sq = 0.0;   // sum_faces |int_face [z x nu]|^2
};

/// Integrated tangential jumps of an H(div) field over interior faces.  The
/// normal component is continuous by construction; the tangential jumps are
/// what the divergence controls for fields orthogonal to the curls.
JumpSums jump_sums(const VelocityField& z);

/// Dual Sobolev norm of curl z against zero-boundary P1 test functions.
///
/// On the field's own mesh the pairing (z, curl phi) vanishes identically
/// for every z orthogonal to the curls, the very fields the curl estimate
/// concerns, so the supremum is taken over the once-refined mesh instead:
/// phi on the refinement sees the intra-cell variation of z.  The supremum
/// of |(z, curl phi)| / ||phi||_{W^{1,2}} has the closed form
/// sqrt(t^T H^{-1} t) with t the pairing vector and H the stiffness-plus-
/// mass matrix on the fine mesh.
double negative_norm_curl(const VelocityField& z);

} // namespace csfem::diagnostics
