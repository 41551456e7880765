#pragma once

#include <vector>

#include "csfem/fespace.hpp"
#include "csfem/linalg.hpp"

namespace csfem::momentum {

using fespace::DensityField;
using fespace::Mesh;
using fespace::Vec2;
using fespace::VelocityField;
using fespace::VorticityField;

/// Barotropic fluid constants: pressure law p(rho) = a rho^gamma and the
/// viscosity pair (mu, lambda).
struct FluidParams {
  double mu = 1.0;
  double lambda = 0.0;
  double a = 1.0;
  double gamma = 1.4;

  /// mu > 0, a > 0, gamma > 1, and (in 2D) 2 lambda + 2 mu >= 0.
  void validate() const;
};

double pressure_scalar(double rho, const FluidParams& params);
/// Pressure potential a/(gamma-1) rho^gamma; satisfies rho P'(rho) - P(rho)
/// = p(rho), the identity behind the energy balance.
double potential_scalar(double rho, const FluidParams& params);

DensityField pressure(const DensityField& rho, const FluidParams& params);
DensityField pressure_potential(const DensityField& rho, const FluidParams& params);

/// p(rho) - (mu + lambda) div u, cellwise.
DensityField effective_flux(const DensityField& rho, const VelocityField& u,
                            const FluidParams& params);

struct MomentumSolution {
  VorticityField w;
  VelocityField u;
};

/// Direct solver for the stationary vorticity/velocity system
///
///   (mu curl w, v) + ((mu+lambda) div u - p(rho), div v) = (f, v)   in V_h
///   (w, eta) - (u, curl eta) = 0                                    in W_h
///
/// assembled monolithically in the symmetric indefinite form
///
///   [ -mu M_W   mu R^T      ] [w]   [ 0          ]
///   [  mu R    (mu+lambda) D] [u] = [ F + a G(p) ]
///
/// with R the curl coupling and D the div-div form.  The operator does not
/// depend on the density (pressure enters the right-hand side only), so the
/// factorization is computed once per mesh and reused across solves.
///
/// Requires mu + lambda > 0: at equality the velocity component outside
/// curl(W_h) drops out of the equations and the system is singular.
class MomentumSolver {
public:
  MomentumSolver(const Mesh& mesh, const FluidParams& params);

  /// Body force f is cellwise constant (canonical Q_h ingestion).
  /// pressure_scale multiplies the pressure load; the homotopy ladder in the
  /// stepper sweeps it from 0 (linear problem) to 1 (full problem).
  MomentumSolution solve(const DensityField& rho, const std::vector<Vec2>& f,
                         double pressure_scale = 1.0) const;

  const FluidParams& params() const { return params_; }
  const Mesh& mesh() const { return *mesh_; }

private:
  const Mesh* mesh_;
  FluidParams params_;
  int n_w_ = 0;
  int n_v_ = 0;
  linalg::Factorization factor_;
};

/// One-shot convenience wrapper.
MomentumSolution solve_momentum(const Mesh& mesh, const FluidParams& params,
                                const DensityField& rho,
                                const std::vector<Vec2>& f);

} // namespace csfem::momentum
