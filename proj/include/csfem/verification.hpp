#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "csfem/momentum.hpp"

namespace csfem::verification {

using fespace::Vec2;

/// Closed-form stationary state of the momentum system on the unit square.
///
/// The velocity is tangential to the boundary, the vorticity vanishes there,
/// and the source is exactly what the strong equations demand of the pair
/// (velocity, pressure) with pressure 1 + 0.1 sin(pi x) sin(pi y).  Solving
/// the discrete system with this source and the density matching the
/// pressure law must reproduce the velocity at first order in h, which is
/// the convergence oracle used by tests and the study command.
struct ManufacturedCase {
  momentum::FluidParams params;
  std::function<Vec2(Vec2)> velocity;
  std::function<double(Vec2)> divergence; // of the velocity
  std::function<double(Vec2)> vorticity;
  std::function<double(Vec2)> pressure;
  std::function<double(Vec2)> density; // (pressure / a)^(1/gamma)
  std::function<Vec2(Vec2)> source;
};

ManufacturedCase manufactured_case(const momentum::FluidParams& params);

/// Solves the discrete momentum system against the manufactured density and
/// source on the given mesh and returns the L2 distance of the velocity
/// from the closed form.  Refinement studies log2 this against h.
double manufactured_velocity_error(const fespace::Mesh& mesh,
                                   const ManufacturedCase& mc);

// ===========================================================================
// Property suites behind the `verify` subcommand.  Each suite prints one
// line per check ("ok <name> ..." or "FAIL <name> ...") and returns whether
// all of its checks passed.  Sizes are chosen so the full battery stays
// interactive.
// ===========================================================================

bool verify_transport(std::ostream& out);
bool verify_energy(std::ostream& out);
bool verify_hodge(std::ostream& out);
bool verify_translation(std::ostream& out);
bool verify_flux(std::ostream& out);
bool verify_all(std::ostream& out);

/// Dispatch by name: all, transport, energy, hodge, translation, flux.
/// Unknown names are a ConfigError.
bool verify_suite(const std::string& name, std::ostream& out);

} // namespace csfem::verification
