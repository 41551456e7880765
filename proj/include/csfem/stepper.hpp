#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "csfem/momentum.hpp"
#include "csfem/transport.hpp"

namespace csfem::stepper {

using fespace::DensityField;
using fespace::Mesh;
using fespace::Vec2;
using fespace::VelocityField;
using fespace::VorticityField;

struct SimConfig {
  double dt = 0.0;
  double t_end = 1.0;          // dt must divide t_end
  double picard_tol = 1e-12;   // relative L2 change of (rho, u)
  int picard_max = 60;
  double relaxation = 1.0;     // under-relaxation weight on rho, in (0, 1]
  int continuation_steps = 8;  // pressure-homotopy rungs on fallback
  double rho_floor = 1e-12;    // densities below this abort the run

  void validate() const;
};

/// One accepted time level: the density satisfies the implicit transport
/// step for (the ingested force and) this velocity exactly, the velocity and
/// vorticity solve the momentum system for the pressure of the last Picard
/// density iterate (within picard_tol of rho).
struct TimeLevel {
  DensityField rho;
  VelocityField u;
  VorticityField w;
  std::vector<Vec2> f; // cellwise force ingested for this step
};

struct Trajectory {
  Trajectory(const Mesh& m, momentum::FluidParams p, double dt_,
             DensityField rho0)
      : mesh(&m), params(p), dt(dt_), initial(std::move(rho0)) {}

  const Mesh* mesh;
  momentum::FluidParams params;
  double dt;
  DensityField initial;
  std::vector<TimeLevel> levels; // levels[m-1] is time level m

  int steps() const { return static_cast<int>(levels.size()); }
  double time(int m) const { return dt * m; }
  const DensityField& rho_at(int m) const {
    return m == 0 ? initial : levels[m - 1].rho;
  }
};

struct StepReport {
  int step = 0;
  double time = 0.0;
  int picard_iterations = 0;
  int continuation_rungs = 0; // 0 when the direct attempt converged
  double fixed_point_residual = 0.0;
  double mass = 0.0;
  double min_density = 0.0;
  double positivity_floor = 0.0;      // guaranteed lower bound, must hold
  double energy_residual = 0.0;       // exact-remainder balance, relative
  double energy_slack = 0.0;          // bounded-remainder slack, relative
  double vorticity_residual = 0.0;    // mu ||curl w||^2 = (f, curl w), relative
  double renormalized_residual = 0.0; // quadratic-B balance, relative
};

/// Canonical ingestion of initial data: cell averages, clamped below by
/// rho_floor so the positivity argument has a strictly positive start.
/// A negative cell average is rejected (ConfigError): the clamp is meant for
/// data that merely touches zero, not for sign errors.
DensityField init_density(const Mesh& mesh,
                          const std::function<double(Vec2)>& rho0,
                          double rho_floor);

/// Body force as a function of (time, position); each step ingests the
/// midpoint-in-time sample as cell averages.
using SourceField = std::function<Vec2(double, Vec2)>;

/// Body force handed over directly as cell averages, one vector per cell,
/// queried per step (1-based index, midpoint time).  This is the ingestion
/// path for tabulated forces, where pointwise evaluation would have to
/// guess cell membership at quadrature points on cell boundaries.
using CellSource = std::function<std::vector<Vec2>(int, double)>;

/// Implicit coupled time stepper.
///
/// Each step solves the nonlinear momentum/transport fixed point by damped
/// Picard iteration: momentum with the current density iterate's pressure,
/// then an exact implicit transport solve with the new velocity, then
/// under-relaxation on the density.  If the direct attempt stalls, the step
/// restarts on a homotopy ladder that scales both the pressure load and the
/// transport flux by alpha in {0, 1/K, ..., 1}, warm-starting each rung from
/// the previous one; the alpha = 0 rung is the linear problem (density
/// carried over, force-driven Stokes solve).
class Stepper {
public:
  Stepper(const Mesh& mesh, const momentum::FluidParams& params,
          const SimConfig& config);

  std::pair<TimeLevel, StepReport> advance(const DensityField& rho_prev,
                                           const std::vector<Vec2>& f_cells,
                                           int step_index) const;

  struct RunResult {
    Trajectory trajectory;
    std::vector<StepReport> reports;
  };

  /// Steps from t = 0 to t_end; aborts with ConvergenceError on the first
  /// step whose fixed point cannot be reached, and with InvariantError if
  /// positivity is ever lost.
  RunResult run(const DensityField& rho0, const SourceField& f) const;
  RunResult run_cells(const DensityField& rho0, const CellSource& f) const;

  const momentum::MomentumSolver& solver() const { return solver_; }
  const SimConfig& config() const { return config_; }

private:
  const Mesh* mesh_;
  SimConfig config_;
  momentum::MomentumSolver solver_;

  bool picard(const DensityField& rho_prev, const std::vector<Vec2>& f_cells,
              double alpha, DensityField& rho, VelocityField& u,
              VorticityField& w, int& iterations, double& residual) const;
};

} // namespace csfem::stepper
