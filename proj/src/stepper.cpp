#include "csfem/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "csfem/diagnostics.hpp"
#include "csfem/errors.hpp"

namespace csfem::stepper {

namespace {

// Relative L2 distance between coefficient vectors, with a floor that maps
// the all-zero case to zero instead of 0/0.
double rel_change(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale =
      std::max({std::sqrt(na), std::sqrt(nb), 1e-14});
  return std::sqrt(diff) / scale;
}

VelocityField scaled(const VelocityField& u, double alpha) {
  VelocityField v = u;
  for (double& x : v.values()) {
    x *= alpha;
  }
  return v;
}

SimConfig checked(SimConfig config) {
  config.validate();
  return config;
}

} // namespace

void SimConfig::validate() const {
  if (!(dt > 0.0)) {
    throw ConfigError("time step must be positive");
  }
  if (!(t_end > 0.0)) {
    throw ConfigError("final time must be positive");
  }
  if (!(picard_tol > 0.0)) {
    throw ConfigError("fixed-point tolerance must be positive");
  }
  if (picard_max < 1) {
    throw ConfigError("fixed-point iteration budget must be at least 1");
  }
  if (!(relaxation > 0.0) || relaxation > 1.0) {
    throw ConfigError("relaxation must lie in (0, 1]");
  }
  if (continuation_steps < 1) {
    throw ConfigError("continuation ladder needs at least one rung");
  }
  if (!(rho_floor > 0.0)) {
    throw ConfigError("density floor must be positive");
  }
}

DensityField init_density(const Mesh& mesh,
                          const std::function<double(Vec2)>& rho0,
                          double rho_floor) {
  DensityField rho = fespace::interp_Q(mesh, rho0);
  for (int c = 0; c < rho.size(); ++c) {
    if (rho[c] < 0.0) {
      std::ostringstream msg;
      msg << "initial density has negative average " << rho[c] << " on cell "
          << c;
      throw ConfigError(msg.str());
    }
    rho[c] = std::max(rho[c], rho_floor);
  }
  return rho;
}

Stepper::Stepper(const Mesh& mesh, const momentum::FluidParams& params,
                 const SimConfig& config)
    : mesh_(&mesh), config_(checked(config)), solver_(mesh, params) {}

bool Stepper::picard(const DensityField& rho_prev,
                     const std::vector<Vec2>& f_cells, double alpha,
                     DensityField& rho, VelocityField& u, VorticityField& w,
                     int& iterations, double& residual) const {
  residual = std::numeric_limits<double>::infinity();
  for (iterations = 1; iterations <= config_.picard_max; ++iterations) {
    momentum::MomentumSolution sol = solver_.solve(rho, f_cells, alpha);
    DensityField rho_hat =
        transport::step_density(rho_prev, scaled(sol.u, alpha), config_.dt);
    residual = rel_change(rho_hat.values(), rho.values()) +
               rel_change(sol.u.values(), u.values());
    u = std::move(sol.u);
    w = std::move(sol.w);
    if (residual <= config_.picard_tol) {
      // Lock the accepted density to the exact transport solve for the
      // accepted velocity; conservation and the renormalized balances then
      // hold to rounding while the momentum mismatch stays within tol.
      rho = transport::step_density(rho_prev, scaled(u, alpha), config_.dt);
      return true;
    }
    for (int c = 0; c < rho.size(); ++c) {
      rho[c] += config_.relaxation * (rho_hat[c] - rho[c]);
    }
  }
  return false;
}

std::pair<TimeLevel, StepReport> Stepper::advance(
    const DensityField& rho_prev, const std::vector<Vec2>& f_cells,
    int step_index) const {
  DensityField rho = rho_prev;
  VelocityField u(*mesh_);
  VorticityField w(*mesh_);
  int iterations = 0;
  int total_iterations = 0;
  int rungs = 0;
  double residual = 0.0;

  bool converged = picard(rho_prev, f_cells, 1.0, rho, u, w, iterations,
                          residual);
  total_iterations = iterations;
  if (!converged) {
    // Homotopy fallback: walk the pressure scaling up from the linear
    // problem, warm-starting each rung from the previous one.
    rho = rho_prev;
    u = VelocityField(*mesh_);
    w = VorticityField(*mesh_);
    const int K = config_.continuation_steps;
    for (int j = 0; j <= K; ++j) {
      const double alpha = static_cast<double>(j) / K;
      converged =
          picard(rho_prev, f_cells, alpha, rho, u, w, iterations, residual);
      total_iterations += iterations;
      ++rungs;
      if (!converged) {
        std::ostringstream msg;
        msg << "time step " << step_index
            << ": fixed point stalled at pressure scaling " << alpha
            << " with residual " << residual << " after " << iterations
            << " iterations";
        throw ConvergenceError(msg.str());
      }
    }
  }

  const double floor = transport::positivity_bound(rho_prev, u, config_.dt);
  const double min_rho = *std::min_element(rho.values().begin(),
                                           rho.values().end());
  if (!(min_rho > 0.0)) {
    std::ostringstream msg;
    msg << "density lost positivity at step " << step_index << " (min "
        << min_rho << ")";
    throw InvariantError(msg.str());
  }

  TimeLevel level{std::move(rho), std::move(u), std::move(w), f_cells};

  StepReport report;
  report.step = step_index;
  report.time = config_.dt * step_index;
  report.picard_iterations = total_iterations;
  report.continuation_rungs = rungs;
  report.fixed_point_residual = residual;
  report.mass = fespace::integral(level.rho);
  report.min_density = min_rho;
  report.positivity_floor = floor;

  const diagnostics::EnergyBalance eb = diagnostics::energy_balance(
      solver_.params(), rho_prev, level, config_.dt);
  report.energy_residual = eb.residual / eb.scale;
  report.energy_slack = eb.slack / eb.scale;
  report.vorticity_residual =
      diagnostics::momentum_identities(solver_.params(), level)
          .vorticity_residual;
  const diagnostics::RenormReport rr = diagnostics::renormalized_report(
      level.rho, rho_prev, level.u, config_.dt,
      transport::Renormalizer::quadratic());
  report.renormalized_residual = rr.residual / rr.scale;

  return {std::move(level), report};
}

Stepper::RunResult Stepper::run(const DensityField& rho0,
                                const SourceField& f) const {
  return run_cells(rho0, [&](int, double t_mid) {
    return fespace::interp_Q_vector(*mesh_,
                                    [&](Vec2 x) { return f(t_mid, x); });
  });
}

Stepper::RunResult Stepper::run_cells(const DensityField& rho0,
                                      const CellSource& f) const {
  if (&rho0.mesh() != mesh_) {
    throw InvariantError("initial density lives on a different mesh");
  }
  for (int c = 0; c < rho0.size(); ++c) {
    if (!(rho0[c] > 0.0)) {
      throw InvariantError("initial density must be strictly positive");
    }
  }
  const double ratio = config_.t_end / config_.dt;
  const long long steps = std::llround(ratio);
  if (steps < 1 ||
      std::abs(static_cast<double>(steps) * config_.dt - config_.t_end) >
          1e-9 * std::max(config_.t_end, 1.0)) {
    throw ConfigError("time step must divide the final time");
  }

  RunResult out{Trajectory(*mesh_, solver_.params(), config_.dt, rho0), {}};
  out.trajectory.levels.reserve(static_cast<size_t>(steps));
  out.reports.reserve(static_cast<size_t>(steps));

  for (long long m = 1; m <= steps; ++m) {
    const double t_mid = (static_cast<double>(m) - 0.5) * config_.dt;
    std::vector<Vec2> f_cells = f(static_cast<int>(m), t_mid);
    if (static_cast<int>(f_cells.size()) != mesh_->n_cells()) {
      throw ConfigError("force table size does not match the cell count");
    }
    const DensityField& prev =
        out.trajectory.rho_at(static_cast<int>(m) - 1);
    auto [level, report] = advance(prev, f_cells, static_cast<int>(m));
    out.trajectory.levels.push_back(std::move(level));
    out.reports.push_back(report);
  }
  return out;
}

} // namespace csfem::stepper
