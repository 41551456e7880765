#include "csfem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "csfem/errors.hpp"

namespace csfem::diagnostics {

namespace {

constexpr double kTiny = 1e-30; // keeps relative residuals of zero data at 0

double sq(double x) { return x * x; }

double divergence_sq(const VelocityField& u) {
  const Mesh& mesh = u.mesh();
  double acc = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    acc += mesh.cell_area(c) * sq(fespace::div_V(u, c));
  }
  return acc;
}

/// Curl of the vorticity field as the H(div) field it exactly is.
VelocityField curl_field(const fespace::VorticityField& w) {
  VelocityField cw(w.mesh());
  cw.values() = fespace::curl_incidence(w.mesh()).multiply(w.values());
  return cw;
}

linalg::SparseMatrix matrix_sum(const linalg::SparseMatrix& a,
                                const linalg::SparseMatrix& b) {
  std::vector<linalg::Triplet> triplets;
  triplets.reserve(static_cast<size_t>(a.nnz() + b.nnz()));
  for (const linalg::SparseMatrix* m : {&a, &b}) {
    for (int r = 0; r < m->rows(); ++r) {
      for (int k = m->row_ptr()[r]; k < m->row_ptr()[r + 1]; ++k) {
        triplets.push_back({r, m->col_idx()[k], m->values()[k]});
      }
    }
  }
  return linalg::SparseMatrix::from_triplets(a.rows(), a.cols(),
                                             std::move(triplets));
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len_sq = mesh::dot(ab, ab);
  double s = len_sq > 0.0 ? mesh::dot(p - a, ab) / len_sq : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return mesh::norm(p - (a + ab * s));
}

} // namespace

EnergyBalance energy_balance(const momentum::FluidParams& params,
                             const DensityField& rho_prev,
                             const stepper::TimeLevel& level, double dt) {
  const Mesh& mesh = level.rho.mesh();
  const transport::Renormalizer renorm = transport::Renormalizer::power(
      params.gamma, params.a / (params.gamma - 1.0));
  const transport::BalanceTerms terms =
      transport::balance_terms(level.rho, rho_prev, level.u, dt, renorm);

  EnergyBalance eb;
  eb.potential_prev =
      fespace::integral(momentum::pressure_potential(rho_prev, params));
  eb.potential =
      fespace::integral(momentum::pressure_potential(level.rho, params));
  eb.time_dissipation = terms.time_exact;
  eb.face_dissipation = terms.face_exact;
  eb.time_dissipation_lb = terms.time_bounded;
  eb.face_dissipation_lb = terms.face_bounded;
  eb.viscous_div = dt * (params.mu + params.lambda) * divergence_sq(level.u);
  eb.viscous_w = dt * params.mu * sq(fespace::l2_norm(level.w));
  eb.work = dt * linalg::dot(fespace::load_V(mesh, level.f),
                             level.u.values());

  eb.residual = eb.potential - eb.potential_prev + eb.time_dissipation +
                eb.face_dissipation + eb.viscous_div + eb.viscous_w - eb.work;
  eb.slack = eb.potential_prev - eb.potential - eb.time_dissipation_lb -
             eb.face_dissipation_lb - eb.viscous_div - eb.viscous_w + eb.work;
  eb.scale = std::abs(eb.potential_prev) + std::abs(eb.potential) +
             eb.time_dissipation + eb.face_dissipation + eb.viscous_div +
             eb.viscous_w + std::abs(eb.work) + kTiny;
  return eb;
}

MomentumIdentities momentum_identities(const momentum::FluidParams& params,
                                       const stepper::TimeLevel& level) {
  const Mesh& mesh = level.rho.mesh();
  const std::vector<double> load = fespace::load_V(mesh, level.f);

  const VelocityField cw = curl_field(level.w);
  const double curl_sq = params.mu * sq(fespace::l2_norm(cw));
  const double curl_work = linalg::dot(load, cw.values());

  MomentumIdentities out;
  out.vorticity_residual = std::abs(curl_sq - curl_work) /
                           (std::abs(curl_sq) + std::abs(curl_work) + kTiny);

  double pressure_work = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    pressure_work += mesh.cell_area(c) *
                     momentum::pressure_scalar(level.rho[c], params) *
                     fespace::div_V(level.u, c);
  }
  const double viscous = (params.mu + params.lambda) * divergence_sq(level.u) +
                         params.mu * sq(fespace::l2_norm(level.w)) -
                         linalg::dot(load, level.u.values());
  out.pairing_residual = std::abs(pressure_work - viscous) /
                         (std::abs(pressure_work) + std::abs(viscous) + kTiny);
  return out;
}

RenormReport renormalized_report(const DensityField& rho,
                                 const DensityField& rho_prev,
                                 const VelocityField& u, double dt,
                                 const transport::Renormalizer& renorm) {
  const Mesh& mesh = rho.mesh();
  const transport::BalanceTerms terms =
      transport::balance_terms(rho, rho_prev, u, dt, renorm);
  double b_prev = 0.0;
  double b_now = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    b_prev += mesh.cell_area(c) * renorm.B(rho_prev[c]);
    b_now += mesh.cell_area(c) * renorm.B(rho[c]);
  }
  RenormReport out;
  out.residual = transport::renormalized_residual(rho, rho_prev, u, dt, renorm);
  const double dissipation = renorm.constant_second_derivative
                                 ? terms.time_exact + terms.face_exact
                                 : terms.time_bounded + terms.face_bounded;
  out.scale = std::abs(b_prev) + std::abs(b_now) + std::abs(terms.b_div) +
              dissipation + kTiny;
  return out;
}

EnergyLedger energy_ledger(const Trajectory& traj) {
  EnergyLedger ledger;
  ledger.initial_potential =
      fespace::integral(momentum::pressure_potential(traj.initial, traj.params));
  ledger.min_slack = std::numeric_limits<double>::infinity();

  for (int m = 1; m <= traj.steps(); ++m) {
    const stepper::TimeLevel& level = traj.levels[m - 1];
    const EnergyBalance eb =
        energy_balance(traj.params, traj.rho_at(m - 1), level, traj.dt);

    LedgerRow row;
    row.step = m;
    row.potential = eb.potential;
    row.time_dissipation = eb.time_dissipation;
    row.face_dissipation = eb.face_dissipation;
    row.velocity_sq = traj.dt * sq(fespace::l2_norm(level.u));
    row.div_sq = traj.dt * divergence_sq(level.u);
    row.vorticity_sq = traj.dt * sq(fespace::l2_norm(level.w));
    row.curl_w_sq = traj.dt * sq(fespace::l2_norm(curl_field(level.w)));
    double fsq = 0.0;
    for (int c = 0; c < traj.mesh->n_cells(); ++c) {
      fsq += traj.mesh->cell_area(c) * mesh::dot(level.f[c], level.f[c]);
    }
    row.force_sq = traj.dt * fsq;
    row.balance_residual = eb.residual / eb.scale;
    row.balance_slack = eb.slack / eb.scale;
    ledger.rows.push_back(row);

    ledger.max_residual =
        std::max(ledger.max_residual, std::abs(row.balance_residual));
    ledger.min_slack = std::min(ledger.min_slack, row.balance_slack);
  }
  if (ledger.rows.empty()) {
    ledger.min_slack = 0.0;
  }
  return ledger;
}

BoundReport upwind_diffusion_bound(const Trajectory& traj,
                                   const SpaceTimeScalar& phi) {
  const Mesh& mesh = *traj.mesh;
  double acc = 0.0;
  double grad_max = 0.0;

  for (int m = 1; m <= traj.steps(); ++m) {
    const stepper::TimeLevel& level = traj.levels[m - 1];
    const double t = (m - 0.5) * traj.dt; // midpoint stand-in for the step average
    const DensityField phi_bar =
        fespace::interp_Q(mesh, [&](Vec2 x) { return phi.value(t, x); });
    for (int c = 0; c < mesh.n_cells(); ++c) {
      for (const auto& qp : fespace::cell_quadrature(mesh, c)) {
        grad_max = std::max(grad_max, mesh::norm(phi.gradient(t, qp.x)));
      }
    }

    for (int f : mesh.interior_faces()) {
      const mesh::Face& face = mesh.face(f);
      const double q = level.u[face.dof]; // integrated flux, minus -> plus
      const double un = q / face.measure;

      double moment_minus = 0.0; // int (cell average - phi) over the face
      double moment_plus = 0.0;
      for (const auto& qp : fespace::face_quadrature(mesh, f)) {
        const double v = phi.value(t, qp.x);
        moment_minus += qp.w * (phi_bar[face.cell_minus] - v);
        moment_plus += qp.w * (phi_bar[face.cell_plus] - v);
      }

      const double jump_minus = level.rho[face.cell_plus] -
                                level.rho[face.cell_minus];
      acc += traj.dt * jump_minus * std::min(un, 0.0) * moment_minus;
      acc += traj.dt * (-jump_minus) * std::min(-un, 0.0) * moment_plus;
    }
  }

  BoundReport out;
  out.lhs = std::abs(acc);
  out.reference = grad_max * std::sqrt(mesh.h());
  out.ratio = out.reference > 0.0 ? out.lhs / out.reference : 0.0;
  return out;
}

BoundReport time_continuity_bound(const Trajectory& traj,
                                  const SpaceTimeScalar& phi) {
  const Mesh& mesh = *traj.mesh;
  double acc = 0.0;
  double grad_max = 0.0;

  for (int m = 1; m <= traj.steps(); ++m) {
    const double t = (m - 0.5) * traj.dt;
    const DensityField phi_bar =
        fespace::interp_Q(mesh, [&](Vec2 x) { return phi.value(t, x); });
    const DensityField& rho = traj.rho_at(m);
    const DensityField& prev = traj.rho_at(m - 1);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      acc += (rho[c] - prev[c]) * mesh.cell_area(c) * phi_bar[c];
      for (const auto& qp : fespace::cell_quadrature(mesh, c)) {
        grad_max = std::max(grad_max, mesh::norm(phi.gradient(t, qp.x)));
      }
    }
  }

  BoundReport out;
  out.lhs = std::abs(acc);
  out.reference = (1.0 + std::sqrt(mesh.h())) * grad_max;
  out.ratio = out.reference > 0.0 ? out.lhs / out.reference : 0.0;
  return out;
}

double flux_pairing(const Trajectory& traj, double t) {
  const double total = traj.dt * traj.steps();
  if (!(t > 0.0) || t > total + 1e-9 * std::max(total, 1.0)) {
    std::ostringstream msg;
    msg << "pairing time " << t << " outside the run interval (0, " << total
        << "]";
    throw ConfigError(msg.str());
  }
  double acc = 0.0;
  for (int m = 1; m <= traj.steps(); ++m) {
    const double weight = std::min(traj.dt, t - traj.dt * (m - 1));
    if (weight <= 0.0) {
      break;
    }
    const stepper::TimeLevel& level = traj.levels[m - 1];
    const DensityField p_eff =
        momentum::effective_flux(level.rho, level.u, traj.params);
    for (int c = 0; c < traj.mesh->n_cells(); ++c) {
      acc += weight * traj.mesh->cell_area(c) * p_eff[c] * level.rho[c];
    }
  }
  return acc;
}

double translation_norm(const VelocityField& z, Vec2 xi) {
  const Mesh& mesh = z.mesh();
  const double shift = mesh::norm(xi);
  if (shift == 0.0) {
    return 0.0;
  }

  std::vector<int> boundary_faces;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    if (mesh.face(f).cell_plus < 0) {
      boundary_faces.push_back(f);
    }
  }
  const auto boundary_distance = [&](Vec2 p) {
    double d = std::numeric_limits<double>::infinity();
    for (int f : boundary_faces) {
      const mesh::Face& face = mesh.face(f);
      d = std::min(d, point_segment_distance(p, mesh.vertex(face.v0),
                                             mesh.vertex(face.v1)));
    }
    return d;
  };

  double acc = 0.0;
  bool sampled = false;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (const auto& qp : fespace::cell_quadrature(mesh, c)) {
      if (!(boundary_distance(qp.x) > shift)) {
        continue;
      }
      const Vec2 shifted = qp.x - xi;
      const std::optional<int> host = mesh.locate_point(shifted);
      if (!host) {
        throw InvariantError(
            "shifted quadrature point fell outside the triangulation");
      }
      const Vec2 diff =
          fespace::eval_V(z, c, qp.x) - fespace::eval_V(z, *host, shifted);
      acc += qp.w * mesh::dot(diff, diff);
      sampled = true;
    }
  }
  if (!sampled) {
    throw ConfigError(
        "translation is too large: no quadrature point is farther than |xi| "
        "from the boundary");
  }
  return std::sqrt(acc);
}

JumpSums jump_sums(const VelocityField& z) {
  const Mesh& mesh = z.mesh();
  JumpSums out;
  for (int f : mesh.interior_faces()) {
    const mesh::Face& face = mesh.face(f);
    double integrated = 0.0;
    for (const auto& qp : fespace::face_quadrature(mesh, f)) {
      const Vec2 jump = fespace::eval_V(z, face.cell_plus, qp.x) -
                        fespace::eval_V(z, face.cell_minus, qp.x);
      integrated += qp.w * mesh::cross(jump, face.normal);
    }
    out.max_jump = std::max(out.max_jump, std::abs(integrated));
    out.sum_sq += integrated * integrated;
  }
  return out;
}

double negative_norm_curl(const VelocityField& z) {
  const Mesh& coarse = z.mesh();
  const Mesh fine = mesh::refine_uniform(coarse);

  // Pairing vector: (z, curl of each fine hat).  The curl of a hat at local
  // vertex i is the opposite edge vector over twice the cell area, and z is
  // linear within each fine cell (children 4c..4c+3 tile coarse cell c), so
  // the centroid value integrates the product exactly.
  std::vector<double> t(static_cast<size_t>(fine.n_interior_vertices()), 0.0);
  for (int fc = 0; fc < fine.n_cells(); ++fc) {
    const int parent = fc / 4;
    const Vec2 value = fespace::eval_V(z, parent, fine.cell_centroid(fc));
    const auto& vs = fine.cell(fc);
    for (int i = 0; i < 3; ++i) {
      const int dof = fine.vertex_dof(vs[i]);
      if (dof < 0) {
        continue;
      }
      const Vec2 edge = fine.vertex(vs[(i + 2) % 3]) -
                        fine.vertex(vs[(i + 1) % 3]);
      t[dof] += 0.5 * mesh::dot(value, edge);
    }
  }

  // sup_phi |t.phi| / sqrt(phi.H.phi) = sqrt(t.H^{-1}.t) with H the
  // W^{1,2} Gram matrix of the fine P1 space.
  const linalg::SparseMatrix gram =
      matrix_sum(fespace::stiffness_W(fine), fespace::mass_W(fine));
  const std::vector<double> y =
      linalg::Factorization::compute(gram).solve(t);
  return std::sqrt(std::max(0.0, linalg::dot(t, y)));
}

} // namespace csfem::diagnostics
