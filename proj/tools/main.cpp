#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csfem/cli_io.hpp"
#include "csfem/diagnostics.hpp"
#include "csfem/errors.hpp"
#include "csfem/mesh.hpp"
#include "csfem/stepper.hpp"
#include "csfem/verification.hpp"

namespace {

namespace fs = std::filesystem;
using csfem::cli_io::RunSetup;
using csfem::mesh::Mesh;

struct MeshChoice {
  std::string path;    // --mesh
  int unit_square = 0; // --unit-square
};

Mesh make_mesh(const MeshChoice& choice, int fallback_k) {
  if (!choice.path.empty()) return csfem::mesh::load_mesh(choice.path);
  return csfem::mesh::unit_square(
      choice.unit_square > 0 ? choice.unit_square : fallback_k);
}

/// With --couple c the time step follows the mesh as dt = c * h, rounded so
/// that an integer number of steps lands exactly on t_end.  Returns the
/// realized ratio dt / h.
double apply_coupling(csfem::stepper::SimConfig& config, double couple,
                      double h) {
  if (couple > 0.0) {
    const long steps =
        std::max(1L, std::lround(config.t_end / (couple * h)));
    config.dt = config.t_end / static_cast<double>(steps);
  }
  if (config.dt <= 0.0)
    throw csfem::ConfigError(
        "no time step: set dt in the config or pass --couple");
  return config.dt / h;
}

int run_command(const std::string& config_path, const MeshChoice& choice,
                double couple, const std::string& out_dir) {
  const RunSetup setup = config_path.empty()
                             ? RunSetup{}
                             : csfem::cli_io::parse_config(config_path);
  const Mesh mesh = make_mesh(choice, 16);
  csfem::stepper::SimConfig config = setup.config;
  const double ratio = apply_coupling(config, couple, mesh.h());

  const auto rho0 =
      csfem::cli_io::load_initial(mesh, setup.initial, config.rho_floor);
  const auto source =
      csfem::cli_io::load_source(mesh, setup.source, setup.params);
  const double initial_mass = csfem::fespace::integral(rho0);

  const csfem::stepper::Stepper stepper(mesh, setup.params, config);
  const auto result = stepper.run_cells(rho0, source);
  const auto ledger = csfem::diagnostics::energy_ledger(result.trajectory);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw csfem::IoError("cannot create output directory '" + out_dir +
                         "': " + ec.message());
  const std::string fields = out_dir + "/fields.vtk";
  const std::string reports = out_dir + "/reports.csv";
  const std::string energy = out_dir + "/energy.csv";
  csfem::cli_io::write_vtk(result.trajectory.levels.back(), setup.params,
                           fields);
  csfem::cli_io::write_csv(csfem::cli_io::reports_table(result.reports),
                           reports);
  csfem::cli_io::write_csv(csfem::cli_io::ledger_table(ledger), energy);
  RunSetup echo = setup;
  echo.config = config; // manifest echoes the realized time step
  csfem::cli_io::write_manifest(out_dir + "/manifest.json", echo, mesh,
                                result.reports, ledger, initial_mass,
                                {fields, reports, energy});

  double drift = 0.0;
  for (const auto& rep : result.reports)
    drift = std::max(drift, std::abs(rep.mass - initial_mass) / initial_mass);
  std::cout << "steps " << result.reports.size() << "  dt " << config.dt
            << "  dt/h " << ratio << "\n"
            << "mass drift " << drift << "  max energy residual "
            << ledger.max_residual << "  min slack " << ledger.min_slack
            << "\n"
            << "wrote " << out_dir << "/{fields.vtk, reports.csv, energy.csv, "
            << "manifest.json}\n";
  return 0;
}

int study_command(const std::string& config_path, int refinements, int base,
                  double couple, const std::string& out_dir) {
  // The built-in fixture stirs a sine-perturbed density; a config overrides
  // physics and data but the ladder always keeps dt = couple * h.
  RunSetup setup;
  setup.initial = "sine-x";
  setup.source = "swirl";
  setup.config.t_end = 0.5;
  if (!config_path.empty()) setup = csfem::cli_io::parse_config(config_path);

  const csfem::verification::ManufacturedCase mc =
      csfem::verification::manufactured_case(setup.params);

  csfem::cli_io::Table table;
  table.columns = {"k",          "h",          "dt",
                   "flux_value", "flux_delta", "velocity_error",
                   "velocity_order"};
  double prev_flux = 0.0;
  double prev_error = 0.0;
  for (int r = 0; r < refinements; ++r) {
    const int k = base << r;
    const Mesh mesh = csfem::mesh::unit_square(k);
    csfem::stepper::SimConfig config = setup.config;
    apply_coupling(config, couple, mesh.h());

    const auto rho0 =
        csfem::cli_io::load_initial(mesh, setup.initial, config.rho_floor);
    const auto source =
        csfem::cli_io::load_source(mesh, setup.source, setup.params);
    const csfem::stepper::Stepper stepper(mesh, setup.params, config);
    const auto result = stepper.run_cells(rho0, source);

    const double flux =
        csfem::diagnostics::flux_pairing(result.trajectory, config.t_end);
    const double error =
        csfem::verification::manufactured_velocity_error(mesh, mc);
    const double nan = std::nan("");
    table.rows.push_back(
        {static_cast<double>(k), mesh.h(), config.dt, flux,
         r == 0 ? nan : std::abs(flux - prev_flux), error,
         r == 0 ? nan : std::log2(prev_error / error)});
    prev_flux = flux;
    prev_error = error;
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec)
    throw csfem::IoError("cannot create output directory '" + out_dir +
                         "': " + ec.message());
  csfem::cli_io::write_csv(table, out_dir + "/study.csv");

  for (const auto& name : table.columns) std::cout << name << "  ";
  std::cout << "\n";
  for (const auto& row : table.rows) {
    for (double v : row) std::cout << v << "  ";
    std::cout << "\n";
  }
  std::cout << "wrote " << out_dir << "/study.csv\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-stationary compressible Stokes simulator"};
  app.require_subcommand(1);

  std::string config_path;
  MeshChoice choice;
  double couple = 0.0;
  std::string out_dir = "out";
  std::string suite = "all";
  int refinements = 3;

  CLI::App* run = app.add_subcommand("run", "time-step one configuration");
  run->add_option("--config", config_path, "key = value settings file");
  auto* mesh_opt = run->add_option("--mesh", choice.path, "mesh file");
  run->add_option("--unit-square", choice.unit_square,
                  "structured unit square, k cells per side (default 16)")
      ->excludes(mesh_opt);
  run->add_option("--couple", couple, "set dt = couple * h");
  run->add_option("--out", out_dir, "output directory (default out)");

  CLI::App* study = app.add_subcommand(
      "study", "refinement ladder with flux and convergence tables");
  study->add_option("--config", config_path, "key = value settings file");
  study->add_option("--refinements", refinements, "ladder rungs (default 3)")
      ->check(CLI::PositiveNumber);
  study->add_option("--unit-square", choice.unit_square,
                    "coarsest k (default 8)");
  study->add_option("--couple", couple, "dt = couple * h (default 1)");
  study->add_option("--out", out_dir, "output directory (default out)");

  CLI::App* verify = app.add_subcommand("verify", "run the property suites");
  verify->add_option(
      "--suite", suite, "all|transport|energy|hodge|translation|flux");

  try {
    app.parse(argc, argv);
    if (*run)
      return run_command(config_path, choice, couple, out_dir);
    if (*study)
      return study_command(config_path, refinements,
                           choice.unit_square > 0 ? choice.unit_square : 8,
                           couple > 0.0 ? couple : 1.0, out_dir);
    const bool ok = csfem::verification::verify_suite(suite, std::cout);
    if (!ok) std::cout << "verification FAILED\n";
    return ok ? 0 : 3;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return csfem::cli_io::exit_code(e);
  }
}
