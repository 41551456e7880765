#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <vector>

#include "csfem/diagnostics.hpp"
#include "csfem/momentum.hpp"
#include "csfem/stepper.hpp"

namespace csfem::cli_io {

using fespace::DensityField;
using fespace::Mesh;

/// Everything a simulation needs besides the mesh, as read from a config
/// file.  The initial density and the body force stay in their textual spec
/// form until a mesh is available to realize them on.
struct RunSetup {
  momentum::FluidParams params;
  stepper::SimConfig config;
  std::string initial = "constant:1";
  std::string source = "zero";
};

/// Flat "key = value" text, one setting per line, '#' starts a comment.
/// Unknown keys, unparsable values, and invalid physics are rejected with
/// the offending line number in the message.  Absent keys keep the defaults
/// documented in the README.
RunSetup parse_config(const std::string& path);

/// Initial density from its spec string:
///   constant:<v>   uniform value
///   sine-x         1 + 0.1 sin(2 pi x)
///   csv:<path>     one-column CSV with a value per cell
/// Cell averages are clamped below by rho_floor; negative data is rejected.
DensityField load_initial(const Mesh& mesh, const std::string& spec,
                          double rho_floor);

/// Body force from its spec string:
///   zero
///   constant:<fx>:<fy>
///   swirl               steady mixed compressive/rotational forcing
///   manufactured        source of the closed-form momentum solution
///   csv:<path>          columns step,cell,fx,fy covering every step
stepper::CellSource load_source(const Mesh& mesh, const std::string& spec,
                                const momentum::FluidParams& params);

// ===========================================================================
// Tabular output
// ===========================================================================

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows; // each row matches columns in size
};

/// CSV with 17 significant digits, enough for the values to survive a
/// write/read round trip bitwise.
void write_csv(const Table& table, const std::string& path);
Table read_csv(const std::string& path);

Table reports_table(const std::vector<stepper::StepReport>& reports);
Table ledger_table(const diagnostics::EnergyLedger& ledger);

/// Legacy ASCII VTK snapshot of one accepted level: cell data rho, p,
/// p_eff, div_u and vertex data w.
void write_vtk(const stepper::TimeLevel& level,
               const momentum::FluidParams& params, const std::string& path);

// ===========================================================================
// Run manifest
// ===========================================================================

/// 64-bit FNV-1a of a file's bytes, rendered as 16 hex digits.
std::string fnv1a_file(const std::string& path);

/// JSON manifest of a completed run: config echo, mesh summary, per-step
/// reports, energy-ledger summary, and a checksum for every emitted file.
void write_manifest(const std::string& path, const RunSetup& setup,
                    const Mesh& mesh,
                    const std::vector<stepper::StepReport>& reports,
                    const diagnostics::EnergyLedger& ledger,
                    double initial_mass,
                    const std::vector<std::string>& files);

/// Process exit code for a failure: 1 configuration, 2 convergence,
/// 3 invariant violation (also any unclassified failure), 4 I/O.
int exit_code(const std::exception& e);

} // namespace csfem::cli_io
