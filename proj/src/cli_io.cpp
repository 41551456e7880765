#include "csfem/cli_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

#include "csfem/errors.hpp"
#include "csfem/verification.hpp"

namespace csfem::cli_io {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void config_fail(const std::string& path, int line,
                              const std::string& what) {
  std::ostringstream msg;
  msg << path << ":" << line << ": " << what;
  throw ConfigError(msg.str());
}

double parse_double(const std::string& path, int line,
                    const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    config_fail(path, line, "expected a number, got '" + value + "'");
  }
  return parsed;
}

int parse_int(const std::string& path, int line, const std::string& value) {
  const double parsed = parse_double(path, line, value);
  const int as_int = static_cast<int>(std::llround(parsed));
  if (parsed != static_cast<double>(as_int)) {
    config_fail(path, line, "expected an integer, got '" + value + "'");
  }
  return as_int;
}

/// Splits "name:arg1:arg2" into the name and its arguments.
std::vector<std::string> split_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : spec) {
    if (c == ':') {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  parts.push_back(current);
  return parts;
}

double spec_number(const std::string& spec, const std::string& field) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("bad number '" + field + "' in spec '" + spec + "'");
  }
  return parsed;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace

RunSetup parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config file " + path);
  }

  RunSetup setup;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string::size_type hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos
                                      ? raw
                                      : raw.substr(0, hash));
    if (line.empty()) {
      continue;
    }
    const std::string::size_type eq = line.find('=');
    if (eq == std::string::npos) {
      config_fail(path, line_no, "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      config_fail(path, line_no, "expected 'key = value'");
    }

    if (key == "mu") {
      setup.params.mu = parse_double(path, line_no, value);
    } else if (key == "lambda") {
      setup.params.lambda = parse_double(path, line_no, value);
    } else if (key == "a") {
      setup.params.a = parse_double(path, line_no, value);
    } else if (key == "gamma") {
      setup.params.gamma = parse_double(path, line_no, value);
    } else if (key == "dt") {
      setup.config.dt = parse_double(path, line_no, value);
    } else if (key == "t_end") {
      setup.config.t_end = parse_double(path, line_no, value);
    } else if (key == "picard_tol") {
      setup.config.picard_tol = parse_double(path, line_no, value);
    } else if (key == "picard_max") {
      setup.config.picard_max = parse_int(path, line_no, value);
    } else if (key == "relaxation") {
      setup.config.relaxation = parse_double(path, line_no, value);
    } else if (key == "continuation_steps") {
      setup.config.continuation_steps = parse_int(path, line_no, value);
    } else if (key == "rho_floor") {
      setup.config.rho_floor = parse_double(path, line_no, value);
    } else if (key == "initial") {
      setup.initial = value;
    } else if (key == "source") {
      setup.source = value;
    } else {
      config_fail(path, line_no, "unknown key '" + key + "'");
    }
  }

  setup.params.validate();
  if (setup.config.dt <= 0.0) {
    throw ConfigError(path + ": missing required key 'dt'");
  }
  setup.config.validate();
  return setup;
}

DensityField load_initial(const Mesh& mesh, const std::string& spec,
                          double rho_floor) {
  const std::vector<std::string> parts = split_spec(spec);
  if (parts[0] == "constant" && parts.size() == 2) {
    const double v = spec_number(spec, parts[1]);
    return stepper::init_density(mesh, [v](fespace::Vec2) { return v; },
                                 rho_floor);
  }
  if (parts[0] == "sine-x" && parts.size() == 1) {
    return stepper::init_density(
        mesh,
        [](fespace::Vec2 x) { return 1.0 + 0.1 * std::sin(2.0 * kPi * x.x); },
        rho_floor);
  }
  if (parts[0] == "csv" && parts.size() == 2) {
    const Table table = read_csv(parts[1]);
    if (table.columns != std::vector<std::string>{"rho"}) {
      throw ConfigError("initial-density CSV needs the single column 'rho'");
    }
    if (static_cast<int>(table.rows.size()) != mesh.n_cells()) {
      throw ConfigError("initial-density CSV has " +
                        std::to_string(table.rows.size()) + " rows, mesh has " +
                        std::to_string(mesh.n_cells()) + " cells");
    }
    DensityField rho(mesh);
    for (int c = 0; c < mesh.n_cells(); ++c) {
      const double v = table.rows[c][0];
      if (v < 0.0) {
        throw ConfigError("initial-density CSV has negative value on cell " +
                          std::to_string(c));
      }
      rho[c] = std::max(v, rho_floor);
    }
    return rho;
  }
  throw ConfigError("unknown initial-density spec '" + spec + "'");
}

stepper::CellSource load_source(const Mesh& mesh, const std::string& spec,
                                const momentum::FluidParams& params) {
  const std::vector<std::string> parts = split_spec(spec);
  const auto from_pointwise = [&mesh](std::function<fespace::Vec2(fespace::Vec2)> f) {
    return [&mesh, f = std::move(f)](int, double) {
      return fespace::interp_Q_vector(mesh, f);
    };
  };

  if (parts[0] == "zero" && parts.size() == 1) {
    const int n = mesh.n_cells();
    return [n](int, double) {
      return std::vector<fespace::Vec2>(static_cast<size_t>(n));
    };
  }
  if (parts[0] == "constant" && parts.size() == 3) {
    const fespace::Vec2 f{spec_number(spec, parts[1]),
                          spec_number(spec, parts[2])};
    const int n = mesh.n_cells();
    return [n, f](int, double) {
      return std::vector<fespace::Vec2>(static_cast<size_t>(n), f);
    };
  }
  if (parts[0] == "swirl" && parts.size() == 1) {
    // Compressive part proportional to grad(cos pi x cos pi y) plus a
    // divergence-free shear, so both the pressure and the vorticity work.
    return from_pointwise([](fespace::Vec2 x) {
      return fespace::Vec2{
          -2.0 * std::sin(kPi * x.x) * std::cos(kPi * x.y) +
              std::sin(2.0 * kPi * x.y),
          -2.0 * std::cos(kPi * x.x) * std::sin(kPi * x.y) -
              std::sin(2.0 * kPi * x.x)};
    });
  }
  if (parts[0] == "manufactured" && parts.size() == 1) {
    return from_pointwise(verification::manufactured_case(params).source);
  }
  if (parts[0] == "csv" && parts.size() == 2) {
    const Table table = read_csv(parts[1]);
    if (table.columns !=
        std::vector<std::string>{"step", "cell", "fx", "fy"}) {
      throw ConfigError("force CSV needs the columns step,cell,fx,fy");
    }
    // step index -> per-cell vectors, validated dense per step on use
    auto by_step = std::make_shared<std::map<int, std::vector<fespace::Vec2>>>();
    auto filled = std::make_shared<std::map<int, std::vector<char>>>();
    const int n = mesh.n_cells();
    for (size_t r = 0; r < table.rows.size(); ++r) {
      const int step = static_cast<int>(table.rows[r][0]);
      const int cell = static_cast<int>(table.rows[r][1]);
      if (cell < 0 || cell >= n) {
        throw ConfigError("force CSV row " + std::to_string(r + 2) +
                          ": cell id out of range");
      }
      auto& cells = (*by_step)[step];
      auto& mask = (*filled)[step];
      cells.resize(static_cast<size_t>(n));
      mask.resize(static_cast<size_t>(n), 0);
      cells[cell] = {table.rows[r][2], table.rows[r][3]};
      mask[cell] = 1;
    }
    return [by_step, filled, n](int step, double) {
      const auto it = by_step->find(step);
      if (it == by_step->end()) {
        throw ConfigError("force CSV has no rows for step " +
                          std::to_string(step));
      }
      const auto& mask = filled->at(step);
      for (int c = 0; c < n; ++c) {
        if (!mask[c]) {
          throw ConfigError("force CSV is missing cell " + std::to_string(c) +
                            " at step " + std::to_string(step));
        }
      }
      return it->second;
    };
  }
  throw ConfigError("unknown source spec '" + spec + "'");
}

void write_csv(const Table& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  for (size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << table.columns[i];
  }
  out << "\n";
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << format_double(row[i]);
    }
    out << "\n";
  }
  if (!out.flush()) {
    throw IoError("short write to " + path);
  }
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path);
  }
  Table table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) {
      fields.push_back(field);
    }
    if (line_no == 1) {
      table.columns = fields;
      continue;
    }
    if (fields.size() != table.columns.size()) {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(table.columns.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const std::string& f : fields) {
      const char* begin = f.c_str();
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0') {
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": bad number '" + f + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) {
    throw ConfigError(path + ": missing header row");
  }
  return table;
}

Table reports_table(const std::vector<stepper::StepReport>& reports) {
  Table t;
  t.columns = {"step",
               "time",
               "picard_iterations",
               "continuation_rungs",
               "fixed_point_residual",
               "mass",
               "min_density",
               "positivity_floor",
               "energy_residual",
               "energy_slack",
               "vorticity_residual",
               "renormalized_residual"};
  for (const auto& r : reports) {
    t.rows.push_back({static_cast<double>(r.step), r.time,
                      static_cast<double>(r.picard_iterations),
                      static_cast<double>(r.continuation_rungs),
                      r.fixed_point_residual, r.mass, r.min_density,
                      r.positivity_floor, r.energy_residual, r.energy_slack,
                      r.vorticity_residual, r.renormalized_residual});
  }
  return t;
}

Table ledger_table(const diagnostics::EnergyLedger& ledger) {
  Table t;
  t.columns = {"step",
               "potential",
               "time_dissipation",
               "face_dissipation",
               "velocity_sq",
               "div_sq",
               "vorticity_sq",
               "curl_w_sq",
               "force_sq",
               "balance_residual",
               "balance_slack"};
  for (const auto& r : ledger.rows) {
    t.rows.push_back({static_cast<double>(r.step), r.potential,
                      r.time_dissipation, r.face_dissipation, r.velocity_sq,
                      r.div_sq, r.vorticity_sq, r.curl_w_sq, r.force_sq,
                      r.balance_residual, r.balance_slack});
  }
  return t;
}

void write_vtk(const stepper::TimeLevel& level,
               const momentum::FluidParams& params, const std::string& path) {
  const Mesh& mesh = level.rho.mesh();
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out << std::setprecision(17);
  out << "# vtk DataFile Version 2.0\n";
  out << "compressible stokes snapshot\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    out << mesh.vertex(v).x << " " << mesh.vertex(v).y << " 0\n";
  }
  out << "CELLS " << mesh.n_cells() << " " << 4 * mesh.n_cells() << "\n";
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cell(c);
    out << "3 " << cell[0] << " " << cell[1] << " " << cell[2] << "\n";
  }
  out << "CELL_TYPES " << mesh.n_cells() << "\n";
  for (int c = 0; c < mesh.n_cells(); ++c) {
    out << "5\n";
  }

  const auto cell_scalars = [&](const std::string& name,
                                const std::function<double(int)>& value) {
    out << "SCALARS " << name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (int c = 0; c < mesh.n_cells(); ++c) {
      out << value(c) << "\n";
    }
  };

  const DensityField p_eff =
      momentum::effective_flux(level.rho, level.u, params);
  out << "CELL_DATA " << mesh.n_cells() << "\n";
  cell_scalars("rho", [&](int c) { return level.rho[c]; });
  cell_scalars("p", [&](int c) {
    return momentum::pressure_scalar(level.rho[c], params);
  });
  cell_scalars("p_eff", [&](int c) { return p_eff[c]; });
  cell_scalars("div_u", [&](int c) { return fespace::div_V(level.u, c); });

  out << "POINT_DATA " << mesh.n_vertices() << "\n";
  out << "SCALARS w double 1\n";
  out << "LOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    out << level.w.at_vertex(v) << "\n";
  }
  if (!out.flush()) {
    throw IoError("short write to " + path);
  }
}

std::string fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path + " for checksumming");
  }
  uint64_t hash = 14695981039346656037ull;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(buffer[i]);
      hash *= 1099511628211ull;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

void write_manifest(const std::string& path, const RunSetup& setup,
                    const Mesh& mesh,
                    const std::vector<stepper::StepReport>& reports,
                    const diagnostics::EnergyLedger& ledger,
                    double initial_mass,
                    const std::vector<std::string>& files) {
  nlohmann::json j;
  j["status"] = "completed";
  j["config"] = {{"mu", setup.params.mu},
                 {"lambda", setup.params.lambda},
                 {"a", setup.params.a},
                 {"gamma", setup.params.gamma},
                 {"dt", setup.config.dt},
                 {"t_end", setup.config.t_end},
                 {"picard_tol", setup.config.picard_tol},
                 {"picard_max", setup.config.picard_max},
                 {"relaxation", setup.config.relaxation},
                 {"continuation_steps", setup.config.continuation_steps},
                 {"rho_floor", setup.config.rho_floor},
                 {"initial", setup.initial},
                 {"source", setup.source}};
  j["mesh"] = {{"h", mesh.h()},
               {"kappa", mesh.kappa()},
               {"vertices", mesh.n_vertices()},
               {"cells", mesh.n_cells()},
               {"faces", mesh.n_faces()},
               {"interior_faces", mesh.n_interior_faces()},
               {"interior_vertices", mesh.n_interior_vertices()}};

  double max_mass_drift = 0.0;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& r : reports) {
    max_mass_drift = std::max(
        max_mass_drift, std::abs(r.mass - initial_mass) /
                            std::max(std::abs(initial_mass), 1e-30));
    steps.push_back({{"step", r.step},
                     {"time", r.time},
                     {"picard_iterations", r.picard_iterations},
                     {"continuation_rungs", r.continuation_rungs},
                     {"fixed_point_residual", r.fixed_point_residual},
                     {"mass", r.mass},
                     {"min_density", r.min_density},
                     {"positivity_floor", r.positivity_floor},
                     {"energy_residual", r.energy_residual},
                     {"energy_slack", r.energy_slack},
                     {"vorticity_residual", r.vorticity_residual},
                     {"renormalized_residual", r.renormalized_residual}});
  }
  j["steps"] = std::move(steps);
  j["diagnostics"] = {{"initial_mass", initial_mass},
                      {"max_mass_drift", max_mass_drift},
                      {"initial_potential", ledger.initial_potential},
                      {"max_energy_residual", ledger.max_residual},
                      {"min_energy_slack", ledger.min_slack}};

  nlohmann::json file_list = nlohmann::json::array();
  for (const std::string& f : files) {
    file_list.push_back({{"path", f}, {"fnv1a", fnv1a_file(f)}});
  }
  j["files"] = std::move(file_list);

  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open " + path + " for writing");
  }
  out << j.dump(2) << "\n";
  if (!out.flush()) {
    throw IoError("short write to " + path);
  }
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) {
    return 1;
  }
  if (dynamic_cast<const ConvergenceError*>(&e) != nullptr) {
    return 2;
  }
  if (dynamic_cast<const IoError*>(&e) != nullptr) {
    return 4;
  }
  return 3;
}

} // namespace csfem::cli_io
