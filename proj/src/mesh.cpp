#include "csfem/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "csfem/errors.hpp"

namespace csfem::mesh {

namespace {

double signed_area(Vec2 a, Vec2 b, Vec2 c) {
  return 0.5 * cross(b - a, c - a);
}

} // namespace

// ===========================================================================
// Construction
// ===========================================================================

Mesh build_mesh(std::vector<Vec2> vertices,
                std::vector<std::array<int, 3>> cells) {
  Mesh m;
  m.vertices_ = std::move(vertices);
  m.cells_ = std::move(cells);
  m.build();
  return m;
}

void Mesh::build() {
  const int nv = n_vertices();
  const int nc = n_cells();
  if (nv < 3 || nc < 1)
    throw InvariantError("Mesh: need at least one triangle");

  cell_area_.resize(nc);
  cell_centroid_.resize(nc);
  cell_diameter_.resize(nc);
  cell_faces_.assign(nc, {-1, -1, -1});

  h_ = 0.0;
  kappa_ = 0.0;
  for (int c = 0; c < nc; ++c) {
    const auto& cell = cells_[c];
    for (int v : cell)
      if (v < 0 || v >= nv) {
        std::ostringstream msg;
        msg << "Mesh: cell " << c << " references vertex " << v
            << " outside [0, " << nv << ")";
        throw InvariantError(msg.str());
      }
    const Vec2 a = vertices_[cell[0]];
    const Vec2 b = vertices_[cell[1]];
    const Vec2 d = vertices_[cell[2]];
    const double area = signed_area(a, b, d);
    if (!(area > 0.0)) {
      std::ostringstream msg;
      msg << "Mesh: cell " << c << " has nonpositive area " << area
          << " (cells must be counterclockwise and nondegenerate)";
      throw InvariantError(msg.str());
    }
    cell_area_[c] = area;
    cell_centroid_[c] = (a + b + d) * (1.0 / 3.0);
    const double la = norm(b - d), lb = norm(d - a), lc = norm(a - b);
    const double diam = std::max({la, lb, lc});
    cell_diameter_[c] = diam;
    h_ = std::max(h_, diam);
    const double inscribed_diam = 4.0 * area / (la + lb + lc); // 2 * area/s
    kappa_ = std::max(kappa_, diam / inscribed_diam);
  }

  // Face discovery.  Each cell walks its edges in the local order
  // (v1,v2), (v2,v0), (v0,v1), i.e. local face j opposite local vertex j.
  // Cells are visited in index order, so the first cell that registers a
  // face becomes cell_minus and fixes the face orientation.
  std::map<std::pair<int, int>, int> face_of_edge;
  for (int c = 0; c < nc; ++c) {
    const auto& cell = cells_[c];
    for (int j = 0; j < 3; ++j) {
      const int a = cell[(j + 1) % 3];
      const int b = cell[(j + 2) % 3];
      const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
      auto it = face_of_edge.find(key);
      if (it == face_of_edge.end()) {
        Face f;
        f.v0 = a; // traversal order of the registering cell
        f.v1 = b;
        f.cell_minus = c;
        const Vec2 t = vertices_[b] - vertices_[a];
        f.measure = norm(t);
        if (!(f.measure > 0.0))
          throw InvariantError("Mesh: zero-length face");
        // CCW traversal keeps the interior on the left, so the outward
        // normal of cell_minus is the -90 degree rotation of the tangent.
        f.normal = Vec2{t.y, -t.x} * (1.0 / f.measure);
        const int id = static_cast<int>(faces_.size());
        faces_.push_back(f);
        face_of_edge.emplace(key, id);
        cell_faces_[c][j] = id;
      } else {
        Face& f = faces_[it->second];
        if (f.cell_plus >= 0) {
          std::ostringstream msg;
          msg << "Mesh: face (" << key.first << ", " << key.second
              << ") shared by more than two cells";
          throw InvariantError(msg.str());
        }
        if (f.v0 != b || f.v1 != a) {
          std::ostringstream msg;
          msg << "Mesh: cells " << f.cell_minus << " and " << c
              << " traverse face (" << key.first << ", " << key.second
              << ") in the same direction (inconsistent orientation)";
          throw InvariantError(msg.str());
        }
        f.cell_plus = c;
        cell_faces_[c][j] = it->second;
      }
    }
  }

  // Dof numbering follows face/vertex index order.
  boundary_vertex_.assign(nv, 0);
  for (Face& f : faces_)
    if (f.cell_plus < 0) {
      boundary_vertex_[f.v0] = 1;
      boundary_vertex_[f.v1] = 1;
    }
  for (int f = 0; f < n_faces(); ++f)
    if (faces_[f].cell_plus >= 0) {
      faces_[f].dof = static_cast<int>(interior_faces_.size());
      interior_faces_.push_back(f);
    }
  vertex_dof_.assign(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (!boundary_vertex_[v]) {
      vertex_dof_[v] = static_cast<int>(interior_vertices_.size());
      interior_vertices_.push_back(v);
    }

  // Point-location grid.
  grid_lo_ = grid_hi_ = vertices_[0];
  for (const Vec2& v : vertices_) {
    grid_lo_.x = std::min(grid_lo_.x, v.x);
    grid_lo_.y = std::min(grid_lo_.y, v.y);
    grid_hi_.x = std::max(grid_hi_.x, v.x);
    grid_hi_.y = std::max(grid_hi_.y, v.y);
  }
  const int target = std::max(1, static_cast<int>(std::sqrt(nc / 2.0)));
  grid_nx_ = grid_ny_ = target;
  grid_bins_.assign(static_cast<size_t>(grid_nx_) * grid_ny_, {});
  const double wx = std::max(grid_hi_.x - grid_lo_.x, 1e-300);
  const double wy = std::max(grid_hi_.y - grid_lo_.y, 1e-300);
  auto bin_range = [&](double lo, double hi, double base, double width,
                       int count) {
    int b0 = static_cast<int>((lo - base) / width * count);
    int b1 = static_cast<int>((hi - base) / width * count);
    b0 = std::clamp(b0, 0, count - 1);
    b1 = std::clamp(b1, 0, count - 1);
    return std::pair<int, int>{b0, b1};
  };
  for (int c = 0; c < nc; ++c) {
    Vec2 lo = vertices_[cells_[c][0]], hi = lo;
    for (int j = 1; j < 3; ++j) {
      const Vec2 v = vertices_[cells_[c][j]];
      lo.x = std::min(lo.x, v.x);
      lo.y = std::min(lo.y, v.y);
      hi.x = std::max(hi.x, v.x);
      hi.y = std::max(hi.y, v.y);
    }
    const auto [bx0, bx1] = bin_range(lo.x, hi.x, grid_lo_.x, wx, grid_nx_);
    const auto [by0, by1] = bin_range(lo.y, hi.y, grid_lo_.y, wy, grid_ny_);
    for (int by = by0; by <= by1; ++by)
      for (int bx = bx0; bx <= bx1; ++bx)
        grid_bins_[static_cast<size_t>(by) * grid_nx_ + bx].push_back(c);
  }
  // Bins are filled in ascending cell order already; keep that invariant
  // explicit since locate_point's tie-break depends on it.
  for (auto& bin : grid_bins_) std::sort(bin.begin(), bin.end());
}

// ===========================================================================
// Point location
// ===========================================================================

std::optional<int> Mesh::locate_point(Vec2 x) const {
  const double wx = std::max(grid_hi_.x - grid_lo_.x, 1e-300);
  const double wy = std::max(grid_hi_.y - grid_lo_.y, 1e-300);
  const int bx = std::clamp(
      static_cast<int>((x.x - grid_lo_.x) / wx * grid_nx_), 0, grid_nx_ - 1);
  const int by = std::clamp(
      static_cast<int>((x.y - grid_lo_.y) / wy * grid_ny_), 0, grid_ny_ - 1);

  // Barycentric containment with a small relative slack so points sitting
  // exactly on shared faces register in every incident cell; the ascending
  // candidate order then returns the lowest cell index.
  const double tol = 1e-12;
  for (int c : grid_bins_[static_cast<size_t>(by) * grid_nx_ + bx]) {
    const Vec2 a = vertices_[cells_[c][0]];
    const Vec2 b = vertices_[cells_[c][1]];
    const Vec2 d = vertices_[cells_[c][2]];
    const double area2 = cross(b - a, d - a);
    const double l0 = cross(b - x, d - x) / area2;
    const double l1 = cross(d - x, a - x) / area2;
    const double l2 = cross(a - x, b - x) / area2;
    if (l0 >= -tol && l1 >= -tol && l2 >= -tol) return c;
  }
  return std::nullopt;
}

// ===========================================================================
// Generators
// ===========================================================================

Mesh unit_square(int k) {
  if (k < 1) throw InvariantError("unit_square: subdivision count must be >= 1");
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<size_t>(k + 1) * (k + 1));
  for (int iy = 0; iy <= k; ++iy)
    for (int ix = 0; ix <= k; ++ix)
      vertices.push_back({static_cast<double>(ix) / k, static_cast<double>(iy) / k});

  auto vid = [k](int ix, int iy) { return iy * (k + 1) + ix; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(static_cast<size_t>(2) * k * k);
  for (int iy = 0; iy < k; ++iy)
    for (int ix = 0; ix < k; ++ix) {
      const int v00 = vid(ix, iy), v10 = vid(ix + 1, iy);
      const int v01 = vid(ix, iy + 1), v11 = vid(ix + 1, iy + 1);
      cells.push_back({v00, v10, v11}); // below the (0,0)-(1,1) diagonal
      cells.push_back({v00, v11, v01}); // above it
    }
  return build_mesh(std::move(vertices), std::move(cells));
}

Mesh refine_uniform(const Mesh& mesh) {
  const int nv = mesh.n_vertices();

  // Midpoint ids in lexicographic edge order, independent of cell order.
  std::map<std::pair<int, int>, int> midpoint;
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const Face& face = mesh.face(f);
    midpoint.emplace(std::pair<int, int>{std::min(face.v0, face.v1),
                                         std::max(face.v0, face.v1)},
                     0);
  }
  int next = nv;
  for (auto& [edge, id] : midpoint) id = next++;

  std::vector<Vec2> vertices(static_cast<size_t>(next));
  for (int v = 0; v < nv; ++v) vertices[v] = mesh.vertex(v);
  for (const auto& [edge, id] : midpoint)
    vertices[id] = (mesh.vertex(edge.first) + mesh.vertex(edge.second)) * 0.5;

  auto mid = [&](int a, int b) {
    return midpoint.at({std::min(a, b), std::max(a, b)});
  };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(static_cast<size_t>(4) * mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& [v0, v1, v2] = mesh.cell(c);
    const int m01 = mid(v0, v1), m12 = mid(v1, v2), m20 = mid(v2, v0);
    cells.push_back({v0, m01, m20});
    cells.push_back({m01, v1, m12});
    cells.push_back({m20, m12, v2});
    cells.push_back({m01, m12, m20});
  }
  return build_mesh(std::move(vertices), std::move(cells));
}

// ===========================================================================
// File interchange
// ===========================================================================

namespace {

void expect_keyword(std::istream& in, const std::string& keyword, long& value) {
  std::string word;
  if (!(in >> word) || word != keyword)
    throw ConfigError("mesh file: expected '" + keyword + "' header line");
  if (!(in >> value))
    throw ConfigError("mesh file: missing value after '" + keyword + "'");
}

} // namespace

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);

  long dim = 0, nv = 0, nc = 0;
  expect_keyword(in, "DIM", dim);
  if (dim != 2) throw ConfigError("mesh file: only DIM 2 is supported");
  expect_keyword(in, "NV", nv);
  expect_keyword(in, "NC", nc);
  if (nv < 0 || nc < 0) throw ConfigError("mesh file: negative entity count");

  std::vector<Vec2> vertices(static_cast<size_t>(nv));
  for (long i = 0; i < nv; ++i)
    if (!(in >> vertices[i].x >> vertices[i].y)) {
      std::ostringstream msg;
      msg << "mesh file: truncated vertex list at entry " << i;
      throw ConfigError(msg.str());
    }
  std::vector<std::array<int, 3>> cells(static_cast<size_t>(nc));
  for (long i = 0; i < nc; ++i)
    if (!(in >> cells[i][0] >> cells[i][1] >> cells[i][2])) {
      std::ostringstream msg;
      msg << "mesh file: truncated cell list at entry " << i;
      throw ConfigError(msg.str());
    }
  return build_mesh(std::move(vertices), std::move(cells));
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file: " + path);
  out.precision(17);
  out << "DIM 2\n"
      << "NV " << mesh.n_vertices() << "\n"
      << "NC " << mesh.n_cells() << "\n";
  for (int v = 0; v < mesh.n_vertices(); ++v)
    out << mesh.vertex(v).x << " " << mesh.vertex(v).y << "\n";
  for (int c = 0; c < mesh.n_cells(); ++c)
    out << mesh.cell(c)[0] << " " << mesh.cell(c)[1] << " " << mesh.cell(c)[2]
        << "\n";
  if (!out) throw IoError("short write on mesh file: " + path);
}

} // namespace csfem::mesh
