#include "csfem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <queue>
#include <sstream>

#include "csfem/errors.hpp"

namespace csfem::linalg {

namespace {

uint64_t value_bits(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  return bits;
}

} // namespace

// ===========================================================================
// SparseMatrix
// ===========================================================================

SparseMatrix SparseMatrix::from_triplets(int rows, int cols,
                                         std::vector<Triplet> triplets) {
  if (rows < 0 || cols < 0)
    throw InvariantError("SparseMatrix: negative dimensions");
  for (const Triplet& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
      throw InvariantError("SparseMatrix: triplet index out of range");
    if (!std::isfinite(t.value))
      throw InvariantError("SparseMatrix: non-finite triplet value");
  }

  // Canonical order: (row, col, value bits).  The value tie-break makes the
  // accumulation below independent of insertion order, bit for bit.
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) {
              if (a.row != b.row) return a.row < b.row;
              if (a.col != b.col) return a.col < b.col;
              return value_bits(a.value) < value_bits(b.value);
            });

  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_.assign(rows + 1, 0);
  m.col_idx_.reserve(triplets.size());
  m.values_.reserve(triplets.size());

  size_t i = 0;
  for (int r = 0; r < rows; ++r) {
    while (i < triplets.size() && triplets[i].row == r) {
      const int c = triplets[i].col;
      double sum = 0.0;
      while (i < triplets.size() && triplets[i].row == r &&
             triplets[i].col == c) {
        sum += triplets[i].value;
        ++i;
      }
      m.col_idx_.push_back(c);
      m.values_.push_back(sum);
    }
    m.row_ptr_[r + 1] = static_cast<int>(m.col_idx_.size());
  }
  return m;
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::coeff(int row, int col) const {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
    throw InvariantError("SparseMatrix::coeff: index out of range");
  const auto begin = col_idx_.begin() + row_ptr_[row];
  const auto end = col_idx_.begin() + row_ptr_[row + 1];
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return values_[static_cast<size_t>(it - col_idx_.begin())];
}

void SparseMatrix::multiply(const std::vector<double>& x,
                            std::vector<double>& y) const {
  if (static_cast<int>(x.size()) != cols_)
    throw InvariantError("SparseMatrix::multiply: size mismatch");
  y.assign(rows_, 0.0);
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      acc += values_[k] * x[col_idx_[k]];
    y[r] = acc;
  }
}

std::vector<double> SparseMatrix::multiply(const std::vector<double>& x) const {
  std::vector<double> y;
  multiply(x, y);
  return y;
}

std::vector<double>
SparseMatrix::multiply_transpose(const std::vector<double>& x) const {
  if (static_cast<int>(x.size()) != rows_)
    throw InvariantError("SparseMatrix::multiply_transpose: size mismatch");
  std::vector<double> y(cols_, 0.0);
  for (int r = 0; r < rows_; ++r)
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      y[col_idx_[k]] += values_[k] * x[r];
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (int r = 0; r < rows_; ++r)
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      t.push_back({col_idx_[k], r, values_[k]});
  return from_triplets(cols_, rows_, std::move(t));
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& other) const {
  if (cols_ != other.rows_)
    throw InvariantError("SparseMatrix::multiply: dimension mismatch");
  std::vector<Triplet> t;
  std::vector<double> acc(other.cols_, 0.0);
  std::vector<int> touched;
  for (int r = 0; r < rows_; ++r) {
    touched.clear();
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const int mid = col_idx_[k];
      const double v = values_[k];
      for (int k2 = other.row_ptr_[mid]; k2 < other.row_ptr_[mid + 1]; ++k2) {
        const int c = other.col_idx_[k2];
        if (acc[c] == 0.0) touched.push_back(c);
        acc[c] += v * other.values_[k2];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int c : touched) {
      t.push_back({r, c, acc[c]});
      acc[c] = 0.0;
    }
  }
  return from_triplets(rows_, other.cols_, std::move(t));
}

double SparseMatrix::norm_inf() const {
  double best = 0.0;
  for (int r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (int k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      s += std::abs(values_[k]);
    best = std::max(best, s);
  }
  return best;
}

// ===========================================================================
// Reverse Cuthill-McKee
// ===========================================================================

std::vector<int> rcm_ordering(const SparseMatrix& A) {
  if (A.rows() != A.cols())
    throw InvariantError("rcm_ordering: matrix must be square");
  const int n = A.rows();

  // Symmetrized adjacency, self-loops dropped, neighbours sorted.
  std::vector<std::vector<int>> adj(n);
  for (int r = 0; r < n; ++r) {
    for (int k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      const int c = A.col_idx()[k];
      if (c == r) continue;
      adj[r].push_back(c);
      adj[c].push_back(r);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }

  std::vector<int> degree(n);
  for (int i = 0; i < n; ++i) degree[i] = static_cast<int>(adj[i].size());

  std::vector<char> visited(n, 0);
  std::vector<int> order;
  order.reserve(n);

  for (;;) {
    // Lowest-degree unvisited vertex starts the next component; ties go to
    // the lower index so the ordering is reproducible.
    int start = -1;
    for (int i = 0; i < n; ++i) {
      if (visited[i]) continue;
      if (start < 0 || degree[i] < degree[start]) start = i;
    }
    if (start < 0) break;

    std::queue<int> queue;
    queue.push(start);
    visited[start] = 1;
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop();
      order.push_back(v);
      std::vector<int> next;
      for (int nb : adj[v])
        if (!visited[nb]) next.push_back(nb);
      std::sort(next.begin(), next.end(), [&](int a, int b) {
        if (degree[a] != degree[b]) return degree[a] < degree[b];
        return a < b;
      });
      for (int nb : next) {
        visited[nb] = 1;
        queue.push(nb);
      }
    }
  }

  std::reverse(order.begin(), order.end());
  return order;
}

// ===========================================================================
// Banded LU with partial pivoting
// ===========================================================================

Factorization Factorization::compute(const SparseMatrix& A) {
  if (A.rows() != A.cols())
    throw InvariantError("Factorization: matrix must be square");
  const int n = A.rows();
  if (n == 0) throw InvariantError("Factorization: empty matrix");
  for (int r = 0; r < n; ++r)
    if (A.row_ptr()[r + 1] == A.row_ptr()[r]) {
      std::ostringstream msg;
      msg << "Factorization: structurally singular, row " << r << " is empty";
      throw InvariantError(msg.str());
    }

  Factorization f;
  f.n_ = n;
  f.original_ = A;
  f.norm_inf_ = A.norm_inf();
  f.perm_ = rcm_ordering(A);
  f.perm_inv_.assign(n, 0);
  for (int i = 0; i < n; ++i) f.perm_inv_[f.perm_[i]] = i;

  // Bandwidth of the permuted matrix.
  int kl = 0, ku = 0;
  for (int r = 0; r < n; ++r) {
    const int pr = f.perm_inv_[r];
    for (int k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k) {
      const int pc = f.perm_inv_[A.col_idx()[k]];
      kl = std::max(kl, pr - pc);
      ku = std::max(ku, pc - pr);
    }
  }
  f.kl_ = kl;
  f.ku_ = ku;
  // Row swaps smear the upper band out to kl+ku superdiagonals.
  f.ldab_ = 2 * kl + ku + 1;
  f.band_.assign(static_cast<size_t>(f.ldab_) * n, 0.0);
  f.pivot_.assign(n, 0);

  // Band storage: entry (i, j) lives at band_[(kl + ku + i - j) + ldab * j].
  auto at = [&](int i, int j) -> double& {
    return f.band_[static_cast<size_t>(kl + ku + i - j) +
                   static_cast<size_t>(f.ldab_) * j];
  };

  for (int r = 0; r < n; ++r) {
    const int pr = f.perm_inv_[r];
    for (int k = A.row_ptr()[r]; k < A.row_ptr()[r + 1]; ++k)
      at(pr, f.perm_inv_[A.col_idx()[k]]) = A.values()[k];
  }

  const int ku_work = kl + ku;
  for (int j = 0; j < n; ++j) {
    const int last_row = std::min(n - 1, j + kl);
    int piv = j;
    double piv_abs = std::abs(at(j, j));
    for (int i = j + 1; i <= last_row; ++i) {
      const double a = std::abs(at(i, j));
      if (a > piv_abs) {
        piv_abs = a;
        piv = i;
      }
    }
    f.pivot_[j] = piv;
    if (piv_abs == 0.0) {
      std::ostringstream msg;
      msg << "Factorization: zero pivot at elimination step " << j << " of "
          << n << " (matrix numerically singular)";
      throw InvariantError(msg.str());
    }
    const int last_col = std::min(n - 1, j + ku_work);
    if (piv != j)
      for (int c = j; c <= last_col; ++c) std::swap(at(j, c), at(piv, c));
    const double inv_pivot = 1.0 / at(j, j);
    for (int i = j + 1; i <= last_row; ++i) {
      const double l = at(i, j) * inv_pivot;
      at(i, j) = l;
      if (l == 0.0) continue;
      for (int c = j + 1; c <= last_col; ++c) at(i, c) -= l * at(j, c);
    }
  }
  return f;
}

void Factorization::solve_banded(std::vector<double>& x) const {
  const int n = n_;
  const int ku_work = kl_ + ku_;
  auto at = [&](int i, int j) -> double {
    return band_[static_cast<size_t>(kl_ + ku_ + i - j) +
                 static_cast<size_t>(ldab_) * j];
  };
  for (int j = 0; j < n; ++j) {
    if (pivot_[j] != j) std::swap(x[j], x[pivot_[j]]);
    const int last_row = std::min(n - 1, j + kl_);
    const double xj = x[j];
    if (xj == 0.0) continue;
    for (int i = j + 1; i <= last_row; ++i) x[i] -= at(i, j) * xj;
  }
  for (int j = n - 1; j >= 0; --j) {
    double acc = x[j];
    for (int c = j + 1; c <= std::min(n - 1, j + ku_work); ++c)
      acc -= at(j, c) * x[c];
    x[j] = acc / at(j, j);
  }
}

std::vector<double> Factorization::solve(const std::vector<double>& b) const {
  if (static_cast<int>(b.size()) != n_)
    throw InvariantError("Factorization::solve: right-hand side size mismatch");

  auto permuted_solve = [&](const std::vector<double>& rhs) {
    std::vector<double> xp(n_);
    for (int i = 0; i < n_; ++i) xp[i] = rhs[perm_[i]];
    solve_banded(xp);
    std::vector<double> x(n_);
    for (int i = 0; i < n_; ++i) x[perm_[i]] = xp[i];
    return x;
  };

  std::vector<double> x = permuted_solve(b);

  // Iterative refinement against the retained CSR matrix.  Two or three
  // passes are routinely enough; the loop exits early once the contract
  // tolerance is met.
  const double tol = 1e-10;
  std::vector<double> residual(n_);
  for (int pass = 0; pass < 4; ++pass) {
    original_.multiply(x, residual);
    for (int i = 0; i < n_; ++i) residual[i] = b[i] - residual[i];
    const double bound =
        tol * (norm_inf_ * norm_inf(x) + norm_inf(b));
    if (norm_inf(residual) <= bound) return x;
    const std::vector<double> dx = permuted_solve(residual);
    for (int i = 0; i < n_; ++i) x[i] += dx[i];
  }

  original_.multiply(x, residual);
  for (int i = 0; i < n_; ++i) residual[i] = b[i] - residual[i];
  const double bound = tol * (norm_inf_ * norm_inf(x) + norm_inf(b));
  if (norm_inf(residual) > bound) {
    std::ostringstream msg;
    msg << "Factorization::solve: residual " << norm_inf(residual)
        << " exceeds contract bound " << bound
        << " after iterative refinement";
    throw InvariantError(msg.str());
  }
  return x;
}

std::vector<double> factor_solve(const SparseMatrix& A,
                                 const std::vector<double>& b) {
  return Factorization::compute(A).solve(b);
}

// ===========================================================================
// Inverse iteration for the smallest generalized Rayleigh quotient
// ===========================================================================

RayleighResult smallest_rayleigh(const SparseMatrix& A, const SparseMatrix& M,
                                 const SparseMatrix* constraint, double tol,
                                 int max_iterations) {
  if (A.rows() != A.cols() || M.rows() != M.cols() || A.rows() != M.rows())
    throw InvariantError("smallest_rayleigh: dimension mismatch");
  const int n = A.rows();
  const int k = constraint ? constraint->rows() : 0;
  if (constraint && constraint->cols() != n)
    throw InvariantError("smallest_rayleigh: constraint width mismatch");

  // Augmented saddle operator [[A, C^T], [C, 0]].  Solving against it both
  // inverts A on the constraint null space and keeps iterates inside it.
  std::vector<Triplet> t;
  for (int r = 0; r < n; ++r)
    for (int p = A.row_ptr()[r]; p < A.row_ptr()[r + 1]; ++p)
      t.push_back({r, A.col_idx()[p], A.values()[p]});
  if (constraint) {
    for (int r = 0; r < k; ++r)
      for (int p = constraint->row_ptr()[r]; p < constraint->row_ptr()[r + 1];
           ++p) {
        const int c = constraint->col_idx()[p];
        const double v = constraint->values()[p];
        t.push_back({n + r, c, v});
        t.push_back({c, n + r, v});
      }
  }
  const Factorization augmented =
      Factorization::compute(SparseMatrix::from_triplets(n + k, n + k, std::move(t)));

  // Normal-equation factorization for the least squares multiplier in the
  // residual measurement: (C C^T) m = C r.
  Factorization* normal = nullptr;
  Factorization normal_storage;
  if (constraint) {
    normal_storage =
        Factorization::compute(constraint->multiply(constraint->transpose()));
    normal = &normal_storage;
  }

  auto augmented_solve = [&](const std::vector<double>& rhs_head) {
    std::vector<double> rhs(n + k, 0.0);
    std::copy(rhs_head.begin(), rhs_head.end(), rhs.begin());
    std::vector<double> full = augmented.solve(rhs);
    full.resize(n);
    return full;
  };

  // Subspace iteration on a small block rather than a single vector: a
  // (near-)degenerate smallest eigenvalue, e.g. the symmetry pair of the
  // square, makes single-vector iteration crawl at the rate of the cluster
  // splitting, while a block that contains the whole cluster converges at
  // the cluster-to-remainder gap.  Deterministic irregular start columns.
  const int block = std::min(3, n);
  std::vector<std::vector<double>> X(block, std::vector<double>(n));
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < n; ++i)
      X[j][i] = 1.0 + 0.5 * std::sin(2.39996 * i + 0.7 + 1.3 * j);
  for (int j = 0; j < block; ++j)
    X[j] = augmented_solve(M.multiply(X[j])); // land in the constraint null space

  RayleighResult result;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    // M-orthonormalize the block (modified Gram-Schmidt).
    std::vector<std::vector<double>> MX(block);
    for (int j = 0; j < block; ++j) {
      for (int i = 0; i < j; ++i) {
        const double proj = dot(X[j], MX[i]);
        for (int p = 0; p < n; ++p) X[j][p] -= proj * X[i][p];
      }
      MX[j] = M.multiply(X[j]);
      const double mnorm = std::sqrt(dot(X[j], MX[j]));
      if (!(mnorm > 0.0))
        throw ConvergenceError("smallest_rayleigh: block collapsed");
      for (double& v : X[j]) v /= mnorm;
      for (double& v : MX[j]) v /= mnorm;
    }

    // Rayleigh-Ritz on the block: the M-Gram matrix is the identity, so
    // only the A-projection needs an eigensolve (cyclic Jacobi).
    std::vector<std::vector<double>> AX(block);
    for (int j = 0; j < block; ++j) AX[j] = A.multiply(X[j]);
    double a[3][3] = {};
    for (int i = 0; i < block; ++i)
      for (int j = 0; j < block; ++j) a[i][j] = dot(X[i], AX[j]);
    double s[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 32; ++sweep) {
      double off = 0.0;
      for (int p = 0; p < block; ++p)
        for (int q = p + 1; q < block; ++q) off += a[p][q] * a[p][q];
      if (off <= 1e-30 * (1.0 + a[0][0] * a[0][0])) break;
      for (int p = 0; p < block; ++p)
        for (int q = p + 1; q < block; ++q) {
          if (a[p][q] == 0.0) continue;
          const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
          const double c = std::cos(theta), d = std::sin(theta);
          for (int r = 0; r < block; ++r) {
            const double arp = a[r][p], arq = a[r][q];
            a[r][p] = c * arp - d * arq;
            a[r][q] = d * arp + c * arq;
          }
          for (int r = 0; r < block; ++r) {
            const double apr = a[p][r], aqr = a[q][r];
            a[p][r] = c * apr - d * aqr;
            a[q][r] = d * apr + c * aqr;
          }
          for (int r = 0; r < block; ++r) {
            const double srp = s[r][p], srq = s[r][q];
            s[r][p] = c * srp - d * srq;
            s[r][q] = d * srp + c * srq;
          }
        }
    }
    int best = 0;
    for (int j = 1; j < block; ++j)
      if (a[j][j] < a[best][best]) best = j;
    const double lambda = a[best][best];

    std::vector<double> y(n, 0.0), my(n, 0.0), ay(n, 0.0);
    for (int j = 0; j < block; ++j)
      for (int p = 0; p < n; ++p) {
        y[p] += s[j][best] * X[j][p];
        my[p] += s[j][best] * MX[j][p];
        ay[p] += s[j][best] * AX[j][p];
      }

    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) r[i] = ay[i] - lambda * my[i];
    if (constraint) {
      const std::vector<double> cr = constraint->multiply(r);
      const std::vector<double> m = normal->solve(cr);
      const std::vector<double> ctm = constraint->multiply_transpose(m);
      for (int i = 0; i < n; ++i) r[i] -= ctm[i];
    }
    const double scale = norm2(ay) + std::abs(lambda) * norm2(my);
    const double res = scale > 0.0 ? norm2(r) / scale : norm2(r);

    result.value = lambda;
    result.vector = y;
    result.iterations = iter;
    result.residual = res;
    if (res <= tol) return result;

    for (int j = 0; j < block; ++j) X[j] = augmented_solve(MX[j]);
  }

  std::ostringstream msg;
  msg << "smallest_rayleigh: no convergence in " << max_iterations
      << " iterations (residual " << result.residual << ", tol " << tol << ")";
  throw ConvergenceError(msg.str());
}

// ===========================================================================
// Vector helpers
// ===========================================================================

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvariantError("dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const std::vector<double>& a) {
  double best = 0.0;
  for (double v : a) best = std::max(best, std::abs(v));
  return best;
}

} // namespace csfem::linalg
