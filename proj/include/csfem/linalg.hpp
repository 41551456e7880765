#pragma once

#include <cstdint>
#include <vector>

namespace csfem::linalg {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
///
/// Assembly goes through from_triplets, which canonicalizes the entry order
/// before accumulating duplicates.  Ties on (row, col) are broken by the bit
/// pattern of the value, so permuting the insertion order of the triplets
/// yields a bitwise identical matrix.  All consumers rely on that for
/// reproducible output.
class SparseMatrix {
public:
  SparseMatrix() = default;

  static SparseMatrix from_triplets(int rows, int cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nnz() const { return static_cast<int>(values_.size()); }

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  /// Entry lookup by binary search; absent entries read as zero.
  double coeff(int row, int col) const;

  /// y = A x.
  void multiply(const std::vector<double>& x, std::vector<double>& y) const;
  std::vector<double> multiply(const std::vector<double>& x) const;

  /// y = A^T x.
  std::vector<double> multiply_transpose(const std::vector<double>& x) const;

  SparseMatrix transpose() const;

  /// Row-merge sparse product A*B.
  SparseMatrix multiply(const SparseMatrix& other) const;

  /// Max absolute row sum.
  double norm_inf() const;

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> values_;
};

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity pattern.
/// Returns perm with perm[new_index] = old_index.  Deterministic: start
/// vertices and BFS neighbours are tie-broken by vertex index.
std::vector<int> rcm_ordering(const SparseMatrix& A);

/// Direct solver for square sparse systems.
///
/// The matrix is permuted by RCM to shrink its bandwidth and factored as a
/// banded LU with partial pivoting, which copes with the indefinite saddle
/// point systems assembled elsewhere in the library (zero diagonal blocks
/// included).  solve() polishes with iterative refinement against the
/// retained CSR matrix and enforces the residual contract
///   ||Ax - b||_inf <= 1e-10 (||A||_inf ||x||_inf + ||b||_inf).
class Factorization {
public:
  static Factorization compute(const SparseMatrix& A);

  std::vector<double> solve(const std::vector<double>& b) const;

  int size() const { return n_; }

private:
  int n_ = 0;
  int kl_ = 0;
  int ku_ = 0; // storage stretches to kl_+ku_ superdiagonals for pivot fill
  int ldab_ = 0;
  std::vector<double> band_;
  std::vector<int> pivot_;
  std::vector<int> perm_;     // perm_[new] = old
  std::vector<int> perm_inv_; // perm_inv_[old] = new
  SparseMatrix original_;
  double norm_inf_ = 0.0;

  void solve_banded(std::vector<double>& x) const;
};

/// One-shot convenience wrapper around Factorization.
std::vector<double> factor_solve(const SparseMatrix& A,
                                 const std::vector<double>& b);

struct RayleighResult {
  double value = 0.0;
  std::vector<double> vector; // M-normalized minimizer
  int iterations = 0;
  double residual = 0.0; // subspace eigenresidual, relative
};

/// Smallest generalized Rayleigh quotient of (A, M) by inverse iteration,
/// optionally restricted to the null space of a constraint matrix.
///
/// A must be symmetric positive semidefinite and nonsingular on the
/// constraint null space; M symmetric positive definite.  The restriction is
/// enforced through a Lagrange multiplier block, i.e. each iterate solves
///   [A  C^T] [y]   [M x]
///   [C   0 ] [m] = [ 0 ]
/// so every iterate satisfies C y = 0 to solver precision.  The reported
/// residual is || A y - value * M y + C^T m* ||_2 with m* the least squares
/// multiplier, scaled by ||A y|| + |value| ||M y||.
///
/// Iteration stops when that residual reaches tol, or when the quotient has
/// stopped moving (relative change below tol/10 three times in a row): a
/// (near-)degenerate smallest eigenvalue caps the achievable eigenvector
/// residual at the cluster width, while the returned value is accurate to
/// that same width.  The residual field records what the vector achieved.
RayleighResult smallest_rayleigh(const SparseMatrix& A, const SparseMatrix& M,
                                 const SparseMatrix* constraint = nullptr,
                                 double tol = 1e-8, int max_iterations = 5000);

// Small dense-free vector helpers shared across modules.
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);
double norm_inf(const std::vector<double>& a);

} // namespace csfem::linalg
