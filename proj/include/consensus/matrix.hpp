#ifndef CONSENSUS_MATRIX_HPP_
#define CONSENSUS_MATRIX_HPP_

/**
 * @file matrix.hpp
 * @brief Dense small-matrix primitives and the matrix functionals used to
 * analyse consensus dynamics: norms, contraction factors, the Dobrushin
 * coefficient, oscillation, the averaging map and iterated-product limits.
 *
 * Matrices are dense and row-major; agent counts are expected to be at most a
 * few hundred.
 */

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace consensus {

/// Tolerance for row-sum and nonnegativity checks.
inline constexpr double kRowTol = 1e-9;

using StateVector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> d);
  /// The n x n matrix with every entry 1/n (maps a vector to its mean vector).
  static Matrix averaging(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
StateVector operator*(const Matrix& a, std::span<const double> v);

/// out = a * v without allocating; `out` must not alias `v`.
void multiply_into(const Matrix& a, std::span<const double> v, std::span<double> out);

/// Square matrix whose rows all sum to the same value. Entries may be negative.
class RowSumMatrix {
 public:
  explicit RowSumMatrix(Matrix m, double tol = kRowTol);

  const Matrix& matrix() const { return m_; }
  operator const Matrix&() const { return m_; }
  std::size_t size() const { return m_.rows(); }
  double common_row_sum() const { return row_sum_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

 private:
  Matrix m_;
  double row_sum_ = 0.0;
};

/// Row-stochastic n x n weights matrix: nonnegative entries, rows summing to 1.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(Matrix m, double tol = kRowTol);
  StochasticMatrix(std::initializer_list<std::initializer_list<double>> rows)
      : StochasticMatrix(Matrix(rows)) {}

  static StochasticMatrix identity(std::size_t n) { return StochasticMatrix(Matrix::identity(n)); }

  const Matrix& matrix() const { return m_; }
  operator const Matrix&() const { return m_; }
  std::size_t size() const { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  RowSumMatrix as_row_sum() const { return RowSumMatrix(m_); }

  friend bool operator==(const StochasticMatrix&, const StochasticMatrix&) = default;

 private:
  Matrix m_;
};

/// Per-agent learning rates, the diagonal of the learning matrix. Entries must be finite.
class LearningRates {
 public:
  LearningRates() = default;
  explicit LearningRates(std::vector<double> eps);
  LearningRates(std::initializer_list<double> eps) : LearningRates(std::vector<double>(eps)) {}
  static LearningRates uniform(std::size_t n, double eps) { return LearningRates(std::vector<double>(n, eps)); }

  std::size_t size() const { return eps_.size(); }
  double operator[](std::size_t i) const { return eps_[i]; }
  std::span<const double> values() const { return eps_; }
  Matrix as_diagonal() const { return Matrix::diagonal(eps_); }

  friend bool operator==(const LearningRates&, const LearningRates&) = default;

 private:
  std::vector<double> eps_;
};

/// Strictly positive weights for the weighted infinity norm.
class WeightVector {
 public:
  explicit WeightVector(std::vector<double> beta);
  std::size_t size() const { return beta_.size(); }
  double operator[](std::size_t i) const { return beta_[i]; }
  std::span<const double> values() const { return beta_; }

 private:
  std::vector<double> beta_;
};

double inf_norm(std::span<const double> v);
double matrix_inf_norm(const Matrix& b);

/// max_i |v_i| / beta_i.
double weighted_inf_norm(std::span<const double> v, const WeightVector& beta);

/// max_i (|a_ii - eps_i| + 1 - a_ii). Below 1 exactly when 0 < eps_i < 2 a_ii for every i.
double contraction_factor(const StochasticMatrix& a, const LearningRates& eps);

/// Half the largest pairwise L1 distance between rows.
double dobrushin(const Matrix& b);

/// max_i v_i - min_i v_i.
double oscillation(std::span<const double> v);

/// B = A + E (Delta - I): feedback toward the current mean instead of a fixed target.
RowSumMatrix averaging_map(const StochasticMatrix& a, const LearningRates& eps);

/// Largest L1 distance between two rows; zero iff the matrix has identical rows.
double max_row_distance(const Matrix& m);

struct ProductLimit {
  Matrix limit;                ///< last product P_t = B_t ... B_1
  bool converged = false;      ///< rows of P_t coincide within the tolerance
  std::int64_t steps = 0;      ///< number of factors multiplied
  std::vector<double> nu() const;  ///< first row of `limit`
};

/// Forms P_t = B_t P_{t-1} for t = 1..t_max and stops once the rows of P_t
/// coincide (max pairwise row L1 distance below `rank_one_tol`).
ProductLimit product_limit(const std::function<Matrix(std::int64_t)>& factor, std::int64_t t_max,
                           double rank_one_tol);
ProductLimit product_limit(std::span<const RowSumMatrix> factors, std::int64_t t_max, double rank_one_tol);
ProductLimit product_limit(const RowSumMatrix& fixed, std::int64_t t_max, double rank_one_tol);

}  // namespace consensus

#endif  // CONSENSUS_MATRIX_HPP_
