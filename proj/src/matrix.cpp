#include "consensus/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "consensus/errors.hpp"

namespace consensus {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " has a non-finite entry");
  }
}

void require_square(const Matrix& m, const char* what) {
  if (!m.square() || m.rows() == 0) {
    throw InvalidArgument(std::string(what) + " must be a non-empty square matrix");
  }
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionMismatch("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::averaging(std::size_t n) { return Matrix(n, n, 1.0 / static_cast<double>(n)); }

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matrix product: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto crow = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix sum: shapes differ");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] += bd[k];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("matrix difference: shapes differ");
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] -= bd[k];
  return c;
}

void multiply_into(const Matrix& a, std::span<const double> v, std::span<double> out) {
  if (a.cols() != v.size() || a.rows() != out.size()) throw DimensionMismatch("matrix-vector product");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * v[j];
    out[i] = s;
  }
}

StateVector operator*(const Matrix& a, std::span<const double> v) {
  StateVector out(a.rows());
  multiply_into(a, v, out);
  return out;
}

RowSumMatrix::RowSumMatrix(Matrix m, double tol) : m_(std::move(m)) {
  require_square(m_, "row-sum matrix");
  require_finite(m_.data(), "row-sum matrix");
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    double s = 0.0;
    for (double x : m_.row(i)) s += x;
    if (i == 0) {
      row_sum_ = s;
    } else if (std::abs(s - row_sum_) > tol) {
      throw InvalidArgument("row " + std::to_string(i) + " sums to " + std::to_string(s) +
                            ", expected the common row sum " + std::to_string(row_sum_));
    }
  }
}

StochasticMatrix::StochasticMatrix(Matrix m, double tol) : m_(std::move(m)) {
  require_square(m_, "stochastic matrix");
  require_finite(m_.data(), "stochastic matrix");
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m_.cols(); ++j) {
      if (m_(i, j) < -tol) {
        throw InvalidArgument("stochastic matrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                              ") is negative");
      }
      s += m_(i, j);
    }
    if (std::abs(s - 1.0) > tol) {
      throw InvalidArgument("stochastic matrix row " + std::to_string(i) + " sums to " + std::to_string(s));
    }
  }
}

LearningRates::LearningRates(std::vector<double> eps) : eps_(std::move(eps)) {
  require_finite(eps_, "learning rates");
}

WeightVector::WeightVector(std::vector<double> beta) : beta_(std::move(beta)) {
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    if (!(beta_[i] > 0.0) || !std::isfinite(beta_[i])) {
      throw InvalidWeight("weight " + std::to_string(i) + " must be finite and strictly positive");
    }
  }
}

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double matrix_inf_norm(const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    double s = 0.0;
    for (double x : b.row(i)) s += std::abs(x);
    m = std::max(m, s);
  }
  return m;
}

double weighted_inf_norm(std::span<const double> v, const WeightVector& beta) {
  if (v.size() != beta.size()) throw DimensionMismatch("weighted norm: vector and weights differ in length");
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i]) / beta[i]);
  return m;
}

double contraction_factor(const StochasticMatrix& a, const LearningRates& eps) {
  if (a.size() != eps.size()) throw DimensionMismatch("contraction factor: matrix and rates differ in size");
  double rho = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double aii = a(i, i);
    rho = std::max(rho, 1.0 - (aii - std::abs(aii - eps[i])));  // exact 1 at eps = 0 and eps = 2 a_ii
  }
  return rho;
}

double max_row_distance(const Matrix& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.rows(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < m.cols(); ++k) d += std::abs(m(i, k) - m(j, k));
      best = std::max(best, d);
    }
  }
  return best;
}

double dobrushin(const Matrix& b) { return 0.5 * max_row_distance(b); }

double oscillation(std::span<const double> v) {
  if (v.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

RowSumMatrix averaging_map(const StochasticMatrix& a, const LearningRates& eps) {
  const std::size_t n = a.size();
  if (n != eps.size()) throw DimensionMismatch("averaging map: matrix and rates differ in size");
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix b = a.matrix();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) b(i, j) += eps[i] * inv_n;
    b(i, i) -= eps[i];
  }
  return RowSumMatrix(std::move(b));
}

std::vector<double> ProductLimit::nu() const {
  auto r = limit.row(0);
  return {r.begin(), r.end()};
}

ProductLimit product_limit(const std::function<Matrix(std::int64_t)>& factor, std::int64_t t_max,
                           double rank_one_tol) {
  ProductLimit out;
  for (std::int64_t t = 1; t <= t_max; ++t) {
    Matrix b = factor(t);
    out.limit = (t == 1) ? std::move(b) : b * out.limit;
    out.steps = t;
    if (max_row_distance(out.limit) < rank_one_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

ProductLimit product_limit(std::span<const RowSumMatrix> factors, std::int64_t t_max, double rank_one_tol) {
  const auto limit = std::min<std::int64_t>(t_max, static_cast<std::int64_t>(factors.size()));
  return product_limit([&](std::int64_t t) { return factors[static_cast<std::size_t>(t - 1)].matrix(); }, limit,
                       rank_one_tol);
}

ProductLimit product_limit(const RowSumMatrix& fixed, std::int64_t t_max, double rank_one_tol) {
  return product_limit([&](std::int64_t) { return fixed.matrix(); }, t_max, rank_one_tol);
}

}  // namespace consensus
