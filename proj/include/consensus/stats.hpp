#ifndef CONSENSUS_STATS_HPP_
#define CONSENSUS_STATS_HPP_

// Empirical-distribution analysis of trajectories and ensembles: moments,
// one-dimensional Wasserstein and Kolmogorov-Smirnov distances, the Gaussian
// limit of the averaging model, rank-one detection, consensus and periodicity.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "consensus/dynamics.hpp"
#include "consensus/matrix.hpp"

namespace consensus {

/// m points in R^n, one per row.
struct EmpiricalSample {
  Matrix points;
  std::int64_t t_final = 0;
  bool centered_scaled = false;  ///< points are (X_t - mean) / sqrt(t)

  std::size_t m() const { return points.rows(); }
  std::size_t n() const { return points.cols(); }
  std::vector<double> column(std::size_t j) const;

  /// Terminal states of an ensemble.
  static EmpiricalSample terminal(const EnsembleSample& e);
  /// Snapshot of an ensemble at time t; throws InvalidArgument when not recorded.
  static EmpiricalSample at(const EnsembleSample& e, std::int64_t t);
  /// (X - sample mean) / sqrt(t_final).
  EmpiricalSample centered_scaled_copy() const;
};

struct Moments {
  std::vector<double> mean;
  Matrix covariance;  ///< unbiased (divides by m - 1)
};

/// Throws InsufficientSample when m < 2.
Moments empirical_moments(const EmpiricalSample& s);

/// W1 between the empirical measures of two 1-d samples (any order). Equal sizes
/// reduce to the mean |a_(i) - b_(i)| over order statistics; unequal sizes use the
/// integral of |F_a - F_b|. Throws InvalidArgument on an empty sample.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b);

/// sup |F_m - cdf| of the empirical CDF of `sample` (any order).
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);
/// Asymptotic one-sample critical value sqrt(-ln(alpha/2)/2)/sqrt(m).
double ks_critical(std::size_t m, double alpha = 0.01);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);
double cauchy_cdf(double x, double location = 0.0, double scale = 1.0);

/// Limit covariance of (X_t - E X_t)/sqrt(t) for X_t = B X_{t-1} + E gamma_t with
/// Cov(gamma) = sigma and B^t -> c: the matrix c E sigma E^T c^T. It is rank one
/// because c has identical rows. Throws StructureError when the rows of c differ
/// by more than `rank_one_tol` in L1.
Matrix clt_target(const RowSumMatrix& c, const LearningRates& eps, const Matrix& sigma,
                  double rank_one_tol = 1e-8);

/// Eigenvalues of a symmetric matrix, descending (cyclic Jacobi; closed form for n <= 2).
std::vector<double> symmetric_eigenvalues(const Matrix& s);

/// lambda_2 / lambda_1 of a symmetric PSD matrix (0 when lambda_1 = 0, and for n = 1).
/// Throws InvalidArgument when the input is asymmetric beyond 1e-9.
double rank_one_score(const Matrix& cov);

/// First t with |X_t - target 1|_inf <= tol, or with osc(X_t) <= tol when no target.
std::optional<std::int64_t> consensus_time(const Trajectory& traj, std::optional<double> target, double tol);

/// Smallest p <= max_period with |X_t - X_{t+p}|_inf <= tol over the trailing third.
/// Requires the full state sequence and T + 1 > 3 max_period.
std::optional<std::int64_t> detect_periodicity(const Trajectory& traj, std::int64_t max_period, double tol);

struct DriftReport {
  std::vector<std::int64_t> times;
  /// distances[k][j]: W1 of coordinate j between times[k] and times[k+1].
  std::vector<std::vector<double>> distances;
  std::vector<double> max_distance;  ///< per consecutive pair, max over coordinates
  double leading_mean = 0.0;         ///< mean of max_distance over the first half of the pairs
  double trailing_mean = 0.0;        ///< ... and over the second half
  bool non_convergent = false;       ///< trailing_mean > 0 and trailing_mean >= 0.5 leading_mean
};

/// Throws InvalidArgument with fewer than two timestamps or mismatched dimensions.
DriftReport distribution_drift(const std::map<std::int64_t, EmpiricalSample>& samples_at);

/// Scale after t steps of x <- (1 - eps_s) x + eps_s g_s with g_s ~ Cauchy(0, noise_scale)
/// and deterministic x_0: 1 - prod (1 - eps_s) times noise_scale (requires eps_s in [0, 1]).
double cauchy_scale_after(std::span<const double> eps, double noise_scale = 1.0);

}  // namespace consensus

#endif  // CONSENSUS_STATS_HPP_
