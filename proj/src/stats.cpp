#include "consensus/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace consensus {

std::vector<double> EmpiricalSample::column(std::size_t j) const {
  if (j >= n()) throw InvalidArgument("column index out of range");
  std::vector<double> out(m());
  for (std::size_t r = 0; r < m(); ++r) out[r] = points(r, j);
  return out;
}

EmpiricalSample EmpiricalSample::terminal(const EnsembleSample& e) { return {e.terminal, e.horizon, false}; }

EmpiricalSample EmpiricalSample::at(const EnsembleSample& e, std::int64_t t) {
  if (t == e.horizon) return terminal(e);
  const auto it = e.snapshots.find(t);
  if (it == e.snapshots.end()) throw InvalidArgument("no snapshot recorded at t = " + std::to_string(t));
  return {it->second, t, false};
}

EmpiricalSample EmpiricalSample::centered_scaled_copy() const {
  if (t_final <= 0) throw InvalidArgument("centering and scaling needs t_final >= 1");
  const Moments mom = empirical_moments(*this);
  EmpiricalSample out{points, t_final, true};
  const double scale = 1.0 / std::sqrt(static_cast<double>(t_final));
  for (std::size_t r = 0; r < m(); ++r) {
    for (std::size_t j = 0; j < n(); ++j) out.points(r, j) = (points(r, j) - mom.mean[j]) * scale;
  }
  return out;
}

Moments empirical_moments(const EmpiricalSample& s) {
  const std::size_t m = s.m(), n = s.n();
  if (m < 2) throw InsufficientSample("moments need at least two points, got " + std::to_string(m));
  Moments out{std::vector<double>(n, 0.0), Matrix(n, n)};
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) out.mean[j] += s.points(r, j);
  }
  for (double& v : out.mean) v /= static_cast<double>(m);
  std::vector<double> d(n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) d[j] = s.points(r, j) - out.mean[j];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) out.covariance(i, j) += d[i] * d[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      out.covariance(i, j) /= static_cast<double>(m - 1);
      out.covariance(j, i) = out.covariance(i, j);
    }
  }
  return out;
}

double wasserstein1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("Wasserstein distance of an empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
    return s / static_cast<double>(x.size());
  }
  // Integrate |F_x - F_y| between consecutive points of the merged sample.
  const double wx = 1.0 / static_cast<double>(x.size());
  const double wy = 1.0 / static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double fx = 0.0, fy = 0.0, total = 0.0;
  double prev = std::min(x.front(), y.front());
  while (i < x.size() || j < y.size()) {
    const double next = j == y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    total += std::abs(fx - fy) * (next - prev);
    while (i < x.size() && x[i] == next) {
      fx += wx;
      ++i;
    }
    while (j < y.size() && y[j] == next) {
      fy += wy;
      ++j;
    }
    prev = next;
  }
  return total;
}

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("KS statistic of an empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const auto m = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, static_cast<double>(i + 1) / m - f, f - static_cast<double>(i) / m});
  }
  return d;
}

double ks_critical(std::size_t m, double alpha) {
  if (m == 0) throw InvalidArgument("KS critical value needs m >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("significance level must lie in (0, 1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(m));
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

double cauchy_cdf(double x, double location, double scale) {
  return 0.5 + std::atan((x - location) / scale) / std::numbers::pi;
}

Matrix clt_target(const RowSumMatrix& c, const LearningRates& eps, const Matrix& sigma, double rank_one_tol) {
  const std::size_t n = c.size();
  if (eps.size() != n || sigma.rows() != n || sigma.cols() != n) {
    throw DimensionMismatch("limit matrix, rates and covariance differ in size");
  }
  const double spread = max_row_distance(c.matrix());
  if (spread > rank_one_tol) {
    throw StructureError("limit matrix is not rank one: rows differ by " + std::to_string(spread) + " in L1");
  }
  const Matrix ce = c.matrix() * eps.as_diagonal();
  return ce * sigma * ce.transpose();
}

std::vector<double> symmetric_eigenvalues(const Matrix& s) {
  if (!s.square()) throw DimensionMismatch("eigenvalues need a square matrix");
  const std::size_t n = s.rows();
  std::vector<double> ev;
  if (n == 1) {
    ev = {s(0, 0)};
  } else if (n == 2) {
    const double mid = 0.5 * (s(0, 0) + s(1, 1));
    const double r = std::hypot(0.5 * (s(0, 0) - s(1, 1)), s(0, 1));
    ev = {mid + r, mid - r};
  } else {
    Matrix a = s;
    for (int sweep = 0; sweep < 100; ++sweep) {
      double off = 0.0, total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          total += a(i, j) * a(i, j);
          if (i != j) off += a(i, j) * a(i, j);
        }
      }
      if (off <= 1e-30 * total || off == 0.0) break;
      for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          if (a(p, q) == 0.0) continue;
          const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
          const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          const double cs = 1.0 / std::sqrt(t * t + 1.0);
          const double sn = t * cs;
          for (std::size_t k = 0; k < n; ++k) {
            const double akp = a(k, p), akq = a(k, q);
            a(k, p) = cs * akp - sn * akq;
            a(k, q) = sn * akp + cs * akq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double apk = a(p, k), aqk = a(q, k);
            a(p, k) = cs * apk - sn * aqk;
            a(q, k) = sn * apk + cs * aqk;
          }
        }
      }
    }
    ev.resize(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  }
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

double rank_one_score(const Matrix& cov) {
  if (!cov.square()) throw DimensionMismatch("rank-one score needs a square matrix");
  for (std::size_t i = 0; i < cov.rows(); ++i) {
    for (std::size_t j = i + 1; j < cov.cols(); ++j) {
      if (std::abs(cov(i, j) - cov(j, i)) > 1e-9) throw InvalidArgument("rank-one score needs a symmetric matrix");
    }
  }
  if (cov.rows() < 2) return 0.0;
  const std::vector<double> ev = symmetric_eigenvalues(cov);
  if (!(ev[0] > 0.0)) return 0.0;
  return std::clamp(ev[1] / ev[0], 0.0, 1.0);
}

std::optional<std::int64_t> consensus_time(const Trajectory& traj, std::optional<double> target, double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("consensus tolerance must be positive");
  if (!traj.full()) throw InvalidArgument("consensus time needs the full state sequence");
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const StateVector& x = traj.states[t];
    double d = 0.0;
    if (target) {
      for (double v : x) d = std::max(d, std::abs(v - *target));
    } else {
      d = oscillation(x);
    }
    if (d <= tol) return static_cast<std::int64_t>(t);
  }
  return std::nullopt;
}

std::optional<std::int64_t> detect_periodicity(const Trajectory& traj, std::int64_t max_period, double tol) {
  if (!traj.full()) throw InvalidArgument("periodicity detection needs the full state sequence");
  if (max_period < 1) throw InvalidArgument("max_period must be at least 1");
  const auto len = static_cast<std::int64_t>(traj.states.size());
  if (len <= 3 * max_period) throw InvalidArgument("trajectory must be longer than 3 * max_period");
  const std::int64_t start = 2 * len / 3;
  for (std::int64_t p = 1; p <= max_period; ++p) {
    bool periodic = true;
    for (std::int64_t t = start; t + p < len && periodic; ++t) {
      const StateVector& x = traj.states[static_cast<std::size_t>(t)];
      const StateVector& y = traj.states[static_cast<std::size_t>(t + p)];
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(std::abs(x[i] - y[i]) <= tol)) {
          periodic = false;
          break;
        }
      }
    }
    if (periodic) return p;
  }
  return std::nullopt;
}

DriftReport distribution_drift(const std::map<std::int64_t, EmpiricalSample>& samples_at) {
  if (samples_at.size() < 2) throw InvalidArgument("drift needs at least two timestamps");
  DriftReport r;
  const std::size_t n = samples_at.begin()->second.n();
  const EmpiricalSample* prev = nullptr;
  for (const auto& [t, s] : samples_at) {
    if (s.n() != n) throw DimensionMismatch("samples differ in dimension");
    r.times.push_back(t);
    if (prev) {
      std::vector<double> d(n);
      for (std::size_t j = 0; j < n; ++j) d[j] = wasserstein1_1d(prev->column(j), s.column(j));
      r.max_distance.push_back(*std::max_element(d.begin(), d.end()));
      r.distances.push_back(std::move(d));
    }
    prev = &s;
  }
  const std::size_t k = r.max_distance.size();
  const std::size_t half = (k + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) r.leading_mean += r.max_distance[i] / static_cast<double>(half);
  for (std::size_t i = k - half; i < k; ++i) r.trailing_mean += r.max_distance[i] / static_cast<double>(half);
  r.non_convergent = r.trailing_mean > 0.0 && r.trailing_mean >= 0.5 * r.leading_mean;
  return r;
}

double cauchy_scale_after(std::span<const double> eps, double noise_scale) {
  if (!(noise_scale > 0.0)) throw InvalidArgument("Cauchy scale must be positive");
  double keep = 1.0;
  for (double e : eps) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("rates must lie in [0, 1]");
    keep *= 1.0 - e;
  }
  return (1.0 - keep) * noise_scale;
}

}  // namespace consensus
