#include "consensus/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace consensus {

using nlohmann::json;

void to_json(json& j, const ConditionReport& r) {
  j = json{{"name", r.name},
           {"satisfied", r.satisfied},
           {"advisory", r.advisory},
           {"measurements", r.measurements},
           {"witness", r.witness}};
}

namespace {

void require_horizon(std::span<const double> rhos, std::int64_t horizon) {
  if (horizon < 1) throw InvalidArgument("horizon must be at least 1");
  if (static_cast<std::size_t>(horizon) > rhos.size()) {
    throw DimensionMismatch("need " + std::to_string(horizon) + " contraction factors, got " +
                            std::to_string(rhos.size()));
  }
}

// Least-squares slope of y against x.
double slope(std::span<const double> x, std::span<const double> y) {
  const auto k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

double weighted_matrix_norm(const Matrix& b, const WeightVector& beta) {
  if (!b.square() || b.rows() != beta.size()) throw DimensionMismatch("weights and matrix differ in size");
  double best = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < b.cols(); ++j) s += std::abs(b(i, j)) * beta[j];
    best = std::max(best, s / beta[i]);
  }
  return best;
}

ConditionReport check_base_rates(const StochasticMatrix& a, const LearningRates& eps,
                                 const std::optional<WeightCertificate>& certificate) {
  const std::size_t n = a.size();
  if (eps.size() != n) throw DimensionMismatch("learning rates and matrix differ in size");
  ConditionReport r;
  r.name = "base_rates";
  const double rho = contraction_factor(a, eps);
  r.measurements["contraction_factor"] = rho;

  r.satisfied = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eps[i] > 0.0 && eps[i] < 2.0 * a(i, i))) {
      r.satisfied = false;
      r.witness = json{{"agent", i}, {"epsilon", eps[i]}, {"a_ii", a(i, i)}, {"upper", 2.0 * a(i, i)}};
      break;
    }
  }

  if (certificate) {
    const WeightVector& beta = certificate->beta;
    const double delta = certificate->delta;
    if (beta.size() != n) throw DimensionMismatch("certificate weights differ in size from the matrix");
    for (std::size_t i = 0; i < n; ++i) {
      double ab = 0.0;
      for (std::size_t j = 0; j < n; ++j) ab += a(i, j) * beta[j];
      if (ab > delta * beta[i] * (1.0 + 1e-12)) {
        throw InconsistentDeclaration("weight certificate fails at row " + std::to_string(i) + ": (A beta)_i = " +
                                      std::to_string(ab) + " > delta beta_i = " + std::to_string(delta * beta[i]));
      }
    }
    double relaxed = 0.0;
    for (std::size_t i = 0; i < n; ++i) relaxed = std::max(relaxed, delta - (a(i, i) - std::abs(a(i, i) - eps[i])));
    const double weighted = weighted_matrix_norm(a.matrix() - eps.as_diagonal(), beta);
    r.measurements["certificate_delta"] = delta;
    r.measurements["relaxed_factor"] = relaxed;
    r.measurements["weighted_factor"] = weighted;
    if (!r.satisfied && relaxed < 1.0) {
      r.satisfied = true;
      r.witness = nullptr;
    }
  }
  return r;
}

ConditionReport check_average_rates(const StochasticMatrix& a, const LearningRates& eps, RateBound mode) {
  const std::size_t n = a.size();
  if (eps.size() != n) throw DimensionMismatch("learning rates and matrix differ in size");
  const double scale =
      n == 1 ? std::numeric_limits<double>::infinity() : static_cast<double>(n) / static_cast<double>(n - 1);
  ConditionReport r;
  r.name = "average_rates";
  r.measurements["mode"] = mode == RateBound::kStrict ? "strict" : "inclusive";
  r.measurements["dobrushin"] = dobrushin(averaging_map(a, eps).matrix());
  json uppers = json::array();
  for (std::size_t i = 0; i < n; ++i) uppers.push_back(number_or_null(scale * a(i, i)));
  r.measurements["upper_bounds"] = uppers;
  r.satisfied = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double upper = scale * a(i, i);
    const bool ok = mode == RateBound::kStrict ? (eps[i] > 0.0 && eps[i] < upper) : (eps[i] >= 0.0 && eps[i] <= upper);
    if (!ok) {
      r.satisfied = false;
      r.witness = json{{"agent", i}, {"epsilon", eps[i]}, {"a_ii", a(i, i)}, {"upper", number_or_null(upper)}};
      break;
    }
  }
  return r;
}

std::vector<double> partial_products(std::span<const double> rhos) {
  std::vector<double> out;
  out.reserve(rhos.size());
  double hi = 1.0, lo = 0.0;
  for (double rho : rhos) {
    const double p = hi * rho;
    const double e = std::fma(hi, rho, -p);
    const double l = lo * rho + e;
    hi = p + l;
    lo = l - (hi - p);
    out.push_back(hi + lo);
  }
  return out;
}

ConditionReport check_product_to_zero(std::span<const double> rhos, std::int64_t horizon, double product_tol) {
  require_horizon(rhos, horizon);
  const auto T = static_cast<std::size_t>(horizon);
  const std::vector<double> products = partial_products(rhos.first(T));
  const double final_product = products.back();

  ConditionReport r;
  r.name = "product_to_zero";
  r.advisory = true;
  r.measurements["horizon"] = horizon;
  r.measurements["product_tol"] = product_tol;
  r.measurements["partial_product"] = final_product;
  r.measurements["zero_factors"] = std::count(rhos.begin(), rhos.begin() + horizon, 0.0);

  // Trend of log P_t over the trailing half, against t and against log t.
  std::vector<double> ts, logts, logps;
  for (std::size_t t = T / 2 + 1; t <= T; ++t) {
    const double p = products[t - 1];
    if (!(p > 0.0)) continue;
    ts.push_back(static_cast<double>(t));
    logts.push_back(std::log(static_cast<double>(t)));
    logps.push_back(std::log(p));
  }
  double per_step = std::numeric_limits<double>::quiet_NaN();
  double per_log_t = std::numeric_limits<double>::quiet_NaN();
  if (ts.size() >= 2) {
    per_step = slope(ts, logps);
    per_log_t = slope(logts, logps);
  }
  r.measurements["log_slope_per_step"] = number_or_null(per_step);
  r.measurements["log_slope_per_log_t"] = number_or_null(per_log_t);

  std::string trend;
  if (final_product == 0.0) {
    trend = "vanished";
  } else if (final_product < product_tol || per_log_t <= -0.05) {
    trend = "decaying";
  } else {
    trend = "stalled";
  }
  r.measurements["trend"] = trend;
  r.satisfied = trend != "stalled";
  if (!r.satisfied) {
    r.witness = json{{"partial_product", final_product}, {"log_slope_per_log_t", number_or_null(per_log_t)}};
  }
  return r;
}

ConditionReport check_bounded_product_sums(std::span<const double> rhos, std::int64_t horizon, double bound,
                                           double growth_tol) {
  require_horizon(rhos, horizon);
  if (horizon < 2) throw InvalidArgument("growth of the product sums needs a horizon of at least 2");
  const auto T = static_cast<std::size_t>(horizon);
  double s = 0.0, sup_head = 0.0, sup_tail = 0.0;
  std::size_t argmax = 1;
  double sup = -1.0;
  for (std::size_t t = 1; t <= T; ++t) {
    s = rhos[t - 1] * (1.0 + s);
    if (t <= T / 2) {
      sup_head = std::max(sup_head, s);
    } else {
      sup_tail = std::max(sup_tail, s);
    }
    if (s > sup) {
      sup = s;
      argmax = t;
    }
  }
  const double growth = sup_tail - sup_head;

  ConditionReport r;
  r.name = "bounded_product_sums";
  r.advisory = true;
  r.measurements["horizon"] = horizon;
  r.measurements["sup"] = number_or_null(sup);
  r.measurements["argmax_t"] = argmax;
  r.measurements["final"] = number_or_null(s);
  r.measurements["tail_growth"] = number_or_null(growth);
  r.measurements["bound"] = bound;
  r.measurements["growth_tol"] = growth_tol;
  const bool bounded = sup < bound;
  const bool settled = growth <= growth_tol * sup;
  r.satisfied = bounded && settled;
  if (!bounded) {
    r.witness = json{{"reason", "exceeds bound"}, {"t", argmax}, {"value", number_or_null(sup)}};
  } else if (!settled) {
    r.witness = json{{"reason", "still growing"}, {"tail_growth", growth}, {"sup", sup}};
  }
  return r;
}

ConditionReport check_summable_variation(const MatrixSchedule& schedule_a, const RatesSchedule& schedule_e,
                                         std::int64_t horizon, double summability_tol) {
  if (horizon < 2) throw InvalidArgument("variation sums need a horizon of at least 2");
  StochasticMatrix prev_a = schedule_a.at(1);
  LearningRates prev_e = schedule_e.at(1);
  double head = 0.0, tail = 0.0, largest = 0.0;
  std::int64_t largest_t = 0;
  for (std::int64_t t = 2; t <= horizon; ++t) {
    StochasticMatrix a = schedule_a.at(t);
    LearningRates e = schedule_e.at(t);
    if (a.size() != prev_a.size() || e.size() != prev_e.size()) throw ScheduleError(t, "dimension changed");
    double de = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) de = std::max(de, std::abs(e[i] - prev_e[i]));
    const double term = matrix_inf_norm(a.matrix() - prev_a.matrix()) + de;
    if (t <= horizon / 2) {
      head += term;
    } else {
      tail += term;
      if (term > largest) {
        largest = term;
        largest_t = t;
      }
    }
    prev_a = std::move(a);
    prev_e = std::move(e);
  }

  ConditionReport r;
  r.name = "summable_variation";
  r.advisory = true;
  r.measurements["horizon"] = horizon;
  r.measurements["partial_sum"] = head + tail;
  r.measurements["tail_sum"] = tail;
  r.measurements["summability_tol"] = summability_tol;
  r.satisfied = tail < summability_tol;
  if (!r.satisfied) r.witness = json{{"tail_sum", tail}, {"largest_tail_term", largest}, {"at_t", largest_t}};
  return r;
}

namespace {

void audit_declaration(const LearningFunction& f, const DerivativeGrid& grid) {
  const double lo = std::max(grid.lo, f.domain_lo());
  const double hi = std::min(grid.hi, f.domain_hi());
  if (!(lo <= hi)) throw InvalidArgument("derivative grid does not meet the domain of " + f.name());
  if (grid.points < 2) throw InvalidArgument("derivative grid needs at least two points");
  const double slack_inf = 1e-9 * std::max(1.0, std::abs(f.deriv_inf()));
  const double slack_sup = 1e-9 * std::max(1.0, std::abs(f.deriv_sup()));
  for (int k = 0; k < grid.points; ++k) {
    const double u = lo + (hi - lo) * k / (grid.points - 1);
    const double d = f.derivative(u);
    if (d < f.deriv_inf() - slack_inf || d > f.deriv_sup() + slack_sup) {
      throw InconsistentDeclaration(f.name() + ": f'(" + std::to_string(u) + ") = " + std::to_string(d) +
                                    " lies outside the declared [" + std::to_string(f.deriv_inf()) + ", " +
                                    std::to_string(f.deriv_sup()) + "]");
    }
    const double h = 1e-5 * std::max(1.0, std::abs(u));
    const double fd = (f(u + h) - f(u - h)) / (2.0 * h);
    if (std::abs(fd - d) > 1e-5 * std::max(1.0, std::abs(d))) {
      throw InconsistentDeclaration(f.name() + ": declared derivative " + std::to_string(d) + " at " +
                                    std::to_string(u) + " disagrees with the finite difference " + std::to_string(fd));
    }
  }
}

}  // namespace

ConditionReport check_nonlinear_bounds(std::span<const LearningFunction> per_agent, const MatrixSchedule& schedule_a,
                                       std::int64_t horizon, const DerivativeGrid& grid) {
  if (horizon < 1) throw InvalidArgument("horizon must be at least 1");
  if (per_agent.empty()) throw InvalidArgument("no learning functions given");
  for (const LearningFunction& f : per_agent) audit_declaration(f, grid);

  const std::int64_t last = schedule_a.is_constant() ? 1 : horizon;
  const std::size_t n = schedule_a.at(1).size();
  if (per_agent.size() != 1 && per_agent.size() != n) throw DimensionMismatch("need one learning function or n");
  std::vector<double> min_diag(n, std::numeric_limits<double>::infinity());
  double rho_max = 0.0;
  for (std::int64_t t = 1; t <= last; ++t) {
    const StochasticMatrix a = schedule_a.at(t);
    if (a.size() != n) throw ScheduleError(t, "dimension changed");
    for (std::size_t i = 0; i < n; ++i) min_diag[i] = std::min(min_diag[i], a(i, i));
    rho_max = std::max(rho_max, nonlinear_rho(per_agent, a));
  }

  ConditionReport r;
  r.name = "nonlinear_bounds";
  r.advisory = !schedule_a.is_constant();
  r.measurements["horizon"] = horizon;
  r.measurements["min_diagonal"] = *std::min_element(min_diag.begin(), min_diag.end());
  r.measurements["contraction_factor"] = rho_max;
  r.satisfied = true;
  for (std::size_t i = 0; i < n; ++i) {
    const LearningFunction& f = per_agent.size() == 1 ? per_agent[0] : per_agent[i];
    r.measurements["deriv_inf"] = f.deriv_inf();
    r.measurements["deriv_sup"] = f.deriv_sup();
    if (!(f.deriv_inf() > 0.0)) {
      r.satisfied = false;
      r.witness = json{{"agent", i}, {"reason", "derivative infimum is not positive"}, {"deriv_inf", f.deriv_inf()}};
      break;
    }
    if (!(f.deriv_sup() < 2.0 * min_diag[i])) {
      r.satisfied = false;
      r.witness = json{{"agent", i},
                       {"reason", "derivative supremum reaches twice the self-weight"},
                       {"deriv_sup", f.deriv_sup()},
                       {"upper", 2.0 * min_diag[i]}};
      break;
    }
  }
  if (per_agent.size() != 1) {
    r.measurements.erase("deriv_inf");
    r.measurements.erase("deriv_sup");
  }
  return r;
}

ConditionReport check_nonlinear_bounds(const LearningFunction& f, const MatrixSchedule& schedule_a,
                                       std::int64_t horizon, const DerivativeGrid& grid) {
  return check_nonlinear_bounds(std::span<const LearningFunction>(&f, 1), schedule_a, horizon, grid);
}

}  // namespace consensus
