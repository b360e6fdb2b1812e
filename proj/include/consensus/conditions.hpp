#ifndef CONSENSUS_CONDITIONS_HPP_
#define CONSENSUS_CONDITIONS_HPP_

// Numerical checks of the hypotheses behind the convergence results, so a
// scenario can be certified (or deliberately de-certified) before simulating.
//
// Asymptotic conditions cannot be decided from a finite horizon. Their checks
// report the measured quantities together with an advisory verdict that names
// the horizon and tolerances it was drawn from.

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "consensus/dynamics.hpp"
#include "consensus/matrix.hpp"

namespace consensus {

struct ConditionReport {
  std::string name;
  bool satisfied = false;
  bool advisory = false;             ///< verdict extrapolated from a finite horizon
  nlohmann::json measurements = nlohmann::json::object();
  nlohmann::json witness;            ///< why the condition fails; null when satisfied
};

void to_json(nlohmann::json& j, const ConditionReport& r);

inline constexpr double kProductTol = 1e-6;
inline constexpr double kSummabilityTol = 1e-3;
inline constexpr double kProductSumBound = 1e6;
inline constexpr double kGrowthTol = 1e-2;

/// Optional weighted-norm certificate: positive beta with A beta <= delta beta.
struct WeightCertificate {
  WeightVector beta;
  double delta = 1.0;
};

/// max_i sum_j |b_ij| beta_j / beta_i, the operator norm induced by the weighted infinity norm.
double weighted_matrix_norm(const Matrix& b, const WeightVector& beta);

/// 0 < eps_i < 2 a_ii for all i. With a certificate, also reports whether
/// A beta <= delta beta holds and whether the relaxed bound
/// |a_ii - eps_i| + delta - a_ii < 1 does; the relaxed bound can then satisfy the check.
ConditionReport check_base_rates(const StochasticMatrix& a, const LearningRates& eps,
                                 const std::optional<WeightCertificate>& certificate = std::nullopt);

enum class RateBound {
  kStrict,     ///< 0 < eps_i < n/(n-1) a_ii (fixed A, E)
  kInclusive,  ///< 0 <= eps_i <= n/(n-1) a_ii (time-varying)
};

ConditionReport check_average_rates(const StochasticMatrix& a, const LearningRates& eps,
                                    RateBound mode = RateBound::kStrict);

/// Partial product of rho_1..rho_T with a trend classification from the trailing
/// half of the horizon. Satisfied when the product is below `product_tol`, or when
/// log P_t is still falling against log t (slope <= -0.05).
ConditionReport check_product_to_zero(std::span<const double> rhos, std::int64_t horizon,
                                      double product_tol = kProductTol);

/// S_t = rho_t (1 + S_{t-1}), i.e. rho_t + rho_t rho_{t-1} + ... + rho_t...rho_1.
/// Satisfied when sup S_t < bound and the sup over the second half of the horizon
/// exceeds the sup over the first half by at most growth_tol * sup.
ConditionReport check_bounded_product_sums(std::span<const double> rhos, std::int64_t horizon,
                                           double bound = kProductSumBound, double growth_tol = kGrowthTol);

/// Partial sums of |A_t - A_{t-1}|_inf + |E_t - E_{t-1}|_inf for t = 2..T. Satisfied
/// when the tail (t > T/2) is below `summability_tol`.
ConditionReport check_summable_variation(const MatrixSchedule& schedule_a, const RatesSchedule& schedule_e,
                                         std::int64_t horizon, double summability_tol = kSummabilityTol);

struct DerivativeGrid {
  double lo = -10.0;
  double hi = 10.0;
  int points = 1001;
};

/// 0 < deriv_inf and deriv_sup < 2 min_{t<=T, i} (a_ii)_t, after auditing the declared
/// bounds against sampled derivatives (and the derivative against central finite
/// differences) on the grid intersected with the function's domain.
/// Throws InconsistentDeclaration when the audit fails.
ConditionReport check_nonlinear_bounds(const LearningFunction& f, const MatrixSchedule& schedule_a,
                                       std::int64_t horizon, const DerivativeGrid& grid = {});
ConditionReport check_nonlinear_bounds(std::span<const LearningFunction> per_agent,
                                       const MatrixSchedule& schedule_a, std::int64_t horizon,
                                       const DerivativeGrid& grid = {});

/// Running product with a double-double accumulator; returns P_1..P_T.
std::vector<double> partial_products(std::span<const double> rhos);

}  // namespace consensus

#endif  // CONSENSUS_CONDITIONS_HPP_
