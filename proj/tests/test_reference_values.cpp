// Library results against values computed independently by
// oracles/derive_values.py (exact rationals, mpmath, scipy) and frozen in
// oracles/expected_values.json.

#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "consensus/conditions.hpp"
#include "consensus/dynamics.hpp"
#include "consensus/matrix.hpp"
#include "consensus/noise.hpp"
#include "consensus/philox.hpp"
#include "consensus/stats.hpp"

using namespace consensus;
using nlohmann::json;

namespace {

const json& oracle() {
  static const json doc = [] {
    std::ifstream in(CONSENSUS_ORACLE_FILE);
    REQUIRE(in.good());
    return json::parse(in);
  }();
  return doc;
}

double ref(const char* key) { return oracle().at(key).get<double>(); }

std::vector<double> ref_vec(const char* key) { return oracle().at(key).get<std::vector<double>>(); }

void check_matrix(const Matrix& got, const char* key, double tol) {
  const auto want = oracle().at(key).get<std::vector<std::vector<double>>>();
  REQUIRE(got.rows() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    REQUIRE(got.cols() == want[i].size());
    for (std::size_t j = 0; j < want[i].size(); ++j) {
      if (tol == 0.0) {
        CHECK(got(i, j) == want[i][j]);
      } else {
        CHECK(got(i, j) == doctest::Approx(want[i][j]).epsilon(tol));
      }
    }
  }
}

const StochasticMatrix kExample{{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.5, 0.5, 0.0}, {0.0, 0.25, 0.75}};
const StochasticMatrix kTwo{{0.6, 0.4}, {0.3, 0.7}};

}  // namespace

TEST_CASE("matrix functionals") {
  CHECK(matrix_inf_norm(Matrix{{-0.5, 0.25}, {0.1, 0.2}}) == doctest::Approx(ref("matrix_inf_norm_mixed_signs")));
  CHECK(weighted_inf_norm(StateVector{4, -6}, WeightVector({2, 2})) == ref("weighted_inf_norm_4_m6_over_2_2"));
  CHECK(contraction_factor(kExample, {1.0 / 3, 0.5, 0.75}) ==
        doctest::Approx(ref("contraction_example_thirds")).epsilon(1e-15));
  CHECK(contraction_factor(kExample, {0.3, 0.5, 0.7}) ==
        doctest::Approx(ref("contraction_example_target_rates")).epsilon(1e-15));
  CHECK(dobrushin(kExample) == doctest::Approx(ref("dobrushin_example")).epsilon(1e-15));
  CHECK(dobrushin(Matrix::identity(2)) == ref("dobrushin_identity2"));
}

TEST_CASE("averaging map and its product limit") {
  const RowSumMatrix b = averaging_map(kTwo, {0.4, 0.2});
  check_matrix(b.matrix(), "averaging_map_2x2", 1e-15);

  const RowSumMatrix b3 = averaging_map(kExample, {0.3, 0.5, 0.7});
  check_matrix(b3.matrix(), "averaging_map_example", 1e-15);
  const ProductLimit lim = product_limit(b3, 10000, 1e-10);
  REQUIRE(lim.converged);
  const auto nu = lim.nu();
  const auto want = ref_vec("product_limit_example_nu");
  for (std::size_t i = 0; i < 3; ++i) CHECK(nu[i] == doctest::Approx(want[i]).epsilon(1e-9));

  const ProductLimit avg = product_limit(averaging_map(StochasticMatrix{{0.7, 0.3}, {0.2, 0.8}}, {0.2, 0.5}),
                                         10000, 1e-10);
  REQUIRE(avg.converged);
  const auto want2 = ref_vec("average_consensus_nu");
  for (std::size_t i = 0; i < 2; ++i) CHECK(avg.nu()[i] == doctest::Approx(want2[i]).epsilon(1e-9));
}

TEST_CASE("single steps") {
  const auto base = step_base(kExample, {0.3, 0.5, 0.7}, 1.0, StateVector{0, 0, 0});
  const auto want = ref_vec("step_base_example_from_zero");
  for (std::size_t i = 0; i < 3; ++i) CHECK(base[i] == doctest::Approx(want[i]).epsilon(1e-15));

  const StochasticMatrix one{{1.0}};
  CHECK(step_noisy(one, {0.5}, 2.0, StateVector{0.1}, StateVector{1.0})[0] ==
        doctest::Approx(ref("step_noisy_scalar")).epsilon(1e-15));
  CHECK(step_pure_noise(one, {0.5}, StateVector{1.0}, StateVector{0.0})[0] == ref("step_pure_noise_scalar"));
  CHECK(step_nonlinear(one, LearningFunction::scaled_tanh(0.5), 1.0, StateVector{0.0}, StateVector{0.0})[0] ==
        doctest::Approx(ref("step_nonlinear_tanh_half")).epsilon(1e-15));
  const auto avg = step_average(kTwo, {0.4, 0.2}, StateVector{0, 0}, StateVector{1, 0});
  const auto want_avg = ref_vec("step_average_2x2_x10");
  CHECK(avg[0] == doctest::Approx(want_avg[0]).epsilon(1e-15));
  CHECK(avg[1] == doctest::Approx(want_avg[1]).epsilon(1e-15));
}

TEST_CASE("rate conditions") {
  const ConditionReport r = check_base_rates(kExample, {0.7, 0.5, 0.7});
  CHECK_FALSE(r.satisfied);
  CHECK(r.witness.at("agent").get<int>() == oracle().at("base_rates_first_violation").get<int>());
  const ConditionReport avg = check_average_rates(kTwo, {0.4, 0.2});
  CHECK(avg.satisfied);
  const auto bounds = ref_vec("average_rate_bounds_2x2");
  CHECK(avg.measurements.at("upper_bounds")[0].get<double>() == doctest::Approx(bounds[0]));
  CHECK(avg.measurements.at("upper_bounds")[1].get<double>() == doctest::Approx(bounds[1]));
  CHECK(nonlinear_rho(LearningFunction("interval", [](double u) { return 0.3 * u; },
                                       [](double) { return 0.3; }, 0.2, 0.4),
                      StochasticMatrix{{0.3, 0.7}, {0.7, 0.3}}) ==
        doctest::Approx(ref("nonlinear_rho_interval")).epsilon(1e-15));
}

TEST_CASE("product and summability conditions") {
  std::vector<double> harmonic;
  for (int t = 1; t <= 999; ++t) harmonic.push_back(static_cast<double>(t) / (t + 1));
  const ConditionReport p = check_product_to_zero(harmonic, 999);
  CHECK(p.measurements.at("partial_product").get<double>() ==
        doctest::Approx(ref("product_harmonic_999")).epsilon(1e-13));
  CHECK(p.satisfied);

  std::vector<double> expo;
  for (int t = 1; t <= 10000; ++t) expo.push_back(std::exp(-1.0 / (static_cast<double>(t) * t)));
  const ConditionReport q = check_product_to_zero(expo, 10000);
  CHECK(q.measurements.at("partial_product").get<double>() ==
        doctest::Approx(ref("product_exp_inverse_square_1e4")).epsilon(1e-12));
  CHECK_FALSE(q.satisfied);

  const ConditionReport h = check_bounded_product_sums(harmonic, 999);
  CHECK(h.measurements.at("sup").get<double>() == doctest::Approx(ref("product_sums_harmonic_sup_999")).epsilon(1e-12));
  CHECK_FALSE(h.satisfied);
  const ConditionReport half = check_bounded_product_sums(std::vector<double>(60, 0.5), 60);
  CHECK(half.measurements.at("sup").get<double>() == doctest::Approx(ref("product_sums_half_sup_60")).epsilon(1e-15));
  CHECK(half.satisfied);

  // Rates whose consecutive differences are +-1/(10t), then +-1/t^2.
  auto alternating = [](std::int64_t horizon, double start, auto step) {
    std::vector<LearningRates> table;
    double e = start;
    for (std::int64_t t = 1; t <= horizon; ++t) {
      e += (t % 2 ? 1.0 : -1.0) * step(static_cast<double>(t));
      table.push_back(LearningRates{e});
    }
    return RatesSchedule::table(std::move(table));
  };
  const auto a = MatrixSchedule::constant(StochasticMatrix{{1.0}});
  const ConditionReport b = check_summable_variation(a, alternating(1000, 0.5, [](double t) { return 0.1 / t; }), 1000);
  CHECK(b.measurements.at("partial_sum").get<double>() ==
        doctest::Approx(ref("variation_oscillator_sum_1e3")).epsilon(1e-11));
  CHECK_FALSE(b.satisfied);

  const RatesSchedule inverse_square = alternating(10000, 0.0, [](double t) { return 1.0 / (t * t); });
  const ConditionReport c = check_summable_variation(a, inverse_square, 10000);
  CHECK(c.measurements.at("partial_sum").get<double>() ==
        doctest::Approx(ref("variation_inverse_square_sum_1e4")).epsilon(1e-10));
  CHECK(c.satisfied);
}

TEST_CASE("oscillating learning rate") {
  const EpsilonOscillator::Trace tr = EpsilonOscillator{}.trace(1000000);
  const auto flips = oracle().at("oscillator_flips_first3").get<std::vector<std::int64_t>>();
  REQUIRE(tr.flips.size() >= 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(tr.flips[k] == flips[k]);
  CHECK(*std::min_element(tr.eps.begin(), tr.eps.end()) == ref("oscillator_min_1e6"));
  CHECK(*std::max_element(tr.eps.begin(), tr.eps.end()) == ref("oscillator_max_1e6"));
  CHECK(*std::min_element(tr.eps.begin(), tr.eps.end()) < 0.26);
  CHECK(*std::max_element(tr.eps.begin(), tr.eps.end()) > 0.74);
  for (const auto& [t, v] : oracle().at("oscillator_checkpoints").items()) {
    CHECK(tr.eps[static_cast<std::size_t>(std::stoll(t) - 1)] == v.get<double>());
  }
}

TEST_CASE("sample statistics") {
  EmpiricalSample s{Matrix{{0, 0}, {2, 2}}, 0, false};
  check_matrix(empirical_moments(s).covariance, "moments_two_points_cov", 0);
  CHECK(wasserstein1_1d(std::vector<double>{0, 1}, std::vector<double>{0, 3}) == ref("w1_0_1_vs_0_3"));
  CHECK(wasserstein1_1d(std::vector<double>{0, 1, 2}, std::vector<double>{0.5, 3}) ==
        doctest::Approx(ref("w1_unequal_sizes")).epsilon(1e-14));
  CHECK(ks_statistic(std::vector<double>{0.0}, [](double x) { return normal_cdf(x); }) ==
        ref("ks_single_point_median"));
  CHECK(ks_critical(10000, 0.01) == doctest::Approx(ref("ks_critical_1e4_alpha_001")).epsilon(1e-3));
  CHECK(rank_one_score(Matrix{{1, 0.99}, {0.99, 1}}) == doctest::Approx(ref("rank_one_score_099")).epsilon(1e-12));

  double sup = 0.0;
  for (int k = 0; k <= 500000; ++k) {
    const double x = k * 1e-5;
    sup = std::max(sup, std::abs(normal_cdf(x) - cauchy_cdf(x)));
  }
  CHECK(sup == doctest::Approx(ref("sup_normal_vs_cauchy_cdf")).epsilon(1e-8));
}

TEST_CASE("limit covariance") {
  const RowSumMatrix c(Matrix{{0.4, 0.6}, {0.4, 0.6}});
  check_matrix(clt_target(c, {0.4, 0.2}, Matrix::identity(2)), "clt_target_2x2_identity", 1e-14);
  const ProductLimit lim =
      product_limit(averaging_map(StochasticMatrix{{0.7, 0.3}, {0.2, 0.8}}, {0.2, 0.5}), 10000, 1e-12);
  check_matrix(clt_target(RowSumMatrix(lim.limit), {0.2, 0.5}, Matrix::identity(2)), "clt_target_average_consensus",
               1e-10);
}

TEST_CASE("trajectory analyses") {
  ModelSpec base;
  base.family = Family::kBase;
  base.n = 3;
  base.schedule_a = MatrixSchedule::constant(kExample);
  base.schedule_e = RatesSchedule::constant({0.3, 0.5, 0.7});
  base.sigma_bar = 1.0;
  base.noise = NoiseSpec::zero(3);
  base.x0 = {0, 0, 0};
  const auto t = consensus_time(simulate(base, 200, std::uint64_t{0}), 1.0, 1e-6);
  REQUIRE(t.has_value());
  CHECK(*t <= oracle().at("consensus_time_bound_rho07").get<std::int64_t>());

  ModelSpec sign;
  sign.family = Family::kNonlinear;
  sign.n = 1;
  sign.schedule_a = MatrixSchedule::constant(StochasticMatrix{{1.0}});
  sign.schedule_e = RatesSchedule::constant({0.4});
  sign.sigma_bar = 1.0;
  sign.feedback = SignFeedback{};
  sign.noise = NoiseSpec::zero(1);
  sign.x0 = {2.0};
  const Trajectory traj = simulate(sign, 60, std::uint64_t{0});
  CHECK(detect_periodicity(traj, 4, 1e-12) == 2);
  const auto want = ref_vec("signum_tail_values");
  std::vector<double> tail = {traj.states[59][0] - 1.0, traj.states[60][0] - 1.0};
  std::sort(tail.begin(), tail.end());
  CHECK(tail[0] == doctest::Approx(want[0]).epsilon(1e-12));
  CHECK(tail[1] == doctest::Approx(want[1]).epsilon(1e-12));
}

TEST_CASE("cauchy scale after finitely many steps") {
  CHECK(cauchy_scale_after(std::vector<double>(200, 0.5)) == ref("cauchy_scale_half_200"));
  CHECK(cauchy_scale_after(std::vector<double>(3, 0.5)) == ref("cauchy_scale_half_3"));
}

TEST_CASE("philox known answers") {
  for (const json& k : oracle().at("philox_kat")) {
    const auto c = k.at("ctr").get<std::vector<std::uint32_t>>();
    const auto key = k.at("key").get<std::vector<std::uint32_t>>();
    const auto out = k.at("out").get<std::vector<std::uint32_t>>();
    const PhiloxCounter got = philox4x32_10({c[0], c[1], c[2], c[3]}, {key[0], key[1]});
    for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == out[i]);
  }
}
