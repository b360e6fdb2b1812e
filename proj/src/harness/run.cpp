#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "consensus/harness.hpp"

namespace consensus::harness {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json optional_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

bool uses_learning_functions(const ModelSpec& m) {
  return m.family == Family::kNonlinear && m.feedback &&
         std::holds_alternative<std::vector<LearningFunction>>(*m.feedback);
}

bool constant_schedules(const ModelSpec& m) {
  return m.schedule_a.is_constant() && (uses_learning_functions(m) || m.schedule_e.is_constant());
}

// Times t in [2, T-1] where the first learning rate changes direction.
std::vector<std::int64_t> rate_turning_points(const ModelSpec& m, std::int64_t horizon, std::int64_t min_t) {
  std::vector<std::int64_t> out;
  if (horizon < 3) return out;
  double prev = m.schedule_e.at(1)[0];
  double cur = m.schedule_e.at(2)[0];
  for (std::int64_t t = 2; t < horizon; ++t) {
    const double next = m.schedule_e.at(t + 1)[0];
    if ((cur - prev) * (next - cur) < 0.0 && t >= min_t) out.push_back(t);
    prev = cur;
    cur = next;
  }
  return out;
}

// Shared state of one scenario run: the run-0 trajectory and the ensemble, built on demand.
class Runner {
 public:
  Runner(const Scenario& s, const RunOptions& options) : s_(s), options_(options) {}

  const ModelSpec& model() const {
    if (!s_.model) throw InvalidArgument("scenario has no model");
    return *s_.model;
  }

  const Trajectory& trajectory() {
    if (!trajectory_) {
      const auto start = Clock::now();
      trajectory_ = simulate(model(), s_.horizon, s_.master_seed);
      timing_["trajectory"] = seconds_since(start);
    }
    return *trajectory_;
  }

  const EnsembleSample& ensemble() {
    if (!ensemble_) {
      if (s_.ensemble == 0) throw InvalidArgument("analysis needs an ensemble, but the ensemble size is 0");
      std::set<std::int64_t> times(s_.snapshots.begin(), s_.snapshots.end());
      for (const AnalysisSpec& a : s_.analyses) {
        try {
          for (std::int64_t t : sample_times(a)) times.insert(t);
        } catch (const std::exception&) {
          // Reported when the analysis itself runs.
        }
      }
      EnsembleOptions eo;
      eo.snapshot_times.assign(times.begin(), times.end());
      eo.threads = options_.threads;
      const auto start = Clock::now();
      ensemble_ = simulate_ensemble(model(), s_.horizon, s_.ensemble, s_.master_seed, eo);
      timing_["ensemble"] = seconds_since(start);
    }
    return *ensemble_;
  }

  std::vector<double> rhos() {
    if (!rhos_) {
      if (s_.rho) {
        rhos_.emplace();
        for (std::int64_t t = 1; t <= s_.horizon; ++t) rhos_->push_back(s_.rho->at(t));
      } else {
        rhos_ = rho_sequence(model(), s_.horizon);
      }
    }
    return *rhos_;
  }

  double tol(const json& params, const std::string& key) const {
    if (params.contains(key)) return params.at(key).get<double>();
    return s_.tolerance(key);
  }

  std::vector<std::int64_t> sample_times(const AnalysisSpec& a) const {
    const json& p = a.params;
    if (a.op == "ensemble_mean_error") return p.value("times", std::vector<std::int64_t>{s_.horizon});
    if (a.op == "wasserstein_drift") return {p.at("from").get<std::int64_t>(), p.at("to").get<std::int64_t>()};
    if (a.op == "distribution_drift") {
      const json& times = p.at("times");
      if (times.is_string()) {
        if (times != "epsilon_turning_points") throw InvalidArgument("unknown time set " + times.dump());
        return rate_turning_points(model(), s_.horizon, p.value("min_t", std::int64_t{100}));
      }
      return times.get<std::vector<std::int64_t>>();
    }
    if (a.op == "ks_cauchy" || a.op == "ks_normal_fit" || a.op == "moments" || a.op == "rank_one_score") {
      return {p.value("time", s_.horizon)};
    }
    return {};
  }

  EmpiricalSample sample_at(std::int64_t t) { return EmpiricalSample::at(ensemble(), t); }

  const std::map<std::string, double>& timing() const { return timing_; }
  const Scenario& scenario() const { return s_; }

 private:
  const Scenario& s_;
  const RunOptions& options_;
  std::optional<Trajectory> trajectory_;
  std::optional<EnsembleSample> ensemble_;
  std::optional<std::vector<double>> rhos_;
  std::map<std::string, double> timing_;
};

// Runs `check` at t = 1..T (once for constant schedules) and returns the first
// failing report, or the t = 1 report when all pass.
template <class Fn>
ConditionReport over_time(const ModelSpec& m, std::int64_t horizon, Fn&& check) {
  const std::int64_t last = constant_schedules(m) ? 1 : std::max<std::int64_t>(horizon, 1);
  std::optional<ConditionReport> first;
  for (std::int64_t t = 1; t <= last; ++t) {
    ConditionReport r = check(m.schedule_a.at(t), m.schedule_e.at(t));
    if (!r.satisfied) {
      r.witness["t"] = t;
      r.measurements["checked_steps"] = last;
      return r;
    }
    if (!first) first = std::move(r);
  }
  first->measurements["checked_steps"] = last;
  return *first;
}

ConditionReport run_check(Runner& run, const CheckSpec& c) {
  const Scenario& s = run.scenario();
  const json& p = c.params;
  if (c.name == "product_to_zero") return check_product_to_zero(run.rhos(), s.horizon, run.tol(p, "product_tol"));
  if (c.name == "bounded_product_sums") {
    return check_bounded_product_sums(run.rhos(), s.horizon, run.tol(p, "product_sum_bound"), run.tol(p, "growth_tol"));
  }

  const ModelSpec& m = run.model();
  if (c.name == "base_rates") {
    std::optional<WeightCertificate> cert;
    if (p.contains("certificate")) {
      const json& w = p.at("certificate");
      cert = WeightCertificate{WeightVector(w.at("beta").get<std::vector<double>>()), w.at("delta").get<double>()};
    }
    return over_time(m, s.horizon, [&](const StochasticMatrix& a, const LearningRates& e) {
      return check_base_rates(a, e, cert);
    });
  }
  if (c.name == "average_rates") {
    const std::string mode = p.value("mode", constant_schedules(m) ? "strict" : "inclusive");
    if (mode != "strict" && mode != "inclusive") throw InvalidArgument("mode must be strict or inclusive");
    const RateBound bound = mode == "strict" ? RateBound::kStrict : RateBound::kInclusive;
    return over_time(m, s.horizon, [&](const StochasticMatrix& a, const LearningRates& e) {
      return check_average_rates(a, e, bound);
    });
  }
  if (c.name == "summable_variation") {
    return check_summable_variation(m.schedule_a, m.schedule_e, s.horizon, run.tol(p, "summability_tol"));
  }
  if (c.name == "nonlinear_bounds") {
    if (!uses_learning_functions(m)) throw InvalidArgument("nonlinear_bounds needs a learning function");
    DerivativeGrid grid;
    grid.lo = p.value("lo", grid.lo);
    grid.hi = p.value("hi", grid.hi);
    grid.points = p.value("points", grid.points);
    const auto& fs = std::get<std::vector<LearningFunction>>(*m.feedback);
    return check_nonlinear_bounds(fs, m.schedule_a, std::max<std::int64_t>(s.horizon, 1), grid);
  }
  throw InvalidArgument("unknown check '" + c.name + "'");
}

std::optional<double> target_of(const ModelSpec& m, const json& params) {
  if (params.contains("target")) {
    const json& t = params.at("target");
    if (t.is_null()) return std::nullopt;
    if (t.is_number()) return t.get<double>();
    if (t != "sigma_bar") throw InvalidArgument("target must be a number, null or \"sigma_bar\"");
  }
  return m.sigma_bar;
}

std::vector<double> quantity_series(const Trajectory& traj, bool use_err) {
  std::vector<double> q;
  for (const StepDiagnostics& d : traj.diagnostics) q.push_back(use_err ? *d.err_inf : d.osc);
  return q;
}

double max_coordinate_w1(const EmpiricalSample& a, const EmpiricalSample& b, json& per_coordinate) {
  double worst = 0.0;
  per_coordinate = json::array();
  for (std::size_t j = 0; j < a.n(); ++j) {
    const double d = wasserstein1_1d(a.column(j), b.column(j));
    per_coordinate.push_back(d);
    worst = std::max(worst, d);
  }
  return worst;
}

std::optional<Matrix> noise_covariance(const ModelSpec& m) { return m.noise.covariance(); }

json run_analysis(Runner& run, const AnalysisSpec& a) {
  const Scenario& s = run.scenario();
  const ModelSpec& m = run.model();
  const json& p = a.params;
  json r = json::object();

  if (a.op == "consensus_time") {
    const double tol = run.tol(p, "consensus_tol");
    const auto target = target_of(m, p);
    r["tol"] = tol;
    r["target"] = target ? json(*target) : json(nullptr);
    r["value"] = optional_json(consensus_time(run.trajectory(), target, tol));
  } else if (a.op == "detect_periodicity") {
    const std::int64_t max_period = p.value("max_period", std::int64_t{10});
    const double tol = run.tol(p, "periodicity_tol");
    const Trajectory& traj = run.trajectory();
    const auto period = detect_periodicity(traj, max_period, tol);
    r["value"] = optional_json(period);
    if (period) {
      const double shift = m.sigma_bar.value_or(0.0);
      std::vector<double> cycle;
      for (std::int64_t k = 0; k < *period; ++k) {
        cycle.push_back(traj.states[traj.states.size() - 1 - static_cast<std::size_t>(k)][0] - shift);
      }
      std::sort(cycle.begin(), cycle.end());
      r["cycle_values"] = cycle;
    }
  } else if (a.op == "contraction_envelope") {
    const Trajectory& traj = run.trajectory();
    const std::string mode = p.value("mode", "cumulative");
    const bool use_err = p.value("quantity", m.sigma_bar ? "err_inf" : "osc") == std::string("err_inf");
    if (use_err && !m.sigma_bar) throw InvalidArgument("err_inf envelope needs a target");
    if (mode != "cumulative" && mode != "per_step") throw InvalidArgument("mode must be cumulative or per_step");
    const double slack = run.tol(p, "envelope_slack");
    const std::vector<double> q = quantity_series(traj, use_err);
    double worst = -std::numeric_limits<double>::infinity(), product = 1.0;
    std::int64_t worst_t = 0;
    for (std::size_t t = 1; t < q.size(); ++t) {
      const double rho = *traj.diagnostics[t].rho;
      product *= rho;
      const double bound = mode == "cumulative" ? product * q[0] : rho * q[t - 1];
      if (q[t] - bound > worst) {
        worst = q[t] - bound;
        worst_t = static_cast<std::int64_t>(t);
      }
    }
    r["mode"] = mode;
    r["quantity"] = use_err ? "err_inf" : "osc";
    r["value"] = q.size() > 1 ? json(worst) : json(nullptr);
    r["worst_t"] = worst_t;
    r["holds"] = q.size() <= 1 || worst <= slack;
  } else if (a.op == "final_error") {
    const StepDiagnostics& d = run.trajectory().diagnostics.back();
    r["value"] = d.err_inf ? *d.err_inf : d.osc;
  } else if (a.op == "ensemble_mean_error") {
    const auto target = target_of(m, p);
    if (!target) throw InvalidArgument("ensemble_mean_error needs a target");
    const std::vector<std::int64_t> times = run.sample_times(a);
    json series = json::array();
    double prev = std::numeric_limits<double>::infinity(), last = 0.0;
    bool monotone = true;
    for (std::int64_t t : times) {
      const EmpiricalSample smp = run.sample_at(t);
      double mean = 0.0;
      for (std::size_t i = 0; i < smp.m(); ++i) {
        double e = 0.0;
        for (double v : smp.points.row(i)) e = std::max(e, std::abs(v - *target));
        mean += e / static_cast<double>(smp.m());
      }
      series.push_back({{"t", t}, {"mean_error", mean}});
      monotone = monotone && mean < prev;
      prev = last = mean;
    }
    r["series"] = series;
    r["monotone"] = monotone;
    r["value"] = last;
  } else if (a.op == "ks_cauchy" || a.op == "ks_normal_fit") {
    const std::int64_t t = p.value("time", s.horizon);
    const std::size_t j = p.value("component", std::size_t{0});
    const EmpiricalSample smp = run.sample_at(t);
    const std::vector<double> x = smp.column(j);
    const double alpha = run.tol(p, "ks_alpha");
    double stat = 0.0;
    if (a.op == "ks_cauchy") {
      const double location = p.value("location", 0.0);
      double scale = 1.0;
      if (p.contains("scale") && p.at("scale").is_string()) {
        if (p.at("scale") != "finite_t") throw InvalidArgument("scale must be a number or \"finite_t\"");
        if (m.n != 1) throw InvalidArgument("finite-t Cauchy scale is defined for scalar models");
        const auto* c = std::get_if<CauchyNoise>(&m.noise.kind());
        if (!c) throw InvalidArgument("finite-t Cauchy scale needs Cauchy noise");
        std::vector<double> eps;
        for (std::int64_t k = 1; k <= t; ++k) eps.push_back(m.schedule_e.at(k)[0]);
        scale = cauchy_scale_after(eps, c->scale);
      } else {
        scale = p.value("scale", 1.0);
      }
      r["location"] = location;
      r["scale"] = scale;
      stat = ks_statistic(x, [&](double v) { return cauchy_cdf(v, location, scale); });
    } else {
      EmpiricalSample col{Matrix(x.size(), 1), t, false};
      std::copy(x.begin(), x.end(), col.points.data().begin());
      const Moments mom = empirical_moments(col);
      const double mean = mom.mean[0], sd = std::sqrt(mom.covariance(0, 0));
      if (!(sd > 0.0)) throw InsufficientSample("degenerate sample: zero variance");
      r["fit_mean"] = mean;
      r["fit_sd"] = sd;
      stat = ks_statistic(x, [&](double v) { return normal_cdf(v, mean, sd); });
    }
    r["time"] = t;
    r["m"] = x.size();
    r["alpha"] = alpha;
    r["critical"] = ks_critical(x.size(), alpha);
    r["value"] = stat;
  } else if (a.op == "wasserstein_drift") {
    const std::vector<std::int64_t> times = run.sample_times(a);
    json per;
    r["value"] = max_coordinate_w1(run.sample_at(times[0]), run.sample_at(times[1]), per);
    r["per_coordinate"] = per;
  } else if (a.op == "distribution_drift") {
    const std::vector<std::int64_t> times = run.sample_times(a);
    std::map<std::int64_t, EmpiricalSample> samples;
    for (std::int64_t t : times) samples.emplace(t, run.sample_at(t));
    const DriftReport d = distribution_drift(samples);
    r["times"] = d.times;
    r["max_distance"] = d.max_distance;
    r["leading_mean"] = d.leading_mean;
    r["trailing_mean"] = d.trailing_mean;
    r["non_convergent"] = d.non_convergent;
    r["value"] = *std::min_element(d.max_distance.begin(), d.max_distance.end());
  } else if (a.op == "clt_covariance" || a.op == "rank_one_score") {
    const std::int64_t t = p.value("time", s.horizon);
    EmpiricalSample smp = run.sample_at(t).centered_scaled_copy();
    const Moments mom = empirical_moments(smp);
    const double score = rank_one_score(mom.covariance);
    r["empirical"] = matrix_json(mom.covariance);
    r["rank_one_score"] = score;
    if (a.op == "rank_one_score") {
      r["value"] = score;
    } else {
      if (m.family != Family::kAverage || !constant_schedules(m)) {
        throw InvalidArgument("clt_covariance needs the average family with constant schedules");
      }
      const auto sigma = noise_covariance(m);
      if (!sigma || m.noise.envelope() != NoiseEnvelope::kNone) {
        throw InvalidArgument("clt_covariance needs noise with a finite covariance and no envelope");
      }
      const StochasticMatrix a0 = m.schedule_a.at(1);
      const LearningRates e0 = m.schedule_e.at(1);
      const double tol = run.tol(p, "rank_one_tol");
      const ProductLimit lim = product_limit(averaging_map(a0, e0), p.value("t_max", std::int64_t{100000}), tol);
      if (!lim.converged) throw StructureError("product of averaging maps did not converge to rank one");
      const Matrix target = clt_target(RowSumMatrix(lim.limit), e0, *sigma, 10 * tol);
      double worst = 0.0;
      Matrix rel(m.n, m.n);
      for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j) {
          const double diff = std::abs(mom.covariance(i, j) - target(i, j));
          rel(i, j) = target(i, j) != 0.0 ? diff / std::abs(target(i, j)) : diff;
          worst = std::max(worst, rel(i, j));
        }
      }
      r["target"] = matrix_json(target);
      r["relative_error"] = matrix_json(rel);
      r["nu"] = lim.nu();
      r["value"] = worst;
    }
  } else if (a.op == "product_limit") {
    const double tol = run.tol(p, "rank_one_tol");
    const std::int64_t t_max = p.value("t_max", std::int64_t{100000});
    auto factor = [&m](std::int64_t t) {
      return m.family == Family::kAverage ? averaging_map(m.schedule_a.at(t), m.schedule_e.at(t)).matrix()
                                          : m.schedule_a.at(t).matrix();
    };
    const ProductLimit lim = product_limit(factor, t_max, tol);
    const std::vector<double> nu = lim.nu();
    r["converged"] = lim.converged;
    r["steps"] = lim.steps;
    r["nu"] = nu;
    r["value"] = max_row_distance(lim.limit);
    double sum = 0.0;
    for (double v : nu) sum += v;
    r["nu_sum"] = sum;
    if (constant_schedules(m)) {
      const Matrix b = factor(1);
      double resid = 0.0;
      for (std::size_t j = 0; j < m.n; ++j) {
        double v = 0.0;
        for (std::size_t i = 0; i < m.n; ++i) v += nu[i] * b(i, j);
        resid = std::max(resid, std::abs(v - nu[j]));
      }
      r["stationarity_residual"] = resid;
    }
  } else if (a.op == "oscillation_decay") {
    const double tol = p.value("tol", 1e-9);
    const Trajectory& traj = run.trajectory();
    std::optional<std::int64_t> hit;
    double max_ratio = 0.0, max_excess = -std::numeric_limits<double>::infinity(), max_rho = 0.0;
    for (std::size_t t = 1; t < traj.diagnostics.size(); ++t) {
      const double prev = traj.diagnostics[t - 1].osc, cur = traj.diagnostics[t].osc;
      if (!(prev >= tol)) break;
      const double rho = traj.diagnostics[t].rho.value_or(std::numeric_limits<double>::quiet_NaN());
      max_ratio = std::max(max_ratio, cur / prev);
      max_rho = std::max(max_rho, rho);
      max_excess = std::max(max_excess, cur - rho * prev);
    }
    for (const StepDiagnostics& d : traj.diagnostics) {
      if (d.osc < tol) {
        hit = d.t;
        break;
      }
    }
    r["tol"] = tol;
    r["max_ratio"] = max_ratio;
    r["max_rho"] = max_rho;
    r["within_rho"] = !(max_excess > run.tol(p, "envelope_slack"));
    r["value"] = optional_json(hit);
  } else if (a.op == "moments") {
    const Moments mom = empirical_moments(run.sample_at(p.value("time", s.horizon)));
    r["mean"] = mom.mean;
    r["covariance"] = matrix_json(mom.covariance);
    r["value"] = mom.mean;
  } else {
    throw InvalidArgument("unknown analysis '" + a.op + "'");
  }
  return r;
}

bool approx_equal(const json& got, const json& want, double tol) {
  if (got.is_number() && want.is_number()) return std::abs(got.get<double>() - want.get<double>()) <= tol;
  if (got.is_array() && want.is_array()) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (!approx_equal(got[i], want[i], tol)) return false;
    }
    return true;
  }
  return got == want;
}

// Evaluates an analysis expectation; returns an explanation when it fails.
std::optional<std::string> unmet(const json& result, const json& expect) {
  const json& value = result.contains("value") ? result.at("value") : json(nullptr);
  const double tol = expect.value("tol", 0.0);
  for (const auto& [key, want] : expect.items()) {
    if (key == "tol") continue;
    if (key == "max" || key == "min") {
      if (!value.is_number()) return key + ": value is not a number";
      const double v = value.get<double>();
      if (key == "max" && !(v <= want.get<double>())) return "value " + value.dump() + " exceeds max " + want.dump();
      if (key == "min" && !(v >= want.get<double>())) return "value " + value.dump() + " below min " + want.dump();
    } else if (key == "equals") {
      if (!approx_equal(value, want, tol)) return "value " + value.dump() + " != " + want.dump();
    } else if (key == "is_null") {
      if (value.is_null() != want.get<bool>()) {
        return "value " + value.dump() + (want.get<bool>() ? " is not null" : " is null");
      }
    } else if (key == "below_critical" || key == "above_critical") {
      if (!value.is_number() || !result.contains("critical")) return key + ": no statistic";
      const bool below = value.get<double>() < result.at("critical").get<double>();
      const bool ok = key == "below_critical" ? below == want.get<bool>() : (!below) == want.get<bool>();
      if (!ok) return "statistic " + value.dump() + " vs critical " + result.at("critical").dump();
    } else {
      if (!result.contains(key)) return "result has no field '" + key + "'";
      if (!approx_equal(result.at(key), want, tol)) return key + " = " + result.at(key).dump() + " != " + want.dump();
    }
  }
  return std::nullopt;
}

json item_json(const ItemResult& item, const char* label) {
  json j = {{label, item.name}, {"params", item.params}, {"passed", item.passed}};
  if (item.error) {
    j["error"] = *item.error;
  } else {
    j["result"] = item.result;
  }
  if (!item.expect.is_null()) j["expect"] = item.expect;
  return j;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  fn(out);
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

void apply_overrides(Scenario& s, const RunOptions& options) {
  if (options.seed) s.master_seed = *options.seed;
  if (options.horizon) {
    if (*options.horizon < 0) throw InvalidArgument("horizon must be nonnegative");
    s.horizon = *options.horizon;
  }
  if (options.ensemble) s.ensemble = *options.ensemble;
  for (const auto& [k, v] : options.tolerances) {
    if (!default_tolerances().contains(k)) {
      std::string known;
      for (const auto& [name, value] : default_tolerances()) known += (known.empty() ? "" : ", ") + name;
      throw InvalidArgument("unknown tolerance '" + k + "' (known: " + known + ")");
    }
    s.tolerances[k] = v;
  }
}

bool RunSummary::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const ItemResult& i) { return i.passed; }) &&
         std::all_of(analyses.begin(), analyses.end(), [](const ItemResult& i) { return i.passed; });
}

json RunSummary::to_json() const {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["scenario"] = scenario_id;
  j["master_seed"] = master_seed;
  j["seed_provenance"] = {{"generator", "philox4x32-10"},
                          {"stream", "run r draws from key master_seed, counter (t, component, r)"},
                          {"trajectory_run", 0}};
  j["horizon"] = horizon;
  j["ensemble"] = ensemble;
  j["checks"] = json::array();
  for (const ItemResult& c : checks) j["checks"].push_back(item_json(c, "name"));
  j["analyses"] = json::array();
  for (const ItemResult& a : analyses) j["analyses"].push_back(item_json(a, "op"));
  j["timing"] = timing;
  j["files"] = files;
  j["passed"] = passed();
  return j;
}

RunSummary run_scenario(const Scenario& scenario, const RunOptions& options) {
  const auto start = Clock::now();
  Scenario s = scenario;
  apply_overrides(s, options);
  Runner run(s, options);

  RunSummary summary;
  summary.scenario_id = s.id;
  summary.master_seed = s.master_seed;
  summary.horizon = s.horizon;
  summary.ensemble = s.ensemble;

  for (const CheckSpec& c : s.checks) {
    ItemResult item;
    item.name = c.name;
    item.params = c.params;
    if (c.expect) item.expect = *c.expect;
    try {
      const ConditionReport report = run_check(run, c);
      item.result = report;
      item.passed = !c.expect || *c.expect == report.satisfied;
    } catch (const std::exception& e) {
      item.error = e.what();
      item.passed = false;
    }
    summary.checks.push_back(std::move(item));
  }
  summary.timing["checks"] = seconds_since(start);

  if (!options.checks_only) {
    for (const AnalysisSpec& a : s.analyses) {
      ItemResult item;
      item.name = a.op;
      item.params = a.params;
      if (!a.expect.empty()) item.expect = a.expect;
      try {
        item.result = run_analysis(run, a);
        if (const auto why = unmet(item.result, a.expect)) {
          item.passed = false;
          item.result["unmet"] = *why;
        }
      } catch (const std::exception& e) {
        item.error = e.what();
        item.passed = false;
      }
      summary.analyses.push_back(std::move(item));
    }

    if (options.out_dir) {
      const std::filesystem::path dir = *options.out_dir / s.id;
      std::filesystem::create_directories(dir);
      if (s.model && s.outputs.trajectory) {
        const auto path = dir / "trajectory.csv";
        write_file(path, [&](std::ostream& os) { write_trajectory_csv(os, run.trajectory()); });
        summary.files["trajectory"] = path.string();
      }
      if (s.ensemble > 0 && s.outputs.ensemble) {
        const auto path = dir / "ensemble.csv";
        write_file(path, [&](std::ostream& os) { write_ensemble_csv(os, run.ensemble().terminal); });
        summary.files["ensemble"] = path.string();
      }
    }
  }

  for (const auto& [k, v] : run.timing()) summary.timing[k] = v;
  summary.timing["total"] = seconds_since(start);
  if (options.out_dir && s.outputs.summary && !options.checks_only) {
    const std::filesystem::path path = *options.out_dir / s.id / "summary.json";
    std::filesystem::create_directories(path.parent_path());
    summary.files["summary"] = path.string();
    write_file(path, [&](std::ostream& os) { os << summary.to_json().dump(2) << '\n'; });
  }
  return summary;
}

}  // namespace consensus::harness
