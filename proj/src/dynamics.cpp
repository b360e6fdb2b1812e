#include "consensus/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "step_kernel.hpp"

namespace consensus {

namespace detail {

namespace {

double noise_at(std::span<const double> gamma, std::size_t i) { return gamma.empty() ? 0.0 : gamma[i]; }

double sign(double u) { return (u > 0.0) - (u < 0.0); }

// out = A x for A with unit row sums, written as x_i + sum_j a_ij (x_j - x_i) so
// that a consensus vector is reproduced bit for bit.
void average_rows_into(const Matrix& a, std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const std::span<const double> row = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * (x[j] - xi);
    out[i] = xi + acc;
  }
}

}  // namespace

void feedback_into(const Matrix& a, std::span<const double> eps, double target, std::span<const double> gamma,
                   std::span<const double> x, std::span<double> out) {
  average_rows_into(a, x, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += eps[i] * (target + noise_at(gamma, i) - x[i]);
}

void nonlinear_into(const Matrix& a, std::span<const LearningFunction> fs, double target,
                    std::span<const double> gamma, std::span<const double> x, std::span<double> out) {
  average_rows_into(a, x, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const LearningFunction& f = fs.size() == 1 ? fs[0] : fs[i];
    out[i] += f(target + noise_at(gamma, i) - x[i]);
  }
}

void sign_into(const Matrix& a, std::span<const double> eps, double target, std::span<const double> gamma,
               std::span<const double> x, std::span<double> out) {
  average_rows_into(a, x, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += eps[i] * sign(target + noise_at(gamma, i) - x[i]);
}

void average_into(const Matrix& b, std::span<const double> eps, std::span<const double> gamma,
                  std::span<const double> x, std::span<double> out) {
  average_rows_into(b, x, out);
  if (gamma.empty()) return;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += eps[i] * gamma[i];
}

StepKernel::StepKernel(const ModelSpec& spec, std::int64_t horizon) : spec_(spec) {
  spec_.validate();
  if (horizon <= 0) return;
  const bool uses_rates =
      !(spec.family == Family::kNonlinear && std::holds_alternative<std::vector<LearningFunction>>(*spec.feedback));
  const bool constant = spec.schedule_a.is_constant() && (!uses_rates || spec.schedule_e.is_constant());
  const std::int64_t count = constant ? 1 : horizon;
  slices_.reserve(static_cast<std::size_t>(count));
  for (std::int64_t t = 1; t <= count; ++t) slices_.push_back(resolve(t));
}

StepKernel::Slice StepKernel::resolve(std::int64_t t) const {
  Slice s;
  const StochasticMatrix a = spec_.schedule_a.at(t);
  if (a.size() != spec_.n) throw ScheduleError(t, "weights matrix has the wrong dimension");
  s.a = a.matrix();

  if (spec_.family == Family::kNonlinear) {
    if (const auto* fs = std::get_if<std::vector<LearningFunction>>(&*spec_.feedback)) {
      s.rho = nonlinear_rho(*fs, a);
      return s;
    }
  }
  const LearningRates eps = spec_.schedule_e.at(t);
  if (eps.size() != spec_.n) throw ScheduleError(t, "learning rates have the wrong dimension");
  s.eps.assign(eps.values().begin(), eps.values().end());

  switch (spec_.family) {
    case Family::kBase:
    case Family::kNoisyFeedback:
    case Family::kPureNoiseFeedback:
      s.rho = contraction_factor(a, eps);
      break;
    case Family::kAverage:
      s.b = averaging_map(a, eps).matrix();
      s.rho = dobrushin(s.b);
      break;
    case Family::kNonlinear:
      break;  // sign feedback has no contraction factor
  }
  return s;
}

void StepKernel::step(std::int64_t t, std::span<const double> x, std::span<const double> gamma,
                      std::span<double> out) const {
  const Slice& s = slice(t);
  const double target = spec_.sigma_bar.value_or(0.0);
  switch (spec_.family) {
    case Family::kBase:
    case Family::kNoisyFeedback:
    case Family::kPureNoiseFeedback:
      feedback_into(s.a, s.eps, target, gamma, x, out);
      return;
    case Family::kAverage:
      average_into(s.b, s.eps, gamma, x, out);
      return;
    case Family::kNonlinear:
      if (const auto* fs = std::get_if<std::vector<LearningFunction>>(&*spec_.feedback)) {
        nonlinear_into(s.a, *fs, target, gamma, x, out);
      } else {
        sign_into(s.a, s.eps, target, gamma, x, out);
      }
      return;
  }
}

std::optional<double> StepKernel::rho(std::int64_t t) const { return slice(t).rho; }

}  // namespace detail

namespace {

void require_sizes(std::size_t n, std::span<const double> x, std::span<const double> gamma) {
  if (x.size() != n) throw DimensionMismatch("state vector has the wrong length");
  if (!gamma.empty() && gamma.size() != n) throw DimensionMismatch("noise vector has the wrong length");
}

}  // namespace

LearningFunction::LearningFunction(std::string name, Fn eval, Fn derivative, double deriv_inf, double deriv_sup,
                                   double domain_lo, double domain_hi)
    : name_(std::move(name)),
      eval_(std::move(eval)),
      derivative_(std::move(derivative)),
      deriv_inf_(deriv_inf),
      deriv_sup_(deriv_sup),
      domain_lo_(domain_lo),
      domain_hi_(domain_hi) {
  if (!eval_ || !derivative_) throw InvalidArgument("learning function needs both f and f'");
  if (eval_(0.0) != 0.0) throw InvalidArgument("learning function must satisfy f(0) = 0");
  if (!(deriv_inf_ <= deriv_sup_)) throw InvalidArgument("learning function: deriv_inf > deriv_sup");
  if (!(domain_lo_ <= 0.0 && 0.0 <= domain_hi_)) throw InvalidArgument("learning function domain must contain 0");
}

LearningFunction LearningFunction::linear(double slope) {
  return LearningFunction(
      "linear", [slope](double u) { return slope * u; }, [slope](double) { return slope; }, slope, slope);
}

LearningFunction LearningFunction::scaled_tanh(double gain, double half_width) {
  if (!(gain > 0.0)) throw InvalidArgument("tanh gain must be positive");
  if (!(half_width > 0.0)) throw InvalidArgument("tanh domain half-width must be positive");
  const double c = std::cosh(half_width);
  const double inf = std::isinf(half_width) ? 0.0 : gain / (c * c);
  return LearningFunction(
      "tanh", [gain](double u) { return gain * std::tanh(u); },
      [gain](double u) {
        const double ch = std::cosh(u);
        return gain / (ch * ch);
      },
      inf, gain, -half_width, half_width);
}

std::string to_string(Family f) {
  switch (f) {
    case Family::kBase:
      return "base";
    case Family::kNoisyFeedback:
      return "noisy_feedback";
    case Family::kPureNoiseFeedback:
      return "pure_noise_feedback";
    case Family::kNonlinear:
      return "nonlinear";
    case Family::kAverage:
      return "average";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  for (Family f : {Family::kBase, Family::kNoisyFeedback, Family::kPureNoiseFeedback, Family::kNonlinear,
                   Family::kAverage}) {
    if (to_string(f) == s) return f;
  }
  throw InvalidArgument("unknown model family '" + s +
                        "' (known: base, noisy_feedback, pure_noise_feedback, nonlinear, average)");
}

void ModelSpec::validate() const {
  if (n == 0) throw InvalidArgument("model needs at least one agent");
  if (x0.size() != n) throw DimensionMismatch("x0 has the wrong length");
  for (double v : x0) {
    if (!std::isfinite(v)) throw InvalidArgument("x0 has a non-finite entry");
  }
  if (!noise.is_zero() && noise.size() != n) throw DimensionMismatch("noise dimension differs from n");

  const bool needs_target = family == Family::kBase || family == Family::kNoisyFeedback;
  const bool forbids_target = family == Family::kPureNoiseFeedback || family == Family::kAverage;
  if (needs_target && !sigma_bar) throw InvalidArgument(to_string(family) + " model requires sigma_bar");
  if (forbids_target && sigma_bar) throw InvalidArgument(to_string(family) + " model has no sigma_bar");
  if (family == Family::kBase && !noise.is_zero()) throw InvalidArgument("base model is noise-free");

  if (family == Family::kNonlinear) {
    if (!feedback) throw InvalidArgument("nonlinear model requires a feedback function");
    if (const auto* fs = std::get_if<std::vector<LearningFunction>>(&*feedback)) {
      if (fs->size() != 1 && fs->size() != n) {
        throw DimensionMismatch("nonlinear model needs one shared learning function or one per agent");
      }
    }
  } else if (feedback) {
    throw InvalidArgument("only the nonlinear model takes a feedback function");
  }
}

StateVector step_base(const StochasticMatrix& a, const LearningRates& eps, double sigma_bar,
                      std::span<const double> x) {
  return step_noisy(a, eps, sigma_bar, {}, x);
}

StateVector step_noisy(const StochasticMatrix& a, const LearningRates& eps, double sigma_bar,
                       std::span<const double> gamma, std::span<const double> x) {
  require_sizes(a.size(), x, gamma);
  if (eps.size() != a.size()) throw DimensionMismatch("rates and matrix differ in size");
  StateVector out(x.size());
  detail::feedback_into(a, eps.values(), sigma_bar, gamma, x, out);
  return out;
}

StateVector step_pure_noise(const StochasticMatrix& a, const LearningRates& eps, std::span<const double> gamma,
                            std::span<const double> x) {
  return step_noisy(a, eps, 0.0, gamma, x);
}

StateVector step_nonlinear(const StochasticMatrix& a, const LearningFunction& f, std::optional<double> sigma_bar,
                           std::span<const double> gamma, std::span<const double> x) {
  return step_nonlinear(a, std::span<const LearningFunction>(&f, 1), sigma_bar, gamma, x);
}

StateVector step_nonlinear(const StochasticMatrix& a, std::span<const LearningFunction> per_agent,
                           std::optional<double> sigma_bar, std::span<const double> gamma,
                           std::span<const double> x) {
  require_sizes(a.size(), x, gamma);
  if (per_agent.size() != 1 && per_agent.size() != a.size()) {
    throw DimensionMismatch("need one shared learning function or one per agent");
  }
  StateVector out(x.size());
  detail::nonlinear_into(a, per_agent, sigma_bar.value_or(0.0), gamma, x, out);
  return out;
}

StateVector step_sign(const StochasticMatrix& a, const LearningRates& eps, std::optional<double> sigma_bar,
                      std::span<const double> gamma, std::span<const double> x) {
  require_sizes(a.size(), x, gamma);
  if (eps.size() != a.size()) throw DimensionMismatch("rates and matrix differ in size");
  StateVector out(x.size());
  detail::sign_into(a, eps.values(), sigma_bar.value_or(0.0), gamma, x, out);
  return out;
}

StateVector step_average(const StochasticMatrix& a, const LearningRates& eps, std::span<const double> gamma,
                         std::span<const double> x) {
  require_sizes(a.size(), x, gamma);
  const RowSumMatrix b = averaging_map(a, eps);
  StateVector out(x.size());
  detail::average_into(b, eps.values(), gamma, x, out);
  return out;
}

double nonlinear_rho(const LearningFunction& f, const StochasticMatrix& a) {
  return nonlinear_rho(std::span<const LearningFunction>(&f, 1), a);
}

double nonlinear_rho(std::span<const LearningFunction> per_agent, const StochasticMatrix& a) {
  if (per_agent.size() != 1 && per_agent.size() != a.size()) {
    throw DimensionMismatch("need one shared learning function or one per agent");
  }
  double rho = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const LearningFunction& f = per_agent.size() == 1 ? per_agent[0] : per_agent[i];
    const double aii = a(i, i);
    const double spread = std::max(std::abs(aii - f.deriv_inf()), std::abs(aii - f.deriv_sup()));
    rho = std::max(rho, 1.0 - (aii - spread));
  }
  return rho;
}

std::vector<double> rho_sequence(const ModelSpec& spec, std::int64_t horizon) {
  const detail::StepKernel kernel(spec, horizon);
  std::vector<double> rhos;
  rhos.reserve(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    const auto r = kernel.rho(t);
    if (!r) throw InvalidArgument("sign feedback has no contraction factor");
    rhos.push_back(*r);
  }
  return rhos;
}

Trajectory simulate(const ModelSpec& spec, std::int64_t horizon, const Stream& stream,
                    const SimulateOptions& options) {
  if (horizon < 0) throw InvalidArgument("horizon must be nonnegative");
  const detail::StepKernel kernel(spec, horizon);
  const std::size_t n = spec.n;

  auto diagnose = [&](std::int64_t t, std::span<const double> x, std::optional<double> rho) {
    StepDiagnostics d;
    d.t = t;
    d.osc = oscillation(x);
    d.rho = rho;
    if (spec.sigma_bar) {
      double e = 0.0;
      for (double v : x) e = std::max(e, std::abs(v - *spec.sigma_bar));
      d.err_inf = e;
    }
    return d;
  };

  Trajectory traj;
  traj.diagnostics.reserve(static_cast<std::size_t>(horizon) + 1);
  if (options.keep_states) traj.states.reserve(static_cast<std::size_t>(horizon) + 1);

  StateVector x = spec.x0;
  StateVector next(n);
  StateVector gamma(kernel.needs_noise() ? n : 0);
  if (options.keep_states) traj.states.push_back(x);
  traj.diagnostics.push_back(diagnose(0, x, std::nullopt));

  for (std::int64_t t = 1; t <= horizon; ++t) {
    if (!gamma.empty()) sample_noise_into(spec.noise, t, stream, gamma);
    kernel.step(t, x, gamma, next);
    x.swap(next);
    if (options.keep_states) traj.states.push_back(x);
    traj.diagnostics.push_back(diagnose(t, x, kernel.rho(t)));
  }
  if (!options.keep_states) traj.states.push_back(std::move(x));
  return traj;
}

Trajectory simulate(const ModelSpec& spec, std::int64_t horizon, std::uint64_t seed,
                    const SimulateOptions& options) {
  return simulate(spec, horizon, substream(seed, 0), options);
}

}  // namespace consensus
