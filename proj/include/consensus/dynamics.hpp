#ifndef CONSENSUS_DYNAMICS_HPP_
#define CONSENSUS_DYNAMICS_HPP_

/**
 * @file dynamics.hpp
 * @brief Step functions and trajectory/ensemble simulation for the learning
 * dynamics families:
 *
 *   Base               X_t = A X + E (s 1 - X)
 *   NoisyFeedback      X_t = A_t X + E_t (s 1 + g_t - X)
 *   PureNoiseFeedback  X_t = A_t X + E_t (g_t - X)
 *   Nonlinear          X_t = A_t X + f(s 1 + g_t - X)     (s omitted when absent)
 *   Average            X_t = A_t X + E_t (mean(X) 1 - X + g_t)
 *
 * where X = X_{t-1}, s is the consensus target and g_t the noise.
 */

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "consensus/errors.hpp"
#include "consensus/matrix.hpp"
#include "consensus/noise.hpp"

namespace consensus {

/// Time-indexed generator (t >= 1) of matrices or rates: constant, table-backed or closed-form.
template <class T>
class Schedule {
 public:
  using Generator = std::function<T(std::int64_t)>;

  static Schedule constant(T value) {
    Schedule s;
    s.kind_ = Kind::kConstant;
    s.values_.push_back(std::move(value));
    s.name_ = "constant";
    return s;
  }
  /// values[t-1] is the value at time t.
  static Schedule table(std::vector<T> values) {
    if (values.empty()) throw InvalidArgument("schedule table is empty");
    Schedule s;
    s.kind_ = Kind::kTable;
    s.values_ = std::move(values);
    s.name_ = "table";
    return s;
  }
  static Schedule generated(std::string name, Generator g) {
    Schedule s;
    s.kind_ = Kind::kGenerator;
    s.generator_ = std::move(g);
    s.name_ = std::move(name);
    return s;
  }

  T at(std::int64_t t) const {
    if (t < 1) throw ScheduleError(t, "schedules are indexed from t = 1");
    switch (kind_) {
      case Kind::kConstant:
        if (values_.empty()) throw ScheduleError(t, "schedule was never set");
        return values_.front();
      case Kind::kTable:
        if (static_cast<std::size_t>(t) > values_.size()) {
          throw ScheduleError(t, "table has " + std::to_string(values_.size()) + " entries");
        }
        return values_[static_cast<std::size_t>(t - 1)];
      case Kind::kGenerator:
        try {
          return generator_(t);
        } catch (const ScheduleError&) {
          throw;
        } catch (const std::exception& e) {
          throw ScheduleError(t, name_ + ": " + e.what());
        }
    }
    throw ScheduleError(t, "uninitialised schedule");
  }

  bool is_constant() const { return kind_ == Kind::kConstant; }
  const std::string& name() const { return name_; }

 private:
  enum class Kind { kConstant, kTable, kGenerator };
  Kind kind_ = Kind::kConstant;
  std::vector<T> values_;
  Generator generator_;
  std::string name_;
};

using MatrixSchedule = Schedule<StochasticMatrix>;
using RatesSchedule = Schedule<LearningRates>;

/// Scalar feedback function applied componentwise, with f(0) = 0 and declared
/// bounds on its derivative over `domain`.
class LearningFunction {
 public:
  using Fn = std::function<double(double)>;

  LearningFunction(std::string name, Fn eval, Fn derivative, double deriv_inf, double deriv_sup,
                   double domain_lo = -std::numeric_limits<double>::infinity(),
                   double domain_hi = std::numeric_limits<double>::infinity());

  /// f(u) = slope * u.
  static LearningFunction linear(double slope);
  /// f(u) = gain * tanh(u), declared on [-half_width, half_width]; the infimum of f'
  /// there is gain * sech^2(half_width), which is 0 when half_width is infinite.
  static LearningFunction scaled_tanh(double gain, double half_width = std::numeric_limits<double>::infinity());

  double operator()(double u) const { return eval_(u); }
  double derivative(double u) const { return derivative_(u); }
  double deriv_inf() const { return deriv_inf_; }
  double deriv_sup() const { return deriv_sup_; }
  double domain_lo() const { return domain_lo_; }
  double domain_hi() const { return domain_hi_; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  Fn eval_;
  Fn derivative_;
  double deriv_inf_;
  double deriv_sup_;
  double domain_lo_;
  double domain_hi_;
};

/// Discontinuous feedback E_t sign(s + g - x). It has no derivative declaration and
/// is therefore never accepted by the nonlinear bound checks.
struct SignFeedback {};

/// One shared learning function (size 1) or one per agent (size n), or sign feedback.
using Feedback = std::variant<std::vector<LearningFunction>, SignFeedback>;

enum class Family { kBase, kNoisyFeedback, kPureNoiseFeedback, kNonlinear, kAverage };

std::string to_string(Family f);
Family family_from_string(const std::string& s);

struct ModelSpec {
  Family family = Family::kBase;
  std::size_t n = 0;
  MatrixSchedule schedule_a;
  RatesSchedule schedule_e;          ///< unused by Nonlinear with learning functions
  std::optional<double> sigma_bar;   ///< target; required by Base/NoisyFeedback, optional for Nonlinear
  NoiseSpec noise = NoiseSpec::zero(0);
  std::optional<Feedback> feedback;  ///< Nonlinear only
  StateVector x0;

  /// Throws InvalidArgument when fields are inconsistent with the family.
  void validate() const;
};

StateVector step_base(const StochasticMatrix& a, const LearningRates& eps, double sigma_bar,
                      std::span<const double> x);
StateVector step_noisy(const StochasticMatrix& a, const LearningRates& eps, double sigma_bar,
                       std::span<const double> gamma, std::span<const double> x);
StateVector step_pure_noise(const StochasticMatrix& a, const LearningRates& eps, std::span<const double> gamma,
                            std::span<const double> x);
/// Without a target (`sigma_bar` empty) the argument of f is gamma - x.
StateVector step_nonlinear(const StochasticMatrix& a, const LearningFunction& f, std::optional<double> sigma_bar,
                           std::span<const double> gamma, std::span<const double> x);
StateVector step_nonlinear(const StochasticMatrix& a, std::span<const LearningFunction> per_agent,
                           std::optional<double> sigma_bar, std::span<const double> gamma, std::span<const double> x);
StateVector step_sign(const StochasticMatrix& a, const LearningRates& eps, std::optional<double> sigma_bar,
                      std::span<const double> gamma, std::span<const double> x);
StateVector step_average(const StochasticMatrix& a, const LearningRates& eps, std::span<const double> gamma,
                         std::span<const double> x);

/// Contraction factor of the nonlinear model: max over agents of |a_ii - d| + 1 - a_ii
/// with d ranging over the declared derivative bounds (the sup over the range is
/// attained at an endpoint).
double nonlinear_rho(const LearningFunction& f, const StochasticMatrix& a);
double nonlinear_rho(std::span<const LearningFunction> per_agent, const StochasticMatrix& a);

/// rho_1..rho_T of the model: contraction_factor(A_t, E_t) for the feedback families,
/// nonlinear_rho for learning functions, dobrushin(B_t) for Average. Sign feedback has none.
std::vector<double> rho_sequence(const ModelSpec& spec, std::int64_t horizon);

struct StepDiagnostics {
  std::int64_t t = 0;
  std::optional<double> err_inf;  ///< |X_t - s 1|_inf, when a target exists
  double osc = 0.0;
  std::optional<double> rho;      ///< contraction factor used at step t (none at t = 0)
};

struct Trajectory {
  /// X_0..X_T, or only X_T when states were not kept.
  std::vector<StateVector> states;
  std::vector<StepDiagnostics> diagnostics;  ///< always T + 1 records
  std::int64_t horizon() const { return static_cast<std::int64_t>(diagnostics.size()) - 1; }
  const StateVector& terminal() const { return states.back(); }
  bool full() const { return states.size() == diagnostics.size(); }
};

struct SimulateOptions {
  bool keep_states = true;
};

/// Deterministic in (spec, horizon, stream).
Trajectory simulate(const ModelSpec& spec, std::int64_t horizon, const Stream& stream,
                    const SimulateOptions& options = {});
/// Uses run 0 of `seed`, so an ensemble of size one reproduces this trajectory's terminal state.
Trajectory simulate(const ModelSpec& spec, std::int64_t horizon, std::uint64_t seed,
                    const SimulateOptions& options = {});

struct EnsembleOptions {
  std::vector<std::int64_t> snapshot_times;  ///< times t in [0, T] whose states are also kept
  int threads = 0;                           ///< 0 = OpenMP default; never changes results
};

/// Terminal states (and optional snapshots) of m independent runs; row r is run r.
struct EnsembleSample {
  std::size_t m = 0;
  std::size_t n = 0;
  std::int64_t horizon = 0;
  std::uint64_t master_seed = 0;
  Matrix terminal;
  std::map<std::int64_t, Matrix> snapshots;

  friend bool operator==(const EnsembleSample&, const EnsembleSample&) = default;
};

/// OpenMP-parallel across runs; run r uses substream(master_seed, r).
EnsembleSample simulate_ensemble(const ModelSpec& spec, std::int64_t horizon, std::size_t m,
                                 std::uint64_t master_seed, const EnsembleOptions& options = {});
/// Serial reference of simulate_ensemble; results are bitwise identical.
EnsembleSample simulate_ensemble_serial(const ModelSpec& spec, std::int64_t horizon, std::size_t m,
                                        std::uint64_t master_seed, const EnsembleOptions& options = {});

}  // namespace consensus

#endif  // CONSENSUS_DYNAMICS_HPP_
