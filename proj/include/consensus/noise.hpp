#ifndef CONSENSUS_NOISE_HPP_
#define CONSENSUS_NOISE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "consensus/matrix.hpp"
#include "consensus/philox.hpp"

namespace consensus {

/// Reproducible random stream of one ensemble member.
///
/// Every draw is addressed by (master_seed, run, t, component): the seed is the
/// Philox key and the counter is {t_lo, t_hi, component, run}. Streams are
/// plain values; copying one copies its identity, not a position.
class Stream {
 public:
  constexpr Stream(std::uint64_t master_seed, std::uint32_t run) : seed_(master_seed), run_(run) {}

  constexpr std::uint64_t master_seed() const { return seed_; }
  constexpr std::uint32_t run() const { return run_; }

  constexpr PhiloxCounter block(std::uint64_t t, std::uint32_t component) const {
    return philox4x32_10({static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32), component, run_},
                         {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
  }

  /// Two independent uniforms in the open interval (0, 1).
  std::array<double, 2> uniforms(std::uint64_t t, std::uint32_t component) const {
    const auto b = block(t, component);
    return {uniform53_open(b[0], b[1]), uniform53_open(b[2], b[3])};
  }

  /// Standard normal via Box-Muller: sqrt(-2 ln u1) cos(2 pi u2).
  double normal(std::uint64_t t, std::uint32_t component) const;
  /// +1 or -1 with equal probability (lowest bit of the first word).
  double rademacher(std::uint64_t t, std::uint32_t component) const {
    return (block(t, component)[0] & 1u) ? 1.0 : -1.0;
  }
  /// Standard Cauchy via inverse CDF: tan(pi (u - 1/2)).
  double cauchy(std::uint64_t t, std::uint32_t component) const;

 private:
  std::uint64_t seed_;
  std::uint32_t run_;
};

/// Independent reproducible stream for ensemble member `run`.
constexpr Stream substream(std::uint64_t master_seed, std::uint32_t run) { return Stream(master_seed, run); }

struct ZeroNoise {};
/// gamma_t = rate^t * 1.
struct DecayingNoise {
  double rate = 0.5;
};
struct GaussianNoise {
  std::vector<double> mu;
  Matrix sigma;  ///< covariance, symmetric positive semidefinite
};
/// Each component independently +1 or -1 with probability 1/2.
struct RademacherNoise {};
struct CauchyNoise {
  double scale = 1.0;
};
/// Row t-1 is gamma_t.
struct TableNoise {
  std::vector<StateVector> rows;
};

/// Deterministic multiplier applied on top of the noise kind.
enum class NoiseEnvelope { kNone, kInverseT };

/// Noise process gamma_t. Construct through the factory functions, which
/// validate parameters and precompute the Gaussian factorization.
class NoiseSpec {
 public:
  using Kind = std::variant<ZeroNoise, DecayingNoise, GaussianNoise, RademacherNoise, CauchyNoise, TableNoise>;

  static NoiseSpec zero(std::size_t n);
  static NoiseSpec decaying(std::size_t n, double rate);
  static NoiseSpec gaussian(std::vector<double> mu, Matrix sigma);
  static NoiseSpec standard_gaussian(std::size_t n);
  static NoiseSpec rademacher(std::size_t n);
  static NoiseSpec cauchy(std::size_t n, double scale);
  static NoiseSpec table(std::vector<StateVector> rows);

  NoiseSpec with_envelope(NoiseEnvelope e) const {
    NoiseSpec copy = *this;
    copy.envelope_ = e;
    return copy;
  }

  std::size_t size() const { return n_; }
  const Kind& kind() const { return kind_; }
  NoiseEnvelope envelope() const { return envelope_; }
  bool is_zero() const { return std::holds_alternative<ZeroNoise>(kind_); }
  /// Covariance of one draw, when it exists (Gaussian, Rademacher, zero, decaying).
  std::optional<Matrix> covariance() const;
  /// Lower-triangular factor L with L L^T = sigma (Gaussian only).
  const Matrix& cholesky() const { return chol_; }

 private:
  NoiseSpec(std::size_t n, Kind k) : n_(n), kind_(std::move(k)) {}

  std::size_t n_ = 0;
  Kind kind_;
  Matrix chol_;
  NoiseEnvelope envelope_ = NoiseEnvelope::kNone;
};

/// Writes gamma_t into `out` (length spec.size()).
void sample_noise_into(const NoiseSpec& spec, std::int64_t t, const Stream& stream, std::span<double> out);
StateVector sample_noise(const NoiseSpec& spec, std::int64_t t, const Stream& stream);

/// Cholesky factor of a symmetric PSD matrix; zero pivots (within tol) produce zero columns.
Matrix psd_cholesky(const Matrix& sigma, double tol = 1e-12);

/// Deterministic learning-rate schedule that sweeps back and forth between
/// `lower` and `upper` with steps c/t, so its limit points fill the interval
/// while the steps still sum to infinity.
struct EpsilonOscillator {
  double c = 0.1;
  double lower = 0.25;
  double upper = 0.75;
  double start = 0.5;

  struct Trace {
    std::vector<double> eps;            ///< eps[t-1] is eps_t, t = 1..T
    std::vector<std::int64_t> flips;    ///< times t at which the direction reverses after step t
  };

  /// The direction flips after step t when the next step c/(t+1) would leave [lower, upper].
  Trace trace(std::int64_t horizon) const;
};

/// eps_1..eps_T of the default oscillator (c = 1/10 on [1/4, 3/4], start 1/2).
std::vector<double> epsilon_oscillator_sequence(std::int64_t horizon);

}  // namespace consensus

#endif  // CONSENSUS_NOISE_HPP_
