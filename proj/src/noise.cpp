#include "consensus/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "consensus/errors.hpp"

namespace consensus {

double Stream::normal(std::uint64_t t, std::uint32_t component) const {
  const auto [u1, u2] = uniforms(t, component);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Stream::cauchy(std::uint64_t t, std::uint32_t component) const {
  const double u = uniforms(t, component)[0];
  return std::tan(std::numbers::pi * (u - 0.5));
}

Matrix psd_cholesky(const Matrix& sigma, double tol) {
  const std::size_t n = sigma.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = sigma(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d < -tol * std::max(1.0, std::abs(sigma(j, j)))) {
      throw InvalidArgument("covariance is not positive semidefinite (pivot " + std::to_string(j) + ")");
    }
    if (d <= tol) continue;  // degenerate direction: leave the column at zero
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = sigma(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

NoiseSpec NoiseSpec::zero(std::size_t n) { return NoiseSpec(n, ZeroNoise{}); }

NoiseSpec NoiseSpec::decaying(std::size_t n, double rate) {
  if (!std::isfinite(rate)) throw InvalidArgument("decay rate must be finite");
  return NoiseSpec(n, DecayingNoise{rate});
}

NoiseSpec NoiseSpec::gaussian(std::vector<double> mu, Matrix sigma) {
  const std::size_t n = mu.size();
  if (sigma.rows() != n || sigma.cols() != n) throw DimensionMismatch("gaussian noise: mu and sigma differ in size");
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-12 * std::max(1.0, std::abs(sigma(i, j)))) {
        throw InvalidArgument("gaussian noise: covariance is not symmetric");
      }
    }
  }
  Matrix chol = psd_cholesky(sigma);
  NoiseSpec spec(n, GaussianNoise{std::move(mu), std::move(sigma)});
  spec.chol_ = std::move(chol);
  return spec;
}

NoiseSpec NoiseSpec::standard_gaussian(std::size_t n) {
  return gaussian(std::vector<double>(n, 0.0), Matrix::identity(n));
}

NoiseSpec NoiseSpec::rademacher(std::size_t n) { return NoiseSpec(n, RademacherNoise{}); }

NoiseSpec NoiseSpec::cauchy(std::size_t n, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("cauchy scale must be positive");
  return NoiseSpec(n, CauchyNoise{scale});
}

NoiseSpec NoiseSpec::table(std::vector<StateVector> rows) {
  if (rows.empty()) throw InvalidArgument("noise table is empty");
  const std::size_t n = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionMismatch("noise table rows differ in length");
  }
  return NoiseSpec(n, TableNoise{std::move(rows)});
}

std::optional<Matrix> NoiseSpec::covariance() const {
  if (const auto* g = std::get_if<GaussianNoise>(&kind_)) return g->sigma;
  if (std::holds_alternative<RademacherNoise>(kind_)) return Matrix::identity(n_);
  if (std::holds_alternative<ZeroNoise>(kind_) || std::holds_alternative<DecayingNoise>(kind_)) {
    return Matrix(n_, n_);
  }
  return std::nullopt;
}

void sample_noise_into(const NoiseSpec& spec, std::int64_t t, const Stream& stream, std::span<double> out) {
  const std::size_t n = spec.size();
  if (out.size() != n) throw DimensionMismatch("noise output has the wrong length");
  const auto tt = static_cast<std::uint64_t>(t);
  const auto& kind = spec.kind();

  if (std::holds_alternative<ZeroNoise>(kind)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  if (const auto* d = std::get_if<DecayingNoise>(&kind)) {
    std::fill(out.begin(), out.end(), std::pow(d->rate, static_cast<double>(t)));
  } else if (const auto* g = std::get_if<GaussianNoise>(&kind)) {
    // z_c comes from block (t, c); gamma = mu + L z.
    double z[64];
    std::vector<double> zbuf;
    double* zp = z;
    if (n > 64) {
      zbuf.resize(n);
      zp = zbuf.data();
    }
    for (std::size_t c = 0; c < n; ++c) zp[c] = stream.normal(tt, static_cast<std::uint32_t>(c));
    const Matrix& l = spec.cholesky();
    for (std::size_t i = 0; i < n; ++i) {
      double s = g->mu[i];
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * zp[k];
      out[i] = s;
    }
  } else if (std::holds_alternative<RademacherNoise>(kind)) {
    for (std::size_t c = 0; c < n; ++c) out[c] = stream.rademacher(tt, static_cast<std::uint32_t>(c));
  } else if (const auto* cy = std::get_if<CauchyNoise>(&kind)) {
    for (std::size_t c = 0; c < n; ++c) out[c] = cy->scale * stream.cauchy(tt, static_cast<std::uint32_t>(c));
  } else if (const auto* tab = std::get_if<TableNoise>(&kind)) {
    if (t < 1 || static_cast<std::size_t>(t) > tab->rows.size()) {
      throw ExhaustedTable(t, "noise table has " + std::to_string(tab->rows.size()) + " rows");
    }
    const auto& r = tab->rows[static_cast<std::size_t>(t - 1)];
    std::copy(r.begin(), r.end(), out.begin());
  }

  if (spec.envelope() == NoiseEnvelope::kInverseT) {
    const double s = 1.0 / static_cast<double>(t);
    for (double& x : out) x *= s;
  }
}

StateVector sample_noise(const NoiseSpec& spec, std::int64_t t, const Stream& stream) {
  StateVector out(spec.size());
  sample_noise_into(spec, t, stream, out);
  return out;
}

EpsilonOscillator::Trace EpsilonOscillator::trace(std::int64_t horizon) const {
  Trace tr;
  tr.eps.reserve(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)));
  double eps = start;
  double dir = 1.0;
  for (std::int64_t t = 1; t <= horizon; ++t) {
    eps += dir * c / static_cast<double>(t);
    tr.eps.push_back(eps);
    const double next = c / static_cast<double>(t + 1);
    if (dir > 0.0 && eps + next > upper) {
      dir = -1.0;
      tr.flips.push_back(t);
    } else if (dir < 0.0 && eps - next < lower) {
      dir = 1.0;
      tr.flips.push_back(t);
    }
  }
  return tr;
}

std::vector<double> epsilon_oscillator_sequence(std::int64_t horizon) {
  return EpsilonOscillator{}.trace(horizon).eps;
}

}  // namespace consensus
