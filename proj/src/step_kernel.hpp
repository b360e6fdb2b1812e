#ifndef CONSENSUS_SRC_STEP_KERNEL_HPP_
#define CONSENSUS_SRC_STEP_KERNEL_HPP_

// Allocation-free update rules shared by the public step functions, simulate()
// and the ensemble drivers.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "consensus/dynamics.hpp"

namespace consensus::detail {

/// out = A x + eps o (target + gamma - x); `gamma` may be empty (zero noise).
void feedback_into(const Matrix& a, std::span<const double> eps, double target, std::span<const double> gamma,
                   std::span<const double> x, std::span<double> out);

/// out = A x + f_i(target + gamma - x); `fs` has size 1 (shared) or n.
void nonlinear_into(const Matrix& a, std::span<const LearningFunction> fs, double target,
                    std::span<const double> gamma, std::span<const double> x, std::span<double> out);

/// out = A x + eps o sign(target + gamma - x).
void sign_into(const Matrix& a, std::span<const double> eps, double target, std::span<const double> gamma,
               std::span<const double> x, std::span<double> out);

/// out = B x + eps o gamma.
void average_into(const Matrix& b, std::span<const double> eps, std::span<const double> gamma,
                  std::span<const double> x, std::span<double> out);

/// A model with its schedules resolved for t = 1..horizon (once when both are constant).
class StepKernel {
 public:
  StepKernel(const ModelSpec& spec, std::int64_t horizon);

  void step(std::int64_t t, std::span<const double> x, std::span<const double> gamma, std::span<double> out) const;
  std::optional<double> rho(std::int64_t t) const;
  bool needs_noise() const { return !spec_.noise.is_zero(); }

 private:
  struct Slice {
    Matrix a;
    std::vector<double> eps;
    Matrix b;  // Average family only
    std::optional<double> rho;
  };

  const Slice& slice(std::int64_t t) const {
    return slices_.size() == 1 ? slices_.front() : slices_[static_cast<std::size_t>(t - 1)];
  }
  Slice resolve(std::int64_t t) const;

  const ModelSpec& spec_;
  std::vector<Slice> slices_;
};

}  // namespace consensus::detail

#endif  // CONSENSUS_SRC_STEP_KERNEL_HPP_
