#include <algorithm>
#include <exception>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "consensus/dynamics.hpp"
#include "step_kernel.hpp"

namespace consensus {

namespace {

EnsembleSample make_sample(const ModelSpec& spec, std::int64_t horizon, std::size_t m, std::uint64_t master_seed,
                           const EnsembleOptions& options) {
  if (m == 0) throw InvalidArgument("ensemble needs at least one run");
  if (horizon < 0) throw InvalidArgument("horizon must be nonnegative");
  if (m > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("ensemble too large");
  EnsembleSample out;
  out.m = m;
  out.n = spec.n;
  out.horizon = horizon;
  out.master_seed = master_seed;
  out.terminal = Matrix(m, spec.n);
  for (std::int64_t t : options.snapshot_times) {
    if (t < 0 || t > horizon) {
      throw InvalidArgument("snapshot time " + std::to_string(t) + " outside [0, horizon]");
    }
    out.snapshots.emplace(t, Matrix(m, spec.n));
  }
  return out;
}

// One ensemble member. Writes only row `run` of the output matrices, so runs
// can execute concurrently.
void run_member(const ModelSpec& spec, const detail::StepKernel& kernel, std::int64_t horizon, std::size_t run,
                EnsembleSample& out) {
  const std::size_t n = spec.n;
  const Stream stream = substream(out.master_seed, static_cast<std::uint32_t>(run));
  StateVector x = spec.x0;
  StateVector next(n);
  StateVector gamma(kernel.needs_noise() ? n : 0);

  auto snapshot = out.snapshots.begin();
  auto record = [&](std::int64_t t) {
    while (snapshot != out.snapshots.end() && snapshot->first == t) {
      std::copy(x.begin(), x.end(), snapshot->second.row(run).begin());
      ++snapshot;
    }
  };

  record(0);
  for (std::int64_t t = 1; t <= horizon; ++t) {
    if (!gamma.empty()) sample_noise_into(spec.noise, t, stream, gamma);
    kernel.step(t, x, gamma, next);
    x.swap(next);
    record(t);
  }
  std::copy(x.begin(), x.end(), out.terminal.row(run).begin());
}

}  // namespace

EnsembleSample simulate_ensemble(const ModelSpec& spec, std::int64_t horizon, std::size_t m,
                                 std::uint64_t master_seed, const EnsembleOptions& options) {
  EnsembleSample out = make_sample(spec, horizon, m, master_seed, options);
  const detail::StepKernel kernel(spec, horizon);
  const auto runs = static_cast<std::int64_t>(m);

#ifdef _OPENMP
  const int threads = options.threads > 0 ? options.threads : omp_get_max_threads();
#else
  const int threads = 1;
#endif

  // Exceptions must not escape an OpenMP region; keep the first one and rethrow.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::int64_t r = 0; r < runs; ++r) {
    try {
      run_member(spec, kernel, horizon, static_cast<std::size_t>(r), out);
    } catch (...) {
#pragma omp critical(consensus_ensemble_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  (void)threads;
  return out;
}

EnsembleSample simulate_ensemble_serial(const ModelSpec& spec, std::int64_t horizon, std::size_t m,
                                        std::uint64_t master_seed, const EnsembleOptions& options) {
  EnsembleSample out = make_sample(spec, horizon, m, master_seed, options);
  const detail::StepKernel kernel(spec, horizon);
  for (std::size_t r = 0; r < m; ++r) run_member(spec, kernel, horizon, r, out);
  return out;
}

}  // namespace consensus
