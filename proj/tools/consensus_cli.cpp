// consensus: run scenarios, check their hypotheses, reproduce catalog cases and
// re-analyze saved ensembles.
//
// Exit codes: 0 pass, 1 an expectation failed, 2 usage or configuration error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "consensus/harness.hpp"

namespace h = consensus::harness;
using nlohmann::json;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> horizon;
  std::optional<std::size_t> ensemble;
  std::string out_dir;
  int threads = 0;
  std::vector<std::string> tols;
  bool json = false;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--horizon", o.horizon, "number of steps T")->check(CLI::NonNegativeNumber);
  cmd->add_option("--ensemble", o.ensemble, "number of independent runs");
  cmd->add_option("--out-dir", o.out_dir, "write CSV and summary files under this directory");
  cmd->add_option("--threads", o.threads, "OpenMP threads (never changes results)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--tol", o.tols, "tolerance override key=value (repeatable)");
  cmd->add_flag("--json", o.json, "print the full summary as JSON");
}

h::RunOptions to_options(const Overrides& o) {
  h::RunOptions r;
  r.seed = o.seed;
  r.horizon = o.horizon;
  r.ensemble = o.ensemble;
  r.threads = o.threads;
  if (!o.out_dir.empty()) r.out_dir = o.out_dir;
  for (const std::string& kv : o.tols) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw consensus::InvalidArgument("--tol expects key=value, got '" + kv + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(kv.substr(eq + 1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != kv.size() - eq - 1) throw consensus::InvalidArgument("--tol value is not a number: " + kv);
    r.tolerances[kv.substr(0, eq)] = v;
  }
  return r;
}

std::string brief(const json& j) {
  if (j.is_null()) return "null";
  std::string s = j.dump();
  return s.size() > 60 ? s.substr(0, 57) + "..." : s;
}

void print_summary(const h::RunSummary& s, bool as_json) {
  if (as_json) {
    std::cout << s.to_json().dump(2) << '\n';
    return;
  }
  std::printf("scenario %s  seed %llu  T=%lld  m=%zu\n", s.scenario_id.c_str(),
              static_cast<unsigned long long>(s.master_seed), static_cast<long long>(s.horizon), s.ensemble);
  for (const auto& c : s.checks) {
    std::string what = c.error ? "error: " + *c.error
                               : std::string(c.result.at("satisfied").get<bool>() ? "satisfied" : "violated") +
                                     (c.result.at("advisory").get<bool>() ? " (advisory)" : "");
    std::printf("  [%s] check %-18s %s\n", c.passed ? " ok " : "FAIL", c.name.c_str(), what.c_str());
  }
  for (const auto& a : s.analyses) {
    std::string what;
    if (a.error) {
      what = "error: " + *a.error;
    } else {
      what = "value " + brief(a.result.value("value", json()));
      if (a.result.contains("unmet")) what += "  (" + a.result.at("unmet").get<std::string>() + ")";
    }
    std::printf("  [%s] %-24s %s\n", a.passed ? " ok " : "FAIL", a.name.c_str(), what.c_str());
  }
  for (const auto& [k, path] : s.files) std::printf("  wrote %s\n", path.c_str());
  std::printf("%s (%.2f s)\n", s.passed() ? "PASS" : "FAIL", s.timing.at("total"));
}


int cmd_run(const std::string& target, const Overrides& o, bool checks_only) {
  h::Scenario s = h::resolve_scenario(target);
  h::RunOptions opts = to_options(o);
  opts.checks_only = checks_only;
  const h::RunSummary summary = h::run_scenario(s, opts);
  print_summary(summary, o.json);
  return summary.passed() ? kPass : kFail;
}

int cmd_list() {
  for (const auto& e : h::catalog()) std::printf("%-24s %s: %s\n", e.id.c_str(), e.anchor.c_str(), e.summary.c_str());
  return kPass;
}

int cmd_stats(const std::string& path, std::int64_t t_final, double alpha) {
  std::ifstream in(path);
  if (!in) throw consensus::ParseError("", "cannot open file", path);
  consensus::EmpiricalSample sample{h::read_ensemble_csv(in), t_final, false};
  json out;
  out["file"] = path;
  out["m"] = sample.m();
  out["n"] = sample.n();
  const consensus::Moments mom = consensus::empirical_moments(sample);
  out["mean"] = mom.mean;
  json cov = json::array();
  for (std::size_t i = 0; i < sample.n(); ++i) {
    cov.push_back(std::vector<double>(mom.covariance.row(i).begin(), mom.covariance.row(i).end()));
  }
  out["covariance"] = cov;
  if (t_final > 0) {
    out["t_final"] = t_final;
    const consensus::Moments scaled = consensus::empirical_moments(sample.centered_scaled_copy());
    out["scaled_rank_one_score"] = consensus::rank_one_score(scaled.covariance);
  }
  out["rank_one_score"] = consensus::rank_one_score(mom.covariance);
  json ks = json::array();
  for (std::size_t j = 0; j < sample.n(); ++j) {
    const double mu = mom.mean[j], sd = std::sqrt(mom.covariance(j, j));
    const std::vector<double> col = sample.column(j);
    const double stat =
        sd > 0.0 ? consensus::ks_statistic(col, [&](double v) { return consensus::normal_cdf(v, mu, sd); }) : 1.0;
    ks.push_back({{"component", j}, {"statistic", stat}, {"critical", consensus::ks_critical(sample.m(), alpha)}});
  }
  out["ks_normal_fit"] = ks;
  std::cout << out.dump(2) << '\n';
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-dynamics simulation and verification"};
  app.require_subcommand(1);

  Overrides run_o, check_o, repro_o;
  std::string run_target, check_target, repro_id, stats_path;
  std::int64_t stats_t = 0;
  double stats_alpha = 0.01;

  auto* run = app.add_subcommand("run", "run a scenario file or catalog id");
  run->add_option("scenario", run_target, "scenario JSON file or catalog id")->required();
  add_override_flags(run, run_o);

  auto* check = app.add_subcommand("check", "evaluate a scenario's conditions only");
  check->add_option("scenario", check_target, "scenario JSON file or catalog id")->required();
  add_override_flags(check, check_o);

  auto* repro = app.add_subcommand("reproduce", "run a catalog case and assert its expectations");
  repro->add_option("id", repro_id, "catalog id")->required();
  add_override_flags(repro, repro_o);

  app.add_subcommand("list", "list the built-in catalog");

  auto* stats = app.add_subcommand("stats", "re-analyze a saved ensemble CSV");
  stats->add_option("ensemble_csv", stats_path, "file written by 'run'")->required();
  stats->add_option("--t-final", stats_t, "horizon of the sample, enables (X - mean)/sqrt(T) scaling");
  stats->add_option("--alpha", stats_alpha, "KS significance level")->check(CLI::Range(1e-6, 0.5));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_target, run_o, false);
    if (check->parsed()) return cmd_run(check_target, check_o, true);
    if (repro->parsed()) {
      h::catalog_scenario(repro_id);  // reject non-catalog targets
      return cmd_run(repro_id, repro_o, false);
    }
    if (stats->parsed()) return cmd_stats(stats_path, stats_t, stats_alpha);
    return cmd_list();
  } catch (const consensus::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const consensus::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
