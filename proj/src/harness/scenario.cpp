#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include "consensus/harness.hpp"

namespace consensus::harness {

using nlohmann::json;

namespace {

std::string escape_pointer(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// A JSON value together with its location in the document.
class Field {
 public:
  Field(const json& value, std::string pointer) : value_(&value), pointer_(std::move(pointer)) {}

  const json& value() const { return *value_; }
  const std::string& pointer() const { return pointer_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(pointer_, what);
  }

  bool has(const std::string& key) const { return value_->is_object() && value_->contains(key); }

  Field operator[](const std::string& key) const {
    if (!value_->is_object()) fail("expected an object");
    const auto it = value_->find(key);
    if (it == value_->end()) fail("missing required field '" + key + "'");
    return Field(*it, pointer_ + "/" + escape_pointer(key));
  }

  std::optional<Field> find(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return (*this)[key];
  }

  Field at(std::size_t i) const { return Field((*value_)[i], pointer_ + "/" + std::to_string(i)); }

  std::size_t size() const {
    if (!value_->is_array()) fail("expected an array");
    return value_->size();
  }

  void only(std::initializer_list<const char*> keys) const {
    if (!value_->is_object()) fail("expected an object");
    for (const auto& [k, v] : value_->items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        std::vector<std::string> known(keys.begin(), keys.end());
        Field(v, pointer_ + "/" + escape_pointer(k)).fail("unknown field (known: " + join(known) + ")");
      }
    }
  }

  double number() const {
    if (!value_->is_number()) fail("expected a number");
    const double v = value_->get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }

  std::int64_t integer() const {
    if (!value_->is_number_integer()) fail("expected an integer");
    return value_->get<std::int64_t>();
  }

  std::int64_t nonnegative() const {
    const std::int64_t v = integer();
    if (v < 0) fail("must be nonnegative, got " + std::to_string(v));
    return v;
  }

  std::uint64_t unsigned_integer() const {
    if (value_->is_number_unsigned()) return value_->get<std::uint64_t>();
    return static_cast<std::uint64_t>(nonnegative());
  }

  bool boolean() const {
    if (!value_->is_boolean()) fail("expected true or false");
    return value_->get<bool>();
  }

  std::string string() const {
    if (!value_->is_string()) fail("expected a string");
    return value_->get<std::string>();
  }

  std::vector<double> vector(std::optional<std::size_t> n = std::nullopt) const {
    const std::size_t k = size();
    if (n && k != *n) fail("expected " + std::to_string(*n) + " entries, got " + std::to_string(k));
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = at(i).number();
    return out;
  }

  Matrix matrix(std::size_t n) const {
    if (size() != n) fail("expected " + std::to_string(n) + " rows");
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> row = at(i).vector(n);
      std::copy(row.begin(), row.end(), m.row(i).begin());
    }
    return m;
  }

  // Runs `fn`, re-raising library validation errors as parse errors at this field.
  template <class Fn>
  auto guard(Fn&& fn) const -> decltype(fn()) {
    try {
      return fn();
    } catch (const ParseError&) {
      throw;
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
  }

 private:
  const json* value_;
  std::string pointer_;
};

// Lazily extended oscillator trace shared by the schedule closures.
class OscillatorCache {
 public:
  explicit OscillatorCache(EpsilonOscillator osc) : osc_(osc) {}
  double at(std::int64_t t) {
    std::lock_guard lock(mutex_);
    if (static_cast<std::size_t>(t) > eps_.size()) {
      eps_ = osc_.trace(std::max<std::int64_t>(t, 2 * static_cast<std::int64_t>(eps_.size()))).eps;
    }
    return eps_[static_cast<std::size_t>(t - 1)];
  }

 private:
  EpsilonOscillator osc_;
  std::mutex mutex_;
  std::vector<double> eps_;
};

const std::vector<std::string> kMatrixGenerators = {"interpolate"};
const std::vector<std::string> kRateGenerators = {"epsilon_oscillator", "interpolate"};
const std::vector<std::string> kRhoGenerators = {"rho_harmonic", "rho_exp_inverse_square"};

StochasticMatrix parse_stochastic(const Field& f, std::size_t n) {
  const Matrix m = f.matrix(n);
  return f.guard([&] { return StochasticMatrix(m); });
}

LearningRates parse_rates(const Field& f, std::size_t n) {
  if (f.value().is_number()) return f.guard([&] { return LearningRates::uniform(n, f.number()); });
  const std::vector<double> v = f.vector(n);
  return f.guard([&] { return LearningRates(v); });
}

MatrixSchedule parse_matrix_schedule(const Field& f, std::size_t n) {
  if (f.value().is_array()) return MatrixSchedule::constant(parse_stochastic(f, n));
  f.only({"constant", "table", "generator", "params"});
  if (auto c = f.find("constant")) return MatrixSchedule::constant(parse_stochastic(*c, n));
  if (auto t = f.find("table")) {
    std::vector<StochasticMatrix> rows;
    for (std::size_t i = 0; i < t->size(); ++i) rows.push_back(parse_stochastic(t->at(i), n));
    if (rows.empty()) t->fail("table is empty");
    return MatrixSchedule::table(std::move(rows));
  }
  const Field g = f["generator"];
  const std::string name = g.string();
  if (name == "interpolate") {
    const Field p = f["params"];
    p.only({"from", "to", "rate"});
    const Matrix from = parse_stochastic(p["from"], n).matrix();
    const Matrix to = parse_stochastic(p["to"], n).matrix();
    const double rate = p["rate"].number();
    if (!(rate >= 0.0 && rate < 1.0)) p["rate"].fail("rate must lie in [0, 1)");
    return MatrixSchedule::generated("interpolate", [from, to, rate](std::int64_t t) {
      const double w = std::pow(rate, static_cast<double>(t));
      Matrix m = to;
      for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] += w * (from.data()[i] - to.data()[i]);
      return StochasticMatrix(m);
    });
  }
  g.fail("unknown matrix generator '" + name + "' (known: " + join(kMatrixGenerators) + ")");
}

RatesSchedule parse_rates_schedule(const Field& f, std::size_t n) {
  if (f.value().is_number() || f.value().is_array()) return RatesSchedule::constant(parse_rates(f, n));
  f.only({"constant", "table", "generator", "params"});
  if (auto c = f.find("constant")) return RatesSchedule::constant(parse_rates(*c, n));
  if (auto t = f.find("table")) {
    std::vector<LearningRates> rows;
    for (std::size_t i = 0; i < t->size(); ++i) rows.push_back(parse_rates(t->at(i), n));
    if (rows.empty()) t->fail("table is empty");
    return RatesSchedule::table(std::move(rows));
  }
  const Field g = f["generator"];
  const std::string name = g.string();
  const json empty = json::object();
  const Field p = f.has("params") ? f["params"] : Field(empty, f.pointer() + "/params");
  if (name == "epsilon_oscillator") {
    p.only({"c", "lower", "upper", "start"});
    EpsilonOscillator osc;
    if (auto v = p.find("c")) osc.c = v->number();
    if (auto v = p.find("lower")) osc.lower = v->number();
    if (auto v = p.find("upper")) osc.upper = v->number();
    if (auto v = p.find("start")) osc.start = v->number();
    if (!(osc.c > 0.0 && osc.lower < osc.start && osc.start < osc.upper)) {
      p.fail("oscillator needs c > 0 and lower < start < upper");
    }
    auto cache = std::make_shared<OscillatorCache>(osc);
    return RatesSchedule::generated("epsilon_oscillator",
                                    [cache, n](std::int64_t t) { return LearningRates::uniform(n, cache->at(t)); });
  }
  if (name == "interpolate") {
    p.only({"from", "to", "rate"});
    const LearningRates from = parse_rates(p["from"], n);
    const LearningRates to = parse_rates(p["to"], n);
    const double rate = p["rate"].number();
    if (!(rate >= 0.0 && rate < 1.0)) p["rate"].fail("rate must lie in [0, 1)");
    return RatesSchedule::generated("interpolate", [from, to, rate, n](std::int64_t t) {
      const double w = std::pow(rate, static_cast<double>(t));
      std::vector<double> e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = to[i] + w * (from[i] - to[i]);
      return LearningRates(e);
    });
  }
  g.fail("unknown rate generator '" + name + "' (known: " + join(kRateGenerators) + ")");
}

RhoSchedule parse_rho_schedule(const Field& f) {
  auto check = [](const Field& at, double v) {
    if (v < 0.0) at.fail("contraction factors must be nonnegative");
    return v;
  };
  if (f.value().is_number()) return RhoSchedule::constant(check(f, f.number()));
  f.only({"constant", "table", "generator"});
  if (auto c = f.find("constant")) return RhoSchedule::constant(check(*c, c->number()));
  if (auto t = f.find("table")) {
    std::vector<double> v = t->vector();
    if (v.empty()) t->fail("table is empty");
    for (std::size_t i = 0; i < v.size(); ++i) check(t->at(i), v[i]);
    return RhoSchedule::table(std::move(v));
  }
  const Field g = f["generator"];
  const std::string name = g.string();
  if (name == "rho_harmonic") {
    return RhoSchedule::generated(name,
                                  [](std::int64_t t) { return static_cast<double>(t) / static_cast<double>(t + 1); });
  }
  if (name == "rho_exp_inverse_square") {
    return RhoSchedule::generated(name, [](std::int64_t t) {
      const auto d = static_cast<double>(t);
      return std::exp(-1.0 / (d * d));
    });
  }
  g.fail("unknown rho generator '" + name + "' (known: " + join(kRhoGenerators) + ")");
}

NoiseSpec parse_noise(const Field& f, std::size_t n) {
  f.only({"kind", "rate", "mean", "covariance", "scale", "rows", "envelope"});
  const std::string kind = f["kind"].string();
  NoiseSpec spec = NoiseSpec::zero(n);
  if (kind == "zero") {
    spec = NoiseSpec::zero(n);
  } else if (kind == "decaying") {
    spec = f.guard([&] { return NoiseSpec::decaying(n, f["rate"].number()); });
  } else if (kind == "gaussian") {
    std::vector<double> mean = f.has("mean") ? f["mean"].vector(n) : std::vector<double>(n, 0.0);
    Matrix cov = f.has("covariance") ? f["covariance"].matrix(n) : Matrix::identity(n);
    spec = f.guard([&] { return NoiseSpec::gaussian(std::move(mean), std::move(cov)); });
  } else if (kind == "rademacher") {
    spec = NoiseSpec::rademacher(n);
  } else if (kind == "cauchy") {
    const double scale = f.has("scale") ? f["scale"].number() : 1.0;
    spec = f.guard([&] { return NoiseSpec::cauchy(n, scale); });
  } else if (kind == "table") {
    const Field rows = f["rows"];
    std::vector<StateVector> v;
    for (std::size_t i = 0; i < rows.size(); ++i) v.push_back(rows.at(i).vector(n));
    spec = f.guard([&] { return NoiseSpec::table(std::move(v)); });
  } else {
    f["kind"].fail("unknown noise kind '" + kind + "' (known: zero, decaying, gaussian, rademacher, cauchy, table)");
  }
  if (auto e = f.find("envelope")) {
    const std::string env = e->string();
    if (env == "inverse_t") {
      spec = spec.with_envelope(NoiseEnvelope::kInverseT);
    } else if (env != "none") {
      e->fail("unknown envelope '" + env + "' (known: none, inverse_t)");
    }
  }
  return spec;
}

LearningFunction parse_learning_function(const Field& f) {
  f.only({"kind", "slope", "gain", "half_width"});
  const std::string kind = f["kind"].string();
  if (kind == "linear") return f.guard([&] { return LearningFunction::linear(f["slope"].number()); });
  if (kind == "tanh") {
    const double gain = f["gain"].number();
    const double hw = f.has("half_width") ? f["half_width"].number() : std::numeric_limits<double>::infinity();
    return f.guard([&] { return LearningFunction::scaled_tanh(gain, hw); });
  }
  f["kind"].fail("unknown learning function '" + kind + "' (known: linear, tanh, signum)");
}

Feedback parse_feedback(const Field& f) {
  if (f.value().is_array()) {
    std::vector<LearningFunction> fs;
    for (std::size_t i = 0; i < f.size(); ++i) fs.push_back(parse_learning_function(f.at(i)));
    return fs;
  }
  if (f.has("kind") && f["kind"].value() == "signum") {
    f.only({"kind"});
    return SignFeedback{};
  }
  return std::vector<LearningFunction>{parse_learning_function(f)};
}

ModelSpec parse_model(const Field& f) {
  f.only({"family", "n", "A", "epsilon", "sigma_bar", "noise", "learning_function", "x0"});
  ModelSpec m;
  m.family = f["family"].guard([&] { return family_from_string(f["family"].string()); });
  const std::int64_t n = f["n"].integer();
  if (n < 1) f["n"].fail("need at least one agent");
  m.n = static_cast<std::size_t>(n);
  m.schedule_a = parse_matrix_schedule(f["A"], m.n);
  if (auto e = f.find("epsilon")) m.schedule_e = parse_rates_schedule(*e, m.n);
  if (auto s = f.find("sigma_bar")) m.sigma_bar = s->number();
  m.noise = f.has("noise") ? parse_noise(f["noise"], m.n) : NoiseSpec::zero(m.n);
  if (auto lf = f.find("learning_function")) m.feedback = parse_feedback(*lf);
  const Field x0 = f["x0"];
  m.x0 = x0.value().is_number() ? StateVector(m.n, x0.number()) : x0.vector(m.n);

  const bool uses_rates = !(m.family == Family::kNonlinear && m.feedback &&
                            std::holds_alternative<std::vector<LearningFunction>>(*m.feedback));
  if (uses_rates && !f.has("epsilon")) f.fail("missing required field 'epsilon'");
  f.guard([&] { m.validate(); });
  return m;
}

const std::vector<std::string> kChecks = {"base_rates",         "average_rates",      "product_to_zero",
                                          "bounded_product_sums", "summable_variation", "nonlinear_bounds"};
const std::vector<std::string> kAnalyses = {
    "consensus_time",   "detect_periodicity", "contraction_envelope", "final_error",      "ensemble_mean_error",
    "ks_cauchy",        "ks_normal_fit",      "wasserstein_drift",    "distribution_drift", "clt_covariance",
    "rank_one_score",   "product_limit",      "oscillation_decay",    "moments"};

}  // namespace

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> defaults = {
      {"product_tol", kProductTol},  {"summability_tol", kSummabilityTol}, {"product_sum_bound", kProductSumBound},
      {"growth_tol", kGrowthTol},    {"consensus_tol", 1e-6},              {"periodicity_tol", 1e-9},
      {"ks_alpha", 0.01},            {"clt_rel_tol", 0.15},                {"rank_one_tol", 1e-10},
      {"envelope_slack", 1e-12},
  };
  return defaults;
}

double Scenario::tolerance(const std::string& key) const {
  if (const auto it = tolerances.find(key); it != tolerances.end()) return it->second;
  const auto& d = default_tolerances();
  if (const auto it = d.find(key); it != d.end()) return it->second;
  throw InvalidArgument("unknown tolerance '" + key + "'");
}

Scenario parse_scenario(const json& doc, const std::string& origin) {
  try {
    const Field root(doc, "");
    root.only({"schema_version", "id", "description", "model", "rho", "horizon", "ensemble", "master_seed", "checks",
               "analyses", "tolerances", "outputs"});
    Scenario s;
    s.source = doc;
    if (root["schema_version"].integer() != kSchemaVersion) {
      root["schema_version"].fail("unsupported schema version (this build reads " + std::to_string(kSchemaVersion) +
                                  ")");
    }
    s.id = root["id"].string();
    if (s.id.empty()) root["id"].fail("id must not be empty");
    if (auto d = root.find("description")) s.description = d->string();
    if (auto m = root.find("model")) s.model = parse_model(*m);
    if (auto r = root.find("rho")) s.rho = parse_rho_schedule(*r);
    if (!s.model && !s.rho) root.fail("scenario needs a 'model' or a 'rho' schedule");
    s.horizon = root["horizon"].nonnegative();

    if (auto e = root.find("ensemble")) {
      if (e->value().is_object()) {
        e->only({"size", "snapshots"});
        s.ensemble = static_cast<std::size_t>((*e)["size"].nonnegative());
        if (auto snaps = e->find("snapshots")) {
          for (std::size_t i = 0; i < snaps->size(); ++i) s.snapshots.push_back(snaps->at(i).nonnegative());
        }
      } else {
        s.ensemble = static_cast<std::size_t>(e->nonnegative());
      }
      if (s.ensemble > 0 && !s.model) e->fail("an ensemble needs a model");
    }
    if (auto seed = root.find("master_seed")) s.master_seed = seed->unsigned_integer();

    if (auto checks = root.find("checks")) {
      for (std::size_t i = 0; i < checks->size(); ++i) {
        const Field c = checks->at(i);
        CheckSpec spec;
        if (c.value().is_string()) {
          spec.name = c.string();
        } else {
          c.only({"name", "params", "expect"});
          spec.name = c["name"].string();
          if (auto p = c.find("params")) {
            if (!p->value().is_object()) p->fail("expected an object");
            spec.params = p->value();
          }
          if (auto x = c.find("expect")) spec.expect = x->boolean();
        }
        if (std::find(kChecks.begin(), kChecks.end(), spec.name) == kChecks.end()) {
          c.fail("unknown check '" + spec.name + "' (known: " + join(kChecks) + ")");
        }
        const bool rho_check = spec.name == "product_to_zero" || spec.name == "bounded_product_sums";
        if (!rho_check && !s.model) c.fail("check '" + spec.name + "' needs a model");
        s.checks.push_back(std::move(spec));
      }
    }

    if (auto analyses = root.find("analyses")) {
      for (std::size_t i = 0; i < analyses->size(); ++i) {
        const Field a = analyses->at(i);
        a.only({"op", "params", "expect"});
        AnalysisSpec spec;
        spec.op = a["op"].string();
        if (std::find(kAnalyses.begin(), kAnalyses.end(), spec.op) == kAnalyses.end()) {
          a["op"].fail("unknown analysis '" + spec.op + "' (known: " + join(kAnalyses) + ")");
        }
        if (!s.model) a.fail("analyses need a model");
        if (auto p = a.find("params")) {
          if (!p->value().is_object()) p->fail("expected an object");
          spec.params = p->value();
        }
        if (auto x = a.find("expect")) {
          if (!x->value().is_object()) x->fail("expected an object");
          spec.expect = x->value();
        }
        s.analyses.push_back(std::move(spec));
      }
    }

    if (auto tols = root.find("tolerances")) {
      if (!tols->value().is_object()) tols->fail("expected an object");
      for (const auto& [k, v] : tols->value().items()) {
        const Field t(v, tols->pointer() + "/" + escape_pointer(k));
        if (!default_tolerances().contains(k)) t.fail("unknown tolerance '" + k + "'");
        s.tolerances[k] = t.number();
      }
    }

    if (auto out = root.find("outputs")) {
      out->only({"trajectory", "ensemble", "summary"});
      if (auto v = out->find("trajectory")) s.outputs.trajectory = v->boolean();
      if (auto v = out->find("ensemble")) s.outputs.ensemble = v->boolean();
      if (auto v = out->find("summary")) s.outputs.summary = v->boolean();
    }
    return s;
  } catch (const ParseError& e) {
    throw ParseError(e.pointer(), e.message(), origin);
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("", "cannot open scenario file", path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("", e.what(), path.string());
  }
  return parse_scenario(doc, path.string());
}

}  // namespace consensus::harness
