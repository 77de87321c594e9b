#include "mislab/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "mislab/analytic.hpp"
#include "mislab/estimators.hpp"
#include "mislab/oracle.hpp"

namespace mislab {

using nlohmann::ordered_json;

Problem<double> random_instance(int proposals, int cells, const RngStream& rng) {
  if (proposals < 2) throw ArgumentError("random_instance needs N >= 2");
  if (cells < 2) throw ArgumentError("random_instance needs at least 2 cells");
  auto gen = rng.slot(0);

  std::vector<double> breakpoints(static_cast<std::size_t>(cells) + 1, 0.0);
  for (int k = 1; k <= cells; ++k)
    breakpoints[static_cast<std::size_t>(k)] =
        breakpoints[static_cast<std::size_t>(k - 1)] + 0.5 + gen.uniform();
  const double length = breakpoints.back();
  for (auto& b : breakpoints) b /= length;
  breakpoints.back() = 1.0;

  std::vector<StepFunction<double>> densities;
  for (int n = 0; n < proposals; ++n) {
    std::vector<double> values(static_cast<std::size_t>(cells));
    double mass = 0.0;
    for (int k = 0; k < cells; ++k) {
      const auto i = static_cast<std::size_t>(k);
      values[i] = kRandomDensityFloor + (1.0 - kRandomDensityFloor) * gen.uniform();
      mass += values[i] * (breakpoints[i + 1] - breakpoints[i]);
    }
    for (auto& v : values) v /= mass;
    densities.emplace_back(breakpoints, values);
  }
  std::vector<double> u(static_cast<std::size_t>(cells));
  for (auto& v : u) v = 2.0 * gen.uniform() - 1.0;
  return make_problem(densities, StepFunction<double>(breakpoints, u));
}

namespace {

ordered_json literal_json(const StepFunction<double>& f) {
  ordered_json j;
  j["breakpoints"] = std::vector<double>(f.breakpoints().data(),
                                         f.breakpoints().data() + f.breakpoints().size());
  j["values"] = std::vector<double>(f.values().data(), f.values().data() + f.values().size());
  return j;
}

ordered_json literal_json(const FunctionLiteral& f) {
  ordered_json j;
  j["breakpoints"] = f.breakpoints;
  ordered_json values = ordered_json::array();
  for (const auto& v : f.values) {
    if (v.coefficients.empty()) {
      values.push_back(v.constant);
      continue;
    }
    ordered_json term;
    term["const"] = v.constant;
    for (const auto& [name, coef] : v.coefficients) term[name] = coef;
    values.push_back(term);
  }
  j["values"] = values;
  return j;
}

ordered_json config_echo(const ExperimentConfig& c) {
  ordered_json j;
  j["mode"] = std::string(to_string(c.mode));
  if (!c.proposals.empty()) {
    ordered_json p = ordered_json::array();
    for (const auto& f : c.proposals) p.push_back(literal_json(f));
    j["proposals"] = p;
  }
  if (c.integrand) j["integrand"] = literal_json(*c.integrand);
  ordered_json s = ordered_json::array();
  for (const auto& id : c.schemes) s.push_back(id.name());
  j["schemes"] = s;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  if (!c.parameters.empty()) j["parameters"] = c.parameters;
  if (c.sweep) j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
  if (c.mode == Mode::verify)
    j["verify"] = {{"instances", c.verify.instances},
                   {"min_proposals", c.verify.min_proposals},
                   {"max_proposals", c.verify.max_proposals},
                   {"cells", c.verify.cells}};
  return j;
}

ordered_json check_json(const InequalityCheck<double>& c) {
  return {{"name", c.name},     {"source", c.source}, {"lhs", c.lhs},
          {"rhs", c.rhs},       {"margin", c.margin}, {"status", std::string(to_string(c.status))}};
}

ordered_json variances_json(const AnalyticVariances<double>& v) {
  return {{"n1", v.n1}, {"n2", v.n2}, {"n3", v.n3}, {"r1", v.r1}, {"r2", v.r2}, {"r3", v.r3}};
}

ordered_json breakdown_json(const VarianceBreakdown<double>& b) {
  return {{"total", b.total},
          {"expected_conditional_variance", b.expected_conditional_variance},
          {"variance_of_conditional_expectation", b.variance_of_conditional_expectation}};
}

double relative_gap(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Closed-form variance of one scheme, or nothing when no closed form covers
/// it (n2 under deterministic selection) or the exact enumeration is capped.
std::optional<double> closed_form_variance(const SchemeId& s, const Problem<double>& p) {
  const auto& q = p.proposals;
  const auto& u = p.integrand;
  switch (s.tag()) {
    case Scheme::n1: return var_n1(q, u);
    case Scheme::n3: return var_n3(q, u);
    case Scheme::r1: return var_r1(q, u);
    case Scheme::r3: return var_r3(q, u);
    case Scheme::n2:
      if (s.biased() || q.size() > kMaxSubsetN) return std::nullopt;
      return var_n2(q, u);
    case Scheme::r2:
      if (q.size() > kMaxMultisetN) return std::nullopt;
      return var_r2(q, u);
  }
  return std::nullopt;
}

/// Reference variance for the empirical comparison: the closed form where one
/// exists, else the oracle when within its caps.
std::optional<double> reference_variance(const SchemeId& s, const Problem<double>& p) {
  if (auto v = closed_form_variance(s, p)) return v;
  if (s.biased() && p.proposals.size() <= kMaxOraclePermutationN)
    return brute_variance(s, p.proposals, p.integrand).variance.total;
  return std::nullopt;
}

double reference_mean(const SchemeId& s, const Problem<double>& p) {
  return s.biased() ? expected_n2_dswor(p.proposals, p.integrand) : exact_I(p.integrand);
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

class PhaseTimer {
 public:
  explicit PhaseTimer(std::map<std::string, double>& sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~PhaseTimer() {
    sink_[name_] += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start_)
                        .count();
  }

 private:
  std::map<std::string, double>& sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void run_analytic(const ExperimentConfig& c, RunReport& r) {
  const auto p = [&] {
    PhaseTimer t(r.timings_ms, "validate");
    return c.problem();
  }();
  PhaseTimer t(r.timings_ms, "analytic");
  const auto report = inequality_report(p.proposals, p.integrand);
  auto& j = r.json;
  j["N"] = p.proposals.size();
  j["I"] = report.variances.I;
  j["var"] = variances_json(report.variances);
  j["expected_n2_dswor"] = expected_n2_dswor(p.proposals, p.integrand);
  if (p.proposals.size() == 2)
    j["decomposition"] = breakdown_json(var_n2_decomposition_pair(p.proposals, p.integrand));
  ordered_json checks = ordered_json::array();
  for (const auto& ch : report.checks) checks.push_back(check_json(ch));
  j["inequalities"] = checks;
  r.proven_failure = !report.proven_ok();
}

ordered_json empirical_entry(const SchemeId& s, const Problem<double>& p,
                             const Simulator<double>& sim, const ExperimentConfig& c,
                             RunReport& r) {
  std::optional<double> variance;
  double target;
  {
    PhaseTimer t(r.timings_ms, "analytic");
    variance = reference_variance(s, p);
    target = reference_mean(s, p);
  }
  BatchResult<double> b;
  {
    PhaseTimer t(r.timings_ms, "simulate");
    b = run_batch(s, sim, c.replications, c.seed);
  }
  const double i = exact_I(p.integrand);
  ordered_json e;
  e["scheme"] = s.name();
  e["strategy"] = std::string(to_string(s.strategy()));
  e["biased"] = s.biased();
  e["analytic_mean"] = target;
  e["analytic_variance"] = optional_json(variance);
  e["mean"] = b.mean;
  e["mean_se"] = b.mean_se;
  e["variance"] = b.variance;
  e["variance_se"] = b.variance_se;
  e["mean_z"] = std::abs(b.mean - target) / b.mean_se;
  e["mean_z_vs_I"] = std::abs(b.mean - i) / b.mean_se;
  e["variance_z"] = variance ? ordered_json(std::abs(b.variance - *variance) / b.variance_se)
                             : ordered_json(nullptr);
  return e;
}

void run_empirical(const ExperimentConfig& c, RunReport& r) {
  const auto p = c.problem();
  const Simulator<double> sim(p.proposals, p.integrand);
  r.json["N"] = p.proposals.size();
  r.json["I"] = exact_I(p.integrand);
  r.json["replications"] = c.replications;
  r.json["seed"] = c.seed;
  ordered_json schemes = ordered_json::array();
  for (const auto& s : c.schemes) schemes.push_back(empirical_entry(s, p, sim, c, r));
  r.json["schemes"] = schemes;
}

void run_bias_demo(const ExperimentConfig& c, RunReport& r) {
  const auto p = c.problem();
  const Simulator<double> sim(p.proposals, p.integrand);
  const double i = exact_I(p.integrand);
  r.json["I"] = i;
  r.json["replications"] = c.replications;
  r.json["seed"] = c.seed;
  ordered_json schemes = ordered_json::array();
  for (const auto& s : c.schemes) {
    auto e = empirical_entry(s, p, sim, c, r);
    const double expectation = e["analytic_mean"].get<double>();
    e["analytic_bias"] = expectation - i;
    // Raised when the simulation itself separates the mean from I.
    e["bias_flag"] = e["mean_z_vs_I"].get<double>() > 4.0;
    schemes.push_back(e);
  }
  r.json["schemes"] = schemes;
}

void run_oracle(const ExperimentConfig& c, RunReport& r) {
  const auto p = c.problem();
  const auto& q = p.proposals;
  const auto& u = p.integrand;
  const double i = exact_I(u);
  r.json["N"] = q.size();
  r.json["I"] = i;
  ordered_json schemes = ordered_json::array();
  for (const auto& s : c.schemes) {
    OracleResult<double> o;
    {
      PhaseTimer t(r.timings_ms, "oracle");
      o = brute_variance(s, q, u);
    }
    std::optional<double> analytic;
    {
      PhaseTimer t(r.timings_ms, "analytic");
      analytic = closed_form_variance(s, p);
    }
    ordered_json e;
    e["scheme"] = s.name();
    e["index_vectors"] = o.index_vectors;
    e["oracle_expectation"] = o.expectation;
    e["analytic_expectation"] = reference_mean(s, p);
    e["oracle"] = breakdown_json(o.variance);
    e["analytic_total"] = optional_json(analytic);
    if (analytic) {
      e["abs_gap"] = std::abs(o.variance.total - *analytic);
      e["rel_gap"] = relative_gap(o.variance.total, *analytic);
    }
    schemes.push_back(e);
  }
  r.json["schemes"] = schemes;

  PhaseTimer t(r.timings_ms, "identities");
  ordered_json checks;
  if (q.size() <= kMaxOraclePermutationN) {
    const auto prefix = check_prefix_constancy(q, u);
    checks["prefix_constancy"] = {{"pass", prefix.pass},
                                  {"max_mean_gap", prefix.max_mean_gap},
                                  {"max_mixture_gap", prefix.max_mixture_gap},
                                  {"prefixes", prefix.prefixes}};
    const double cov = check_vanishing_covariances(q, u);
    checks["vanishing_covariances"] = {{"pass", cov <= 1e-12 * std::max(1.0, i * i)},
                                       {"max_abs_covariance", cov}};
  }
  const auto psi = q.balance_values();
  double layer_gap = 0.0;
  for (int card = 1; card <= static_cast<int>(q.size()); ++card) {
    const auto mean = subset_layer_mean(q, card);
    layer_gap = std::max(layer_gap, (mean.values() - psi).cwiseAbs().maxCoeff());
  }
  checks["subset_layer_mean"] = {{"pass", layer_gap <= 1e-12}, {"max_gap", layer_gap}};
  r.json["checks"] = checks;
}

void run_verify(const ExperimentConfig& c, RunReport& r) {
  const auto& v = c.verify;
  const int span = v.max_proposals - v.min_proposals + 1;
  std::size_t proven_failures = 0, conj_pass = 0, conj_fail = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  ordered_json failures = ordered_json::array();
  PhaseTimer t(r.timings_ms, "verify");
  for (std::size_t k = 0; k < v.instances; ++k) {
    const int n = v.min_proposals + static_cast<int>(k % static_cast<std::size_t>(span));
    const auto p = random_instance(n, v.cells, RngStream(c.seed, k));
    const auto report = inequality_report(p.proposals, p.integrand);
    for (const auto& ch : report.checks) {
      if (ch.status != CheckStatus::proven_fail) continue;
      ++proven_failures;
      ordered_json f = check_json(ch);
      f["instance"] = k;
      failures.push_back(f);
    }
    const auto& conj = report.conjecture();
    min_margin = std::min(min_margin, conj.margin);
    if (conj.status == CheckStatus::conjecture_pass) {
      ++conj_pass;
      continue;
    }
    ++conj_fail;
    std::filesystem::create_directories(v.reproducer_dir);
    const auto path = (std::filesystem::path(v.reproducer_dir) /
                       ("conjecture-counterexample-" + std::to_string(k) + ".json"))
                          .string();
    // a loadable analytic config; `origin` is carried along and ignored
    ordered_json doc;
    doc["mode"] = "analytic";
    doc.update(problem_to_json(p));
    doc["origin"] = {{"seed", c.seed},
                     {"instance", k},
                     {"var_r2", conj.lhs},
                     {"var_n3", conj.rhs}};
    std::ofstream(path) << doc.dump(2) << '\n';
    r.reproducers.push_back(path);
  }
  r.json["instances"] = v.instances;
  r.json["proven_failures"] = proven_failures;
  r.json["failures"] = failures;
  r.json["conjecture"] = {{"name", "var_r2 >= var_n3"},
                          {"checked", conj_pass + conj_fail},
                          {"passed", conj_pass},
                          {"failed", conj_fail},
                          {"min_margin", min_margin},
                          {"reproducers", r.reproducers}};
  r.proven_failure = proven_failures > 0;
}

/// Shortest text that reads back to the same double.
std::string csv_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void run_sweep(const ExperimentConfig& c, RunReport& r) {
  std::ostringstream csv;
  csv << c.sweep->parameter
      << ",I,var_n1,var_n2,var_n3,var_r1,var_r2,var_r3,expected_n2_dswor,conjecture_margin,"
         "proven_ok\n";
  ordered_json rows = ordered_json::array();
  PhaseTimer t(r.timings_ms, "analytic");
  for (double value : c.sweep->values) {
    auto params = c.parameters;
    params[c.sweep->parameter] = value;
    const auto p = c.problem(params);
    const auto report = inequality_report(p.proposals, p.integrand);
    const auto& v = report.variances;
    const double e = expected_n2_dswor(p.proposals, p.integrand);
    const bool ok = report.proven_ok();
    r.proven_failure = r.proven_failure || !ok;
    for (double x : {value, v.I, v.n1, v.n2, v.n3, v.r1, v.r2, v.r3, e, report.conjecture().margin})
      csv << csv_number(x) << ',';
    csv << (ok ? "true" : "false") << '\n';
    ordered_json row;
    row[c.sweep->parameter] = value;
    row["I"] = v.I;
    row["var"] = variances_json(v);
    row["expected_n2_dswor"] = e;
    row["conjecture_margin"] = report.conjecture().margin;
    row["proven_ok"] = ok;
    rows.push_back(row);
  }
  r.csv = csv.str();
  r.json["parameter"] = c.sweep->parameter;
  r.json["rows"] = rows;
}

}  // namespace

ordered_json problem_to_json(const Problem<double>& problem) {
  ordered_json j;
  ordered_json proposals = ordered_json::array();
  for (Eigen::Index n = 0; n < problem.proposals.size(); ++n)
    proposals.push_back(literal_json(problem.proposals.density(n)));
  j["proposals"] = proposals;
  j["integrand"] = literal_json(problem.integrand.function());
  return j;
}

RunReport run(const ExperimentConfig& config) {
  RunReport r{config.mode, ordered_json::object(), {}, false, {}, {}};
  r.json["mode"] = std::string(to_string(config.mode));
  r.json["config"] = config_echo(config);
  switch (config.mode) {
    case Mode::analytic: run_analytic(config, r); break;
    case Mode::empirical: run_empirical(config, r); break;
    case Mode::oracle: run_oracle(config, r); break;
    case Mode::verify: run_verify(config, r); break;
    case Mode::bias_demo: run_bias_demo(config, r); break;
    case Mode::sweep: run_sweep(config, r); break;
  }
  r.json["proven_failure"] = r.proven_failure;
  return r;
}

}  // namespace mislab
