#include "mislab/config.hpp"

#include <json.hpp>

#include <cmath>
#include <set>

#include "mislab/errors.hpp"

namespace mislab {

using nlohmann::json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::analytic: return "analytic";
    case Mode::empirical: return "estimate";
    case Mode::oracle: return "oracle-check";
    case Mode::verify: return "verify";
    case Mode::bias_demo: return "bias-demo";
    case Mode::sweep: return "sweep";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "analytic") return Mode::analytic;
  if (name == "estimate" || name == "empirical") return Mode::empirical;
  if (name == "oracle-check" || name == "oracle") return Mode::oracle;
  if (name == "verify") return Mode::verify;
  if (name == "bias-demo") return Mode::bias_demo;
  if (name == "sweep") return Mode::sweep;
  throw ConfigError("mode", "unknown mode '" + std::string(name) + "'");
}

double AffineValue::evaluate(const std::map<std::string, double>& parameters) const {
  double v = constant;
  for (const auto& [name, coef] : coefficients) {
    const auto it = parameters.find(name);
    if (it == parameters.end())
      throw ConfigError("parameters", "no value for parameter '" + name + "'");
    v += coef * it->second;
  }
  return v;
}

StepFunction<double> FunctionLiteral::resolve(
    const std::map<std::string, double>& parameters) const {
  std::vector<double> v;
  v.reserve(values.size());
  for (const auto& a : values) v.push_back(a.evaluate(parameters));
  return StepFunction<double>(breakpoints, v);
}

FunctionLiteral FunctionLiteral::from(const StepFunction<double>& f) {
  FunctionLiteral lit;
  lit.breakpoints.assign(f.breakpoints().data(), f.breakpoints().data() + f.breakpoints().size());
  for (Eigen::Index k = 0; k < f.cells(); ++k) lit.values.push_back({f.values()[k], {}});
  return lit;
}

Problem<double> ExperimentConfig::problem(const std::map<std::string, double>& params) const {
  if (proposals.empty() || !integrand)
    throw ConfigError("proposals", "this mode needs proposals and an integrand");
  std::vector<StepFunction<double>> densities;
  for (std::size_t n = 0; n < proposals.size(); ++n) {
    try {
      densities.push_back(proposals[n].resolve(params));
    } catch (const DomainError& e) {
      throw ConfigError("proposals[" + std::to_string(n) + "]", e.what());
    }
  }
  StepFunction<double> u = [&] {
    try {
      return integrand->resolve(params);
    } catch (const DomainError& e) {
      throw ConfigError("integrand", e.what());
    }
  }();
  try {
    return make_problem(densities, u);
  } catch (const InfiniteIntegralError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError("proposals", e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError("proposals", e.what());
  }
}

namespace {

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) throw ConfigError(path.empty() ? key : path + "." + key, "missing");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
  return d;
}

std::uint64_t count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw ConfigError(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

AffineValue affine(const json& v, const std::string& path) {
  if (v.is_number()) return {number(v, path), {}};
  if (!v.is_object()) throw ConfigError(path, "expected a number or an affine term object");
  AffineValue a;
  for (const auto& [key, coef] : v.items()) {
    if (key == "const")
      a.constant = number(coef, path + ".const");
    else
      a.coefficients[key] = number(coef, path + "." + key);
  }
  return a;
}

FunctionLiteral function_literal(const json& v, const std::string& path) {
  if (!v.is_object()) throw ConfigError(path, "expected {breakpoints, values}");
  FunctionLiteral f;
  const auto& b = require(v, "breakpoints", path);
  const auto& vals = require(v, "values", path);
  if (!b.is_array()) throw ConfigError(path + ".breakpoints", "expected an array");
  if (!vals.is_array()) throw ConfigError(path + ".values", "expected an array");
  for (std::size_t i = 0; i < b.size(); ++i)
    f.breakpoints.push_back(number(b[i], at(path + ".breakpoints", i)));
  for (std::size_t i = 0; i < vals.size(); ++i)
    f.values.push_back(affine(vals[i], at(path + ".values", i)));
  if (f.breakpoints.size() != f.values.size() + 1)
    throw ConfigError(path, "needs exactly one more breakpoint than values");
  return f;
}

SchemeId scheme_entry(const json& v, const std::string& path) {
  try {
    if (v.is_string()) return parse_scheme(v.get<std::string>());
    if (v.is_object()) {
      const auto& name = require(v, "scheme", path);
      if (!name.is_string()) throw ConfigError(path + ".scheme", "expected a string");
      std::optional<SelectionStrategy> strategy;
      if (v.contains("strategy")) {
        if (!v["strategy"].is_string()) throw ConfigError(path + ".strategy", "expected a string");
        strategy = parse_strategy(v["strategy"].get<std::string>());
      }
      return SchemeId(parse_scheme_tag(name.get<std::string>()), strategy);
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(path, e.what());
  }
  throw ConfigError(path, "expected a scheme name or {scheme, strategy}");
}

std::vector<double> sweep_values(const json& s, const std::string& path) {
  std::vector<double> out;
  if (s.contains("values")) {
    const auto& vals = s["values"];
    if (!vals.is_array() || vals.empty())
      throw ConfigError(path + ".values", "expected a nonempty array");
    for (std::size_t i = 0; i < vals.size(); ++i)
      out.push_back(number(vals[i], at(path + ".values", i)));
    return out;
  }
  const double from = number(require(s, "from", path), path + ".from");
  const double to = number(require(s, "to", path), path + ".to");
  const double step = number(require(s, "step", path), path + ".step");
  if (!(step > 0) || to < from) throw ConfigError(path, "needs from <= to and step > 0");
  const auto steps = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) out.push_back(from + static_cast<double>(i) * step);
  return out;
}

const std::set<std::string> kKnownKeys = {"mode",       "proposals", "integrand", "schemes",
                                          "replications", "seed",    "parameters", "sweep",
                                          "verify",     "origin"};

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::optional<Mode> mode_override) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  for (const auto& [key, _] : doc.items())
    if (!kKnownKeys.contains(key)) throw ConfigError(key, "unknown field");

  ExperimentConfig cfg;
  if (doc.contains("mode")) {
    if (!doc["mode"].is_string()) throw ConfigError("mode", "expected a string");
    cfg.mode = parse_mode(doc["mode"].get<std::string>());
  }
  if (mode_override) cfg.mode = *mode_override;

  if (doc.contains("proposals")) {
    const auto& p = doc["proposals"];
    if (!p.is_array()) throw ConfigError("proposals", "expected an array");
    for (std::size_t i = 0; i < p.size(); ++i)
      cfg.proposals.push_back(function_literal(p[i], at("proposals", i)));
  }
  if (doc.contains("integrand")) cfg.integrand = function_literal(doc["integrand"], "integrand");

  if (doc.contains("schemes")) {
    const auto& s = doc["schemes"];
    if (!s.is_array() || s.empty()) throw ConfigError("schemes", "expected a nonempty array");
    for (std::size_t i = 0; i < s.size(); ++i)
      cfg.schemes.push_back(scheme_entry(s[i], at("schemes", i)));
  } else if (cfg.mode == Mode::bias_demo) {
    cfg.schemes.emplace_back(Scheme::n2, SelectionStrategy::dswor);
  } else {
    for (Scheme s : {Scheme::n1, Scheme::n2, Scheme::n3, Scheme::r1, Scheme::r2, Scheme::r3})
      cfg.schemes.emplace_back(s);
  }

  if (doc.contains("replications")) cfg.replications = count(doc["replications"], "replications");
  if (doc.contains("seed")) cfg.seed = count(doc["seed"], "seed");

  if (doc.contains("parameters")) {
    const auto& p = doc["parameters"];
    if (!p.is_object()) throw ConfigError("parameters", "expected an object");
    for (const auto& [key, v] : p.items()) cfg.parameters[key] = number(v, "parameters." + key);
  }

  if (doc.contains("sweep")) {
    const auto& s = doc["sweep"];
    if (!s.is_object()) throw ConfigError("sweep", "expected an object");
    const auto& name = require(s, "parameter", "sweep");
    if (!name.is_string()) throw ConfigError("sweep.parameter", "expected a string");
    cfg.sweep = SweepSpec{name.get<std::string>(), sweep_values(s, "sweep")};
  }

  if (doc.contains("verify")) {
    const auto& v = doc["verify"];
    if (!v.is_object()) throw ConfigError("verify", "expected an object");
    if (v.contains("instances")) cfg.verify.instances = count(v["instances"], "verify.instances");
    if (v.contains("min_proposals"))
      cfg.verify.min_proposals = static_cast<int>(count(v["min_proposals"], "verify.min_proposals"));
    if (v.contains("max_proposals"))
      cfg.verify.max_proposals = static_cast<int>(count(v["max_proposals"], "verify.max_proposals"));
    if (v.contains("cells")) cfg.verify.cells = static_cast<int>(count(v["cells"], "verify.cells"));
    if (v.contains("reproducer_dir")) {
      if (!v["reproducer_dir"].is_string())
        throw ConfigError("verify.reproducer_dir", "expected a string");
      cfg.verify.reproducer_dir = v["reproducer_dir"].get<std::string>();
    }
  }

  if (cfg.sweep && cfg.mode != Mode::sweep)
    throw ConfigError("sweep", "a sweep spec is only valid in sweep mode");

  // Mode-specific validation, before any compute.
  switch (cfg.mode) {
    case Mode::verify:
      if (cfg.verify.min_proposals < 2 || cfg.verify.max_proposals < cfg.verify.min_proposals)
        throw ConfigError("verify", "needs 2 <= min_proposals <= max_proposals");
      if (cfg.verify.max_proposals > kMaxMultisetN)
        throw ConfigError("verify.max_proposals", "exceeds the exact R2 cap of 12");
      if (cfg.verify.cells < 2) throw ConfigError("verify.cells", "needs at least 2 cells");
      return cfg;
    case Mode::sweep:
      if (!cfg.sweep) throw ConfigError("sweep", "sweep mode needs a sweep spec");
      for (double v : cfg.sweep->values) {
        auto params = cfg.parameters;
        params[cfg.sweep->parameter] = v;
        cfg.problem(params);
      }
      return cfg;
    case Mode::empirical:
    case Mode::bias_demo:
      if (cfg.replications < 2) throw ConfigError("replications", "needs at least 2");
      break;
    case Mode::analytic:
    case Mode::oracle:
      break;
  }
  if (cfg.proposals.empty()) throw ConfigError("proposals", "missing");
  if (!cfg.integrand) throw ConfigError("integrand", "missing");
  cfg.problem();
  return cfg;
}

}  // namespace mislab
