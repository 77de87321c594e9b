#pragma once

// Experiment configuration.
//
// A config is one JSON document:
//
//   {
//     "mode": "analytic",                       // optional; the CLI subcommand wins
//     "proposals": [ {"breakpoints": [0, 1, 2], "values": [0.25, 0.75]}, ... ],
//     "integrand":   {"breakpoints": [0, 1, 2], "values": [1, 2]},
//     "schemes": ["n1", "n2", {"scheme": "n2", "strategy": "dswor"}, "r2"],
//     "replications": 100000,
//     "seed": 7,
//     "parameters": {"b": 0.25},
//     "sweep": {"parameter": "b", "values": [0.1, 0.2]},   // or "from"/"to"/"step"
//     "verify": {"instances": 1000, "min_proposals": 2, "max_proposals": 6,
//                "cells": 6, "reproducer_dir": "."},
//     "origin": {...}                           // free-form, ignored
//   }
//
// A function value is either a number or an affine term in named parameters,
// {"const": 1, "b": -1} meaning 1 - b. Parameters take their values from
// "parameters", or from the sweep grid in sweep mode.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mislab/estimators.hpp"
#include "mislab/proposal_set.hpp"

namespace mislab {

enum class Mode { analytic, empirical, oracle, verify, bias_demo, sweep };

/// CLI spelling: analytic, estimate, oracle-check, verify, bias-demo, sweep.
std::string_view to_string(Mode m);
/// Accepts the CLI spellings plus "empirical" and "oracle".
Mode parse_mode(std::string_view name);

/// c + sum_p coef_p * param_p.
struct AffineValue {
  double constant = 0.0;
  std::map<std::string, double> coefficients;

  double evaluate(const std::map<std::string, double>& parameters) const;
};

struct FunctionLiteral {
  std::vector<double> breakpoints;
  std::vector<AffineValue> values;

  StepFunction<double> resolve(const std::map<std::string, double>& parameters) const;
  static FunctionLiteral from(const StepFunction<double>& f);
};

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
};

struct VerifySpec {
  std::size_t instances = 1000;
  int min_proposals = 2;
  int max_proposals = 6;
  int cells = 6;
  std::string reproducer_dir = ".";
};

struct ExperimentConfig {
  Mode mode = Mode::analytic;
  std::vector<FunctionLiteral> proposals;
  std::optional<FunctionLiteral> integrand;
  std::vector<SchemeId> schemes;
  std::size_t replications = 100000;
  std::uint64_t seed = 1;
  std::map<std::string, double> parameters;
  std::optional<SweepSpec> sweep;
  VerifySpec verify;

  /// Proposals and integrand at the given parameter values, refined to one
  /// grid and validated.
  Problem<double> problem(const std::map<std::string, double>& parameters) const;
  Problem<double> problem() const { return problem(parameters); }
};

/// Parse and fully validate a config. Throws ConfigError naming the offending
/// field; integrability failures surface as InfiniteIntegralError.
/// `mode_override` replaces the document's "mode" before validation.
ExperimentConfig parse_config(std::string_view text,
                              std::optional<Mode> mode_override = std::nullopt);

}  // namespace mislab
