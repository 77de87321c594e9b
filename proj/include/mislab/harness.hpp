#pragma once

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

#include "mislab/config.hpp"
#include "mislab/proposal_set.hpp"
#include "mislab/rng.hpp"

namespace mislab {

/// Positivity floor for generated proposal values, as a fraction of the
/// uniform height; keeps every denominator well away from zero.
inline constexpr double kRandomDensityFloor = 0.05;

/// Random problem on [0, 1]: `cells` cells of random width, proposal values
/// 0.05 + 0.95 U renormalized to unit mass, integrand values uniform on [-1, 1].
/// Draws only from slot 0 of `rng`.
Problem<double> random_instance(int proposals, int cells, const RngStream& rng);

/// Config document reproducing a problem (full precision).
nlohmann::ordered_json problem_to_json(const Problem<double>& problem);

struct RunReport {
  Mode mode;
  nlohmann::ordered_json json;
  std::string csv;  // sweep rows; empty for other modes
  bool proven_failure = false;
  std::vector<std::string> reproducers;        // files written for conjecture counterexamples
  std::map<std::string, double> timings_ms;    // wall-clock per phase
};

/// Runs the config's mode. Output is a pure function of the config: wall-clock
/// timings are kept out of `json` and reported separately.
RunReport run(const ExperimentConfig& config);

}  // namespace mislab
