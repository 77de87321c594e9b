#include "mislab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include "mislab/config.hpp"
#include "mislab/errors.hpp"
#include "mislab/harness.hpp"

namespace mislab {

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
  std::string format;
  bool timings = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple importance sampling variance lab"};
  app.require_subcommand(1);
  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"analytic", "exact variances of all six schemes and the proven orderings"},
      {"estimate", "seeded simulation compared against the exact values"},
      {"oracle-check", "brute-force enumeration versus the closed forms"},
      {"verify", "check the orderings on random instances"},
      {"bias-demo", "mean of n2 under deterministic selection versus I"},
      {"sweep", "exact variances over a parameter grid"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    auto* config = sub->add_option("--config", opt.config_path, "experiment config (JSON)");
    if (name != "verify") config->required();
    sub->add_option("--seed", opt.seed, "override the config seed");
    sub->add_option("--out", opt.out_path, "write the report here instead of stdout");
    sub->add_option("--format", opt.format, "json or csv (csv: sweep only)")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_flag("--timings", opt.timings, "include wall-clock per phase in the JSON report");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (app.get_subcommands().empty()) err << app.help();
    return kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Mode mode = parse_mode(command);
  try {
    const std::string text = opt.config_path.empty() ? "{}" : read_file(opt.config_path);
    ExperimentConfig cfg = parse_config(text, mode);
    if (opt.seed) cfg.seed = *opt.seed;
    const std::string format = opt.format.empty() ? (mode == Mode::sweep ? "csv" : "json")
                                                  : opt.format;
    if (format == "csv" && mode != Mode::sweep)
      throw ConfigError("--format", "csv output is only available for sweep");

    auto report = run(cfg);
    if (opt.timings) report.json["timings_ms"] = report.timings_ms;
    const std::string body = format == "csv" ? report.csv : report.json.dump(2) + "\n";
    if (opt.out_path.empty()) {
      out << body;
    } else {
      std::ofstream file(opt.out_path);
      if (!file) throw ConfigError("--out", "cannot write '" + opt.out_path + "'");
      file << body;
    }
    for (const auto& path : report.reproducers)
      err << "conjecture counterexample written to " << path << '\n';
    if (report.proven_failure) {
      err << "error: a proven variance inequality failed; this is an implementation bug\n";
      return kExitProvenFailure;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace mislab
