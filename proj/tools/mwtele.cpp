#include "mwtele/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using mwtele::json;

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kRegime = 3 };

struct Common {
  std::string config;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_format) {
  c.format = default_format;
  cmd->add_option("--config", c.config, "Scenario JSON file")->required();
  cmd->add_option("--out", c.out, "Write output here instead of stdout");
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}));
}

/// Flattens a report into "field,value" rows keyed by JSON pointer.
void flatten(const json& j, const std::string& prefix, std::string& out) {
  if (j.is_object() || j.is_array()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string key = j.is_object() ? it.key() : std::to_string(std::distance(j.begin(), it));
      flatten(*it, prefix + "/" + key, out);
    }
    return;
  }
  std::string v;
  if (j.is_number_float()) v = mwtele::format_number(j.get<double>());
  else if (j.is_string()) v = j.get<std::string>();
  else v = j.dump();
  out += prefix + "," + v + "\n";
}

std::string report_csv(const json& envelope) {
  std::string out = "field,value\n";
  flatten(envelope, "", out);
  return out;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw mwtele::ConfigError("", "cannot write output file '" + c.out + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microwave teleportation link budgets, simulations and repeater checks"};
  app.require_subcommand(1);

  Common budget_opts, sweep_opts, teleport_opts, repeater_opts, kerr_opts;
  std::vector<std::string> axis_specs;
  std::optional<std::size_t> runs;
  unsigned threads = 0;

  auto* budget = app.add_subcommand("budget", "Closed-form link budget");
  add_common(budget, budget_opts, "json");
  auto* sweep = app.add_subcommand("sweep", "Budget over a grid of one or two parameters");
  add_common(sweep, sweep_opts, "csv");
  sweep->add_option("--axis", axis_specs, "path=start:stop:steps or path=v1,v2,... (replaces the config axes)");
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");
  auto* teleport = app.add_subcommand("teleport", "Monte-Carlo teleportation");
  add_common(teleport, teleport_opts, "json");
  teleport->add_option("--runs", runs, "Override the number of shots")->check(CLI::PositiveNumber);
  auto* repeater = app.add_subcommand("repeater", "Noiseless amplification by weak cross-Kerr measurement");
  add_common(repeater, repeater_opts, "json");
  auto* kerr = app.add_subcommand("kerr-validate", "Exact evolution check of the effective cross-Kerr coupling");
  add_common(kerr, kerr_opts, "json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*budget) {
      const auto cfg = mwtele::load_config(budget_opts.config);
      const auto seed = budget_opts.seed.value_or(cfg.seed);
      const auto b = mwtele::scenario_budget(cfg.scenario);
      if (budget_opts.format == "csv") {
        emit(budget_opts, mwtele::sweep_csv({}, {{{}, b}}));
      } else {
        emit(budget_opts, dump(mwtele::envelope("budget", cfg, seed, mwtele::to_json(b))));
      }
    } else if (*sweep) {
      const auto cfg = mwtele::load_config(sweep_opts.config);
      const auto seed = sweep_opts.seed.value_or(cfg.seed);
      std::vector<mwtele::SweepAxis> axes = cfg.sweep;
      if (!axis_specs.empty()) {
        axes.clear();
        for (const auto& s : axis_specs) axes.push_back(mwtele::parse_axis_spec(s));
      }
      const auto rows = mwtele::run_sweep(cfg, axes, threads);
      if (sweep_opts.format == "csv") {
        emit(sweep_opts, mwtele::sweep_csv(axes, rows));
      } else {
        emit(sweep_opts, dump(mwtele::envelope("sweep", cfg, seed, mwtele::sweep_json(axes, rows))));
      }
    } else if (*teleport) {
      auto cfg = mwtele::load_config(teleport_opts.config);
      const auto seed = teleport_opts.seed.value_or(cfg.seed);
      if (runs) cfg.teleport.runs = *runs;
      const auto setup = mwtele::TeleportSetup::from_config(cfg.scenario);
      const auto batch = mwtele::simulate_teleport(setup, cfg.teleport.input_alpha, seed, cfg.teleport.runs);
      if (teleport_opts.format == "csv") {
        emit(teleport_opts, mwtele::teleport_csv(batch));
      } else {
        emit(teleport_opts, dump(mwtele::envelope("teleport", cfg, seed, mwtele::teleport_json(batch, cfg.teleport))));
      }
    } else if (*repeater) {
      const auto cfg = mwtele::load_config(repeater_opts.config);
      const auto seed = repeater_opts.seed.value_or(cfg.seed);
      const auto env = mwtele::envelope("repeater", cfg, seed, mwtele::repeater_json(cfg));
      emit(repeater_opts, repeater_opts.format == "csv" ? report_csv(env) : dump(env));
    } else if (*kerr) {
      const auto cfg = mwtele::load_config(kerr_opts.config);
      const auto seed = kerr_opts.seed.value_or(cfg.seed);
      const auto env = mwtele::envelope("kerr-validate", cfg, seed, mwtele::kerr_validation_json(cfg.kerr));
      emit(kerr_opts, kerr_opts.format == "csv" ? report_csv(env) : dump(env));
    }
  } catch (const mwtele::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const mwtele::RegimeError& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return kRegime;
  } catch (const mwtele::StepUnderflow& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return kRegime;
  } catch (const mwtele::SingularConditioning& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return kRegime;
  } catch (const std::domain_error& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return kRegime;
  } catch (const std::length_error& e) {
    std::cerr << "regime violation: " << e.what() << "\n";
    return kRegime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
