// simhmimo: command-line front end for SIM-aided HMIMO experiments.
//
//   simhmimo fit      --config c.toml [--out trace.csv]
//   simhmimo sweep    --config c.toml [--seed N] [--trials N] [--threads N] [--out r.csv] [--json]
//   simhmimo ber      ...same flags as sweep
//   simhmimo bounds   ...
//   simhmimo baseline ...
//
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "simhmimo/simhmimo.hpp"

namespace {

using namespace simhmimo;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
  std::string out_path;
  bool json = false;
  bool timing = false;
};

void add_common(CLI::App& cmd, Common& c) {
  cmd.add_option("--config", c.config_path, "TOML experiment configuration")->required();
  cmd.add_option("--seed", c.seed, "master seed (overrides [sweep] seed)");
  cmd.add_option("--trials", c.trials, "Monte-Carlo trials per sweep value (overrides [sweep] trials)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--threads", c.threads, "worker threads (default: $SIM_HMIMO_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--out", c.out_path, "output file (default: standard output)");
  cmd.add_flag("--json", c.json, "write JSON lines instead of CSV");
  cmd.add_flag("--timing", c.timing, "record wall_time_ms (output is then not reproducible)");
}

int resolve_threads(const Common& c) {
  if (c.threads) return *c.threads;
  if (const char* env = std::getenv("SIM_HMIMO_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("SIM_HMIMO_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

ExperimentConfig resolve_config(const Common& c) {
  ExperimentConfig cfg = load_config(c.config_path);
  if (c.seed) cfg.sweep.seed = *c.seed;
  if (c.trials) cfg.sweep.trials = *c.trials;
  cfg.validate();
  return cfg;
}

// Writes to --out when given, else standard output.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw std::runtime_error("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw std::runtime_error("failed writing output");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_fit(const ExperimentConfig& cfg, const Common& c) {
  const TrialOutcome outcome = run_single_fit(cfg);
  const double energy = outcome.fit.target_energy;
  Output out(c.out_path);
  auto& os = out.stream();
  if (!c.json) os << "iteration,loss,nmse\n";
  for (std::size_t i = 0; i < outcome.fit.loss_trace.size(); ++i) {
    const double loss_value = outcome.fit.loss_trace[i];
    const double nmse_value = loss_value / energy;
    if (c.json) {
      os << nlohmann::ordered_json{{"iteration", i}, {"loss", loss_value}, {"nmse", nmse_value}}.dump() << '\n';
    } else {
      os << i << ',' << format_double(loss_value) << ',' << format_double(nmse_value) << '\n';
    }
  }
  out.finish();
}

void write_sweep(const ExperimentConfig& cfg, const Common& c, bool with_ber) {
  RunOptions opts;
  opts.threads = resolve_threads(c);
  opts.timing = c.timing;
  if (with_ber) opts.ber_bits = cfg.sweep.ber_bits > 0 ? cfg.sweep.ber_bits : 100000;
  const SweepResult result = run_sweep(cfg, opts);
  Output out(c.out_path);
  if (c.json)
    write_jsonl(out.stream(), result);
  else
    write_csv(out.stream(), result);
  out.finish();
}

void write_bounds(const ExperimentConfig& cfg, const Common& c) {
  RunOptions opts;
  opts.threads = resolve_threads(c);
  const auto rows = run_bounds(cfg, opts);
  Output out(c.out_path);
  auto& os = out.stream();
  if (!c.json) os << kBoundsHeader << '\n';
  for (const BoundsRow& r : rows) {
    if (c.json) {
      os << nlohmann::ordered_json{{"sweep_value", r.sweep_value},
                                   {"streams", r.streams},
                                   {"trials", r.trials},
                                   {"ideal_capacity", r.ideal_capacity_mean},
                                   {"bound_lower", r.bounds.lower},
                                   {"bound_upper", r.bounds.upper},
                                   {"e_lambda1_sq", r.bounds.e_first},
                                   {"e_lambdaS_sq", r.bounds.e_last},
                                   {"prop1_lower", r.prop1_lower},
                                   {"prop1_upper", r.prop1_upper}}
                .dump()
         << '\n';
    } else {
      os << format_double(r.sweep_value) << ',' << r.streams << ',' << r.trials << ','
         << format_double(r.ideal_capacity_mean) << ',' << format_double(r.bounds.lower) << ','
         << format_double(r.bounds.upper) << ',' << format_double(r.bounds.e_first) << ','
         << format_double(r.bounds.e_last) << ',' << format_double(r.prop1_lower) << ','
         << format_double(r.prop1_upper) << '\n';
    }
  }
  out.finish();
}

void write_baseline(const ExperimentConfig& cfg, const Common& c) {
  const auto rows = run_baseline(cfg);
  Output out(c.out_path);
  auto& os = out.stream();
  if (!c.json) os << kBaselineHeader << '\n';
  for (const BaselineRow& r : rows) {
    if (c.json) {
      os << nlohmann::ordered_json{{"sweep_value", r.sweep_value}, {"antennas_tx", r.antennas_tx},
                                   {"antennas_rx", r.antennas_rx}, {"streams", r.streams},
                                   {"trials", r.trials},           {"capacity", r.capacity}}
                .dump()
         << '\n';
    } else {
      os << format_double(r.sweep_value) << ',' << r.antennas_tx << ',' << r.antennas_rx << ',' << r.streams << ','
         << r.trials << ',' << format_double(r.capacity) << '\n';
    }
  }
  out.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stacked-intelligent-metasurface HMIMO link simulator"};
  app.require_subcommand(1);

  Common common;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one channel realization and print the loss trace");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "fit and evaluate every trial at every sweep value");
  CLI::App* ber_cmd = app.add_subcommand("ber", "sweep with Monte-Carlo BPSK bit error rate");
  CLI::App* bounds_cmd = app.add_subcommand("bounds", "ideal-policy capacity against its analytical bounds");
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "conventional massive-MIMO capacity");
  for (CLI::App* cmd : {fit_cmd, sweep_cmd, ber_cmd, bounds_cmd, baseline_cmd}) add_common(*cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const ExperimentConfig cfg = resolve_config(common);
    if (fit_cmd->parsed()) write_fit(cfg, common);
    if (sweep_cmd->parsed()) write_sweep(cfg, common, false);
    if (ber_cmd->parsed()) write_sweep(cfg, common, true);
    if (bounds_cmd->parsed()) write_bounds(cfg, common);
    if (baseline_cmd->parsed()) write_baseline(cfg, common);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
