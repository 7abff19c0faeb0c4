#pragma once

// Monte-Carlo experiment runner: sweeps, bounds, massive-MIMO baseline and
// result serialization.
//
// Every trial owns an Rng seeded with derive_seed(master, {trial}), so the
// same trial index sees the same random stream at every sweep point and the
// results do not depend on thread count or scheduling.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "simhmimo/channel.hpp"
#include "simhmimo/config.hpp"
#include "simhmimo/metrics.hpp"
#include "simhmimo/optimizer.hpp"
#include "simhmimo/propagation.hpp"
#include "simhmimo/target.hpp"

namespace simhmimo {

struct RunOptions {
  int threads = 1;
  bool timing = false;  // record wall_time_ms; off keeps output byte-reproducible
  std::int64_t ber_bits = -1;  // overrides config.sweep.ber_bits when >= 0
};

struct ResultRow {
  double sweep_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double nmse = 0.0;
  double sim_capacity = 0.0;
  double ideal_capacity = 0.0;
  double bound_lower = 0.0;
  double bound_upper = 0.0;
  std::optional<double> ber;
  int iterations = 0;
  double wall_time_ms = 0.0;
};

/// Mean or sample standard deviation of the numeric ResultRow fields over
/// the trials of one sweep value.
struct AggregateRow {
  double sweep_value = 0.0;
  std::string statistic;  // "mean" or "std"
  double nmse = 0.0;
  double sim_capacity = 0.0;
  double ideal_capacity = 0.0;
  double bound_lower = 0.0;
  double bound_upper = 0.0;
  std::optional<double> ber;
  double iterations = 0.0;
  double wall_time_ms = 0.0;
};

struct SweepResult {
  std::vector<ResultRow> rows;            // ordered by (sweep value, trial)
  std::vector<AggregateRow> aggregates;   // mean, std per sweep value
};

inline constexpr const char* kResultHeader =
    "sweep_value,trial,seed,nmse,sim_capacity,ideal_capacity,bound_lower,bound_upper,ber,iterations,wall_time_ms";

/// Precomputed, immutable per-sweep-point state shared by all trials.
struct SweepPoint {
  double value = 0.0;
  ExperimentConfig config;
  SimArchitecture arch;
  PropagationOperators ops;
  ChannelModel model;
  LinkBudget budget;

  static SweepPoint make(const ExperimentConfig& base, double value) {
    SweepPoint p;
    p.value = value;
    p.config = base.at(value);
    p.arch = p.config.architecture.architecture();
    p.ops = build_operators(p.arch);
    p.model = ChannelModel::for_architecture(p.arch, p.config.channel.path_loss(), p.config.channel.correlated);
    p.budget = p.config.budget.budget();
    return p;
  }
};

/// Full per-trial pipeline result, before bounds are known.
struct TrialOutcome {
  ResultRow row;
  EigenSample eigen;
  FitResult fit;
};

inline TrialOutcome run_trial(const SweepPoint& point, int trial, std::uint64_t seed, std::int64_t ber_bits,
                              bool timing) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  const ChannelRealization channel = draw_channel(point.model, rng);
  const SvdTarget target = truncated_svd_target(channel.g, point.arch.streams);
  const RVector gains = target.gains();
  const PowerAllocation alloc = water_filling(gains, point.budget.tx_power, point.budget.noise_power);

  TrialOutcome out;
  out.fit = fit(point.ops, channel.g, target.lambda, point.config.optimizer, rng);
  const CMatrix h = end_to_end(point.ops, out.fit.phases, channel.g);

  ResultRow& row = out.row;
  row.sweep_value = point.value;
  row.trial = trial;
  row.seed = seed;
  row.nmse = nmse(h, out.fit.phases.alpha, target.lambda);
  row.sim_capacity = sim_capacity(h, out.fit.phases.alpha, alloc.p, point.budget.noise_power);
  row.ideal_capacity = ideal_capacity(gains, alloc.p, point.budget.noise_power);
  row.iterations = out.fit.iterations;
  if (ber_bits > 0) {
    const BerResult ber = ber_bpsk(h, out.fit.phases.alpha, alloc.p, point.budget.noise_power,
                                   static_cast<std::uint64_t>(ber_bits), rng);
    row.ber = ber.aggregate();
  }
  out.eigen = {gains(0), gains(gains.size() - 1)};
  if (timing)
    row.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Runs `jobs` independent jobs on up to `threads` workers. The first
/// exception thrown by any job is rethrown after all workers stop.
inline void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads < 1 ? 1 : threads, jobs));
  if (workers == 1) {
    for (std::size_t i = 0; i < jobs; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs && !failed; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample standard deviation; zero for a single value.
inline double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

inline std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<AggregateRow> out;
  std::size_t begin = 0;
  while (begin < rows.size()) {
    std::size_t end = begin;
    while (end < rows.size() && rows[end].sweep_value == rows[begin].sweep_value) ++end;
    auto column = [&](auto getter) {
      std::vector<double> v;
      for (std::size_t i = begin; i < end; ++i) v.push_back(getter(rows[i]));
      return v;
    };
    const bool has_ber = rows[begin].ber.has_value();
    auto stat = [&](const char* name, double (*f)(const std::vector<double>&)) {
      AggregateRow a;
      a.sweep_value = rows[begin].sweep_value;
      a.statistic = name;
      a.nmse = f(column([](const ResultRow& r) { return r.nmse; }));
      a.sim_capacity = f(column([](const ResultRow& r) { return r.sim_capacity; }));
      a.ideal_capacity = f(column([](const ResultRow& r) { return r.ideal_capacity; }));
      a.bound_lower = f(column([](const ResultRow& r) { return r.bound_lower; }));
      a.bound_upper = f(column([](const ResultRow& r) { return r.bound_upper; }));
      if (has_ber) a.ber = f(column([](const ResultRow& r) { return r.ber.value_or(0.0); }));
      a.iterations = f(column([](const ResultRow& r) { return static_cast<double>(r.iterations); }));
      a.wall_time_ms = f(column([](const ResultRow& r) { return r.wall_time_ms; }));
      return a;
    };
    out.push_back(stat("mean", detail::mean_of));
    out.push_back(stat("std", detail::std_of));
    begin = end;
  }
  return out;
}

/// Draws, fits and evaluates `trials` channels at every sweep point.
/// A failing trial aborts the sweep with its seed in the message.
inline SweepResult run_sweep(const ExperimentConfig& config, const RunOptions& options = {}) {
  config.validate();
  const std::int64_t ber_bits = options.ber_bits >= 0 ? options.ber_bits : config.sweep.ber_bits;
  const std::vector<double> values = config.points();
  std::vector<SweepPoint> points;
  points.reserve(values.size());
  for (double v : values) points.push_back(SweepPoint::make(config, v));

  const int trials = config.sweep.trials;
  std::vector<TrialOutcome> outcomes(points.size() * trials);
  parallel_for(outcomes.size(), options.threads, [&](std::size_t job) {
    const std::size_t p = job / trials;
    const int trial = static_cast<int>(job % trials);
    const std::uint64_t seed = derive_seed(config.sweep.seed, {static_cast<std::uint64_t>(trial)});
    try {
      outcomes[job] = run_trial(points[p], trial, seed, ber_bits, options.timing);
    } catch (const std::exception& e) {
      throw std::runtime_error("trial " + std::to_string(trial) + " (seed " + std::to_string(seed) +
                               ") at sweep value " + std::to_string(points[p].value) + " failed: " + e.what());
    }
  });

  SweepResult result;
  result.rows.reserve(outcomes.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<EigenSample> samples;
    for (int t = 0; t < trials; ++t) samples.push_back(outcomes[p * trials + t].eigen);
    const CapacityBounds bounds = capacity_bounds(samples, points[p].arch.streams, points[p].budget);
    for (int t = 0; t < trials; ++t) {
      ResultRow row = outcomes[p * trials + t].row;
      row.bound_lower = bounds.lower;
      row.bound_upper = bounds.upper;
      result.rows.push_back(row);
    }
  }
  result.aggregates = aggregate(result.rows);
  return result;
}

/// Single fit at the first sweep point with trial 0's seed.
inline TrialOutcome run_single_fit(const ExperimentConfig& config) {
  config.validate();
  const SweepPoint point = SweepPoint::make(config, config.points().front());
  return run_trial(point, 0, derive_seed(config.sweep.seed, {0}), 0, false);
}

/// Ideal-policy capacity statistics and analytical bounds at one sweep point.
struct BoundsRow {
  double sweep_value = 0.0;
  int streams = 0;
  int trials = 0;
  double ideal_capacity_mean = 0.0;
  CapacityBounds bounds;
  double prop1_lower = 0.0;
  double prop1_upper = 0.0;
};

inline constexpr const char* kBoundsHeader =
    "sweep_value,streams,trials,ideal_capacity,bound_lower,bound_upper,e_lambda1_sq,e_lambdaS_sq,prop1_lower,"
    "prop1_upper";

/// No fitting: truncated SVD plus water-filling on every draw.
inline std::vector<BoundsRow> run_bounds(const ExperimentConfig& config, const RunOptions& options = {}) {
  config.validate();
  std::vector<BoundsRow> out;
  const int trials = config.sweep.trials;
  for (double v : config.points()) {
    const ExperimentConfig c = config.at(v);
    const SimArchitecture arch = c.architecture.architecture();
    const ChannelModel model = ChannelModel::for_architecture(arch, c.channel.path_loss(), c.channel.correlated);
    const LinkBudget budget = c.budget.budget();
    std::vector<EigenSample> samples(trials);
    std::vector<double> capacity(trials);
    parallel_for(trials, options.threads, [&](std::size_t t) {
      Rng rng(derive_seed(config.sweep.seed, {static_cast<std::uint64_t>(t)}));
      const ChannelRealization ch = draw_channel(model, rng);
      const SvdTarget target = truncated_svd_target(ch.g, arch.streams);
      const RVector gains = target.gains();
      const PowerAllocation alloc = water_filling(gains, budget.tx_power, budget.noise_power);
      capacity[t] = ideal_capacity(gains, alloc.p, budget.noise_power);
      samples[t] = {gains(0), gains(gains.size() - 1)};
    });
    BoundsRow row;
    row.sweep_value = v;
    row.streams = arch.streams;
    row.trials = trials;
    row.ideal_capacity_mean = detail::mean_of(capacity);
    row.bounds = capacity_bounds(samples, arch.streams, budget);
    row.prop1_lower = prop1_limit(row.bounds.e_last, budget);
    row.prop1_upper = prop1_limit(row.bounds.e_first, budget);
    out.push_back(row);
  }
  return out;
}

/// Conventional MIMO over i.i.d. Rayleigh fading with log-distance path loss
/// and shadowing: full-precision SVD precoding/combining and water-filling.
/// Returns the mean capacity over `trials` draws from `rng`.
inline double mimo_baseline_capacity(int antennas_tx, int antennas_rx, int streams, const PathLossParams& path_loss,
                                     double wavelength, const LinkBudget& budget, int trials, Rng& rng) {
  if (trials < 1) throw std::domain_error("mimo_baseline_capacity: trials must be >= 1");
  if (streams < 1 || streams > std::min(antennas_tx, antennas_rx))
    throw std::domain_error("mimo_baseline_capacity: streams must lie in 1..min(antennas)");
  ChannelModel model = ChannelModel::make(RMatrix::Identity(antennas_tx, antennas_tx),
                                          RMatrix::Identity(antennas_rx, antennas_rx), path_loss, wavelength);
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    const ChannelRealization ch = draw_channel(model, rng);
    const SvdTarget target = truncated_svd_target(ch.g, streams);
    const RVector gains = target.gains();
    const PowerAllocation alloc = water_filling(gains, budget.tx_power, budget.noise_power);
    acc += ideal_capacity(gains, alloc.p, budget.noise_power);
  }
  return acc / trials;
}

struct BaselineRow {
  double sweep_value = 0.0;
  int antennas_tx = 0;
  int antennas_rx = 0;
  int streams = 0;
  int trials = 0;
  double capacity = 0.0;
};

inline constexpr const char* kBaselineHeader = "sweep_value,antennas_tx,antennas_rx,streams,trials,capacity";

inline std::vector<BaselineRow> run_baseline(const ExperimentConfig& config) {
  config.validate();
  std::vector<BaselineRow> out;
  for (double v : config.points()) {
    const ExperimentConfig c = config.at(v);
    Rng rng(derive_seed(config.sweep.seed, {0x62617365ULL}));
    BaselineRow row{v, c.baseline.antennas_tx, c.baseline.antennas_rx, c.architecture.streams, c.sweep.trials, 0.0};
    row.capacity = mimo_baseline_capacity(row.antennas_tx, row.antennas_rx, row.streams, c.channel.path_loss(),
                                          c.architecture.wavelength(), c.budget.budget(), c.sweep.trials, rng);
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization. Doubles are written in shortest round-trip form.

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void write_csv_row(std::ostream& os, const ResultRow& r) {
  os << format_double(r.sweep_value) << ',' << r.trial << ',' << r.seed << ',' << format_double(r.nmse) << ','
     << format_double(r.sim_capacity) << ',' << format_double(r.ideal_capacity) << ','
     << format_double(r.bound_lower) << ',' << format_double(r.bound_upper) << ','
     << (r.ber ? format_double(*r.ber) : std::string()) << ',' << r.iterations << ','
     << format_double(r.wall_time_ms) << '\n';
}

inline void write_csv_row(std::ostream& os, const AggregateRow& a) {
  os << format_double(a.sweep_value) << ',' << a.statistic << ",," << format_double(a.nmse) << ','
     << format_double(a.sim_capacity) << ',' << format_double(a.ideal_capacity) << ','
     << format_double(a.bound_lower) << ',' << format_double(a.bound_upper) << ','
     << (a.ber ? format_double(*a.ber) : std::string()) << ',' << format_double(a.iterations) << ','
     << format_double(a.wall_time_ms) << '\n';
}

/// Per-trial rows of each sweep value followed by its mean and std rows.
inline void write_csv(std::ostream& os, const SweepResult& r) {
  os << kResultHeader << '\n';
  std::size_t agg = 0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    write_csv_row(os, r.rows[i]);
    const bool last_of_point = i + 1 == r.rows.size() || r.rows[i + 1].sweep_value != r.rows[i].sweep_value;
    if (last_of_point)
      for (int k = 0; k < 2 && agg < r.aggregates.size(); ++k) write_csv_row(os, r.aggregates[agg++]);
  }
}

inline nlohmann::ordered_json to_json(const ResultRow& r) {
  return {{"sweep_value", r.sweep_value},
          {"trial", r.trial},
          {"seed", r.seed},
          {"nmse", r.nmse},
          {"sim_capacity", r.sim_capacity},
          {"ideal_capacity", r.ideal_capacity},
          {"bound_lower", r.bound_lower},
          {"bound_upper", r.bound_upper},
          {"ber", r.ber ? nlohmann::ordered_json(*r.ber) : nlohmann::ordered_json(nullptr)},
          {"iterations", r.iterations},
          {"wall_time_ms", r.wall_time_ms}};
}

inline nlohmann::ordered_json to_json(const AggregateRow& a) {
  return {{"sweep_value", a.sweep_value},
          {"trial", a.statistic},
          {"seed", nullptr},
          {"nmse", a.nmse},
          {"sim_capacity", a.sim_capacity},
          {"ideal_capacity", a.ideal_capacity},
          {"bound_lower", a.bound_lower},
          {"bound_upper", a.bound_upper},
          {"ber", a.ber ? nlohmann::ordered_json(*a.ber) : nlohmann::ordered_json(nullptr)},
          {"iterations", a.iterations},
          {"wall_time_ms", a.wall_time_ms}};
}

/// JSON-lines mirror of write_csv, same field names and ordering.
inline void write_jsonl(std::ostream& os, const SweepResult& r) {
  std::size_t agg = 0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    os << to_json(r.rows[i]).dump() << '\n';
    const bool last_of_point = i + 1 == r.rows.size() || r.rows[i + 1].sweep_value != r.rows[i].sweep_value;
    if (last_of_point)
      for (int k = 0; k < 2 && agg < r.aggregates.size(); ++k) os << to_json(r.aggregates[agg++]).dump() << '\n';
  }
}

}  // namespace simhmimo
