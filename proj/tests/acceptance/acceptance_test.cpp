// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "simhmimo/simhmimo.hpp"

namespace {

using namespace simhmimo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

SimArchitecture make_arch(int streams, int tx_layers, int tx_atoms, int rx_layers, int rx_atoms) {
  ArchitectureConfig c;
  c.streams = streams;
  c.tx_layers = tx_layers;
  c.rx_layers = rx_layers;
  c.tx_atoms = tx_atoms;
  c.rx_atoms = rx_atoms;
  return c.architecture();
}

// Central differences of the loss, alpha held fixed.
PhaseGradient finite_difference(const PhaseState& p, const PropagationOperators& ops, const CMatrix& g,
                                const CMatrix& target, double h) {
  PhaseGradient fd{RMatrix(p.theta.rows(), p.theta.cols()), RMatrix(p.xi.rows(), p.xi.cols())};
  auto probe = [&](RMatrix PhaseState::*field, RMatrix& out) {
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        PhaseState plus = p, minus = p;
        (plus.*field)(r, c) += h;
        (minus.*field)(r, c) -= h;
        out(r, c) = (loss(plus, ops, g, target) - loss(minus, ops, g, target)) / (2 * h);
      }
  };
  probe(&PhaseState::theta, fd.theta);
  probe(&PhaseState::xi, fd.xi);
  return fd;
}

Verdict criterion1() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  std::uniform_int_distribution<int> streams(1, 3), layers(1, 3), side(2, 4);
  double worst = 0.0;
  for (int instance = 0; instance < 25; ++instance) {
    const int s = streams(rng);
    const int m = side(rng);
    const int n = side(rng);
    const auto arch = make_arch(s, layers(rng), m * m, layers(rng), n * n);
    const PropagationOperators ops = build_operators(arch);
    const ChannelModel model = ChannelModel::for_architecture(arch, PathLossParams{}, true);
    const ChannelRealization ch = draw_channel(model, rng);
    const SvdTarget target = truncated_svd_target(ch.g, s);
    PhaseState p = PhaseState::random(ops, rng);
    // Off the least-squares scale, so single-stream instances keep a nonzero residual.
    std::normal_distribution<double> normal;
    p.alpha = update_alpha(end_to_end(ops, p, ch.g), target.lambda).alpha * Complex{1.0 + 0.5 * normal(rng), 0.5 * normal(rng)};
    const PhaseGradient a = gradient(p, ops, ch.g, target.lambda);
    const PhaseGradient f = finite_difference(p, ops, ch.g, target.lambda, 1e-6);
    const double err = std::sqrt(((a.theta - f.theta).squaredNorm() + (a.xi - f.xi).squaredNorm()) /
                                 (f.theta.squaredNorm() + f.xi.squaredNorm()));
    worst = std::max(worst, err);
  }
  const double elapsed = seconds_since(t0);
  return {worst <= 1e-5 && elapsed < 30.0,
          "worst relative L2 error " + fmt(worst) + " over 25 instances, " + fmt(elapsed, 3) + " s"};
}

Verdict criterion2() {
  Rng rng(1002);
  const auto arch = make_arch(4, 1, 36, 1, 36);
  const ChannelModel model = ChannelModel::for_architecture(arch, PathLossParams{}, true);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelRealization ch = draw_channel(model, rng);
    const SvdTarget t = truncated_svd_target(ch.g, 4);
    const CMatrix h = t.left.adjoint() * ch.g * t.right;
    worst = std::max(worst, (h - t.lambda).norm() / t.lambda.norm());
  }
  return {worst <= 1e-10, "worst relative Frobenius error " + fmt(worst) + " over 20 channels"};
}

Verdict criterion3() {
  Rng rng(1003);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  double worst_budget = 0.0;
  int beaten = 0;
  for (int set = 0; set < 20; ++set) {
    const int streams = 1 + set % 8;
    RVector gains(streams);
    for (int s = 0; s < streams; ++s) gains(s) = std::pow(10.0, 6.0 * unit(rng) - 3.0);
    const double pt = std::pow(10.0, 2.0 * unit(rng) - 1.0);
    const double noise = std::pow(10.0, 2.0 * unit(rng) - 1.0);
    const PowerAllocation wf = water_filling(gains, pt, noise);
    worst_budget = std::max(worst_budget, std::abs(wf.total() - pt) / pt);
    const double c = ideal_capacity(gains, wf.p, noise);
    for (int probe = 0; probe < 1000; ++probe) {
      RVector p(streams);
      for (int s = 0; s < streams; ++s) p(s) = expo(rng);
      p *= pt / p.sum();
      if (ideal_capacity(gains, p, noise) > c) ++beaten;
    }
  }
  return {worst_budget <= 1e-9 && beaten == 0, "worst |sum p - Pt|/Pt " + fmt(worst_budget) + ", random allocations "
                                                   "beating water-filling: " + std::to_string(beaten) + "/20000"};
}

Verdict criterion4() {
  Rng rng(1004);
  double worst = 0.0;
  int cases = 0;
  for (int l : {1, 2})
    for (int k : {1, 2})
      for (int m : {4, 16})
        for (int n : {4, 16}) {
          const auto arch = make_arch(1, l, m, k, n);
          const PropagationOperators ops = build_operators(arch);
          const ChannelModel model = ChannelModel::for_architecture(arch, PathLossParams{}, true);
          const ChannelRealization ch = draw_channel(model, rng);
          const SvdTarget t = truncated_svd_target(ch.g, 1);
          const FitResult r = fit(ops, ch.g, t.lambda, FitHyperparams{}, rng);
          worst = std::max(worst, r.final_nmse);
          ++cases;
        }
  return {worst <= 1e-6, "worst final NMSE " + fmt(worst) + " over " + std::to_string(cases) + " architectures"};
}

ExperimentConfig layer_sweep(int streams, int atoms, int trials, std::uint64_t seed) {
  ExperimentConfig c;
  c.architecture.streams = streams;
  c.architecture.tx_atoms = c.architecture.rx_atoms = atoms;
  c.sweep.axis = SweepAxis::layers;
  c.sweep.values = {1, 4};
  c.sweep.trials = trials;
  c.sweep.seed = seed;
  return c;
}

Verdict criterion5() {
  const auto t0 = Clock::now();
  const SweepResult r = run_sweep(layer_sweep(4, 49, 20, 1005));
  const double elapsed = seconds_since(t0);
  const double one = r.aggregates[0].nmse;
  const double four = r.aggregates[2].nmse;
  return {four < one && elapsed < 180.0, "mean NMSE L=K=1: " + fmt(one) + ", L=K=4: " + fmt(four) + ", " +
                                             fmt(elapsed, 3) + " s"};
}

Verdict criterion6() {
  const PathLossParams pl{1.0, 3.5, 0.0, 250.0};
  const double lambda = ArchitectureConfig{}.wavelength();
  const double rho2 = path_loss_gain(pl, 0.0, lambda);
  const LinkBudget budget;
  Rng rng(1006);
  const double small = co_phased_capacity(8, 8, rho2, budget, 200, rng);
  const double large = co_phased_capacity(16, 16, rho2, budget, 200, rng);
  const double gain = large - small;
  return {gain >= 3.0 && gain <= 5.0, "co-phased single-layer capacity " + fmt(small) + " -> " + fmt(large) +
                                          " bit/s/Hz, gain " + fmt(gain)};
}

Verdict criterion7() {
  Rng rng(1007);
  const CoPhasedGain base = prop2_oracle(16, 16, 1.0, 10000, rng);
  const CoPhasedGain doubled = prop2_oracle(32, 32, 1.0, 10000, rng);
  const double ratio = doubled.monte_carlo / base.monte_carlo;
  return {std::abs(ratio - 16.0) <= 1.6, "E|h|^2 ratio " + fmt(ratio) + " (Rayleigh-moment form " +
                                             fmt(doubled.rayleigh_form / base.rayleigh_form) + ", pi^2/4 form 16)"};
}

Verdict criterion8() {
  ExperimentConfig c;
  c.architecture.tx_atoms = c.architecture.rx_atoms = 36;
  c.architecture.tx_spacing_wavelengths = c.architecture.rx_spacing_wavelengths = 0.25;
  c.channel.shadowing_db = 0.0;
  c.sweep.axis = SweepAxis::streams;
  c.sweep.values = {1, 2, 4};
  c.sweep.trials = 100;
  c.sweep.seed = 1008;
  const auto rows = run_bounds(c);
  bool pass = true;
  std::string detail;
  for (const BoundsRow& r : rows) {
    const double mean = r.ideal_capacity_mean;
    bool ok = r.bounds.lower <= mean && mean <= r.bounds.upper;
    if (r.streams == 1) {
      // Both bounds equal log2(1 + SNR E[lambda^2]); Jensen puts the mean just below.
      const double spread = std::max(std::abs(r.bounds.lower - mean), std::abs(r.bounds.upper - mean)) / mean;
      ok = spread <= 0.01;
      detail += "S=1 capacity " + fmt(mean, 6) + " vs bounds " + fmt(r.bounds.lower, 6) + " (" + fmt(100 * spread, 3) +
                "%); ";
    } else {
      detail += "S=" + std::to_string(r.streams) + " " + fmt(r.bounds.lower) + " <= " + fmt(mean) + " <= " +
                fmt(r.bounds.upper) + "; ";
    }
    pass = pass && ok;
  }
  return {pass, detail};
}

Verdict criterion9() {
  bool pass = true;
  std::string detail;
  CMatrix h(1, 1);
  h(0, 0) = 1.0;
  const RVector p = RVector::Ones(1);
  Rng rng(1009);
  const std::uint64_t bits = 1000000;
  for (double snr_db : {0.0, 5.0, 10.0}) {
    const double snr = db_to_linear(snr_db);
    const BerResult r = ber_bpsk(h, 1.0, p, 1.0 / snr, bits, rng);
    const double expected = q_function(std::sqrt(2.0 * snr));
    const double se = std::sqrt(expected * (1.0 - expected) / bits);
    const double z = (r.stream_ber(0) - expected) / se;
    pass = pass && std::abs(z) <= 3.0;
    detail += fmt(snr_db, 3) + " dB: " + fmt(r.stream_ber(0)) + " vs " + fmt(expected) + " (z=" + fmt(z, 3) + "); ";
  }

  ExperimentConfig c = layer_sweep(4, 49, 10, 1019);
  c.channel.shadowing_db = 0.0;
  c.budget.tx_power_dbm = 40.0;
  c.sweep.ber_bits = 20000;
  const SweepResult r = run_sweep(c);
  const double one = *r.aggregates[0].ber;
  const double four = *r.aggregates[2].ber;
  pass = pass && four < one;
  detail += "S=4 at Pt=40 dBm: BER L=K=1 " + fmt(one) + ", L=K=4 " + fmt(four);
  return {pass, detail};
}

int run_command(const std::string& args) {
  const std::string cmd = std::string("\"") + SIMHMIMO_CLI_PATH + "\" " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Verdict criterion10() {
  const fs::path dir = fs::temp_directory_path() / ("simhmimo_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string config = std::string(SIMHMIMO_CONFIG_DIR) + "/smoke.toml";
  bool pass = true;
  std::string detail;
  for (const char* sub : {"fit", "sweep", "ber", "bounds", "baseline"})
    for (const char* format : {"", " --json"}) {
      std::string outputs[2];
      for (int run = 0; run < 2; ++run) {
        const fs::path out = dir / (std::string(sub) + std::to_string(run));
        const int code = run_command(std::string(sub) + format + " --config \"" + config +
                                     "\" --seed 99 --threads 1 --out \"" + out.string() + "\"");
        outputs[run] = code == 0 ? slurp(out) : std::string();
      }
      const bool same = !outputs[0].empty() && outputs[0] == outputs[1];
      pass = pass && same;
      detail += std::string(sub) + format + (same ? " identical; " : " DIFFERS; ");
    }
  fs::remove_all(dir);
  return {pass, detail};
}

Verdict criterion11() {
  // Squares cannot double exactly; 144 -> 289 atoms is a factor of 2.007.
  struct Case {
    PropagationOperators ops;
    CMatrix g;
    SvdTarget target;
  };
  auto make_case = [](int atoms) {
    const auto arch = make_arch(8, 2, atoms, 1, 9);
    Case c{build_operators(arch), CMatrix(), SvdTarget{}};
    Rng rng(1011);
    c.g = complex_gaussian(9, atoms, 1.0, rng);
    c.target = truncated_svd_target(c.g, 8);
    return c;
  };
  auto per_iteration = [](const Case& c, int run) {
    FitHyperparams h;
    h.max_iters = 20;
    h.stop_delta_rel = 0.0;
    Rng rng(run);
    const PhaseState init = PhaseState::random(c.ops, rng);
    const auto t0 = Clock::now();
    const FitResult r = descend(init, c.ops, c.g, c.target.lambda, h);
    return seconds_since(t0) / r.iterations;
  };
  const Case small = make_case(144), large = make_case(289);
  std::vector<double> a, b;
  for (int run = 0; run < 21; ++run) {
    a.push_back(per_iteration(small, run));
    b.push_back(per_iteration(large, run));
  }
  std::nth_element(a.begin(), a.begin() + 10, a.end());
  std::nth_element(b.begin(), b.begin() + 10, b.end());
  const double ratio = b[10] / a[10];
  return {ratio >= 3.0 && ratio <= 5.0, "median per-iteration time M=144: " + fmt(a[10] * 1e3) + " ms, M=289: " +
                                            fmt(b[10] * 1e3) + " ms, ratio " + fmt(ratio, 3) +
                                            " (N=9, S=8, L=2, K=1)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},   {5, criterion5},  {6, criterion6},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {11, criterion11}};
  int failures = 0;
  for (const auto& [id, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
