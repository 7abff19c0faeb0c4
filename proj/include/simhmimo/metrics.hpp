#pragma once

// Fit quality, interference-aware capacity, capacity bounds and Monte-Carlo
// oracles for the asymptotic scaling laws and BPSK error rate.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "simhmimo/channel.hpp"
#include "simhmimo/propagation.hpp"
#include "simhmimo/target.hpp"
#include "simhmimo/types.hpp"

namespace simhmimo {

/// Total transmit power and receiver noise power, both in watts.
struct LinkBudget {
  double tx_power = dbm_to_watts(20.0);
  double noise_power = dbm_to_watts(-110.0);

  static LinkBudget from_dbm(double tx_dbm, double noise_dbm) { return {dbm_to_watts(tx_dbm), dbm_to_watts(noise_dbm)}; }

  double snr() const { return tx_power / noise_power; }
};

/// ||alpha H - Lambda||_F^2 / ||Lambda||_F^2.
inline double nmse(const CMatrix& h, Complex alpha, const CMatrix& target) {
  const double norm = target.squaredNorm();
  if (!(norm > 0)) throw std::domain_error("nmse: target has zero norm");
  return (alpha * h - target).squaredNorm() / norm;
}

/// Capacity with off-diagonal leakage of alpha H treated as noise.
inline double sim_capacity(const CMatrix& h, Complex alpha, const RVector& power, double noise_power) {
  const Eigen::Index streams = h.rows();
  if (h.cols() != streams || power.size() != streams) throw std::invalid_argument("sim_capacity: size mismatch");
  const RMatrix gain = (alpha * h).cwiseAbs2();
  double c = 0.0;
  for (Eigen::Index s = 0; s < streams; ++s) {
    double interference = 0.0;
    for (Eigen::Index t = 0; t < streams; ++t)
      if (t != s) interference += power(t) * gain(s, t);
    c += std::log2(1.0 + power(s) * gain(s, s) / (interference + noise_power));
  }
  return c;
}

/// One channel draw's strongest and S-th squared singular values.
struct EigenSample {
  double first = 0.0;  // lambda_1^2
  double last = 0.0;   // lambda_S^2
};

struct CapacityBounds {
  double lower = 0.0;
  double upper = 0.0;
  double e_first = 0.0;  // sample mean of lambda_1^2
  double e_last = 0.0;   // sample mean of lambda_S^2
};

/// Equal-power bounds evaluated at the sample means of lambda_S^2 (lower)
/// and lambda_1^2 (upper).
inline CapacityBounds capacity_bounds(std::span<const EigenSample> samples, int streams, const LinkBudget& budget) {
  if (samples.empty()) throw std::domain_error("capacity_bounds: no eigenvalue samples");
  if (streams < 1) throw std::domain_error("capacity_bounds: streams must be >= 1");
  CapacityBounds b;
  for (const EigenSample& s : samples) {
    b.e_first += s.first;
    b.e_last += s.last;
  }
  b.e_first /= static_cast<double>(samples.size());
  b.e_last /= static_cast<double>(samples.size());
  const double per_stream = budget.snr() / streams;
  b.lower = streams * std::log2(1.0 + per_stream * b.e_last);
  b.upper = streams * std::log2(1.0 + per_stream * b.e_first);
  return b;
}

/// Large-S limit of the bounds: P_t log2(e) E(lambda^2) / sigma^2.
inline double prop1_limit(double e_lambda_sq, const LinkBudget& budget) {
  return budget.snr() * std::numbers::log2e * e_lambda_sq;
}

/// Co-phased single-layer gain E(|h|^2) = rho^2 E(|sum_m |h1_m||^2 |sum_n |h2_n||^2)
/// with unit complex Gaussians, next to two closed forms.
struct CoPhasedGain {
  double monte_carlo = 0.0;
  double asymptotic_form = 0.0;     // pi^2 rho^2 M^2 N^2 / 4
  double rayleigh_form = 0.0;  // rho^2 (M + M(M-1) pi/4)(N + N(N-1) pi/4)
  int trials = 0;
};

namespace detail {

// |sum of n unit-variance Rayleigh magnitudes|^2 for one draw.
inline double coherent_sum_sq(int n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    sum += std::hypot(re, im);
  }
  return sum * sum;
}

}  // namespace detail

inline CoPhasedGain prop2_oracle(int tx_atoms, int rx_atoms, double rho2, int trials, Rng& rng) {
  if (trials < 1) throw std::domain_error("prop2_oracle: trials must be >= 1");
  if (tx_atoms < 1 || rx_atoms < 1) throw std::domain_error("prop2_oracle: atom counts must be >= 1");
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) acc += detail::coherent_sum_sq(tx_atoms, rng) * detail::coherent_sum_sq(rx_atoms, rng);
  const double m = tx_atoms;
  const double n = rx_atoms;
  CoPhasedGain g;
  g.trials = trials;
  g.monte_carlo = rho2 * acc / trials;
  g.asymptotic_form = kPi * kPi * rho2 * m * m * n * n / 4.0;
  g.rayleigh_form = rho2 * (m + m * (m - 1) * kPi / 4.0) * (n + n * (n - 1) * kPi / 4.0);
  return g;
}

/// Ergodic single-stream capacity of a co-phased single-layer link:
/// mean over draws of log2(1 + P_t rho^2 |sum|h1||^2 |sum|h2||^2 / sigma^2).
inline double co_phased_capacity(int tx_atoms, int rx_atoms, double rho2, const LinkBudget& budget, int trials,
                                 Rng& rng) {
  if (trials < 1) throw std::domain_error("co_phased_capacity: trials must be >= 1");
  double acc = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double gain = rho2 * detail::coherent_sum_sq(tx_atoms, rng) * detail::coherent_sum_sq(rx_atoms, rng);
    acc += std::log2(1.0 + budget.snr() * gain);
  }
  return acc / trials;
}

struct BerResult {
  std::vector<std::uint64_t> errors;  // per stream
  std::uint64_t bits_per_stream = 0;

  double stream_ber(std::size_t s) const { return static_cast<double>(errors.at(s)) / bits_per_stream; }
  double aggregate() const {
    std::uint64_t total = 0;
    for (auto e : errors) total += e;
    return static_cast<double>(total) / (static_cast<double>(bits_per_stream) * errors.size());
  }
};

/// Monte-Carlo BPSK over y = alpha H x + n, x_s = sqrt(p_s) b_s, n ~ CN(0, sigma^2 I).
/// Stream s is detected by the sign of Re(y_s / (alpha h_ss)); leakage from
/// the other streams is left in as interference.
inline BerResult ber_bpsk(const CMatrix& h, Complex alpha, const RVector& power, double noise_power,
                          std::uint64_t bits_per_stream, Rng& rng) {
  const Eigen::Index streams = h.rows();
  if (h.cols() != streams || power.size() != streams) throw std::invalid_argument("ber_bpsk: size mismatch");
  if (bits_per_stream == 0) throw std::domain_error("ber_bpsk: bits_per_stream must be > 0");
  const CMatrix effective = alpha * h;
  const RVector amplitude = power.cwiseSqrt();
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal(0.0, std::sqrt(noise_power / 2.0));

  BerResult r{std::vector<std::uint64_t>(streams, 0), bits_per_stream};
  CVector x(streams);
  std::vector<bool> bits(streams);
  for (std::uint64_t n = 0; n < bits_per_stream; ++n) {
    for (Eigen::Index s = 0; s < streams; ++s) {
      bits[s] = coin(rng);
      x(s) = amplitude(s) * (bits[s] ? 1.0 : -1.0);
    }
    const CVector clean = effective * x;
    for (Eigen::Index s = 0; s < streams; ++s) {
      const double re = normal(rng);
      const double im = normal(rng);
      const Complex y = clean(s) + Complex{re, im};
      const Complex equalized = y / effective(s, s);
      const bool decided = std::real(equalized) > 0.0;
      if (decided != bits[s]) ++r.errors[s];
    }
  }
  return r;
}

inline BerResult ber_bpsk(const PhaseState& phases, const PropagationOperators& ops, const CMatrix& channel,
                          const RVector& power, double noise_power, std::uint64_t bits_per_stream, Rng& rng) {
  return ber_bpsk(end_to_end(ops, phases, channel), phases.alpha, power, noise_power, bits_per_stream, rng);
}

/// Gaussian tail Q(x).
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

}  // namespace simhmimo
