#pragma once

// Truncated-SVD target channel, water-filling and the full-precision
// capacity benchmark.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "simhmimo/types.hpp"

namespace simhmimo {

struct SvdTarget {
  RVector singular_values;  // all O = min(M, N), nonincreasing
  CMatrix right;            // F_S, M x S
  CMatrix left;             // E_S, N x S
  CMatrix lambda;           // Lambda_S, S x S diagonal

  int streams() const { return static_cast<int>(lambda.rows()); }

  /// Squared leading singular values lambda_1^2 .. lambda_S^2.
  RVector gains() const { return singular_values.head(streams()).array().square(); }
};

/// SVD of G (N x M) truncated to the S strongest eigenchannels.
///
/// Each singular pair is rotated so that the largest-magnitude entry of the
/// right singular vector is real and positive; this fixes the otherwise
/// arbitrary per-pair phase and leaves e_o f_o^H unchanged.
inline SvdTarget truncated_svd_target(const CMatrix& g, int streams) {
  const Eigen::Index order = std::min(g.rows(), g.cols());
  if (streams < 1 || streams > order)
    throw std::domain_error("truncated_svd_target: S = " + std::to_string(streams) + " outside 1.." +
                            std::to_string(order));
  Eigen::BDCSVD<CMatrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  CMatrix u = svd.matrixU().leftCols(streams);
  CMatrix v = svd.matrixV().leftCols(streams);
  for (int s = 0; s < streams; ++s) {
    Eigen::Index pivot = 0;
    v.col(s).cwiseAbs().maxCoeff(&pivot);
    const double mag = std::abs(v(pivot, s));
    if (mag == 0.0) continue;
    const Complex rotation = std::conj(v(pivot, s)) / mag;
    v.col(s) *= rotation;
    u.col(s) *= rotation;
  }
  SvdTarget t;
  t.singular_values = svd.singularValues();
  t.right = std::move(v);
  t.left = std::move(u);
  t.lambda = t.singular_values.head(streams).cast<Complex>().asDiagonal();
  return t;
}

struct PowerAllocation {
  RVector p;         // watts per stream
  double tau = 0.0;  // water level (watts)

  double total() const { return p.sum(); }
};

/// Eigenchannels with squared gain below this are never allocated power.
inline constexpr double kNegligibleGain = 1e-30;

/// p_s = max(0, tau - sigma2 / lambda_s^2) with sum p_s = P_t, tau found by
/// bisection on [sigma2 / max gain, P_t + sigma2 / min usable gain].
inline PowerAllocation water_filling(const RVector& gains, double total_power, double noise_power) {
  if (gains.size() == 0) throw std::invalid_argument("water_filling: no eigenchannels");
  if (!(total_power > 0) || !(noise_power > 0))
    throw std::domain_error("water_filling: power and noise must be positive");

  RVector floor_level = RVector::Constant(gains.size(), std::numeric_limits<double>::infinity());
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (Eigen::Index s = 0; s < gains.size(); ++s) {
    if (gains(s) < kNegligibleGain) continue;
    floor_level(s) = noise_power / gains(s);
    lo = std::min(lo, floor_level(s));
    hi = std::max(hi, floor_level(s));
  }
  if (!std::isfinite(lo)) throw std::domain_error("water_filling: every eigenchannel gain is negligible");
  hi += total_power;

  auto allocate = [&](double tau) { return (tau - floor_level.array()).max(0.0).matrix().eval(); };

  const double tolerance = 1e-9 * total_power;
  double tau = 0.5 * (lo + hi);
  RVector p = allocate(tau);
  for (int iter = 0; iter < 200; ++iter) {
    tau = 0.5 * (lo + hi);
    p = allocate(tau);
    const double excess = p.sum() - total_power;
    if (std::abs(excess) <= tolerance) break;
    (excess > 0 ? hi : lo) = tau;
  }
  // Spread the residual bisection error over the active set so the budget is met exactly.
  const Eigen::Index active = (p.array() > 0).count();
  if (active > 0) {
    tau += (total_power - p.sum()) / static_cast<double>(active);
    p = allocate(tau);
  }
  return {std::move(p), tau};
}

/// C = sum_s log2(1 + p_s lambda_s^2 / sigma2).
inline double ideal_capacity(const RVector& gains, const RVector& power, double noise_power) {
  if (gains.size() != power.size()) throw std::invalid_argument("ideal_capacity: size mismatch");
  double c = 0.0;
  for (Eigen::Index s = 0; s < gains.size(); ++s) c += std::log2(1.0 + power(s) * gains(s) / noise_power);
  return c;
}

}  // namespace simhmimo
