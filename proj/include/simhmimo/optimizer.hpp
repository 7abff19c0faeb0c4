#pragma once

// Multi-start gradient descent over SIM phase shifts.
//
// Minimizes Gamma = ||alpha Q G P - Lambda_S||_F^2 over the TX phases theta,
// the RX phases xi and the complex scale alpha. Each iteration:
//   1. analytic partial derivatives w.r.t. every phase (alpha held fixed),
//   2. per-layer normalization so the largest |derivative| equals pi,
//   3. phase step with learning rate eta,
//   4. least-squares refresh of alpha,
//   5. eta <- eta * beta.
// Phases are the only free parameters, so the unit-modulus constraint on
// every transmission coefficient holds by construction.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "simhmimo/channel.hpp"
#include "simhmimo/propagation.hpp"
#include "simhmimo/types.hpp"

namespace simhmimo {

struct FitHyperparams {
  double initial_lr = 0.1;  // eta_0
  double decay = 0.5;       // beta
  int max_iters = 100;
  int starts = 10;
  /// Stop once |Gamma_{i-1} - Gamma_i| < stop_delta_rel * ||Lambda_S||_F^2.
  double stop_delta_rel = 1e-6;

  void validate() const {
    if (!(initial_lr > 0)) throw std::invalid_argument("optimizer: initial_lr must be > 0");
    if (!(decay > 0 && decay < 1)) throw std::invalid_argument("optimizer: decay must lie in (0, 1)");
    if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
    if (starts < 1) throw std::invalid_argument("optimizer: starts must be >= 1");
    if (!(stop_delta_rel >= 0)) throw std::invalid_argument("optimizer: stop_delta_rel must be >= 0");
  }
};

struct PhaseGradient {
  RMatrix theta;  // L x M
  RMatrix xi;     // K x N
};

/// Gamma for the given phases and alpha.
inline double loss(const PhaseState& phases, const PropagationOperators& ops, const CMatrix& channel,
                   const CMatrix& target) {
  return (phases.alpha * end_to_end(ops, phases, channel) - target).squaredNorm();
}

/// Least-squares scale alpha = (h^H h)^{-1} h^H lambda over vec(H), vec(Lambda).
struct ScaleFit {
  Complex alpha{0.0, 0.0};
  bool degenerate = false;  // H identically zero
};

inline ScaleFit update_alpha(const CMatrix& h, const CMatrix& target) {
  if (h.rows() != target.rows() || h.cols() != target.cols())
    throw std::invalid_argument("update_alpha: H and Lambda differ in shape");
  const double energy = h.squaredNorm();
  if (energy == 0.0) return {Complex{0.0, 0.0}, true};
  // h^H lambda = sum conj(h_i) lambda_i
  const Complex inner = (h.conjugate().cwiseProduct(target)).sum();
  return {inner / energy, false};
}

namespace detail {

// dGamma/dphi for one diagonal phase layer sandwiched as H = A diag(c) B:
//   g_m = 2 Im[ conj(alpha c_m) * sum_{s,t} conj(A_{s,m} B_{m,t}) R_{s,t} ]
// with residual R = alpha H - Lambda.
inline RVector layer_gradient(const CMatrix& before, const CVector& coeffs, const CMatrix& after,
                              const CMatrix& residual, Complex alpha) {
  const CMatrix weighted = residual * after.adjoint();  // S x atoms
  const Eigen::RowVectorXcd inner = before.conjugate().cwiseProduct(weighted).colwise().sum();
  RVector g(coeffs.size());
  for (Eigen::Index m = 0; m < coeffs.size(); ++m) g(m) = 2.0 * std::imag(std::conj(alpha * coeffs(m)) * inner(m));
  return g;
}

}  // namespace detail

/// Analytic partial derivatives of Gamma with alpha held fixed.
///
/// One forward pass stores the field arriving at each TX layer and the
/// partial RX products; the backward sweeps then reuse them, so the cost is
/// O(S (M^2 L + N^2 K)) per call.
inline PhaseGradient gradient(const PhaseState& phases, const PropagationOperators& ops, const CMatrix& channel,
                              const CMatrix& target) {
  const int tx_layers = ops.tx_layers();
  const int rx_layers = ops.rx_layers();

  std::vector<CVector> tx_coeffs(tx_layers), rx_coeffs(rx_layers);
  for (int l = 0; l < tx_layers; ++l) tx_coeffs[l] = phases.tx_coefficients(l);
  for (int k = 0; k < rx_layers; ++k) rx_coeffs[k] = phases.rx_coefficients(k);

  // arriving[l] = W^{l+1} T_l: field at TX layer l before its phase shift (M x S).
  std::vector<CMatrix> arriving(tx_layers);
  CMatrix field;
  for (int l = 0; l < tx_layers; ++l) {
    arriving[l] = l == 0 ? ops.tx[0] : CMatrix(ops.tx[l] * field);
    field = tx_coeffs[l].asDiagonal() * arriving[l];
  }
  const CMatrix& precoder = field;

  // leading[k] = U^1 Psi^1 ... Psi^{k-1} U^{k+1}, 0-based: S x N operator ending at RX layer k.
  std::vector<CMatrix> leading(rx_layers);
  for (int k = 0; k < rx_layers; ++k) {
    leading[k] = k == 0 ? ops.rx[0] : CMatrix((leading[k - 1] * rx_coeffs[k - 1].asDiagonal()) * ops.rx[k]);
  }
  const CMatrix combiner = leading[rx_layers - 1] * rx_coeffs[rx_layers - 1].asDiagonal();

  const CMatrix precoded = channel * precoder;  // G P, N x S
  const CMatrix h = combiner * precoded;
  const CMatrix residual = phases.alpha * h - target;

  PhaseGradient grad{RMatrix(tx_layers, ops.tx_atoms()), RMatrix(rx_layers, ops.rx_atoms())};

  // TX sweep from the output layer inward; `downstream` is Q G Phi^L W^L ... W^{l+2} Phi^{l+1} W^{l+1}... (S x M).
  CMatrix downstream = combiner * channel;
  for (int l = tx_layers - 1; l >= 0; --l) {
    grad.theta.row(l) = detail::layer_gradient(downstream, tx_coeffs[l], arriving[l], residual, phases.alpha);
    if (l > 0) downstream = (downstream * tx_coeffs[l].asDiagonal()) * ops.tx[l];
  }

  // RX sweep from the input layer toward the antennas; `upstream` is U^{k+1} Psi^{k+1} ... G P (N x S).
  CMatrix upstream = precoded;
  for (int k = rx_layers - 1; k >= 0; --k) {
    grad.xi.row(k) = detail::layer_gradient(leading[k], rx_coeffs[k], upstream, residual, phases.alpha);
    if (k > 0) upstream = ops.rx[k] * (rx_coeffs[k].asDiagonal() * upstream);
  }
  return grad;
}

/// Scales each layer's derivatives by pi / max_m |dGamma/dphase_m|.
/// Layers whose derivatives are all zero pass through unchanged.
inline PhaseGradient normalize_gradient(PhaseGradient g) {
  auto normalize_rows = [](RMatrix& rows) {
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const double peak = rows.row(r).cwiseAbs().maxCoeff();
      if (peak > 0.0) rows.row(r) *= kPi / peak;
    }
  };
  normalize_rows(g.theta);
  normalize_rows(g.xi);
  return g;
}

/// theta <- theta - eta * dtheta, xi likewise, re-wrapped into [0, 2 pi).
inline PhaseState step(PhaseState phases, const PhaseGradient& g, double learning_rate) {
  phases.theta -= learning_rate * g.theta;
  phases.xi -= learning_rate * g.xi;
  phases.wrap();
  return phases;
}

inline double decay_lr(double learning_rate, double decay) { return learning_rate * decay; }

struct FitResult {
  PhaseState phases;               // best iterate of the winning start, alpha included
  double loss = 0.0;               // Gamma at `phases`
  double final_nmse = 0.0;         // loss / target_energy
  double target_energy = 0.0;      // ||Lambda_S||_F^2
  std::vector<double> loss_trace;  // Gamma per iterate of the winning start, [0] = initialization
  int best_iteration = 0;          // index into loss_trace where `loss` was attained
  int iterations = 0;              // gradient steps taken by the winning start
  int start_index = 0;
  bool degenerate = false;         // alpha collapsed to zero because H vanished
};

/// Runs one descent from `initial` (alpha is overwritten by its LS value).
inline FitResult descend(PhaseState initial, const PropagationOperators& ops, const CMatrix& channel,
                         const CMatrix& target, const FitHyperparams& hyper) {
  const double target_energy = target.squaredNorm();
  const double stop_delta = hyper.stop_delta_rel * target_energy;

  FitResult r;
  r.target_energy = target_energy;
  PhaseState current = std::move(initial);
  ScaleFit scale = update_alpha(end_to_end(ops, current, channel), target);
  current.alpha = scale.alpha;
  double current_loss = loss(current, ops, channel, target);

  r.phases = current;
  r.loss = current_loss;
  r.degenerate = scale.degenerate;
  r.loss_trace.push_back(current_loss);

  double lr = hyper.initial_lr;
  for (int iter = 1; iter <= hyper.max_iters; ++iter) {
    const PhaseGradient g = normalize_gradient(gradient(current, ops, channel, target));
    current = step(std::move(current), g, lr);
    const CMatrix h = end_to_end(ops, current, channel);
    scale = update_alpha(h, target);
    current.alpha = scale.alpha;
    lr = decay_lr(lr, hyper.decay);
    const double next_loss = (current.alpha * h - target).squaredNorm();

    r.loss_trace.push_back(next_loss);
    r.iterations = iter;
    if (next_loss < r.loss) {
      r.loss = next_loss;
      r.phases = current;
      r.best_iteration = iter;
      r.degenerate = scale.degenerate;
    }
    const bool settled = std::abs(current_loss - next_loss) < stop_delta;
    current_loss = next_loss;
    if (settled) break;
  }
  r.final_nmse = target_energy > 0 ? r.loss / target_energy : 0.0;
  return r;
}

/// Best of `hyper.starts` descents from uniform random phase initializations.
/// Each start draws its phases from its own child seed of `rng`, so starts
/// are independent of evaluation order.
inline FitResult fit(const PropagationOperators& ops, const CMatrix& channel, const CMatrix& target,
                     const FitHyperparams& hyper, Rng& rng) {
  hyper.validate();
  if (target.rows() != ops.streams() || target.cols() != ops.streams())
    throw std::invalid_argument("fit: target must be S x S");
  const std::uint64_t base = rng();
  FitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  for (int start = 0; start < hyper.starts; ++start) {
    Rng start_rng(derive_seed(base, {static_cast<std::uint64_t>(start)}));
    FitResult r = descend(PhaseState::random(ops, start_rng), ops, channel, target, hyper);
    if (r.loss < best.loss) {
      best = std::move(r);
      best.start_index = start;
    }
  }
  return best;
}

}  // namespace simhmimo
