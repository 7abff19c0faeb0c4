#pragma once

// Spatially correlated Rayleigh channel between the TX-SIM output layer and
// the RX-SIM input layer, with log-distance path loss and log-normal
// shadowing.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>

#include "simhmimo/geometry.hpp"
#include "simhmimo/types.hpp"

namespace simhmimo {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for a stream identified by a path of indices below `master`.
/// Trials seeded this way do not depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

/// Isotropic-scattering correlation of a square lattice: sinc(2 r / lambda).
inline RMatrix correlation_matrix(int row_len, double spacing, double wavelength) {
  if (!(spacing > 0) || !(wavelength > 0)) throw std::domain_error("correlation_matrix: non-positive length");
  const int n = row_len * row_len;
  RMatrix r(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n; ++j) {
      const double v = sinc(2.0 * intra_layer_distance(i, j, spacing, row_len) / wavelength);
      r(i - 1, j - 1) = v;
      r(j - 1, i - 1) = v;
    }
  }
  return r;
}

/// Principal square root of a symmetric PSD matrix. Eigenvalues below
/// 1e-12 * lambda_max are clamped to zero first.
inline RMatrix psd_sqrt(const RMatrix& r) {
  if (r.rows() != r.cols()) throw std::invalid_argument("psd_sqrt: matrix is not square");
  const double scale = std::max(r.cwiseAbs().maxCoeff(), 1e-300);
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("psd_sqrt: matrix is not symmetric");
  const RMatrix sym = 0.5 * (r + r.transpose());
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(sym);
  if (eig.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigendecomposition failed");
  RVector values = eig.eigenvalues();
  const double floor = 1e-12 * std::max(values.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < values.size(); ++i) values(i) = values(i) < floor ? 0.0 : std::sqrt(values(i));
  return eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
}

struct PathLossParams {
  double reference_distance = 1.0;  // d0 (m)
  double exponent = 3.5;            // b
  double shadowing_db = 9.0;        // delta, std of X_delta (dB)
  double distance = 250.0;          // d (m)
};

/// Path loss in dB for a given standard-normal shadowing draw.
inline double path_loss_db(const PathLossParams& p, double shadowing_draw, double wavelength) {
  if (!(p.reference_distance > 0)) throw std::domain_error("path loss: reference distance must be positive");
  if (p.distance < p.reference_distance) throw std::domain_error("path loss: model requires d >= d0");
  return 20.0 * std::log10(4.0 * kPi * p.reference_distance / wavelength) +
         10.0 * p.exponent * std::log10(p.distance / p.reference_distance) + p.shadowing_db * shadowing_draw;
}

/// Linear power gain rho^2 = 10^(-PL/10).
inline double path_loss_gain(const PathLossParams& p, double shadowing_draw, double wavelength) {
  return std::pow(10.0, -path_loss_db(p, shadowing_draw, wavelength) / 10.0);
}

/// Immutable per-architecture channel statistics. Correlation square roots
/// are computed once here.
struct ChannelModel {
  RMatrix tx_correlation;  // R_Tx, M x M
  RMatrix rx_correlation;  // R_Rx, N x N
  RMatrix tx_sqrt;
  RMatrix rx_sqrt;
  PathLossParams path_loss;
  double wavelength = 0.0107;
  double rho2 = 1.0;  // path-loss gain without shadowing

  static ChannelModel make(RMatrix tx_corr, RMatrix rx_corr, PathLossParams pl, double wavelength) {
    ChannelModel m;
    m.tx_sqrt = psd_sqrt(tx_corr);
    m.rx_sqrt = psd_sqrt(rx_corr);
    m.tx_correlation = std::move(tx_corr);
    m.rx_correlation = std::move(rx_corr);
    m.path_loss = pl;
    m.wavelength = wavelength;
    m.rho2 = path_loss_gain(pl, 0.0, wavelength);
    return m;
  }

  /// Sinc-correlated (or i.i.d. when `correlated` is false) model for an architecture.
  static ChannelModel for_architecture(const SimArchitecture& arch, const PathLossParams& pl, bool correlated) {
    arch.validate();
    if (!correlated)
      return make(RMatrix::Identity(arch.tx_atoms, arch.tx_atoms), RMatrix::Identity(arch.rx_atoms, arch.rx_atoms),
                  pl, arch.wavelength);
    return make(correlation_matrix(arch.row_len(Side::tx), arch.tx_spacing, arch.wavelength),
                correlation_matrix(arch.row_len(Side::rx), arch.rx_spacing, arch.wavelength), pl, arch.wavelength);
  }

  /// Fixed-gain model with no path-loss parameters, for tests and oracles.
  static ChannelModel with_gain(RMatrix tx_corr, RMatrix rx_corr, double rho2) {
    ChannelModel m = make(std::move(tx_corr), std::move(rx_corr), PathLossParams{1.0, 0.0, 0.0, 1.0}, 1.0);
    m.rho2 = rho2;
    return m;
  }

  int tx_atoms() const { return static_cast<int>(tx_correlation.rows()); }
  int rx_atoms() const { return static_cast<int>(rx_correlation.rows()); }
};

struct ChannelRealization {
  CMatrix g;           // N x M
  double rho2 = 0.0;   // gain used for this draw, shadowing included
};

/// i.i.d. CN(0, variance) matrix.
inline CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  CMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(i, j) = Complex{re, im};
    }
  return out;
}

/// G = R_Rx^{1/2} G~ R_Tx^{1/2}. One shadowing draw per realization.
inline ChannelRealization draw_channel(const ChannelModel& model, Rng& rng) {
  double rho2 = model.rho2;
  if (model.path_loss.shadowing_db > 0.0) {
    std::normal_distribution<double> normal;
    rho2 = path_loss_gain(model.path_loss, normal(rng), model.wavelength);
  }
  const CMatrix iid = complex_gaussian(model.rx_atoms(), model.tx_atoms(), rho2, rng);
  return {model.rx_sqrt.cast<Complex>() * iid * model.tx_sqrt.cast<Complex>(), rho2};
}

}  // namespace simhmimo
