#pragma once

// Rayleigh-Sommerfeld diffraction operators between SIM layers, and their
// composition with phase-shift layers into the wave-domain precoder P and
// combiner Q.

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "simhmimo/geometry.hpp"
#include "simhmimo/types.hpp"

namespace simhmimo {

/// Complex transmission coefficient between two points on parallel layers
/// separated by `axial_gap`. The obliquity factor cos(chi) is taken as
/// axial_gap / dist, i.e. measured against the layer normal.
inline Complex diffraction_coefficient(double dist, double axial_gap, double area, double wavelength) {
  if (!(axial_gap > 0) || !(area > 0) || !(wavelength > 0))
    throw std::domain_error("diffraction_coefficient: gap, area and wavelength must be positive");
  // Relative slack so that sqrt(0 + gap^2) round-off is accepted.
  if (dist < axial_gap * (1.0 - 1e-12))
    throw std::domain_error("diffraction_coefficient: distance shorter than the axial gap");
  const double cos_chi = axial_gap / dist;
  const Complex bracket{1.0 / (kTwoPi * dist), -1.0 / wavelength};
  return (area * cos_chi / dist) * bracket * std::polar(1.0, kTwoPi * dist / wavelength);
}

/// Fixed diffraction matrices of both SIMs.
///
/// tx[0] = W^1 (M x S), tx[l] = W^{l+1} (M x M);
/// rx[0] = U^1 (S x N), rx[k] = U^{k+1} (N x N).
struct PropagationOperators {
  std::vector<CMatrix> tx;
  std::vector<CMatrix> rx;

  int streams() const { return static_cast<int>(tx.front().cols()); }
  int tx_atoms() const { return static_cast<int>(tx.front().rows()); }
  int rx_atoms() const { return static_cast<int>(rx.front().cols()); }
  int tx_layers() const { return static_cast<int>(tx.size()); }
  int rx_layers() const { return static_cast<int>(rx.size()); }
};

namespace detail {

// Layer-to-layer operator; reciprocal, so the same matrix serves W^l and U^k.
inline CMatrix layer_operator(const SimArchitecture& arch, Side side) {
  const int n = arch.atoms(side);
  const int row = arch.row_len(side);
  const double spacing = arch.spacing(side);
  const double gap = arch.layer_gap(side);
  const double area = arch.atom_area(side);
  CMatrix op(n, n);
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const double dist = inter_layer_distance(i, j, spacing, row, gap);
      op(i - 1, j - 1) = diffraction_coefficient(dist, gap, area, arch.wavelength);
    }
  }
  return op;
}

// Antenna-array operator, atoms x antennas.
inline CMatrix antenna_operator(const SimArchitecture& arch, Side side) {
  const int n = arch.atoms(side);
  const double gap = arch.layer_gap(side);
  const double area = arch.atom_area(side);
  CMatrix op(n, arch.streams);
  for (int m = 1; m <= n; ++m) {
    for (int s = 1; s <= arch.streams; ++s) {
      const double dist = antenna_to_layer_distance(s, m, arch, side);
      op(m - 1, s - 1) = diffraction_coefficient(dist, gap, area, arch.wavelength);
    }
  }
  return op;
}

}  // namespace detail

inline std::vector<CMatrix> build_tx_operators(const SimArchitecture& arch) {
  arch.validate();
  std::vector<CMatrix> ops;
  ops.reserve(arch.tx_layers);
  ops.push_back(detail::antenna_operator(arch, Side::tx));
  if (arch.tx_layers > 1) {
    const CMatrix layer = detail::layer_operator(arch, Side::tx);
    for (int l = 1; l < arch.tx_layers; ++l) ops.push_back(layer);
  }
  return ops;
}

inline std::vector<CMatrix> build_rx_operators(const SimArchitecture& arch) {
  arch.validate();
  std::vector<CMatrix> ops;
  ops.reserve(arch.rx_layers);
  ops.push_back(detail::antenna_operator(arch, Side::rx).transpose());
  if (arch.rx_layers > 1) {
    const CMatrix layer = detail::layer_operator(arch, Side::rx);
    for (int k = 1; k < arch.rx_layers; ++k) ops.push_back(layer);
  }
  return ops;
}

inline PropagationOperators build_operators(const SimArchitecture& arch) {
  return {build_tx_operators(arch), build_rx_operators(arch)};
}

inline double wrap_phase(double phase) {
  double r = std::fmod(phase, kTwoPi);
  if (r < 0) r += kTwoPi;
  // fmod of a tiny negative number can round up to exactly 2*pi.
  return r >= kTwoPi ? 0.0 : r;
}

/// Tunable state: phase shifts of every meta-atom plus the scaling factor.
/// theta is L x M, xi is K x N, both reduced into [0, 2*pi).
struct PhaseState {
  RMatrix theta;
  RMatrix xi;
  Complex alpha{1.0, 0.0};

  static PhaseState zeros(int tx_layers, int tx_atoms, int rx_layers, int rx_atoms) {
    return {RMatrix::Zero(tx_layers, tx_atoms), RMatrix::Zero(rx_layers, rx_atoms), Complex{1.0, 0.0}};
  }

  static PhaseState zeros(const PropagationOperators& ops) {
    return zeros(ops.tx_layers(), ops.tx_atoms(), ops.rx_layers(), ops.rx_atoms());
  }

  template <class Rng>
  static PhaseState random(const PropagationOperators& ops, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.0, kTwoPi);
    PhaseState p = zeros(ops);
    for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta.data()[i] = wrap_phase(uniform(rng));
    for (Eigen::Index i = 0; i < p.xi.size(); ++i) p.xi.data()[i] = wrap_phase(uniform(rng));
    return p;
  }

  void wrap() {
    theta = theta.unaryExpr([](double v) { return wrap_phase(v); });
    xi = xi.unaryExpr([](double v) { return wrap_phase(v); });
  }

  /// Unit-modulus transmission coefficients of TX layer l (0-based).
  CVector tx_coefficients(int l) const {
    return theta.row(l).transpose().unaryExpr([](double t) { return std::polar(1.0, t); });
  }
  CVector rx_coefficients(int k) const {
    return xi.row(k).transpose().unaryExpr([](double t) { return std::polar(1.0, t); });
  }
};

namespace detail {

inline void check_dimensions(const PropagationOperators& ops, const PhaseState& phases) {
  if (phases.theta.rows() != ops.tx_layers() || phases.theta.cols() != ops.tx_atoms() ||
      phases.xi.rows() != ops.rx_layers() || phases.xi.cols() != ops.rx_atoms())
    throw std::invalid_argument("phase state dimensions do not match the propagation operators");
}

}  // namespace detail

/// P = Phi^L W^L ... Phi^1 W^1 (M x S), evaluated from the antennas outward.
inline CMatrix tx_response(const PropagationOperators& ops, const PhaseState& phases) {
  detail::check_dimensions(ops, phases);
  CMatrix field = phases.tx_coefficients(0).asDiagonal() * ops.tx[0];
  for (int l = 1; l < ops.tx_layers(); ++l) {
    CMatrix next = ops.tx[l] * field;
    field = phases.tx_coefficients(l).asDiagonal() * next;
  }
  return field;
}

/// Q = U^1 Psi^1 U^2 Psi^2 ... U^K Psi^K (S x N), evaluated from the antennas outward.
inline CMatrix rx_response(const PropagationOperators& ops, const PhaseState& phases) {
  detail::check_dimensions(ops, phases);
  CMatrix field = ops.rx[0] * phases.rx_coefficients(0).asDiagonal();
  for (int k = 1; k < ops.rx_layers(); ++k) {
    CMatrix next = field * ops.rx[k];
    field = next * phases.rx_coefficients(k).asDiagonal();
  }
  return field;
}

/// H = Q G P (S x S). G is N x M.
inline CMatrix end_to_end(const PropagationOperators& ops, const PhaseState& phases, const CMatrix& channel) {
  if (channel.rows() != ops.rx_atoms() || channel.cols() != ops.tx_atoms())
    throw std::invalid_argument("channel is " + std::to_string(channel.rows()) + "x" +
                                std::to_string(channel.cols()) + ", expected " + std::to_string(ops.rx_atoms()) +
                                "x" + std::to_string(ops.tx_atoms()));
  const CMatrix precoded = channel * tx_response(ops, phases);
  return rx_response(ops, phases) * precoded;
}

}  // namespace simhmimo
