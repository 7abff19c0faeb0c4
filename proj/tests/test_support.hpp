#pragma once

#include <random>

#include "simhmimo/channel.hpp"
#include "simhmimo/geometry.hpp"
#include "simhmimo/propagation.hpp"

namespace simhmimo::testing {

inline SimArchitecture make_arch(int streams, int tx_layers, int tx_atoms, int rx_layers, int rx_atoms) {
  SimArchitecture a;
  a.streams = streams;
  a.tx_layers = tx_layers;
  a.rx_layers = rx_layers;
  a.tx_atoms = tx_atoms;
  a.rx_atoms = rx_atoms;
  a.wavelength = 0.0107;
  a.tx_spacing = a.rx_spacing = a.wavelength / 2;
  a.tx_thickness = a.rx_thickness = 0.05;
  return a;
}

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  return complex_gaussian(rows, cols, 1.0, rng);
}

/// Relative Frobenius error ||a - b|| / ||b||.
inline double rel_error(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

}  // namespace simhmimo::testing
