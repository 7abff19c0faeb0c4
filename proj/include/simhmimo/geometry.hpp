#pragma once

// Lattice geometry of a stacked-metasurface transceiver.
//
// All atom and antenna indices in this header are 1-based, matching the
// usual lattice notation: atom m sits at row ceil(m / row_len) and column
// ((m - 1) mod row_len) + 1. Storage elsewhere in the library is 0-based;
// the conversion happens at the call sites that fill matrices.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace simhmimo {

enum class Side { tx, rx };

/// Static description of one SIM-aided link.
struct SimArchitecture {
  int streams = 4;      // S, also the antenna count at each end
  int tx_layers = 7;    // L
  int rx_layers = 7;    // K
  int tx_atoms = 100;   // M, perfect square
  int rx_atoms = 100;   // N, perfect square
  double tx_spacing = 0.0107 / 2;  // r_et (m)
  double rx_spacing = 0.0107 / 2;  // t_er (m)
  double tx_thickness = 0.05;      // D_t (m)
  double rx_thickness = 0.05;      // D_r (m)
  double wavelength = 0.0107;      // lambda (m)
  std::optional<double> tx_atom_area;  // A_t (m^2), defaults to r_et^2
  std::optional<double> rx_atom_area;  // A_r (m^2), defaults to t_er^2

  int layers(Side side) const { return side == Side::tx ? tx_layers : rx_layers; }
  int atoms(Side side) const { return side == Side::tx ? tx_atoms : rx_atoms; }
  double spacing(Side side) const { return side == Side::tx ? tx_spacing : rx_spacing; }
  int row_len(Side side) const { return static_cast<int>(std::lround(std::sqrt(atoms(side)))); }

  /// Inter-layer gap, d = D / layers. Derived, never stored.
  double layer_gap(Side side) const {
    return side == Side::tx ? tx_thickness / tx_layers : rx_thickness / rx_layers;
  }

  double atom_area(Side side) const {
    if (side == Side::tx) return tx_atom_area.value_or(tx_spacing * tx_spacing);
    return rx_atom_area.value_or(rx_spacing * rx_spacing);
  }

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("invalid architecture: " + what); };
    if (streams < 1) fail("streams (S) must be >= 1");
    if (tx_layers < 1) fail("tx_layers (L) must be >= 1");
    if (rx_layers < 1) fail("rx_layers (K) must be >= 1");
    for (Side side : {Side::tx, Side::rx}) {
      const char* name = side == Side::tx ? "tx_atoms (M)" : "rx_atoms (N)";
      const int n = atoms(side);
      if (n < 1) fail(std::string(name) + " must be >= 1");
      const int r = row_len(side);
      if (r * r != n) fail(std::string(name) + " = " + std::to_string(n) + " is not a perfect square");
      if (n < streams)
        fail(std::string(name) + " = " + std::to_string(n) + " is smaller than streams (S) = " +
             std::to_string(streams));
    }
    if (!(tx_spacing > 0) || !(rx_spacing > 0)) fail("element spacings must be positive");
    if (!(tx_thickness > 0) || !(rx_thickness > 0)) fail("SIM thicknesses must be positive");
    if (!(wavelength > 0)) fail("wavelength must be positive");
    if (tx_atom_area && !(*tx_atom_area > 0)) fail("tx_atom_area must be positive");
    if (rx_atom_area && !(*rx_atom_area > 0)) fail("rx_atom_area must be positive");
  }
};

/// Row (z) and column (x) of a meta-atom on the square lattice, both 1-based.
struct LatticeIndex {
  int z = 1;
  int x = 1;
  friend bool operator==(const LatticeIndex&, const LatticeIndex&) = default;
};

inline LatticeIndex atom_index(int m, int row_len) {
  if (row_len < 1 || m < 1 || m > row_len * row_len)
    throw std::domain_error("atom index " + std::to_string(m) + " outside 1.." +
                            std::to_string(row_len * row_len));
  return {(m + row_len - 1) / row_len, (m - 1) % row_len + 1};
}

/// Inverse of atom_index.
inline int linear_index(LatticeIndex idx, int row_len) { return (idx.z - 1) * row_len + idx.x; }

/// In-plane distance between two atoms of the same layer.
inline double intra_layer_distance(int m, int m_tilde, double spacing, int row_len) {
  const LatticeIndex a = atom_index(m, row_len);
  const LatticeIndex b = atom_index(m_tilde, row_len);
  const double dz = a.z - b.z;
  const double dx = a.x - b.x;
  return spacing * std::sqrt(dz * dz + dx * dx);
}

/// Distance between atom m_tilde on one layer and atom m on the next.
inline double inter_layer_distance(int m, int m_tilde, double spacing, int row_len, double layer_gap) {
  if (!(layer_gap > 0)) throw std::domain_error("layer gap must be positive");
  const double r = intra_layer_distance(m, m_tilde, spacing, row_len);
  return std::sqrt(r * r + layer_gap * layer_gap);
}

/// Distance from antenna s of the half-wavelength ULA to atom m of the
/// nearest layer (TX input layer or RX output layer). Array centers are
/// aligned with the lattice center and the ULA runs along the z axis.
inline double antenna_to_layer_distance(int s, int m, const SimArchitecture& arch, Side side) {
  if (s < 1 || s > arch.streams)
    throw std::domain_error("antenna index " + std::to_string(s) + " outside 1.." + std::to_string(arch.streams));
  const int row = arch.row_len(side);
  const LatticeIndex a = atom_index(m, row);
  const double center = (row + 1) / 2.0;
  const double spacing = arch.spacing(side);
  const double dz = (a.z - center) * spacing - (s - (arch.streams + 1) / 2.0) * arch.wavelength / 2.0;
  const double dx = (a.x - center) * spacing;
  const double gap = arch.layer_gap(side);
  return std::sqrt(dz * dz + dx * dx + gap * gap);
}

}  // namespace simhmimo
