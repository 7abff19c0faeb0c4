#pragma once

// Experiment configuration and its TOML representation.
//
//   [architecture]  streams, tx_layers, rx_layers, tx_atoms, rx_atoms,
//                   tx_spacing_wavelengths, rx_spacing_wavelengths (multiples of lambda),
//                   tx_thickness_m, rx_thickness_m, frequency_ghz,
//                   tx_atom_area_m2, rx_atom_area_m2 (optional, m^2)
//   [channel]       distance_m, reference_distance_m, pathloss_exponent,
//                   shadowing_db, correlated
//   [budget]        tx_power_dbm, noise_power_dbm
//   [optimizer]     initial_lr, decay, max_iters, starts, stop_delta_rel
//   [sweep]         axis, values, trials, seed, ber_bits
//   [baseline]      antennas_tx, antennas_rx
//
// Sweep axes: layers (L = K), atoms (M = N), spacing (r_et = t_er, in
// wavelengths), streams (S), distance (m), power (P_t in dBm), or none.
// Every key is optional; omitted keys keep their defaults.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "simhmimo/channel.hpp"
#include "simhmimo/geometry.hpp"
#include "simhmimo/metrics.hpp"
#include "simhmimo/optimizer.hpp"

namespace simhmimo {

/// Raised for anything wrong with a configuration file or its values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { none, layers, atoms, spacing, streams, distance, power };

inline std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::none: return "none";
    case SweepAxis::layers: return "layers";
    case SweepAxis::atoms: return "atoms";
    case SweepAxis::spacing: return "spacing";
    case SweepAxis::streams: return "streams";
    case SweepAxis::distance: return "distance";
    case SweepAxis::power: return "power";
  }
  return "none";
}

inline SweepAxis parse_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::none, SweepAxis::layers, SweepAxis::atoms, SweepAxis::spacing, SweepAxis::streams,
                      SweepAxis::distance, SweepAxis::power})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown sweep axis '" + std::string(name) + "'");
}

struct ArchitectureConfig {
  int streams = 4;
  int tx_layers = 7;
  int rx_layers = 7;
  int tx_atoms = 100;
  int rx_atoms = 100;
  double tx_spacing_wavelengths = 0.5;
  double rx_spacing_wavelengths = 0.5;
  double tx_thickness_m = 0.05;
  double rx_thickness_m = 0.05;
  double frequency_ghz = 28.0;
  std::optional<double> tx_atom_area_m2;
  std::optional<double> rx_atom_area_m2;

  double wavelength() const { return kSpeedOfLight / (frequency_ghz * 1e9); }

  SimArchitecture architecture() const {
    const double lambda = wavelength();
    SimArchitecture a;
    a.streams = streams;
    a.tx_layers = tx_layers;
    a.rx_layers = rx_layers;
    a.tx_atoms = tx_atoms;
    a.rx_atoms = rx_atoms;
    a.tx_spacing = tx_spacing_wavelengths * lambda;
    a.rx_spacing = rx_spacing_wavelengths * lambda;
    a.tx_thickness = tx_thickness_m;
    a.rx_thickness = rx_thickness_m;
    a.wavelength = lambda;
    a.tx_atom_area = tx_atom_area_m2;
    a.rx_atom_area = rx_atom_area_m2;
    return a;
  }
};

struct ChannelConfig {
  double distance_m = 250.0;
  double reference_distance_m = 1.0;
  double pathloss_exponent = 3.5;
  double shadowing_db = 9.0;
  bool correlated = true;

  PathLossParams path_loss() const { return {reference_distance_m, pathloss_exponent, shadowing_db, distance_m}; }
};

struct BudgetConfig {
  double tx_power_dbm = 20.0;
  double noise_power_dbm = -110.0;

  LinkBudget budget() const { return LinkBudget::from_dbm(tx_power_dbm, noise_power_dbm); }
};

struct SweepConfig {
  SweepAxis axis = SweepAxis::none;
  std::vector<double> values;
  int trials = 100;
  std::uint64_t seed = 1;
  std::int64_t ber_bits = 0;  // BPSK bits per stream per trial; 0 disables BER
};

struct BaselineConfig {
  int antennas_tx = 64;
  int antennas_rx = 64;
};

struct ExperimentConfig {
  ArchitectureConfig architecture;
  ChannelConfig channel;
  BudgetConfig budget;
  FitHyperparams optimizer;
  SweepConfig sweep;
  BaselineConfig baseline;

  /// Sweep values, or a single placeholder point when the axis is none.
  std::vector<double> points() const {
    if (sweep.axis == SweepAxis::none) return {0.0};
    return sweep.values;
  }

  /// Copy of this configuration with the swept variable set to `value`.
  ExperimentConfig at(double value) const {
    ExperimentConfig c = *this;
    auto as_int = [&](double v) {
      const auto i = static_cast<int>(std::lround(v));
      if (std::abs(v - i) > 1e-9) throw ConfigError("sweep value " + std::to_string(v) + " must be an integer");
      return i;
    };
    switch (sweep.axis) {
      case SweepAxis::none: break;
      case SweepAxis::layers: c.architecture.tx_layers = c.architecture.rx_layers = as_int(value); break;
      case SweepAxis::atoms: c.architecture.tx_atoms = c.architecture.rx_atoms = as_int(value); break;
      case SweepAxis::spacing:
        c.architecture.tx_spacing_wavelengths = c.architecture.rx_spacing_wavelengths = value;
        break;
      case SweepAxis::streams: c.architecture.streams = as_int(value); break;
      case SweepAxis::distance: c.channel.distance_m = value; break;
      case SweepAxis::power: c.budget.tx_power_dbm = value; break;
    }
    return c;
  }

  /// Checks every sweep point; throws ConfigError naming the violated invariant.
  void validate() const {
    if (sweep.axis != SweepAxis::none && sweep.values.empty())
      throw ConfigError("sweep axis '" + std::string(to_string(sweep.axis)) + "' has no values");
    if (sweep.trials < 1) throw ConfigError("sweep.trials must be >= 1");
    if (sweep.ber_bits < 0) throw ConfigError("sweep.ber_bits must be >= 0");
    if (baseline.antennas_tx < 1 || baseline.antennas_rx < 1) throw ConfigError("baseline antenna counts must be >= 1");
    if (!(architecture.frequency_ghz > 0)) throw ConfigError("architecture.frequency_ghz must be positive");
    for (double v : points()) {
      const ExperimentConfig c = at(v);
      try {
        c.architecture.architecture().validate();
        c.optimizer.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      if (!(c.channel.reference_distance_m > 0)) throw ConfigError("channel.reference_distance_m must be positive");
      if (c.channel.distance_m < c.channel.reference_distance_m)
        throw ConfigError("channel.distance_m must be >= reference_distance_m");
      if (c.channel.shadowing_db < 0) throw ConfigError("channel.shadowing_db must be >= 0");
      if (baseline.antennas_tx < c.architecture.streams || baseline.antennas_rx < c.architecture.streams)
        throw ConfigError("baseline antenna counts must be >= streams");
    }
  }
};

namespace detail {

template <class T>
T read_number(const toml::table& section, std::string_view section_name, std::string_view key, T fallback) {
  const toml::node* node = section.get(key);
  if (!node) return fallback;
  if constexpr (std::is_same_v<T, bool>) {
    if (auto v = node->value<bool>()) return *v;
  } else if constexpr (std::is_integral_v<T>) {
    if (node->is_integer()) return static_cast<T>(*node->value<std::int64_t>());
  } else {
    if (auto v = node->value<double>()) return *v;
  }
  throw ConfigError("[" + std::string(section_name) + "] " + std::string(key) + " has the wrong type");
}

inline const toml::table* section(const toml::table& root, std::string_view name) {
  const toml::node* node = root.get(name);
  if (!node) return nullptr;
  if (!node->is_table()) throw ConfigError("[" + std::string(name) + "] must be a table");
  return node->as_table();
}

inline void reject_unknown(const toml::table& t, std::string_view name, std::initializer_list<std::string_view> known) {
  for (auto&& [key, value] : t) {
    bool ok = false;
    for (auto k : known) ok = ok || key.str() == k;
    if (!ok) throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + std::string(name) + "]");
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const toml::table& root) {
  using detail::read_number;
  ExperimentConfig c;
  for (auto&& [key, value] : root) {
    const auto k = key.str();
    if (k != "architecture" && k != "channel" && k != "budget" && k != "optimizer" && k != "sweep" && k != "baseline")
      throw ConfigError("unknown section [" + std::string(k) + "]");
  }
  if (const auto* t = detail::section(root, "architecture")) {
    detail::reject_unknown(*t, "architecture",
                           {"streams", "tx_layers", "rx_layers", "tx_atoms", "rx_atoms", "tx_spacing_wavelengths",
                            "rx_spacing_wavelengths", "tx_thickness_m", "rx_thickness_m", "frequency_ghz",
                            "tx_atom_area_m2", "rx_atom_area_m2"});
    auto& a = c.architecture;
    a.streams = read_number(*t, "architecture", "streams", a.streams);
    a.tx_layers = read_number(*t, "architecture", "tx_layers", a.tx_layers);
    a.rx_layers = read_number(*t, "architecture", "rx_layers", a.rx_layers);
    a.tx_atoms = read_number(*t, "architecture", "tx_atoms", a.tx_atoms);
    a.rx_atoms = read_number(*t, "architecture", "rx_atoms", a.rx_atoms);
    a.tx_spacing_wavelengths = read_number(*t, "architecture", "tx_spacing_wavelengths", a.tx_spacing_wavelengths);
    a.rx_spacing_wavelengths = read_number(*t, "architecture", "rx_spacing_wavelengths", a.rx_spacing_wavelengths);
    a.tx_thickness_m = read_number(*t, "architecture", "tx_thickness_m", a.tx_thickness_m);
    a.rx_thickness_m = read_number(*t, "architecture", "rx_thickness_m", a.rx_thickness_m);
    a.frequency_ghz = read_number(*t, "architecture", "frequency_ghz", a.frequency_ghz);
    if (t->contains("tx_atom_area_m2")) a.tx_atom_area_m2 = read_number(*t, "architecture", "tx_atom_area_m2", 0.0);
    if (t->contains("rx_atom_area_m2")) a.rx_atom_area_m2 = read_number(*t, "architecture", "rx_atom_area_m2", 0.0);
  }
  if (const auto* t = detail::section(root, "channel")) {
    detail::reject_unknown(*t, "channel",
                           {"distance_m", "reference_distance_m", "pathloss_exponent", "shadowing_db", "correlated"});
    auto& ch = c.channel;
    ch.distance_m = read_number(*t, "channel", "distance_m", ch.distance_m);
    ch.reference_distance_m = read_number(*t, "channel", "reference_distance_m", ch.reference_distance_m);
    ch.pathloss_exponent = read_number(*t, "channel", "pathloss_exponent", ch.pathloss_exponent);
    ch.shadowing_db = read_number(*t, "channel", "shadowing_db", ch.shadowing_db);
    ch.correlated = read_number(*t, "channel", "correlated", ch.correlated);
  }
  if (const auto* t = detail::section(root, "budget")) {
    detail::reject_unknown(*t, "budget", {"tx_power_dbm", "noise_power_dbm"});
    c.budget.tx_power_dbm = read_number(*t, "budget", "tx_power_dbm", c.budget.tx_power_dbm);
    c.budget.noise_power_dbm = read_number(*t, "budget", "noise_power_dbm", c.budget.noise_power_dbm);
  }
  if (const auto* t = detail::section(root, "optimizer")) {
    detail::reject_unknown(*t, "optimizer", {"initial_lr", "decay", "max_iters", "starts", "stop_delta_rel"});
    auto& o = c.optimizer;
    o.initial_lr = read_number(*t, "optimizer", "initial_lr", o.initial_lr);
    o.decay = read_number(*t, "optimizer", "decay", o.decay);
    o.max_iters = read_number(*t, "optimizer", "max_iters", o.max_iters);
    o.starts = read_number(*t, "optimizer", "starts", o.starts);
    o.stop_delta_rel = read_number(*t, "optimizer", "stop_delta_rel", o.stop_delta_rel);
  }
  if (const auto* t = detail::section(root, "sweep")) {
    detail::reject_unknown(*t, "sweep", {"axis", "values", "trials", "seed", "ber_bits"});
    auto& s = c.sweep;
    if (const toml::node* axis = t->get("axis")) {
      auto name = axis->value<std::string>();
      if (!name) throw ConfigError("[sweep] axis must be a string");
      s.axis = parse_axis(*name);
    }
    if (const toml::node* values = t->get("values")) {
      const toml::array* arr = values->as_array();
      if (!arr) throw ConfigError("[sweep] values must be an array");
      for (const toml::node& v : *arr) {
        auto d = v.value<double>();
        if (!d) throw ConfigError("[sweep] values must be numbers");
        s.values.push_back(*d);
      }
    }
    s.trials = read_number(*t, "sweep", "trials", s.trials);
    const auto seed = read_number<std::int64_t>(*t, "sweep", "seed", static_cast<std::int64_t>(s.seed));
    if (seed < 0) throw ConfigError("[sweep] seed must be >= 0");
    s.seed = static_cast<std::uint64_t>(seed);
    s.ber_bits = read_number(*t, "sweep", "ber_bits", s.ber_bits);
  }
  if (const auto* t = detail::section(root, "baseline")) {
    detail::reject_unknown(*t, "baseline", {"antennas_tx", "antennas_rx"});
    c.baseline.antennas_tx = read_number(*t, "baseline", "antennas_tx", c.baseline.antennas_tx);
    c.baseline.antennas_rx = read_number(*t, "baseline", "antennas_rx", c.baseline.antennas_rx);
  }
  return c;
}

inline ExperimentConfig parse_config(std::string_view text) {
  try {
    return parse_config(toml::parse(text));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "config parse error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return parse_config(toml::parse_file(path.string()));
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << path.string() << ": " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(os.str());
  }
}

inline toml::table to_toml(const ExperimentConfig& c) {
  const auto& a = c.architecture;
  toml::table arch{{"streams", a.streams},
                   {"tx_layers", a.tx_layers},
                   {"rx_layers", a.rx_layers},
                   {"tx_atoms", a.tx_atoms},
                   {"rx_atoms", a.rx_atoms},
                   {"tx_spacing_wavelengths", a.tx_spacing_wavelengths},
                   {"rx_spacing_wavelengths", a.rx_spacing_wavelengths},
                   {"tx_thickness_m", a.tx_thickness_m},
                   {"rx_thickness_m", a.rx_thickness_m},
                   {"frequency_ghz", a.frequency_ghz}};
  if (a.tx_atom_area_m2) arch.insert("tx_atom_area_m2", *a.tx_atom_area_m2);
  if (a.rx_atom_area_m2) arch.insert("rx_atom_area_m2", *a.rx_atom_area_m2);

  toml::array values;
  for (double v : c.sweep.values) values.push_back(v);

  return toml::table{
      {"architecture", std::move(arch)},
      {"channel", toml::table{{"distance_m", c.channel.distance_m},
                              {"reference_distance_m", c.channel.reference_distance_m},
                              {"pathloss_exponent", c.channel.pathloss_exponent},
                              {"shadowing_db", c.channel.shadowing_db},
                              {"correlated", c.channel.correlated}}},
      {"budget", toml::table{{"tx_power_dbm", c.budget.tx_power_dbm}, {"noise_power_dbm", c.budget.noise_power_dbm}}},
      {"optimizer", toml::table{{"initial_lr", c.optimizer.initial_lr},
                                {"decay", c.optimizer.decay},
                                {"max_iters", c.optimizer.max_iters},
                                {"starts", c.optimizer.starts},
                                {"stop_delta_rel", c.optimizer.stop_delta_rel}}},
      {"sweep", toml::table{{"axis", std::string(to_string(c.sweep.axis))},
                            {"values", std::move(values)},
                            {"trials", c.sweep.trials},
                            {"seed", static_cast<std::int64_t>(c.sweep.seed)},
                            {"ber_bits", c.sweep.ber_bits}}},
      {"baseline", toml::table{{"antennas_tx", c.baseline.antennas_tx}, {"antennas_rx", c.baseline.antennas_rx}}},
  };
}

inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << to_toml(c) << '\n';
  return os.str();
}

}  // namespace simhmimo
