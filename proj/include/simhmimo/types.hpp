#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace simhmimo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kJ{0.0, 1.0};

/// Speed of light in vacuum (m/s).
inline constexpr double kSpeedOfLight = 299792458.0;

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace simhmimo
