#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "simhmimo/metrics.hpp"
#include "test_support.hpp"

namespace simhmimo {
namespace {

TEST(Nmse, Examples) {
  CMatrix lambda = CMatrix::Zero(2, 2);
  lambda(0, 0) = 2.0;
  lambda(1, 1) = 1.0;
  EXPECT_DOUBLE_EQ(nmse(lambda, 1.0, lambda), 0.0);
  EXPECT_DOUBLE_EQ(nmse(lambda, 0.0, lambda), 1.0);
  CMatrix h(1, 1), t(1, 1);
  h(0, 0) = Complex{0.3, 0.4};
  t(0, 0) = 2.0;
  const Complex alpha{1.5, -2.0};
  EXPECT_NEAR(nmse(h, alpha, t), std::norm(alpha * h(0, 0) - 2.0) / 4.0, 1e-15);
  EXPECT_THROW(nmse(h, alpha, CMatrix::Zero(1, 1)), std::domain_error);
}

TEST(Nmse, GlobalPhaseRotationInvariance) {
  Rng rng(4);
  const CMatrix h = testing::random_complex(3, 3, rng);
  const CMatrix t = testing::random_complex(3, 3, rng);
  const Complex alpha{0.7, 0.2};
  for (double phi : {0.3, 1.7, -2.9}) {
    const Complex rot = std::polar(1.0, phi);
    EXPECT_NEAR(nmse(rot * h, alpha / rot, t), nmse(h, alpha, t), 1e-14);
  }
}

TEST(SimCapacity, DiagonalReducesToIdeal) {
  CMatrix h = CMatrix::Zero(3, 3);
  h(0, 0) = 3.0;
  h(1, 1) = Complex{0.0, 2.0};
  h(2, 2) = 1.0;
  RVector p(3), gains(3);
  p << 0.5, 0.3, 0.2;
  gains << 9.0, 4.0, 1.0;
  EXPECT_NEAR(sim_capacity(h, 1.0, p, 0.1), ideal_capacity(gains, p, 0.1), 1e-13);
}

TEST(SimCapacity, InterferenceLimitedCeiling) {
  const CMatrix h = CMatrix::Constant(2, 2, Complex{1.0, 0.0});
  const RVector p = RVector::Constant(2, 1e6);
  const double c = sim_capacity(h, 1.0, p, 1e-3);
  EXPECT_LT(c, 2.0);
  EXPECT_NEAR(c, 2.0 * std::log2(1.0 + 1e6 / (1e6 + 1e-3)), 1e-12);
}

TEST(SimCapacity, ScalarOracle) {
  Rng rng(10);
  const CMatrix h = testing::random_complex(2, 2, rng);
  const Complex alpha{0.9, -0.4};
  RVector p(2);
  p << 0.8, 1.7;
  const double noise = 0.3;
  const Complex a00 = alpha * h(0, 0), a01 = alpha * h(0, 1), a10 = alpha * h(1, 0), a11 = alpha * h(1, 1);
  const double expected = std::log2(1.0 + p(0) * std::norm(a00) / (p(1) * std::norm(a01) + noise)) +
                          std::log2(1.0 + p(1) * std::norm(a11) / (p(0) * std::norm(a10) + noise));
  EXPECT_NEAR(sim_capacity(h, alpha, p, noise), expected, 1e-13);
}

TEST(SimCapacity, NeverExceedsIdealWhenDiagonalIsBounded) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const CMatrix g = testing::random_complex(4, 4, rng);
    RVector gains(4);
    CMatrix h = 0.3 * testing::random_complex(4, 4, rng);
    for (int s = 0; s < 4; ++s) {
      gains(s) = std::norm(g(s, s)) + 0.1;
      const double mag = std::sqrt(gains(s)) * (0.5 + 0.5 * std::abs(std::sin(trial + s)));
      h(s, s) = std::polar(mag, 0.1 * s);
    }
    const RVector p = RVector::Constant(4, 0.25);
    EXPECT_LE(sim_capacity(h, 1.0, p, 0.01), ideal_capacity(gains, p, 0.01) + 1e-12);
  }
}

TEST(CapacityBounds, DeterministicDiagonalEnsemble) {
  // Closed form for lambda^2 = (4, 1), S = 2, P_t = sigma^2 = 1.
  const std::vector<EigenSample> samples(5, EigenSample{4.0, 1.0});
  const CapacityBounds b = capacity_bounds(samples, 2, LinkBudget{1.0, 1.0});
  EXPECT_NEAR(b.lower, 1.16992500144231, 1e-13);
  EXPECT_NEAR(b.upper, 3.16992500144231, 1e-13);
  EXPECT_DOUBLE_EQ(b.e_first, 4.0);
  EXPECT_DOUBLE_EQ(b.e_last, 1.0);
}

TEST(CapacityBounds, SingleStreamCollapses) {
  const std::vector<EigenSample> samples{{2.0, 2.0}, {0.5, 0.5}, {1.0, 1.0}};
  const CapacityBounds b = capacity_bounds(samples, 1, LinkBudget{1.0, 0.1});
  EXPECT_DOUBLE_EQ(b.lower, b.upper);
  EXPECT_THROW(capacity_bounds({}, 1, LinkBudget{}), std::domain_error);
}

TEST(Prop1Limit, Examples) {
  const LinkBudget budget{2.0, 0.5};
  EXPECT_NEAR(prop1_limit(0.25, budget), std::numbers::log2e, 1e-15);
  EXPECT_NEAR(prop1_limit(0.3, LinkBudget{4.0, 0.5}), 2.0 * prop1_limit(0.3, budget), 1e-14);
  const std::vector<EigenSample> samples{{0.3, 0.3}};
  const CapacityBounds b = capacity_bounds(samples, 256, budget);
  EXPECT_NEAR(b.upper, prop1_limit(0.3, budget), 0.01 * prop1_limit(0.3, budget));
}

TEST(Prop2Oracle, ScalarCaseAndQuadraticGrowth) {
  Rng rng(1);
  const CoPhasedGain one = prop2_oracle(1, 1, 0.5, 200000, rng);
  EXPECT_NEAR(one.monte_carlo, 0.5, 0.02);
  EXPECT_NEAR(one.rayleigh_form, 0.5, 1e-15);

  const CoPhasedGain small = prop2_oracle(8, 8, 1.0, 10000, rng);
  const CoPhasedGain large = prop2_oracle(16, 16, 1.0, 10000, rng);
  EXPECT_NEAR(large.monte_carlo / small.monte_carlo, 16.0, 1.6);
  EXPECT_NEAR(small.monte_carlo, small.rayleigh_form, 0.03 * small.rayleigh_form);
  EXPECT_DOUBLE_EQ(small.asymptotic_form, kPi * kPi * 64.0 * 64.0 / 4.0);
}

TEST(BerBpsk, NoiselessDiagonalIsErrorFree) {
  CMatrix h = CMatrix::Zero(2, 2);
  h(0, 0) = Complex{0.0, 1.0};
  h(1, 1) = Complex{-2.0, 0.5};
  Rng rng(2);
  const BerResult r = ber_bpsk(h, Complex{0.3, 0.3}, RVector::Ones(2), 1e-30, 20000, rng);
  EXPECT_EQ(r.aggregate(), 0.0);
}

TEST(BerBpsk, ScalarMatchesClosedForm) {
  CMatrix h(1, 1);
  h(0, 0) = Complex{0.6, -0.8};
  RVector p(1);
  p << 1.0;
  Rng rng(3);
  for (double snr_db : {0.0, 4.0}) {
    const double noise = 1.0 / db_to_linear(snr_db);
    const std::uint64_t bits = 400000;
    const BerResult r = ber_bpsk(h, 1.0, p, noise, bits, rng);
    const double expected = q_function(std::sqrt(2.0 / noise));
    const double se = std::sqrt(expected * (1 - expected) / bits);
    EXPECT_NEAR(r.stream_ber(0), expected, 3.0 * se) << snr_db;
  }
}

TEST(BerBpsk, NonincreasingInPower) {
  Rng gen(8);
  const CMatrix h = CMatrix::Identity(2, 2) + 0.1 * testing::random_complex(2, 2, gen);
  double previous = 1.0;
  for (double pt : {0.5, 2.0, 8.0}) {
    Rng rng(4);
    const BerResult r = ber_bpsk(h, 1.0, RVector::Constant(2, pt / 2), 1.0, 100000, rng);
    EXPECT_LE(r.aggregate(), previous);
    previous = r.aggregate();
  }
}

TEST(QFunction, Values) {
  EXPECT_DOUBLE_EQ(q_function(0.0), 0.5);
  EXPECT_NEAR(q_function(1.0), 0.158655253931457, 1e-14);
}

TEST(LinkBudget, DbmConversion) {
  const LinkBudget b = LinkBudget::from_dbm(20.0, -110.0);
  EXPECT_NEAR(b.tx_power, 0.1, 1e-15);
  EXPECT_NEAR(b.noise_power, 1e-14, 1e-28);
  EXPECT_NEAR(b.snr(), 1e13, 1e-2);
}

}  // namespace
}  // namespace simhmimo
