#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "amploco/gait.hpp"
#include "oracles.hpp"

using namespace amploco;

using oracle::von_mises_swing;

TEST(Advance, WrapsModuloOne) {
  GaitClock c;
  c.phase = 0.9;
  c.period = 1.0;
  EXPECT_NEAR(advance(c, 0.2).phase, 0.1, 1e-12);
}

TEST(Advance, FullPeriodReturnsToStart) {
  GaitClock c;
  c.phase = 0.3;
  c.period = 0.8;
  EXPECT_NEAR(advance(c, 0.8).phase, 0.3, 1e-12);
  GaitClock d = c;
  for (int i = 0; i < 1000; ++i) d = advance(d, c.period / 1000.0);
  EXPECT_NEAR(std::remainder(d.phase - c.phase, 1.0), 0.0, 1e-9);
  EXPECT_EQ(d.period, c.period);
  EXPECT_EQ(d.swing_ratio, c.swing_ratio);
}

TEST(Advance, RejectsNonPositiveDt) {
  EXPECT_THROW(advance(GaitClock{}, 0.0), DomainError);
  EXPECT_THROW(advance(GaitClock{}, -0.1), DomainError);
}

TEST(PhaseExpectation, PartitionOnRandomParameters) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double phase = u(rng);
    const double ratio = 0.01 + 0.98 * u(rng);
    const double kappa = std::exp(std::log(0.1) + u(rng) * (std::log(2000.0) - std::log(0.1)));
    const auto e = phase_expectation(phase, ratio, kappa);
    EXPECT_NEAR(e.swing + e.stance, 1.0, 1e-9);
    EXPECT_GE(e.swing, 0.0);
    EXPECT_LE(e.swing, 1.0);
  }
}

TEST(PhaseExpectation, MatchesQuadratureOracleOnGrid) {
  for (double kappa : {0.5, 4.0, 50.0, 400.0}) {
    for (double ratio : {0.3, 0.4, 0.5, 0.7}) {
      for (int k = 0; k < 100; ++k) {
        const double phase = k / 100.0;
        EXPECT_NEAR(phase_expectation(phase, ratio, kappa).swing, von_mises_swing(phase, ratio, kappa), 1e-6)
            << "phase " << phase << " ratio " << ratio << " kappa " << kappa;
      }
    }
  }
}

TEST(PhaseExpectation, MidSwingAndMidStance) {
  EXPECT_GE(phase_expectation(0.25, 0.5, 50.0).swing, 0.99);
  EXPECT_GE(von_mises_swing(0.25, 0.5, 50.0), 0.99);
  EXPECT_GE(phase_expectation(0.75, 0.5, 1000.0).stance, 0.99);
}

TEST(PhaseExpectation, ConvergesToHardIndicator) {
  const double ratio = 0.4;
  for (int k = 0; k < 200; ++k) {
    const double phase = k / 200.0;
    const double d0 = std::min(std::abs(phase), std::abs(1.0 - phase));
    const double d1 = std::abs(phase - ratio);
    if (d0 < 0.05 || d1 < 0.05) continue;
    const double hard = (phase > 0.0 && phase < ratio) ? 1.0 : 0.0;
    EXPECT_NEAR(phase_expectation(phase, ratio, 1000.0).swing, hard, 1e-3);
  }
}

TEST(PhaseExpectation, LipschitzBoundedByDensityPeak) {
  const double kappa = 50.0;
  // Density peak in cycle-fraction units: 2 pi exp(kappa) / (2 pi I0(kappa)).
  const double peak = std::exp(kappa) / std::cyl_bessel_i(0.0, kappa);
  const double delta = 1e-4;
  for (int k = 0; k < 1000; ++k) {
    const double phase = k / 1000.0 * (1.0 - delta);
    const double d = std::abs(phase_expectation(phase + delta, 0.4, kappa).swing -
                              phase_expectation(phase, 0.4, kappa).swing);
    EXPECT_LE(d, 2.0 * peak * delta);
  }
}

TEST(PhaseExpectation, DomainErrors) {
  EXPECT_THROW(phase_expectation(1.0, 0.4, 50), DomainError);
  EXPECT_THROW(phase_expectation(-0.1, 0.4, 50), DomainError);
  EXPECT_THROW(phase_expectation(0.2, 0.0, 50), DomainError);
  EXPECT_THROW(phase_expectation(0.2, 1.0, 50), DomainError);
  EXPECT_THROW(phase_expectation(0.2, 0.4, 0.0), DomainError);
}

TEST(LegStance, EqualOffsetsGiveEqualExpectations) {
  GaitClock c;
  c.offset_left = c.offset_right = 0.3;
  for (int k = 0; k < 50; ++k) {
    c.phase = k / 50.0;
    const auto [q1, q2] = leg_stance_expectations(c);
    EXPECT_EQ(q1, q2);
  }
}

TEST(LegStance, AntiPhaseLegs) {
  GaitClock c;
  c.offset_left = 0.0;
  c.offset_right = 0.5;
  c.swing_ratio = 0.5;
  c.kappa = 1000.0;
  c.phase = 0.25;
  const auto [q1, q2] = leg_stance_expectations(c);
  EXPECT_NEAR(q1, 1.0 - von_mises_swing(0.25, 0.5, 1000.0), 1e-6);
  EXPECT_NEAR(q2, 1.0 - von_mises_swing(0.75, 0.5, 1000.0), 1e-6);
  EXPECT_LT(q1, 0.01);
  EXPECT_GT(q2, 0.99);
}

TEST(LegStance, PeriodicInPhase) {
  GaitClock a;
  a.phase = 0.2;
  GaitClock b = advance(a, a.period);
  const auto qa = leg_stance_expectations(a);
  const auto qb = leg_stance_expectations(b);
  EXPECT_NEAR(qa.first, qb.first, 1e-9);
  EXPECT_NEAR(qa.second, qb.second, 1e-9);
}

TEST(SwingProgress, Examples) {
  EXPECT_EQ(swing_progress(0.0, 0.0, 0.4), 0.0);
  EXPECT_NEAR(swing_progress(0.3, 0.1, 0.4), 1.0, 1e-12);
  EXPECT_NEAR(swing_progress(0.2, 0.0, 0.4), 0.5, 1e-12);
  EXPECT_NEAR(swing_progress(0.9, 0.5, 0.4), 0.4 / 0.4, 1e-12);
}
