#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "seqrand/bell.hpp"

using namespace seqrand;
using namespace seqrand::bell;
using qsim::ComplexMatrix;

namespace {

constexpr double kPi = std::numbers::pi;

using oracle::pironio;
using oracle::random_strategy;
using oracle::s_prime_value;

}  // namespace

TEST(Bell, BoundarySaturation) {
    for (int k = 0; k <= 32; ++k) {
        const double t = kPi / 4 * k / 32;
        const auto r = boundary_residuals(protocol::correlations_kraus({t, 0.0, 0.0}), t);
        EXPECT_NEAR(r.tsirelson, 0.0, 1e-12);
        EXPECT_NEAR(r.s_theta, 0.0, 1e-12);
        EXPECT_NEAR(r.circle, 0.0, 1e-12);
    }
}

TEST(Bell, NoiseMovesInside) {
    const auto t = protocol::correlations_kraus({0.3, 0.02, 0.01});
    const auto r = boundary_residuals(t, 0.3);
    EXPECT_GT(r.tsirelson, 0.0);
    EXPECT_GT(r.s_theta, 0.0);
}

TEST(Bell, SosIdentityOnRandomStrategies) {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> alpha(-kPi / 4, kPi / 4);
    for (int k = 0; k < 20; ++k) {
        const auto s = random_strategy(rng, k % 2 == 0);
        const double a = alpha(rng);
        const double res = sos_residual(s, a);
        EXPECT_NEAR(res, 2.0 * std::sqrt(2.0) - s_prime_value(s, a), 1e-10);
        EXPECT_GE(res, -1e-12);
    }
}

TEST(Bell, TangentStrategySaturates) {
    for (double a : {-0.7, -0.2, 0.0, 0.4, 0.78}) {
        const auto s = tangent_strategy(a);
        EXPECT_NEAR(sos_residual(s, a), 0.0, 1e-12);
        EXPECT_NEAR(s_prime_value(s, a), 2.0 * std::sqrt(2.0), 1e-12);
    }
}

TEST(Bell, StateCharacterizationOnBoundary) {
    for (double t = 0.0; t <= kPi / 4 + 1e-12; t += kPi / 40) {
        const auto ops = protocol::build_dilated({t, 0.0, 0.0});
        EXPECT_NEAR(state_characterization_residual(ops, t), 0.0, 1e-10);
    }
    EXPECT_GT(state_characterization_residual(protocol::build_dilated({0.3, 0.0, 0.0}), 0.1), 1e-3);
    EXPECT_THROW(state_characterization_residual(protocol::build_dilated({0.3, 0.1, 0.0}), 0.3), RequiresPureState);
}

TEST(Bell, PironioBound) {
    EXPECT_EQ(pironio_hmin(1.5), 0.0);
    EXPECT_EQ(pironio_hmin(2.0), 0.0);
    EXPECT_NEAR(pironio_hmin(2.0 * std::sqrt(2.0)), 1.0, 1e-12);
    for (double s : {2.1, 2.5, 2.761, 2.772, 2.797}) EXPECT_NEAR(pironio_hmin(s), pironio(s), 1e-14);
    EXPECT_NEAR(pironio_hmin(2.761), 0.61, 0.02);
    EXPECT_NEAR(pironio_hmin(2.772), 0.63, 0.02);
    EXPECT_NEAR(pironio_hmin(2.797), 0.72, 0.02);
    EXPECT_THROW(pironio_hmin(2.9), SuperQuantum);
    EXPECT_THROW(pironio_hmin(NAN), SuperQuantum);
}

TEST(Bell, SThetaAndSPrime) {
    const auto v = bell_values(protocol::correlations_kraus({kPi / 8, 0.0, 0.0}));
    EXPECT_NEAR(s_theta(v, kPi / 8), std::sqrt(2.0), 1e-12);
    const auto t = protocol::correlations_kraus({0.2, 0.0, 0.0});
    const auto s = scenario::summarize(t);
    const double plus = s.ab[0][0] + s.ab[1][0], minus = s.ab0[0][1] - s.ab0[1][1];
    for (double a : {0.0, 0.3}) {
        EXPECT_NEAR(s_prime_alpha(t, a), (std::cos(a) + std::sin(a)) * plus + (std::cos(a) - std::sin(a)) * minus, 1e-14);
    }
}
