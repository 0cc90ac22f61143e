#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpgate/metrics.hpp"

using namespace cpgate;

TEST(Phase, WrapsIntoHalfOpenInterval)
{
    EXPECT_DOUBLE_EQ(wrap_phase(std::numbers::pi), std::numbers::pi);
    EXPECT_DOUBLE_EQ(wrap_phase(-std::numbers::pi), std::numbers::pi);
    EXPECT_NEAR(wrap_phase(3.0 * std::numbers::pi + 0.1), -std::numbers::pi + 0.1, 1e-12);
    EXPECT_NEAR(wrap_phase(-0.3), -0.3, 1e-15);
}

namespace {

WavePacket random_packet(const TimeGrid &g, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> d;
    WavePacket p(g);
    for (auto &z : p.amp) {
        z = cplx(d(rng), d(rng));
    }
    const double s = 1.0 / std::sqrt(p.norm());
    for (auto &z : p.amp) {
        z *= s;
    }
    return p;
}

} // namespace

TEST(Fidelity, IdentityAndConditionalScaling)
{
    const TimeGrid g = make_grid(20.0, 0.05);
    const WavePacket in = gaussian_packet(g, GaussianSpec{5.0, 1.0});
    const WavePacket out = shift(in, 10.0);
    const StateFidelity f = fidelity_one(out, in, 10.0);
    EXPECT_NEAR(f.F, 1.0, 1e-12);
    EXPECT_NEAR(f.phase, 0.0, 1e-12);

    for (unsigned seed = 1; seed <= 5; ++seed) {
        WavePacket noisy = random_packet(g, seed);
        for (std::size_t n = 0; n < g.n_bins; ++n) {
            noisy[n] = 0.3 * noisy[n] + out[n];
        }
        const StateFidelity a = fidelity_one(noisy, in, 10.0);
        WavePacket scaled = noisy;
        for (auto &z : scaled.amp) {
            z *= 0.37;
        }
        const StateFidelity b = fidelity_one(scaled, in, 10.0);
        EXPECT_NEAR(a.conditional(), b.conditional(), 1e-12);
        EXPECT_LE(b.F, b.conditional() + 1e-15);
        EXPECT_LE(a.conditional(), 1.0 + 1e-12);
    }
}

TEST(Fidelity, SeparableTwoPhotonIsSquareOfOnePhoton)
{
    const TimeGrid g = make_grid(6.0, 0.05);
    const WavePacket in = gaussian_packet(g, GaussianSpec{3.0, 1.0});
    for (unsigned seed = 1; seed <= 4; ++seed) {
        WavePacket p = random_packet(g, seed);
        for (std::size_t n = 0; n < g.n_bins; ++n) {
            p[n] = 0.5 * p[n] + in[n];
        }
        const double s = 1.0 / std::sqrt(p.norm());
        for (auto &z : p.amp) {
            z *= s;
        }
        const StateFidelity f1 = fidelity_one(p, in, 0.0);
        const StateFidelity f2 = fidelity_two(TwoPhotonRecord::product(p, p), in, 0.0);
        EXPECT_NEAR(f2.F, f1.F * f1.F, 1e-12);
        EXPECT_NEAR(wrap_phase(f2.phase - 2.0 * f1.phase), 0.0, 1e-12);
    }
}

TEST(Fidelity, PhaseConditionOfIdealCz)
{
    FidelityReport r = make_report({1.0, 0.4, 1.0}, {1.0, wrap_phase(0.8 + std::numbers::pi), 1.0});
    EXPECT_NEAR(phase_condition(r), 0.0, 1e-12);
    r.phase_11 = 0.8;
    EXPECT_NEAR(std::abs(phase_condition(r)), std::numbers::pi, 1e-12);
}

TEST(PowerLaw, RecoversExponentAndPrefactor)
{
    std::vector<double> x, y;
    for (int i = 0; i < 8; ++i) {
        x.push_back(std::pow(10.0, 0.3 * i));
        y.push_back(5.5 / x.back());
    }
    const ScalingFit f = fit_power_law(x, y);
    EXPECT_NEAR(f.exponent, -1.0, 1e-12);
    EXPECT_NEAR(f.prefactor, 5.5, 1e-10);
}

TEST(PowerLaw, RequiresFivePointsOverADecade)
{
    EXPECT_THROW(fit_power_law({1, 2, 3, 4}, {1, 2, 3, 4}), Error);
    EXPECT_THROW(fit_power_law({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}), Error);
    EXPECT_NO_THROW(fit_power_law({1, 2, 4, 8, 16}, {1, 2, 4, 8, 16}));
}
