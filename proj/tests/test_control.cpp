#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cpgate/control.hpp"
#include "cpgate/dynamics.hpp"

using namespace cpgate;

namespace {

const double omega_g = 4.0 * std::numbers::ln2;

struct AbsorbSetup {
    CavityConfig cfg;
    GaussianSpec spec{5.0, 1.0};
    TimeGrid grid = make_grid(10.0, 0.01);
    WavePacket xi = gaussian_packet(grid, spec);

    explicit AbsorbSetup(int k, double gamma_ratio)
    {
        cfg.order = order_from_int(k);
        cfg.gamma = gamma_ratio * omega_g;
    }
};

double final_pb(const CavityConfig &cfg, const ControlSchedule &s, const WavePacket &xi)
{
    return propagate(cfg, s, xi, 1).traces.p_b.back();
}

} // namespace

TEST(Absorption, Chi2CapturesPhotonWithSinglePeakedControl)
{
    AbsorbSetup a(2, 6.0);
    const ControlSchedule s = solve_absorption(a.cfg, a.xi, absorption_window(a.spec));
    EXPECT_GT(final_pb(a.cfg, s, a.xi), 0.999);

    // Ignore the start-up bins, where the input is still below 1e-4 of its peak.
    double xi_max = 0.0;
    for (std::size_t n = 0; n < a.grid.n_bins; ++n) {
        xi_max = std::max(xi_max, std::abs(a.xi[n]));
    }
    std::size_t first = 0;
    while (first < s.size() && std::abs(a.xi[first]) < 1e-4 * xi_max) {
        ++first;
    }
    std::size_t peak = first, maxima = 0;
    for (std::size_t n = first; n < s.size(); ++n) {
        if (std::abs(s.lambda[n]) > std::abs(s.lambda[peak])) {
            peak = n;
        }
    }
    const double top = std::abs(s.lambda[peak]);
    for (std::size_t n = first + 1; n + 1 < s.size(); ++n) {
        const double v = std::abs(s.lambda[n]);
        if (v > 0.01 * top && v >= std::abs(s.lambda[n - 1]) && v > std::abs(s.lambda[n + 1])) {
            ++maxima;
        }
    }
    EXPECT_EQ(maxima, 1u);
    EXPECT_NEAR(a.grid.time(peak), a.spec.center, 1.5);
}

TEST(Absorption, ProbabilityBookkeepingChi2)
{
    AbsorbSetup a(2, 6.0);
    const Synthesis s = synthesize_absorption(a.cfg, a.xi, absorption_window(a.spec));
    // Without loss, what has arrived and was not reflected sits in a or b.
    const double sg = std::sqrt(a.cfg.gamma);
    double arrived = 0.0;
    double worst = 0.0;
    for (std::size_t n = 0; n + 1 < a.grid.n_bins; ++n) {
        const double inside = std::norm(s.psi_a[n]) + std::norm(s.psi_b[n]);
        worst = std::max(worst, std::abs(inside - arrived));
        arrived += (std::norm(a.xi[n]) - std::norm(a.xi[n] - sg * s.psi_a[n])) * a.grid.dt;
    }
    // Rectangle-rule accounting, first order in dt.
    EXPECT_LT(worst, 1e-2);
    EXPECT_LT(s.reflected, 1e-8);
}

TEST(Absorption, InfeasibleCouplingThrows)
{
    AbsorbSetup a(2, 0.5);
    try {
        solve_absorption(a.cfg, a.xi, absorption_window(a.spec));
        FAIL() << "expected infeasible control";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::infeasible_control);
    }
}

TEST(Absorption, GlobalPhaseOnlyRotatesControl)
{
    for (int k : {2, 3}) {
        AbsorbSetup a(k, k == 2 ? 6.0 : 30.0);
        WavePacket rotated = a.xi;
        for (auto &z : rotated.amp) {
            z *= std::polar(1.0, 0.7);
        }
        const ControlSchedule s0 = solve_absorption(a.cfg, a.xi, absorption_window(a.spec));
        const ControlSchedule s1 = solve_absorption(a.cfg, rotated, absorption_window(a.spec));
        for (std::size_t n = 0; n < s0.size(); ++n) {
            ASSERT_NEAR(std::abs(s0.lambda[n]), std::abs(s1.lambda[n]), 1e-10);
        }
        EXPECT_NEAR(final_pb(a.cfg, s0, a.xi), final_pb(a.cfg, s1, rotated), 1e-10);
    }
}

TEST(Emission, Chi3ShapeFidelity)
{
    CavityConfig cfg;
    cfg.order = Order::chi3;
    cfg.gamma = 30.0 * omega_g;
    const TimeGrid g = make_grid(10.0, 0.01);
    const GaussianSpec out{5.0, 1.0};
    const WavePacket target = gaussian_packet(g, out);
    const Window w{1.0, 9.0};
    const ControlSchedule s = solve_emission(cfg, {target, 1.0}, w);
    CavityState init;
    init.vacuum = 0.0;
    init.one = {0.0, 1.0};
    const auto r = propagate(cfg, s, WavePacket(g), 0, init);
    EXPECT_GE(std::norm(overlap(target, r.one_out)), 0.999);
}

TEST(Emission, EtaAboveLossLimitThrows)
{
    CavityConfig cfg;
    cfg.gamma = 6.0 * omega_g;
    cfg.gamma_loss = 1e-2 * omega_g;
    const TimeGrid g = make_grid(10.0, 0.01);
    const WavePacket target = gaussian_packet(g, GaussianSpec{5.0, 1.0});
    const Window w{1.0, 9.0};
    const double eta_max = max_feasible_eta(cfg, target, w);
    EXPECT_LT(eta_max, 1.0);
    EXPECT_THROW(solve_emission(cfg, {target, std::min(1.0, eta_max * 1.01)}, w), InfeasibleEta);
    EXPECT_NO_THROW(solve_emission(cfg, {target, 0.9 * eta_max}, w));
}

TEST(Spectrum, ZeroAndConstantControls)
{
    const TimeGrid g = make_grid(8.0, 0.01);
    ControlSchedule zero(g);
    for (auto z : schedule_spectrum(zero).value) {
        ASSERT_EQ(z, cplx(0.0, 0.0));
    }
    ControlSchedule flat(g);
    for (auto &z : flat.lambda) {
        z = 1.0;
    }
    const Spectrum s = schedule_spectrum(flat);
    EXPECT_NEAR(s.centroid(), 0.0, 1e-9);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < s.value.size(); ++i) {
        if (std::abs(s.value[i]) > std::abs(s.value[peak])) {
            peak = i;
        }
    }
    EXPECT_DOUBLE_EQ(s.omega[peak], 0.0);
}

TEST(Spectrum, CrossPhaseShiftsChi3Control)
{
    AbsorbSetup a2(2, 30.0), a3(3, 30.0);
    const auto s2 = schedule_spectrum(solve_absorption(a2.cfg, a2.xi, absorption_window(a2.spec)), omega_g);
    const auto s3 = schedule_spectrum(solve_absorption(a3.cfg, a3.xi, absorption_window(a3.spec)), omega_g);
    EXPECT_GT(std::abs(s3.centroid()), std::abs(s2.centroid()) + 1.0);
}
