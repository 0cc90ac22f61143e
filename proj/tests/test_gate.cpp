#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cpgate/calibration.hpp"
#include "cpgate/gate.hpp"

using namespace cpgate;

namespace {

const double omega_g = 4.0 * std::numbers::ln2;

GateSpec spec_for(int k, double t_store, double loss_ratio = 0.0)
{
    GateSpec s;
    s.cavity.order = order_from_int(k);
    s.cavity.gamma = (k == 2 ? 6.0 : 30.0) * omega_g;
    s.cavity.gamma_loss = loss_ratio * omega_g;
    s.t_store = t_store;
    return s;
}

} // namespace

TEST(Gate, LayoutRejectsShortOrOffGridDelays)
{
    EXPECT_THROW(make_layout(spec_for(2, 7.0)), Error);
    EXPECT_THROW(make_layout(spec_for(2, 10.005)), Error);
    const GateLayout L = make_layout(spec_for(2, 14.4));
    EXPECT_NEAR(L.ideal_out.norm(), 1.0, 1e-12);
    EXPECT_GE(L.emit.t_start, L.absorb.t_stop - 1e-12);
}

TEST(Gate, AbsorbThenEmitReproducesInput)
{
    for (int k : {2, 3}) {
        const GateOutcome o = run_gate(spec_for(k, 14.4), false);
        EXPECT_GE(o.report.F1, 0.998) << "k=" << k;
        EXPECT_NEAR(o.report.phase_1, 0.0, 1e-9) << "k=" << k;
    }
}

TEST(Gate, LinearCavityFactorizes)
{
    for (int k : {2, 3}) {
        const GateOutcome o = run_gate(spec_for(k, 10.0), true);
        EXPECT_NEAR(o.report.F11, o.report.F1 * o.report.F1, 1e-6) << "k=" << k;
        EXPECT_NEAR(wrap_phase(o.report.phase_11 - 2.0 * o.report.phase_1), 0.0, 1e-6) << "k=" << k;
    }
}

TEST(Gate, CalibratedChi2SatisfiesPhaseCondition)
{
    GateSpec s = spec_for(2, 10.0);
    const GateSchedule G = build_gate_schedule(s);
    const CalibrationResult cal = calibrate_chi(s.cavity, G, s.t_store);
    s.cavity.chi = cal.chi;
    const GateOutcome o = run_gate(s.cavity, G, true);
    EXPECT_LT(std::abs(phase_condition(o.report)), 1e-3);
    EXPECT_NEAR(cal.chi / cal.seed, 1.0, 0.1);
    EXPECT_GT(o.report.F11, 0.99);
}

TEST(Gate, EtaPolicies)
{
    GateSpec s = spec_for(2, 10.0, 1e-3);
    const GateSchedule top = build_gate_schedule(s);
    EXPECT_LT(top.eta_max, 1.0);
    EXPECT_DOUBLE_EQ(top.eta, top.eta_max);

    s.eta_policy = EtaPolicy::fixed;
    s.eta = std::min(1.0, 1.01 * top.eta_max);
    EXPECT_THROW(build_gate_schedule(s), InfeasibleEta);

    s.eta_policy = EtaPolicy::optimize;
    const GateSchedule best = build_gate_schedule(s);
    const double f_top = run_gate(s.cavity, top, false).report.F1;
    const double f_best = run_gate(s.cavity, best, false).report.F1;
    EXPECT_GE(f_best, f_top - 1e-12);
    // Conditional fidelity does not care about the overall scale.
    EXPECT_NEAR(run_gate(s.cavity, best, false).report.F1_cond, run_gate(s.cavity, top, false).report.F1_cond,
                1e-3);
}
