#pragma once

// Absorb, store, emit: the full controlled-phase gate on one cavity.
//
// Layout on a grid starting at t = 0:
//   input packet centred at T_in = 4 tau + pad, absorbed over [T_in - 4 tau, T_in + 4 tau];
//   idle (Lambda = 0) until the emission window, centred at T_in + T;
//   grid ends at T_in + T + 4 tau + pad.
// T is the delay between input and output centres, so the idle interval
// between the two windows is T - 8 tau.

#include <cmath>
#include <complex>
#include <numbers>
#include <cstdint>
#include <optional>

#include <boost/math/tools/minima.hpp>

#include "cpgate/bin_step.hpp"
#include "cpgate/cavity.hpp"
#include "cpgate/control.hpp"
#include "cpgate/dynamics.hpp"
#include "cpgate/errors.hpp"
#include "cpgate/metrics.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

enum class EtaPolicy {
    maximum,  // largest loss-feasible efficiency
    fixed,    // GateSpec::eta, InfeasibleEta if above the maximum
    optimize, // golden-section search for the largest F1
};

struct GateSpec {
    CavityConfig cavity;
    double fwhm = 1.0;    // tau_G
    double t_store = 0.0; // input-to-output delay T
    double dt = 0.01;
    double pad = 0.5; // grid margin beyond each window, in units of fwhm
    EtaPolicy eta_policy = EtaPolicy::maximum;
    double eta = 1.0;
    bool zero_phase = true; // rotate the emission coupling so that phase_1 = 0
    SynthesisOptions synthesis;
};

struct GateLayout {
    TimeGrid grid;
    GaussianSpec input;
    Window absorb;
    Window emit;
    WavePacket xi_in;
    WavePacket ideal_out; // xi_in delayed by T
};

inline GateLayout make_layout(const GateSpec &spec)
{
    require(spec.fwhm > 0.0, "packet FWHM must be positive");
    require(spec.dt > 0.0, "time step must be positive");
    require(spec.pad >= 0.0, "pad must be non-negative");
    require(spec.t_store >= 8.0 * spec.fwhm * (1.0 - 1e-12),
            "storage delay must be at least 8 FWHM so that absorption and emission windows do not overlap");
    const double bins_T = spec.t_store / spec.dt;
    require(std::abs(bins_T - std::round(bins_T)) < 1e-6, "storage delay must be a multiple of dt");
    GateLayout L;
    const double margin = (4.0 + spec.pad) * spec.fwhm;
    // Place T_in on a grid point.
    const double t_in = std::ceil(margin / spec.dt - 1e-9) * spec.dt;
    L.input = GaussianSpec{t_in, spec.fwhm};
    L.grid = make_grid(t_in + spec.t_store + margin + spec.dt, spec.dt);
    L.absorb = absorption_window(L.input);
    L.emit = emission_window(L.input, spec.t_store);
    L.xi_in = gaussian_packet(L.grid, L.input);
    L.ideal_out = shift(L.xi_in, spec.t_store);
    return L;
}

struct GateSchedule {
    GateLayout layout;
    ControlSchedule schedule;
    double eta = 1.0;
    double eta_max = 1.0;
    double reflected = 0.0;  // absorption synthesis, sampled
    double residual_b = 0.0; // emission synthesis remainder
    double theta = 0.0;      // rotation applied to the emission coupling
};

namespace detail {

inline ControlSchedule compose(const GateLayout &L, const ControlSchedule &absorb, const ControlSchedule &emit)
{
    ControlSchedule s(L.grid);
    const std::size_t e0 = first_bin_at_or_after(L.grid, L.emit.t_start);
    overlay(s, absorb, 0, e0);
    overlay(s, emit, e0, L.grid.n_bins);
    return s;
}

inline void rotate_range(ControlSchedule &s, std::size_t from, std::size_t to, double theta)
{
    const cplx ph = std::polar(1.0, theta);
    for (std::size_t n = from; n < to && n < s.size(); ++n) {
        s.lambda[n] *= ph;
    }
}

inline PropagateOptions one_photon_options(const GateLayout &L)
{
    PropagateOptions o;
    o.reference = &L.ideal_out;
    o.traces = false;
    return o;
}

} // namespace detail

// Synthesizes absorption and emission for the gate. The coupling schedule
// depends only on the linear cavity parameters, so it can be reused for any
// chi.
inline GateSchedule build_gate_schedule(const GateSpec &spec)
{
    spec.cavity.validate();
    GateSchedule G;
    G.layout = make_layout(spec);
    const GateLayout &L = G.layout;

    const Synthesis ab = synthesize_absorption(spec.cavity, L.xi_in, L.absorb, spec.synthesis);
    G.reflected = ab.reflected;

    G.eta_max = std::min(1.0, max_feasible_eta(spec.cavity, L.ideal_out, L.emit));
    auto emission = [&](double eta) { return synthesize_emission(spec.cavity, {L.ideal_out, eta}, L.emit, spec.synthesis); };
    auto one_photon_F = [&](const Synthesis &em) {
        const auto r = propagate(spec.cavity, detail::compose(L, ab.schedule, em.schedule), L.xi_in, 1, {},
                                 detail::one_photon_options(L));
        return std::norm(r.one_overlap);
    };

    Synthesis em;
    switch (spec.eta_policy) {
    case EtaPolicy::maximum:
        G.eta = G.eta_max;
        em = emission(G.eta);
        break;
    case EtaPolicy::fixed:
        if (spec.eta > G.eta_max * (1.0 + 1e-12)) {
            throw InfeasibleEta(spec.eta, G.eta_max);
        }
        G.eta = spec.eta;
        em = emission(G.eta);
        break;
    case EtaPolicy::optimize: {
        // Brent search on [eta_max / 2, eta_max] for the largest F1.
        std::uintmax_t iters = 30;
        const auto best = boost::math::tools::brent_find_minima(
            [&](double eta) { return -one_photon_F(emission(eta)); }, 0.5 * G.eta_max, G.eta_max, 20, iters);
        G.eta = best.first;
        Synthesis top = emission(G.eta_max);
        em = emission(G.eta);
        if (one_photon_F(top) >= one_photon_F(em)) {
            G.eta = G.eta_max;
            em = std::move(top);
        }
        break;
    }
    }
    G.residual_b = em.residual_b;
    G.schedule = detail::compose(L, ab.schedule, em.schedule);

    if (spec.zero_phase) {
        const auto r = propagate(spec.cavity, G.schedule, L.xi_in, 1, {}, detail::one_photon_options(L));
        // Rotating the emission coupling by theta multiplies the emitted
        // field by exp(-i theta).
        G.theta = std::arg(r.one_overlap);
        const std::size_t e0 = detail::first_bin_at_or_after(L.grid, L.emit.t_start);
        detail::rotate_range(G.schedule, e0, L.grid.n_bins, G.theta);
    }
    return G;
}

struct GateRunOptions {
    bool traces = false;
    bool two_photon_records = false; // sampled two-photon output, O(N^2) work
    bool store_two_photon = false;
    StepOptions step;
};

struct GateOutcome {
    PropagationResult one;
    std::optional<PropagationResult> two;
    FidelityReport report;
};

// Propagates one and (optionally) two photons through a prepared schedule.
// Conditional fidelities divide by the zero-loss branch norm: everything
// emitted into the waveguide plus what is still inside the cavity.
// `cavity` may differ from the one used for synthesis in its nonlinearity.
inline GateOutcome run_gate(const CavityConfig &cavity, const GateSchedule &G, bool two_photons,
                            const GateRunOptions &opt = {})
{
    const GateLayout &L = G.layout;
    PropagateOptions po;
    po.reference = &L.ideal_out;
    po.traces = opt.traces;
    po.step = opt.step;
    GateOutcome out;
    out.one = propagate(cavity, G.schedule, L.xi_in, 1, {}, po);
    const StateFidelity f1 = state_fidelity(out.one.one_overlap, one_photon_budget(out.one));
    StateFidelity f2;
    if (two_photons) {
        po.two_photon_records = opt.two_photon_records || opt.store_two_photon || opt.traces;
        po.store_two_photon = opt.store_two_photon;
        out.two = propagate(cavity, G.schedule, L.xi_in, 2, {}, po);
        f2 = state_fidelity(out.two->two_overlap, two_photon_budget(*out.two));
    }
    out.report = make_report(f1, f2);
    return out;
}

// One-photon fidelity of the full gate for a given spec.
inline GateOutcome run_gate(const GateSpec &spec, bool two_photons, const GateRunOptions &opt = {})
{
    const GateSchedule G = build_gate_schedule(spec);
    return run_gate(spec.cavity, G, two_photons, opt);
}

// Full symmetric record from a propagation with stored two-photon output.
inline TwoPhotonRecord to_record(const PropagationResult &r)
{
    TwoPhotonRecord rec(r.grid);
    const std::size_t N = r.grid.n_bins;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t m = 0; m <= n; ++m) {
            const cplx z = r.two(m, n);
            rec(m, n) = z;
            rec(n, m) = z;
        }
    }
    return rec;
}

} // namespace cpgate
