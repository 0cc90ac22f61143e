#pragma once

// Synthesis of the a-b coupling schedule that absorbs a given single-photon
// wave packet into mode b, or emits a target wave packet from mode b.
//
// Both problems are solved bin by bin against the same RK4 bin map used by
// the propagator: for each bin the complex coupling Lambda_n is chosen so that
// the mode-a amplitude at the end of the bin equals its impedance-matched
// target (xi_in / sqrt(gamma) for absorption, -sqrt(eta) xi_target / sqrt(gamma)
// for emission). For chi3 the detunings kappa*|Lambda_n| enter the same bin
// map, so the XPM compensation is solved self-consistently.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include <fftw3.h>

#include "cpgate/bin_step.hpp"
#include "cpgate/cavity.hpp"
#include "cpgate/errors.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

struct Window {
    double t_start = 0.0;
    double t_stop = 0.0;
};

inline Window absorption_window(const GaussianSpec &spec)
{
    return {spec.center - 4.0 * spec.fwhm, spec.center + 4.0 * spec.fwhm};
}

inline Window emission_window(const GaussianSpec &spec, double delay)
{
    return {spec.center + delay - 4.0 * spec.fwhm, spec.center + delay + 4.0 * spec.fwhm};
}

struct EmissionTarget {
    WavePacket packet; // normalized output shape, already placed in time
    double eta = 1.0;
};

struct SynthesisOptions {
    StepOptions step;
    // |Lambda| dt is never allowed above this.
    double max_lambda_dt = 1.0;
    int max_iterations = 50;
    // Below this |psi_b|^2 the bin is treated with the small-signal start-up rule.
    double startup_population = 1e-12;
    // Largest |Lambda| dt used for that start-up transfer.
    double startup_kick = 0.05;
    // Relative weight of the phase error in bins that cannot be matched exactly.
    double phase_weight = 0.05;
    // Emission: smallest unemitted remainder that is sized explicitly.
    double remainder_tolerance = 1e-4;
    // Postcondition for the strict solvers.
    double max_reflection = 1e-4;
};

// Schedule plus the synthesizer's own trajectory at the grid points.
struct Synthesis {
    ControlSchedule schedule;
    std::vector<cplx> psi_a;
    std::vector<cplx> psi_b;
    double reflected = 0.0; // sum |xi_out|^2 dt inside the window (absorption)
    double residual_b = 0.0; // |psi_b|^2 left at the end of the window (emission)
    std::size_t unmatched_bins = 0;
};

namespace detail {

struct BinSolve {
    cplx lambda;
    double error;
};

// Chooses Lambda for one bin so that psi_a(t + dt) hits `target`.
// Levenberg-Marquardt on (Re, Im) of Lambda*dt; finite-difference Jacobian.
inline BinSolve track_bin(const CavityConfig &cfg, const WavePacket *xi, double t, double dt,
                          const Vec2 &psi, cplx weight, cplx target, cplx guess,
                          const SynthesisOptions &opt)
{
    // Residual split into components parallel and perpendicular to the
    // target; the perpendicular (phase) part is down-weighted so that bins
    // which cannot be fully matched still transfer the right population.
    const double tabs = std::abs(target);
    const cplx dir = tabs > 0.0 ? target / tabs : cplx{1.0, 0.0};
    auto eval = [&](cplx y) {
        const BinControl bc = control_for(cfg, y / dt);
        const cplx d = (step_one_photon(cfg, bc, xi, t, dt, psi, weight, opt.step)[0] - target) * std::conj(dir);
        return cplx{d.real(), opt.phase_weight * d.imag()};
    };
    auto clamp = [&](cplx y) {
        const double a = std::abs(y);
        return a > opt.max_lambda_dt ? y * (opt.max_lambda_dt / a) : y;
    };

    const cplx r_free = eval(0.0);
    const double scale = std::max({std::abs(target), std::abs(psi[0]), std::abs(psi[1]), 1e-300});
    const double tol = 1e-14 * scale;

    cplx y = clamp(guess * dt);
    if (std::norm(psi[1]) < opt.startup_population) {
        // Mode b is (nearly) empty: the coupling acts on psi_a only at second
        // order. Size the first transfer from the probability excess.
        const double free_abs = std::abs(step_one_photon(cfg, BinControl{}, xi, t, dt, psi, weight, opt.step)[0]);
        const double excess = free_abs * free_abs - std::norm(target);
        if (excess <= 0.0 || std::abs(psi[0]) == 0.0) {
            return {0.0, std::abs(r_free)};
        }
        // Keep the kick small so the XPM phase it imprints stays small; the
        // next bin then has a first-order handle on psi_a.
        const double mag = std::min(std::sqrt(excess) / std::abs(psi[0]), opt.startup_kick);
        return {cplx{0.0, mag} / dt, std::abs(eval(cplx{0.0, mag}))};
    }

    const double kap = cfg.xpm();
    if (kap > 0.0 && std::norm(psi[1]) <= kap * kap * std::norm(target) && std::abs(psi[0]) > 0.0) {
        // XPM-limited: no coupling can hold psi_a on target. Transfer the
        // probability excess into b along the growth direction of psi_b and
        // keep the imprinted phase per bin small.
        const double free_abs = std::abs(step_one_photon(cfg, BinControl{}, xi, t, dt, psi, weight, opt.step)[0]);
        // A shortfall in a is left alone: pulling population back out of b
        // under strong XPM detunes both modes and stalls the transfer.
        const double excess = free_abs * free_abs - std::norm(target);
        const double cap = 4.0 * opt.startup_kick / kap;
        const double mag = std::clamp(excess / (2.0 * std::abs(psi[0]) * std::abs(psi[1])), 0.0, cap);
        const cplx yy = cplx{0.0, mag} * std::polar(1.0, std::arg(psi[1]) - std::arg(psi[0]));
        return {yy / dt, std::abs(eval(yy))};
    }

    cplx r = eval(y);
    if (std::abs(r_free) <= std::abs(r)) {
        y = 0.0;
        r = r_free;
    }
    double cost = std::norm(r);
    double mu = 1e-3;
    for (int it = 0; it < opt.max_iterations && std::sqrt(cost) > tol; ++it) {
        const double eps = 1e-7 * std::max(std::abs(y), 1e-4);
        const cplx jr = (eval(y + eps) - r) / eps;
        const cplx ji = (eval(y + cplx{0.0, eps}) - r) / eps;
        // Normal equations for the 2x2 real system J dx = -r.
        const double a11 = std::norm(jr), a22 = std::norm(ji);
        const double a12 = (std::conj(jr) * ji).real();
        const double b1 = -(std::conj(jr) * r).real(), b2 = -(std::conj(ji) * r).real();
        bool accepted = false;
        for (int k = 0; k < 12 && !accepted; ++k) {
            const double d1 = a11 * (1.0 + mu), d2 = a22 * (1.0 + mu);
            const double det = d1 * d2 - a12 * a12;
            if (!(std::abs(det) > 0.0)) {
                mu *= 10.0;
                continue;
            }
            const double x1 = (b1 * d2 - a12 * b2) / det, x2 = (d1 * b2 - a12 * b1) / det;
            const cplx ytry = clamp(y + cplx{x1, x2});
            const cplx rtry = eval(ytry);
            if (std::norm(rtry) < cost) {
                const double step = std::abs(ytry - y);
                y = ytry;
                r = rtry;
                cost = std::norm(r);
                mu = std::max(mu * 0.1, 1e-12);
                accepted = true;
                if (step < 1e-15 * std::max(std::abs(y), 1e-6)) {
                    return {y / dt, std::sqrt(cost)};
                }
            } else {
                mu *= 10.0;
            }
        }
        if (!accepted) {
            break;
        }
    }
    return {y / dt, std::sqrt(cost)};
}

inline std::size_t first_bin_at_or_after(const TimeGrid &g, double t)
{
    const double x = std::ceil((t - g.t0) / g.dt - 1e-9);
    return static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(g.n_bins)));
}

} // namespace detail

namespace detail {

// Absorption over bins [n0, n1) starting from `psi`. No parameter validation,
// so the time-reversed emission problem can run with gain (negative loss).
inline Synthesis absorb_bins(const CavityConfig &cfg, const WavePacket &input, std::size_t n0, std::size_t n1,
                             Vec2 psi, const SynthesisOptions &opt)
{
    const TimeGrid &g = input.grid;
    const double sg = std::sqrt(cfg.gamma);

    Synthesis out;
    out.schedule = ControlSchedule(g);
    out.psi_a.assign(g.n_bins, 0.0);
    out.psi_b.assign(g.n_bins, 0.0);

    cplx guess = 0.0;
    for (std::size_t n = 0; n + 1 < g.n_bins; ++n) {
        out.psi_a[n] = psi[0];
        out.psi_b[n] = psi[1];
        if (n >= n0 && n < n1) {
            out.reflected += std::norm(input[n] - sg * psi[0]) * g.dt;
        }
        const double t = g.time(n);
        BinControl bc;
        if (n >= n0 && n < n1) {
            const cplx target = input[n + 1] / sg;
            const auto s = track_bin(cfg, &input, t, g.dt, psi, 1.0, target, guess, opt);
            bc = control_for(cfg, s.lambda);
            guess = s.lambda;
            if (s.error > 1e-9 * std::max(std::abs(target), 1e-12)) {
                ++out.unmatched_bins;
            }
        }
        out.schedule.set(n, bc);
        psi = step_one_photon(cfg, bc, &input, t, g.dt, psi, 1.0, opt.step);
    }
    out.psi_a.back() = psi[0];
    out.psi_b.back() = psi[1];
    return out;
}

} // namespace detail

// Bin-by-bin impedance-matched absorption; never throws on poor matching.
inline Synthesis synthesize_absorption(const CavityConfig &cfg, const WavePacket &input, const Window &w,
                                       const SynthesisOptions &opt = {})
{
    cfg.validate();
    const TimeGrid &g = input.grid;
    require(w.t_stop > w.t_start, "empty synthesis window");
    const std::size_t n0 = detail::first_bin_at_or_after(g, w.t_start);
    const std::size_t n1 = std::min(detail::first_bin_at_or_after(g, w.t_stop), g.n_bins - 1);
    return detail::absorb_bins(cfg, input, n0, n1, Vec2{}, opt);
}

// Strict absorption solver: checks impedance-matching feasibility and the
// reflection postcondition.
inline ControlSchedule solve_absorption(const CavityConfig &cfg, const WavePacket &input, const Window &w,
                                        const SynthesisOptions &opt = {})
{
    double peak = 0.0;
    for (auto z : input.amp) {
        peak = std::max(peak, std::norm(z));
    }
    if (peak > cfg.gamma) {
        fail(ErrorKind::infeasible_control,
             "impedance matching needs |psi_a|^2 = |xi|^2/gamma = " + std::to_string(peak / cfg.gamma) + " > 1");
    }
    Synthesis s = synthesize_absorption(cfg, input, w, opt);
    if (s.reflected > opt.max_reflection) {
        fail(ErrorKind::infeasible_control,
             "reflected probability " + std::to_string(s.reflected) + " exceeds " +
                 std::to_string(opt.max_reflection) + " (" + std::to_string(s.unmatched_bins) +
                 " bins could not be impedance matched; increase gamma)");
    }
    return std::move(s.schedule);
}

// Largest emission efficiency compatible with loss while emitting `shape`
// from one photon in mode b placed at the window start.
inline double max_feasible_eta(const CavityConfig &cfg, const WavePacket &shape, const Window &w)
{
    const TimeGrid &g = shape.grid;
    const std::size_t n0 = detail::first_bin_at_or_after(g, w.t_start);
    const std::size_t n1 = std::min(detail::first_bin_at_or_after(g, w.t_stop), g.n_bins - 1);
    const double ts = g.time(n0);
    double denom = 0.0;
    for (std::size_t n = n0; n <= n1; ++n) {
        denom += std::exp(cfg.gamma_loss * (g.time(n) - ts)) * std::norm(shape[n]) * g.dt;
    }
    require(denom > 0.0, "emission target has no weight inside the window");
    return 1.0 / denom;
}

// Emits sqrt(eta) * target from one photon in mode b at the window start.
//
// Emission is solved as the time mirror of absorption: with t -> -t and
// psi -> conj(psi), emitting xi(t) is the same problem as absorbing
// -conj(xi(-t)) with Lambda -> conj(Lambda) and loss turned into gain. For
// eta below the loss limit the mirrored absorption starts with `rho` in mode
// b (the unemitted remainder), sized by a secant search so that the emission
// starts from exactly one photon.
inline Synthesis synthesize_emission(const CavityConfig &cfg, const EmissionTarget &target, const Window &w,
                                     const SynthesisOptions &opt = {})
{
    cfg.validate();
    const TimeGrid &g = target.packet.grid;
    require(target.eta > 0.0 && target.eta <= 1.0, "eta must lie in (0, 1]");
    require(w.t_stop > w.t_start, "empty synthesis window");
    const std::size_t n0 = detail::first_bin_at_or_after(g, w.t_start);
    const std::size_t n1 = std::min(detail::first_bin_at_or_after(g, w.t_stop), g.n_bins - 1);
    require(n1 > n0, "synthesis window shorter than one bin");
    const std::size_t m = n1 - n0;
    const double amp = std::sqrt(target.eta);

    CavityConfig mirror = cfg;
    mirror.gamma_loss = -cfg.gamma_loss;
    WavePacket rev(TimeGrid{g.dt, m + 1, 0.0});
    for (std::size_t j = 0; j <= m; ++j) {
        rev[j] = -amp * std::conj(target.packet[n1 - j]);
    }

    auto run = [&](double rho) { return detail::absorb_bins(mirror, rev, 0, m, Vec2{0.0, rho}, opt); };
    auto end_pop = [](const Synthesis &s) { return std::norm(s.psi_a.back()) + std::norm(s.psi_b.back()); };

    Synthesis back = run(0.0);
    double x0 = 0.0, f0 = end_pop(back) - 1.0, rho = 0.0;
    // Shortfalls below the bin discretization error are absorbed by the
    // rescaling below instead of a remainder in b.
    if (f0 < -opt.remainder_tolerance) {
        // |psi(end)|^2 is close to linear in rho^2.
        const double growth = std::exp(cfg.gamma_loss * g.dt * static_cast<double>(m));
        double x1 = -f0 / growth;
        for (int it = 0; it < 12; ++it) {
            rho = std::sqrt(x1);
            back = run(rho);
            const double f1 = end_pop(back) - 1.0;
            if (std::abs(f1) < 1e-12 || f1 == f0) {
                break;
            }
            const double x2 = std::max(x1 - f1 * (x1 - x0) / (f1 - f0), 0.0);
            x0 = x1;
            f0 = f1;
            x1 = x2;
        }
    }

    // The source-free emission dynamics are linear, so the trajectory may be
    // rescaled to start from one photon; rotating Lambda rotates psi_b so that
    // the photon starts with a real amplitude.
    const double scale = 1.0 / std::sqrt(end_pop(back));
    const cplx beta = std::conj(back.psi_b.back());
    const cplx ph = std::abs(beta) > 0.0 ? std::conj(beta) / std::abs(beta) : cplx{1.0, 0.0};

    Synthesis out;
    out.schedule = ControlSchedule(g);
    out.psi_a.assign(g.n_bins, 0.0);
    out.psi_b.assign(g.n_bins, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        out.schedule.set(n1 - 1 - j, control_for(cfg, std::conj(back.schedule.lambda[j]) * ph));
    }
    for (std::size_t j = 0; j <= m; ++j) {
        out.psi_a[n1 - j] = std::conj(back.psi_a[j]) * scale;
        out.psi_b[n1 - j] = std::conj(back.psi_b[j]) * scale * ph;
    }
    out.residual_b = std::norm(rho * scale);
    out.unmatched_bins = back.unmatched_bins;
    return out;
}

inline ControlSchedule solve_emission(const CavityConfig &cfg, const EmissionTarget &target, const Window &w,
                                      const SynthesisOptions &opt = {})
{
    const double eta_max = max_feasible_eta(cfg, target.packet, w);
    if (target.eta > eta_max * (1.0 + 1e-12)) {
        throw InfeasibleEta(target.eta, eta_max);
    }
    return synthesize_emission(cfg, target, w, opt).schedule;
}

struct Spectrum {
    std::vector<double> omega; // ascending angular frequency
    std::vector<cplx> value;

    double centroid() const
    {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < omega.size(); ++i) {
            const double p = std::norm(value[i]);
            num += omega[i] * p;
            den += p;
        }
        return den > 0.0 ? num / den : 0.0;
    }

    // Root-mean-square width about the centroid.
    double rms_width() const
    {
        const double c = centroid();
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < omega.size(); ++i) {
            const double p = std::norm(value[i]);
            num += (omega[i] - c) * (omega[i] - c) * p;
            den += p;
        }
        return den > 0.0 ? std::sqrt(num / den) : 0.0;
    }
};

// S(omega) = sum_n f_n exp(-i omega t_n) dt, zero padded by `pad`, frequency
// axis divided by `omega_unit`.
inline Spectrum fourier_spectrum(std::span<const cplx> f, const TimeGrid &g, std::size_t pad = 4,
                                 double omega_unit = 1.0)
{
    std::size_t m = 1;
    while (m < f.size() * std::max<std::size_t>(pad, 1)) {
        m <<= 1;
    }
    std::vector<cplx> buf(m, 0.0);
    std::copy(f.begin(), f.end(), buf.begin());
    auto *data = reinterpret_cast<fftw_complex *>(buf.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(m), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    Spectrum s;
    s.omega.resize(m);
    s.value.resize(m);
    const double dw = 2.0 * std::numbers::pi / (static_cast<double>(m) * g.dt);
    for (std::size_t i = 0; i < m; ++i) {
        // fftshift so that omega ascends from -pi/dt.
        const std::size_t k = (i + m / 2) % m;
        const double w = (static_cast<double>(k) - (k >= m / 2 ? static_cast<double>(m) : 0.0)) * dw;
        s.omega[i] = w / omega_unit;
        s.value[i] = buf[k] * g.dt * std::polar(1.0, -w * g.t0);
    }
    return s;
}

inline Spectrum schedule_spectrum(const ControlSchedule &s, double omega_unit = 1.0, std::size_t pad = 4)
{
    return fourier_spectrum(s.lambda, s.grid, pad, omega_unit);
}

} // namespace cpgate
