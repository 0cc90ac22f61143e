#pragma once

// Sector propagator for at most two excitations.
//
// The state is split by the number r of input photons still to arrive and
// by how many photons have already left through the waveguide:
//
//   r = 2:  alpha2                      vacuum cavity
//   r = 1:  alpha1, psi1, chi1(s)       vacuum / one cavity photon / one out at s
//   r = 0:  psi0, Q, chi0(s), phi(s),   one / two cavity photons / one out,
//           Xi(s, t)                    one out plus one inside / two out
//
// Emitted records are frozen once written; only phi(s) keeps evolving (the
// photon still inside may leave later), through the same per-bin affine map
// as psi0. A two-photon run costs O(N) per bin and O(N^2) in total.

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <ostream>
#include <vector>

#include "cpgate/bin_step.hpp"
#include "cpgate/cavity.hpp"
#include "cpgate/errors.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

// Cavity state at the first grid point.
struct CavityState {
    cplx vacuum{1.0, 0.0};
    Vec2 one{}; // {a, b}
    Vec4 two{}; // {aa, ab, bb, c}
};

struct PropagateOptions {
    StepOptions step;
    // Sample the two-photon output on the grid (O(N^2) work). Without it only
    // the projections onto the reference are computed, in O(N).
    bool two_photon_records = true;
    // Keep the sampled two-photon triangle (N(N+1)/2 amplitudes).
    bool store_two_photon = false;
    // Record population traces at every grid point.
    bool traces = true;
    // Packet g for the overlaps <g|out> and <g g|out>; same grid as the input.
    const WavePacket *reference = nullptr;
};

struct Traces {
    std::vector<double> t, p_a, p_b, p_c, norm;
};

// Output records. For two photons R(s, t) = Xi(s, t) / sqrt(2) so that a
// separable output g(s) g(t) is stored as exactly g(s) g(t).
struct PropagationResult {
    TimeGrid grid;
    int photons = 0;
    WavePacket one_out;           // chi0: one photon out, cavity empty
    std::vector<cplx> two_out;    // R(m, n), m <= n, row-major triangle (optional)
    cplx one_overlap{0.0, 0.0};   // <g|out>, integrated within bins
    cplx two_overlap{0.0, 0.0};   // <g g|out>, integrated within bins
    double one_norm = 0.0;        // sum |chi0|^2 dt over the samples
    double two_norm = 0.0;        // sum_m sum_n |R_mn|^2 dt^2 over the samples
    double emitted_exact = 0.0;   // bin-integrated flux of the chi0 channel
    double two_emitted_exact = 0.0; // bin-integrated two-photon output probability
    CavityState final_cavity;     // r = 0 cavity amplitudes at the end
    double leftover = 0.0;        // probability still inside the cavity at the end
    Traces traces;

    std::size_t tri_index(std::size_t m, std::size_t n) const { return n * (n + 1) / 2 + m; }

    cplx two(std::size_t m, std::size_t n) const
    {
        require(!two_out.empty(), "two-photon records were not stored");
        return m <= n ? two_out[tri_index(m, n)] : two_out[tri_index(n, m)];
    }
};

namespace detail {

inline double norm2(const Vec2 &v) { return std::norm(v[0]) + std::norm(v[1]); }

inline double norm4(const Vec4 &q)
{
    return std::norm(q[0]) + std::norm(q[1]) + std::norm(q[2]) + std::norm(q[3]);
}

} // namespace detail

// Propagates `photons` (0, 1 or 2) input photons in the packet `input` through
// the cavity driven by `schedule`. With input photons the cavity must start
// with at most 2 - photons excitations; c counts as two.
inline PropagationResult propagate(const CavityConfig &cfg, const ControlSchedule &schedule, const WavePacket &input,
                                   int photons, const CavityState &init = {}, const PropagateOptions &opt = {})
{
    cfg.validate();
    require(photons >= 0 && photons <= 2, "photon number must be 0, 1 or 2");
    require_same_grid(schedule.grid, input.grid);
    if (opt.reference) {
        require_same_grid(opt.reference->grid, input.grid);
    }
    const bool has_two = detail::norm4(init.two) > 0.0;
    const bool has_one = detail::norm2(init.one) > 0.0;
    require(photons == 0 || !has_two, "at most two excitations are supported");
    require(photons < 2 || (!has_one && !has_two), "two input photons need an empty cavity");

    const TimeGrid &g = input.grid;
    const std::size_t N = g.n_bins;
    const double dt = g.dt;
    const double sg = std::sqrt(cfg.gamma);
    const double s2 = std::numbers::sqrt2;
    const double inv_s2 = 1.0 / s2;

    // Sector amplitudes.
    cplx alpha2 = photons == 2 ? cplx{1.0, 0.0} : cplx{0.0, 0.0};
    cplx alpha1 = photons == 1 ? init.vacuum : cplx{0.0, 0.0};
    Vec2 psi1 = photons == 1 ? init.one : Vec2{};
    Vec2 psi0 = photons == 0 ? init.one : Vec2{};
    Vec4 Q = photons == 0 ? init.two : Vec4{};
    const bool two_sector = photons == 2 || (photons == 1 && has_one) || (photons == 0 && has_two);

    std::vector<cplx> chi1;
    std::vector<Vec2> phi;
    if (two_sector && opt.two_photon_records) {
        chi1.assign(N, 0.0);
        phi.assign(N, Vec2{});
    }

    PropagationResult res;
    res.grid = g;
    res.photons = photons;
    res.one_out = WavePacket(g);
    if (two_sector && opt.two_photon_records && opt.store_two_photon) {
        res.two_out.assign(N * (N + 1) / 2, 0.0);
    }
    if (opt.traces) {
        for (auto *v : {&res.traces.t, &res.traces.p_a, &res.traces.p_b, &res.traces.p_c, &res.traces.norm}) {
            v->reserve(N + 1);
        }
    }

    // Input mass of the interpolated packet, for the pending-photon weights.
    double total_mass = 0.0;
    std::vector<double> bin_mass(N, 0.0);
    if (photons > 0) {
        for (std::size_t n = 0; n + 1 < N; ++n) {
            BinInput none;
            bin_mass[n] = integrate_bin(CavityConfig{cfg.gamma, 0.0, cfg.order, 0.0, cfg.kappa_xpm}, BinControl{},
                                        &input, g.time(n), dt, none, false, opt.step)
                              .input_mass;
            total_mass += bin_mass[n];
        }
    }
    double arrived = 0.0;
    double flux_chi0 = 0.0, flux_chi1 = 0.0;
    double sum_phi = 0.0; // sum_{s < n} ||phi(s; t_n)||^2 dt
    const WavePacket *ref = opt.reference;
    const bool records = two_sector && opt.two_photon_records;
    cplx x_proj{0.0, 0.0};
    Vec2 phi_proj{};
    Vec2 y_chi1{};
    Mat2 m_phi{};

    // Record sums are left-point rules; half of the newest row is added so
    // that the intermediate norm is a trapezoid rule in the emission time.
    auto record_traces = [&](double t, double half_row) {
        if (!opt.traces) {
            return;
        }
        const double pend = total_mass > 0.0 ? std::max(0.0, 1.0 - arrived / total_mass) : 0.0;
        double pa = std::norm(psi0[0]) + std::norm(psi1[0]) * pend + 2.0 * std::norm(Q[AA]) + std::norm(Q[AB]);
        double pb = std::norm(psi0[1]) + std::norm(psi1[1]) * pend + 2.0 * std::norm(Q[BB]) + std::norm(Q[AB]);
        const double pc = std::norm(Q[CC]);
        if (records) {
            double sa = 0.0, sb = 0.0;
            for (const auto &v : phi) {
                sa += std::norm(v[0]);
                sb += std::norm(v[1]);
            }
            pa += sa * dt;
            pb += sb * dt;
        }
        const double norm = std::norm(alpha2) * pend * pend +
                            (std::norm(alpha1) + detail::norm2(psi1) + flux_chi1) * pend + detail::norm2(psi0) +
                            detail::norm4(Q) + flux_chi0 + sum_phi + res.two_norm + half_row;
        res.traces.t.push_back(t);
        res.traces.p_a.push_back(pa);
        res.traces.p_b.push_back(pb);
        res.traces.p_c.push_back(pc);
        res.traces.norm.push_back(norm);
    };

    for (std::size_t n = 0; n < N; ++n) {
        const double t = g.time(n);
        const cplx x = input[n];

        // Records at t_n; they stand for emission during [t_n, t_n + dt).
        const cplx c0 = x * alpha1 - sg * psi0[0];
        res.one_out[n] = c0;
        res.one_norm += std::norm(c0) * dt;
        double row_norm = 0.0, phi_new = 0.0;
        if (records) {
            chi1[n] = s2 * x * alpha2 - sg * psi1[0];
            const Vec2 lo = lower_a(Q);
            phi[n] = {x * psi1[0] - sg * lo[0], x * psi1[1] - sg * lo[1]};
            phi_new = detail::norm2(phi[n]) * dt;
            // Second emission at t_n after a first one at s <= n.
            const std::size_t row = n * (n + 1) / 2;
            for (std::size_t s = 0; s <= n; ++s) {
                const cplx r = (x * chi1[s] - sg * phi[s][0]) * inv_s2;
                row_norm += (s == n ? 1.0 : 2.0) * std::norm(r);
                if (!res.two_out.empty()) {
                    res.two_out[row + s] = r;
                }
            }
            row_norm *= dt * dt;
        }
        record_traces(t, 0.5 * (row_norm + phi_new));
        res.two_norm += row_norm;

        if (n + 1 == N) {
            break;
        }

        BinInput in;
        in.psi0 = psi0;
        in.alpha1 = alpha1;
        in.psi1 = psi1;
        in.alpha2 = alpha2;
        in.q2 = Q;
        in.x_proj = x_proj;
        in.phi_proj = phi_proj;
        in.k_chi1 = flux_chi1;
        in.y_chi1 = y_chi1;
        in.m_phi = m_phi;
        const BinResult r = integrate_bin(cfg, schedule.bin(n), &input, t, dt, in, two_sector, opt.step, ref);
        flux_chi0 += r.flux0;
        flux_chi1 += r.flux1;
        arrived += bin_mass[n];
        res.one_overlap += r.overlap1;
        res.two_overlap += r.overlap2;
        x_proj = r.x_proj;
        phi_proj = r.phi_proj;
        y_chi1 = r.y_chi1;
        m_phi = r.m_phi;
        res.two_emitted_exact += r.flux2;

        const Vec2 p0 = r.P * psi0;
        psi0 = {p0[0] + alpha1 * r.q[0], p0[1] + alpha1 * r.q[1]};
        if (two_sector) {
            const Vec2 p1 = r.P * psi1;
            psi1 = {p1[0] + s2 * alpha2 * r.q[0], p1[1] + s2 * alpha2 * r.q[1]};
            Q = r.q2;
        }
        if (records) {
            double acc = 0.0;
            for (std::size_t s = 0; s <= n; ++s) {
                const Vec2 v = r.P * phi[s];
                phi[s] = {v[0] + chi1[s] * r.q[0], v[1] + chi1[s] * r.q[1]};
                acc += detail::norm2(phi[s]);
            }
            sum_phi = acc * dt;
        }
    }

    res.emitted_exact = flux_chi0;
    res.final_cavity.vacuum = 0.0;
    res.final_cavity.one = psi0;
    res.final_cavity.two = Q;
    double phi_left = 0.0;
    for (const auto &v : phi) {
        phi_left += detail::norm2(v);
    }
    // One photon out, one inside: exact trace of M when available.
    const double inside = two_sector ? (m_phi[0] + m_phi[3]).real() : phi_left * dt;
    res.leftover = detail::norm2(psi0) + detail::norm4(Q) + inside;
    return res;
}

// Exactly integrated one-photon probability budget: emitted + inside.
inline double one_photon_budget(const PropagationResult &r)
{
    return r.emitted_exact + detail::norm2(r.final_cavity.one);
}

// Exactly integrated two-photon probability budget: both out + still inside.
inline double two_photon_budget(const PropagationResult &r)
{
    return r.two_emitted_exact + r.leftover;
}

inline void write_traces_csv(std::ostream &os, const Traces &tr)
{
    os << std::setprecision(17);
    os << "t,P_a,P_b,P_c,norm\n";
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        os << tr.t[i] << "," << tr.p_a[i] << "," << tr.p_b[i] << "," << tr.p_c[i] << "," << tr.norm[i] << "\n";
    }
}

// Stored triangle m <= n as rows t_m, t_n, re, im.
inline void write_two_photon_csv(std::ostream &os, const PropagationResult &r, std::size_t stride = 1)
{
    require(!r.two_out.empty(), "two-photon records were not stored");
    require(stride > 0, "stride must be positive");
    os << std::setprecision(17);
    os << "# dt=" << r.grid.dt << " N=" << r.grid.n_bins << " t0=" << r.grid.t0 << "\n";
    os << "t_m,t_n,re,im\n";
    for (std::size_t n = 0; n < r.grid.n_bins; n += stride) {
        for (std::size_t m = 0; m <= n; m += stride) {
            const cplx z = r.two(m, n);
            os << r.grid.time(m) << "," << r.grid.time(n) << "," << z.real() << "," << z.imag() << "\n";
        }
    }
}

} // namespace cpgate
