#pragma once

// Sector propagator versus the dense collision-model reference on small grids.
//
// The reference is first order in dt, so agreement is checked against
//   max |difference| <= oracle_constant * rate * dt * max |reference amplitude|
// with rate = gamma + gamma_L + 2 max|Lambda| + 2 max|delta| + sqrt2 chi2 + chi3,
// together with the first-order ratio when dt is halved.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpgate/cavity.hpp"
#include "cpgate/dynamics.hpp"
#include "cpgate/reference.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

inline constexpr double oracle_constant = 0.5;

struct OracleCase {
    std::string name;
    int order = 2;
    int photons = 1;
    double gamma = 1.0;
    double gamma_loss = 0.0;
    double chi = 0.0;
    double kappa_xpm = 2.0;
    double loss_c_factor = 1.0;
    double lambda_peak = 1.0; // Gaussian control envelope with a linear phase ramp
    std::size_t bins = 48;
    double duration = 8.0;
    CavityState init;         // used when photons == 0
};

struct OracleReport {
    std::string name;
    std::size_t bins = 0;
    double dt = 0.0;
    double rate = 0.0;
    double max_diff = 0.0;
    double max_amp = 0.0;
    double bound = 0.0;
    double F_prop = 0.0; // |<g|out>|^2 or |<gg|out>|^2 from the propagator
    double F_ref = 0.0;
    bool pass() const { return max_diff <= bound; }
};

inline void to_json(nlohmann::json &j, const OracleReport &r)
{
    j = nlohmann::json{{"name", r.name},         {"bins", r.bins},       {"dt", r.dt},
                       {"rate", r.rate},         {"max_diff", r.max_diff}, {"max_amp", r.max_amp},
                       {"bound", r.bound},       {"F_prop", r.F_prop},   {"F_ref", r.F_ref},
                       {"pass", r.pass()}};
}

namespace detail {

inline ControlSchedule oracle_schedule(const CavityConfig &cfg, const TimeGrid &g, double peak, double centre)
{
    ControlSchedule s(g);
    for (std::size_t n = 0; n < g.n_bins; ++n) {
        const double t = g.time(n) + 0.5 * g.dt;
        const double u = t - centre;
        s.set(n, control_for(cfg, peak * std::exp(-0.5 * u * u) * std::polar(1.0, 0.3 * t)));
    }
    return s;
}

} // namespace detail

inline OracleReport run_oracle_case(const OracleCase &c)
{
    require(c.bins >= 4 && c.bins <= reference_max_bins, "oracle cases need 4 to 64 bins");
    CavityConfig cfg;
    cfg.order = order_from_int(c.order);
    cfg.gamma = c.gamma;
    cfg.gamma_loss = c.gamma_loss;
    cfg.chi = c.chi;
    cfg.kappa_xpm = c.kappa_xpm;
    cfg.loss_c_factor = c.loss_c_factor;
    const TimeGrid g = make_grid(c.duration, c.duration / static_cast<double>(c.bins));
    const double centre = 0.5 * c.duration;
    const WavePacket xi = c.photons > 0 ? gaussian_packet(g, GaussianSpec{0.4 * c.duration, c.duration / 8.0})
                                        : WavePacket(g);
    const ControlSchedule sched = detail::oracle_schedule(cfg, g, c.lambda_peak, centre);

    PropagateOptions po;
    po.store_two_photon = true;
    po.traces = false;
    po.reference = c.photons > 0 ? &xi : nullptr;
    const CavityState init = c.photons == 0 ? c.init : CavityState{};
    const PropagationResult r = propagate(cfg, sched, xi, c.photons, init, po);
    const ReferenceState q = propagate_reference(cfg, sched, xi, c.photons, init);

    OracleReport rep;
    rep.name = c.name;
    rep.bins = c.bins;
    rep.dt = g.dt;
    double lam = 0.0, det = 0.0;
    for (std::size_t n = 0; n < g.n_bins; ++n) {
        const BinControl b = sched.bin(n);
        lam = std::max(lam, std::abs(b.lambda));
        det = std::max({det, std::abs(b.delta_a), std::abs(b.delta_b)});
    }
    rep.rate = cfg.gamma + cfg.gamma_loss + 2.0 * lam + 2.0 * det + std::numbers::sqrt2 * cfg.chi2() + cfg.chi3();

    // Propagator samples sit on grid points; reference records are bin
    // averages, compared against the mean of the bounding samples. The
    // reference also runs the last bin, which the propagator does not.
    const std::size_t M = g.n_bins - 1;
    const bool two = !r.two_out.empty();
    for (std::size_t m = 0; m < M; ++m) {
        const cplx p1 = 0.5 * (r.one_out[m] + r.one_out[m + 1]);
        const cplx q1 = q.one_record(m);
        rep.max_diff = std::max(rep.max_diff, std::abs(p1 - q1));
        rep.max_amp = std::max(rep.max_amp, std::abs(q1));
        if (!two) {
            continue;
        }
        for (std::size_t n = m; n < M; ++n) {
            const cplx p2 = 0.25 * (r.two(m, n) + r.two(m + 1, n) + r.two(m, n + 1) + r.two(m + 1, n + 1));
            const cplx q2 = q.two_record(m, n);
            rep.max_diff = std::max(rep.max_diff, std::abs(p2 - q2));
            rep.max_amp = std::max(rep.max_amp, std::abs(q2));
        }
    }
    if (c.photons == 2) {
        rep.F_prop = std::norm(r.two_overlap);
        rep.F_ref = std::norm(q.two_overlap(xi));
    } else if (c.photons == 1) {
        rep.F_prop = std::norm(r.one_overlap);
        rep.F_ref = std::norm(q.one_overlap(xi));
    }
    rep.bound = oracle_constant * rep.rate * rep.dt * std::max(rep.max_amp, 1e-300);
    return rep;
}

// max_diff at `bins` over max_diff at bins / 2; close to 1/2 for a first-order
// discrepancy.
inline double oracle_halving_ratio(OracleCase c)
{
    const double fine = run_oracle_case(c).max_diff;
    c.bins /= 2;
    const double coarse = run_oracle_case(c).max_diff;
    return coarse > 0.0 ? fine / coarse : 0.0;
}

// Cases covering both orders and 0, 1, 2 input photons.
inline std::vector<OracleCase> default_oracle_cases(std::size_t bins = 48)
{
    std::vector<OracleCase> cs;
    for (int k : {2, 3}) {
        const double chi = k == 2 ? 1.0 : 3.0;
        for (int p : {0, 1, 2}) {
            OracleCase c;
            c.order = k;
            c.photons = p;
            c.chi = chi;
            c.bins = bins;
            c.name = "k" + std::to_string(k) + "_n" + std::to_string(p);
            if (p == 0) {
                c.init.vacuum = 0.0;
                c.init.two = {0.0, 0.0, 1.0, 0.0}; // |2_b>
            }
            cs.push_back(c);
        }
        OracleCase one_b;
        one_b.order = k;
        one_b.photons = 0;
        one_b.chi = chi;
        one_b.bins = bins;
        one_b.name = "k" + std::to_string(k) + "_n0_one_b";
        one_b.init.vacuum = 0.0;
        one_b.init.one = {0.0, 1.0};
        cs.push_back(one_b);
        OracleCase vac = one_b;
        vac.name = "k" + std::to_string(k) + "_vacuum";
        vac.init = CavityState{};
        cs.push_back(vac);
    }
    return cs;
}

} // namespace cpgate
