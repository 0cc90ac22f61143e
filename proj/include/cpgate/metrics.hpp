#pragma once

// State fidelities, conditional fidelities, the controlled-phase condition
// and log-log power-law fits.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <json.hpp>

#include "cpgate/errors.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

struct FidelityReport {
    double F1 = 0.0;
    double F11 = 0.0;
    double F1_cond = 0.0;
    double F11_cond = 0.0;
    double phase_0 = 0.0; // vacuum rail; zero in the rotating frame
    double phase_1 = 0.0;
    double phase_11 = 0.0;
    double norm_1 = 0.0;
    double norm_11 = 0.0;
};

inline void to_json(nlohmann::json &j, const FidelityReport &r)
{
    j = nlohmann::json{{"F1", r.F1},           {"F11", r.F11},         {"F1_cond", r.F1_cond},
                       {"F11_cond", r.F11_cond}, {"phase_0", r.phase_0}, {"phase_1", r.phase_1},
                       {"phase_11", r.phase_11}, {"norm_1", r.norm_1},   {"norm_11", r.norm_11}};
}

inline void from_json(const nlohmann::json &j, FidelityReport &r)
{
    j.at("F1").get_to(r.F1);
    j.at("F11").get_to(r.F11);
    j.at("F1_cond").get_to(r.F1_cond);
    j.at("F11_cond").get_to(r.F11_cond);
    j.at("phase_0").get_to(r.phase_0);
    j.at("phase_1").get_to(r.phase_1);
    j.at("phase_11").get_to(r.phase_11);
    j.at("norm_1").get_to(r.norm_1);
    j.at("norm_11").get_to(r.norm_11);
}

// Wraps into (-pi, pi].
inline double wrap_phase(double x)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double y = std::fmod(x, two_pi);
    if (y <= -std::numbers::pi) {
        y += two_pi;
    } else if (y > std::numbers::pi) {
        y -= two_pi;
    }
    return y;
}

struct StateFidelity {
    double F = 0.0;
    double phase = 0.0;
    double norm = 0.0;
    double conditional() const { return norm > 0.0 ? F / norm : 0.0; }
};

// From an overlap <ideal|out> and the output norm.
inline StateFidelity state_fidelity(cplx overlap, double norm)
{
    return {std::norm(overlap), std::arg(overlap), norm};
}

// F1 = |sum conj(out) shift(in, T) dt|^2; phase is arg <shift(in, T)|out>.
inline StateFidelity fidelity_one(const WavePacket &out, const WavePacket &in, double T)
{
    require_same_grid(out.grid, in.grid);
    const WavePacket ideal = shift(in, T);
    return state_fidelity(overlap(ideal, out), out.norm());
}

// Two-photon output record on the full N x N grid, row-major, stored with the
// convention that a separable g(s) g(t) output is exactly g(s) g(t).
struct TwoPhotonRecord {
    TimeGrid grid;
    std::vector<cplx> amp;

    explicit TwoPhotonRecord(TimeGrid g) : grid(g), amp(g.n_bins * g.n_bins, cplx{0.0, 0.0}) {}

    cplx operator()(std::size_t m, std::size_t n) const { return amp[m * grid.n_bins + n]; }
    cplx &operator()(std::size_t m, std::size_t n) { return amp[m * grid.n_bins + n]; }

    static TwoPhotonRecord product(const WavePacket &p, const WavePacket &q)
    {
        require_same_grid(p.grid, q.grid);
        TwoPhotonRecord r(p.grid);
        for (std::size_t m = 0; m < p.size(); ++m) {
            for (std::size_t n = 0; n < p.size(); ++n) {
                r(m, n) = 0.5 * (p[m] * q[n] + q[m] * p[n]);
            }
        }
        return r;
    }
};

inline StateFidelity fidelity_two(const TwoPhotonRecord &out, const WavePacket &in, double T)
{
    require_same_grid(out.grid, in.grid);
    const std::size_t N = out.grid.n_bins;
    for (std::size_t m = 0; m < N; ++m) {
        for (std::size_t n = m + 1; n < N; ++n) {
            require(out(m, n) == out(n, m), "two-photon record is not exchange symmetric");
        }
    }
    const WavePacket g = shift(in, T);
    const double dt = out.grid.dt;
    cplx ov{0.0, 0.0};
    double nrm = 0.0;
    for (std::size_t m = 0; m < N; ++m) {
        for (std::size_t n = 0; n < N; ++n) {
            const cplx z = out(m, n);
            ov += std::conj(g[m] * g[n]) * z;
            nrm += std::norm(z);
        }
    }
    return state_fidelity(ov * dt * dt, nrm * dt * dt);
}

inline FidelityReport make_report(const StateFidelity &one, const StateFidelity &two)
{
    FidelityReport r;
    r.F1 = one.F;
    r.F11 = two.F;
    r.F1_cond = one.conditional();
    r.F11_cond = two.conditional();
    r.phase_1 = one.phase;
    r.phase_11 = two.phase;
    r.norm_1 = one.norm;
    r.norm_11 = two.norm;
    return r;
}

// Controlled-phase condition: 2 phase_1 = phase_11 + pi, phase_1 = phase_0.
// Returns the first residual wrapped into (-pi, pi].
inline double phase_condition(const FidelityReport &r)
{
    return wrap_phase(2.0 * r.phase_1 - r.phase_11 - std::numbers::pi);
}

inline double single_rail_residual(const FidelityReport &r) { return wrap_phase(r.phase_1 - r.phase_0); }

struct ScalingFit {
    double exponent = 0.0;
    double prefactor = 0.0;
    double r_squared = 0.0;
};

// True when the abscissae span at least one decade.
inline bool spans_decade(const std::vector<double> &xs)
{
    if (xs.empty()) {
        return false;
    }
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    return *lo > 0.0 && *hi / *lo >= 10.0 * (1.0 - 1e-12);
}

// Least squares of log y = log A + p log x over at least five points spanning
// a decade.
inline ScalingFit fit_power_law(const std::vector<double> &xs, const std::vector<double> &ys)
{
    require(xs.size() == ys.size(), "fit needs equally many x and y values");
    require(xs.size() >= 5, "fit needs at least five points");
    for (std::size_t i = 0; i < xs.size(); ++i) {
        require(xs[i] > 0.0 && ys[i] > 0.0 && std::isfinite(xs[i]) && std::isfinite(ys[i]),
                "power-law fit needs positive finite data");
    }
    require(spans_decade(xs), "fit abscissae must span at least one decade");
    const auto n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x = std::log(xs[i]), y = std::log(ys[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    require(den > 0.0, "power-law fit needs distinct x values");
    ScalingFit f;
    f.exponent = (n * sxy - sx * sy) / den;
    const double b = (sy - f.exponent * sx) / n;
    f.prefactor = std::exp(b);
    double ss_res = 0.0, ss_tot = 0.0;
    const double ybar = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double y = std::log(ys[i]);
        const double e = y - (b + f.exponent * std::log(xs[i]));
        ss_res += e * e;
        ss_tot += (y - ybar) * (y - ybar);
    }
    f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    return f;
}

inline void to_json(nlohmann::json &j, const ScalingFit &f)
{
    j = nlohmann::json{{"exponent", f.exponent}, {"prefactor", f.prefactor}, {"r_squared", f.r_squared}};
}

} // namespace cpgate
