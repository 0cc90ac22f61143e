#pragma once

// Nonlinear-rate calibration for the controlled-phase condition
// arg<11|out> = 2 arg<1|out> - pi, and a JSON cache of the results.
//
// The coupling schedule does not depend on chi, so it is built once and only
// the two-photon projection is recomputed per trial value.

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include "cpgate/cavity.hpp"
#include "cpgate/dynamics.hpp"
#include "cpgate/errors.hpp"
#include "cpgate/gate.hpp"
#include "cpgate/metrics.hpp"

namespace cpgate {

inline constexpr double calibration_tolerance = 1e-4; // rad

struct CalibrationResult {
    double chi = 0.0;
    double seed = 0.0;
    double residual = 0.0;      // wrap(phase_11 - 2 phase_1 + pi)
    double F11 = 0.0;
    double leftover_c = 0.0;    // |c|^2 at the end of the two-photon run
    int evaluations = 0;
};

inline void to_json(nlohmann::json &j, const CalibrationResult &r)
{
    j = nlohmann::json{{"chi", r.chi},           {"seed", r.seed}, {"residual", r.residual},
                       {"F11", r.F11},           {"leftover_c", r.leftover_c},
                       {"evaluations", r.evaluations}};
}

inline void from_json(const nlohmann::json &j, CalibrationResult &r)
{
    j.at("chi").get_to(r.chi);
    j.at("seed").get_to(r.seed);
    j.at("residual").get_to(r.residual);
    j.at("F11").get_to(r.F11);
    j.at("leftover_c").get_to(r.leftover_c);
    j.at("evaluations").get_to(r.evaluations);
}

inline double chi3_seed(double t_store) { return 2.0 * std::numbers::pi / t_store; }
inline double chi2_seed(double t_store) { return std::numbers::pi / (std::numbers::sqrt2 * t_store); }

namespace detail {

struct TwoPhotonProbe {
    cplx overlap;
    double leftover_c;
};

// Two-photon projection onto the ideal output for a given chi.
inline TwoPhotonProbe probe_two(CavityConfig cfg, const GateSchedule &G, double chi)
{
    cfg.chi = chi;
    PropagateOptions po;
    po.reference = &G.layout.ideal_out;
    po.two_photon_records = false;
    po.traces = false;
    const auto r = propagate(cfg, G.schedule, G.layout.xi_in, 2, {}, po);
    return {r.two_overlap, std::norm(r.final_cavity.two[3])};
}

inline cplx probe_one(const CavityConfig &cfg, const GateSchedule &G)
{
    PropagateOptions po;
    po.reference = &G.layout.ideal_out;
    po.traces = false;
    return propagate(cfg, G.schedule, G.layout.xi_in, 1, {}, po).one_overlap;
}

inline double cz_residual(cplx two, double phase_1) { return wrap_phase(std::arg(two) - 2.0 * phase_1 + std::numbers::pi); }

// Root of a function decreasing through zero near `seed`: steps outward by
// 25% until the sign flips from + to -, then TOMS 748 inside the bracket.
template <class F>
double bracketed_root(F &&h, double seed, double lo_limit, double hi_limit, int &evaluations)
{
    auto f = [&](double x) {
        ++evaluations;
        return h(x);
    };
    double a = seed, fa = f(a);
    if (fa == 0.0) {
        return a;
    }
    double b = a, fb = fa;
    const double step = 1.25;
    while (true) {
        const double x = fa > 0.0 ? b * step : a / step;
        if (x > hi_limit || x < lo_limit) {
            fail(ErrorKind::calibration_failure, "no sign change of the phase residual within [0.1, 10] x seed");
        }
        const double fx = f(x);
        if (fa > 0.0) {
            // moving up from a positive value
            if (fx <= 0.0) {
                b = x;
                fb = fx;
                break;
            }
            a = b = x;
            fa = fb = fx;
        } else {
            if (fx >= 0.0) {
                b = a;
                fb = fa;
                a = x;
                fa = fx;
                break;
            }
            a = b = x;
            fa = fb = fx;
        }
    }
    if (fb == 0.0) {
        return b;
    }
    std::uintmax_t iters = 60;
    const auto tol = [](double x, double y) { return std::abs(y - x) <= 1e-12 * std::abs(x); };
    const auto root = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    const double ra = root.first, rb = root.second;
    const double ha = std::abs(h(ra)), hb = std::abs(h(rb));
    evaluations += 2;
    return ha <= hb ? ra : rb;
}

} // namespace detail

// Chi_3 for a prepared gate schedule; `cfg` supplies gamma, loss and kappa_xpm.
inline CalibrationResult calibrate_chi3(const CavityConfig &cfg, const GateSchedule &G, double t_store)
{
    require(cfg.order == Order::chi3, "calibrate_chi3 needs a chi3 cavity");
    require(t_store > 0.0, "storage time must be positive");
    CalibrationResult res;
    res.seed = chi3_seed(t_store);
    const double phase_1 = std::arg(detail::probe_one(cfg, G));
    auto h = [&](double chi) { return detail::cz_residual(detail::probe_two(cfg, G, chi).overlap, phase_1); };
    res.chi = detail::bracketed_root(h, res.seed, 0.1 * res.seed, 10.0 * res.seed, res.evaluations);
    const auto p = detail::probe_two(cfg, G, res.chi);
    res.residual = detail::cz_residual(p.overlap, phase_1);
    res.F11 = std::norm(p.overlap);
    res.leftover_c = p.leftover_c;
    if (std::abs(res.residual) >= calibration_tolerance) {
        fail(ErrorKind::calibration_failure,
             "chi3 calibration left a phase residual of " + std::to_string(res.residual) + " rad");
    }
    return res;
}

// Chi_2: maximizes the projection of <11|out> onto exp(i(2 phase_1 - pi)),
// i.e. the F11 branch with one full b -> c -> b Rabi cycle.
inline CalibrationResult calibrate_chi2(const CavityConfig &cfg, const GateSchedule &G, double t_store)
{
    require(cfg.order == Order::chi2, "calibrate_chi2 needs a chi2 cavity");
    require(t_store > 0.0, "storage time must be positive");
    CalibrationResult res;
    res.seed = chi2_seed(t_store);
    const cplx rot = std::polar(1.0, -2.0 * std::arg(detail::probe_one(cfg, G)));
    auto J = [&](double chi) {
        ++res.evaluations;
        return (detail::probe_two(cfg, G, chi).overlap * rot).real();
    };
    // The next maximum of the projection sits near 3 x seed.
    std::uintmax_t iters = 60;
    const auto best = boost::math::tools::brent_find_minima(J, 0.3 * res.seed, 2.0 * res.seed, 40, iters);
    res.chi = best.first;
    if (best.second >= 0.0) {
        fail(ErrorKind::calibration_failure, "two-photon amplitude never acquires the pi phase");
    }
    const auto p = detail::probe_two(cfg, G, res.chi);
    res.residual = wrap_phase(std::arg(p.overlap * rot) + std::numbers::pi);
    res.F11 = std::norm(p.overlap);
    res.leftover_c = p.leftover_c;
    if (std::abs(res.residual) >= calibration_tolerance) {
        fail(ErrorKind::calibration_failure,
             "chi2 calibration left a phase residual of " + std::to_string(res.residual) + " rad");
    }
    return res;
}

inline CalibrationResult calibrate_chi(const CavityConfig &cfg, const GateSchedule &G, double t_store)
{
    return cfg.order == Order::chi3 ? calibrate_chi3(cfg, G, t_store) : calibrate_chi2(cfg, G, t_store);
}

// Builds the schedule for `spec` and calibrates its nonlinear rate.
inline CalibrationResult calibrate_chi(const GateSpec &spec)
{
    return calibrate_chi(spec.cavity, build_gate_schedule(spec), spec.t_store);
}

// Storage-only toy: |2_b> held for t_store with Lambda = 0, no absorption or
// emission. Returns the b-mode amplitude <2_b|U|2_b>.
inline cplx storage_amplitude(const CavityConfig &cfg, double t_store, double dt)
{
    // N samples span N - 1 steps.
    const TimeGrid g = make_grid(t_store + dt, dt);
    require(std::abs(g.duration() - dt - t_store) < 1e-9 * t_store, "storage time must be a multiple of dt");
    CavityState init;
    init.vacuum = 0.0;
    init.two = {0.0, 0.0, 1.0, 0.0};
    PropagateOptions po;
    po.traces = false;
    const auto r = propagate(cfg, ControlSchedule(g), WavePacket(g), 0, init, po);
    return r.final_cavity.two[2];
}

// Chi such that the stored |2_b> amplitude equals -1 (phase -pi for chi3,
// one full Rabi cycle for chi2).
inline CalibrationResult calibrate_storage_only(CavityConfig cfg, double t_store, double dt)
{
    require(t_store > 0.0, "storage time must be positive");
    CalibrationResult res;
    const bool k3 = cfg.order == Order::chi3;
    res.seed = k3 ? chi3_seed(t_store) : chi2_seed(t_store);
    auto amp = [&](double chi) {
        cfg.chi = chi;
        return storage_amplitude(cfg, t_store, dt);
    };
    if (k3) {
        res.chi = detail::bracketed_root([&](double chi) { return wrap_phase(std::arg(amp(chi)) + std::numbers::pi); },
                                         res.seed, 0.1 * res.seed, 10.0 * res.seed, res.evaluations);
    } else {
        std::uintmax_t iters = 60;
        res.chi = boost::math::tools::brent_find_minima(
                      [&](double chi) {
                          ++res.evaluations;
                          return amp(chi).real();
                      },
                      0.3 * res.seed, 2.0 * res.seed, 40, iters)
                      .first;
    }
    const cplx a = amp(res.chi);
    res.residual = wrap_phase(std::arg(a) + std::numbers::pi);
    res.F11 = std::norm(a);
    return res;
}

// Fixed chi: the storage delay (a multiple of dt) with the smallest phase
// residual, found by bisection on the bin count around the analytic value.
struct DelayCalibration {
    double t_store = 0.0;
    double residual = 0.0;
    int evaluations = 0;
};

inline DelayCalibration calibrate_t_store(GateSpec spec)
{
    require(spec.cavity.chi > 0.0, "calibrating the storage time needs a non-zero chi");
    const double chi = spec.cavity.chi;
    const double seed = spec.cavity.order == Order::chi3 ? 2.0 * std::numbers::pi / chi
                                                         : std::numbers::pi / (std::numbers::sqrt2 * chi);
    DelayCalibration out;
    auto h = [&](long long bins) {
        ++out.evaluations;
        spec.t_store = static_cast<double>(bins) * spec.dt;
        const GateSchedule G = build_gate_schedule(spec);
        const double phase_1 = std::arg(detail::probe_one(spec.cavity, G));
        const cplx two = detail::probe_two(spec.cavity, G, chi).overlap;
        if (spec.cavity.order == Order::chi3) {
            return detail::cz_residual(two, phase_1);
        }
        // chi2: sign change of Im across the pi crossing; Re < 0 on the right branch.
        return wrap_phase(std::arg(two) - 2.0 * phase_1);
    };
    const long long min_bins = static_cast<long long>(std::ceil(8.0 * spec.fwhm / spec.dt - 1e-9));
    long long lo = std::max(min_bins, static_cast<long long>(std::floor(0.5 * seed / spec.dt)));
    long long hi = std::max(lo + 1, static_cast<long long>(std::ceil(2.0 * seed / spec.dt)));
    double flo = h(lo), fhi = h(hi);
    auto target_sign = [&](double v) {
        // chi3 residual decreases through zero; chi2 phase (measured from 0) increases towards pi
        return spec.cavity.order == Order::chi3 ? v : std::abs(v) - std::numbers::pi / 2.0;
    };
    if (spec.cavity.order == Order::chi3 ? !(flo > 0.0 && fhi < 0.0)
                                         : !(target_sign(flo) < 0.0 && target_sign(fhi) > 0.0)) {
        fail(ErrorKind::calibration_failure, "no storage time in [0.5, 2] x the analytic delay brackets the phase condition");
    }
    while (hi - lo > 1) {
        const long long mid = lo + (hi - lo) / 2;
        const double fm = h(mid);
        const bool left = spec.cavity.order == Order::chi3 ? fm > 0.0 : target_sign(fm) < 0.0;
        (left ? lo : hi) = mid;
        (left ? flo : fhi) = fm;
    }
    auto resid = [&](double v) {
        return spec.cavity.order == Order::chi3 ? v : wrap_phase(v + std::numbers::pi);
    };
    const bool pick_lo = std::abs(resid(flo)) <= std::abs(resid(fhi));
    out.t_store = static_cast<double>(pick_lo ? lo : hi) * spec.dt;
    out.residual = resid(pick_lo ? flo : fhi);
    return out;
}

// Cache keyed by (k, gamma/Omega_G, T/tau_G, gamma_L/Omega_G, kappa_xpm), plus
// the mode-c loss factor when it is not 1.
struct CalibrationKey {
    int order = 2;
    double gamma_ratio = 0.0;
    double t_ratio = 0.0;
    double loss_ratio = 0.0;
    double kappa_xpm = 0.0;
    double loss_c_factor = 1.0;

    std::string str() const
    {
        std::ostringstream os;
        os.precision(12);
        os << "k=" << order << ";g=" << gamma_ratio << ";T=" << t_ratio << ";gl=" << loss_ratio << ";kx=" << kappa_xpm;
        if (loss_c_factor != 1.0) {
            os << ";lc=" << loss_c_factor;
        }
        return os.str();
    }
};

class CalibrationCache {
public:
    CalibrationCache() = default;
    explicit CalibrationCache(std::string path) : m_path(std::move(path)) { load(); }

    std::optional<CalibrationResult> find(const CalibrationKey &key) const
    {
        std::lock_guard lock(m_mutex);
        const auto it = m_table.find(key.str());
        if (it == m_table.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    void insert(const CalibrationKey &key, const CalibrationResult &r)
    {
        std::lock_guard lock(m_mutex);
        m_table[key.str()] = r;
    }

    // Sorted keys, so the file is byte-identical for equal contents.
    void save() const
    {
        if (m_path.empty()) {
            return;
        }
        std::lock_guard lock(m_mutex);
        nlohmann::json j = nlohmann::json::object();
        for (const auto &[k, v] : m_table) {
            j[k] = v;
        }
        std::ofstream os(m_path);
        require(static_cast<bool>(os), "cannot write calibration cache " + m_path);
        os << j.dump(2) << "\n";
    }

    std::size_t size() const
    {
        std::lock_guard lock(m_mutex);
        return m_table.size();
    }

private:
    void load()
    {
        std::ifstream is(m_path);
        if (!is) {
            return;
        }
        const nlohmann::json j = nlohmann::json::parse(is);
        for (const auto &[k, v] : j.items()) {
            m_table[k] = v.get<CalibrationResult>();
        }
    }

    std::string m_path;
    std::map<std::string, CalibrationResult> m_table;
    mutable std::mutex m_mutex;
};

} // namespace cpgate
