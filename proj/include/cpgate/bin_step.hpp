#pragma once

// Effective (non-Hermitian) generators of the cavity Fock sectors and the
// per-bin RK4 integration shared by the synthesizer and the propagator.
//
// One-photon cavity basis: {a, b}.
// Two-photon cavity basis: {aa, ab, bb, c}; c is the second-harmonic mode
// and carries two excitations.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "cpgate/cavity.hpp"
#include "cpgate/errors.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

using Vec2 = std::array<cplx, 2>;
using Vec4 = std::array<cplx, 4>;
// Column-major 2x2: {m00, m10, m01, m11}.
using Mat2 = std::array<cplx, 4>;

inline Vec2 operator*(const Mat2 &m, const Vec2 &v)
{
    return {m[0] * v[0] + m[2] * v[1], m[1] * v[0] + m[3] * v[1]};
}

enum TwoIdx : std::size_t { AA = 0, AB = 1, BB = 2, CC = 3 };

struct StepOptions {
    // Substeps are chosen so that (sum of rates) * h stays below this.
    double max_rate_h = 0.02;
    std::size_t max_substeps = 1 << 14;
    // Bins with Lambda = 0, no source or reference field and mode-a
    // amplitudes below this are integrated with mode a decoupled.
    double idle_threshold = 1e-30;
};

class Generator {
public:
    Generator(const CavityConfig &cfg, const BinControl &bc)
    {
        const cplx I{0.0, 1.0};
        const double g = cfg.gamma, gl = cfg.gamma_loss;
        const double s2 = std::numbers::sqrt2;
        const cplx lam = bc.lambda, lamc = std::conj(bc.lambda);
        const double da = bc.delta_a, db = bc.delta_b;
        const double x2 = cfg.chi2(), x3 = cfg.chi3();

        m1 = {-(0.5 * g + 0.5 * gl) - I * da, -I * lam, -I * lamc, -0.5 * gl - I * db};

        for (auto &row : m2) {
            row.fill(cplx{0.0, 0.0});
        }
        // Hermitian part H; generator is -iH minus the decay rates.
        m2[AA][AA] = -I * (2.0 * da + 0.5 * x3) - (g + gl);
        m2[AB][AB] = -I * (da + db + x3) - (0.5 * g + gl);
        m2[BB][BB] = -I * (2.0 * db + 0.5 * x3) - gl;
        m2[CC][CC] = -0.5 * gl * cfg.loss_c_factor;
        m2[AA][AB] = -I * s2 * lamc;
        m2[AB][AA] = -I * s2 * lam;
        m2[AB][BB] = -I * s2 * lamc;
        m2[BB][AB] = -I * s2 * lam;
        m2[BB][CC] = -I * s2 * x2;
        m2[CC][BB] = -I * s2 * x2;

        rate = g + gl + 2.0 * s2 * std::abs(lam) + 2.0 * (std::abs(da) + std::abs(db)) + s2 * x2 + x3;
    }

    Vec2 one(const Vec2 &v) const { return m1 * v; }

    Vec4 two(const Vec4 &v) const
    {
        Vec4 r{};
        for (std::size_t i = 0; i < 4; ++i) {
            r[i] = m2[i][0] * v[0] + m2[i][1] * v[1] + m2[i][2] * v[2] + m2[i][3] * v[3];
        }
        return r;
    }

    Mat2 m1{};
    std::array<Vec4, 4> m2{};
    double rate = 0.0; // crude bound on the generator norm
};

// a^dagger from the one-photon to the two-photon cavity sector.
inline Vec4 raise_a(const Vec2 &v)
{
    return {std::numbers::sqrt2 * v[0], v[1], cplx{0.0, 0.0}, cplx{0.0, 0.0}};
}

// a from the two-photon to the one-photon cavity sector.
inline Vec2 lower_a(const Vec4 &q)
{
    return {std::numbers::sqrt2 * q[AA], q[AB]};
}

inline std::size_t substep_count(const Generator &gen, double dt, const StepOptions &opt)
{
    const double m = std::ceil(gen.rate * std::abs(dt) / opt.max_rate_h);
    if (!std::isfinite(m) || m > static_cast<double>(opt.max_substeps)) {
        fail(ErrorKind::unstable_step, "bin requires " + std::to_string(m) +
                                           " substeps; coupling rates are too large for the grid");
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(m));
}

// Input of one bin for the cavity ODEs.
struct BinInput {
    Vec2 psi0{};           // one cavity photon, nothing left to arrive
    cplx alpha1{0.0, 0.0}; // vacuum with one photon still to arrive
    Vec2 psi1{};           // one cavity photon, one photon still to arrive
    cplx alpha2{0.0, 0.0}; // vacuum with two photons still to arrive
    Vec4 q2{};             // two cavity photons
    // Reference projections carried across bins (see BinResult).
    cplx x_proj{0.0, 0.0};
    Vec2 phi_proj{};
    // Exact two-photon bookkeeping (see BinResult).
    double k_chi1 = 0.0;
    Vec2 y_chi1{};
    Mat2 m_phi{};
};

// Result of one bin: the affine one-photon map psi -> P psi + s q, where q is
// the response to the source sqrt(gamma) xi(t) e_a, plus the two-photon
// cavity amplitudes and bin integrals used for probability bookkeeping.
struct BinResult {
    Mat2 P{};
    Vec2 q{};
    Vec4 q2{};
    double input_mass = 0.0; // integral of |xi|^2 over the bin
    double flux0 = 0.0;      // emitted probability, one-photon sector
    double flux1 = 0.0;      // emitted probability, sector with one photon pending
    // With a reference packet g:
    //   overlap1  bin integral of conj(g) times the chi0 output field
    //   x_proj    X(t) = int_0^t conj(g) chi1
    //   phi_proj  Phi(t) = int_0^t conj(g(s)) phi(s; t) ds
    //   overlap2  bin integral of sqrt(2) conj(g) (xi X - sqrt(gamma) Phi_a)
    cplx overlap1{0.0, 0.0};
    cplx x_proj{0.0, 0.0};
    Vec2 phi_proj{};
    cplx overlap2{0.0, 0.0};
    // Two-photon sector, with K(t) = int_0^t |chi1|^2:
    //   y_chi1  Y(t) = int_0^t conj(chi1(s)) phi(s; t) ds
    //   m_phi   M(t) = int_0^t phi(s; t) phi(s; t)^dag ds
    //   flux2   bin integral of int_0^t |Xi(s, t)|^2 ds
    Vec2 y_chi1{};
    Mat2 m_phi{};
    double flux2 = 0.0;
};

namespace detail {

struct BinOde {
    // y layout: P col a (0,1), P col b (2,3), q (4,5), q2 (6..9), fluxes (10..12),
    // projections overlap1 (13), X (14), Phi (15, 16), overlap2 (17),
    // Y (18, 19), M (20..23), flux2 (24)
    using Y = std::array<cplx, 25>;
};

} // namespace detail

// Integrates one bin [t, t + dt) with piecewise-constant control.
// When `two_photon` is false the two-photon amplitudes are not touched.
inline BinResult integrate_bin(const CavityConfig &cfg, const BinControl &bc, const WavePacket *xi,
                               double t, double dt, const BinInput &in_full, bool two_photon,
                               const StepOptions &opt = {}, const WavePacket *ref = nullptr)
{
    using Y = detail::BinOde::Y;
    const Generator gen(cfg, bc);

    // Idle storage: mode a is empty and uncoupled, so only the slow rates
    // set the step and the a-components are dropped.
    const double eps = opt.idle_threshold;
    auto small = [&](cplx z) { return std::abs(z) <= eps; };
    auto field_small = [&](const WavePacket *w) {
        return !w || (small(w->at(t)) && small(w->at(t + 0.5 * dt)) && small(w->at(t + dt)));
    };
    const bool idle = bc.lambda == cplx{0.0, 0.0} && bc.delta_a == 0.0 && bc.delta_b == 0.0 && field_small(xi) &&
                      field_small(ref) && small(in_full.psi0[0]) && small(in_full.psi1[0]) &&
                      (!two_photon || (small(in_full.q2[AA]) && small(in_full.q2[AB]) && small(in_full.y_chi1[0]) &&
                                       small(in_full.m_phi[0]) && small(in_full.m_phi[1]) &&
                                       small(in_full.m_phi[2]))) &&
                      small(in_full.phi_proj[0]);
    BinInput in_idle;
    if (idle) {
        in_idle = in_full;
        in_idle.psi0[0] = in_idle.psi1[0] = 0.0;
        in_idle.q2[AA] = in_idle.q2[AB] = 0.0;
        in_idle.y_chi1[0] = 0.0;
        in_idle.m_phi[0] = in_idle.m_phi[1] = in_idle.m_phi[2] = 0.0;
        in_idle.phi_proj[0] = 0.0;
    }
    const BinInput &in = idle ? in_idle : in_full;
    const double slow_rate = cfg.gamma_loss * std::max(1.0, cfg.loss_c_factor) + std::numbers::sqrt2 * cfg.chi2() + cfg.chi3();
    const std::size_t m =
        idle ? std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(slow_rate * dt / opt.max_rate_h)))
             : substep_count(gen, dt, opt);
    const double h = dt / static_cast<double>(m);
    const double sg = std::sqrt(cfg.gamma);
    const double s2 = std::numbers::sqrt2;

    Y y{};
    y[0] = 1.0;
    y[3] = 1.0;
    if (two_photon) {
        for (std::size_t i = 0; i < 4; ++i) {
            y[6 + i] = in.q2[i];
        }
    }
    y[14] = in.x_proj;
    y[15] = in.phi_proj[0];
    y[16] = in.phi_proj[1];
    if (two_photon) {
        y[18] = in.y_chi1[0];
        y[19] = in.y_chi1[1];
        for (std::size_t i = 0; i < 4; ++i) {
            y[20 + i] = in.m_phi[i];
        }
    }

    auto deriv = [&](const Y &s, cplx x, cplx gc) {
        Y d{};
        const Vec2 ca{s[0], s[1]}, cb{s[2], s[3]}, q{s[4], s[5]};
        const Vec2 da = gen.one(ca), db = gen.one(cb);
        Vec2 dq = gen.one(q);
        dq[0] += sg * x;
        d[0] = da[0];
        d[1] = da[1];
        d[2] = db[0];
        d[3] = db[1];
        d[4] = dq[0];
        d[5] = dq[1];
        const Mat2 P{s[0], s[1], s[2], s[3]};
        const Vec2 p0 = P * in.psi0;
        const Vec2 p1 = P * in.psi1;
        const cplx psi0a = p0[0] + in.alpha1 * q[0];
        const Vec2 psi1{p1[0] + s2 * in.alpha2 * q[0], p1[1] + s2 * in.alpha2 * q[1]};
        if (two_photon) {
            const Vec4 q2{s[6], s[7], s[8], s[9]};
            Vec4 dq2 = gen.two(q2);
            const Vec4 src = raise_a(psi1);
            for (std::size_t i = 0; i < 4; ++i) {
                d[6 + i] = dq2[i] + sg * x * src[i];
            }
        }
        d[10] = std::norm(x);
        const cplx out0 = in.alpha1 * x - sg * psi0a;
        const cplx out1 = s2 * in.alpha2 * x - sg * psi1[0];
        d[11] = std::norm(out0);
        d[12] = std::norm(out1);
        if (two_photon) {
            const Vec4 q2{s[6], s[7], s[8], s[9]};
            const Vec2 lo = lower_a(q2);
            // phi(t; t): first photon just left, one still inside
            const Vec2 ph{x * psi1[0] - sg * lo[0], x * psi1[1] - sg * lo[1]};
            const double K = in.k_chi1 + s[12].real();
            const Vec2 Yv{s[18], s[19]};
            Vec2 dY = gen.one(Yv);
            const cplx co = std::conj(out1);
            dY[0] += sg * x * K + co * ph[0];
            dY[1] += co * ph[1];
            d[18] = dY[0];
            d[19] = dY[1];
            const Vec2 g0 = gen.one({s[20], s[21]}), g1 = gen.one({s[22], s[23]});
            const Mat2 GM{g0[0], g0[1], g1[0], g1[1]};
            const cplx sx = sg * x;
            for (std::size_t j = 0; j < 2; ++j) {
                for (std::size_t i = 0; i < 2; ++i) {
                    cplx v = GM[j * 2 + i] + std::conj(GM[i * 2 + j]) + ph[i] * std::conj(ph[j]);
                    if (i == 0) {
                        v += sx * std::conj(Yv[j]);
                    }
                    if (j == 0) {
                        v += Yv[i] * std::conj(sx);
                    }
                    d[20 + j * 2 + i] = v;
                }
            }
            d[24] = std::norm(x) * K + cfg.gamma * s[20].real() - 2.0 * sg * (x * std::conj(Yv[0])).real();
        }
        if (ref) {
            d[13] = gc * out0;
            if (two_photon) {
                const Vec4 q2{s[6], s[7], s[8], s[9]};
                const Vec2 lo = lower_a(q2);
                const cplx X = s[14];
                const Vec2 Phi{s[15], s[16]};
                const Vec2 dPhi = gen.one(Phi);
                d[14] = gc * out1;
                d[15] = dPhi[0] + sg * x * X + gc * (x * psi1[0] - sg * lo[0]);
                d[16] = dPhi[1] + gc * (x * psi1[1] - sg * lo[1]);
                d[17] = s2 * gc * (x * X - sg * Phi[0]);
            }
        }
        return d;
    };

    auto axpy = [](const Y &a, double c, const Y &b) {
        Y r;
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = a[i] + c * b[i];
        }
        return r;
    };

    auto source = [&](double tt) { return xi ? xi->at(tt) : cplx{0.0, 0.0}; };
    auto refc = [&](double tt) { return ref ? std::conj(ref->at(tt)) : cplx{0.0, 0.0}; };

    double ts = t;
    cplx x0 = source(ts), g0 = refc(ts);
    for (std::size_t j = 0; j < m; ++j) {
        const cplx xm = source(ts + 0.5 * h), gm = refc(ts + 0.5 * h);
        const cplx x1 = source(ts + h), g1 = refc(ts + h);
        const Y k1 = deriv(y, x0, g0);
        const Y k2 = deriv(axpy(y, 0.5 * h, k1), xm, gm);
        const Y k3 = deriv(axpy(y, 0.5 * h, k2), xm, gm);
        const Y k4 = deriv(axpy(y, h, k3), x1, g1);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        ts += h;
        x0 = x1;
        g0 = g1;
    }

    if (idle) {
        y[0] = std::exp(-0.5 * (cfg.gamma + cfg.gamma_loss) * dt);
        y[1] = 0.0;
    }

    BinResult r;
    r.P = {y[0], y[1], y[2], y[3]};
    r.q = {y[4], y[5]};
    r.q2 = {y[6], y[7], y[8], y[9]};
    r.input_mass = y[10].real();
    r.flux0 = y[11].real();
    r.flux1 = y[12].real();
    r.overlap1 = y[13];
    r.x_proj = y[14];
    r.phi_proj = {y[15], y[16]};
    r.overlap2 = y[17];
    r.y_chi1 = {y[18], y[19]};
    r.m_phi = {y[20], y[21], y[22], y[23]};
    r.flux2 = y[24].real();
    return r;
}

// One-photon map only; used by the control synthesizer.
inline Vec2 step_one_photon(const CavityConfig &cfg, const BinControl &bc, const WavePacket *xi, double t,
                            double dt, const Vec2 &psi, cplx source_weight, const StepOptions &opt = {})
{
    BinInput in;
    const BinResult r = integrate_bin(cfg, bc, xi, t, dt, in, false, opt);
    const Vec2 p = r.P * psi;
    return {p[0] + source_weight * r.q[0], p[1] + source_weight * r.q[1]};
}

} // namespace cpgate
