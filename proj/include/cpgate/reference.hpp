#pragma once

// Dense collision-model reference for small grids.
//
// Every time bin n is an explicit waveguide mode w_n. During bin n the cavity
// and w_n evolve under exp(G_n dt), where G_n is the (non-Hermitian) cavity
// generator plus the beam-splitter coupling sqrt(gamma/dt)(a^dag w_n - w_n^dag a).
// The decay gamma/2 of mode a is not put in by hand; it emerges from the
// coupling. Total excitation number is at most two (c counts as two), so the
// state splits into
//
//   vac                          everything empty
//   w1[m]                        one photon in bin m
//   c1                           one cavity photon {a, b}
//   w2[m <= k]                   two photons in bins m and k (m = k: |2_m>)
//   cw[m]                        one cavity photon {a, b} and one photon in bin m
//   c2                           two cavity excitations {aa, ab, bb, c}

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "cpgate/bin_step.hpp"
#include "cpgate/cavity.hpp"
#include "cpgate/dynamics.hpp"
#include "cpgate/errors.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

inline constexpr std::size_t reference_max_bins = 64;

struct ReferenceState {
    TimeGrid grid;
    cplx vac{0.0, 0.0};
    std::vector<cplx> w1;
    Vec2 c1{};
    std::vector<cplx> w2; // triangle, index k(k+1)/2 + m for m <= k
    std::vector<Vec2> cw;
    Vec4 c2{};

    static std::size_t tri(std::size_t m, std::size_t k) { return m <= k ? k * (k + 1) / 2 + m : m * (m + 1) / 2 + k; }

    // Same normalization as the sector propagator's records.
    cplx one_record(std::size_t m) const { return w1[m] / std::sqrt(grid.dt); }

    cplx two_record(std::size_t m, std::size_t k) const
    {
        const cplx z = w2[tri(m, k)];
        return m == k ? z / grid.dt : z / (std::numbers::sqrt2 * grid.dt);
    }

    double norm() const
    {
        double s = std::norm(vac) + detail::norm2(c1) + detail::norm4(c2);
        for (auto z : w1) {
            s += std::norm(z);
        }
        for (auto z : w2) {
            s += std::norm(z);
        }
        for (const auto &v : cw) {
            s += detail::norm2(v);
        }
        return s;
    }

    // <g|out> for the one-photon waveguide part.
    cplx one_overlap(const WavePacket &g) const
    {
        require_same_grid(g.grid, grid);
        cplx s{0.0, 0.0};
        for (std::size_t m = 0; m < w1.size(); ++m) {
            s += std::conj(g[m]) * w1[m];
        }
        return s * std::sqrt(grid.dt);
    }

    // <g g|out>, with |g g> = (a_g^dag)^2 |0> / sqrt(2).
    cplx two_overlap(const WavePacket &g) const
    {
        require_same_grid(g.grid, grid);
        cplx s{0.0, 0.0};
        for (std::size_t k = 0; k < grid.n_bins; ++k) {
            for (std::size_t m = 0; m <= k; ++m) {
                const cplx coef = m == k ? g[m] * g[m] : std::numbers::sqrt2 * g[m] * g[k];
                s += std::conj(coef) * w2[tri(m, k)];
            }
        }
        return s * grid.dt;
    }
};

namespace detail {

// Local generators on {a, b, w} and {aa, ab, bb, c, aw, bw, ww}.
inline Eigen::Matrix3cd local_one(const CavityConfig &cfg, const BinControl &bc, double dt)
{
    const cplx I{0.0, 1.0};
    const double gl = cfg.gamma_loss;
    const double k = std::sqrt(cfg.gamma / dt);
    Eigen::Matrix3cd G = Eigen::Matrix3cd::Zero();
    G(0, 0) = -I * bc.delta_a - 0.5 * gl;
    G(0, 1) = -I * std::conj(bc.lambda);
    G(1, 0) = -I * bc.lambda;
    G(1, 1) = -I * bc.delta_b - 0.5 * gl;
    G(0, 2) = k;
    G(2, 0) = -k;
    return G;
}

inline Eigen::Matrix<cplx, 7, 7> local_two(const CavityConfig &cfg, const BinControl &bc, double dt)
{
    const cplx I{0.0, 1.0};
    const double gl = cfg.gamma_loss;
    const double s2 = std::numbers::sqrt2;
    const double k = std::sqrt(cfg.gamma / dt);
    const double x2 = cfg.chi2(), x3 = cfg.chi3();
    const cplx lam = bc.lambda, lamc = std::conj(bc.lambda);
    const double da = bc.delta_a, db = bc.delta_b;
    enum { aa, ab, bb, c, aw, bw, ww };
    Eigen::Matrix<cplx, 7, 7> G = Eigen::Matrix<cplx, 7, 7>::Zero();
    G(aa, aa) = -I * (2.0 * da + 0.5 * x3) - gl;
    G(ab, ab) = -I * (da + db + x3) - gl;
    G(bb, bb) = -I * (2.0 * db + 0.5 * x3) - gl;
    G(c, c) = -0.5 * gl * cfg.loss_c_factor;
    G(aa, ab) = -I * s2 * lamc;
    G(ab, aa) = -I * s2 * lam;
    G(ab, bb) = -I * s2 * lamc;
    G(bb, ab) = -I * s2 * lam;
    G(bb, c) = -I * s2 * x2;
    G(c, bb) = -I * s2 * x2;
    G(aw, aw) = -I * da - 0.5 * gl;
    G(aw, bw) = -I * lamc;
    G(bw, aw) = -I * lam;
    G(bw, bw) = -I * db - 0.5 * gl;
    // sqrt(gamma/dt) (a^dag w - w^dag a)
    G(aa, aw) = s2 * k;
    G(aw, aa) = -s2 * k;
    G(ab, bw) = k;
    G(bw, ab) = -k;
    G(aw, ww) = s2 * k;
    G(ww, aw) = -s2 * k;
    return G;
}

} // namespace detail

// Runs the collision model over all bins. Same input conventions as propagate().
inline ReferenceState propagate_reference(const CavityConfig &cfg, const ControlSchedule &schedule,
                                          const WavePacket &input, int photons, const CavityState &init = {})
{
    cfg.validate();
    require(photons >= 0 && photons <= 2, "photon number must be 0, 1 or 2");
    require_same_grid(schedule.grid, input.grid);
    const TimeGrid &g = input.grid;
    const std::size_t N = g.n_bins;
    require(N <= reference_max_bins, "reference oracle is limited to " + std::to_string(reference_max_bins) + " bins");
    const bool has_two = detail::norm4(init.two) > 0.0;
    const bool has_one = detail::norm2(init.one) > 0.0;
    require(photons == 0 || !has_two, "at most two excitations are supported");
    require(photons < 2 || (!has_one && !has_two), "two input photons need an empty cavity");

    const double dt = g.dt;
    const double sq = std::sqrt(dt);

    ReferenceState st;
    st.grid = g;
    st.w1.assign(N, 0.0);
    st.w2.assign(N * (N + 1) / 2, 0.0);
    st.cw.assign(N, Vec2{});
    if (photons == 0) {
        st.vac = init.vacuum;
        st.c1 = init.one;
        st.c2 = init.two;
    } else if (photons == 1) {
        for (std::size_t m = 0; m < N; ++m) {
            st.w1[m] = init.vacuum * input[m] * sq;
            st.cw[m] = {init.one[0] * input[m] * sq, init.one[1] * input[m] * sq};
        }
    } else {
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t m = 0; m <= k; ++m) {
                st.w2[ReferenceState::tri(m, k)] =
                    (m == k ? 1.0 : std::numbers::sqrt2) * input[m] * input[k] * dt;
            }
        }
    }

    for (std::size_t n = 0; n < N; ++n) {
        const BinControl bc = schedule.bin(n);
        const Eigen::Matrix3cd U1 = (detail::local_one(cfg, bc, dt) * dt).exp();
        const Eigen::Matrix<cplx, 7, 7> U2 = (detail::local_two(cfg, bc, dt) * dt).exp();

        // One local excitation, empty spectators.
        {
            Eigen::Vector3cd v(st.c1[0], st.c1[1], st.w1[n]);
            v = U1 * v;
            st.c1 = {v(0), v(1)};
            st.w1[n] = v(2);
        }
        // Two local excitations.
        {
            Eigen::Matrix<cplx, 7, 1> v;
            v << st.c2[0], st.c2[1], st.c2[2], st.c2[3], st.cw[n][0], st.cw[n][1], st.w2[ReferenceState::tri(n, n)];
            v = U2 * v;
            st.c2 = {v(0), v(1), v(2), v(3)};
            st.cw[n] = {v(4), v(5)};
            st.w2[ReferenceState::tri(n, n)] = v(6);
        }
        // One local excitation next to a spectator photon in bin m.
        for (std::size_t m = 0; m < N; ++m) {
            if (m == n) {
                continue;
            }
            cplx &w = st.w2[ReferenceState::tri(m, n)];
            Eigen::Vector3cd v(st.cw[m][0], st.cw[m][1], w);
            v = U1 * v;
            st.cw[m] = {v(0), v(1)};
            w = v(2);
        }
    }
    return st;
}

} // namespace cpgate
