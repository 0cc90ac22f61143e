#pragma once

// Uniform time grids and single-photon wave packets sampled on them.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cpgate/errors.hpp"

namespace cpgate {

using cplx = std::complex<double>;

struct TimeGrid {
    double dt = 1.0;
    std::size_t n_bins = 2;
    double t0 = 0.0;

    double time(std::size_t n) const { return t0 + static_cast<double>(n) * dt; }
    double duration() const { return static_cast<double>(n_bins) * dt; }

    // Nearest bin index for time t (not clamped).
    long long index_of(double t) const { return std::llround((t - t0) / dt); }

    friend bool operator==(const TimeGrid &, const TimeGrid &) = default;
};

inline TimeGrid make_grid(double duration, double dt, double t0 = 0.0)
{
    require(dt > 0.0 && std::isfinite(dt), "time step must be positive");
    require(duration > 0.0 && std::isfinite(duration), "duration must be positive");
    require(duration >= 2.0 * dt * (1.0 - 1e-12), "duration must cover at least two bins");
    // Tolerate round-off in duration/dt before taking the ceiling.
    const double ratio = duration / dt;
    auto n = static_cast<std::size_t>(std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
    return TimeGrid{dt, std::max<std::size_t>(n, 2), t0};
}

inline void require_same_grid(const TimeGrid &a, const TimeGrid &b)
{
    require(a == b, "arrays live on different time grids");
}

struct WavePacket {
    TimeGrid grid;
    std::vector<cplx> amp;

    WavePacket() = default;
    explicit WavePacket(TimeGrid g) : grid(g), amp(g.n_bins, cplx{0.0, 0.0}) {}
    WavePacket(TimeGrid g, std::vector<cplx> a) : grid(g), amp(std::move(a))
    {
        require(amp.size() == grid.n_bins, "amplitude count does not match grid");
    }

    std::size_t size() const { return amp.size(); }
    cplx operator[](std::size_t n) const { return amp[n]; }
    cplx &operator[](std::size_t n) { return amp[n]; }

    double norm() const
    {
        double s = 0.0;
        for (auto z : amp) {
            s += std::norm(z);
        }
        return s * grid.dt;
    }

    // Eight-point Lagrange interpolation of the sampled envelope at
    // arbitrary t; zero outside the grid.
    cplx at(double t) const
    {
        const double x = (t - grid.t0) / grid.dt;
        const auto n = static_cast<long long>(amp.size());
        if (x < -4.0 || x > static_cast<double>(n) + 3.0) {
            return {0.0, 0.0};
        }
        const auto i = static_cast<long long>(std::floor(x));
        const double u = x - static_cast<double>(i);
        auto sample = [&](long long k) -> cplx {
            return (k < 0 || k >= n) ? cplx{0.0, 0.0} : amp[static_cast<std::size_t>(k)];
        };
        if (u == 0.0) {
            return sample(i);
        }
        constexpr int lo = -3, hi = 4;
        cplx acc{0.0, 0.0};
        for (int j = lo; j <= hi; ++j) {
            double w = 1.0;
            for (int k = lo; k <= hi; ++k) {
                if (k != j) {
                    w *= (u - k) / static_cast<double>(j - k);
                }
            }
            acc += w * sample(i + j);
        }
        return acc;
    }
};

struct GaussianSpec {
    double center = 0.0; // T_in
    double fwhm = 1.0;   // temporal intensity FWHM tau_G
};

// Probability mass of a normalized Gaussian intensity profile lying outside [lo, hi].
inline double gaussian_tail_mass(const GaussianSpec &spec, double lo, double hi)
{
    const double k = std::sqrt(4.0 * std::numbers::ln2) / spec.fwhm;
    return 0.5 * std::erfc(k * (spec.center - lo)) + 0.5 * std::erfc(k * (hi - spec.center));
}

inline constexpr double clip_tolerance = 1e-8;

inline WavePacket gaussian_packet(const TimeGrid &grid, const GaussianSpec &spec)
{
    require(spec.fwhm > 0.0, "Gaussian FWHM must be positive");
    const double lo = grid.time(0);
    const double hi = grid.time(grid.n_bins - 1);
    if (spec.center <= lo || spec.center >= hi || gaussian_tail_mass(spec, lo, hi) > clip_tolerance) {
        fail(ErrorKind::clipped_packet, "Gaussian packet is truncated by the grid edges");
    }
    WavePacket p(grid);
    // |amp|^2 = exp(-4 ln2 (t - T_in)^2 / tau^2) has intensity FWHM tau.
    const double c = 2.0 * std::numbers::ln2 / (spec.fwhm * spec.fwhm);
    for (std::size_t n = 0; n < grid.n_bins; ++n) {
        const double s = grid.time(n) - spec.center;
        p[n] = std::exp(-c * s * s);
    }
    const double scale = 1.0 / std::sqrt(p.norm());
    for (auto &z : p.amp) {
        z *= scale;
    }
    return p;
}

// Spectral intensity FWHM (angular frequency) of a transform-limited Gaussian.
inline double spectral_fwhm(const GaussianSpec &spec)
{
    require(spec.fwhm > 0.0, "Gaussian FWHM must be positive");
    return 4.0 * std::numbers::ln2 / spec.fwhm;
}

// Discrete inner product sum_n conj(p_n) q_n dt.
inline cplx overlap(const WavePacket &p, const WavePacket &q)
{
    require_same_grid(p.grid, q.grid);
    cplx s{0.0, 0.0};
    for (std::size_t n = 0; n < p.size(); ++n) {
        s += std::conj(p[n]) * q[n];
    }
    return s * p.grid.dt;
}

// Integer-bin delay with zero fill.
inline WavePacket shift(const WavePacket &p, double delay)
{
    const double bins = delay / p.grid.dt;
    const long long k = std::llround(bins);
    require(std::abs(bins - static_cast<double>(k)) < 1e-6, "delay must be a multiple of the bin width");
    WavePacket out(p.grid);
    const auto n = static_cast<long long>(p.size());
    double lost = 0.0;
    for (long long i = 0; i < n; ++i) {
        const long long j = i + k;
        if (j >= 0 && j < n) {
            out.amp[static_cast<std::size_t>(j)] = p.amp[static_cast<std::size_t>(i)];
        } else {
            lost += std::norm(p.amp[static_cast<std::size_t>(i)]);
        }
    }
    if (lost * p.grid.dt > clip_tolerance) {
        fail(ErrorKind::clipped_packet, "shifted packet leaves the grid");
    }
    return out;
}

// CSV layout: "# dt=<dt> N=<N> t0=<t0>", then "t,re,im", then one row per bin.
inline void write_csv(std::ostream &os, const WavePacket &p)
{
    os << std::setprecision(17);
    os << "# dt=" << p.grid.dt << " N=" << p.grid.n_bins << " t0=" << p.grid.t0 << "\n";
    os << "t,re,im\n";
    for (std::size_t n = 0; n < p.size(); ++n) {
        os << p.grid.time(n) << "," << p[n].real() << "," << p[n].imag() << "\n";
    }
}

inline WavePacket read_csv(std::istream &is)
{
    std::string line;
    TimeGrid grid;
    bool have_header = false;
    std::vector<cplx> amp;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                const auto eq = tok.find('=');
                if (eq == std::string::npos) {
                    continue;
                }
                const std::string key = tok.substr(0, eq);
                const std::string val = tok.substr(eq + 1);
                if (key == "dt") {
                    grid.dt = std::stod(val);
                } else if (key == "N") {
                    grid.n_bins = std::stoull(val);
                } else if (key == "t0") {
                    grid.t0 = std::stod(val);
                }
            }
            have_header = true;
            continue;
        }
        if (line.rfind("t,", 0) == 0) {
            continue;
        }
        std::istringstream ss(line);
        std::string t, re, im;
        std::getline(ss, t, ',');
        std::getline(ss, re, ',');
        std::getline(ss, im, ',');
        amp.emplace_back(std::stod(re), std::stod(im));
    }
    require(have_header, "wave packet CSV lacks the dt/N header row");
    require(amp.size() == grid.n_bins, "wave packet CSV row count does not match N");
    return WavePacket(grid, std::move(amp));
}

inline void save_csv(const std::string &path, const WavePacket &p)
{
    std::ofstream os(path);
    require(static_cast<bool>(os), "cannot open " + path);
    write_csv(os, p);
}

inline WavePacket load_csv(const std::string &path)
{
    std::ifstream is(path);
    require(static_cast<bool>(is), "cannot open " + path);
    return read_csv(is);
}

} // namespace cpgate
