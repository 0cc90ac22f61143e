#pragma once

// Cavity parameters and the classical coupling schedule between modes a and b.

#include <cmath>
#include <complex>
#include <vector>

#include "cpgate/errors.hpp"
#include "cpgate/wavepacket.hpp"

namespace cpgate {

enum class Order { chi2 = 2, chi3 = 3 };

inline int as_int(Order k) { return static_cast<int>(k); }

inline Order order_from_int(int k)
{
    require(k == 2 || k == 3, "nonlinearity order must be 2 or 3");
    return k == 2 ? Order::chi2 : Order::chi3;
}

struct CavityConfig {
    double gamma = 1.0;      // waveguide coupling of mode a
    double gamma_loss = 0.0; // intrinsic loss of every cavity mode
    Order order = Order::chi2;
    double chi = 0.0;        // chi_2 or chi_3 depending on order
    double kappa_xpm = 2.0;  // control-induced XPM per unit |Lambda| (chi3 only)
    double loss_c_factor = 1.0; // loss of the second-harmonic mode c in units of gamma_L

    double chi2() const { return order == Order::chi2 ? chi : 0.0; }
    double chi3() const { return order == Order::chi3 ? chi : 0.0; }
    double xpm() const { return order == Order::chi3 ? kappa_xpm : 0.0; }

    void validate() const
    {
        require(gamma > 0.0 && std::isfinite(gamma), "gamma must be positive");
        require(gamma_loss >= 0.0 && std::isfinite(gamma_loss), "gamma_L must be non-negative");
        require(chi >= 0.0 && std::isfinite(chi), "nonlinear rate must be non-negative");
        require(kappa_xpm >= 0.0 && std::isfinite(kappa_xpm), "kappa_xpm must be non-negative");
        require(loss_c_factor >= 0.0 && std::isfinite(loss_c_factor), "loss_c_factor must be non-negative");
    }
};

// Per-bin coefficients of the linear Hamiltonian.
struct BinControl {
    cplx lambda{0.0, 0.0};
    double delta_a = 0.0;
    double delta_b = 0.0;
};

inline BinControl control_for(const CavityConfig &cfg, cplx lambda)
{
    const double d = cfg.xpm() * std::abs(lambda);
    return BinControl{lambda, d, d};
}

struct ControlSchedule {
    TimeGrid grid;
    std::vector<cplx> lambda;
    std::vector<double> delta_a;
    std::vector<double> delta_b;

    ControlSchedule() = default;
    explicit ControlSchedule(TimeGrid g)
        : grid(g), lambda(g.n_bins, cplx{0.0, 0.0}), delta_a(g.n_bins, 0.0), delta_b(g.n_bins, 0.0)
    {}

    std::size_t size() const { return lambda.size(); }

    BinControl bin(std::size_t n) const { return BinControl{lambda[n], delta_a[n], delta_b[n]}; }

    void set(std::size_t n, const BinControl &c)
    {
        lambda[n] = c.lambda;
        delta_a[n] = c.delta_a;
        delta_b[n] = c.delta_b;
    }

    // Rotates every coupling by exp(i theta); detunings depend on |Lambda| only.
    void rotate(double theta)
    {
        const cplx ph = std::polar(1.0, theta);
        for (auto &l : lambda) {
            l *= ph;
        }
    }

    double max_abs_lambda() const
    {
        double m = 0.0;
        for (auto l : lambda) {
            m = std::max(m, std::abs(l));
        }
        return m;
    }
};

// Overlays the nonzero bins of `part` onto `base`.
inline void overlay(ControlSchedule &base, const ControlSchedule &part, std::size_t from, std::size_t to)
{
    require_same_grid(base.grid, part.grid);
    for (std::size_t n = from; n < to && n < base.size(); ++n) {
        base.set(n, part.bin(n));
    }
}

inline void write_csv(std::ostream &os, const ControlSchedule &s)
{
    os << std::setprecision(17);
    os << "# dt=" << s.grid.dt << " N=" << s.grid.n_bins << " t0=" << s.grid.t0 << "\n";
    os << "t,re_lambda,im_lambda,delta_a,delta_b\n";
    for (std::size_t n = 0; n < s.size(); ++n) {
        os << s.grid.time(n) << "," << s.lambda[n].real() << "," << s.lambda[n].imag() << ","
           << s.delta_a[n] << "," << s.delta_b[n] << "\n";
    }
}

inline ControlSchedule read_schedule_csv(std::istream &is)
{
    std::string line;
    TimeGrid grid;
    bool have_header = false;
    std::vector<BinControl> rows;
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
                const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
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
        std::string f[5];
        for (auto &x : f) {
            std::getline(ss, x, ',');
        }
        rows.push_back(BinControl{cplx(std::stod(f[1]), std::stod(f[2])), std::stod(f[3]), std::stod(f[4])});
    }
    require(have_header && rows.size() == grid.n_bins, "malformed schedule CSV");
    ControlSchedule s(grid);
    for (std::size_t n = 0; n < rows.size(); ++n) {
        s.set(n, rows[n]);
    }
    return s;
}

} // namespace cpgate
