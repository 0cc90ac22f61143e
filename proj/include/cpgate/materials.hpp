#pragma once

// Physical nonlinear coupling rates, the loss-error coefficient and required
// intrinsic quality factors. Degenerate carriers: one wavelength and one
// refractive index per material. SI units throughout.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpgate/cavity.hpp"
#include "cpgate/errors.hpp"

namespace cpgate {

namespace si {
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double epsilon0 = 8.8541878128e-12;  // F / m
inline constexpr double c = 299792458.0;              // m / s
} // namespace si

struct MaterialSpec {
    std::string name;
    std::optional<double> chi2_suscept; // m / V
    std::optional<double> chi3_suscept; // m^2 / V^2
    double n = 1.0;
    double wavelength = 1550e-9; // m
    double v_norm = 1e-3;        // mode volume in (lambda / n)^3

    double omega() const { return 2.0 * std::numbers::pi * si::c / wavelength; }
    double mode_volume() const { return v_norm * std::pow(wavelength / n, 3); }

    void validate(Order k) const
    {
        require(n > 0.0 && wavelength > 0.0 && v_norm > 0.0, "material needs positive n, wavelength and mode volume");
        if (k == Order::chi2) {
            require(chi2_suscept && *chi2_suscept > 0.0, "material " + name + " has no chi(2) susceptibility");
        } else {
            require(chi3_suscept && *chi3_suscept > 0.0, "material " + name + " has no chi(3) susceptibility");
        }
    }
};

inline void from_json(const nlohmann::json &j, MaterialSpec &m)
{
    m.name = j.value("name", std::string{});
    if (j.contains("chi2")) {
        m.chi2_suscept = j.at("chi2").get<double>();
    }
    if (j.contains("chi3")) {
        m.chi3_suscept = j.at("chi3").get<double>();
    }
    j.at("n").get_to(m.n);
    j.at("wavelength").get_to(m.wavelength);
    m.v_norm = j.value("v_norm", 1e-3);
}

inline void to_json(nlohmann::json &j, const MaterialSpec &m)
{
    j = nlohmann::json{{"name", m.name}, {"n", m.n}, {"wavelength", m.wavelength}, {"v_norm", m.v_norm}};
    if (m.chi2_suscept) {
        j["chi2"] = *m.chi2_suscept;
    }
    if (m.chi3_suscept) {
        j["chi3"] = *m.chi3_suscept;
    }
}

// Nonlinear coupling rate chi_k in rad/s.
//   k = 2: sqrt(hbar w / eps0) (w / n^3) chi2 / sqrt(V_m)
//   k = 3: (3/2) hbar w^2 / (n^4 eps0) chi3 / V_m
inline double coupling_rate(const MaterialSpec &m, Order k)
{
    m.validate(k);
    const double w = m.omega();
    if (k == Order::chi2) {
        return std::sqrt(si::hbar * w / si::epsilon0) * (w / std::pow(m.n, 3)) * *m.chi2_suscept /
               std::sqrt(m.mode_volume());
    }
    return 1.5 * si::hbar * w * w / (std::pow(m.n, 4) * si::epsilon0) * *m.chi3_suscept / m.mode_volume();
}

// Coefficient in 1 - F11 = coef sqrt(V~) / Q_L (k = 2) or coef V~ / Q_L (k = 3),
// from 1 - F11 = C_k gamma_L / chi_k with gamma_L = w / Q_L. Independent of v_norm.
inline double error_coefficient(const MaterialSpec &m, Order k, double C_k)
{
    MaterialSpec unit = m;
    unit.v_norm = 1.0;
    return C_k * unit.omega() / coupling_rate(unit, k);
}

// Q_L reaching `target_error`; a conditional target divides the coefficient
// by `conditional_factor`.
inline double required_Q(double coef, double v_norm, Order k, double target_error, double conditional_factor = 1.0)
{
    require(target_error > 0.0 && target_error < 1.0, "target error must lie in (0, 1)");
    require(v_norm > 0.0 && conditional_factor > 0.0, "mode volume and conditional factor must be positive");
    const double vol = k == Order::chi2 ? std::sqrt(v_norm) : v_norm;
    return coef / conditional_factor * vol / target_error;
}

// Loss rate gamma_L = w / Q_L.
inline double loss_rate(const MaterialSpec &m, double Q_L) { return m.omega() / Q_L; }

struct MaterialEntry {
    MaterialSpec spec;
    Order order;
};

inline std::vector<MaterialEntry> builtin_materials()
{
    MaterialSpec ln{"LiNbO3", 54e-12, std::nullopt, 2.1, 1550e-9, 1e-3};
    MaterialSpec gaas{"GaAs", 270e-12, std::nullopt, 3.5, 3100e-9, 1e-3};
    MaterialSpec si_{"Si", std::nullopt, 1.8e-19, 3.4, 1550e-9, 1e-3};
    return {{ln, Order::chi2}, {gaas, Order::chi2}, {si_, Order::chi3}};
}

// Published slope constants and conditional ratios.
inline constexpr double slope_C2 = 5.5;
inline constexpr double slope_C3 = 18.7;
inline constexpr double conditional_ratio2 = 5.1;
inline constexpr double conditional_ratio3 = 3.0;

inline double slope_constant(Order k) { return k == Order::chi2 ? slope_C2 : slope_C3; }
inline double conditional_ratio(Order k) { return k == Order::chi2 ? conditional_ratio2 : conditional_ratio3; }

struct MaterialRow {
    std::string name;
    int order = 2;
    double chi_rate = 0.0; // at the material's own v_norm
    double coefficient = 0.0;
    double q_small = 0.0;  // conditional 1% at V~ = 1e-3
    double q_large = 0.0;  // conditional 1% at V~ = 0.5
};

inline MaterialRow material_row(const MaterialEntry &e, double C_k, double cond_ratio, double target = 0.01)
{
    MaterialRow r;
    r.name = e.spec.name;
    r.order = as_int(e.order);
    r.chi_rate = coupling_rate(e.spec, e.order);
    r.coefficient = error_coefficient(e.spec, e.order, C_k);
    r.q_small = required_Q(r.coefficient, 1e-3, e.order, target, cond_ratio);
    r.q_large = required_Q(r.coefficient, 0.5, e.order, target, cond_ratio);
    return r;
}

} // namespace cpgate
