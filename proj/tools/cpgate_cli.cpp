// Command-line runner for the experiment subcommands.

#include <exception>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cpgate/experiments.hpp"

namespace {

constexpr int exit_validation = 2;

struct Overrides {
    std::string config;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::optional<double> dt_over_tau;
    std::optional<double> kappa_xpm;

    cpgate::SweepConfig load() const
    {
        cpgate::SweepConfig c = config.empty() ? cpgate::SweepConfig{} : cpgate::load_config(config);
        if (out) {
            c.output = *out;
        }
        if (workers) {
            c.workers = *workers;
        }
        if (dt_over_tau) {
            c.dt_over_tau = *dt_over_tau;
        }
        if (kappa_xpm) {
            c.kappa_xpm = *kappa_xpm;
        }
        return c;
    }
};

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Controlled-phase gate simulations in dynamically coupled cavities"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--out", o.out, "output directory");
    app.add_option("--workers", o.workers, "worker threads");
    app.add_option("--dt-over-tau", o.dt_over_tau, "time step in units of the packet FWHM");
    app.add_option("--kappa-xpm", o.kappa_xpm, "cross-phase modulation factor (chi3)");

    using Cmd = std::function<int(const cpgate::SweepConfig &)>;
    Cmd run;
    auto add = [&](const char *name, const char *help, Cmd f) {
        app.add_subcommand(name, help)->callback([&run, f] { run = f; });
    };
    add("absorb", "absorption control pulses, traces and spectra", cpgate::cmd_absorb);
    add("f1-sweep", "single-photon fidelity versus gamma and loss", cpgate::cmd_f1_sweep);
    add("gate-sweep", "calibrated two-photon gate sweep with scaling fits", cpgate::cmd_gate_sweep);
    add("materials", "coupling rates and required quality factors", cpgate::cmd_materials);
    add("oracle-check", "sector propagator against the dense reference", cpgate::cmd_oracle_check);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_validation;
    }
    try {
        const int rc = run(o.load());
        if (rc != 0) {
            std::cerr << "acceptance checks failed; see the manifest in the output directory\n";
        }
        return rc;
    } catch (const cpgate::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
        case cpgate::ErrorKind::invalid_argument:
        case cpgate::ErrorKind::clipped_packet:
        case cpgate::ErrorKind::infeasible_eta: return exit_validation;
        default: return 1;
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
