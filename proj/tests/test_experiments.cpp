#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpgate/experiments.hpp"

using namespace cpgate;
namespace fs = std::filesystem;

namespace {

SweepConfig parse(const std::string &text)
{
    std::istringstream is(text);
    return parse_config(is);
}

std::string slurp(const fs::path &p)
{
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

fs::path scratch(const std::string &name)
{
    const fs::path d = fs::temp_directory_path() / ("cpgate_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(Config, ParsesListsCommentsAndMaterials)
{
    const SweepConfig c = parse("# sweep\n"
                                "k = 2, 3\n"
                                "dt_over_tau = 0.005   # fine\n"
                                "gamma_ratios = 6, 30\n"
                                "loss_ratios = 0, 1e-5\n"
                                "t_ratios = 10, 14.4\n"
                                "eta_policy = optimize\n"
                                "kappa_xpm = 1.5\n"
                                "material = AlN, 2, 1e-12, 2.1, 1550e-9\n");
    EXPECT_EQ(c.orders, (std::vector<int>{2, 3}));
    EXPECT_EQ(c.dt_over_tau, 0.005);
    EXPECT_EQ(c.loss_ratios, (std::vector<double>{0.0, 1e-5}));
    EXPECT_EQ(c.eta_policy, EtaPolicy::optimize);
    EXPECT_EQ(c.kappa_xpm, 1.5);
    ASSERT_EQ(c.materials.size(), 1u);
    EXPECT_EQ(c.materials[0].spec.name, "AlN");
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsBadInput)
{
    EXPECT_THROW(parse("bogus = 1\n"), Error);
    EXPECT_THROW(parse("k = 4\n").validate(), Error);
    EXPECT_THROW(parse("gamma_ratios = 1,,2\n"), Error);
    EXPECT_THROW(parse("t_ratios = 10\nt_ratios = 12\n"), Error);
    EXPECT_THROW(parse("dt_over_tau = 0.05\n").validate(), Error);
    EXPECT_THROW(parse("t_ratios = 10.005\n").validate(), Error);
    EXPECT_THROW(parse("gamma_ratios = \n"), Error);
    EXPECT_THROW(parse("calibrate = none\n").validate(), Error);
}

TEST(Output, ParameterHashIsFnv1a)
{
    EXPECT_EQ(param_hash(""), "cbf29ce484222325");
    EXPECT_EQ(param_hash("abc"), "e71fa2190541574b");
    EXPECT_EQ(fmt(0.1), "0.1");
    EXPECT_EQ(fmt(1e-6), "1e-06");
}

TEST(Output, ManifestReportsKappa)
{
    SweepConfig c;
    c.kappa_xpm = 1.25;
    const auto j = manifest("gate-sweep", c);
    EXPECT_EQ(j.at("kappa_xpm").get<double>(), 1.25);
    EXPECT_EQ(j.at("config").at("kappa_xpm").get<double>(), 1.25);
}

TEST(Sweep, ResumedRunIsByteIdentical)
{
    SweepConfig c = parse("k = 2\ndt_over_tau = 0.02\ngamma_ratios = 4, 6, 10\nt_ratios = 8\n");
    const fs::path a = scratch("fresh"), b = scratch("resumed");
    c.output = a.string();
    ASSERT_EQ(cmd_f1_sweep(c), 0);
    const std::string fresh = slurp(a / "f1_sweep.csv");

    c.output = b.string();
    ASSERT_EQ(cmd_f1_sweep(c), 0);
    // Drop the last completed row and shuffle the rest, as an interrupted run would.
    std::istringstream is(slurp(b / "f1_sweep.csv"));
    std::string header, r1, r2;
    std::getline(is, header);
    std::getline(is, r1);
    std::getline(is, r2);
    {
        std::ofstream os(b / "f1_sweep.csv");
        os << header << "\n" << r2 << "\n" << r1 << "\n";
    }
    ASSERT_EQ(cmd_f1_sweep(c), 0);
    EXPECT_EQ(slurp(b / "f1_sweep.csv"), fresh);
    const auto m = nlohmann::json::parse(slurp(b / "manifest_f1_sweep.json"));
    EXPECT_EQ(m.at("resumed_rows").get<int>(), 2);
}

TEST(Sweep, WorkerCountDoesNotChangeOutput)
{
    SweepConfig c = parse("k = 2\ndt_over_tau = 0.02\ngamma_ratios = 4, 6, 10\nt_ratios = 8\n");
    const fs::path a = scratch("w1"), b = scratch("w3");
    c.output = a.string();
    ASSERT_EQ(cmd_f1_sweep(c), 0);
    c.output = b.string();
    c.workers = 3;
    ASSERT_EQ(cmd_f1_sweep(c), 0);
    EXPECT_EQ(slurp(a / "f1_sweep.csv"), slurp(b / "f1_sweep.csv"));
}

TEST(Sweep, CurveMinimumRefinesInLogT)
{
    // err = a / T^2 + b T has its minimum at T* = (2a / b)^(1/3).
    const double a = 2.0, b = 1e-4;
    std::vector<CurvePoint> c;
    for (double T = 8.0; T < 200.0; T *= 1.25) {
        c.push_back({T, a / (T * T) + b * T, 0.2 * (a / (T * T) + b * T), 1.0 / T});
    }
    const OptimumPoint o = curve_minimum(c, 1e-5);
    EXPECT_NEAR(o.t_opt / std::cbrt(2.0 * a / b), 1.0, 0.02);
    EXPECT_NEAR(o.error / (3.0 * std::pow(a * b * b / 4.0, 1.0 / 3.0)), 1.0, 0.01);
    EXPECT_NEAR(o.chi * o.t_opt, 1.0, 0.02);
}

TEST(Cli, ExitCodes)
{
    const fs::path d = scratch("cli");
    const std::string cli = CPGATE_CLI;
    EXPECT_EQ(std::system((cli + " --out " + d.string() + " materials > /dev/null 2>&1").c_str()), 0);
    EXPECT_TRUE(fs::exists(d / "materials.csv"));
    EXPECT_TRUE(fs::exists(d / "manifest_materials.json"));
    const int bad = std::system((cli + " --dt-over-tau 0.1 --out " + d.string() + " materials > /dev/null 2>&1").c_str());
    EXPECT_EQ(WEXITSTATUS(bad), 2);
    const fs::path conf = d / "check.conf";
    std::ofstream(conf) << "check = true\n";
    const int chk = std::system(
        (cli + " --config " + conf.string() + " --out " + d.string() + " materials > /dev/null 2>&1").c_str());
    // The rounded GaAs cell at V~ = 0.5 misses the 10% window.
    EXPECT_EQ(WEXITSTATUS(chk), 3);
    const int none = std::system((cli + " > /dev/null 2>&1").c_str());
    EXPECT_EQ(WEXITSTATUS(none), 2);
}
