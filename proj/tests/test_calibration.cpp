#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "cpgate/calibration.hpp"

using namespace cpgate;

TEST(Calibration, Seeds)
{
    EXPECT_DOUBLE_EQ(chi3_seed(10.0), 2.0 * std::numbers::pi / 10.0);
    EXPECT_DOUBLE_EQ(chi2_seed(10.0), std::numbers::pi / (std::numbers::sqrt2 * 10.0));
}

TEST(Calibration, StorageOnlyRecoversAnalyticRates)
{
    for (int k : {2, 3}) {
        CavityConfig cfg;
        cfg.order = order_from_int(k);
        for (double T : {8.0, 14.4, 30.0}) {
            const CalibrationResult r = calibrate_storage_only(cfg, T, 0.01);
            const double seed = k == 3 ? chi3_seed(T) : chi2_seed(T);
            EXPECT_NEAR(r.chi, seed, 1e-6 * seed) << "k=" << k << " T=" << T;
            EXPECT_LT(std::abs(r.residual), calibration_tolerance);
        }
    }
}

TEST(Calibration, KeyAndJsonRoundTrip)
{
    const CalibrationKey key{3, 30.0, 14.4, 1e-5, 2.0};
    EXPECT_EQ(key.str(), "k=3;g=30;T=14.4;gl=1e-05;kx=2");
    CalibrationResult r;
    r.chi = 0.43;
    r.seed = 0.42;
    r.residual = 1e-9;
    r.F11 = 0.99;
    r.leftover_c = 1e-7;
    r.evaluations = 9;
    const nlohmann::json j = r;
    const auto back = j.get<CalibrationResult>();
    EXPECT_EQ(back.chi, r.chi);
    EXPECT_EQ(back.evaluations, r.evaluations);
}

TEST(Calibration, CachePersistsSorted)
{
    const auto dir = std::filesystem::temp_directory_path() / "cpgate_cache_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "cache.json").string();
    std::filesystem::remove(path);
    CalibrationResult r;
    r.chi = 1.5;
    {
        CalibrationCache c(path);
        c.insert({3, 30.0, 20.0, 0.0, 2.0}, r);
        c.insert({2, 6.0, 10.0, 0.0, 2.0}, r);
        c.save();
    }
    CalibrationCache c(path);
    EXPECT_EQ(c.size(), 2u);
    ASSERT_TRUE(c.find({3, 30.0, 20.0, 0.0, 2.0}).has_value());
    EXPECT_EQ(c.find({3, 30.0, 20.0, 0.0, 2.0})->chi, 1.5);
    EXPECT_FALSE(c.find({3, 30.0, 20.0, 0.0, 1.0}).has_value());
}

TEST(Calibration, StorageDelayForFixedChi)
{
    GateSpec s;
    s.cavity.order = Order::chi3;
    s.cavity.gamma = 30.0 * 4.0 * std::numbers::ln2;
    s.cavity.chi = chi3_seed(12.0);
    const DelayCalibration d = calibrate_t_store(s);
    EXPECT_NEAR(d.t_store, 12.0, 1.5);
    EXPECT_LT(std::abs(d.residual), 0.05);
}
