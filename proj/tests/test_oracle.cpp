#include <gtest/gtest.h>

#include "cpgate/oracle.hpp"

using namespace cpgate;

namespace {

const OracleCase &find(const std::vector<OracleCase> &cs, const std::string &name)
{
    for (const auto &c : cs) {
        if (c.name == name) {
            return c;
        }
    }
    throw std::runtime_error("no oracle case " + name);
}

} // namespace

TEST(Oracle, AllCasesWithinBoundAt48Bins)
{
    for (const auto &c : default_oracle_cases(48)) {
        const OracleReport r = run_oracle_case(c);
        EXPECT_TRUE(r.pass()) << c.name << ": " << r.max_diff << " > " << r.bound;
    }
}

TEST(Oracle, DiscrepancyIsFirstOrder)
{
    const auto cs = default_oracle_cases(48);
    for (const char *name : {"k2_n1", "k2_n2", "k3_n1", "k3_n2", "k2_n0"}) {
        const double ratio = oracle_halving_ratio(find(cs, name));
        EXPECT_GT(ratio, 0.3) << name;
        EXPECT_LT(ratio, 0.7) << name;
    }
}

TEST(Oracle, LossySecondHarmonicMode)
{
    for (double lc : {1.0, 2.0}) {
        for (const char *name : {"k2_n0", "k2_n2"}) {
            OracleCase c = find(default_oracle_cases(48), name);
            c.gamma_loss = 0.5;
            c.loss_c_factor = lc;
            const OracleReport r = run_oracle_case(c);
            EXPECT_TRUE(r.pass()) << name << " lc=" << lc << ": " << r.max_diff << " > " << r.bound;
            const double ratio = oracle_halving_ratio(c);
            EXPECT_GT(ratio, 0.3) << name << " lc=" << lc;
            EXPECT_LT(ratio, 0.7) << name << " lc=" << lc;
        }
    }
}

TEST(Oracle, VacuumStaysExact)
{
    const auto cs = default_oracle_cases(24);
    EXPECT_EQ(run_oracle_case(find(cs, "k2_vacuum")).max_diff, 0.0);
    EXPECT_EQ(run_oracle_case(find(cs, "k3_vacuum")).max_diff, 0.0);
}

// Reference-chain values frozen from the dense collision model at 24 bins.
TEST(Oracle, FrozenReferenceValues)
{
    const auto cs = default_oracle_cases(24);
    EXPECT_NEAR(run_oracle_case(find(cs, "k2_n1")).F_ref, 0.110548071488, 1e-10);
    EXPECT_NEAR(run_oracle_case(find(cs, "k2_n2")).F_ref, 0.0120577984756, 1e-11);
    EXPECT_NEAR(run_oracle_case(find(cs, "k3_n1")).F_ref, 0.416141775655, 1e-10);
    EXPECT_NEAR(run_oracle_case(find(cs, "k3_n2")).F_ref, 0.195402321537, 1e-10);
    // Propagator side of the same comparisons.
    EXPECT_NEAR(run_oracle_case(find(cs, "k2_n1")).F_prop, 0.108597568559, 1e-10);
    EXPECT_NEAR(run_oracle_case(find(cs, "k3_n2")).F_prop, 0.140796800542, 1e-10);
}
