#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cpgate/wavepacket.hpp"

using namespace cpgate;

TEST(TimeGrid, BinCountCoversDuration)
{
    const TimeGrid g = make_grid(1.0, 0.01);
    EXPECT_EQ(g.n_bins, 100u);
    EXPECT_DOUBLE_EQ(g.time(50), 0.5);
    EXPECT_THROW(make_grid(1.0, 0.0), Error);
    EXPECT_THROW(make_grid(0.01, 0.01), Error);
}

TEST(Gaussian, NormalizedWithRequestedFwhm)
{
    const TimeGrid g = make_grid(12.0, 0.01);
    const GaussianSpec s{6.0, 1.0};
    const WavePacket p = gaussian_packet(g, s);
    EXPECT_NEAR(p.norm(), 1.0, 1e-12);
    const double peak = std::norm(p[g.index_of(6.0)]);
    EXPECT_NEAR(std::norm(p[g.index_of(6.5)]) / peak, 0.5, 1e-9);
    EXPECT_NEAR(spectral_fwhm(s), 4.0 * std::log(2.0), 1e-15);
}

TEST(Gaussian, ClippedPacketThrows)
{
    const TimeGrid g = make_grid(4.0, 0.01);
    try {
        gaussian_packet(g, GaussianSpec{1.0, 1.0});
        FAIL() << "expected a clipped packet";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::clipped_packet);
    }
}

TEST(WavePacket, ShiftPreservesNormAndOverlap)
{
    const TimeGrid g = make_grid(30.0, 0.01);
    const WavePacket p = gaussian_packet(g, GaussianSpec{5.0, 1.0});
    const WavePacket q = shift(p, 14.4);
    EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(overlap(q, gaussian_packet(g, GaussianSpec{19.4, 1.0}))), 1.0, 1e-12);
}

TEST(WavePacket, CsvRoundTripIsExact)
{
    const TimeGrid g = make_grid(10.0, 0.02);
    WavePacket p = gaussian_packet(g, GaussianSpec{5.0, 1.3});
    for (std::size_t n = 0; n < p.size(); ++n) {
        p[n] *= std::polar(1.0, 0.1 * static_cast<double>(n));
    }
    std::stringstream ss;
    write_csv(ss, p);
    const WavePacket q = read_csv(ss);
    ASSERT_EQ(q.grid, p.grid);
    for (std::size_t n = 0; n < p.size(); ++n) {
        EXPECT_EQ(p[n], q[n]);
    }
}
