#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "arratia/rng.hpp"

using namespace arratia;
using detail::Philox4x32;

TEST(Philox, KnownAnswers) {
  EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
            (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(GaussianStream, SameKeySameSequence) {
  GaussianStream a({42, 7, 3});
  GaussianStream b({42, 7, 3});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(GaussianStream, DistinctKeysDiffer) {
  GaussianStream a({42, 7, 3});
  GaussianStream b({42, 8, 3});
  GaussianStream c({42, 7, 4});
  GaussianStream d({43, 7, 3});
  const double x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(GaussianStream, ReplicateStreamsUncorrelated) {
  GaussianStream a({1, 0, 0});
  GaussianStream b({1, 1, 0});
  const int n = 100000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a(), y = b();
    sa += x;
    sb += y;
    saa += x * x;
    sbb += y * y;
    sab += x * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(corr), 0.02);
}

TEST(GaussianStream, MeanAndVariance) {
  GaussianStream g({2024, 0, 0});
  const int n = 1000000;
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g();
    s += x;
    ss += x * x;
  }
  EXPECT_LT(std::abs(s / n), 0.004);
  EXPECT_NEAR(ss / n, 1.0, 0.006);
}

TEST(PhiloxStream, UniformRange) {
  PhiloxStream p({5, 0, 0});
  for (int i = 0; i < 10000; ++i) {
    const double u = p.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = p.uniform_open0();
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(PhiloxStream, RejectsWideIds) {
  EXPECT_THROW(PhiloxStream({0, std::uint64_t{1} << 32, 0}), ConfigError);
  EXPECT_THROW(PhiloxStream({0, 0, std::uint64_t{1} << 32}), ConfigError);
}
