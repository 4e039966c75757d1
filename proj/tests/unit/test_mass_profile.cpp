#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "arratia/mass_profile.hpp"

using namespace arratia;

namespace {

// cell average of u^2 over [a, b]
double square_average(double a, double b) { return (b * b * b - a * a * a) / (3.0 * (b - a)); }

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(StepProfile, RejectsBadInput) {
  EXPECT_THROW(StepProfile({0.0, 0.5, 0.5, 1.0}, {1, 2, 3}), ValidationError);
  EXPECT_THROW(StepProfile({0.1, 1.0}, {1}), ValidationError);
  EXPECT_THROW(StepProfile({0.0, 0.5, 1.0}, {2, 1}), ValidationError);
  EXPECT_THROW(StepProfile({0.0, 1.0}, {1, 2}), ValidationError);
  EXPECT_THROW(StepProfile({0.0, 1.0}, {NAN}), ValidationError);
}

TEST(Canonicalize, MergesEqualValues) {
  const StepProfile p({0.0, 0.3, 0.5, 1.0}, {1, 1, 2});
  const StepProfile c = canonicalize(p);
  EXPECT_EQ(vec(c.breakpoints()), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(vec(c.values()), (std::vector<double>{1.0, 2.0}));
  EXPECT_TRUE(c.is_canonical());
  EXPECT_DOUBLE_EQ(c.function().integral(), p.function().integral());
}

TEST(Canonicalize, IdentityCases) {
  const StepProfile strict({0.0, 0.2, 1.0}, {-1.0, 3.0});
  const StepProfile c = canonicalize(strict);
  EXPECT_EQ(vec(c.breakpoints()), vec(strict.breakpoints()));
  EXPECT_EQ(vec(c.values()), vec(strict.values()));
  const StepProfile single({0.0, 2.0}, {0.7});
  EXPECT_EQ(vec(canonicalize(single).values()), std::vector<double>{0.7});
  EXPECT_EQ(canonicalize(single).total_mass(), 2.0);
}

TEST(Canonicalize, TiesWithinTolerance) {
  const StepProfile p({0.0, 0.5, 1.0}, {1.0, 1.0 + 1e-13});
  EXPECT_FALSE(p.is_canonical());
  EXPECT_EQ(canonicalize(p).size(), 1u);
}

TEST(Increment, Examples) {
  const auto u = TabulatedProfile::uniform();
  EXPECT_NEAR(increment(u, 0.5, 0.1), 0.1, 1e-15);
  const StepProfile flat({0.0, 1.0}, {3.0});
  EXPECT_EQ(increment(flat, 0.2, 0.5), 0.0);
  EXPECT_EQ(increment(flat, 0.7, 0.5, Side::left), 0.0);
  const auto pw = TabulatedProfile::power(2.0, 0.5);
  EXPECT_NEAR(increment(pw, 0.5, 0.1), 0.01, 1e-15);
  EXPECT_NEAR(increment(u, 0.5, 0.2, Side::left), 0.2, 1e-15);
}

TEST(Increment, DomainErrors) {
  const auto u = TabulatedProfile::uniform();
  EXPECT_THROW(increment(u, 0.5, 0.6), DomainError);
  EXPECT_THROW(increment(u, 0.5, 0.0), DomainError);
  EXPECT_THROW(increment(u, 0.3, 0.4, Side::left), DomainError);
}

TEST(Increment, AdditiveAndNonNegative) {
  const auto g = TabulatedProfile::power(1.5, 0.4);
  for (double u : {0.05, 0.3, 0.41, 0.6}) {
    for (double r1 : {0.01, 0.1}) {
      for (double r2 : {0.02, 0.2}) {
        if (u + r1 + r2 >= 1.0) continue;
        EXPECT_GE(increment(g, u, r1), 0.0);
        EXPECT_NEAR(increment(g, u, r1) + increment(g, u + r1, r2), increment(g, u, r1 + r2), 1e-14);
      }
    }
  }
}

TEST(Dyadic, IdentityLevelOne) {
  const StepProfile d = dyadic_step_approximation(TabulatedProfile::uniform(), 1);
  EXPECT_EQ(vec(d.breakpoints()), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_NEAR(d.values()[0], 0.25, 1e-15);
  EXPECT_NEAR(d.values()[1], 0.75, 1e-15);
}

TEST(Dyadic, SquareLevelTwo) {
  const StepProfile d = dyadic_step_approximation(TabulatedProfile::power(2.0, 0.0), 2);
  const double expect[] = {1.0 / 48, 7.0 / 48, 19.0 / 48, 37.0 / 48};
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(d.values()[k], expect[k], 1e-15);
    EXPECT_NEAR(d.values()[k], square_average(k / 4.0, (k + 1) / 4.0), 1e-15);
  }
}

TEST(Dyadic, FixesCellMeasurableProfiles) {
  const auto g = TabulatedProfile::tabulated({0.0, 0.25, 0.5, 1.0}, {1.0, 2.0, 5.0, 5.0});
  const StepProfile d = dyadic_step_approximation(g, 4);
  for (double u : {0.0, 0.1, 0.26, 0.49, 0.5, 0.77, 0.99}) EXPECT_DOUBLE_EQ(d(u), g(u));
}

TEST(Dyadic, PreservesIntegralAndContracts) {
  const auto g = TabulatedProfile::power(0.7, 0.3, 2.0, 1.5);
  const double total = g.integral(0.0, 1.5);
  const double l2 = g.lp_norm(2.0);
  for (int n = 0; n <= 10; ++n) {
    const StepProfile d = dyadic_step_approximation(g, n);
    EXPECT_EQ(d.size(), std::size_t{1} << n);
    EXPECT_NEAR(d.function().integral(), total, 1e-12);
    EXPECT_LE(lp_norm(d, 2.0), l2 + 1e-12);
    for (std::size_t k = 1; k < d.size(); ++k) EXPECT_LE(d.values()[k - 1], d.values()[k]);
  }
}

TEST(Dyadic, LevelsNest) {
  const auto g = TabulatedProfile::power(2.0, 0.5);
  for (int n = 0; n < 8; ++n) {
    const auto coarse = partition_of(dyadic_step_approximation(g, n));
    const auto fine = partition_of(dyadic_step_approximation(g, n + 1));
    EXPECT_TRUE(partition_leq(fine, coarse)) << n;
  }
}

TEST(Dyadic, RejectsBadLevel) {
  EXPECT_THROW(dyadic_step_approximation(TabulatedProfile::uniform(), -1), DomainError);
  EXPECT_THROW(dyadic_step_approximation(TabulatedProfile::uniform(), 31), DomainError);
}

TEST(Partition, Counts) {
  EXPECT_EQ(partition_of(StepProfile::equal_pieces({1, 2, 3})).size(), 3u);
  EXPECT_EQ(partition_of(StepProfile::equal_pieces({4, 4, 4})).size(), 1u);
  EXPECT_EQ(partition_of(dyadic_step_approximation(TabulatedProfile::uniform(), 6)).size(), 64u);
}

TEST(Partition, Order) {
  const auto a = partition_of(StepProfile({0.0, 0.5, 1.0}, {0, 1}));
  const auto b = partition_of(StepProfile({0.0, 0.25, 1.0}, {0, 1}));
  EXPECT_TRUE(partition_leq(a, a));
  EXPECT_FALSE(partition_leq(a, b));
  const auto fine = partition_of(StepProfile({0.0, 0.2, 0.5, 1.0}, {0, 1, 2}));
  const auto merged = partition_of(StepProfile({0.0, 0.5, 1.0}, {0, 2}));
  EXPECT_TRUE(partition_leq(fine, merged));
  EXPECT_FALSE(partition_leq(merged, fine));
  const auto other_mass = partition_of(StepProfile({0.0, 2.0}, {0}));
  EXPECT_THROW(partition_leq(a, other_mass), ValidationError);
}

TEST(Cadlag, Modification) {
  const auto lin = TabulatedProfile::tabulated({0.0, 0.5, 1.0}, {0.0, 1.0, 3.0}, Interpolation::linear);
  const auto same = cadlag_modification(lin);
  for (double u : {0.0, 0.3, 0.5, 0.9}) EXPECT_EQ(same(u), lin(u));

  const auto left = TabulatedProfile::tabulated({0.0, 0.5, 1.0}, {0.0, 0.0, 1.0}, Interpolation::step_left);
  EXPECT_EQ(left(0.5), 0.0);
  const auto right = cadlag_modification(left);
  EXPECT_EQ(right.interpolation(), Interpolation::step_right);
  EXPECT_EQ(right(0.5), 1.0);
  EXPECT_EQ(right(0.25), left(0.25));
  EXPECT_EQ(right(0.75), left(0.75));
  const auto twice = cadlag_modification(right);
  for (double u : {0.0, 0.25, 0.5, 0.75, 1.0}) EXPECT_EQ(twice(u), right(u));
}

TEST(Project, Examples) {
  const StepFunction h = indicator(0.0, 0.25, 1.0);
  const StepProfile one({0.0, 1.0}, {0.0});
  const StepFunction c = project(one, h);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_DOUBLE_EQ(c.values()[0], 0.25);

  const StepProfile two = StepProfile::equal_pieces({0.0, 1.0});
  const StepFunction p = project(two, h);
  EXPECT_DOUBLE_EQ(p(0.1), 0.5);
  EXPECT_DOUBLE_EQ(p(0.7), 0.0);

  const StepFunction measurable({0.0, 0.5, 1.0}, {3.0, -1.0});
  const StepFunction q = project(two, measurable);
  EXPECT_DOUBLE_EQ(q(0.2), 3.0);
  EXPECT_DOUBLE_EQ(q(0.8), -1.0);
}

TEST(Project, IdempotentAndContracting) {
  const StepProfile f = dyadic_step_approximation(TabulatedProfile::power(2.0, 0.5), 3);
  const StepFunction h({0.0, 0.1, 0.33, 0.6, 1.0}, {1.0, -2.0, 0.5, 4.0});
  const StepFunction p1 = project(f, h);
  const StepFunction p2 = project(f, p1);
  for (double u = 0.0; u < 1.0; u += 0.01) EXPECT_NEAR(p1(u), p2(u), 1e-14);
  EXPECT_LE(lp_norm(p1, 2.0), lp_norm(h, 2.0));
  EXPECT_NEAR(p1.integral(), h.integral(), 1e-14);
}

TEST(LpNorm, Examples) {
  EXPECT_DOUBLE_EQ(lp_norm(StepProfile({0.0, 1.0}, {1.0}), 3.0), 1.0);
  EXPECT_NEAR(lp_norm(TabulatedProfile::uniform(), 2.0), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(lp_norm(StepProfile::equal_pieces({1.0, 3.0}), 2.0), std::sqrt(5.0), 1e-15);
  const auto lin = TabulatedProfile::tabulated({0.0, 1.0}, {-1.0, 1.0}, Interpolation::linear);
  EXPECT_NEAR(lin.lp_norm(2.0), std::sqrt(1.0 / 3.0), 1e-15);
  EXPECT_NEAR(TabulatedProfile::power(2.0, 0.5).lp_norm(1.0), 2.0 * std::pow(0.5, 3) / 3.0, 1e-15);
  EXPECT_THROW(lp_norm(StepProfile({0.0, 1.0}, {1.0}), 0.5), DomainError);
}

TEST(StepFunction, InnerAndIntegral) {
  const StepFunction a({0.0, 0.5, 1.0}, {1.0, 2.0});
  const StepFunction b({0.0, 0.25, 1.0}, {4.0, 0.0});
  EXPECT_DOUBLE_EQ(a.inner(b), 1.0);
  EXPECT_DOUBLE_EQ(a.integral(0.25, 0.75), 0.75);
  EXPECT_DOUBLE_EQ(a.integral(), 1.5);
}
