#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "arratia/flow_sim.hpp"

using namespace arratia;

namespace {

StepperConfig config(double dt, std::vector<double> times) {
  StepperConfig c;
  c.dt = dt;
  c.save_times = std::move(times);
  return c;
}

double weighted_mean(const std::vector<Cluster>& cs) {
  double m = 0, x = 0;
  for (const auto& c : cs) {
    m += c.mass;
    x += c.mass * c.position;
  }
  return x / m;
}

}  // namespace

TEST(InitState, Examples) {
  const auto two = init_state(StepProfile::equal_pieces({0.25, 0.75}));
  ASSERT_EQ(cluster_count(two), 2u);
  EXPECT_EQ(two.clusters[0].position, 0.25);
  EXPECT_EQ(two.clusters[1].position, 0.75);
  EXPECT_EQ(two.clusters[0].mass, 0.5);
  EXPECT_EQ(two.time, 0.0);

  const auto one = init_state(StepProfile({0.0, 3.0}, {1.0}));
  ASSERT_EQ(cluster_count(one), 1u);
  EXPECT_EQ(one.clusters[0].mass, 3.0);

  std::vector<double> v(64);
  for (int k = 0; k < 64; ++k) v[k] = k;
  const auto many = init_state(StepProfile::equal_pieces(v));
  EXPECT_EQ(cluster_count(many), 64u);
  EXPECT_EQ(check_invariants(many), "");
  EXPECT_NEAR(inverse_mass_integral(many, 1.0), 64.0, 1e-12);

  EXPECT_THROW(init_state(StepProfile::equal_pieces({1.0, 1.0})), ValidationError);
}

TEST(Resolve, Examples) {
  auto r = resolve_coalescence({{0.2, 0.5, 0, 0}, {0.1, 0.5, 1, 1}});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_NEAR(r[0].position, 0.15, 1e-15);
  EXPECT_EQ(r[0].mass, 1.0);

  const std::vector<Cluster> sorted{{0.0, 1, 0, 0}, {1.0, 1, 1, 1}, {2.0, 1, 2, 2}};
  const auto same = resolve_coalescence(sorted);
  ASSERT_EQ(same.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(same[i].position, sorted[i].position);

  const auto pav = resolve_coalescence({{3.0, 1, 0, 0}, {1.0, 1, 1, 1}, {2.0, 2, 2, 2}});
  ASSERT_EQ(pav.size(), 1u);
  EXPECT_EQ(pav[0].position, 2.0);
  EXPECT_EQ(pav[0].mass, 4.0);
  EXPECT_EQ(pav[0].lo, 0u);
  EXPECT_EQ(pav[0].hi, 2u);
}

TEST(Resolve, PreservesCenterOfMassAndContiguity) {
  GaussianStream rng({9, 0, 0});
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Cluster> cs;
    for (std::size_t k = 0; k < 20; ++k) cs.push_back({rng(), 0.1 + std::abs(rng()), k, k});
    const double before = weighted_mean(cs);
    const auto out = resolve_coalescence(cs);
    EXPECT_NEAR(weighted_mean(out), before, 1e-13);
    for (std::size_t i = 1; i < out.size(); ++i) {
      EXPECT_GT(out[i].position, out[i - 1].position);
      EXPECT_EQ(out[i].lo, out[i - 1].hi + 1);
    }
    EXPECT_EQ(out.front().lo, 0u);
    EXPECT_EQ(out.back().hi, 19u);
  }
}

TEST(MassAt, Queries) {
  auto s = init_state(StepProfile({0.0, 0.3, 1.0}, {0.0, 1.0}));
  EXPECT_EQ(mass_at(s, 0.1), 0.3);
  EXPECT_EQ(mass_at(s, 0.3), 0.7);
  EXPECT_EQ(position_at(s, 0.5), 1.0);
  EXPECT_THROW(mass_at(s, 0.0), DomainError);
  EXPECT_THROW(mass_at(s, 1.0), DomainError);
  s.clusters = resolve_coalescence({{0.5, 0.3, 0, 0}, {0.5, 0.7, 1, 1}});
  EXPECT_EQ(mass_at(s, 0.1), 1.0);
  EXPECT_EQ(mass_at(s, 0.9), 1.0);
  EXPECT_EQ(cluster_count(s), 1u);
  EXPECT_NEAR(inverse_mass_integral(s, 1.0), 1.0, 1e-15);
}

TEST(Advance, TinyStepLeavesStateNearlyUnchanged) {
  const auto s0 = init_state(StepProfile::equal_pieces({0.0, 1.0, 2.0}));
  GaussianStream rng({1, 0, 0});
  const auto s1 = advance(s0, 1e-30, rng, StepperConfig{});
  ASSERT_EQ(cluster_count(s1), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s1.clusters[i].position, s0.clusters[i].position, 1e-13);
  EXPECT_THROW(advance(s0, 0.0, rng, StepperConfig{}), DomainError);
}

TEST(Advance, SingleClusterIncrementVariance) {
  const double M = 2.0, dt = 1e-3;
  auto s = init_state(StepProfile({0.0, M}, {0.0}));
  GaussianStream rng({77, 0, 0});
  Stepper st(StepperConfig{});
  const int n = 1000000;
  double sum = 0, sum2 = 0, prev = 0;
  for (int i = 0; i < n; ++i) {
    st.advance(s, dt, rng);
    const double d = s.clusters[0].position - prev;
    prev = s.clusters[0].position;
    sum += d;
    sum2 += d * d;
  }
  const double var = (sum2 - sum * sum / n) / (n - 1);
  const boost::math::chi_squared_distribution<double> chi(n - 1.0);
  const double target = dt / M;
  EXPECT_GT(var, target * boost::math::quantile(chi, 0.0005) / (n - 1.0));
  EXPECT_LT(var, target * boost::math::quantile(chi, 0.9995) / (n - 1.0));
  EXPECT_NEAR(var / target, 1.0, 0.005);
}

TEST(Advance, CrossingPairMerges) {
  // at dt = 1 the pair 1e-6 apart merges almost surely (order violation or bridge)
  auto s = init_state(StepProfile::equal_pieces({0.0, 1e-6}));
  GaussianStream rng({3, 0, 0});
  Stepper st(StepperConfig{});
  st.advance(s, 1.0, rng);
  EXPECT_EQ(cluster_count(s), 1u);
  EXPECT_EQ(s.clusters[0].mass, 1.0);
}

TEST(Bridge, CrossingProbability) {
  EXPECT_DOUBLE_EQ(bridge_crossing_probability(0.1, 0.2, 4.0, 0.01), std::exp(-2.0 * 0.02 / 0.04));
  EXPECT_EQ(bridge_crossing_probability(0.0, 0.2, 4.0, 0.01), 1.0);
}

TEST(Simulate, Determinism) {
  const auto g = StepProfile::equal_pieces({0.0, 0.01, 0.02, 0.05, 0.1, 0.2});
  const auto c = config(1e-4, {0.01, 0.05, 0.1});
  const auto a = simulate(g, c, {5, 3, 0});
  const auto b = simulate(g, c, {5, 3, 0});
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t j = 0; j < a.snapshots.size(); ++j) {
    ASSERT_EQ(a.snapshots[j].clusters.size(), b.snapshots[j].clusters.size());
    for (std::size_t i = 0; i < a.snapshots[j].clusters.size(); ++i) {
      EXPECT_EQ(a.snapshots[j].clusters[i].position, b.snapshots[j].clusters[i].position);
    }
  }
  const auto other = simulate(g, c, {5, 4, 0});
  EXPECT_NE(other.snapshots[0].clusters[0].position, a.snapshots[0].clusters[0].position);
}

TEST(Simulate, InvariantsAlongTrajectory) {
  std::vector<double> v(128);
  for (int k = 0; k < 128; ++k) v[k] = std::pow(k / 128.0, 2.0);
  const auto g = StepProfile::equal_pieces(v);
  const auto tr = simulate(canonicalize(g), config(1e-5, uniform_grid(0.02, 40)), {11, 0, 0});
  std::size_t prev = 1000;
  for (const auto& s : tr.snapshots) {
    EXPECT_EQ(check_invariants(s), "");
    EXPECT_LE(cluster_count(s), prev);
    prev = cluster_count(s);
    EXPECT_NEAR(inverse_mass_integral(s, 1.0), static_cast<double>(cluster_count(s)), 1e-9);
  }
  for (double u : {0.1, 0.5, 0.9}) {
    double m = 0;
    for (const auto& s : tr.snapshots) {
      EXPECT_GE(mass_at(s, u), m);
      m = mass_at(s, u);
    }
  }
}

TEST(Simulate, SingleClusterIsBrownian) {
  const auto g = StepProfile({0.0, 2.0}, {0.0});
  const auto c = config(1e-3, {0.5});
  double s2 = 0;
  const int n = 20000;
  for (int r = 0; r < n; ++r) {
    const double x = simulate(g, c, {1, static_cast<std::uint64_t>(r), 0}).snapshots[0].clusters[0].position;
    s2 += x * x;
  }
  // E x^2 = t / b = 0.25, se = 0.25 * sqrt(2/n)
  EXPECT_NEAR(s2 / n, 0.25, 4.0 * 0.25 * std::sqrt(2.0 / n));
}

TEST(Simulate, RejectsBadConfig) {
  const auto g = StepProfile({0.0, 1.0}, {0.0});
  EXPECT_THROW(simulate(g, config(0.0, {1.0}), {}), ConfigError);
  EXPECT_THROW(simulate(g, config(1e-3, {}), {}), ConfigError);
  EXPECT_THROW(simulate(g, config(1e-3, {0.2, 0.1}), {}), ConfigError);
}

TEST(Simulate, ZeroSaveTimeIsInitialState) {
  const auto g = StepProfile::equal_pieces({0.0, 1.0});
  const auto tr = simulate(g, config(1e-3, {0.0, 0.1}), {1, 0, 0});
  EXPECT_EQ(tr.snapshots[0].clusters.size(), 2u);
  EXPECT_EQ(tr.snapshots[0].clusters[1].position, 1.0);
}

TEST(Grid, Geometric) {
  const auto g = geometric_grid(1e-2, 0.7, 5);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_EQ(g.back(), 1e-2);
  EXPECT_NEAR(g[3], 7e-3, 1e-15);
  const auto between = geometric_grid_between(1e-4, 1e-2, 0.7);
  EXPECT_GE(between.front(), 1e-4);
  EXPECT_LT(between.front() * 0.7, 1e-4);
  EXPECT_EQ(between.size(), 13u);
}

TEST(Rescale, IdentityAndMassIdentity) {
  const auto g = dyadic_step_approximation(TabulatedProfile::power(1.0, 0.5), 6);
  const auto c = config(1e-5, {1e-4, 2e-4, 1e-3});
  const auto tr = simulate(g, c, {1, 0, 0});
  const auto id = rescale_view(tr, {1.0, 0.0, 1.0});
  for (std::size_t j = 0; j < tr.snapshots.size(); ++j) {
    for (std::size_t i = 0; i < tr.snapshots[j].clusters.size(); ++i) {
      EXPECT_EQ(id.snapshots[j].clusters[i].position, tr.snapshots[j].clusters[i].position);
      EXPECT_EQ(id.snapshots[j].clusters[i].mass, tr.snapshots[j].clusters[i].mass);
    }
  }
  const RescaleParams p{0.5, -0.5, 1.0};
  const auto view = rescale_view(tr, p, std::vector<double>{2e-4 / 0.125, 1e-3 / 0.125});
  for (std::size_t j = 0; j < view.snapshots.size(); ++j) {
    const auto& src = tr.at(view.save_times[j] * 0.125);
    for (double u = -0.95; u < 0.95; u += 0.05) {
      EXPECT_NEAR(mass_at(view.snapshots[j], u), mass_at(src, u * 0.5 + 0.5) / 0.5, 1e-15);
      EXPECT_NEAR(position_at(view.snapshots[j], u), position_at(src, u * 0.5 + 0.5) * 2.0, 1e-15);
    }
  }
  EXPECT_THROW(rescale_view(tr, p, std::vector<double>{3e-4}), RangeError);
}

TEST(Rescale, Composition) {
  const auto g = dyadic_step_approximation(TabulatedProfile::uniform(), 5);
  const double r1 = 0.5, r2 = 0.8;
  const double g1 = std::pow(r1, 3.0), g2 = std::pow(r2, 3.0);
  const double t = 1e-3;
  const auto tr = simulate(g, config(1e-5, {t * g1 * g2}), {2, 0, 0});
  const auto once = rescale_view(rescale_view(tr, {r1, 0.0, 1.0}), {r2, 0.0, 1.0});
  const auto direct = rescale_view(tr, {r1 * r2, 0.0, 1.0});
  ASSERT_EQ(once.snapshots[0].clusters.size(), direct.snapshots[0].clusters.size());
  for (std::size_t i = 0; i < once.snapshots[0].clusters.size(); ++i) {
    EXPECT_NEAR(once.snapshots[0].clusters[i].position, direct.snapshots[0].clusters[i].position, 1e-12);
    EXPECT_NEAR(once.snapshots[0].clusters[i].mass, direct.snapshots[0].clusters[i].mass, 1e-12);
  }
  EXPECT_NEAR(once.snapshots[0].time, direct.snapshots[0].time, 1e-15);
  for (std::size_t k = 0; k < once.breakpoints->size(); ++k) {
    EXPECT_NEAR((*once.breakpoints)[k], (*direct.breakpoints)[k], 1e-12);
  }
}

TEST(Rescale, ParamValidation) {
  EXPECT_THROW((RescaleParams{0.0, 0.0, 1.0}).validate(), ConfigError);
  EXPECT_THROW((RescaleParams{1.5, 0.0, 1.0}).validate(), ConfigError);
  EXPECT_THROW((RescaleParams{0.5, 0.0, 0.5}).validate(), ConfigError);
  EXPECT_EQ((RescaleParams{0.5, 0.0, 1.5}).gamma() - 2 * 1.5, 1.0);
}

TEST(Trajectory, AtThrowsOffGrid) {
  const auto tr = simulate(StepProfile({0.0, 1.0}, {0.0}), config(1e-3, {0.1}), {});
  EXPECT_NO_THROW(tr.at(0.1));
  EXPECT_THROW(tr.at(0.2), RangeError);
}
