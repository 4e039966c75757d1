#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "arratia/verify.hpp"

using namespace arratia;

namespace {

// Standard normal CDF by erfc, independent of the library helpers.
double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

MonteCarlo mc(std::size_t n, double dt, std::uint64_t seed = 1) {
  MonteCarlo m;
  m.run.replicates = n;
  m.run.seed = seed;
  m.run.threads = 1;
  m.stepper.dt = dt;
  m.stepper.record_events = false;
  return m;
}

}  // namespace

TEST(TwoParticleOracle, ReferenceValues) {
  const auto o = two_particle_oracle({0.5, 0.5, 0.1, 0.0}, 0.01);
  EXPECT_NEAR(o.merge_probability, 2.0 * Phi(-0.5), 1e-14);
  EXPECT_NEAR(o.merge_probability, 0.61708, 5e-6);
  EXPECT_NEAR(o.mean_mass, 0.80854, 5e-6);
  EXPECT_EQ(o.mean_position, 0.0);
}

TEST(TwoParticleOracle, Limits) {
  const auto far = two_particle_oracle({0.5, 1.5, INFINITY, 0.0}, 1.0);
  EXPECT_EQ(far.merge_probability, 0.0);
  EXPECT_EQ(far.mean_mass, 0.5);
  const auto late = two_particle_oracle({0.5, 1.5, 0.1, 0.0}, 1e12);
  EXPECT_NEAR(late.merge_probability, 1.0, 1e-6);
  EXPECT_NEAR(late.mean_mass, 2.0, 1e-6);
  EXPECT_THROW(two_particle_oracle({0.5, 0.5, 0.1, 0.0}, 0.0), DomainError);
  EXPECT_THROW(two_particle_oracle({0.0, 0.5, 0.1, 0.0}, 1.0), ConfigError);
}

TEST(TwoParticleOracle, Monotone) {
  const TwoParticleSpec s{0.3, 0.7, 0.2, 0.0};
  double prev = 0.0;
  for (double t = 1e-4; t < 10.0; t *= 2.0) {
    const auto o = two_particle_oracle(s, t);
    EXPECT_GE(o.merge_probability, prev);
    EXPECT_GE(o.mean_mass, s.m1);
    EXPECT_LE(o.mean_mass, s.m1 + s.m2);
    prev = o.merge_probability;
  }
  double p_prev = 1.0;
  for (double gap = 0.01; gap < 2.0; gap *= 1.5) {
    const double p = two_particle_oracle({0.3, 0.7, gap, 0.0}, 0.05).merge_probability;
    EXPECT_LE(p, p_prev);
    p_prev = p;
  }
}

TEST(TwoParticleQv, ClosedFormIntegral) {
  const TwoParticleSpec s{0.5, 0.5, 0.1, 0.0};
  // midpoint rule on a fine grid as an independent oracle
  const double t = 0.01;
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) * t / n;
    const double p = 2.0 * Phi(-0.1 / std::sqrt(4.0 * u));
    sum += (1.0 - p) / 0.5 + p / 1.0;
  }
  EXPECT_NEAR(two_particle_qv(s, t), sum * t / n, 1e-9);
}

TEST(CheckTwoParticle, CoarseRunPasses) {
  const auto rep = check_two_particle({0.5, 0.5, 0.1, 0.0}, 0.01, mc(4000, 1e-4));
  EXPECT_EQ(rep.verdict, Verdict::pass) << rep.metrics[0].value;
  EXPECT_EQ(rep.replicates, 4000u);
}

TEST(MassBound, ReferenceBounds) {
  const double G = increment(TabulatedProfile::uniform(), 0.5, 0.1);
  EXPECT_NEAR(mass_bound_cdf_form(G, 0.1, 0.01), 2.0 * (Phi(std::sqrt(0.1) * 0.1 / 0.1) - 0.5), 1e-14);
  EXPECT_NEAR(mass_bound_cdf_form(G, 0.1, 0.01), 0.24817, 5e-6);
  EXPECT_NEAR(mass_bound_linear_form(G, 0.1, 0.01), 0.25231, 5e-6);
  EXPECT_LT(mass_bound_cdf_form(G, 0.1, 0.01), mass_bound_linear_form(G, 0.1, 0.01));
}

TEST(MassBound, FlatWindowIsExactZero) {
  const auto g = StepProfile::equal_pieces({0.0, 1.0, 1.0, 2.0});
  const auto rep = check_mass_bound(0.3, 0.01, 0.4, g, mc(300, 1e-4));
  ASSERT_EQ(rep.metrics.size(), 1u);
  EXPECT_EQ(rep.metrics[0].name, "count_below_r");
  EXPECT_EQ(rep.metrics[0].value, 0.0);
  EXPECT_EQ(rep.verdict, Verdict::pass);
}

TEST(MassBound, UniformPasses) {
  const auto g = dyadic_step_approximation(TabulatedProfile::uniform(), 6);
  const auto rep = check_mass_bound(0.5, 0.01, 0.1, g, mc(500, 1e-5));
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_NE(rep.metric("p_below_r_linear_bound"), nullptr);
  EXPECT_THROW(check_mass_bound(0.5, 0.01, 0.6, g, mc(10, 1e-4)), DomainError);
}

TEST(VerdictLogic, FailOnlyWhenIntervalExcludesTarget) {
  EXPECT_EQ(band_verdict(0.5, 0.4, 0.6, 0.45, 0.55), Verdict::pass);
  EXPECT_EQ(band_verdict(0.7, 0.5, 0.9, 0.45, 0.55), Verdict::inconclusive);
  EXPECT_EQ(band_verdict(0.7, 0.6, 0.8, 0.45, 0.55), Verdict::fail);
  EXPECT_EQ(overlap_verdict(0, 1, 1, 2), Verdict::pass);
  EXPECT_EQ(overlap_verdict(0, 1, 1.1, 2), Verdict::fail);
  VerificationReport r;
  r.metrics.push_back({"a", 0, 0, 0, 0, 0, Verdict::pass, ""});
  r.metrics.push_back({"b", 0, 0, 0, 0, 0, Verdict::inconclusive, ""});
  r.finalize();
  EXPECT_EQ(r.verdict, Verdict::inconclusive);
  r.metrics.push_back({"c", 0, 0, 0, 0, 0, Verdict::fail, ""});
  r.finalize();
  EXPECT_EQ(r.verdict, Verdict::fail);
}

TEST(InverseMassIntegral, SingleClusterConstant) {
  const auto rep = check_inverse_mass_integral(StepProfile({0.0, 2.0}, {0.0}), 0.5, {0.001, 0.01, 0.1},
                                               mc(50, 1e-3));
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_THROW(check_inverse_mass_integral(StepProfile({0.0, 1.0}, {0.0}), 1.5, {0.1}, mc(10, 1e-3)), ConfigError);
  EXPECT_THROW(check_inverse_mass_integral(StepProfile({0.0, 1.0}, {0.0}), 1.2, {0.1}, mc(10, 1e-3), 2.0),
               ConfigError);
}

TEST(MomentGrowth, ZeroTimeAndPureDiffusion) {
  const auto g = StepProfile::equal_pieces({0.0, 10.0, 20.0, 30.0});
  auto times = geometric_grid_between(1e-4, 1e-2, 0.7);
  times.insert(times.begin(), 0.0);
  const auto rep = check_moment_growth(g, 0.5, times, mc(1000, 1e-5));
  EXPECT_EQ(rep.metric("value_at_t=0")->verdict, Verdict::pass);
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_THROW(check_moment_growth(g, 1.0, times, mc(10, 1e-5)), ConfigError);
}

TEST(Qv, SingleClusterBothSidesTOverB) {
  MonteCarlo m = mc(3000, 1e-3);
  m.stepper.save_times = geometric_grid(0.1, 0.7, 20);
  QvOptions o;
  o.compare_times = {0.1};
  const auto rep = check_qv_identity(0.5, StepProfile({0.0, 1.0}, {0.0}), m, o);
  EXPECT_EQ(rep.verdict, Verdict::pass);
  // right-hand side is deterministic for a lone cluster
  const auto* qv = rep.metric("E(X-g)^2@t=" + std::to_string(0.1));
  ASSERT_NE(qv, nullptr);
  EXPECT_NEAR(qv->target_lo, 0.1, 1e-3);
  EXPECT_NEAR(qv->target_hi, 0.1, 1e-3);
}

TEST(Qv, TwoParticleClosedForm) {
  const TwoParticleSpec tp{0.5, 0.5, 0.1, 0.0};
  MonteCarlo m = mc(3000, 1e-5);
  m.stepper.save_times = geometric_grid(0.01, 0.7, 8);
  QvOptions o;
  o.compare_times = m.stepper.save_times;
  o.closed_form = tp;
  const auto rep = check_qv_identity(0.25, tp.profile(), m, o);
  EXPECT_EQ(rep.verdict, Verdict::pass);
}

TEST(Martingale, PassesAndDriftFails) {
  const auto g = dyadic_step_approximation(TabulatedProfile::uniform(), 4);
  MonteCarlo m = mc(1000, 1e-4);
  const auto ok = check_martingale({0.3, 0.7}, {{0.01, 0.05}}, g, m);
  EXPECT_EQ(ok.verdict, Verdict::pass);
  m.stepper.drift = 2.0;
  const auto bad = check_martingale({0.3, 0.7}, {{0.01, 0.05}}, g, m);
  EXPECT_EQ(bad.verdict, Verdict::fail);
}

TEST(CenterOfMass, VarianceTOverB) {
  const auto rep = check_center_of_mass(dyadic_step_approximation(TabulatedProfile::power(1.5, 0.3, 1.0, 2.0), 5),
                                        0.1, mc(2000, 1e-3));
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_NEAR(rep.metric("variance")->target_lo, 0.05, 1e-15);
}

TEST(Exponent, HypothesesNotMet) {
  const auto rep = check_mass_exponent(StepProfile({0.0, 1.0}, {0.0}), 1.0, 0.5, {0.001, 0.01}, mc(10, 1e-4));
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  ASSERT_FALSE(rep.notes.empty());
  EXPECT_NE(rep.notes[0].find("hypotheses not met"), std::string::npos);
  EXPECT_THROW(check_mass_exponent(TabulatedProfile::power(0.5, 0.5), 6, 0.5, {0.01}, mc(10, 1e-4)), ConfigError);
}

TEST(Exponent, SingleClusterDisplacementHalf) {
  const auto rep = check_displacement_exponent(StepProfile({0.0, 1.0}, {0.0}), 1.0, 0.5,
                                               geometric_grid_between(1e-4, 1e-2, 0.7), mc(4000, 1e-5),
                                               ExponentTarget{0.5, 0.02});
  EXPECT_EQ(rep.verdict, Verdict::pass);
}

TEST(Rescaling, UnitRhoIsTrivial) {
  RescalingOptions o;
  o.rho = 1.0;
  o.level = 6;
  o.times = {1e-3, 2e-3, 5e-3};
  const auto rep = check_rescaling(o, mc(300, 1e-5));
  EXPECT_EQ(rep.metric("mass_identity_max_rel_error")->verdict, Verdict::pass);
  EXPECT_NE(rep.verdict, Verdict::fail);
}

TEST(Dyadic, StepInputGivesZeroDifferences) {
  const auto g = TabulatedProfile::tabulated({0.0, 0.25, 0.5, 1.0}, {0.0, 1.0, 2.0, 2.0});
  std::vector<ConvergenceRow> rows;
  const auto rep = check_dyadic_convergence(g, {3, 4, 5}, 0.6, 0.01, mc(200, 1e-4), &rows);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].value.size(); ++k) EXPECT_EQ(rows[i].value[k], rows[0].value[k]);
  }
  EXPECT_EQ(rep.verdict, Verdict::pass);
  EXPECT_THROW(check_dyadic_convergence(g, {3}, 0.6, 0.01, mc(10, 1e-4)), ConfigError);
}

TEST(Dyadic, TimeZeroIsDeterministic) {
  std::vector<ConvergenceRow> rows;
  check_dyadic_convergence(TabulatedProfile::uniform(), {2, 3, 4}, 0.3, 0.0, mc(10, 1e-4), &rows);
  // mass of the level-n cell containing 0.3 is 2^-n
  EXPECT_EQ(rows[0].value[0], 0.25);
  EXPECT_EQ(rows[1].value[0], 0.125);
  EXPECT_EQ(rows[2].value[0], 0.0625);
}

TEST(Lil, SingleClusterHypothesesNotMet) {
  const auto rep = check_lil_pathwise(StepProfile({0.0, 1.0}, {0.0}), 1.0, LilOptions{}, mc(10, 1e-5));
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  EXPECT_NE(rep.notes.back().find("hypotheses not met"), std::string::npos);
}

TEST(Lil, DiffusiveNormalizationRejected) {
  LilOptions o;
  o.normalization_exponent = 0.5;
  const auto rep = check_lil_pathwise(dyadic_step_approximation(TabulatedProfile::uniform(), 10), 1.0, o,
                                      mc(400, 2e-6, 5));
  EXPECT_EQ(rep.verdict, Verdict::fail);
  const Metric* upper = rep.metric("fraction_upper_ratio_decreasing");
  ASSERT_NE(upper, nullptr);
  EXPECT_EQ(upper->verdict, Verdict::fail);
}

TEST(Qv, IntegrationGridRefinedNearZero) {
  const auto save = geometric_grid(0.01, 0.7, 8);
  const auto grid = detail::qv_grid(save, save);
  for (double t : save) EXPECT_NO_THROW(detail::time_index(grid, t));
  EXPECT_LT(grid.front(), 1e-3 * save.front() / 0.7);
  EXPECT_EQ(grid.back(), 0.01);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GT(grid[i], grid[i - 1]);
}
