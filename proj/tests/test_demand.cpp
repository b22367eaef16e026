#include <gtest/gtest.h>

#include <random>

#include "seirl/demand.hpp"

using namespace seirl;

namespace {

// Each day observes a pass rate mu_i in {1..10} for one 60-step slot.
DemandDraws synthetic_days(double lambda, double sigma, int days, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(1, 10);
  DemandDraws d;
  d.exposure = 60.0;
  for (int i = 0; i < days; ++i) {
    const int mu = pick(rng);
    const auto passes = static_cast<std::int64_t>(mu * d.exposure);
    const double rho = pickup_probability(lambda, sigma, mu);
    d.flow.push_back(passes);
    d.rides.push_back(std::binomial_distribution<std::int64_t>(passes, rho)(rng));
  }
  return d;
}

}  // namespace

TEST(Demand, PickupProbabilityExamples) {
  EXPECT_EQ(pickup_probability(0.0, 0.1, 1.0), 0.0);
  // Monte Carlo oracle: fraction of nonempty Poisson(0.1 / 1.1) queues.
  EXPECT_NEAR(pickup_probability(0.1, 0.1, 1.0), 0.086894, 1e-5);
  EXPECT_NEAR(pickup_probability(0.1, 0.1, 2.0), 0.04650305, 1e-8);
  double prev = 1.0;
  for (double mu : {1.0, 10.0, 1e3, 1e6}) {
    const double r = pickup_probability(0.5, 0.1, mu);
    EXPECT_LT(r, prev);
    prev = r;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Demand, DegenerateQueue) {
  EXPECT_THROW(pickup_probability(0.1, 0.0, 0.0), DegenerateError);
  EXPECT_EQ(pickup_probability(0.0, 0.0, 0.0), 0.0);
  EXPECT_THROW(pickup_probability(-1.0, 0.1, 1.0), ValidationError);
}

TEST(Demand, ExpectedRides) {
  EXPECT_DOUBLE_EQ(expected_rides(2.0, 0.1), 0.2);
  EXPECT_EQ(expected_rides(0.0, 0.7), 0.0);
  double prev = 0.0;
  for (int i = 0; i <= 10000; ++i) {
    const double mu = i * 0.01;
    const double m = expected_rides(mu, pickup_probability(0.2, 0.05, mu));
    EXPECT_GE(m, prev - 1e-15);
    EXPECT_LE(m, 0.2);
    prev = m;
  }
}

TEST(Demand, AllZeroRidesHitsBoundary) {
  DemandDraws d;
  d.flow = {3, 5, 7, 2};
  d.rides = {0, 0, 0, 0};
  const auto p = fit_demand_params(d);
  EXPECT_EQ(p.lambda, 0.0);
  EXPECT_TRUE(p.flags & kFitBoundary);
}

TEST(Demand, RecoversGeneratingLambda) {
  const auto d = synthetic_days(0.2, 0.05, 200, 42);
  const auto p = fit_demand_params(d);
  EXPECT_NEAR(p.lambda, 0.2, 0.02);
  EXPECT_GE(p.loglik, demand_loglik(d, 0.2, 0.05) - 1e-6);
  EXPECT_EQ(p.flags & kFitUnidentifiable, 0u);
}

TEST(Demand, RecoveryAcrossSeeds) {
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = fit_demand_params(synthetic_days(0.3, 0.5, 200, seed));
    within += std::abs(p.lambda - 0.3) <= 0.03;
  }
  EXPECT_GE(within, 18);
}

TEST(Demand, ConstantFlowIsUnidentifiable) {
  DemandDraws d;
  d.flow.assign(50, 4);
  d.rides.assign(50, 1);
  EXPECT_TRUE(fit_demand_params(d).flags & kFitUnidentifiable);
}

TEST(Demand, RejectsRidesAboveFlow) {
  DemandDraws d;
  d.flow = {1, 2};
  d.rides = {2, 0};
  EXPECT_THROW(fit_demand_params(d), ValidationError);
}
