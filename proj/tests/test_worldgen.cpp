#include <gtest/gtest.h>

#include "seirl/demand.hpp"
#include "seirl/worldgen.hpp"

using namespace seirl;

TEST(Worldgen, GridTopology) {
  WorldSpec spec;
  spec.topology = "grid";
  spec.rows = spec.cols = 10;
  spec.contexts = 1;
  spec.fleet_size = 300.0;
  spec.profile_feature = false;
  const auto w = generate_world(spec);
  EXPECT_EQ(w.network.num_nodes(), 100u);
  EXPECT_TRUE(validate_strong_connectivity(w.network).strongly_connected);
  // Turn-type features are one-hot.
  const auto& names = w.network.feature_names();
  for (std::size_t e = 0; e < w.network.num_edges(); ++e) {
    double turns = 0.0;
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j].rfind("turn_", 0) == 0) turns += w.network.features(static_cast<EdgeId>(e))[j];
    EXPECT_EQ(turns, 1.0);
  }
}

TEST(Worldgen, SameSeedSameWorld) {
  WorldSpec spec;
  spec.num_nodes = 120;
  spec.contexts = 2;
  spec.fleet_size = 480.0;
  const auto a = generate_world(spec);
  const auto b = generate_world(spec);
  const auto fa = a.network.feature_matrix();
  const auto fb = b.network.feature_matrix();
  EXPECT_TRUE(std::equal(fa.begin(), fa.end(), fb.begin(), fb.end()));
  for (std::size_t c = 0; c < a.contexts.size(); ++c) {
    EXPECT_EQ(a.contexts[c].lambda, b.contexts[c].lambda);
    EXPECT_EQ(a.contexts[c].mean_ride_time, b.contexts[c].mean_ride_time);
  }
  spec.seed += 1;
  const auto c = generate_world(spec);
  EXPECT_NE(c.contexts[0].lambda, a.contexts[0].lambda);
}

TEST(Worldgen, ZeroDriftSharesLambda) {
  WorldSpec spec;
  spec.num_nodes = 100;
  spec.contexts = 3;
  spec.drift = 0.0;
  spec.fleet_size = 400.0;
  spec.profile_feature = false;
  const auto w = generate_world(spec);
  EXPECT_EQ(w.contexts[0].lambda, w.contexts[1].lambda);
  EXPECT_EQ(w.contexts[0].lambda, w.contexts[2].lambda);
  spec.drift = 0.1;
  const auto d = generate_world(spec);
  EXPECT_NE(d.contexts[0].lambda, d.contexts[1].lambda);
}

TEST(Worldgen, ThetaStarPositiveAndRejectsBadSpecs) {
  const auto w = generate_world([] {
    WorldSpec s;
    s.num_nodes = 60;
    s.contexts = 1;
    s.fleet_size = 240.0;
    return s;
  }());
  double sum = 0.0;
  for (double v : w.theta_star) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_GT(sum, 0.0);
  WorldSpec bad;
  bad.topology = "grid";
  bad.rows = 1;
  bad.cols = 1;
  EXPECT_THROW(generate_world(bad), ValidationError);
  WorldSpec neg;
  neg.theta_star = {{"travel_time", -1.0}};
  EXPECT_THROW(generate_world(neg), ValidationError);
}

TEST(Worldgen, ExpertDrawsConvergeAndAreConsistent) {
  WorldSpec spec;
  spec.num_nodes = 100;
  spec.contexts = 1;
  spec.fleet_size = 400.0;
  const auto w = generate_world(spec);
  ExpertOptions eo;
  eo.n_days = 500;
  const auto ex = generate_expert(w.network, w.contexts, w.theta_star, eo);
  const auto& truth = ex.truth[0].flow.mu_action;
  const auto& mean = ex.expert[0].mu_E;
  double diff = 0.0, mass = 0.0;
  for (std::size_t e = 0; e < truth.size(); ++e) diff += std::abs(mean[e] - truth[e]), mass += truth[e];
  EXPECT_LT(diff / mass, 0.03);
  EXPECT_LT(self_consistency_gap(w.network, ex.truth[0]), 1e-3);

  for (const auto& d : ex.draws[0].nodes)
    for (std::size_t i = 0; i < d.flow.size(); ++i) ASSERT_LE(d.rides[i], d.flow[i]);
}

// Demand is identifiable when road flow dominates the dropout rate and each
// road sees enough passes; this world is built for that.
TEST(Worldgen, DemandRecoveredFromExpertDraws) {
  WorldSpec spec;
  spec.num_nodes = 100;
  spec.contexts = 1;
  spec.fleet_size = 1500.0;
  spec.sigma_min = 0.05;
  spec.sigma_max = 0.2;
  const auto w = generate_world(spec);
  ExpertOptions eo;
  eo.n_days = 200;
  const auto ex = generate_expert(w.network, w.contexts, w.theta_star, eo);
  const auto& cd = ex.draws[0];
  int varied = 0, recovered = 0;
  for (std::size_t s = 0; s < cd.nodes.size(); ++s) {
    const auto p = fit_demand_params(cd.nodes[s]);
    if (p.flags & (kFitUnidentifiable | kFitInsufficientData)) continue;
    ++varied;
    recovered += std::abs(p.lambda - w.contexts[0].lambda[s]) <= 0.1 * w.contexts[0].lambda[s];
  }
  ASSERT_GT(varied, 50);
  EXPECT_GE(recovered, 0.9 * varied);
}
