#include <gtest/gtest.h>

#include <numeric>

#include "seirl/evalkit.hpp"
#include "seirl/worldgen.hpp"

using namespace seirl;

namespace {

World small_world(int nodes = 150, int contexts = 1) {
  WorldSpec spec;
  spec.num_nodes = nodes;
  spec.contexts = contexts;
  spec.fleet_size = 4.0 * nodes;
  return generate_world(spec);
}

}  // namespace

TEST(Mdr, Examples) {
  const std::vector<double> a{2.0, 0.0}, b{1.0, 1.0}, l{1.0, 1.0}, z{0.0, 0.0};
  EXPECT_EQ(mdr(a, a, l), 0.0);
  EXPECT_EQ(mdr(a, z, l), 1.0);
  EXPECT_DOUBLE_EQ(mdr(a, b, l), 1.0);
  EXPECT_DOUBLE_EQ(mdr(b, a, std::vector<double>{3.0, 1.0}), (3.0 + 1.0) / 4.0);
  EXPECT_THROW(mdr(z, a, l), DegenerateError);
  EXPECT_THROW(mdr(a, std::vector<double>{1.0}, l), ValidationError);
}

TEST(Baselines, TrExpert) {
  const RoadNetwork net({{10.0}, {10.0}},
                        {{0, 1, 1, {}}, {0, 0, 1, {}}, {1, 0, 1, {}}, {1, 1, 1, {}}, {1, 1, 2, {}}}, {});
  const auto pol = baseline_tr_expert(net, std::vector<double>{3.0, 1.0, 0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(pol.prob[0], 0.75);
  EXPECT_DOUBLE_EQ(pol.prob[1], 0.25);
  for (int e = 2; e < 5; ++e) EXPECT_DOUBLE_EQ(pol.prob[static_cast<std::size_t>(e)], 1.0 / 3.0);
}

TEST(Baselines, OptCoincidesWithSeOptAtItsOwnFlow) {
  const auto w = small_world();
  const auto& net = w.network;
  const auto& ctx = w.contexts[0];
  const auto se = baseline_se_opt(net, ctx);
  const auto opt = baseline_opt(net, ctx, se.flow.mu_action);
  for (std::size_t s = 0; s < net.num_nodes(); ++s) {
    double row = 0.0;
    for (EdgeId e : net.out_edges(static_cast<NodeId>(s))) {
      const auto i = static_cast<std::size_t>(e);
      row += opt.prob[i];
      EXPECT_NEAR(opt.prob[i], se.policy.prob[i], 5e-3);
    }
    EXPECT_NEAR(row, 1.0, 1e-9);
  }
}

TEST(Baselines, SeOptIsAnEquilibrium) {
  const auto w = small_world();
  const auto& net = w.network;
  const auto se = baseline_se_opt(net, w.contexts[0]);
  EXPECT_LT(self_consistency_gap(net, se), 1e-3);
  double rides = 0.0;
  for (std::size_t e = 0; e < net.num_edges(); ++e) rides += se.flow.rho[e] * se.flow.mu_action[e];
  const double inj = std::accumulate(se.flow.mu0.begin(), se.flow.mu0.end(), 0.0);
  EXPECT_LT(std::abs(rides - inj) / inj, 1e-6);
  const auto again = baseline_se_opt(net, w.contexts[0]);
  EXPECT_EQ(again.policy.prob, se.policy.prob);
}

TEST(Perturbations, DisableRegion) {
  const auto w = small_world(80);
  const auto& ctx = w.contexts[0];
  const auto same = perturb_disable_region(ctx, {});
  EXPECT_EQ(same.lambda, ctx.lambda);

  const auto region = region_around(w.network, 5, 0.1);
  EXPECT_EQ(region.size(), 8u);
  EXPECT_NE(std::find(region.begin(), region.end(), 5), region.end());
  const auto cut = perturb_disable_region(ctx, region);
  double removed = 0.0;
  for (NodeId s : region) removed += ctx.lambda[static_cast<std::size_t>(s)];
  const double before = std::accumulate(ctx.lambda.begin(), ctx.lambda.end(), 0.0);
  const double after = std::accumulate(cut.lambda.begin(), cut.lambda.end(), 0.0);
  EXPECT_NEAR(before - after, removed, 1e-12);

  std::vector<NodeId> all(w.network.num_nodes());
  std::iota(all.begin(), all.end(), 0);
  const auto dead = perturb_disable_region(ctx, all);
  EXPECT_THROW(solve_equilibrium(w.network, dead, reward_spec(w.network, w.theta_star, false)), ConvergenceError);
}

TEST(Perturbations, DataLoss) {
  const auto w = small_world(100);
  ExpertOptions eo;
  eo.n_days = 10;
  const auto ex = generate_expert(w.network, w.contexts, w.theta_star, eo);

  const auto none = perturb_data_loss(w.network, ex.expert, 0.0, 3);
  EXPECT_TRUE(none.nodes.empty());
  EXPECT_EQ(none.experts[0].mu_E, ex.expert[0].mu_E);
  EXPECT_EQ(none.experts[0].daily_counts, ex.expert[0].daily_counts);

  const auto a = perturb_data_loss(w.network, ex.expert, 0.05, 3);
  const auto b = perturb_data_loss(w.network, ex.expert, 0.05, 3);
  EXPECT_EQ(a.nodes.size(), 5u);
  EXPECT_EQ(a.nodes, b.nodes);
  const auto f = w.network.feature_dim();
  const auto& names = w.network.feature_names();
  for (NodeId s : a.nodes)
    for (EdgeId e : w.network.out_edges(s)) {
      EXPECT_EQ(a.experts[0].mu_E[static_cast<std::size_t>(e)], 0.0);
      for (std::size_t j = 0; j < f; ++j)
        if (names[j].rfind("profile", 0) == 0)
          EXPECT_EQ(a.network.features(e)[j], 0.0);
        else
          EXPECT_EQ(a.network.features(e)[j], w.network.features(e)[j]);
    }
}

TEST(Suite, GridShapeAndFlags) {
  const auto w = small_world(80, 2);
  const auto& net = w.network;
  ExpertOptions eo;
  eo.n_days = 20;
  const auto ex = generate_expert(net, w.contexts, w.theta_star, eo);
  SuiteOptions opt;
  opt.seirl.iterations = 3;
  opt.regenerate_expert = synthetic_expert_source(net, w.theta_star, eo);
  const auto rep = evaluate_suite(net, {w.contexts[0]}, {ex.expert[0]}, {w.contexts[1]}, {ex.expert[1]}, opt);
  EXPECT_EQ(rep.rows.size(), opt.policies.size() * 1 * opt.perturbations.size());
  for (const auto& r : rep.rows) {
    EXPECT_TRUE(r.flags.empty()) << r.policy << "/" << r.perturbation << ": " << r.flags;
    EXPECT_GE(r.mdr, 0.0);
  }
  EXPECT_EQ(mdr(ex.expert[1].mu_E, ex.expert[1].mu_E, net.edge_lengths()), 0.0);

  // Without a generator the disabled cells are flagged, not fatal.
  opt.regenerate_expert = nullptr;
  opt.policies = {"Tr-Expert"};
  opt.perturbations = {"normal", "disabled"};
  const auto partial = evaluate_suite(net, {w.contexts[0]}, {ex.expert[0]}, {w.contexts[1]}, {ex.expert[1]}, opt);
  ASSERT_EQ(partial.rows.size(), 2u);
  EXPECT_TRUE(partial.rows[0].flags.empty());
  EXPECT_FALSE(partial.rows[1].flags.empty());

  opt.perturbations = {"bogus"};
  EXPECT_THROW(evaluate_suite(net, {w.contexts[0]}, {ex.expert[0]}, {w.contexts[1]}, {ex.expert[1]}, opt),
               ValidationError);
}
