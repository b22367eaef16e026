#include <gtest/gtest.h>

#include <filesystem>

#include "seirl/io.hpp"

namespace fs = std::filesystem;
using namespace seirl;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

World tiny_world() {
  WorldSpec spec;
  spec.num_nodes = 40;
  spec.contexts = 1;
  spec.fleet_size = 160.0;
  spec.profile_feature = false;
  return generate_world(spec);
}

}  // namespace

TEST(Io, ExpertAndDrawsRoundTrip) {
  const auto w = tiny_world();
  ExpertOptions eo;
  eo.n_days = 7;
  const auto ex = generate_expert(w.network, w.contexts, w.theta_star, eo);
  TempDir tmp("seirl_io_expert");
  io::save_expert(tmp.path, ex.expert[0]);
  const auto back = io::load_expert(tmp.path, "0", w.network.num_edges());
  EXPECT_EQ(back.mu_E, ex.expert[0].mu_E);
  EXPECT_EQ(back.daily_counts, ex.expert[0].daily_counts);
  EXPECT_EQ(back.slot_steps, ex.expert[0].slot_steps);

  io::save_draws(tmp.path / "draws_0.csv", ex.draws[0]);
  const auto d = io::load_draws(tmp.path / "draws_0.csv", w.network.num_nodes(), eo.slot_steps);
  for (std::size_t s = 0; s < d.size(); ++s) {
    EXPECT_EQ(d[s].flow, ex.draws[0].nodes[s].flow);
    EXPECT_EQ(d[s].rides, ex.draws[0].nodes[s].rides);
  }
}

TEST(Io, MalformedCsvIsRejected) {
  TempDir tmp("seirl_io_bad");
  io::write_text(tmp.path / "expert_x.csv", "edge_id,mu_E\n0,1.5\n1,-2\n");
  EXPECT_THROW(io::load_expert(tmp.path, "x", 2), ValidationError);
  io::write_text(tmp.path / "expert_y.csv", "edge,mu\n0,1\n");
  EXPECT_THROW(io::load_expert(tmp.path, "y", 1), ValidationError);
  io::write_text(tmp.path / "expert_z.csv", "edge_id,mu_E\n0,abc\n");
  EXPECT_THROW(io::load_expert(tmp.path, "z", 1), ValidationError);
  io::write_text(tmp.path / "draws.csv", "node_id,day,mu,m\n0,0,2,3\n");
  EXPECT_THROW(io::load_draws(tmp.path / "draws.csv", 1, 1.0), ValidationError);
}

TEST(Io, ModelAndSolutionRoundTrip) {
  const auto w = tiny_world();
  RewardModel m;
  m.feature_names = w.network.feature_names();
  m.theta = {w.theta_star, std::vector<double>(w.theta_star.size(), 0.1 / 3.0)};
  m.group_of = {{"0", 0}, {"1", 1}};
  const auto back = io::model_from_json(nlohmann::json::parse(io::model_to_json(m).dump()));
  EXPECT_EQ(back.theta, m.theta);
  EXPECT_EQ(back.group_of, m.group_of);
  auto bad = io::model_to_json(m);
  bad["theta"][0][0] = -1.0;
  EXPECT_THROW(io::model_from_json(bad), ValidationError);

  const auto sol = solve_equilibrium(w.network, w.contexts[0], reward_spec(w.network, w.theta_star, false));
  const auto j = nlohmann::json::parse(io::solution_to_json(w.network, sol).dump());
  const auto s2 = io::solution_from_json(w.network, j);
  EXPECT_EQ(s2.policy.prob, sol.policy.prob);
  EXPECT_EQ(s2.flow.mu_action, sol.flow.mu_action);
  EXPECT_EQ(s2.flow.rho, sol.flow.rho);
  EXPECT_EQ(s2.final_gap, sol.final_gap);
  EXPECT_EQ(self_consistency_gap(w.network, s2), self_consistency_gap(w.network, sol));
}

TEST(Io, WorldSpecRoundTripAndUnknownKeys) {
  WorldSpec spec;
  spec.num_nodes = 77;
  spec.theta_star = {{"travel_time", 0.7}};
  const auto back = io::worldspec_from_json(io::worldspec_to_json(spec));
  EXPECT_EQ(io::worldspec_to_json(back), io::worldspec_to_json(spec));
  EXPECT_THROW(io::worldspec_from_json(nlohmann::json{{"nodes", 5}}), ValidationError);
  EXPECT_THROW(io::worldspec_from_json(nlohmann::json{{"num_nodes", "many"}}), ValidationError);
  EXPECT_EQ(io::worldspec_from_json(nlohmann::json::object()).num_nodes, WorldSpec{}.num_nodes);
}

TEST(Io, TablesHaveDocumentedHeaders) {
  TempDir tmp("seirl_io_tables");
  TrainingTrace tr;
  tr.rows.push_back({0, 1.5, 0.25, 1.0, 42, 0.3, false});
  io::save_trace(tmp.path / "trace.csv", tr);
  EXPECT_EQ(io::read_csv(tmp.path / "trace.csv", {"iter", "grad_norm", "mdr", "eta", "theta_hash", "alpha", "skipped"})
                .size(),
            1u);

  EvalReport rep;
  rep.rows.push_back({"SEIRL", "1", "normal", 0.125, ""});
  rep.rows.push_back({"Opt", "1", "disabled", std::nan(""), "equilibrium: failed, badly"});
  io::save_report(tmp.path / "report.csv", rep);
  const auto rows = io::read_csv(tmp.path / "report.csv", {"policy", "context", "perturbation", "mdr", "flags"});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][3], "0.125");

  SweepResult sw;
  sw.context_id = "0";
  sw.rows.push_back({0.5, 100.0, 3.25, true, ""});
  sw.rows.push_back({1.0, 200.0, 4.0, true, ""});
  sw.best = 1;
  io::save_sweep(tmp.path / "sweep.csv", {sw});
  const auto srows = io::read_csv(tmp.path / "sweep.csv", {"context_id", "scale", "N", "objective", "converged", "best"});
  ASSERT_EQ(srows.size(), 2u);
  EXPECT_EQ(srows[1][5], "1");

  std::vector<DemandParams> params(2);
  params[0].lambda = 0.1;
  params[1].flags = kFitBoundary;
  io::save_demand_params(tmp.path / "demand_params.csv", params);
  const auto prow = io::read_csv(tmp.path / "demand_params.csv", {"node_id", "lambda", "sigma", "loglik", "flags"});
  EXPECT_EQ(prow[0][1], "0.10000000000000001");
  EXPECT_EQ(prow[1][4], "1");
}
