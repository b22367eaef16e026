#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <queue>

#include "seirl/io.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/worldgen.hpp"

namespace fs = std::filesystem;
using namespace seirl;

namespace {

const fs::path kFixtures = fs::path(SEIRL_SOURCE_DIR) / "tests" / "fixtures";

RoadNetwork two_cycle() {
  return RoadNetwork({{10.0}, {10.0}}, {{0, 1, 1, {1.0}}, {1, 0, 1, {1.0}}}, {"travel_time"});
}

// Reachability from node 0 along edges (forward) or against them.
std::vector<char> reach(const RoadNetwork& net, bool forward) {
  std::vector<char> seen(net.num_nodes(), 0);
  std::queue<NodeId> q;
  q.push(0);
  seen[0] = 1;
  while (!q.empty()) {
    const auto s = q.front();
    q.pop();
    for (std::size_t e = 0; e < net.num_edges(); ++e) {
      const auto a = static_cast<EdgeId>(e);
      const NodeId from = forward ? net.src(a) : net.dst(a);
      const NodeId to = forward ? net.dst(a) : net.src(a);
      if (from == s && !seen[static_cast<std::size_t>(to)]) {
        seen[static_cast<std::size_t>(to)] = 1;
        q.push(to);
      }
    }
  }
  return seen;
}

}  // namespace

TEST(Netgraph, TwoNodeFixtureLoads) {
  const auto w = io::load_world(kFixtures / "two_node");
  EXPECT_EQ(w.network.num_nodes(), 2u);
  EXPECT_EQ(w.network.num_edges(), 2u);
  ASSERT_EQ(w.contexts.size(), 1u);
  const auto& c = w.contexts[0];
  // Derived: dropoff = lambda-weighted destination marginal, h = demand-weighted ride time.
  EXPECT_NEAR(c.dropoff[0], 0.2 * 0.5 / 0.3, 1e-15);
  EXPECT_NEAR(c.dropoff[1], (0.1 + 0.2 * 0.5) / 0.3, 1e-15);
  EXPECT_NEAR(c.mean_ride_time, (0.1 * 2 + 0.2 * (0.5 * 3 + 0.5 * 1)) / 0.3, 1e-12);
  EXPECT_DOUBLE_EQ(c.expected_fare[1], 2.5);
}

TEST(Netgraph, UnnormalizedDestRowNamesTheRow) {
  try {
    io::load_world(kFixtures / "bad_dest");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& err) {
    EXPECT_NE(std::string(err.what()).find("node 1"), std::string::npos) << err.what();
    EXPECT_NE(std::string(err.what()).find("sums to 0.9"), std::string::npos) << err.what();
  }
}

TEST(Netgraph, ConnectivityCases) {
  EXPECT_TRUE(validate_strong_connectivity(two_cycle()).strongly_connected);

  const std::vector<NodeId> src{0}, dst{1};
  const auto rep = validate_strong_connectivity(2, src, dst);
  EXPECT_FALSE(rep.strongly_connected);
  EXPECT_EQ(rep.offending_component, std::vector<NodeId>{1});

  EXPECT_THROW(RoadNetwork({{10.0}, {10.0}}, {{0, 1, 1, {}}, {1, 1, 1, {}}}, {}), ValidationError);
}

TEST(Netgraph, GeneratedWorldIsStronglyConnectedByBfs) {
  WorldSpec spec;
  spec.num_nodes = 300;
  spec.contexts = 1;
  spec.profile_feature = false;
  spec.ride_time_passes = 0;
  const auto w = generate_world(spec);
  EXPECT_TRUE(validate_strong_connectivity(w.network).strongly_connected);
  for (bool fwd : {true, false})
    for (char c : reach(w.network, fwd)) EXPECT_TRUE(c);
}

TEST(Netgraph, ConstructorRejectsBadEdges) {
  EXPECT_THROW(RoadNetwork({{10.0}, {10.0}}, {{0, 1, 0, {}}, {1, 0, 1, {}}}, {}), ValidationError);
  EXPECT_THROW(RoadNetwork({{10.0}, {0.0}}, {{0, 1, 1, {}}, {1, 0, 1, {}}}, {}), ValidationError);
  EXPECT_THROW(RoadNetwork({{10.0}, {10.0}}, {{0, 2, 1, {}}, {1, 0, 1, {}}}, {}), ValidationError);
  EXPECT_THROW(RoadNetwork({{10.0}, {10.0}}, {{0, 1, 1, {NAN}}, {1, 0, 1, {0.0}}}, {"f"}), ValidationError);
}

TEST(Netgraph, ReverseIndexMatchesEdges) {
  const auto net = two_cycle();
  for (std::size_t s = 0; s < net.num_nodes(); ++s)
    for (EdgeId e : net.in_edges(static_cast<NodeId>(s))) EXPECT_EQ(net.dst(e), static_cast<NodeId>(s));
}

TEST(Netgraph, ThousandNodeWorldRoundTripsBitIdentically) {
  WorldSpec spec;
  spec.num_nodes = 1000;
  spec.contexts = 2;
  spec.profile_feature = false;
  spec.ride_time_passes = 0;
  const auto w = generate_world(spec);
  const auto dir = fs::temp_directory_path() / "seirl_roundtrip";
  fs::remove_all(dir);
  io::save_world(dir, w.network, w.contexts, w.theta_star);
  const auto back = io::load_world(dir);

  ASSERT_EQ(back.network.num_edges(), w.network.num_edges());
  for (std::size_t s = 0; s < w.network.num_nodes(); ++s) {
    const auto& a = w.network.node(static_cast<NodeId>(s));
    const auto& b = back.network.node(static_cast<NodeId>(s));
    EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
  const auto fa = w.network.feature_matrix();
  const auto fb = back.network.feature_matrix();
  EXPECT_EQ(std::memcmp(fa.data(), fb.data(), fa.size() * sizeof(double)), 0);
  ASSERT_EQ(back.contexts.size(), w.contexts.size());
  for (std::size_t c = 0; c < w.contexts.size(); ++c) {
    const auto& x = w.contexts[c];
    const auto& y = back.contexts[c];
    EXPECT_EQ(x.lambda, y.lambda);
    EXPECT_EQ(x.sigma, y.sigma);
    EXPECT_EQ(x.dropoff, y.dropoff);
    EXPECT_EQ(x.expected_fare, y.expected_fare);
    EXPECT_EQ(x.mean_ride_time, y.mean_ride_time);
    EXPECT_EQ(x.fleet_size, y.fleet_size);
    for (std::size_t s = 0; s < x.dest.size(); ++s) {
      ASSERT_EQ(x.dest[s].size(), y.dest[s].size());
      for (std::size_t k = 0; k < x.dest[s].size(); ++k) {
        EXPECT_EQ(x.dest[s][k].node, y.dest[s][k].node);
        EXPECT_EQ(x.dest[s][k].prob, y.dest[s][k].prob);
        EXPECT_EQ(x.dest[s][k].ride_time, y.dest[s][k].ride_time);
        EXPECT_EQ(x.dest[s][k].fare, y.dest[s][k].fare);
      }
    }
  }
  EXPECT_EQ(back.theta_star, w.theta_star);
  fs::remove_all(dir);
}
