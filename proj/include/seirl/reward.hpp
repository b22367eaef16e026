#pragma once

// Linear action-cost reward: g(s,a) = [rho_a * wbar_s] - theta . f(s,a).
//
// theta covers the F base features of the network, optionally followed by E
// per-action fixed-effect weights (an implicit one-hot feature per edge).

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seirl/equilibrium.hpp"
#include "seirl/errors.hpp"
#include "seirl/netgraph.hpp"

namespace seirl {

struct RewardModel {
  std::vector<std::string> feature_names;
  bool fixed_effects = false;
  bool include_pickup_bonus = false;
  std::vector<std::vector<double>> theta;       // one weight vector per context group
  std::map<std::string, std::size_t> group_of;  // context id -> group (absent -> 0)

  std::size_t group(const std::string& context_id) const {
    const auto it = group_of.find(context_id);
    return it == group_of.end() ? 0 : it->second;
  }
  const std::vector<double>& theta_for(const std::string& context_id) const {
    return theta.at(group(context_id));
  }
};

inline std::size_t theta_dim(const RoadNetwork& net, bool fixed_effects) {
  return net.feature_dim() + (fixed_effects ? net.num_edges() : 0);
}

/// Per-edge action cost theta . f (+ fixed effect when theta is F + E long).
inline std::vector<double> linear_cost(const RoadNetwork& net, std::span<const double> theta) {
  const auto f = net.feature_dim();
  const auto m = net.num_edges();
  if (theta.size() != f && theta.size() != f + m)
    throw ValidationError("irl", "theta has dimension " + std::to_string(theta.size()) +
                                     ", expected " + std::to_string(f) + " or " + std::to_string(f + m));
  const bool fe = theta.size() == f + m;
  std::vector<double> cost(m, 0.0);
  const auto x = net.feature_matrix();
  for (std::size_t e = 0; e < m; ++e) {
    double c = 0.0;
    for (std::size_t j = 0; j < f; ++j) c += theta[j] * x[e * f + j];
    if (fe) c += theta[f + e];
    cost[e] = c;
  }
  return cost;
}

/// g(s,a) = [rho_a wbar_src(a) if include_pickup_bonus] - theta . f(s,a).
inline std::vector<double> assemble_reward(std::span<const double> theta, const RoadNetwork& net,
                                           std::span<const double> rho,
                                           std::span<const double> expected_fare,
                                           bool include_pickup_bonus) {
  if (rho.size() != net.num_edges() || expected_fare.size() != net.num_nodes())
    throw ValidationError("irl", "assemble_reward: rho / expected fare dimension mismatch");
  auto g = linear_cost(net, theta);
  for (std::size_t e = 0; e < g.size(); ++e) {
    g[e] = -g[e];
    if (include_pickup_bonus)
      g[e] += rho[e] * expected_fare[static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)))];
  }
  return g;
}

/// Reward description for the equilibrium solver (bonus recomputed per
/// outer iteration from the current rho).
inline RewardSpec reward_spec(const RoadNetwork& net, std::span<const double> theta,
                              bool include_pickup_bonus) {
  auto cost = linear_cost(net, theta);
  for (double& c : cost) c = -c;
  return RewardSpec{std::move(cost), include_pickup_bonus};
}

/// g = -tau_a: the travel-time-only reward of the Opt / SE-Opt baselines.
inline RewardSpec travel_time_reward(const RoadNetwork& net) {
  RewardSpec r;
  r.base.resize(net.num_edges());
  for (std::size_t e = 0; e < r.base.size(); ++e) r.base[e] = -static_cast<double>(net.tau(static_cast<EdgeId>(e)));
  return r;
}

}  // namespace seirl
