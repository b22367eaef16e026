#pragma once

// Agent-level Monte Carlo of the fleet and the supply-scale sweep.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seirl/demand.hpp"
#include "seirl/equilibrium.hpp"
#include "seirl/errors.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/worldgen.hpp"

namespace seirl {

enum class RhoMode {
  kEquilibriumFixed,  // rho per edge as supplied
  kInstantaneous,     // rho recomputed each step from the agents deciding at each node
};

struct SimConfig {
  int n_agents = 0;      // 0: round(context fleet size)
  int horizon = 2000;
  int warmup = -1;       // -1: 25% of horizon
  std::uint64_t seed = 1;
  int n_seeds = 1;       // runs with seeds seed, seed + 1, ...
  RhoMode rho_mode = RhoMode::kEquilibriumFixed;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<double> mu_action;
  double rides = 0.0;
  double revenue = 0.0;
  double empty_time = 0.0;
};

struct SimResult {
  int n_agents = 0;
  int horizon = 0;
  int warmup = 0;
  std::vector<double> mu_action;  // passes per step, mean over seeds
  std::vector<double> rides;      // rides per step at each node, mean over seeds
  double revenue = 0.0;           // per seed mean, post-warmup total
  double empty_time = 0.0;        // vehicle-steps of vacant driving, per seed mean
  bool conservation_ok = true;
  std::vector<SeedResult> per_seed;
};

namespace detail {

// Inverse-CDF sampler over a short list of weights.
inline std::size_t sample_index(std::span<const double> cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace detail

/// Discrete-time simulation. A vacant agent that reaches node s picks an
/// edge a ~ pi(.|s) and cruises it for tau_a steps; with probability rho_a
/// it is hailed on the way, then rides to s'' ~ d_s for h_{s,s''} steps and
/// earns w_{s,s''}; otherwise it arrives at dst(a). Passes, rides, revenue and empty driving time are accumulated from
/// step `warmup` on. Each agent draws from its own stream.
inline SimResult run_simulation(const RoadNetwork& net, const Context& ctx, const Policy& policy,
                                std::span<const double> rho, const SimConfig& cfg) {
  const auto n = net.num_nodes();
  const auto m = net.num_edges();
  if (policy.prob.size() != m) throw ValidationError("simulate", "policy has wrong dimension");
  if (cfg.rho_mode == RhoMode::kEquilibriumFixed && rho.size() != m)
    throw ValidationError("simulate", "rho has wrong dimension");
  for (std::size_t s = 0; s < n; ++s) {
    double row = 0.0;
    for (EdgeId e : net.out_edges(static_cast<NodeId>(s))) row += policy.prob[static_cast<std::size_t>(e)];
    if (std::abs(row - 1.0) > 1e-6)
      throw ValidationError("simulate", "policy row of node " + std::to_string(s) + " is not normalized");
  }
  const int agents = cfg.n_agents > 0 ? cfg.n_agents : static_cast<int>(std::lround(ctx.fleet_size));
  const int warmup = cfg.warmup >= 0 ? cfg.warmup : cfg.horizon / 4;
  if (agents < 1) throw ValidationError("simulate", "need at least one agent");
  if (!(cfg.horizon > warmup && warmup >= 0)) throw ValidationError("simulate", "need horizon > warmup >= 0");
  if (cfg.n_seeds < 1) throw ValidationError("simulate", "n_seeds must be >= 1");

  // Per-node samplers.
  std::vector<std::vector<double>> edge_cdf(n), dest_cdf(n);
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0.0;
    for (EdgeId e : net.out_edges(static_cast<NodeId>(s))) edge_cdf[s].push_back(acc += policy.prob[static_cast<std::size_t>(e)]);
    acc = 0.0;
    for (const auto& d : ctx.dest[s]) dest_cdf[s].push_back(acc += d.prob);
  }
  std::vector<double> drop_cdf(n);
  {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) drop_cdf[s] = acc += ctx.dropoff[s];
    if (!(acc > 0.0)) throw ValidationError("simulate", "drop-off distribution has zero mass");
  }

  SimResult out;
  out.n_agents = agents;
  out.horizon = cfg.horizon;
  out.warmup = warmup;
  out.mu_action.assign(m, 0.0);
  out.rides.assign(n, 0.0);
  const double window = static_cast<double>(cfg.horizon - warmup);
  const auto horizon = static_cast<std::size_t>(cfg.horizon);

  for (int r = 0; r < cfg.n_seeds; ++r) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(r);
    std::vector<std::mt19937_64> rng;
    rng.reserve(static_cast<std::size_t>(agents));
    std::vector<NodeId> at(static_cast<std::size_t>(agents));
    // Agents due at each step (calendar queue), in agent order.
    std::vector<std::vector<int>> due(horizon);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < agents; ++i) {
      rng.emplace_back(detail::stream_seed(seed, static_cast<std::uint64_t>(i)));
      at[static_cast<std::size_t>(i)] = static_cast<NodeId>(detail::sample_index(drop_cdf, unit(rng.back())));
      // Agents enter as if finishing a ride, spread over one mean ride time.
      const auto start = static_cast<std::size_t>(unit(rng.back()) * ctx.mean_ride_time);
      due[std::min(start, horizon - 1)].push_back(i);
    }
    SeedResult sr;
    sr.seed = seed;
    sr.mu_action.assign(m, 0.0);
    std::vector<double> rides(n, 0.0);
    std::vector<int> deciding(n, 0);
    std::vector<double> step_rho(n, 0.0);
    std::int64_t busy = agents - static_cast<std::int64_t>(due[0].size());  // travelling or occupied past t

    for (std::size_t t = 0; t < horizon; ++t) {
      auto& now = due[t];
      std::sort(now.begin(), now.end());
      if (static_cast<std::int64_t>(now.size()) + busy != agents) out.conservation_ok = false;
      if (cfg.rho_mode == RhoMode::kInstantaneous) {
        for (int i : now) ++deciding[static_cast<std::size_t>(at[static_cast<std::size_t>(i)])];
        for (int i : now) {
          const auto s = static_cast<std::size_t>(at[static_cast<std::size_t>(i)]);
          if (deciding[s] > 0) {
            step_rho[s] = ctx.lambda[s] > 0.0 ? pickup_probability(ctx.lambda[s], ctx.sigma[s], deciding[s]) : 0.0;
            deciding[s] = 0;
          }
        }
      }
      const bool count = t >= static_cast<std::size_t>(warmup);
      for (int i : now) {
        auto& g = rng[static_cast<std::size_t>(i)];
        const auto s = static_cast<std::size_t>(at[static_cast<std::size_t>(i)]);
        const auto& out_e = net.out_edges(static_cast<NodeId>(s));
        const EdgeId a = out_e[detail::sample_index(edge_cdf[s], unit(g))];
        const auto ai = static_cast<std::size_t>(a);
        const double p = cfg.rho_mode == RhoMode::kInstantaneous ? step_rho[s] : rho[ai];
        const bool hailed = unit(g) < p;
        // The hail happens while cruising a, so tau_a vacant steps are spent
        // either way (the accounting behind the injection rate).
        std::size_t next = t + static_cast<std::size_t>(net.tau(a));
        if (count) sr.empty_time += net.tau(a);
        if (hailed) {
          const auto& d = ctx.dest[s][detail::sample_index(dest_cdf[s], unit(g))];
          next += static_cast<std::size_t>(d.ride_time);
          at[static_cast<std::size_t>(i)] = d.node;
          if (count) {
            rides[s] += 1.0;
            sr.revenue += d.fare;
          }
        } else {
          at[static_cast<std::size_t>(i)] = net.dst(a);
        }
        if (count) sr.mu_action[ai] += 1.0;
        if (next < horizon) due[next].push_back(i);
        ++busy;
      }
      now.clear();
      now.shrink_to_fit();
      if (t + 1 < horizon) busy -= static_cast<std::int64_t>(due[t + 1].size());
    }
    for (double& v : sr.mu_action) v /= window;
    for (double v : rides) sr.rides += v;
    for (std::size_t s = 0; s < n; ++s) out.rides[s] += rides[s] / window / cfg.n_seeds;
    for (std::size_t e = 0; e < m; ++e) out.mu_action[e] += sr.mu_action[e] / cfg.n_seeds;
    out.revenue += sr.revenue / cfg.n_seeds;
    out.empty_time += sr.empty_time / cfg.n_seeds;
    out.per_seed.push_back(std::move(sr));
  }
  return out;
}

/// sum_a (rho_a mu_a wbar_src(a) - b mu_a tau_a): ride revenue minus driving
/// cost per time step, using the pickup probabilities stored with the flow.
inline double platform_objective(const RoadNetwork& net, const Flow& flow, const Context& ctx, double b) {
  if (flow.mu_action.size() != net.num_edges() || flow.rho.size() != net.num_edges())
    throw ValidationError("simulate", "flow has wrong dimension");
  double obj = 0.0;
  for (std::size_t e = 0; e < flow.mu_action.size(); ++e) {
    const auto ed = static_cast<EdgeId>(e);
    const double mu = flow.mu_action[e];
    obj += flow.rho[e] * mu * ctx.expected_fare[static_cast<std::size_t>(net.src(ed))] - b * mu * net.tau(ed);
  }
  return obj;
}

struct SweepRow {
  double scale = 0.0;
  double fleet_size = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  std::string error;
};

struct SweepResult {
  std::string context_id;
  std::vector<SweepRow> rows;
  int best = -1;  // index into rows, -1 if no row converged
};

/// Re-solves the equilibrium with the fleet scaled by each factor and scores
/// the resulting flow. Failed scales are flagged and skipped by the argmax.
inline SweepResult supply_sweep(const RoadNetwork& net, const Context& ctx, const RewardSpec& reward,
                                std::span<const double> scales, double b, const SolverParams& p = {}) {
  SweepResult out;
  out.context_id = ctx.id;
  for (double sc : scales) {
    if (!(sc > 0.0)) throw ValidationError("simulate", "supply scales must be positive");
    SweepRow row;
    row.scale = sc;
    row.fleet_size = sc * ctx.fleet_size;
    Context scaled = ctx;
    scaled.fleet_size = row.fleet_size;
    try {
      const auto sol = solve_equilibrium(net, scaled, reward, p);
      row.objective = platform_objective(net, sol.flow, scaled, b);
      row.converged = true;
    } catch (const Error& err) {
      row.error = err.what();
    }
    out.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i)
    if (out.rows[i].converged && (out.best < 0 || out.rows[i].objective > out.rows[static_cast<std::size_t>(out.best)].objective))
      out.best = static_cast<int>(i);
  return out;
}

}  // namespace seirl
