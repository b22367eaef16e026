#pragma once

// Synthetic worlds with known ground truth: a road network, a schedule of
// time-slot contexts whose demand hotspots drift from slot to slot, and
// expert behaviour generated as the equilibrium under a hidden reward theta*.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "seirl/equilibrium.hpp"
#include "seirl/errors.hpp"
#include "seirl/expert.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/reward.hpp"

namespace seirl {

struct WorldSpec {
  std::string topology = "random_planar";  // or "grid"
  int rows = 10, cols = 10;                // grid only
  int num_nodes = 500;                     // random_planar only
  double edge_density = 3.0;               // target directed edges per node (random_planar)
  double spacing_m = 400.0;
  double step_seconds = 30.0;

  int road_classes = 3;
  std::vector<double> class_share{0.2, 0.4, 0.4};
  std::vector<double> class_speed_mps{12.0, 8.0, 5.0};

  int hotspots = 3;
  double base_lambda = 0.2;
  double peak_lambda = 0.5;
  double hotspot_radius = 0.12;  // fraction of the map side
  double sigma_min = 1.0, sigma_max = 2.0;
  int contexts = 5;
  double drift = 0.08;  // hotspot displacement per slot, fraction of side

  int destinations = 50;
  double fare_base = 2.0;
  double fare_per_step = 0.3;
  double fleet_size = 2000.0;

  std::map<std::string, double> theta_star{{"travel_time", 1.0}, {"turn_uturn", 1.0}, {"class_2", 0.5}};
  bool profile_feature = true;
  int ride_time_passes = 2;  // re-estimate h from the theta* equilibrium's pickups
  std::uint64_t seed = 20201;
};

/// The benchmark world used across the acceptance suite.
inline WorldSpec standard_world_spec() { return WorldSpec{}; }

struct World {
  RoadNetwork network;
  std::vector<Context> contexts;
  WorldSpec spec;
  std::vector<double> theta_star;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5bd1e995ULL));
}

struct Point {
  double x = 0.0, y = 0.0;
};

inline double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Layout {
  std::vector<Point> pos;
  std::vector<std::pair<int, int>> links;  // undirected, i < j
};

inline Layout grid_layout(const WorldSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1 || spec.rows * spec.cols < 2)
    throw ValidationError("worldgen", "grid needs at least two cells");
  Layout l;
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) l.pos.push_back({c * spec.spacing_m, r * spec.spacing_m});
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c) {
      const int i = r * spec.cols + c;
      if (c + 1 < spec.cols) l.links.emplace_back(i, i + 1);
      if (r + 1 < spec.rows) l.links.emplace_back(i, i + spec.cols);
    }
  return l;
}

// Euclidean MST over uniform points, plus short extra links drawn from each
// node's nearest neighbours until the directed edge density is reached.
inline Layout planar_layout(const WorldSpec& spec, std::mt19937_64& rng) {
  const int n = spec.num_nodes;
  if (n < 2) throw ValidationError("worldgen", "random_planar needs at least two nodes");
  if (spec.edge_density < 2.0 * (n - 1) / n - 1e-12)
    throw ValidationError("worldgen", "edge_density below spanning-tree minimum; graph cannot be strongly connected");
  const double side = spec.spacing_m * std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> u(0.0, side);
  Layout l;
  l.pos.resize(static_cast<std::size_t>(n));
  for (auto& p : l.pos) p = {u(rng), u(rng)};

  // Prim, O(n^2).
  std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  best[0] = 0.0;
  for (int k = 0; k < n; ++k) {
    int v = -1;
    for (int i = 0; i < n; ++i)
      if (!in_tree[i] && (v < 0 || best[i] < best[v])) v = i;
    in_tree[v] = 1;
    if (parent[v] >= 0) l.links.emplace_back(std::min(v, parent[v]), std::max(v, parent[v]));
    for (int i = 0; i < n; ++i) {
      if (in_tree[i]) continue;
      const double d = dist(l.pos[v], l.pos[i]);
      if (d < best[i]) best[i] = d, parent[i] = v;
    }
  }

  const auto target_links = static_cast<std::size_t>(std::llround(spec.edge_density * n / 2.0));
  if (target_links > l.links.size()) {
    constexpr int kNear = 4;
    std::vector<std::pair<int, int>> candidates;
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<double, int>> near;
      for (int j = 0; j < n; ++j)
        if (j != i) near.emplace_back(dist(l.pos[i], l.pos[j]), j);
      const auto k = std::min<std::size_t>(kNear, near.size());
      std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k), near.end());
      for (std::size_t q = 0; q < k; ++q)
        candidates.emplace_back(std::min(i, near[q].second), std::max(i, near[q].second));
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::vector<std::pair<int, int>> existing = l.links;
    std::sort(existing.begin(), existing.end());
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (const auto& c : candidates) {
      if (l.links.size() >= target_links) break;
      if (std::binary_search(existing.begin(), existing.end(), c)) continue;
      l.links.push_back(c);
    }
  }
  return l;
}

// Reverse Dijkstra: travel time (steps) from every node to `target`.
inline std::vector<std::int64_t> steps_to(const RoadNetwork& net, NodeId target) {
  constexpr auto kInf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> d(net.num_nodes(), kInf);
  using Item = std::pair<std::int64_t, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[static_cast<std::size_t>(target)] = 0;
  pq.emplace(0, target);
  while (!pq.empty()) {
    const auto [dv, v] = pq.top();
    pq.pop();
    if (dv != d[static_cast<std::size_t>(v)]) continue;
    for (EdgeId e : net.in_edges(v)) {
      const auto u = static_cast<std::size_t>(net.src(e));
      const auto nd = dv + net.tau(e);
      if (nd < d[u]) {
        d[u] = nd;
        pq.emplace(nd, static_cast<NodeId>(u));
      }
    }
  }
  return d;
}

inline double reflect(double v, double side) {
  const double period = 2.0 * side;
  v = std::fmod(v, period);
  if (v < 0) v += period;
  return v > side ? period - v : v;
}

}  // namespace detail

/// Canonical base feature names for a given road-class count.
inline std::vector<std::string> world_feature_names(int road_classes) {
  std::vector<std::string> names{"travel_time"};
  for (int c = 0; c < road_classes; ++c) names.push_back("class_" + std::to_string(c));
  for (const char* t : {"turn_straight", "turn_left", "turn_right", "turn_uturn"}) names.emplace_back(t);
  names.emplace_back("profile_rarity");
  return names;
}

inline std::vector<double> theta_from_names(const std::vector<std::string>& names,
                                            const std::map<std::string, double>& weights) {
  std::vector<double> theta(names.size(), 0.0);
  double total = 0.0;
  for (const auto& [name, w] : weights) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ValidationError("worldgen", "unknown feature in theta*: " + name);
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("worldgen", "theta* must be finite and >= 0");
    theta[static_cast<std::size_t>(it - names.begin())] = w;
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("worldgen", "theta* must have a positive weight");
  return theta;
}

/// Demand field and destination rows of context slot `slot` (may be
/// negative: slot -1 is the profiling period preceding the schedule).
inline Context make_context(const RoadNetwork& net, const WorldSpec& spec, int slot,
                            const std::vector<detail::Point>& hotspot_origin,
                            const std::vector<detail::Point>& hotspot_dir, const std::vector<double>& sigma,
                            const std::vector<std::vector<Destination>>& dest_rows) {
  double side_x = 0.0, side_y = 0.0;
  for (const auto& nd : net.nodes()) side_x = std::max(side_x, nd.x), side_y = std::max(side_y, nd.y);
  const double side = std::max(side_x, side_y);
  const double r = spec.hotspot_radius * side;
  Context ctx;
  ctx.id = std::to_string(slot);
  ctx.lambda.assign(net.num_nodes(), spec.base_lambda);
  for (std::size_t k = 0; k < hotspot_origin.size(); ++k) {
    const double cx = detail::reflect(hotspot_origin[k].x + spec.drift * side * slot * hotspot_dir[k].x, side);
    const double cy = detail::reflect(hotspot_origin[k].y + spec.drift * side * slot * hotspot_dir[k].y, side);
    for (std::size_t s = 0; s < net.num_nodes(); ++s) {
      const double d2 = std::pow(net.nodes()[s].x - cx, 2) + std::pow(net.nodes()[s].y - cy, 2);
      ctx.lambda[s] += spec.peak_lambda * std::exp(-d2 / (2.0 * r * r));
    }
  }
  ctx.sigma = sigma;
  ctx.dest = dest_rows;
  ctx.fleet_size = spec.fleet_size;
  return finalize_context(net, std::move(ctx));
}

/// Replaces the demand-weighted mean ride time by the pickup-weighted one
/// realized by the theta* equilibrium, repeated `passes` times.
inline void calibrate_ride_time(const RoadNetwork& net, Context& ctx, const std::vector<double>& theta,
                                int passes, const SolverParams& solver) {
  std::optional<FlowBelief> warm;
  for (int k = 0; k < passes; ++k) {
    const auto sol = solve_equilibrium(net, ctx, reward_spec(net, theta, false), solver, warm);
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < ctx.dest.size(); ++s) {
      const double r = sol.flow.rides[s];
      if (r <= 0.0) continue;
      double h = 0.0;
      for (const auto& d : ctx.dest[s]) h += d.prob * d.ride_time;
      num += r * h;
      den += r;
    }
    if (den > 0.0) ctx.mean_ride_time = num / den;
    warm = belief_from_flow(sol.flow);
  }
}

/// Deterministic in spec.seed. Rejects specs that cannot produce a strongly
/// connected network.
inline World generate_world(const WorldSpec& spec, const SolverParams& solver = {}) {
  if (spec.road_classes < 1 || static_cast<int>(spec.class_share.size()) != spec.road_classes ||
      static_cast<int>(spec.class_speed_mps.size()) != spec.road_classes)
    throw ValidationError("worldgen", "class_share / class_speed_mps must have road_classes entries");
  if (spec.contexts < 1) throw ValidationError("worldgen", "need at least one context");
  if (spec.destinations < 1) throw ValidationError("worldgen", "need at least one destination");
  if (!(spec.fleet_size > 0.0)) throw ValidationError("worldgen", "fleet_size must be > 0");
  if (!(spec.sigma_min >= 0.0 && spec.sigma_max >= spec.sigma_min))
    throw ValidationError("worldgen", "invalid sigma range");

  std::mt19937_64 rng(detail::stream_seed(spec.seed, 0));
  detail::Layout layout;
  if (spec.topology == "grid") {
    layout = detail::grid_layout(spec);
  } else if (spec.topology == "random_planar") {
    layout = detail::planar_layout(spec, rng);
  } else {
    throw ValidationError("worldgen", "unknown topology '" + spec.topology + "'");
  }
  const auto n = layout.pos.size();

  std::vector<std::vector<int>> nbr(n);
  for (const auto& [i, j] : layout.links) {
    nbr[static_cast<std::size_t>(i)].push_back(j);
    nbr[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& v : nbr) std::sort(v.begin(), v.end());

  std::discrete_distribution<int> pick_class(spec.class_share.begin(), spec.class_share.end());
  std::vector<int> road_class(n);
  std::vector<NodeSpec> nodes(n);
  std::vector<detail::Point> heading(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (nbr[s].empty()) throw ValidationError("worldgen", "isolated node " + std::to_string(s));
    road_class[s] = pick_class(rng);
    double len = 0.0;
    for (int t : nbr[s]) len += detail::dist(layout.pos[s], layout.pos[static_cast<std::size_t>(t)]);
    nodes[s] = NodeSpec{len / static_cast<double>(nbr[s].size()), layout.pos[s].x, layout.pos[s].y};
    std::uniform_int_distribution<std::size_t> pick(0, nbr[s].size() - 1);
    const auto& from = layout.pos[static_cast<std::size_t>(nbr[s][pick(rng)])];
    heading[s] = {layout.pos[s].x - from.x, layout.pos[s].y - from.y};
  }

  auto names = world_feature_names(spec.road_classes);
  const auto f = names.size();
  const auto turn0 = static_cast<std::size_t>(1 + spec.road_classes);
  std::vector<EdgeSpec> edges;
  for (std::size_t s = 0; s < n; ++s) {
    for (int t : nbr[s]) {
      EdgeSpec e;
      e.src = static_cast<NodeId>(s);
      e.dst = t;
      const double secs = nodes[s].length_m / spec.class_speed_mps[static_cast<std::size_t>(road_class[s])];
      e.tau = std::max<std::int32_t>(1, static_cast<std::int32_t>(std::lround(secs / spec.step_seconds)));
      e.features.assign(f, 0.0);
      e.features[0] = e.tau;
      e.features[1 + static_cast<std::size_t>(road_class[static_cast<std::size_t>(t)])] = 1.0;
      const auto& p = layout.pos[static_cast<std::size_t>(t)];
      const double vx = p.x - layout.pos[s].x, vy = p.y - layout.pos[s].y;
      const double angle = std::atan2(heading[s].x * vy - heading[s].y * vx, heading[s].x * vx + heading[s].y * vy);
      constexpr double q = std::numbers::pi / 4.0;
      std::size_t turn = 0;                          // straight
      if (std::abs(angle) > 3.0 * q) turn = 3;       // u-turn
      else if (angle >= q) turn = 1;                 // left
      else if (angle <= -q) turn = 2;                // right
      e.features[turn0 + turn] = 1.0;
      edges.push_back(std::move(e));
    }
  }
  RoadNetwork net(std::move(nodes), std::move(edges), names);

  // Demand ingredients shared across slots.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double side = 0.0;
  for (const auto& p : layout.pos) side = std::max({side, p.x, p.y});
  std::vector<detail::Point> origin, dir;
  for (int k = 0; k < spec.hotspots; ++k) {
    origin.push_back({side * (0.2 + 0.6 * unit(rng)), side * (0.2 + 0.6 * unit(rng))});
    const double a = 2.0 * std::numbers::pi * unit(rng);
    dir.push_back({std::cos(a), std::sin(a)});
  }
  std::vector<double> sigma(n);
  for (double& v : sigma) v = spec.sigma_min + (spec.sigma_max - spec.sigma_min) * unit(rng);

  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(spec.destinations), n);
  std::vector<NodeId> attractors(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(attractors.begin(), attractors.end());
  std::vector<double> weight(k);
  double wsum = 0.0;
  for (double& w : weight) wsum += (w = 0.5 + unit(rng));
  std::vector<std::vector<Destination>> rows(n);
  for (std::size_t q = 0; q < k; ++q) {
    const auto steps = detail::steps_to(net, attractors[q]);
    for (std::size_t s = 0; s < n; ++s) {
      const auto h = static_cast<std::int32_t>(std::max<std::int64_t>(1, steps[s]));
      rows[s].push_back({attractors[q], weight[q] / wsum, h, spec.fare_base + spec.fare_per_step * h});
    }
  }

  World world;
  world.spec = spec;
  world.theta_star = theta_from_names(names, spec.theta_star);
  for (int c = 0; c < spec.contexts; ++c) {
    world.contexts.push_back(make_context(net, spec, c, origin, dir, sigma, rows));
    calibrate_ride_time(net, world.contexts.back(), world.theta_star, spec.ride_time_passes, solver);
  }

  if (spec.profile_feature) {
    // Traversal frequency observed in the profiling period, as a rarity
    // percentile (0 = busiest edge, 1 = quietest).
    auto profile_ctx = make_context(net, spec, -1, origin, dir, sigma, rows);
    calibrate_ride_time(net, profile_ctx, world.theta_star, spec.ride_time_passes, solver);
    const auto sol = solve_equilibrium(net, profile_ctx, reward_spec(net, world.theta_star, false), solver);
    const auto m = net.num_edges();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return sol.flow.mu_action[a] > sol.flow.mu_action[b]; });
    std::vector<double> x(net.feature_matrix().begin(), net.feature_matrix().end());
    for (std::size_t r = 0; r < m; ++r)
      x[order[r] * f + (f - 1)] = m > 1 ? static_cast<double>(r) / static_cast<double>(m - 1) : 0.0;
    net = net.with_features(std::move(x));
  }
  world.network = std::move(net);
  return world;
}

// ---------------------------------------------------------------------------
// Expert data

struct ExpertOptions {
  int n_days = 200;
  double slot_steps = 60.0;     // time steps covered by one daily draw
  double day_variation = 0.5;   // daily supply factor ~ U[1 - v, 1 + v]
  std::uint64_t seed = 1;
  bool pickup_bonus = false;    // whether the simulated drivers see rho * wbar
};

struct ExpertData {
  std::vector<ExpertVisitation> expert;  // one per context
  std::vector<ContextDraws> draws;       // demand draws per context
  std::vector<EquilibriumSolution> truth;
};

/// Samples daily draws around the flow of a known solution. Day i scales
/// supply by u_i; edge counts are Poisson(u_i mu_a T) and rides at each road
/// are Binomial(passes, rho(passes / T)).
inline void sample_days(const RoadNetwork& net, const Context& ctx, const Flow& flow,
                        const ExpertOptions& opt, std::uint64_t stream, ExpertVisitation& expert,
                        ContextDraws& draws) {
  std::mt19937_64 rng(detail::stream_seed(opt.seed, stream));
  std::uniform_real_distribution<double> day_factor(1.0 - opt.day_variation, 1.0 + opt.day_variation);
  const auto m = net.num_edges();
  const auto n = net.num_nodes();
  expert.context_id = ctx.id;
  expert.slot_steps = opt.slot_steps;
  expert.daily_counts.assign(static_cast<std::size_t>(opt.n_days), std::vector<std::int32_t>(m, 0));
  draws.context_id = ctx.id;
  draws.nodes.assign(n, DemandDraws{{}, {}, opt.slot_steps});
  for (int i = 0; i < opt.n_days; ++i) {
    const double u = day_factor(rng);
    auto& counts = expert.daily_counts[static_cast<std::size_t>(i)];
    std::vector<std::int64_t> passes(n, 0);
    for (std::size_t e = 0; e < m; ++e) {
      const double mean = u * flow.mu_action[e] * opt.slot_steps;
      if (mean > 0.0) counts[e] = static_cast<std::int32_t>(std::poisson_distribution<std::int64_t>(mean)(rng));
      passes[static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)))] += counts[e];
    }
    for (std::size_t s = 0; s < n; ++s) {
      const auto p = passes[s];
      std::int64_t rides = 0;
      if (p > 0) {
        const double rho = pickup_probability(ctx.lambda[s], ctx.sigma[s], static_cast<double>(p) / opt.slot_steps);
        rides = std::binomial_distribution<std::int64_t>(p, rho)(rng);
      }
      draws.nodes[s].flow.push_back(p);
      draws.nodes[s].rides.push_back(rides);
    }
  }
  std::vector<std::size_t> every(static_cast<std::size_t>(opt.n_days));
  std::iota(every.begin(), every.end(), 0);
  expert.mu_E = expert.mean_over(every);
}

/// Expert visitation and demand draws for every context, generated from the
/// theta* equilibrium. Throws if theta* has no
/// equilibrium in some context.
inline ExpertData generate_expert(const RoadNetwork& net, const std::vector<Context>& contexts,
                                  const std::vector<double>& theta_star, const ExpertOptions& opt = {},
                                  const SolverParams& solver = {}) {
  if (opt.n_days < 1) throw ValidationError("worldgen", "n_days must be >= 1");
  ExpertData out;
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    EquilibriumSolution sol;
    try {
      sol = solve_equilibrium(net, contexts[c], reward_spec(net, theta_star, opt.pickup_bonus), solver);
    } catch (const ConvergenceError& err) {
      throw ValidationError("worldgen", "theta* has no equilibrium in context " + contexts[c].id + ": " + err.what());
    }
    ExpertVisitation ev;
    ContextDraws cd;
    sample_days(net, contexts[c], sol.flow, opt, c + 1, ev, cd);
    out.expert.push_back(std::move(ev));
    out.draws.push_back(std::move(cd));
    out.truth.push_back(std::move(sol));
  }
  return out;
}

}  // namespace seirl
