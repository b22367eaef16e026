#pragma once

// Spatial equilibrium of a fleet sharing one stochastic passenger-seeking
// policy.
//
// Given a flow belief mu, every road has a pickup probability rho(mu) and the
// fleet re-enters the vacant pool at a rate fixed by Little's law. Against
// those fixed dynamics a single driver solves an entropy-regularized
// semi-MDP (soft value iteration); the resulting policy is pushed through the
// network to get the flow it induces. The outer loop blends that flow into
// the belief until the belief stops moving.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "seirl/demand.hpp"
#include "seirl/errors.hpp"
#include "seirl/metrics.hpp"
#include "seirl/netgraph.hpp"

namespace seirl {

struct ValueFunctions {
  std::vector<double> V;  // per node
  std::vector<double> Q;  // per edge
  double bellman_residual = 0.0;
  int iterations = 0;
};

struct Policy {
  std::vector<double> prob;  // pi(a | src(a)), per edge
  double beta = 1.0;
};

struct Flow {
  std::vector<double> mu_state;   // visits per step, per node
  std::vector<double> mu_action;  // traversals per step, per edge
  std::vector<double> mu0;        // injections per step, per node
  std::vector<double> rho;        // pickup probability, per edge
  std::vector<double> rides;      // pickups per step, per node
};

struct SolverParams {
  double alpha = 0.3;
  double beta = 1.0;
  double gamma = 0.99;
  double epsilon = 1e-3;
  double vi_tol = 1e-6;
  int vi_max_iters = 2000;
  double prop_tol = 1e-8;
  int prop_max_iters = 5000;
  int outer_max_iters = 200;
};

struct EquilibriumSolution {
  Policy policy;
  Flow flow;
  ValueFunctions values;
  int outer_iterations = 0;
  double final_gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool clamped = false;  // injection clamp fired in the final iteration
  std::vector<double> gap_trace;
};

/// Per-edge reward ingredients: a fixed part (typically -theta.f) and an
/// optional expected pickup bonus rho_a * wbar_src(a), recomputed from the
/// current pickup probabilities every outer iteration.
struct RewardSpec {
  std::vector<double> base;
  bool include_pickup_bonus = false;
};

// ---------------------------------------------------------------------------
// Pickup probabilities on the network

/// rho_s evaluated at each node's own empty-vehicle flow.
inline std::vector<double> state_pickup_probability(const Context& ctx,
                                                    std::span<const double> mu_state) {
  std::vector<double> rho(mu_state.size());
  for (std::size_t s = 0; s < rho.size(); ++s)
    rho[s] = pickup_probability(ctx.lambda[s], ctx.sigma[s], std::max(0.0, mu_state[s]));
  return rho;
}

/// Every action leaving road s shares rho_s.
inline std::vector<double> edge_pickup_probability(const RoadNetwork& net, const Context& ctx,
                                                   std::span<const double> mu_state) {
  const auto rs = state_pickup_probability(ctx, mu_state);
  std::vector<double> rho(net.num_edges());
  for (std::size_t e = 0; e < rho.size(); ++e) rho[e] = rs[static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)))];
  return rho;
}

/// State flow implied by action flow: visits to s = traversals leaving s.
inline std::vector<double> state_flow_from_actions(const RoadNetwork& net,
                                                   std::span<const double> mu_action) {
  std::vector<double> mu(net.num_nodes(), 0.0);
  for (std::size_t e = 0; e < mu_action.size(); ++e)
    mu[static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)))] += mu_action[e];
  return mu;
}

// ---------------------------------------------------------------------------
// Soft value iteration

namespace detail {

// Discounted pickup continuation sum_s'' d_{s,s''} gamma^h V(s''), with the
// discount folded into a flat per-origin kernel.
struct PickupKernel {
  std::vector<std::size_t> offset;
  std::vector<NodeId> node;
  std::vector<double> weight;

  PickupKernel(const Context& ctx, double gamma) {
    offset.assign(ctx.dest.size() + 1, 0);
    for (std::size_t s = 0; s < ctx.dest.size(); ++s) offset[s + 1] = offset[s] + ctx.dest[s].size();
    node.reserve(offset.back());
    weight.reserve(offset.back());
    for (const auto& row : ctx.dest)
      for (const auto& d : row) {
        node.push_back(d.node);
        weight.push_back(d.prob * std::pow(gamma, d.ride_time));
      }
  }

  double apply(std::size_t s, std::span<const double> V) const {
    double acc = 0.0;
    for (std::size_t k = offset[s]; k < offset[s + 1]; ++k)
      acc += weight[k] * V[static_cast<std::size_t>(node[k])];
    return acc;
  }
};

inline double soft_max(std::span<const double> q, std::span<const EdgeId> edges, double beta) {
  double m = -std::numeric_limits<double>::infinity();
  for (EdgeId e : edges) m = std::max(m, q[static_cast<std::size_t>(e)]);
  double acc = 0.0;
  for (EdgeId e : edges) acc += std::exp((q[static_cast<std::size_t>(e)] - m) / beta);
  return m + beta * std::log(acc);
}

}  // namespace detail

/// Iterates Q(s,a) = g + rho_a sum d gamma^h V(s'') + (1 - rho_a) gamma^tau V(s'),
/// V(s) = beta logsumexp_a Q(s,a)/beta until the sup-norm change is below
/// `tol`. `warm_start` seeds V. Throws ConvergenceError after `max_iters`.
inline ValueFunctions soft_value_iteration(const RoadNetwork& net, const Context& ctx,
                                           std::span<const double> reward,
                                           std::span<const double> rho, double gamma, double beta,
                                           double tol, int max_iters,
                                           std::span<const double> warm_start = {}) {
  const auto n = net.num_nodes();
  const auto m = net.num_edges();
  if (reward.size() != m || rho.size() != m)
    throw ValidationError("equilibrium", "soft_value_iteration: per-edge input size mismatch");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ValidationError("equilibrium", "gamma must be in (0,1)");
  if (!(beta > 0.0)) throw ValidationError("equilibrium", "beta must be > 0");
  for (std::size_t e = 0; e < m; ++e) {
    if (!std::isfinite(reward[e])) throw ValidationError("equilibrium", "reward must be finite");
    if (!(rho[e] >= 0.0 && rho[e] < 1.0))
      throw ValidationError("equilibrium", "rho must lie in [0,1)");
  }
  const detail::PickupKernel kernel(ctx, gamma);
  std::vector<double> move_discount(m);
  for (std::size_t e = 0; e < m; ++e) move_discount[e] = std::pow(gamma, net.tau(static_cast<EdgeId>(e)));

  ValueFunctions out;
  out.V = warm_start.size() == n ? std::vector<double>(warm_start.begin(), warm_start.end())
                                 : std::vector<double>(n, 0.0);
  out.Q.assign(m, 0.0);
  std::vector<double> pickup(n), next(n);
  const auto src = net.sources();
  const auto dst = net.destinations();
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < max_iters) {
    ++it;
    for (std::size_t s = 0; s < n; ++s) pickup[s] = kernel.apply(s, out.V);
    for (std::size_t e = 0; e < m; ++e) {
      const auto s = static_cast<std::size_t>(src[e]);
      out.Q[e] = reward[e] + rho[e] * pickup[s] +
                 (1.0 - rho[e]) * move_discount[e] * out.V[static_cast<std::size_t>(dst[e])];
    }
    residual = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      next[s] = detail::soft_max(out.Q, net.out_edges(static_cast<NodeId>(s)), beta);
      residual = std::max(residual, std::abs(next[s] - out.V[s]));
    }
    out.V.swap(next);
    if (residual < tol) break;
  }
  out.bellman_residual = residual;
  out.iterations = it;
  if (!(residual < tol))
    throw ConvergenceError("equilibrium",
                           "soft value iteration did not converge in " + std::to_string(max_iters) +
                               " sweeps (residual " + std::to_string(residual) + ")",
                           {residual});
  return out;
}

/// pi(a|s) = exp((Q(s,a) - V(s)) / beta). V must be the soft maximum of the
/// same Q (as returned by soft_value_iteration).
inline Policy extract_policy(const RoadNetwork& net, const ValueFunctions& values, double beta) {
  Policy policy;
  policy.beta = beta;
  policy.prob.assign(net.num_edges(), 0.0);
  for (std::size_t s = 0; s < net.num_nodes(); ++s) {
    const auto edges = net.out_edges(static_cast<NodeId>(s));
    double total = 0.0;
    for (EdgeId e : edges) {
      const auto i = static_cast<std::size_t>(e);
      policy.prob[i] = std::exp((values.Q[i] - values.V[s]) / beta);
      total += policy.prob[i];
    }
    if (!(std::abs(total - 1.0) <= 1e-6))
      throw Error("equilibrium", "policy row " + std::to_string(s) + " sums to " +
                                     std::to_string(total) + "; V inconsistent with Q");
    for (EdgeId e : edges) policy.prob[static_cast<std::size_t>(e)] /= total;
  }
  return policy;
}

// ---------------------------------------------------------------------------
// Injections and propagation

struct InitialFlow {
  std::vector<double> mu0;
  bool clamped = false;
  double empty_vehicles = 0.0;  // sum_a mu_a tau_a
};

/// mu0_s = d_s max(0, N - sum_a mu_a tau_a) / h.
inline InitialFlow initial_flow(const RoadNetwork& net, const Context& ctx,
                                std::span<const double> mu_action) {
  if (mu_action.size() != net.num_edges())
    throw ValidationError("equilibrium", "initial_flow: action flow size mismatch");
  InitialFlow out;
  for (std::size_t e = 0; e < mu_action.size(); ++e) {
    if (!(mu_action[e] >= 0.0)) throw ValidationError("equilibrium", "flow belief must be >= 0");
    out.empty_vehicles += mu_action[e] * net.tau(static_cast<EdgeId>(e));
  }
  double free = ctx.fleet_size - out.empty_vehicles;
  if (free < 0.0) {
    free = 0.0;
    out.clamped = true;
  }
  out.mu0.resize(ctx.num_nodes());
  for (std::size_t s = 0; s < out.mu0.size(); ++s) out.mu0[s] = ctx.dropoff[s] * free / ctx.mean_ride_time;
  return out;
}

enum class PropagationMethod {
  kSparseLU,  // direct solve of (I - M^T) mu = mu0, residual verified by one forward sweep
  kForward,   // plain forward (Jacobi) iteration
};

namespace detail {

inline Flow finish_flow(const RoadNetwork& net, const Policy& policy, std::span<const double> rho,
                        std::span<const double> mu0, std::vector<double> mu) {
  Flow flow;
  flow.mu_state = std::move(mu);
  flow.mu0.assign(mu0.begin(), mu0.end());
  flow.rho.assign(rho.begin(), rho.end());
  flow.mu_action.resize(net.num_edges());
  flow.rides.assign(net.num_nodes(), 0.0);
  for (std::size_t e = 0; e < flow.mu_action.size(); ++e) {
    const auto s = static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)));
    flow.mu_action[e] = policy.prob[e] * flow.mu_state[s];
    flow.rides[s] += rho[e] * flow.mu_action[e];
  }
  return flow;
}

// One forward sweep: out = mu0 + M^T mu. Returns the sup-norm change.
inline double forward_sweep(const RoadNetwork& net, std::span<const double> carry,
                            std::span<const double> mu0, std::span<const double> mu,
                            std::vector<double>& out) {
  const auto src = net.sources();
  const auto dst = net.destinations();
  out.assign(mu0.begin(), mu0.end());
  for (std::size_t e = 0; e < carry.size(); ++e)
    out[static_cast<std::size_t>(dst[e])] += carry[e] * mu[static_cast<std::size_t>(src[e])];
  double residual = 0.0;
  for (std::size_t s = 0; s < out.size(); ++s) residual = std::max(residual, std::abs(out[s] - mu[s]));
  return residual;
}

}  // namespace detail

/// Fixed point of mu_s = mu0_s + sum_{a into s} (1 - rho_a) pi(a|src a) mu_src(a).
/// Either method returns a flow whose forward-sweep residual is below `tol`.
/// Throws ConvergenceError (with the total-mass trace) when the flow has no
/// finite fixed point below `mass_limit` (e.g. rho = 0 on a recurrent class)
/// or forward iteration exhausts `max_iters`.
inline Flow propagate_policy(const RoadNetwork& net, const Policy& policy,
                             std::span<const double> rho, std::span<const double> mu0, double tol,
                             int max_iters,
                             double mass_limit = std::numeric_limits<double>::infinity(),
                             std::span<const double> warm_start = {},
                             PropagationMethod method = PropagationMethod::kSparseLU) {
  const auto n = net.num_nodes();
  const auto m = net.num_edges();
  if (policy.prob.size() != m || rho.size() != m || mu0.size() != n)
    throw ValidationError("equilibrium", "propagate_policy: input size mismatch");
  for (std::size_t s = 0; s < n; ++s)
    if (!(mu0[s] >= 0.0)) throw ValidationError("equilibrium", "mu0 must be >= 0");

  std::vector<double> carry(m);
  for (std::size_t e = 0; e < m; ++e) {
    if (!(rho[e] >= 0.0 && rho[e] < 1.0)) throw ValidationError("equilibrium", "rho must lie in [0,1)");
    carry[e] = (1.0 - rho[e]) * policy.prob[e];
  }
  auto diverged = [&](double mass, std::vector<double> trace) {
    return ConvergenceError("equilibrium",
                            "policy propagation diverged: total flow " + std::to_string(mass) +
                                " exceeds limit " + std::to_string(mass_limit) +
                                " (no pickups to drain vacant vehicles?)",
                            std::move(trace));
  };

  std::vector<double> mu, next;
  if (method == PropagationMethod::kForward) {
    mu = warm_start.size() == n ? std::vector<double>(warm_start.begin(), warm_start.end())
                                : std::vector<double>(mu0.begin(), mu0.end());
    std::vector<double> mass_trace;
    for (int it = 0; it < max_iters; ++it) {
      const double residual = detail::forward_sweep(net, carry, mu0, mu, next);
      mu.swap(next);
      const double mass = std::accumulate(mu.begin(), mu.end(), 0.0);
      mass_trace.push_back(mass);
      if (!(mass <= mass_limit)) throw diverged(mass, std::move(mass_trace));
      if (residual < tol) return detail::finish_flow(net, policy, rho, mu0, std::move(mu));
    }
    throw ConvergenceError("equilibrium",
                           "policy propagation did not converge in " + std::to_string(max_iters) +
                               " iterations",
                           std::move(mass_trace));
  }

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(m + n);
  for (std::size_t s = 0; s < n; ++s) entries.emplace_back(static_cast<int>(s), static_cast<int>(s), 1.0);
  for (std::size_t e = 0; e < m; ++e)
    if (carry[e] != 0.0)
      entries.emplace_back(net.dst(static_cast<EdgeId>(e)), net.src(static_cast<EdgeId>(e)), -carry[e]);
  Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  A.setFromTriplets(entries.begin(), entries.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw diverged(std::numeric_limits<double>::infinity(), {});
  const Eigen::Map<const Eigen::VectorXd> b(mu0.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd x = lu.solve(b);
  std::vector<double> trace;
  double residual = std::numeric_limits<double>::infinity();
  for (int refine = 0; refine < 4; ++refine) {
    mu.assign(x.data(), x.data() + n);
    const double mass = std::accumulate(mu.begin(), mu.end(), 0.0);
    trace.push_back(mass);
    const double floor = -1e-9 * std::max(1.0, mass);
    const bool finite = std::all_of(mu.begin(), mu.end(), [&](double v) { return std::isfinite(v) && v >= floor; });
    if (!finite || !(mass <= mass_limit)) throw diverged(mass, std::move(trace));
    residual = detail::forward_sweep(net, carry, mu0, mu, next);
    if (residual < tol) break;
    // Iterative refinement: r = mu0 - A mu = next - mu.
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) r[static_cast<Eigen::Index>(s)] = next[s] - mu[s];
    x += lu.solve(r);
  }
  if (!(residual < tol))
    throw ConvergenceError("equilibrium",
                           "policy propagation residual " + std::to_string(residual) + " above tolerance",
                           std::move(trace));
  for (double& v : mu) v = std::max(v, 0.0);
  return detail::finish_flow(net, policy, rho, mu0, std::move(mu));
}

// ---------------------------------------------------------------------------
// Outer fixed point

struct FlowBelief {
  std::vector<double> mu_state;
  std::vector<double> mu_action;
};

/// mu_s = N / (h + mean tau) / S, split evenly over outgoing edges.
inline FlowBelief uniform_flow_belief(const RoadNetwork& net, const Context& ctx) {
  const auto n = net.num_nodes();
  const auto taus = net.travel_times();
  const double mean_tau =
      std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size());
  const double per_node = ctx.fleet_size / (ctx.mean_ride_time + mean_tau) / static_cast<double>(n);
  FlowBelief b;
  b.mu_state.assign(n, per_node);
  b.mu_action.resize(net.num_edges());
  for (std::size_t e = 0; e < b.mu_action.size(); ++e) {
    const auto s = net.src(static_cast<EdgeId>(e));
    b.mu_action[e] = per_node / static_cast<double>(net.out_edges(s).size());
  }
  return b;
}

inline FlowBelief belief_from_flow(const Flow& flow) { return {flow.mu_state, flow.mu_action}; }

namespace detail {

// Damped belief iteration. `policy_for` receives the per-edge pickup
// probabilities and returns the policy to propagate (soft VI for the
// equilibrium solver, a constant for fixed policies).
template <class PolicyFor>
EquilibriumSolution outer_fixed_point(const RoadNetwork& net, const Context& ctx,
                                      const SolverParams& p, std::optional<FlowBelief> initial,
                                      PolicyFor&& policy_for) {
  if (!(p.alpha > 0.0 && p.alpha <= 1.0)) throw ValidationError("equilibrium", "alpha must be in (0,1]");
  FlowBelief belief = initial ? std::move(*initial) : uniform_flow_belief(net, ctx);
  if (belief.mu_state.size() != net.num_nodes() || belief.mu_action.size() != net.num_edges())
    throw ValidationError("equilibrium", "initial flow belief has wrong dimensions");
  const auto lengths = net.edge_lengths();
  const double mass_limit = 10.0 * ctx.fleet_size;

  EquilibriumSolution sol;
  std::vector<double> warm_flow;
  for (int k = 1; k <= p.outer_max_iters; ++k) {
    const auto rho = edge_pickup_probability(net, ctx, belief.mu_state);
    const auto injection = initial_flow(net, ctx, belief.mu_action);
    Policy policy = policy_for(rho, sol);
    Flow flow;
    try {
      flow = propagate_policy(net, policy, rho, injection.mu0, p.prop_tol, p.prop_max_iters,
                              mass_limit, warm_flow);
    } catch (const ConvergenceError& err) {
      throw ConvergenceError("equilibrium",
                             err.message() + " at outer iteration " + std::to_string(k),
                             err.trace());
    }
    warm_flow = flow.mu_state;
    FlowBelief next = belief;
    for (std::size_t s = 0; s < next.mu_state.size(); ++s)
      next.mu_state[s] = (1.0 - p.alpha) * belief.mu_state[s] + p.alpha * flow.mu_state[s];
    for (std::size_t e = 0; e < next.mu_action.size(); ++e)
      next.mu_action[e] = (1.0 - p.alpha) * belief.mu_action[e] + p.alpha * flow.mu_action[e];
    const double gap = mdr(next.mu_action, belief.mu_action, lengths);
    belief = std::move(next);
    sol.policy = std::move(policy);
    sol.flow = std::move(flow);
    sol.clamped = injection.clamped;
    sol.outer_iterations = k;
    sol.final_gap = gap;
    sol.gap_trace.push_back(gap);
    if (gap < p.epsilon) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

}  // namespace detail

inline std::vector<double> with_pickup_bonus(const RoadNetwork& net, const Context& ctx,
                                             const RewardSpec& reward, std::span<const double> rho) {
  std::vector<double> g(reward.base.begin(), reward.base.end());
  if (reward.include_pickup_bonus)
    for (std::size_t e = 0; e < g.size(); ++e)
      g[e] += rho[e] * ctx.expected_fare[static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)))];
  return g;
}

/// Runs the equilibrium loop; never throws on outer non-convergence (the
/// result carries converged = false and the gap trace). Inner failures
/// (value iteration, propagation divergence) still throw.
inline EquilibriumSolution solve_equilibrium_unchecked(const RoadNetwork& net, const Context& ctx,
                                                       const RewardSpec& reward,
                                                       const SolverParams& p = {},
                                                       std::optional<FlowBelief> initial = {},
                                                       std::span<const double> warm_values = {}) {
  if (reward.base.size() != net.num_edges())
    throw ValidationError("equilibrium", "reward has wrong dimension");
  std::vector<double> warm(warm_values.begin(), warm_values.end());
  ValueFunctions last;
  auto sol = detail::outer_fixed_point(
      net, ctx, p, std::move(initial), [&](const std::vector<double>& rho, const EquilibriumSolution&) {
        const auto g = with_pickup_bonus(net, ctx, reward, rho);
        last = soft_value_iteration(net, ctx, g, rho, p.gamma, p.beta, p.vi_tol, p.vi_max_iters, warm);
        warm = last.V;
        return extract_policy(net, last, p.beta);
      });
  sol.values = std::move(last);
  return sol;
}

/// Equilibrium solve that throws ConvergenceError (carrying the gap trace)
/// when the outer loop hits its cap.
inline EquilibriumSolution solve_equilibrium(const RoadNetwork& net, const Context& ctx,
                                             const RewardSpec& reward, const SolverParams& p = {},
                                             std::optional<FlowBelief> initial = {},
                                             std::span<const double> warm_values = {}) {
  auto sol = solve_equilibrium_unchecked(net, ctx, reward, p, std::move(initial), warm_values);
  if (!sol.converged)
    throw ConvergenceError("equilibrium",
                           "equilibrium did not converge in " + std::to_string(p.outer_max_iters) +
                               " outer iterations (gap " + std::to_string(sol.final_gap) +
                               "); retry with a smaller alpha",
                           sol.gap_trace);
  return sol;
}

/// Flow of a policy that does not adapt: pickup probabilities and injections
/// still respond to the flow, so the same damped loop is run without value
/// iteration. Used to evaluate fixed baselines under new dynamics.
inline EquilibriumSolution fixed_policy_flow(const RoadNetwork& net, const Context& ctx,
                                             const Policy& policy, const SolverParams& p = {},
                                             std::optional<FlowBelief> initial = {}) {
  if (policy.prob.size() != net.num_edges())
    throw ValidationError("equilibrium", "policy has wrong dimension");
  auto sol = detail::outer_fixed_point(net, ctx, p, std::move(initial),
                                       [&](const std::vector<double>&, const EquilibriumSolution&) { return policy; });
  if (!sol.converged)
    throw ConvergenceError("equilibrium",
                           "fixed-policy flow did not converge (gap " + std::to_string(sol.final_gap) + ")",
                           sol.gap_trace);
  return sol;
}

/// Re-runs propagation of the converged policy from the solution's own mu0
/// and rho with plain forward iteration (independent of the direct solver
/// used inside the loop) and returns MDR(solution flow, re-propagated flow).
inline double self_consistency_gap(const RoadNetwork& net, const EquilibriumSolution& sol,
                                   const SolverParams& p = {}) {
  const auto again = propagate_policy(net, sol.policy, sol.flow.rho, sol.flow.mu0, p.prop_tol,
                                      100 * p.prop_max_iters, std::numeric_limits<double>::infinity(),
                                      {}, PropagationMethod::kForward);
  return mdr(sol.flow.mu_action, again.mu_action, net.edge_lengths());
}

/// Fixed-point residual of the belief itself: rho and mu0 recomputed from
/// the solution flow, policy held fixed, MDR(solution flow, re-propagated).
/// Scales like final_gap / alpha, so it is a diagnostic, not a stop rule.
inline double equilibrium_residual(const RoadNetwork& net, const Context& ctx,
                                   const EquilibriumSolution& sol, const SolverParams& p = {}) {
  const auto rho = edge_pickup_probability(net, ctx, sol.flow.mu_state);
  const auto injection = initial_flow(net, ctx, sol.flow.mu_action);
  const auto again = propagate_policy(net, sol.policy, rho, injection.mu0, p.prop_tol, p.prop_max_iters,
                                      std::numeric_limits<double>::infinity(), sol.flow.mu_state);
  return mdr(sol.flow.mu_action, again.mu_action, net.edge_lengths());
}

}  // namespace seirl
