#pragma once

// Reward learning from aggregated visitation flows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seirl/demand.hpp"
#include "seirl/equilibrium.hpp"
#include "seirl/errors.hpp"
#include "seirl/expert.hpp"
#include "seirl/metrics.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/reward.hpp"

namespace seirl {

/// dL/dtheta ~= sum_a (mu_E_a - mu_pi_a) * dg/dtheta with g = -theta . f, i.e.
/// -sum_a (mu_E_a - mu_pi_a) f_a. `theta_size` selects whether per-edge fixed
/// effects (F + E coordinates) are included.
inline std::vector<double> approx_gradient(const RoadNetwork& net, std::span<const double> mu_E,
                                           std::span<const double> mu_pi, std::size_t theta_size) {
  const auto f = net.feature_dim();
  const auto m = net.num_edges();
  if (mu_E.size() != m || mu_pi.size() != m)
    throw ValidationError("irl", "approx_gradient: flow dimension mismatch");
  if (theta_size != f && theta_size != f + m)
    throw ValidationError("irl", "approx_gradient: unsupported theta dimension");
  std::vector<double> grad(theta_size, 0.0);
  const auto x = net.feature_matrix();
  for (std::size_t e = 0; e < m; ++e) {
    const double d = mu_E[e] - mu_pi[e];
    if (d == 0.0) continue;
    for (std::size_t j = 0; j < f; ++j) grad[j] -= d * x[e * f + j];
    if (theta_size > f) grad[f + e] = -d;
  }
  return grad;
}

/// Single-edge form over an explicit feature row.
inline std::vector<double> approx_gradient(double mu_E, double mu_pi, std::span<const double> features) {
  std::vector<double> grad(features.size());
  for (std::size_t j = 0; j < grad.size(); ++j) grad[j] = -(mu_E - mu_pi) * features[j];
  return grad;
}

/// mu_E (rho(mu_E) - rho(mu_pi)) / (1 - rho(mu_pi)) for one road: the weight
/// on d log rho / d theta dropped by the approximate gradient.
inline double gradient_correction_term(double mu_E, double mu_pi, double lambda, double sigma) {
  const double rho_e = pickup_probability(lambda, sigma, mu_E);
  const double rho_p = pickup_probability(lambda, sigma, mu_pi);
  if (!(rho_p < 1.0)) throw DegenerateError("irl", "correction term singular: rho(mu_pi) = 1");
  return mu_E * (rho_e - rho_p) / (1.0 - rho_p);
}

/// Per-edge correction term with state flows aggregated from edge flows.
inline std::vector<double> gradient_correction_term(const RoadNetwork& net, const Context& ctx,
                                                    std::span<const double> mu_E,
                                                    std::span<const double> mu_pi) {
  if (mu_E.size() != net.num_edges() || mu_pi.size() != net.num_edges())
    throw ValidationError("irl", "gradient_correction_term: flow dimension mismatch");
  const auto se = state_flow_from_actions(net, mu_E);
  const auto sp = state_flow_from_actions(net, mu_pi);
  std::vector<double> out(net.num_edges());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto s = static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)));
    if (ctx.lambda[s] == 0.0) continue;
    const double rho_e = pickup_probability(ctx.lambda[s], ctx.sigma[s], se[s]);
    const double rho_p = pickup_probability(ctx.lambda[s], ctx.sigma[s], sp[s]);
    if (!(rho_p < 1.0)) throw DegenerateError("irl", "correction term singular: rho(mu_pi) = 1");
    out[e] = mu_E[e] * (rho_e - rho_p) / (1.0 - rho_p);
  }
  return out;
}

/// Expected log-likelihood of the expert flow under a solved equilibrium:
/// sum_a mu_E_a log pi_a + sum_a mu_E_a [rho_E log rho_pi + (1 - rho_E) log(1 - rho_pi)].
/// Terms with zero weight are skipped (0 log 0 = 0).
inline double expert_loglik(const RoadNetwork& net, const Context& ctx, std::span<const double> mu_E,
                            const EquilibriumSolution& sol) {
  const auto se = state_flow_from_actions(net, mu_E);
  double ll = 0.0;
  for (std::size_t e = 0; e < net.num_edges(); ++e) {
    if (mu_E[e] == 0.0) continue;
    const auto s = static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)));
    ll += mu_E[e] * std::log(sol.policy.prob[e]);
    if (ctx.lambda[s] == 0.0) continue;
    const double rho_e = pickup_probability(ctx.lambda[s], ctx.sigma[s], se[s]);
    const double rho_p = sol.flow.rho[e];
    if (rho_e > 0.0) ll += mu_E[e] * rho_e * std::log(rho_p);
    if (rho_e < 1.0) ll += mu_E[e] * (1.0 - rho_e) * std::log1p(-rho_p);
  }
  return ll;
}

/// Central-difference gradient of expert_loglik, each probe a full
/// equilibrium solve (pickup bonus off). Probes are warm-started from the
/// solution at theta so the equilibrium branch is followed continuously.
inline std::vector<double> finite_difference_loglik_gradient(const RoadNetwork& net, const Context& ctx,
                                                             std::span<const double> theta,
                                                             std::span<const double> mu_E, double h_step,
                                                             const SolverParams& p = {}) {
  if (!(h_step > 0.0)) throw ValidationError("irl", "h_step must be > 0");
  const auto base = solve_equilibrium(net, ctx, reward_spec(net, theta, false), p);
  auto loglik_at = [&](std::vector<double> th) {
    const auto sol = solve_equilibrium(net, ctx, reward_spec(net, th, false), p, belief_from_flow(base.flow),
                                       base.values.V);
    return expert_loglik(net, ctx, mu_E, sol);
  };
  std::vector<double> grad(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    std::vector<double> up(theta.begin(), theta.end()), down(theta.begin(), theta.end());
    up[j] += h_step;
    down[j] -= h_step;
    grad[j] = (loglik_at(std::move(up)) - loglik_at(std::move(down))) / (2.0 * h_step);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// SEIRL

/// How the flow-difference gradient is made dimensionless before the
/// sqrt-normalized step (which is not scale invariant).
enum class GradientScale {
  kNone,         // raw flows
  kTotalFlow,    // divide by sum_a mu_E_a
  kFeatureMass,  // divide coordinate j by sum_a mu_E_a |f_aj| (total flow if zero)
};

struct SeirlOptions {
  double eta0 = 1.0;
  int iterations = 100;
  double l2 = 1e-3;
  double decay = 0.98;
  bool fixed_effects = true;
  double init_base = 1.0;
  double init_fixed_effect = 0.01;
  bool bootstrap_days = true;    // resample days when drawing mu_E
  GradientScale scale = GradientScale::kFeatureMass;
  int max_alpha_halvings = 3;
  std::uint64_t seed = 7;
  int jobs = 1;
  SolverParams solver;
};

struct TraceRow {
  int iter = 0;
  double grad_norm = 0.0;
  double mdr = 0.0;
  double eta = 0.0;
  std::uint64_t theta_hash = 0;
  double alpha = 0.0;
  bool skipped = false;
};

struct TrainingTrace {
  std::vector<TraceRow> rows;
};

struct LearnResult {
  RewardModel model;
  TrainingTrace trace;
  double best_mdr = 0.0;
  int best_iter = -1;
};

namespace detail {

inline std::uint64_t hash_theta(const std::vector<std::vector<double>>& theta) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& v : theta)
    for (double x : v) {
      std::uint64_t bits;
      std::memcpy(&bits, &x, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xffULL;
        h *= 1099511628211ULL;
      }
    }
  return h;
}

inline std::vector<double> gradient_scale(const RoadNetwork& net, std::span<const double> mu_E, std::size_t dim,
                                          GradientScale mode) {
  std::vector<double> z(dim, 1.0);
  if (mode == GradientScale::kNone) return z;
  double total = std::accumulate(mu_E.begin(), mu_E.end(), 0.0);
  if (!(total > 0.0)) total = 1.0;
  std::fill(z.begin(), z.end(), total);
  if (mode == GradientScale::kTotalFlow) return z;
  const auto f = net.feature_dim();
  const auto x = net.feature_matrix();
  std::vector<double> mass(dim, 0.0);
  for (std::size_t e = 0; e < mu_E.size(); ++e) {
    for (std::size_t j = 0; j < f; ++j) mass[j] += mu_E[e] * std::abs(x[e * f + j]);
    if (dim > f) mass[f + e] = mu_E[e];
  }
  for (std::size_t j = 0; j < dim; ++j)
    if (mass[j] > 0.0) z[j] = mass[j];
  return z;
}

struct GroupStep {
  std::vector<double> delta;
  double mdr = 0.0;
  double alpha = 0.0;
  bool ok = false;
  std::string failure;
};

}  // namespace detail

/// Learns one theta per context group. `experts[i]` belongs to `contexts[i]`;
/// `group_of` maps context ids to groups (missing ids use group 0). Each
/// iteration draws one context per group and a bootstrap of its days,
/// solves the equilibrium at the current theta without the pickup bonus and
/// applies theta <- theta * exp(-eta Delta / sqrt|Delta|). Returns the
/// theta with the best MDR against the drawn context's mean expert flow.
inline LearnResult seirl_learn(const RoadNetwork& net, const std::vector<Context>& contexts,
                               const std::vector<ExpertVisitation>& experts, const SeirlOptions& opt = {},
                               std::map<std::string, std::size_t> group_of = {}) {
  if (contexts.empty()) throw ValidationError("irl", "no training contexts");
  if (experts.size() != contexts.size()) throw ValidationError("irl", "one expert flow per context required");
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    if (experts[c].mu_E.size() != net.num_edges())
      throw ValidationError("irl", "expert flow of context " + contexts[c].id + " has wrong dimension");
    for (double v : experts[c].mu_E)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("irl", "expert flow must be finite and >= 0");
  }
  if (!(opt.init_base > 0.0) || !(opt.init_fixed_effect > 0.0))
    throw ValidationError("irl", "theta must be initialized positive");
  if (opt.iterations < 0) throw ValidationError("irl", "iterations must be >= 0");

  std::size_t groups = 1;
  for (const auto& c : contexts) {
    const auto it = group_of.find(c.id);
    if (it != group_of.end()) groups = std::max(groups, it->second + 1);
  }
  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    const auto it = group_of.find(contexts[c].id);
    members[it == group_of.end() ? 0 : it->second].push_back(c);
  }

  const auto f = net.feature_dim();
  const auto dim = theta_dim(net, opt.fixed_effects);
  RewardModel model;
  model.feature_names = net.feature_names();
  model.fixed_effects = opt.fixed_effects;
  model.include_pickup_bonus = false;
  model.group_of = std::move(group_of);
  model.theta.assign(groups, std::vector<double>(dim, opt.init_fixed_effect));
  for (auto& th : model.theta) std::fill(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(f), opt.init_base);

  LearnResult out;
  out.model = model;
  out.best_mdr = std::numeric_limits<double>::infinity();
  const auto lengths = net.edge_lengths();

  // Per-context warm starts: the last equilibrium belief and values.
  std::vector<std::optional<FlowBelief>> belief(contexts.size());
  std::vector<std::vector<double>> values(contexts.size());
  for (std::size_t c = 0; c < contexts.size(); ++c) {
    FlowBelief b;
    b.mu_action = experts[c].mu_E;
    b.mu_state = state_flow_from_actions(net, b.mu_action);
    if (std::accumulate(b.mu_action.begin(), b.mu_action.end(), 0.0) > 0.0) belief[c] = std::move(b);
  }

  std::mt19937_64 rng(opt.seed);
  double alpha = opt.solver.alpha;
  double eta = opt.eta0;
  for (int t = 0; t < opt.iterations; ++t) {
    // Draws happen sequentially so results do not depend on the job count.
    std::vector<std::size_t> ctx_of(groups);
    std::vector<std::vector<double>> sample(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      if (members[g].empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, members[g].size() - 1);
      const auto c = members[g][pick(rng)];
      ctx_of[g] = c;
      const auto& ex = experts[c];
      if (opt.bootstrap_days && ex.num_days() > 1) {
        std::uniform_int_distribution<std::size_t> day(0, ex.num_days() - 1);
        std::vector<std::size_t> days(ex.num_days());
        for (auto& d : days) d = day(rng);
        sample[g] = ex.mean_over(days);
      } else {
        sample[g] = ex.mu_E;
      }
    }

    auto step_group = [&](std::size_t g) {
      detail::GroupStep st;
      const auto c = ctx_of[g];
      SolverParams sp = opt.solver;
      sp.alpha = alpha;
      const auto reward = reward_spec(net, model.theta[g], false);
      for (int attempt = 0; attempt <= opt.max_alpha_halvings; ++attempt) {
        try {
          auto sol = solve_equilibrium(net, contexts[c], reward, sp, belief[c], values[c]);
          auto grad = approx_gradient(net, sample[g], sol.flow.mu_action, dim);
          const auto z = detail::gradient_scale(net, sample[g], dim, opt.scale);
          st.delta.resize(dim);
          for (std::size_t j = 0; j < dim; ++j) st.delta[j] = -grad[j] / z[j] + opt.l2 * model.theta[g][j];
          st.mdr = mdr(experts[c].mu_E, sol.flow.mu_action, lengths);
          st.alpha = sp.alpha;
          st.ok = true;
          belief[c] = belief_from_flow(sol.flow);
          values[c] = sol.values.V;
          return st;
        } catch (const ConvergenceError& err) {
          st.failure = err.message();
          sp.alpha *= 0.5;
        }
      }
      st.alpha = sp.alpha;
      return st;
    };

    std::vector<detail::GroupStep> steps(groups);
    if (opt.jobs > 1 && groups > 1) {
      for (std::size_t g0 = 0; g0 < groups; g0 += static_cast<std::size_t>(opt.jobs)) {
        std::vector<std::future<detail::GroupStep>> fut;
        const auto g1 = std::min(groups, g0 + static_cast<std::size_t>(opt.jobs));
        for (std::size_t g = g0; g < g1; ++g)
          if (!members[g].empty()) fut.push_back(std::async(std::launch::async, step_group, g));
        std::size_t k = 0;
        for (std::size_t g = g0; g < g1; ++g)
          if (!members[g].empty()) steps[g] = fut[k++].get();
      }
    } else {
      for (std::size_t g = 0; g < groups; ++g)
        if (!members[g].empty()) steps[g] = step_group(g);
    }

    TraceRow row;
    row.iter = t;
    row.eta = eta;
    double norm2 = 0.0, mdr_sum = 0.0;
    int used = 0;
    bool failed = false;
    std::string failure;
    for (std::size_t g = 0; g < groups; ++g) {
      if (members[g].empty()) continue;
      if (!steps[g].ok) {
        failed = true;
        failure = steps[g].failure;
        continue;
      }
      for (double d : steps[g].delta) norm2 += d * d;
      mdr_sum += steps[g].mdr;
      ++used;
    }
    row.alpha = alpha;
    if (failed) {
      row.skipped = true;
      row.mdr = std::numeric_limits<double>::quiet_NaN();
      row.theta_hash = detail::hash_theta(model.theta);
      out.trace.rows.push_back(row);
      int streak = 0;
      for (auto it = out.trace.rows.rbegin(); it != out.trace.rows.rend() && it->skipped; ++it) ++streak;
      if (streak >= 3)
        throw ConvergenceError("irl", "equilibrium failed in 3 consecutive iterations: " + failure);
      alpha *= 0.5;
      eta *= opt.decay;
      continue;
    }
    row.grad_norm = std::sqrt(norm2);
    row.mdr = mdr_sum / used;
    row.theta_hash = detail::hash_theta(model.theta);
    if (row.mdr < out.best_mdr) {
      out.best_mdr = row.mdr;
      out.best_iter = t;
      out.model.theta = model.theta;
    }
    for (std::size_t g = 0; g < groups; ++g) {
      if (members[g].empty()) continue;
      auto& th = model.theta[g];
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = steps[g].delta[j];
        if (d != 0.0) th[j] *= std::exp(-eta * d / std::sqrt(std::abs(d)));
      }
    }
    out.trace.rows.push_back(row);
    eta *= opt.decay;
  }
  if (out.best_iter < 0) out.model.theta = model.theta;
  return out;
}

}  // namespace seirl
