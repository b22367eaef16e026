#pragma once

// Baseline policies, perturbations and the imitation-error report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "seirl/equilibrium.hpp"
#include "seirl/errors.hpp"
#include "seirl/expert.hpp"
#include "seirl/irl.hpp"
#include "seirl/metrics.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/reward.hpp"
#include "seirl/worldgen.hpp"

namespace seirl {

/// Single-agent optimum of g = -tau: soft VI with rho fixed once from the
/// training expert flow (no equilibrium loop).
inline Policy baseline_opt(const RoadNetwork& net, const Context& ctx, std::span<const double> expert_flow,
                           const SolverParams& p = {}) {
  if (expert_flow.size() != net.num_edges()) throw ValidationError("evalkit", "expert flow has wrong dimension");
  const auto rho = edge_pickup_probability(net, ctx, state_flow_from_actions(net, expert_flow));
  const auto g = travel_time_reward(net).base;
  const auto vf = soft_value_iteration(net, ctx, g, rho, p.gamma, p.beta, p.vi_tol, p.vi_max_iters);
  return extract_policy(net, vf, p.beta);
}

/// Equilibrium of g = -tau.
inline EquilibriumSolution baseline_se_opt(const RoadNetwork& net, const Context& ctx,
                                           const SolverParams& p = {}) {
  return solve_equilibrium(net, ctx, travel_time_reward(net), p);
}

/// pi(a|s) = count(a) / count(s); unseen states get the uniform distribution.
inline Policy baseline_tr_expert(const RoadNetwork& net, std::span<const double> counts) {
  if (counts.size() != net.num_edges()) throw ValidationError("evalkit", "counts have wrong dimension");
  Policy pol;
  pol.prob.assign(net.num_edges(), 0.0);
  for (std::size_t s = 0; s < net.num_nodes(); ++s) {
    const auto out = net.out_edges(static_cast<NodeId>(s));
    double total = 0.0;
    for (EdgeId e : out) {
      const double c = counts[static_cast<std::size_t>(e)];
      if (!(c >= 0.0)) throw ValidationError("evalkit", "counts must be >= 0");
      total += c;
    }
    for (EdgeId e : out)
      pol.prob[static_cast<std::size_t>(e)] =
          total > 0.0 ? counts[static_cast<std::size_t>(e)] / total : 1.0 / static_cast<double>(out.size());
  }
  return pol;
}

// ---------------------------------------------------------------------------
// Perturbations

/// Copy of the context with lambda zeroed on `nodes`; destination rows and
/// drop-offs are kept.
inline Context perturb_disable_region(const Context& ctx, std::span<const NodeId> nodes) {
  Context out = ctx;
  for (NodeId s : nodes) {
    if (s < 0 || static_cast<std::size_t>(s) >= ctx.num_nodes())
      throw ValidationError("evalkit", "region node " + std::to_string(s) + " out of range");
    out.lambda[static_cast<std::size_t>(s)] = 0.0;
  }
  return out;
}

/// The round(fraction * S) nodes nearest (Euclidean) to `center`.
inline std::vector<NodeId> region_around(const RoadNetwork& net, NodeId center, double fraction) {
  const auto n = net.num_nodes();
  const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  const auto& c = net.node(center);
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  auto d2 = [&](NodeId s) {
    const auto& p = net.node(s);
    return (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
  };
  std::stable_sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) { return d2(a) < d2(b); });
  ids.resize(std::min(k, n));
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct DataLoss {
  std::vector<NodeId> nodes;               // sampled states
  std::vector<ExpertVisitation> experts;   // counts removed on edges leaving `nodes`
  RoadNetwork network;                     // profile features zeroed on those edges
};

/// Samples round(fraction * S) states and removes all their data: expert
/// counts on outgoing edges and every feature whose name starts with
/// "profile" (the ones derived from observed traffic).
inline DataLoss perturb_data_loss(const RoadNetwork& net, const std::vector<ExpertVisitation>& experts,
                                  double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ValidationError("evalkit", "fraction must be in [0,1)");
  const auto n = net.num_nodes();
  const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
  std::vector<NodeId> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(k);
  std::sort(ids.begin(), ids.end());

  std::vector<char> lost(n, 0);
  for (NodeId s : ids) lost[static_cast<std::size_t>(s)] = 1;
  std::vector<std::size_t> edges;
  for (std::size_t e = 0; e < net.num_edges(); ++e)
    if (lost[static_cast<std::size_t>(net.src(static_cast<EdgeId>(e)))]) edges.push_back(e);

  DataLoss out{ids, experts, net};
  for (auto& ex : out.experts) {
    for (auto e : edges) ex.mu_E[e] = 0.0;
    for (auto& day : ex.daily_counts)
      for (auto e : edges) day[e] = 0;
  }
  const auto f = net.feature_dim();
  std::vector<std::size_t> profile_cols;
  for (std::size_t j = 0; j < f; ++j)
    if (net.feature_names()[j].rfind("profile", 0) == 0) profile_cols.push_back(j);
  if (!profile_cols.empty() && !edges.empty()) {
    std::vector<double> x(net.feature_matrix().begin(), net.feature_matrix().end());
    for (auto e : edges)
      for (auto j : profile_cols) x[e * f + j] = 0.0;
    out.network = net.with_features(std::move(x));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report

/// Split-half expert floor: MDR between the odd-day and even-day means.
inline double expert_floor(const ExpertVisitation& ex, std::span<const double> lengths) {
  if (ex.num_days() < 2) return 0.0;
  std::vector<std::size_t> even, odd;
  for (std::size_t d = 0; d < ex.num_days(); ++d) (d % 2 ? odd : even).push_back(d);
  return mdr(ex.mean_over(even), ex.mean_over(odd), lengths);
}

struct ReportRow {
  std::string policy;
  std::string context;
  std::string perturbation;
  double mdr = std::numeric_limits<double>::quiet_NaN();
  std::string flags;  // empty when the cell succeeded
};

struct EvalReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> train_contexts;
  std::uint64_t seed = 0;

  /// Mean MDR of the successful cells matching (policy, perturbation).
  double mean(const std::string& policy, const std::string& perturbation) const {
    double s = 0.0;
    int k = 0;
    for (const auto& r : rows)
      if (r.policy == policy && r.perturbation == perturbation && r.flags.empty()) s += r.mdr, ++k;
    return k ? s / k : std::numeric_limits<double>::quiet_NaN();
  }
};

struct SuiteOptions {
  std::vector<std::string> policies{"Expert", "SEIRL", "Tr-Expert", "Opt", "SE-Opt"};
  std::vector<std::string> perturbations{"normal", "disabled", "loss5", "loss10"};
  double region_fraction = 0.1;  // share of nodes in the disabled region
  std::uint64_t seed = 11;       // data-loss sampling
  SeirlOptions seirl;
  SolverParams solver;
  // Regenerates test expert flow under a perturbed context (needed for
  // "disabled"); typically the ground-truth equilibrium plus daily draws.
  std::function<ExpertVisitation(const Context&)> regenerate_expert;
  // Model already trained on the unperturbed data; skips that SEIRL run.
  std::optional<RewardModel> pretrained;
};

/// Runs `solve` and retries it with alpha halved on non-convergence, up to
/// `halvings` times (the retry policy of training).
template <class Solve>
EquilibriumSolution with_alpha_retries(const SolverParams& p, int halvings, Solve&& solve) {
  SolverParams sp = p;
  for (int attempt = 0;; ++attempt) {
    try {
      return solve(sp);
    } catch (const ConvergenceError&) {
      if (attempt >= halvings) throw;
      sp.alpha *= 0.5;
    }
  }
}

namespace detail {

inline double loss_fraction(const std::string& name) {
  if (name.rfind("loss", 0) != 0) return 0.0;
  return std::stod(name.substr(4)) / 100.0;
}

}  // namespace detail

/// Trains on `train` contexts and scores every policy on every test context
/// under every perturbation:
///   normal   - test context as given
///   disabled - lambda zeroed around the test context's busiest node, test
///              expert regenerated through `regenerate_expert`
///   lossN    - N% of states lose their training data (counts and profile
///              features); test data untouched
/// Failed cells are flagged and the suite continues.
inline EvalReport evaluate_suite(const RoadNetwork& net, const std::vector<Context>& train,
                                 const std::vector<ExpertVisitation>& train_expert,
                                 const std::vector<Context>& test,
                                 const std::vector<ExpertVisitation>& test_expert, const SuiteOptions& opt) {
  if (train.size() != train_expert.size() || test.size() != test_expert.size())
    throw ValidationError("evalkit", "one expert flow per context required");
  EvalReport rep;
  rep.seed = opt.seed;
  for (const auto& c : train) rep.train_contexts.push_back(c.id);
  const auto lengths = net.edge_lengths();
  auto wants = [&](const std::string& p) {
    return std::find(opt.policies.begin(), opt.policies.end(), p) != opt.policies.end();
  };

  // Training-side artefacts per data condition (normal data, or a loss level).
  struct Trained {
    RoadNetwork network;
    std::optional<RewardModel> seirl;
    std::string seirl_error;
    Policy tr_expert;
    std::vector<double> train_flow;  // mean training expert flow
  };
  auto train_on = [&](const RoadNetwork& nw, const std::vector<ExpertVisitation>& ex, bool clean) {
    Trained t{nw, std::nullopt, {}, {}, {}};
    std::vector<double> counts(net.num_edges(), 0.0);
    t.train_flow.assign(net.num_edges(), 0.0);
    for (const auto& e : ex) {
      const auto c = e.total_counts();
      for (std::size_t a = 0; a < counts.size(); ++a) {
        counts[a] += c[a];
        t.train_flow[a] += e.mu_E[a] / static_cast<double>(ex.size());
      }
    }
    t.tr_expert = baseline_tr_expert(net, counts);
    if (clean && opt.pretrained) {
      t.seirl = opt.pretrained;
    } else if (wants("SEIRL")) {
      try {
        t.seirl = seirl_learn(nw, train, ex, opt.seirl).model;
      } catch (const Error& err) {
        t.seirl_error = err.what();
      }
    }
    return t;
  };

  std::optional<Trained> normal;
  for (const auto& pert : opt.perturbations) {
    const double loss = detail::loss_fraction(pert);
    if (pert != "normal" && pert != "disabled" && loss <= 0.0)
      throw ValidationError("evalkit", "unknown perturbation '" + pert + "'");
    std::optional<Trained> lossy;
    if (loss > 0.0) {
      auto dl = perturb_data_loss(net, train_expert, loss, opt.seed);
      lossy = train_on(dl.network, dl.experts, false);
    } else if (!normal) {
      normal = train_on(net, train_expert, true);
    }
    const Trained& tr = loss > 0.0 ? *lossy : *normal;

    for (std::size_t c = 0; c < test.size(); ++c) {
      Context ctx = test[c];
      ExpertVisitation truth = test_expert[c];
      std::string setup_error;
      if (pert == "disabled") {
        const auto busiest = static_cast<NodeId>(
            std::max_element(ctx.lambda.begin(), ctx.lambda.end()) - ctx.lambda.begin());
        const auto region = region_around(net, busiest, opt.region_fraction);
        ctx = perturb_disable_region(ctx, region);
        if (!opt.regenerate_expert) {
          setup_error = "no expert generator for the disabled region";
        } else {
          try {
            truth = opt.regenerate_expert(ctx);
          } catch (const Error& err) {
            setup_error = err.what();
          }
        }
      }
      auto cell = [&](const std::string& policy, auto&& flow_of) {
        if (!wants(policy)) return;
        ReportRow row{policy, test[c].id, pert, std::numeric_limits<double>::quiet_NaN(), {}};
        if (!setup_error.empty()) {
          row.flags = setup_error;
        } else {
          try {
            row.mdr = flow_of();
          } catch (const Error& err) {
            row.flags = err.what();
          }
        }
        rep.rows.push_back(std::move(row));
      };
      cell("Expert", [&] { return expert_floor(truth, lengths); });
      // Every cell starts from the training flow and retries with smaller alpha.
      const FlowBelief start{state_flow_from_actions(net, tr.train_flow), tr.train_flow};
      const int halvings = opt.seirl.max_alpha_halvings;
      cell("SEIRL", [&] {
        if (!tr.seirl) throw ConvergenceError("evalkit", "SEIRL training failed: " + tr.seirl_error);
        const auto reward = reward_spec(tr.network, tr.seirl->theta_for(ctx.id), false);
        const auto sol = with_alpha_retries(opt.solver, halvings, [&](const SolverParams& p) {
          return solve_equilibrium(tr.network, ctx, reward, p, start);
        });
        return mdr(truth.mu_E, sol.flow.mu_action, lengths);
      });
      cell("Tr-Expert", [&] {
        const auto sol = with_alpha_retries(opt.solver, halvings, [&](const SolverParams& p) {
          return fixed_policy_flow(net, ctx, tr.tr_expert, p, start);
        });
        return mdr(truth.mu_E, sol.flow.mu_action, lengths);
      });
      cell("Opt", [&] {
        const auto pol = baseline_opt(net, ctx, tr.train_flow, opt.solver);
        const auto sol = with_alpha_retries(opt.solver, halvings, [&](const SolverParams& p) {
          return fixed_policy_flow(net, ctx, pol, p, start);
        });
        return mdr(truth.mu_E, sol.flow.mu_action, lengths);
      });
      cell("SE-Opt", [&] {
        const auto sol = with_alpha_retries(opt.solver, halvings, [&](const SolverParams& p) {
          return solve_equilibrium(net, ctx, travel_time_reward(net), p, start);
        });
        return mdr(truth.mu_E, sol.flow.mu_action, lengths);
      });
    }
  }
  return rep;
}

/// Ground-truth regenerator for synthetic worlds: the theta* equilibrium of
/// the perturbed context plus daily draws.
inline std::function<ExpertVisitation(const Context&)> synthetic_expert_source(const RoadNetwork& net,
                                                                              std::vector<double> theta_star,
                                                                              ExpertOptions eo,
                                                                              SolverParams p = {}) {
  return [&net, theta_star = std::move(theta_star), eo, p](const Context& ctx) {
    return generate_expert(net, {ctx}, theta_star, eo, p).expert.front();
  };
}

}  // namespace seirl
