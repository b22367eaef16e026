// seirl: command-line pipelines over the library. Every run writes into a
// fresh output directory: config.json (resolved options, replayable with
// --config), metadata.json (the only file carrying timestamps), the command's
// artifacts, and error.json when the run fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seirl/seirl.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace seirl;

namespace {

constexpr const char* kRunRootEnv = "SEIRL_RUN_ROOT";

// ---------------------------------------------------------------------------
// JSON config files: {"<subcommand>": {"<option>": value}}. Top-level scalars
// apply to the subcommand named on the command line.

class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(std::string active) : active_(std::move(active)) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        for (const auto& [name, v] : value.items())
          if (!v.is_null()) items.push_back(item({key}, name, v));
      } else if (!value.is_null()) {
        items.push_back(item(active_.empty() ? std::vector<std::string>{} : std::vector<std::string>{active_}, key,
                             value));
      }
    }
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static CLI::ConfigItem item(std::vector<std::string> parents, const std::string& name, const json& v) {
    CLI::ConfigItem it;
    it.parents = std::move(parents);
    it.name = name;
    if (v.is_array()) {
      for (const auto& x : v) it.inputs.push_back(scalar(x));
    } else {
      it.inputs.push_back(scalar(v));
    }
    return it;
  }

  std::string active_;
};

json to_json_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (!s.empty() && end == s.c_str() + s.size() && std::isfinite(d)) {
    if (s.find_first_of(".eE") == std::string::npos) {
      try {
        return std::stoll(s);
      } catch (const std::exception&) {
      }
    }
    return d;
  }
  return s;
}

/// Resolved option values of a subcommand, keyed by long name.
json echo_options(const CLI::App& sub) {
  json out = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "out" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      out[name] = opt->count() > 0 ? opt->as<bool>() : false;
      continue;
    }
    std::vector<std::string> vals = opt->results();
    if (opt->count() == 0) {
      std::string d = opt->get_default_str();
      vals.clear();
      if (d == "{}") {
        // empty container
      } else if (d.size() >= 2 && d.front() == '[' && d.back() == ']') {
        std::stringstream ss(d.substr(1, d.size() - 2));
        for (std::string v; std::getline(ss, v, ',');) vals.push_back(v);
      } else if (!d.empty()) {
        vals.push_back(d);
      }
    }
    const bool text = opt->get_type_name().find("TEXT") != std::string::npos;
    auto value = [&](const std::string& v) { return text ? json(v) : to_json_value(v); };
    if (opt->get_expected_max() > 1) {
      json arr = json::array();
      for (const auto& v : vals) arr.push_back(value(v));
      out[name] = std::move(arr);
    } else {
      if (!vals.empty()) out[name] = value(vals.front());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run directory

fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    const char* root = std::getenv(kRunRootEnv);
    if (root && *root) p = fs::path(root) / p;
  }
  return p;
}

void open_run_dir(const fs::path& dir) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir)))
    throw ValidationError("cli", "output directory " + dir.string() + " already holds files; outputs are write-once");
  fs::create_directories(dir);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Helpers shared by the subcommands

/// Runs f(0..n-1) on up to `jobs` threads; results keep index order and the
/// first failure (by index) is rethrown.
template <class F>
auto parallel_map(std::size_t n, int jobs, F&& f) {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> res(n);
  std::vector<std::exception_ptr> err(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        res[i] = f(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  const auto k = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& r : res) out.push_back(std::move(*r));
  return out;
}

std::vector<Context> select_contexts(const std::vector<Context>& all, const std::vector<std::string>& ids) {
  if (ids.empty()) return all;
  std::vector<Context> out;
  for (const auto& id : ids) out.push_back(io::find_context(all, id));
  return out;
}

/// Reward source for solve/simulate/sweep: a learned model (theta.json), a
/// plain weight file ({"theta": [...]}) or the world's theta*.
struct RewardSource {
  std::optional<RewardModel> model;
  std::vector<double> plain;

  const std::vector<double>& theta_for(const std::string& id) const { return model ? model->theta_for(id) : plain; }
};

RewardSource load_reward(const io::LoadedWorld& w, const std::string& theta_path, bool travel_time) {
  RewardSource r;
  if (travel_time) {
    if (!theta_path.empty()) throw ValidationError("cli", "--theta and --travel-time are exclusive");
    r.plain.assign(w.network.feature_dim(), 0.0);
    const auto names = w.network.feature_names();
    const auto it = std::find(names.begin(), names.end(), "travel_time");
    if (it == names.end()) throw ValidationError("cli", "network has no travel_time feature");
    r.plain[static_cast<std::size_t>(it - names.begin())] = 1.0;
    return r;
  }
  if (theta_path.empty()) {
    if (w.theta_star.empty()) throw ValidationError("cli", "no reward given: pass --theta or use a world with theta_star.json");
    r.plain = w.theta_star;
    return r;
  }
  const auto j = io::read_json(theta_path);
  const auto& th = j.at("theta");
  if (th.is_array() && !th.empty() && th.front().is_array()) {
    r.model = io::model_from_json(j, theta_path);
  } else {
    r.plain = th.get<std::vector<double>>();
    for (double v : r.plain)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("cli", theta_path + ": theta must be finite and >= 0");
  }
  return r;
}

std::vector<ExpertVisitation> load_experts(const fs::path& dir, const std::vector<Context>& contexts, std::size_t m) {
  std::vector<ExpertVisitation> out;
  for (const auto& c : contexts) out.push_back(io::load_expert(dir, c.id, m));
  return out;
}

void add_solver_options(CLI::App* sub, SolverParams& p) {
  sub->add_option("--alpha", p.alpha, "Damping of the flow belief update")->group("Solver");
  sub->add_option("--beta", p.beta, "Soft-max temperature")->group("Solver");
  sub->add_option("--gamma", p.gamma, "Discount per time step")->group("Solver");
  sub->add_option("--epsilon", p.epsilon, "Outer-loop stop tolerance (MDR between beliefs)")->group("Solver");
  sub->add_option("--outer-max-iters", p.outer_max_iters, "Outer-loop iteration cap")->group("Solver");
  sub->add_option("--vi-tol", p.vi_tol, "Value-iteration tolerance")->group("Solver");
  sub->add_option("--vi-max-iters", p.vi_max_iters, "Value-iteration cap")->group("Solver");
  sub->add_option("--prop-tol", p.prop_tol, "Propagation tolerance")->group("Solver");
  sub->add_option("--prop-max-iters", p.prop_max_iters, "Propagation iteration cap")->group("Solver");
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return aa > 0.0 && bb > 0.0 ? ab / std::sqrt(aa * bb) : 0.0;
}

double relative_l2(const std::vector<double>& ref, const std::vector<double>& x) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) num += (x[i] - ref[i]) * (x[i] - ref[i]), den += ref[i] * ref[i];
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

json gradient_point(const std::vector<double>& fd, const std::vector<double>& approx) {
  return {{"fd", fd}, {"approx", approx}, {"cosine", cosine(fd, approx)}, {"relative_l2", relative_l2(fd, approx)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial-equilibrium taxi fleet modelling and reward learning"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.allow_config_extras(CLI::config_extras_mode::error);

  // The subcommand named on the command line, for flat config files.
  std::string active;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") {
      ++i;
    } else if (a[0] != '-') {
      active = a;
      break;
    }
  }
  app.config_formatter(std::make_shared<JsonConfig>(active));
  app.set_config("--config", "", "JSON config file: {\"<command>\": {\"<option>\": value}}; flags override it");

  std::string out_arg;
  int jobs = 1;
  std::function<void(const fs::path&)> run;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", out_arg,
                    std::string("Fresh run directory (relative paths resolve against $") + kRunRootEnv + ")")
        ->required();
    sub->add_option("--jobs", jobs, "Contexts processed concurrently")->check(CLI::PositiveNumber);
  };

  // gen-world ---------------------------------------------------------------
  std::string spec_path;
  ExpertOptions eo;
  bool no_expert = false;
  auto* gen = app.add_subcommand("gen-world", "Generate a synthetic world, its expert flows and demand draws");
  common(gen);
  gen->add_option("--spec", spec_path, "World spec JSON (missing keys keep the standard world's values)")
      ->check(CLI::ExistingFile);
  gen->add_option("--days", eo.n_days, "Days of expert data per context");
  gen->add_option("--slot-steps", eo.slot_steps, "Time steps covered by one daily draw");
  gen->add_option("--day-variation", eo.day_variation, "Daily supply factor spread");
  gen->add_option("--expert-seed", eo.seed, "Seed of the daily draws");
  gen->add_flag("--expert-pickup-bonus", eo.pickup_bonus, "Expert drivers also value rho * expected fare");
  gen->add_flag("--no-expert", no_expert, "Write the world only");
  gen->callback([&] {
    run = [&](const fs::path& dir) {
      const WorldSpec spec = spec_path.empty() ? standard_world_spec() : io::worldspec_from_json(io::read_json(spec_path), spec_path);
      const auto w = generate_world(spec);
      io::write_json(dir / "worldspec.json", io::worldspec_to_json(spec));
      io::save_world(dir, w.network, w.contexts, w.theta_star);
      if (no_expert) return;
      const auto data = parallel_map(w.contexts.size(), jobs, [&](std::size_t c) {
        // One context per call; stream c + 1 matches a single multi-context call.
        const auto& ctx = w.contexts[c];
        EquilibriumSolution sol;
        try {
          sol = solve_equilibrium(w.network, ctx, reward_spec(w.network, w.theta_star, eo.pickup_bonus));
        } catch (const ConvergenceError& err) {
          throw ValidationError("worldgen", "theta* has no equilibrium in context " + ctx.id + ": " + err.what());
        }
        ExpertVisitation ev;
        ContextDraws cd;
        sample_days(w.network, ctx, sol.flow, eo, c + 1, ev, cd);
        return std::make_pair(std::move(ev), std::move(cd));
      });
      for (const auto& [ev, cd] : data) {
        io::save_expert(dir, ev);
        io::save_draws(dir / ("draws_" + cd.context_id + ".csv"), cd);
      }
    };
  });

  // fit-demand --------------------------------------------------------------
  std::string world_dir, draws_dir;
  std::vector<std::string> context_ids;
  double exposure = ExpertOptions{}.slot_steps;
  DemandFitOptions fit_opt;
  auto* fit = app.add_subcommand("fit-demand", "Fit per-road demand (lambda, sigma) from daily pass and ride counts");
  common(fit);
  fit->add_option("--world", world_dir, "World directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--draws", draws_dir, "Directory holding draws_<context>.csv (default: the world directory)");
  fit->add_option("--context", context_ids, "Context ids (default: all)");
  fit->add_option("--exposure", exposure, "Time steps covered by each draw");
  fit->add_option("--grid", fit_opt.grid, "Coarse log-grid points per axis");
  fit->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      const fs::path src = draws_dir.empty() ? fs::path(world_dir) : fs::path(draws_dir);
      const auto ctxs = select_contexts(w.contexts, context_ids);
      const auto fits = parallel_map(ctxs.size(), jobs, [&](std::size_t c) {
        const auto draws = io::load_draws(src / ("draws_" + ctxs[c].id + ".csv"), w.network.num_nodes(), exposure);
        std::vector<DemandParams> p;
        for (const auto& d : draws) p.push_back(fit_demand_params(d, fit_opt));
        return p;
      });
      json summary = json::object();
      for (std::size_t c = 0; c < ctxs.size(); ++c) {
        io::save_demand_params(dir / ("demand_params_" + ctxs[c].id + ".csv"), fits[c]);
        int flagged = 0, within = 0, identified = 0;
        for (std::size_t s = 0; s < fits[c].size(); ++s) {
          const auto& p = fits[c][s];
          if (p.flags) ++flagged;
          if (p.flags & (kFitUnidentifiable | kFitInsufficientData)) continue;
          ++identified;
          const double truth = ctxs[c].lambda[s];
          within += std::abs(p.lambda - truth) <= 0.1 * truth;
        }
        summary[ctxs[c].id] = {{"nodes", fits[c].size()},
                               {"flagged", flagged},
                               {"identified", identified},
                               {"lambda_within_10pct_of_world", within}};
      }
      io::write_json(dir / "fit_summary.json", summary);
    };
  });

  // solve -------------------------------------------------------------------
  SolverParams solver;
  std::string theta_path;
  bool travel_time = false, pickup_bonus = false;
  auto* solve = app.add_subcommand("solve", "Solve the spatial equilibrium of each context");
  common(solve);
  solve->add_option("--world", world_dir, "World directory")->required()->check(CLI::ExistingDirectory);
  solve->add_option("--context", context_ids, "Context ids (default: all)");
  solve->add_option("--theta", theta_path, "Reward weights: theta.json from learn or {\"theta\": [...]} (default: theta*)");
  solve->add_flag("--travel-time", travel_time, "Use g = -tau (the SE-Opt reward)");
  solve->add_flag("--pickup-bonus", pickup_bonus, "Add rho * expected fare to the reward");
  add_solver_options(solve, solver);
  solve->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      const auto reward = load_reward(w, theta_path, travel_time);
      const auto ctxs = select_contexts(w.contexts, context_ids);
      const auto sols = parallel_map(ctxs.size(), jobs, [&](std::size_t c) {
        const auto spec = reward_spec(w.network, reward.theta_for(ctxs[c].id), pickup_bonus);
        return solve_equilibrium(w.network, ctxs[c], spec, solver);
      });
      for (std::size_t c = 0; c < ctxs.size(); ++c) {
        auto j = io::solution_to_json(w.network, sols[c]);
        const double sc = self_consistency_gap(w.network, sols[c], solver);
        j["diagnostics"]["self_consistency_gap"] = sc;
        j["diagnostics"]["self_consistent"] = sc < solver.epsilon;
        j["diagnostics"]["equilibrium_residual"] = equilibrium_residual(w.network, ctxs[c], sols[c], solver);
        io::write_json(dir / ("solution_" + ctxs[c].id + ".json"), j);
      }
    };
  });

  // learn -------------------------------------------------------------------
  SeirlOptions seirl;
  std::string expert_dir;
  bool no_fixed_effects = false, no_bootstrap = false;
  auto* learn = app.add_subcommand("learn", "Learn reward weights from expert flows (SEIRL)");
  common(learn);
  learn->add_option("--world", world_dir, "World directory")->required()->check(CLI::ExistingDirectory);
  learn->add_option("--expert", expert_dir, "Directory holding expert_<context>.csv (default: the world directory)");
  learn->add_option("--context", context_ids, "Training context ids (default: all)");
  learn->add_option("--iterations", seirl.iterations, "Gradient steps");
  learn->add_option("--eta0", seirl.eta0, "Initial learning rate");
  learn->add_option("--decay", seirl.decay, "Learning-rate decay per step");
  learn->add_option("--l2", seirl.l2, "L2 weight added to the gradient");
  learn->add_option("--seed", seirl.seed, "Seed of context and day sampling");
  learn->add_flag("--no-fixed-effects", no_fixed_effects, "Learn feature weights only");
  learn->add_flag("--no-bootstrap", no_bootstrap, "Use the mean expert flow at every step");
  add_solver_options(learn, seirl.solver);
  learn->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      const auto ctxs = select_contexts(w.contexts, context_ids);
      const auto ex = load_experts(expert_dir.empty() ? fs::path(world_dir) : fs::path(expert_dir), ctxs,
                                   w.network.num_edges());
      SeirlOptions o = seirl;
      o.fixed_effects = !no_fixed_effects;
      o.bootstrap_days = !no_bootstrap;
      o.jobs = jobs;
      const auto res = seirl_learn(w.network, ctxs, ex, o);
      io::write_json(dir / "theta.json", io::model_to_json(res.model));
      io::save_trace(dir / "trace.csv", res.trace);
      io::write_json(dir / "learn_summary.json", {{"best_mdr", res.best_mdr}, {"best_iter", res.best_iter}});
    };
  });

  // simulate ----------------------------------------------------------------
  SimConfig sim;
  std::string rho_mode = "equilibrium";
  std::string context_id;
  auto* simulate = app.add_subcommand("simulate", "Agent-level simulation of the equilibrium policy");
  common(simulate);
  simulate->add_option("--world", world_dir, "World directory")->required()->check(CLI::ExistingDirectory);
  simulate->add_option("--context", context_id, "Context id")->required();
  simulate->add_option("--theta", theta_path, "Reward weights (default: theta*)");
  simulate->add_flag("--pickup-bonus", pickup_bonus, "Add rho * expected fare to the reward");
  simulate->add_option("--agents", sim.n_agents, "Fleet size (0: the context's N)");
  simulate->add_option("--horizon", sim.horizon, "Simulated time steps");
  simulate->add_option("--warmup", sim.warmup, "Steps excluded from aggregation (-1: a quarter of the horizon)");
  simulate->add_option("--seed", sim.seed, "First seed");
  simulate->add_option("--seeds", sim.n_seeds, "Number of seeds averaged");
  simulate->add_option("--rho-mode", rho_mode, "equilibrium or instantaneous")
      ->check(CLI::IsMember({"equilibrium", "instantaneous"}));
  add_solver_options(simulate, solver);
  simulate->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      const auto reward = load_reward(w, theta_path, false);
      const auto& ctx = io::find_context(w.contexts, context_id);
      const auto sol = solve_equilibrium(w.network, ctx, reward_spec(w.network, reward.theta_for(ctx.id), pickup_bonus), solver);
      SimConfig cfg = sim;
      cfg.rho_mode = rho_mode == "instantaneous" ? RhoMode::kInstantaneous : RhoMode::kEquilibriumFixed;
      const auto res = run_simulation(w.network, ctx, sol.policy, sol.flow.rho, cfg);
      json seeds = json::array();
      for (const auto& s : res.per_seed)
        seeds.push_back({{"seed", s.seed}, {"rides", s.rides}, {"revenue", s.revenue}, {"empty_time", s.empty_time}});
      io::write_json(dir / "sim_result.json",
                     {{"config",
                       {{"context", ctx.id},
                        {"n_agents", res.n_agents},
                        {"horizon", res.horizon},
                        {"warmup", res.warmup},
                        {"seed", cfg.seed},
                        {"n_seeds", cfg.n_seeds},
                        {"rho_mode", rho_mode}}},
                      {"mu_action", res.mu_action},
                      {"rides_per_node", res.rides},
                      {"totals",
                       {{"rides_per_step", std::accumulate(res.rides.begin(), res.rides.end(), 0.0)},
                        {"revenue", res.revenue},
                        {"empty_time", res.empty_time},
                        {"conservation_ok", res.conservation_ok},
                        {"mdr_vs_equilibrium", mdr(sol.flow.mu_action, res.mu_action, w.network.edge_lengths())}}},
                      {"per_seed", seeds}});
    };
  });

  // evaluate ----------------------------------------------------------------
  SuiteOptions suite;
  std::vector<std::string> train_ids, test_ids;
  std::string model_path;
  auto* evaluate = app.add_subcommand("evaluate", "Imitation error of SEIRL and the baselines on test contexts");
  common(evaluate);
  evaluate->add_option("--world", world_dir, "World directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--expert", expert_dir, "Directory holding expert files (default: the world directory)");
  evaluate->add_option("--train", train_ids, "Training context ids")->required();
  evaluate->add_option("--test", test_ids, "Test context ids")->required();
  evaluate->add_option("--model", model_path, "theta.json trained on the unperturbed data (skips that training)");
  evaluate->add_option("--policies", suite.policies, "Policies to score");
  evaluate->add_option("--perturbations", suite.perturbations, "normal, disabled, lossN (N percent)");
  evaluate->add_option("--region-fraction", suite.region_fraction, "Share of nodes in the disabled region");
  evaluate->add_option("--seed", suite.seed, "Seed of the data-loss draw");
  evaluate->add_option("--iterations", suite.seirl.iterations, "SEIRL gradient steps");
  evaluate->add_option("--learn-seed", suite.seirl.seed, "SEIRL sampling seed");
  evaluate->add_option("--days", eo.n_days, "Days of regenerated expert data (disabled region)");
  evaluate->add_option("--expert-seed", eo.seed, "Seed of regenerated expert data");
  add_solver_options(evaluate, suite.solver);
  evaluate->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      const fs::path src = expert_dir.empty() ? fs::path(world_dir) : fs::path(expert_dir);
      const auto train = select_contexts(w.contexts, train_ids);
      const auto test = select_contexts(w.contexts, test_ids);
      const auto m = w.network.num_edges();
      SuiteOptions o = suite;
      o.seirl.jobs = jobs;
      o.seirl.solver = o.solver;
      if (!model_path.empty()) o.pretrained = io::model_from_json(io::read_json(model_path), model_path);
      if (!w.theta_star.empty()) o.regenerate_expert = synthetic_expert_source(w.network, w.theta_star, eo, o.solver);
      const auto rep = evaluate_suite(w.network, train, load_experts(src, train, m), test, load_experts(src, test, m), o);
      io::save_report(dir / "report.csv", rep);
      json means = json::object();
      for (const auto& pert : o.perturbations)
        for (const auto& pol : o.policies) {
          const double v = rep.mean(pol, pert);
          means[pert][pol] = std::isfinite(v) ? json(v) : json(nullptr);
        }
      io::write_json(dir / "summary.json", {{"train", train_ids}, {"test", test_ids}, {"mean_mdr", means}});
    };
  });

  // sweep -------------------------------------------------------------------
  std::vector<double> scales{0.5, 0.75, 1.0, 1.25, 1.5};
  double cost = 0.1;
  auto* sweep = app.add_subcommand("sweep", "Platform objective over fleet-size scales");
  common(sweep);
  sweep->add_option("--world", world_dir, "World directory")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--context", context_ids, "Context ids (default: all)");
  sweep->add_option("--theta", theta_path, "Reward weights (default: theta*)");
  sweep->add_flag("--pickup-bonus", pickup_bonus, "Add rho * expected fare to the reward");
  sweep->add_option("--scales", scales, "Fleet-size multipliers");
  sweep->add_option("--cost", cost, "Driving cost b per vehicle-step");
  add_solver_options(sweep, solver);
  sweep->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      const auto reward = load_reward(w, theta_path, false);
      const auto ctxs = select_contexts(w.contexts, context_ids);
      const auto res = parallel_map(ctxs.size(), jobs, [&](std::size_t c) {
        return supply_sweep(w.network, ctxs[c], reward_spec(w.network, reward.theta_for(ctxs[c].id), pickup_bonus),
                            scales, cost, solver);
      });
      io::save_sweep(dir / "sweep.csv", res);
      json best = json::object();
      for (const auto& r : res)
        best[r.context_id] = r.best >= 0 ? json(r.rows[static_cast<std::size_t>(r.best)].scale) : json(nullptr);
      io::write_json(dir / "optimal_scale.json", best);
    };
  });

  // grad-check --------------------------------------------------------------
  int points = 5;
  double h_step = 1e-4;
  std::uint64_t grad_seed = 3;
  std::vector<double> lambda_scales{1.0, 0.5};
  auto* grad = app.add_subcommand("grad-check",
                                  "Compare the finite-difference log-likelihood gradient with the approximate one");
  common(grad);
  grad->add_option("--world", world_dir, "World directory (needs theta_star.json)")->required()->check(CLI::ExistingDirectory);
  grad->add_option("--context", context_id, "Context id")->required();
  grad->add_option("--points", points, "Random theta points, each weight ~ U[0.5, 1.5]")->check(CLI::PositiveNumber);
  grad->add_option("--fd-step", h_step, "Central-difference step");
  grad->add_option("--seed", grad_seed, "Seed of the theta points");
  grad->add_option("--lambda-scales", lambda_scales, "Demand multipliers to compare");
  add_solver_options(grad, solver);
  grad->callback([&] {
    run = [&](const fs::path& dir) {
      const auto w = io::load_world(world_dir);
      if (w.theta_star.empty()) throw ValidationError("cli", "grad-check needs a world with theta_star.json");
      const auto& base = io::find_context(w.contexts, context_id);
      const auto& net = w.network;
      json runs = json::array();
      for (double ls : lambda_scales) {
        if (!(ls > 0.0)) throw ValidationError("cli", "lambda scales must be positive");
        Context ctx = base;
        for (double& l : ctx.lambda) l *= ls;
        const auto truth = solve_equilibrium(net, ctx, reward_spec(net, w.theta_star, false), solver);
        std::mt19937_64 rng(grad_seed);
        std::uniform_real_distribution<double> u(0.5, 1.5);
        json pts = json::array();
        std::vector<double> cos, err;
        for (int k = 0; k < points; ++k) {
          std::vector<double> th(net.feature_dim());
          for (double& v : th) v = u(rng);
          const auto sol = solve_equilibrium(net, ctx, reward_spec(net, th, false), solver);
          const auto approx = approx_gradient(net, truth.flow.mu_action, sol.flow.mu_action, th.size());
          const auto fd = finite_difference_loglik_gradient(net, ctx, th, truth.flow.mu_action, h_step, solver);
          auto p = gradient_point(fd, approx);
          p["theta"] = th;
          cos.push_back(p["cosine"].get<double>());
          err.push_back(p["relative_l2"].get<double>());
          pts.push_back(std::move(p));
        }
        runs.push_back({{"lambda_scale", ls},
                        {"max_rho", *std::max_element(truth.flow.rho.begin(), truth.flow.rho.end())},
                        {"min_cosine", *std::min_element(cos.begin(), cos.end())},
                        {"mean_relative_l2", mean_of(err)},
                        {"points", std::move(pts)}});
      }
      io::write_json(dir / "grad_check.json", {{"context", context_id}, {"runs", std::move(runs)}});
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const CLI::App* sub = app.get_subcommands().front();
  const auto start = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  fs::path dir;
  bool opened = false;
  auto metadata = [&](const std::string& status) {
    std::vector<std::string> args(argv, argv + argc);
    io::write_json(dir / "metadata.json",
                   {{"command", sub->get_name()},
                    {"argv", args},
                    {"out", fs::absolute(dir).string()},
                    {"started_utc", started},
                    {"elapsed_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
                    {"status", status}});
  };
  int code = 0;
  json error;
  try {
    dir = resolve_out(out_arg);
    open_run_dir(dir);
    opened = true;
    io::write_json(dir / "config.json", {{sub->get_name(), echo_options(*sub)}});
    run(dir);
    metadata("ok");
    return 0;
  } catch (const Error& e) {
    error = {{"module", e.module()}, {"kind", e.kind()}, {"message", e.message()}};
    if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e); ce && !ce->trace().empty())
      error["trace"] = ce->trace();
    code = std::string(e.kind()) == "validation" ? 2 : std::string(e.kind()) == "convergence" ? 3 : 4;
  } catch (const json::exception& e) {
    error = {{"module", "io"}, {"kind", "validation"}, {"message", e.what()}};
    code = 2;
  } catch (const std::exception& e) {
    error = {{"module", "cli"}, {"kind", "error"}, {"message", e.what()}};
    code = 1;
  }
  error["command"] = sub->get_name();
  std::cerr << error.dump() << std::endl;
  // Never write into a directory that held someone else's files.
  if (opened) {
    try {
      io::write_json(dir / "error.json", error);
      metadata("failed");
    } catch (const std::exception&) {
    }
  }
  return code;
}
