#pragma once

// JSON / CSV persistence for worlds, expert data, models and results.
//
// Doubles go through nlohmann::json's shortest round-trip formatting in JSON
// and 17 significant digits in CSV, so save -> load is exact.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "seirl/demand.hpp"
#include "seirl/equilibrium.hpp"
#include "seirl/errors.hpp"
#include "seirl/evalkit.hpp"
#include "seirl/expert.hpp"
#include "seirl/irl.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/reward.hpp"
#include "seirl/simulate.hpp"
#include "seirl/worldgen.hpp"

namespace seirl::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("io", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& err) {
    throw ValidationError("io", path.string() + ": " + err.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("io", "cannot write " + path.string());
  out << text;
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

// Reads a field, turning nlohmann's type errors into ValidationErrors that
// name the file and key.
template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError("io", where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& err) {
    throw ValidationError("io", where + ": field '" + key + "': " + err.what());
  }
}

// ---------------------------------------------------------------------------
// Network and contexts

inline json network_to_json(const RoadNetwork& net) {
  json j;
  j["feature_names"] = net.feature_names();
  json nodes = json::array();
  for (std::size_t s = 0; s < net.num_nodes(); ++s) {
    const auto& nd = net.node(static_cast<NodeId>(s));
    nodes.push_back({{"id", s}, {"length_m", nd.length_m}, {"x", nd.x}, {"y", nd.y}});
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (std::size_t e = 0; e < net.num_edges(); ++e) {
    const auto id = static_cast<EdgeId>(e);
    const auto f = net.features(id);
    edges.push_back({{"id", e},
                     {"src", net.src(id)},
                     {"dst", net.dst(id)},
                     {"tau", net.tau(id)},
                     {"features", std::vector<double>(f.begin(), f.end())}});
  }
  j["edges"] = std::move(edges);
  return j;
}

inline RoadNetwork network_from_json(const json& j, const std::string& where = "network.json") {
  const auto names = field<std::vector<std::string>>(j, "feature_names", where);
  const auto& jn = j.at("nodes");
  const auto& je = j.at("edges");
  std::vector<NodeSpec> nodes(jn.size());
  for (std::size_t i = 0; i < jn.size(); ++i) {
    const auto at = where + " node " + std::to_string(i);
    if (field<std::size_t>(jn[i], "id", at) != i) throw ValidationError("io", at + ": ids must be dense 0..S-1 in order");
    nodes[i].length_m = field<double>(jn[i], "length_m", at);
    nodes[i].x = jn[i].value("x", 0.0);
    nodes[i].y = jn[i].value("y", 0.0);
  }
  std::vector<EdgeSpec> edges(je.size());
  for (std::size_t i = 0; i < je.size(); ++i) {
    const auto at = where + " edge " + std::to_string(i);
    if (field<std::size_t>(je[i], "id", at) != i) throw ValidationError("io", at + ": ids must be dense 0..E-1 in order");
    edges[i].src = field<NodeId>(je[i], "src", at);
    edges[i].dst = field<NodeId>(je[i], "dst", at);
    edges[i].tau = field<std::int32_t>(je[i], "tau", at);
    edges[i].features = field<std::vector<double>>(je[i], "features", at);
  }
  return RoadNetwork(std::move(nodes), std::move(edges), names);
}

inline json context_to_json(const Context& ctx) {
  json j;
  j["id"] = ctx.id;
  j["lambda"] = ctx.lambda;
  j["sigma"] = ctx.sigma;
  j["dropoff"] = ctx.dropoff;
  j["N"] = ctx.fleet_size;
  j["h"] = ctx.mean_ride_time;
  json rows = json::array();
  for (const auto& row : ctx.dest) {
    json r = json::array();
    for (const auto& d : row) r.push_back({{"to", d.node}, {"p", d.prob}, {"ride_time", d.ride_time}, {"fare", d.fare}});
    rows.push_back(std::move(r));
  }
  j["dest"] = std::move(rows);
  j["expected_fare"] = ctx.expected_fare;
  return j;
}

/// Parses and validates; dropoff and h are derived when absent.
inline Context context_from_json(const RoadNetwork& net, const json& j, const std::string& where) {
  Context ctx;
  ctx.id = field<std::string>(j, "id", where);
  ctx.lambda = field<std::vector<double>>(j, "lambda", where);
  ctx.sigma = field<std::vector<double>>(j, "sigma", where);
  if (j.contains("dropoff")) ctx.dropoff = field<std::vector<double>>(j, "dropoff", where);
  ctx.fleet_size = field<double>(j, "N", where);
  ctx.mean_ride_time = j.contains("h") ? field<double>(j, "h", where) : 0.0;
  const auto& rows = j.at("dest");
  for (std::size_t s = 0; s < rows.size(); ++s) {
    std::vector<Destination> row;
    for (const auto& d : rows[s]) {
      const auto at = where + " dest row " + std::to_string(s);
      row.push_back({field<NodeId>(d, "to", at), field<double>(d, "p", at), field<std::int32_t>(d, "ride_time", at),
                     field<double>(d, "fare", at)});
    }
    ctx.dest.push_back(std::move(row));
  }
  Context done = finalize_context(net, std::move(ctx));
  if (j.contains("expected_fare")) {
    const auto stored = field<std::vector<double>>(j, "expected_fare", where);
    if (stored.size() != done.expected_fare.size())
      throw ValidationError("io", where + ": expected_fare has wrong size");
    for (std::size_t s = 0; s < stored.size(); ++s)
      if (std::abs(stored[s] - done.expected_fare[s]) > 1e-12 * std::max(1.0, std::abs(stored[s])))
        throw ValidationError("io", where + ": node " + std::to_string(s) + ": expected_fare inconsistent with dest/fare");
  }
  return done;
}

inline json worldspec_to_json(const WorldSpec& w) {
  return {{"topology", w.topology},
          {"rows", w.rows},
          {"cols", w.cols},
          {"num_nodes", w.num_nodes},
          {"edge_density", w.edge_density},
          {"spacing_m", w.spacing_m},
          {"step_seconds", w.step_seconds},
          {"road_classes", w.road_classes},
          {"class_share", w.class_share},
          {"class_speed_mps", w.class_speed_mps},
          {"hotspots", w.hotspots},
          {"base_lambda", w.base_lambda},
          {"peak_lambda", w.peak_lambda},
          {"hotspot_radius", w.hotspot_radius},
          {"sigma_min", w.sigma_min},
          {"sigma_max", w.sigma_max},
          {"contexts", w.contexts},
          {"drift", w.drift},
          {"destinations", w.destinations},
          {"fare_base", w.fare_base},
          {"fare_per_step", w.fare_per_step},
          {"fleet_size", w.fleet_size},
          {"theta_star", w.theta_star},
          {"profile_feature", w.profile_feature},
          {"ride_time_passes", w.ride_time_passes},
          {"seed", w.seed}};
}

/// Missing keys keep the standard defaults; unknown keys are rejected.
inline WorldSpec worldspec_from_json(const json& j, const std::string& where = "world spec") {
  WorldSpec w;
  const json known = worldspec_to_json(w);
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw ValidationError("io", where + ": unknown key '" + key + "'");
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = field<std::decay_t<decltype(dst)>>(j, key, where);
  };
  get("topology", w.topology);
  get("rows", w.rows);
  get("cols", w.cols);
  get("num_nodes", w.num_nodes);
  get("edge_density", w.edge_density);
  get("spacing_m", w.spacing_m);
  get("step_seconds", w.step_seconds);
  get("road_classes", w.road_classes);
  get("class_share", w.class_share);
  get("class_speed_mps", w.class_speed_mps);
  get("hotspots", w.hotspots);
  get("base_lambda", w.base_lambda);
  get("peak_lambda", w.peak_lambda);
  get("hotspot_radius", w.hotspot_radius);
  get("sigma_min", w.sigma_min);
  get("sigma_max", w.sigma_max);
  get("contexts", w.contexts);
  get("drift", w.drift);
  get("destinations", w.destinations);
  get("fare_base", w.fare_base);
  get("fare_per_step", w.fare_per_step);
  get("fleet_size", w.fleet_size);
  get("theta_star", w.theta_star);
  get("profile_feature", w.profile_feature);
  get("ride_time_passes", w.ride_time_passes);
  get("seed", w.seed);
  return w;
}

struct LoadedWorld {
  RoadNetwork network;
  std::vector<Context> contexts;
  std::vector<double> theta_star;  // empty when the world has no ground truth
};

/// Writes network.json, context_<id>.json for each context, contexts.json
/// (the id list) and, when known, theta_star.json.
inline void save_world(const fs::path& dir, const RoadNetwork& net, const std::vector<Context>& contexts,
                       const std::vector<double>& theta_star = {}) {
  fs::create_directories(dir);
  write_json(dir / "network.json", network_to_json(net));
  json ids = json::array();
  for (const auto& c : contexts) {
    write_json(dir / ("context_" + c.id + ".json"), context_to_json(c));
    ids.push_back(c.id);
  }
  write_json(dir / "contexts.json", ids);
  if (!theta_star.empty())
    write_json(dir / "theta_star.json", {{"feature_names", net.feature_names()}, {"theta", theta_star}});
}

inline LoadedWorld load_world(const fs::path& dir) {
  const auto net = network_from_json(read_json(dir / "network.json"), (dir / "network.json").string());
  LoadedWorld w{net, {}, {}};
  std::vector<std::string> ids;
  if (fs::exists(dir / "contexts.json")) {
    ids = read_json(dir / "contexts.json").get<std::vector<std::string>>();
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("context_", 0) == 0 && entry.path().extension() == ".json")
        ids.push_back(name.substr(8, name.size() - 13));
    }
    std::sort(ids.begin(), ids.end());
  }
  for (const auto& id : ids) {
    const auto path = dir / ("context_" + id + ".json");
    w.contexts.push_back(context_from_json(w.network, read_json(path), path.string()));
  }
  if (fs::exists(dir / "theta_star.json"))
    w.theta_star = read_json(dir / "theta_star.json").at("theta").get<std::vector<double>>();
  return w;
}

inline const Context& find_context(const std::vector<Context>& contexts, const std::string& id) {
  for (const auto& c : contexts)
    if (c.id == id) return c;
  throw ValidationError("io", "unknown context '" + id + "'");
}

// ---------------------------------------------------------------------------
// CSV helpers

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

// Splits on commas, keeping empty trailing fields.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char ch : line) {
    if (ch == ',')
      out.emplace_back();
    else
      out.back() += ch;
  }
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("io", path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (split_csv_line(line) != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    throw ValidationError("io", path.string() + ": expected header '" + want + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    if (row.size() != header.size())
      throw ValidationError("io", path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("io", path.string() + ": not a number: '" + s + "'");
  }
}

inline std::int64_t to_int(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("io", path.string() + ": not an integer: '" + s + "'");
  }
}

// ---------------------------------------------------------------------------
// Expert data and demand draws

/// expert_<id>.csv (edge_id, mu_E) and, when daily counts exist,
/// expert_days_<id>.csv (day, edge_id, count) with zero counts omitted.
inline void save_expert(const fs::path& dir, const ExpertVisitation& ex) {
  std::ostringstream out;
  out << "edge_id,mu_E\n";
  for (std::size_t e = 0; e < ex.mu_E.size(); ++e) out << e << ',' << fmt(ex.mu_E[e]) << '\n';
  write_text(dir / ("expert_" + ex.context_id + ".csv"), out.str());
  if (ex.daily_counts.empty()) return;
  std::ostringstream days;
  days << "day,edge_id,count\n";
  for (std::size_t d = 0; d < ex.daily_counts.size(); ++d)
    for (std::size_t e = 0; e < ex.daily_counts[d].size(); ++e)
      if (ex.daily_counts[d][e] != 0) days << d << ',' << e << ',' << ex.daily_counts[d][e] << '\n';
  write_text(dir / ("expert_days_" + ex.context_id + ".csv"), days.str());
  write_json(dir / ("expert_meta_" + ex.context_id + ".json"),
             {{"slot_steps", ex.slot_steps}, {"days", ex.daily_counts.size()}});
}

inline ExpertVisitation load_expert(const fs::path& dir, const std::string& context_id, std::size_t num_edges) {
  ExpertVisitation ex;
  ex.context_id = context_id;
  const auto path = dir / ("expert_" + context_id + ".csv");
  ex.mu_E.assign(num_edges, 0.0);
  std::vector<char> seen(num_edges, 0);
  for (const auto& row : read_csv(path, {"edge_id", "mu_E"})) {
    const auto e = to_int(row[0], path);
    if (e < 0 || static_cast<std::size_t>(e) >= num_edges)
      throw ValidationError("io", path.string() + ": edge id " + row[0] + " out of range");
    const double v = to_double(row[1], path);
    if (!(v >= 0.0)) throw ValidationError("io", path.string() + ": edge " + row[0] + ": mu_E must be >= 0");
    ex.mu_E[static_cast<std::size_t>(e)] = v;
    seen[static_cast<std::size_t>(e)] = 1;
  }
  for (std::size_t e = 0; e < num_edges; ++e)
    if (!seen[e]) throw ValidationError("io", path.string() + ": edge " + std::to_string(e) + " missing");
  const auto meta = dir / ("expert_meta_" + context_id + ".json");
  const auto days_path = dir / ("expert_days_" + context_id + ".csv");
  if (fs::exists(meta) && fs::exists(days_path)) {
    const auto m = read_json(meta);
    ex.slot_steps = m.at("slot_steps").get<double>();
    ex.daily_counts.assign(m.at("days").get<std::size_t>(), std::vector<std::int32_t>(num_edges, 0));
    for (const auto& row : read_csv(days_path, {"day", "edge_id", "count"})) {
      const auto d = to_int(row[0], days_path);
      const auto e = to_int(row[1], days_path);
      if (d < 0 || static_cast<std::size_t>(d) >= ex.daily_counts.size() || e < 0 ||
          static_cast<std::size_t>(e) >= num_edges)
        throw ValidationError("io", days_path.string() + ": day/edge out of range");
      ex.daily_counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(e)] =
          static_cast<std::int32_t>(to_int(row[2], days_path));
    }
  }
  return ex;
}

/// draws_<id>.csv: node_id, day, mu (passes), m (rides).
inline void save_draws(const fs::path& path, const ContextDraws& cd) {
  std::ostringstream out;
  out << "node_id,day,mu,m\n";
  for (std::size_t s = 0; s < cd.nodes.size(); ++s)
    for (std::size_t d = 0; d < cd.nodes[s].flow.size(); ++d)
      out << s << ',' << d << ',' << cd.nodes[s].flow[d] << ',' << cd.nodes[s].rides[d] << '\n';
  write_text(path, out.str());
}

inline std::vector<DemandDraws> load_draws(const fs::path& path, std::size_t num_nodes, double exposure) {
  std::vector<DemandDraws> nodes(num_nodes, DemandDraws{{}, {}, exposure});
  for (const auto& row : read_csv(path, {"node_id", "day", "mu", "m"})) {
    const auto s = to_int(row[0], path);
    if (s < 0 || static_cast<std::size_t>(s) >= num_nodes)
      throw ValidationError("io", path.string() + ": node id " + row[0] + " out of range");
    const auto mu = to_int(row[2], path);
    const auto m = to_int(row[3], path);
    if (mu < 0 || m < 0 || m > mu)
      throw ValidationError("io", path.string() + ": node " + row[0] + " day " + row[1] + ": need 0 <= m <= mu");
    nodes[static_cast<std::size_t>(s)].flow.push_back(mu);
    nodes[static_cast<std::size_t>(s)].rides.push_back(m);
  }
  return nodes;
}

inline void save_demand_params(const fs::path& path, const std::vector<DemandParams>& params) {
  std::ostringstream out;
  out << "node_id,lambda,sigma,loglik,flags\n";
  for (std::size_t s = 0; s < params.size(); ++s)
    out << s << ',' << fmt(params[s].lambda) << ',' << fmt(params[s].sigma) << ',' << fmt(params[s].loglik) << ','
        << params[s].flags << '\n';
  write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// Models and results

inline json model_to_json(const RewardModel& m) {
  json groups = json::object();
  for (const auto& [id, g] : m.group_of) groups[id] = g;
  return {{"feature_names", m.feature_names},
          {"fixed_effects", m.fixed_effects},
          {"include_pickup_bonus", m.include_pickup_bonus},
          {"theta", m.theta},
          {"context_group", groups}};
}

inline RewardModel model_from_json(const json& j, const std::string& where = "theta.json") {
  RewardModel m;
  m.feature_names = field<std::vector<std::string>>(j, "feature_names", where);
  m.fixed_effects = field<bool>(j, "fixed_effects", where);
  m.include_pickup_bonus = field<bool>(j, "include_pickup_bonus", where);
  m.theta = field<std::vector<std::vector<double>>>(j, "theta", where);
  if (j.contains("context_group"))
    for (const auto& [id, g] : j.at("context_group").items()) m.group_of[id] = g.get<std::size_t>();
  for (const auto& th : m.theta)
    for (double v : th)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("io", where + ": theta must be finite and >= 0");
  if (m.theta.empty()) throw ValidationError("io", where + ": no theta groups");
  return m;
}

inline void save_trace(const fs::path& path, const TrainingTrace& trace) {
  std::ostringstream out;
  out << "iter,grad_norm,mdr,eta,theta_hash,alpha,skipped\n";
  for (const auto& r : trace.rows)
    out << r.iter << ',' << fmt(r.grad_norm) << ',' << fmt(r.mdr) << ',' << fmt(r.eta) << ',' << r.theta_hash << ','
        << fmt(r.alpha) << ',' << (r.skipped ? 1 : 0) << '\n';
  write_text(path, out.str());
}

inline json solution_to_json(const RoadNetwork& net, const EquilibriumSolution& sol) {
  json policy = json::array();
  for (std::size_t s = 0; s < net.num_nodes(); ++s) {
    json row = json::array();
    for (EdgeId e : net.out_edges(static_cast<NodeId>(s)))
      row.push_back({{"edge", e}, {"p", sol.policy.prob[static_cast<std::size_t>(e)]}});
    policy.push_back(std::move(row));
  }
  return {{"V", sol.values.V},
          {"policy", std::move(policy)},
          {"beta", sol.policy.beta},
          {"mu_state", sol.flow.mu_state},
          {"mu_action", sol.flow.mu_action},
          {"mu0", sol.flow.mu0},
          {"rho", sol.flow.rho},
          {"diagnostics",
           {{"outer_iterations", sol.outer_iterations},
            {"final_gap", sol.final_gap},
            {"converged", sol.converged},
            {"clamped", sol.clamped},
            {"gap_trace", sol.gap_trace}}}};
}

/// Policy, flow and diagnostics of a saved solution (values kept as V only).
inline EquilibriumSolution solution_from_json(const RoadNetwork& net, const json& j,
                                              const std::string& where = "solution") {
  EquilibriumSolution sol;
  sol.values.V = field<std::vector<double>>(j, "V", where);
  sol.policy.beta = field<double>(j, "beta", where);
  sol.policy.prob.assign(net.num_edges(), 0.0);
  const auto& rows = j.at("policy");
  if (rows.size() != net.num_nodes()) throw ValidationError("io", where + ": policy has wrong row count");
  for (const auto& row : rows)
    for (const auto& cell : row) {
      const auto e = field<EdgeId>(cell, "edge", where);
      if (e < 0 || static_cast<std::size_t>(e) >= net.num_edges()) throw ValidationError("io", where + ": edge out of range");
      sol.policy.prob[static_cast<std::size_t>(e)] = field<double>(cell, "p", where);
    }
  sol.flow.mu_state = field<std::vector<double>>(j, "mu_state", where);
  sol.flow.mu_action = field<std::vector<double>>(j, "mu_action", where);
  sol.flow.mu0 = field<std::vector<double>>(j, "mu0", where);
  sol.flow.rho = field<std::vector<double>>(j, "rho", where);
  if (sol.flow.mu_action.size() != net.num_edges() || sol.flow.rho.size() != net.num_edges() ||
      sol.flow.mu_state.size() != net.num_nodes() || sol.flow.mu0.size() != net.num_nodes())
    throw ValidationError("io", where + ": flow has wrong dimensions");
  const auto& d = j.at("diagnostics");
  sol.outer_iterations = field<int>(d, "outer_iterations", where);
  sol.final_gap = field<double>(d, "final_gap", where);
  sol.converged = field<bool>(d, "converged", where);
  sol.clamped = field<bool>(d, "clamped", where);
  return sol;
}

inline void save_report(const fs::path& path, const EvalReport& rep) {
  std::ostringstream out;
  out << "policy,context,perturbation,mdr,flags\n";
  for (const auto& r : rep.rows) {
    std::string flags = r.flags;
    std::replace(flags.begin(), flags.end(), ',', ';');
    std::replace(flags.begin(), flags.end(), '\n', ' ');
    out << r.policy << ',' << r.context << ',' << r.perturbation << ',' << fmt(r.mdr) << ',' << flags << '\n';
  }
  write_text(path, out.str());
}

inline void save_sweep(const fs::path& path, const std::vector<SweepResult>& sweeps) {
  std::ostringstream out;
  out << "context_id,scale,N,objective,converged,best\n";
  for (const auto& sw : sweeps)
    for (std::size_t i = 0; i < sw.rows.size(); ++i) {
      const auto& r = sw.rows[i];
      out << sw.context_id << ',' << fmt(r.scale) << ',' << fmt(r.fleet_size) << ',' << fmt(r.objective) << ','
          << (r.converged ? 1 : 0) << ',' << (static_cast<int>(i) == sw.best ? 1 : 0) << '\n';
    }
  write_text(path, out.str());
}

}  // namespace seirl::io
