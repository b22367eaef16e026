#pragma once

// Road network and per-time-slot environment parameters.
//
// Nodes are road segments; edges are the transitions (actions) between them.
// Both are addressed by dense integer ids. A RoadNetwork is immutable once
// built, so any number of solvers may read it concurrently.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seirl/errors.hpp"

namespace seirl {

using NodeId = std::int32_t;
using EdgeId = std::int32_t;

struct NodeSpec {
  double length_m = 0.0;
  // Planar coordinates in meters; optional, used by generators and plots.
  double x = 0.0;
  double y = 0.0;
};

struct EdgeSpec {
  NodeId src = 0;
  NodeId dst = 0;
  std::int32_t tau = 1;           // travel time in time steps
  std::vector<double> features;  // fixed dimension across edges
};

class RoadNetwork {
 public:
  RoadNetwork() = default;

  /// Builds forward and reverse CSR adjacency and checks every invariant
  /// (ids in range, tau >= 1, lengths > 0, finite features, out-degree >= 1,
  /// strong connectivity). Throws ValidationError naming the offender.
  RoadNetwork(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges,
              std::vector<std::string> feature_names);

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_edges() const noexcept { return src_.size(); }
  std::size_t feature_dim() const noexcept { return feature_names_.size(); }

  NodeId src(EdgeId e) const { return src_[static_cast<std::size_t>(e)]; }
  NodeId dst(EdgeId e) const { return dst_[static_cast<std::size_t>(e)]; }
  std::int32_t tau(EdgeId e) const { return tau_[static_cast<std::size_t>(e)]; }
  double node_length(NodeId s) const { return nodes_[static_cast<std::size_t>(s)].length_m; }
  const NodeSpec& node(NodeId s) const { return nodes_[static_cast<std::size_t>(s)]; }

  /// Length attributed to an action: the length of the segment it departs.
  double edge_length(EdgeId e) const { return node_length(src(e)); }

  std::span<const double> features(EdgeId e) const {
    const auto f = feature_dim();
    return {features_.data() + static_cast<std::size_t>(e) * f, f};
  }
  std::span<const double> feature_matrix() const noexcept { return features_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  std::span<const EdgeId> out_edges(NodeId s) const {
    const auto i = static_cast<std::size_t>(s);
    return {out_index_.data() + out_offset_[i], out_offset_[i + 1] - out_offset_[i]};
  }
  std::span<const EdgeId> in_edges(NodeId s) const {
    const auto i = static_cast<std::size_t>(s);
    return {in_index_.data() + in_offset_[i], in_offset_[i + 1] - in_offset_[i]};
  }

  std::span<const NodeId> sources() const noexcept { return src_; }
  std::span<const NodeId> destinations() const noexcept { return dst_; }
  std::span<const std::int32_t> travel_times() const noexcept { return tau_; }
  const std::vector<NodeSpec>& nodes() const noexcept { return nodes_; }

  /// Per-edge lengths in edge order (the MDR weights).
  std::vector<double> edge_lengths() const {
    std::vector<double> l(num_edges());
    for (std::size_t e = 0; e < l.size(); ++e) l[e] = node_length(src_[e]);
    return l;
  }

  /// Rebuilds the specs this network was constructed from.
  std::vector<EdgeSpec> edge_specs() const {
    std::vector<EdgeSpec> out(num_edges());
    for (std::size_t e = 0; e < out.size(); ++e) {
      auto f = features(static_cast<EdgeId>(e));
      out[e] = EdgeSpec{src_[e], dst_[e], tau_[e], {f.begin(), f.end()}};
    }
    return out;
  }

  /// Copy with a replaced feature matrix (row-major, E x F).
  RoadNetwork with_features(std::vector<double> features) const {
    if (features.size() != features_.size())
      throw ValidationError("netgraph", "feature matrix size mismatch");
    RoadNetwork copy = *this;
    copy.features_ = std::move(features);
    for (double v : copy.features_)
      if (!std::isfinite(v)) throw ValidationError("netgraph", "non-finite feature value");
    return copy;
  }

 private:
  std::vector<NodeSpec> nodes_;
  std::vector<NodeId> src_;
  std::vector<NodeId> dst_;
  std::vector<std::int32_t> tau_;
  std::vector<double> features_;
  std::vector<std::string> feature_names_;
  std::vector<std::size_t> out_offset_, in_offset_;
  std::vector<EdgeId> out_index_, in_index_;
};

// ---------------------------------------------------------------------------
// Strong connectivity

struct ConnectivityReport {
  bool strongly_connected = false;
  // When not strongly connected: a sink component (no edge leaves it) that
  // does not cover the whole graph. Sorted node ids.
  std::vector<NodeId> offending_component;
  std::size_t num_components = 0;
};

namespace detail {

// Iterative Tarjan over raw CSR arrays; returns component id per node.
inline std::vector<std::int32_t> tarjan_scc(std::size_t n, std::span<const std::size_t> offset,
                                            std::span<const EdgeId> index,
                                            std::span<const NodeId> dst, std::size_t& count) {
  constexpr std::int32_t kUnvisited = -1;
  std::vector<std::int32_t> order(n, kUnvisited), low(n, 0), comp(n, -1);
  std::vector<char> on_stack(n, 0);
  std::vector<NodeId> stack;
  std::vector<std::pair<NodeId, std::size_t>> call;  // node, next out-edge slot
  std::int32_t counter = 0;
  count = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (order[root] != kUnvisited) continue;
    call.emplace_back(static_cast<NodeId>(root), offset[root]);
    order[root] = low[root] = counter++;
    stack.push_back(static_cast<NodeId>(root));
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [v, slot] = call.back();
      const auto vi = static_cast<std::size_t>(v);
      if (slot < offset[vi + 1]) {
        const auto w = static_cast<std::size_t>(dst[static_cast<std::size_t>(index[slot])]);
        ++slot;
        if (order[w] == kUnvisited) {
          order[w] = low[w] = counter++;
          stack.push_back(static_cast<NodeId>(w));
          on_stack[w] = 1;
          call.emplace_back(static_cast<NodeId>(w), offset[w]);
        } else if (on_stack[w]) {
          low[vi] = std::min(low[vi], order[w]);
        }
        continue;
      }
      if (low[vi] == order[vi]) {
        NodeId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[static_cast<std::size_t>(w)] = 0;
          comp[static_cast<std::size_t>(w)] = static_cast<std::int32_t>(count);
        } while (w != v);
        ++count;
      }
      const auto child_low = low[vi];
      call.pop_back();
      if (!call.empty()) {
        auto& parent = low[static_cast<std::size_t>(call.back().first)];
        parent = std::min(parent, child_low);
      }
    }
  }
  return comp;
}

inline void build_csr(std::size_t n, std::span<const NodeId> key, std::vector<std::size_t>& offset,
                      std::vector<EdgeId>& index) {
  offset.assign(n + 1, 0);
  for (NodeId k : key) ++offset[static_cast<std::size_t>(k) + 1];
  std::partial_sum(offset.begin(), offset.end(), offset.begin());
  index.assign(key.size(), 0);
  std::vector<std::size_t> fill(offset.begin(), offset.end() - 1);
  for (std::size_t e = 0; e < key.size(); ++e)
    index[fill[static_cast<std::size_t>(key[e])]++] = static_cast<EdgeId>(e);
}

inline ConnectivityReport connectivity(std::size_t n, std::span<const std::size_t> offset,
                                       std::span<const EdgeId> index, std::span<const NodeId> src,
                                       std::span<const NodeId> dst) {
  ConnectivityReport report;
  if (n == 0) return report;
  std::size_t count = 0;
  const auto comp = tarjan_scc(n, offset, index, dst, count);
  report.num_components = count;
  report.strongly_connected = (count == 1);
  if (report.strongly_connected) return report;
  std::vector<char> has_exit(count, 0);
  for (std::size_t e = 0; e < src.size(); ++e) {
    const auto a = comp[static_cast<std::size_t>(src[e])];
    const auto b = comp[static_cast<std::size_t>(dst[e])];
    if (a != b) has_exit[static_cast<std::size_t>(a)] = 1;
  }
  // Sink component containing the smallest node id.
  for (std::size_t v = 0; v < n; ++v) {
    const auto c = static_cast<std::size_t>(comp[v]);
    if (has_exit[c]) continue;
    for (std::size_t u = 0; u < n; ++u)
      if (comp[u] == comp[v]) report.offending_component.push_back(static_cast<NodeId>(u));
    break;
  }
  return report;
}

}  // namespace detail

inline ConnectivityReport validate_strong_connectivity(const RoadNetwork& net) {
  std::vector<std::size_t> offset;
  std::vector<EdgeId> index;
  detail::build_csr(net.num_nodes(), net.sources(), offset, index);
  return detail::connectivity(net.num_nodes(), offset, index, net.sources(), net.destinations());
}

/// Same query on raw arrays, usable before a RoadNetwork can be built.
inline ConnectivityReport validate_strong_connectivity(std::size_t num_nodes,
                                                       std::span<const NodeId> src,
                                                       std::span<const NodeId> dst) {
  std::vector<std::size_t> offset;
  std::vector<EdgeId> index;
  detail::build_csr(num_nodes, src, offset, index);
  return detail::connectivity(num_nodes, offset, index, src, dst);
}

inline RoadNetwork::RoadNetwork(std::vector<NodeSpec> nodes, std::vector<EdgeSpec> edges,
                                std::vector<std::string> feature_names)
    : nodes_(std::move(nodes)), feature_names_(std::move(feature_names)) {
  const auto n = nodes_.size();
  const auto f = feature_names_.size();
  if (n == 0) throw ValidationError("netgraph", "network has no nodes");
  for (std::size_t s = 0; s < n; ++s) {
    const double l = nodes_[s].length_m;
    if (!std::isfinite(l) || l <= 0.0)
      throw ValidationError("netgraph", "node " + std::to_string(s) + ": length must be > 0");
  }
  src_.reserve(edges.size());
  dst_.reserve(edges.size());
  tau_.reserve(edges.size());
  features_.reserve(edges.size() * f);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& spec = edges[e];
    const auto tag = "edge " + std::to_string(e) + ": ";
    if (spec.src < 0 || spec.dst < 0 || static_cast<std::size_t>(spec.src) >= n ||
        static_cast<std::size_t>(spec.dst) >= n)
      throw ValidationError("netgraph", tag + "endpoint out of range");
    if (spec.tau < 1) throw ValidationError("netgraph", tag + "tau must be >= 1");
    if (spec.features.size() != f)
      throw ValidationError("netgraph", tag + "feature dimension " +
                                            std::to_string(spec.features.size()) + " != " +
                                            std::to_string(f));
    for (double v : spec.features)
      if (!std::isfinite(v)) throw ValidationError("netgraph", tag + "non-finite feature");
    src_.push_back(spec.src);
    dst_.push_back(spec.dst);
    tau_.push_back(spec.tau);
    features_.insert(features_.end(), spec.features.begin(), spec.features.end());
  }
  detail::build_csr(n, src_, out_offset_, out_index_);
  detail::build_csr(n, dst_, in_offset_, in_index_);
  for (std::size_t s = 0; s < n; ++s)
    if (out_offset_[s + 1] == out_offset_[s])
      throw ValidationError("netgraph", "node " + std::to_string(s) + " has no outgoing edge");
  const auto report = detail::connectivity(n, out_offset_, out_index_, src_, dst_);
  if (!report.strongly_connected) {
    std::string ids;
    for (std::size_t i = 0; i < report.offending_component.size() && i < 10; ++i)
      ids += (i ? "," : "") + std::to_string(report.offending_component[i]);
    if (report.offending_component.size() > 10) ids += ",...";
    throw ValidationError("netgraph", "graph is not strongly connected; sink component {" + ids +
                                          "} of " + std::to_string(report.num_components));
  }
}

// ---------------------------------------------------------------------------
// Context

/// One destination of a passenger picked up at some origin.
struct Destination {
  NodeId node = 0;
  double prob = 0.0;
  std::int32_t ride_time = 1;  // time steps
  double fare = 0.0;
};

/// Environment parameters of one time slot.
struct Context {
  std::string id;
  std::vector<double> lambda;  // passenger arrival rate per node (per step)
  std::vector<double> sigma;   // passenger dropout rate per node
  std::vector<std::vector<Destination>> dest;  // sparse rows, one per origin node
  std::vector<double> dropoff;                 // initial-state weights, sums to 1
  std::vector<double> expected_fare;           // sum_s' d_{s,s'} w_{s,s'}
  double mean_ride_time = 0.0;                 // h
  double fleet_size = 0.0;                     // N

  std::size_t num_nodes() const noexcept { return lambda.size(); }
};

inline double compute_expected_fare_row(const Context& ctx, std::size_t s) {
  double w = 0.0;
  for (const auto& d : ctx.dest[s]) w += d.prob * d.fare;
  return w;
}

inline std::vector<double> compute_expected_fare(const Context& ctx) {
  std::vector<double> out(ctx.dest.size(), 0.0);
  for (std::size_t s = 0; s < ctx.dest.size(); ++s) out[s] = compute_expected_fare_row(ctx, s);
  return out;
}

/// Pickup-weighted destination marginal: sum_s' lambda_s' d_{s',s} / sum lambda.
inline std::vector<double> derive_dropoff(const Context& ctx) {
  std::vector<double> out(ctx.num_nodes(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < ctx.dest.size(); ++s) {
    if (ctx.lambda[s] <= 0.0) continue;
    total += ctx.lambda[s];
    for (const auto& d : ctx.dest[s]) out[static_cast<std::size_t>(d.node)] += ctx.lambda[s] * d.prob;
  }
  if (total <= 0.0) throw ValidationError("netgraph", "cannot derive dropoff: total demand is zero");
  for (double& v : out) v /= total;
  return out;
}

/// Demand-weighted mean ride time over each origin's destination row.
inline double derive_mean_ride_time(const Context& ctx) {
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < ctx.dest.size(); ++s) {
    if (ctx.lambda[s] <= 0.0) continue;
    for (const auto& d : ctx.dest[s]) num += ctx.lambda[s] * d.prob * d.ride_time;
    den += ctx.lambda[s];
  }
  if (den <= 0.0) throw ValidationError("netgraph", "cannot derive mean ride time: no demand");
  return num / den;
}

/// Checks all Context invariants against a network. Throws ValidationError.
inline void validate_context(const RoadNetwork& net, const Context& ctx) {
  const auto n = net.num_nodes();
  const auto tag = "context " + ctx.id + ": ";
  auto check_size = [&](const auto& v, const char* name) {
    if (v.size() != n)
      throw ValidationError("netgraph", tag + name + " has " + std::to_string(v.size()) +
                                            " entries, network has " + std::to_string(n));
  };
  check_size(ctx.lambda, "lambda");
  check_size(ctx.sigma, "sigma");
  check_size(ctx.dest, "dest");
  check_size(ctx.dropoff, "dropoff");
  check_size(ctx.expected_fare, "expected_fare");
  for (std::size_t s = 0; s < n; ++s) {
    const auto at = tag + "node " + std::to_string(s) + ": ";
    if (!std::isfinite(ctx.lambda[s]) || ctx.lambda[s] < 0.0)
      throw ValidationError("netgraph", at + "lambda must be finite and >= 0");
    if (!std::isfinite(ctx.sigma[s]) || ctx.sigma[s] < 0.0)
      throw ValidationError("netgraph", at + "sigma must be finite and >= 0");
    if (!std::isfinite(ctx.dropoff[s]) || ctx.dropoff[s] < 0.0)
      throw ValidationError("netgraph", at + "dropoff must be finite and >= 0");
    double row = 0.0;
    for (const auto& d : ctx.dest[s]) {
      if (d.node < 0 || static_cast<std::size_t>(d.node) >= n)
        throw ValidationError("netgraph", at + "destination out of range");
      if (!std::isfinite(d.prob) || d.prob < 0.0)
        throw ValidationError("netgraph", at + "destination probability must be >= 0");
      if (d.ride_time < 1) throw ValidationError("netgraph", at + "ride_time must be >= 1");
      if (!std::isfinite(d.fare) || d.fare < 0.0)
        throw ValidationError("netgraph", at + "fare must be finite and >= 0");
      row += d.prob;
    }
    if (ctx.lambda[s] > 0.0 && std::abs(row - 1.0) > 1e-9)
      throw ValidationError("netgraph", at + "dest row sums to " + std::to_string(row) +
                                            ", expected 1");
    const double wbar = compute_expected_fare_row(ctx, s);
    if (std::abs(wbar - ctx.expected_fare[s]) > 1e-12 * std::max(1.0, std::abs(wbar)))
      throw ValidationError("netgraph", at + "expected_fare inconsistent with dest/fare");
  }
  const double total = std::accumulate(ctx.dropoff.begin(), ctx.dropoff.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("netgraph", tag + "dropoff sums to " + std::to_string(total));
  if (!std::isfinite(ctx.mean_ride_time) || ctx.mean_ride_time <= 0.0)
    throw ValidationError("netgraph", tag + "mean ride time h must be > 0");
  if (!std::isfinite(ctx.fleet_size) || ctx.fleet_size <= 0.0)
    throw ValidationError("netgraph", tag + "fleet size N must be > 0");
}

/// Fills derived fields (expected fare; dropoff and h when absent) and
/// validates. Returns the completed context.
inline Context finalize_context(const RoadNetwork& net, Context ctx) {
  if (ctx.dest.size() != ctx.lambda.size())
    throw ValidationError("netgraph", "context " + ctx.id + ": dest has wrong row count");
  ctx.expected_fare = compute_expected_fare(ctx);
  if (ctx.dropoff.empty()) ctx.dropoff = derive_dropoff(ctx);
  if (ctx.mean_ride_time <= 0.0) ctx.mean_ride_time = derive_mean_ride_time(ctx);
  validate_context(net, ctx);
  return ctx;
}

}  // namespace seirl
