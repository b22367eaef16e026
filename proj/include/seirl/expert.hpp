#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seirl/demand.hpp"

namespace seirl {

/// Observed behaviour for one context: mean per-edge traversal rate plus,
/// optionally, the per-day traversal counts it was averaged from. Each day
/// covers `slot_steps` time steps, so a day's rate is count / slot_steps.
struct ExpertVisitation {
  std::string context_id;
  std::vector<double> mu_E;
  std::vector<std::vector<std::int32_t>> daily_counts;  // [day][edge]
  double slot_steps = 60.0;

  std::size_t num_days() const noexcept { return daily_counts.size(); }

  /// Mean rate over the selected days.
  std::vector<double> mean_over(const std::vector<std::size_t>& days) const {
    std::vector<double> mu(daily_counts.empty() ? mu_E.size() : daily_counts.front().size(), 0.0);
    if (days.empty()) return mu;
    for (auto d : days)
      for (std::size_t e = 0; e < mu.size(); ++e) mu[e] += daily_counts[d][e];
    const double scale = 1.0 / (slot_steps * static_cast<double>(days.size()));
    for (double& v : mu) v *= scale;
    return mu;
  }

  /// Traversal counts summed over all days (falls back to mu_E when no draws
  /// are attached).
  std::vector<double> total_counts() const {
    if (daily_counts.empty()) return mu_E;
    std::vector<double> c(mu_E.size(), 0.0);
    for (const auto& day : daily_counts)
      for (std::size_t e = 0; e < c.size(); ++e) c[e] += day[e];
    return c;
  }
};

/// Demand draws of every node for one context.
struct ContextDraws {
  std::string context_id;
  std::vector<DemandDraws> nodes;
};

}  // namespace seirl
