#pragma once

#include <cmath>
#include <span>

#include "seirl/errors.hpp"

namespace seirl {

/// Mismatch distance ratio: length-weighted L1 distance between two action
/// flows, normalized by the reference (first argument) flow's length mass.
inline double mdr(std::span<const double> mu_ref, std::span<const double> mu,
                  std::span<const double> lengths) {
  if (mu_ref.size() != mu.size() || mu.size() != lengths.size())
    throw ValidationError("evalkit", "mdr: flow/length dimension mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < mu.size(); ++a) {
    num += std::abs(mu_ref[a] - mu[a]) * lengths[a];
    den += mu_ref[a] * lengths[a];
  }
  if (!(den > 0.0)) throw DegenerateError("evalkit", "mdr undefined: reference flow has zero mass");
  return num / den;
}

}  // namespace seirl
