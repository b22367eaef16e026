#pragma once

// Poisson-queue pickup model and per-road maximum-likelihood estimation of
// latent demand (arrival rate lambda, dropout rate sigma).
//
// A road holds a queue of waiting passengers whose length is Poisson with
// mean lambda / (mu + sigma), where mu is the rate at which empty vehicles
// pass. A passing vehicle picks someone up iff the queue is non-empty:
//
//   rho(mu) = 1 - exp(-lambda / (mu + sigma)),   m(mu) = mu * rho(mu).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "seirl/errors.hpp"

namespace seirl {

inline double pickup_probability(double lambda, double sigma, double mu) {
  if (!(lambda >= 0.0) || !(sigma >= 0.0) || !(mu >= 0.0))
    throw ValidationError("demand", "pickup_probability: negative or NaN argument");
  const double service = mu + sigma;
  if (service <= 0.0) {
    if (lambda > 0.0)
      throw DegenerateError("demand", "degenerate queue: mu + sigma = 0 with positive demand");
    return 0.0;
  }
  return -std::expm1(-lambda / service);
}

inline double expected_rides(double mu, double rho) { return mu * rho; }

/// Observed daily draws for one road. `flow[i]` counts empty-vehicle passes
/// during draw i, `rides[i]` the pickups among them. Each draw covers
/// `exposure` time steps, so the pass rate entering rho is flow / exposure.
struct DemandDraws {
  std::vector<std::int64_t> flow;
  std::vector<std::int64_t> rides;
  double exposure = 1.0;
};

enum DemandFitFlags : std::uint32_t {
  kFitOk = 0,
  kFitBoundary = 1u << 0,          // optimum on the search-box boundary, or no rides
  kFitUnidentifiable = 1u << 1,    // fewer than two distinct positive flows
  kFitInsufficientData = 1u << 2,  // fewer than two draws with positive flow
};

struct DemandParams {
  double lambda = 0.0;
  double sigma = 0.0;
  double loglik = 0.0;
  int iterations = 0;
  std::uint32_t flags = kFitOk;
};

struct DemandFitOptions {
  double lower = 1e-4;
  double upper = 10.0;
  int grid = 32;
  int max_iters = 400;
  double xtol = 1e-10;
};

/// Binomial log-likelihood of the draws (combinatorial constant dropped).
/// Zero-flow draws carry no information and are skipped.
inline double demand_loglik(const DemandDraws& draws, double lambda, double sigma) {
  double ll = 0.0;
  for (std::size_t i = 0; i < draws.flow.size(); ++i) {
    const auto n = draws.flow[i];
    if (n <= 0) continue;
    const auto m = draws.rides[i];
    const double x = lambda / (static_cast<double>(n) / draws.exposure + sigma);
    // log(1 - rho) = -x ; log(rho) = log(-expm1(-x))
    if (m > 0) {
      const double rho = -std::expm1(-x);
      if (rho <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += static_cast<double>(m) * std::log(rho);
    }
    ll -= static_cast<double>(n - m) * x;
  }
  return ll;
}

namespace detail {

// Nelder-Mead on a 2-D box (coordinates clamped to [lo, hi]).
template <class F>
std::array<double, 2> nelder_mead_2d(F&& f, std::array<double, 2> start, double step, double lo,
                                     double hi, int max_iters, double xtol, int& iters) {
  auto clamp = [&](std::array<double, 2> p) {
    for (double& v : p) v = std::clamp(v, lo, hi);
    return p;
  };
  std::array<std::array<double, 2>, 3> x{start, clamp({start[0] + step, start[1]}),
                                         clamp({start[0], start[1] + step})};
  std::array<double, 3> fx{f(x[0]), f(x[1]), f(x[2])};
  iters = 0;
  for (; iters < max_iters; ++iters) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const auto best = x[idx[0]], mid = x[idx[1]], worst = x[idx[2]];
    const double fb = fx[idx[0]], fm = fx[idx[1]], fw = fx[idx[2]];
    x = {best, mid, worst};
    fx = {fb, fm, fw};
    const double spread = std::max(std::abs(worst[0] - best[0]) + std::abs(worst[1] - best[1]),
                                   std::abs(mid[0] - best[0]) + std::abs(mid[1] - best[1]));
    if (spread < xtol) break;
    const std::array<double, 2> c{(best[0] + mid[0]) / 2, (best[1] + mid[1]) / 2};
    auto along = [&](double t) {
      return clamp({c[0] + t * (worst[0] - c[0]), c[1] + t * (worst[1] - c[1])});
    };
    const auto r = along(-1.0);
    const double fr = f(r);
    if (fr < fb) {
      const auto e = along(-2.0);
      const double fe = f(e);
      if (fe < fr) {
        x[2] = e, fx[2] = fe;
      } else {
        x[2] = r, fx[2] = fr;
      }
    } else if (fr < fm) {
      x[2] = r, fx[2] = fr;
    } else {
      const auto k = fr < fw ? along(-0.5) : along(0.5);
      const double fk = f(k);
      if (fk < std::min(fr, fw)) {
        x[2] = k, fx[2] = fk;
      } else {
        for (int i = 1; i < 3; ++i) {
          x[i] = {(x[i][0] + best[0]) / 2, (x[i][1] + best[1]) / 2};
          fx[i] = f(x[i]);
        }
      }
    }
  }
  const auto it = std::min_element(fx.begin(), fx.end());
  return x[static_cast<std::size_t>(it - fx.begin())];
}

}  // namespace detail

/// Maximizes the binomial likelihood over (lambda, sigma) in a box: coarse
/// log-spaced grid, then Nelder-Mead in log coordinates from the best cell.
inline DemandParams fit_demand_params(const DemandDraws& draws, const DemandFitOptions& opt = {}) {
  if (draws.flow.size() != draws.rides.size())
    throw ValidationError("demand", "flow and rides have different lengths");
  if (!(draws.exposure > 0.0)) throw ValidationError("demand", "exposure must be > 0");
  std::size_t positive = 0;
  std::int64_t total_rides = 0;
  std::vector<std::int64_t> distinct;
  for (std::size_t i = 0; i < draws.flow.size(); ++i) {
    if (draws.flow[i] < 0 || draws.rides[i] < 0 || draws.rides[i] > draws.flow[i])
      throw ValidationError("demand", "draw " + std::to_string(i) + ": need 0 <= m <= mu");
    if (draws.flow[i] == 0) continue;
    ++positive;
    total_rides += draws.rides[i];
    distinct.push_back(draws.flow[i]);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  DemandParams out;
  if (positive < 2) {
    out.flags = kFitInsufficientData | kFitBoundary;
    return out;
  }
  if (distinct.size() < 2) out.flags |= kFitUnidentifiable;
  if (total_rides == 0) {
    // Likelihood increases monotonically as lambda -> 0.
    out.flags |= kFitBoundary;
    out.sigma = opt.lower;
    out.loglik = 0.0;
    return out;
  }

  const double llo = std::log(opt.lower), lhi = std::log(opt.upper);
  auto negll = [&](const std::array<double, 2>& p) {
    const double v = demand_loglik(draws, std::exp(p[0]), std::exp(p[1]));
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  std::array<double, 2> best{llo, llo};
  double fbest = std::numeric_limits<double>::infinity();
  const int g = std::max(opt.grid, 2);
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) {
      const std::array<double, 2> p{llo + (lhi - llo) * i / (g - 1), llo + (lhi - llo) * j / (g - 1)};
      const double v = negll(p);
      if (v < fbest) fbest = v, best = p;
    }
  }
  const double cell = (lhi - llo) / (g - 1);
  int iters = 0;
  auto refined = detail::nelder_mead_2d(negll, best, cell, llo, lhi, opt.max_iters, opt.xtol, iters);
  if (negll(refined) > fbest) refined = best;  // never worse than the grid
  out.lambda = std::exp(refined[0]);
  out.sigma = std::exp(refined[1]);
  out.loglik = -negll(refined);
  out.iterations = iters;
  const double edge = 1e-6;
  if (refined[0] - llo < edge || lhi - refined[0] < edge || refined[1] - llo < edge ||
      lhi - refined[1] < edge)
    out.flags |= kFitBoundary;
  return out;
}

}  // namespace seirl
