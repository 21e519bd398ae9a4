#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <utility>

#include "lgprep/effective.hpp"
#include "lgprep/error.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {

struct LzParameters {
  double v = 0.0;      // |d/dt (H_nn - H_mm)|
  double delta = 0.0;  // H_nm
};

// Landau-Zener velocity and gap of the pair (n, m) at time t, from the
// closed-form time dependence of the effective Hamiltonian.
inline LzParameters lz_parameters(const EffectiveHamiltonian& heff, std::size_t n, std::size_t m, double t,
                                  const Schedule& schedule) {
  if (n >= heff.M || m >= heff.M || n == m) throw Error(ErrorKind::OutOfRange, "invalid level pair");
  if (t <= 0.0 || t >= schedule.T) throw Error(ErrorKind::OutOfRange, "LZ parameters need 0 < t < T");
  const double T = schedule.T;
  const double tau = t / T;
  const auto ni = static_cast<Eigen::Index>(n);
  const auto mi = static_cast<Eigen::Index>(m);
  // d/dt [(1 - tau)^2 / tau] = -(1 - tau^2) / (T tau^2)
  const double rate = (1.0 - tau * tau) / (T * tau * tau);
  const int h = heff.h(ni, mi);
  LzParameters p;
  p.v = rate * std::abs(heff.e(ni) - heff.e(mi));
  p.delta = std::pow(tau, -(h - 1)) * std::pow(1.0 - tau, h) * heff.g(ni, mi);
  return p;
}

struct DiabaticOptions {
  double leftFraction = 0.05;      // search starts at 0.05 T
  double endFraction = 1e-4;       // and stops at T (1 - 1e-4)
  double toleranceFraction = 1e-6;
  std::size_t scanPoints = 400;
};

struct DiabaticEstimate {
  std::map<std::pair<std::size_t, std::size_t>, double> tdPerPair;
  double td = 0.0;
  std::pair<std::size_t, std::size_t> criticalPair{0, 1};
  double vAtTd = 0.0;
  double deltaAtTd = 0.0;
};

namespace detail {

inline double lz_ratio(const EffectiveHamiltonian& heff, std::size_t n, std::size_t m, double t, const Schedule& schedule) {
  const auto p = lz_parameters(heff, n, m, t, schedule);
  if (p.delta == 0.0) return p.v == 0.0 ? 0.0 : INFINITY;
  return p.v / (p.delta * p.delta);
}

}  // namespace detail

// Freeze-in time: for every pair, the time at which v / Delta^2 reaches pi.
// Where the ratio crosses pi more than once the latest upward crossing wins;
// a ratio above pi on the whole bracket pins the pair to the left end, one
// that never reaches pi pins it to the right end. Pairs with no coupling have
// no avoided crossing and are reported at the right end. The overall estimate
// is the earliest pair.
inline DiabaticEstimate estimate_td(const EffectiveHamiltonian& heff, const Schedule& schedule,
                                    const DiabaticOptions& options = {}) {
  if (heff.M < 2) throw Error(ErrorKind::NoPairs, "freeze-in time needs at least two levels");
  const double T = schedule.T;
  const double lo = options.leftFraction * T;
  const double hi = (1.0 - options.endFraction) * T;
  const double tol = options.toleranceFraction * T;
  const double pi = std::numbers::pi;

  DiabaticEstimate est;
  est.td = INFINITY;
  for (std::size_t n = 0; n < heff.M; ++n) {
    for (std::size_t m = n + 1; m < heff.M; ++m) {
      double td = hi;
      const bool coupled = heff.g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) != 0.0;
      if (coupled && detail::lz_ratio(heff, n, m, hi, schedule) >= pi) {
        // Walk left from the end until the ratio drops below pi.
        double right = hi;
        double left = hi;
        bool found = false;
        const double step = (hi - lo) / static_cast<double>(options.scanPoints);
        for (std::size_t k = 1; k <= options.scanPoints; ++k) {
          left = hi - step * static_cast<double>(k);
          if (k == options.scanPoints) left = lo;
          if (detail::lz_ratio(heff, n, m, left, schedule) < pi) {
            found = true;
            break;
          }
          right = left;
        }
        if (!found) {
          td = lo;
        } else {
          while (right - left > tol) {
            const double mid = 0.5 * (left + right);
            if (detail::lz_ratio(heff, n, m, mid, schedule) < pi) left = mid;
            else right = mid;
          }
          td = 0.5 * (left + right);
        }
      }
      est.tdPerPair[{n, m}] = td;
      if (td < est.td) {
        est.td = td;
        est.criticalPair = {n, m};
      }
    }
  }
  const auto p = lz_parameters(heff, est.criticalPair.first, est.criticalPair.second, est.td, schedule);
  est.vAtTd = p.v;
  est.deltaAtTd = p.delta;
  return est;
}

}  // namespace lgprep
