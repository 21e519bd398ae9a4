#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/bitstring.hpp"
#include "lgprep/error.hpp"
#include "lgprep/hamiltonian.hpp"
#include "lgprep/model.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {

inline constexpr double kSingularThreshold = 1e-6;
inline constexpr std::size_t kMaxPathLength = 11;
inline constexpr std::size_t kMaxOracleQubits = 20;

// Leading-order effective Hamiltonian on the span of the ground strings under
// the linear sweep:
//   H_nn(t)  = tau e0 + (1 - tau)^2 / tau * e_n
//   H_nm(t)  = tau^-(h_nm - 1) (1 - tau)^h_nm * g_nm,      tau = t / T.
// The coefficients do not depend on time.
struct EffectiveHamiltonian {
  std::size_t M = 0;
  double e0 = 0.0;
  Eigen::VectorXd e;
  Eigen::MatrixXd g;
  Eigen::MatrixXi h;
  // Number of flip orderings summed for each pair; h! when no path crosses
  // another ground string.
  Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic> pathCounts;
};

namespace detail {

[[noreturn]] inline void throw_singular(const LhzModel& model, const std::string& where) {
  throw Error(ErrorKind::SingularDenominator, "vanishing excitation energy in " + where, model.strengths());
}

inline std::unordered_map<std::uint64_t, std::size_t> ground_index_map(const LhzModel& model) {
  std::unordered_map<std::uint64_t, std::size_t> map;
  for (std::size_t n = 0; n < model.groundStrings.size(); ++n) map.emplace(model.groundStrings[n].to_index(), n);
  return map;
}

inline double common_ground_energy(const LhzModel& model) {
  if (model.groundStrings.empty()) throw Error(ErrorKind::ShapeMismatch, "model has no ground strings");
  const double e0 = model.energy(model.groundStrings.front());
  for (const auto& z : model.groundStrings) {
    if (std::abs(model.energy(z) - e0) > 1e-9 * std::max(1.0, std::abs(e0))) {
      throw Error(ErrorKind::NotVerified, "ground strings are not degenerate in the physical model");
    }
  }
  return e0;
}

}  // namespace detail

// Sum over all orderings of the flips that take `from` to `to` of the product
// of inverse excitation energies of the intermediate strings, times -1. Paths
// through another ground string carry no weight. Orderings are enumerated in
// lexicographic order; `count` receives the number visited.
inline double path_sum(const LhzModel& model, const BitString& from, const BitString& to, double groundEnergy,
                       std::uint64_t& count, double threshold = kSingularThreshold) {
  const auto flips = differing_positions(from, to);
  const std::size_t h = flips.size();
  if (h == 0) throw Error(ErrorKind::ShapeMismatch, "path sum between identical strings");
  if (h > kMaxPathLength) throw Error(ErrorKind::TooLarge, "Hamming distance too large for explicit path sums");
  const auto ground = detail::ground_index_map(model);

  // Inverse excitation energy of `from` with the flip subset `mask` applied;
  // zero for subsets that land on a ground string.
  const std::uint64_t base = from.to_index();
  const std::size_t subsets = std::size_t{1} << h;
  std::vector<double> inverse(subsets, 0.0);
  for (std::size_t mask = 1; mask + 1 < subsets; ++mask) {
    std::uint64_t idx = base;
    for (std::size_t b = 0; b < h; ++b) {
      if ((mask >> b) & 1U) idx ^= std::uint64_t{1} << flips[b];
    }
    if (ground.count(idx)) continue;
    const double de = model.energy(idx) - groundEnergy;
    if (std::abs(de) < threshold) detail::throw_singular(model, "path sum");
    inverse[mask] = 1.0 / de;
  }

  std::vector<std::size_t> order(h);
  for (std::size_t b = 0; b < h; ++b) order[b] = b;
  double total = 0.0;
  count = 0;
  do {
    double product = 1.0;
    std::size_t mask = 0;
    for (std::size_t step = 0; step + 1 < h; ++step) {
      mask |= std::size_t{1} << order[step];
      product *= inverse[mask];
    }
    total += product;
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return -total;
}

namespace detail {

// e_n = -sum over single flips of 1 / (excitation energy).
inline Eigen::VectorXd second_order_shifts(const LhzModel& model, double threshold = kSingularThreshold) {
  const double e0 = common_ground_energy(model);
  const auto ground = ground_index_map(model);
  Eigen::VectorXd e(static_cast<Eigen::Index>(model.groundStrings.size()));
  for (std::size_t n = 0; n < model.groundStrings.size(); ++n) {
    const std::uint64_t base = model.groundStrings[n].to_index();
    double sum = 0.0;
    for (std::size_t i = 0; i < model.K; ++i) {
      const std::uint64_t idx = base ^ (std::uint64_t{1} << i);
      if (ground.count(idx)) continue;
      const double de = model.energy(idx) - e0;
      if (std::abs(de) < threshold) throw_singular(model, "diagonal coefficient");
      sum += 1.0 / de;
    }
    e(static_cast<Eigen::Index>(n)) = -sum;
  }
  return e;
}

}  // namespace detail

inline EffectiveHamiltonian build_effective(const LhzModel& model, double threshold = kSingularThreshold) {
  const double e0 = detail::common_ground_energy(model);
  const std::size_t M = model.groundStrings.size();
  EffectiveHamiltonian heff;
  heff.M = M;
  heff.e0 = e0;
  heff.g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  heff.h = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  heff.pathCounts = decltype(heff.pathCounts)::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));

  heff.e = detail::second_order_shifts(model, threshold);

  for (std::size_t n = 0; n < M; ++n) {
    for (std::size_t m = n + 1; m < M; ++m) {
      const auto ni = static_cast<Eigen::Index>(n);
      const auto mi = static_cast<Eigen::Index>(m);
      std::uint64_t count = 0;
      const double g = path_sum(model, model.groundStrings[m], model.groundStrings[n], e0, count, threshold);
      const int h = static_cast<int>(hamming(model.groundStrings[n], model.groundStrings[m]));
      heff.g(ni, mi) = heff.g(mi, ni) = g;
      heff.h(ni, mi) = heff.h(mi, ni) = h;
      heff.pathCounts(ni, mi) = heff.pathCounts(mi, ni) = count;
    }
  }
  return heff;
}

inline Eigen::MatrixXd evaluate(const EffectiveHamiltonian& heff, double t, const Schedule& schedule) {
  if (t <= 0.0) throw Error(ErrorKind::DivergentExpansion, "effective Hamiltonian diverges at t <= 0");
  if (t > schedule.T) throw Error(ErrorKind::OutOfRange, "time beyond the end of the sweep");
  const double tau = t / schedule.T;
  const double s = 1.0 - tau;
  const auto M = static_cast<Eigen::Index>(heff.M);
  Eigen::MatrixXd H(M, M);
  for (Eigen::Index n = 0; n < M; ++n) {
    H(n, n) = tau * heff.e0 + s * s / tau * heff.e(n);
    for (Eigen::Index m = 0; m < M; ++m) {
      if (m == n) continue;
      const int h = heff.h(n, m);
      H(n, m) = std::pow(tau, -(h - 1)) * std::pow(s, h) * heff.g(n, m);
    }
  }
  return H;
}

// Independent route to the same matrix elements: the operator products
// <z_n| (V Q/(E0 - H0))^(h-1) V |z_m> evaluated on full 2^K vectors, with
// V = -A(t) sum_i sigma^x_i and H0 the diagonal part at time t. The
// projectors and resolvent act as masks and divisions on those vectors.
inline Eigen::MatrixXd resolvent_oracle(const LhzModel& model, const Schedule& schedule, double t,
                                        double threshold = kSingularThreshold) {
  if (model.K > kMaxOracleQubits) throw Error(ErrorKind::TooLarge, "resolvent oracle limited to 20 qubits");
  if (t <= 0.0 || t > schedule.T) throw Error(ErrorKind::OutOfRange, "resolvent oracle needs 0 < t <= T");
  const auto spectrum = diagonal_energies(model);
  const auto w = schedule.weights(t);
  const Eigen::VectorXd h0 = w.fields * spectrum.fieldEnergies + w.constraints * spectrum.constraintEnergies;
  const std::size_t M = model.groundStrings.size();
  const auto dim = static_cast<std::uint64_t>(h0.size());
  const double E0 = h0(static_cast<Eigen::Index>(model.groundStrings.front().to_index()));
  const double problemScale = std::max(std::abs(w.fields), std::abs(w.constraints));

  std::vector<char> inP(dim, 0);
  for (const auto& z : model.groundStrings) inP[z.to_index()] = 1;

  auto applyV = [&](const Eigen::VectorXd& in) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(in.size());
    for (std::size_t k = 0; k < model.K; ++k) {
      const std::uint64_t bit = std::uint64_t{1} << k;
      for (std::uint64_t x = 0; x < dim; ++x) out(static_cast<Eigen::Index>(x)) -= w.transverse * in(static_cast<Eigen::Index>(x ^ bit));
    }
    return out;
  };
  auto applyQR = [&](Eigen::VectorXd v) {
    for (std::uint64_t x = 0; x < dim; ++x) {
      const auto xi = static_cast<Eigen::Index>(x);
      if (inP[x]) {
        v(xi) = 0.0;
        continue;
      }
      if (v(xi) == 0.0) continue;
      const double denom = E0 - h0(xi);
      if (std::abs(denom) < threshold * problemScale) detail::throw_singular(model, "resolvent oracle");
      v(xi) /= denom;
    }
    return v;
  };

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
  for (std::size_t m = 0; m < M; ++m) {
    std::size_t maxH = 2;
    for (std::size_t n = 0; n < M; ++n) maxH = std::max(maxH, hamming(model.groundStrings[n], model.groundStrings[m]));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    v(static_cast<Eigen::Index>(model.groundStrings[m].to_index())) = 1.0;
    v = applyV(v);  // (V Q R)^0 V |z_m>
    for (std::size_t order = 1; order <= maxH; ++order) {
      // v now holds (V Q R)^(order-1) V |z_m>
      for (std::size_t n = 0; n < M; ++n) {
        const auto ni = static_cast<Eigen::Index>(n);
        const auto idx = static_cast<Eigen::Index>(model.groundStrings[n].to_index());
        if (n == m && order == 2) H(ni, ni) = E0 + v(idx);
        if (n != m && hamming(model.groundStrings[n], model.groundStrings[m]) == order) H(ni, static_cast<Eigen::Index>(m)) = v(idx);
      }
      v = applyV(applyQR(std::move(v)));
    }
  }
  return H;
}

// Numerically exact effective Hamiltonian: the M lowest eigenpairs of H(t)
// rotated onto the ground-string basis by the direct (polar) rotation of the
// overlap matrix O_nm = <z_n|phi_m(t)>.
inline Eigen::MatrixXd direct_rotation_oracle(const LhzModel& model, const Schedule& schedule, double t) {
  if (t <= 0.0) throw Error(ErrorKind::IllConditioned, "low-energy manifold touches excited states at t = 0");
  const auto spectrum = diagonal_energies(model);
  const std::size_t M = model.groundStrings.size();
  const std::size_t want = std::min<std::size_t>(M + 1, spectrum.dimension());
  const auto inst = instantaneous_spectrum(model, spectrum, schedule, t, want);
  const auto Mi = static_cast<Eigen::Index>(M);
  if (want > M) {
    const double gap = inst.eigenvalues(Mi) - inst.eigenvalues(Mi - 1);
    if (gap < 1e-9 * std::max(1.0, std::abs(inst.eigenvalues(Mi)))) {
      throw Error(ErrorKind::IllConditioned, "no gap above the low-energy manifold");
    }
  }
  Eigen::MatrixXd O(Mi, Mi);
  for (Eigen::Index n = 0; n < Mi; ++n) {
    const auto idx = static_cast<Eigen::Index>(model.groundStrings[static_cast<std::size_t>(n)].to_index());
    for (Eigen::Index m = 0; m < Mi; ++m) O(n, m) = inst.eigenvectors(idx, m);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() < 1e-8) {
    throw Error(ErrorKind::IllConditioned, "low-energy manifold has no overlap with a ground string");
  }
  const Eigen::MatrixXd W = svd.matrixU() * svd.matrixV().transpose();
  return W * inst.eigenvalues.head(Mi).asDiagonal() * W.transpose();
}

}  // namespace lgprep
