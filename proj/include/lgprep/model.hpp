#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/bitstring.hpp"
#include "lgprep/error.hpp"

namespace lgprep {

// All-to-all Ising model on N logical spins,
//   E(x) = -sum_{i<j} J_ij s_i s_j + h s_1,
// with s_i the sigma^z value of bit i. The field acts on the first spin only
// and h > 0 favours bit 1 there; it exists to single out one member of each
// Z2 pair x, complement(x).
struct LogicalModel {
  std::size_t N = 0;
  Eigen::MatrixXd couplings;
  double field = 0.0;

  double energy(const BitString& x) const {
    if (x.size() != N) throw Error(ErrorKind::ShapeMismatch, "string length does not match model size");
    double e = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = i + 1; j < N; ++j) e -= couplings(i, j) * x.spin(i) * x.spin(j);
    }
    return e + field * x.spin(0);
  }
};

namespace detail {

inline std::size_t common_length(std::span<const BitString> strings) {
  if (strings.empty()) throw Error(ErrorKind::ShapeMismatch, "at least one bit string is required");
  const std::size_t n = strings.front().size();
  for (const auto& s : strings) {
    if (s.size() != n) throw Error(ErrorKind::ShapeMismatch, "bit strings have mixed lengths");
  }
  return n;
}

inline void require_distinct(std::span<const BitString> strings) {
  std::set<BitString> seen;
  for (const auto& s : strings) {
    if (!seen.insert(s).second) throw Error(ErrorKind::DuplicateInput, "duplicate bit string " + s.to_string());
  }
}

}  // namespace detail

// Hebbian couplings J = sum_n xi_n xi_n^T with zero diagonal, scaled so that
// max |J_ij| = 1. Degeneracy of the stored strings is not guaranteed; run
// verify_degenerate_ground on the result.
inline LogicalModel encode_hopfield(std::span<const BitString> strings, double field = 0.0) {
  const std::size_t n = detail::common_length(strings);
  if (n < 2) throw Error(ErrorKind::ShapeMismatch, "need at least two logical spins");
  detail::require_distinct(strings);

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& x : strings) {
    Eigen::VectorXd xi(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) xi(static_cast<Eigen::Index>(i)) = x.spin(i);
    J += xi * xi.transpose();
  }
  J.diagonal().setZero();
  const double scale = J.cwiseAbs().maxCoeff();
  if (scale > 0.0) J /= scale;
  return LogicalModel{n, std::move(J), field};
}

struct VerificationReport {
  std::size_t N = 0;
  bool isValid = false;
  // Minimizers are exactly the given strings together with their complements;
  // enough for the physical encoding, which cannot tell Z2 partners apart.
  bool validUpToZ2 = false;
  double groundEnergy = 0.0;
  std::vector<double> energies;  // indexed by BitString::to_index()
  std::vector<BitString> minimizers;
};

inline constexpr std::size_t kMaxVerifySpins = 24;

inline VerificationReport verify_degenerate_ground(const LogicalModel& model, std::span<const BitString> strings) {
  const std::size_t n = model.N;
  if (n > kMaxVerifySpins) throw Error(ErrorKind::TooLarge, "brute-force verification limited to 24 spins");
  if (detail::common_length(strings) != n) throw Error(ErrorKind::ShapeMismatch, "strings do not match model size");
  if (model.couplings.rows() != static_cast<Eigen::Index>(n) || model.couplings.cols() != static_cast<Eigen::Index>(n)) {
    throw Error(ErrorKind::ShapeMismatch, "coupling matrix has wrong shape");
  }

  VerificationReport report;
  report.N = n;
  const std::uint64_t dim = std::uint64_t{1} << n;
  report.energies.assign(dim, 0.0);

  // Gray-code sweep: consecutive codes differ in one spin, so each energy is an
  // O(N) update of the previous one.
  std::vector<int> s(n, 1);
  double e = model.energy(BitString::from_index(0, n));
  report.energies[0] = e;
  std::uint64_t gray = 0;
  for (std::uint64_t k = 1; k < dim; ++k) {
    const std::uint64_t next = k ^ (k >> 1);
    const auto flip = static_cast<std::size_t>(std::countr_zero(next ^ gray));
    double local = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != flip) local += model.couplings(static_cast<Eigen::Index>(flip), static_cast<Eigen::Index>(j)) * s[j];
    }
    e += 2.0 * s[flip] * local;
    if (flip == 0) e -= 2.0 * model.field * s[0];
    s[flip] = -s[flip];
    gray = next;
    report.energies[gray] = e;
  }

  report.groundEnergy = *std::min_element(report.energies.begin(), report.energies.end());
  const double tol = 1e-9 * std::max(1.0, std::abs(report.groundEnergy));
  for (std::uint64_t idx = 0; idx < dim; ++idx) {
    if (report.energies[idx] <= report.groundEnergy + tol) report.minimizers.push_back(BitString::from_index(idx, n));
  }

  std::set<BitString> given(strings.begin(), strings.end());
  std::set<BitString> found(report.minimizers.begin(), report.minimizers.end());
  report.isValid = (given == found);
  std::set<BitString> closed = given;
  for (const auto& x : strings) closed.insert(x.complement());
  report.validUpToZ2 = (closed == found);
  return report;
}

// Triangular LHZ layout for N logical spins. Physical qubit k represents the
// logical pair pairs[k] = (i, j), i < j, ordered by distance d = j - i and then
// by i. Plaquette (i, j = i + d) for d = 1 .. N-2 joins (i,j), (i,j+1),
// (i+1,j), (i+1,j+1); for d = 1 the (i+1,i+1) corner does not exist and the
// plaquette is three-body with that spin held at +1.
struct LhzLayout {
  std::size_t N = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::vector<std::size_t>> plaquettes;
};

inline LhzLayout lhz_layout(std::size_t n) {
  if (n < 2) throw Error(ErrorKind::ShapeMismatch, "LHZ layout needs at least two logical spins");
  LhzLayout layout;
  layout.N = n;
  std::vector<std::vector<std::size_t>> index(n, std::vector<std::size_t>(n, 0));
  for (std::size_t d = 1; d < n; ++d) {
    for (std::size_t i = 0; i + d < n; ++i) {
      index[i][i + d] = layout.pairs.size();
      layout.pairs.emplace_back(i, i + d);
    }
  }
  for (std::size_t d = 1; d + 1 < n; ++d) {
    for (std::size_t i = 0; i + d + 1 < n; ++i) {
      const std::size_t j = i + d;
      std::vector<std::size_t> members{index[i][j], index[i][j + 1], index[i + 1][j + 1]};
      if (d > 1) members.push_back(index[i + 1][j]);
      std::sort(members.begin(), members.end());
      layout.plaquettes.push_back(std::move(members));
    }
  }
  return layout;
}

// Physical bit for pair (i, j) is x_i XOR x_j: 0 when the logical spins are
// aligned. Complementary logical strings have the same image.
inline BitString logical_to_physical(const BitString& x) {
  const auto layout = lhz_layout(x.size());
  std::vector<std::uint8_t> bits;
  bits.reserve(layout.pairs.size());
  for (const auto& [i, j] : layout.pairs) bits.push_back(static_cast<std::uint8_t>(x[i] != x[j]));
  return BitString(std::move(bits));
}

struct Constraint {
  std::vector<std::size_t> members;
  double strength = 0.0;
  std::uint64_t mask = 0;
};

struct LhzModel {
  std::size_t N = 0;
  std::size_t K = 0;
  Eigen::VectorXd localFields;
  std::vector<Constraint> constraints;
  std::vector<std::vector<std::size_t>> memberSets;  // S_i: constraints touching qubit i
  std::vector<BitString> groundStrings;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  std::size_t num_constraints() const { return constraints.size(); }

  std::vector<double> strengths() const {
    std::vector<double> c;
    c.reserve(constraints.size());
    for (const auto& p : constraints) c.push_back(p.strength);
    return c;
  }

  LhzModel with_strengths(std::span<const double> c) const {
    if (c.size() != constraints.size()) {
      throw Error(ErrorKind::ShapeMismatch, "expected " + std::to_string(constraints.size()) + " constraint strengths");
    }
    LhzModel out = *this;
    for (std::size_t p = 0; p < c.size(); ++p) {
      if (!std::isfinite(c[p]) || c[p] < 0.0) throw Error(ErrorKind::OutOfRange, "constraint strengths must be finite and non-negative");
      out.constraints[p].strength = c[p];
    }
    return out;
  }

  // -sum_i J_i s_i
  double field_energy(std::uint64_t index) const {
    double e = 0.0;
    for (std::size_t k = 0; k < K; ++k) e -= localFields(static_cast<Eigen::Index>(k)) * (((index >> k) & 1U) ? -1.0 : 1.0);
    return e;
  }

  // +1 when the plaquette parity is satisfied.
  int plaquette_sign(std::size_t p, std::uint64_t index) const {
    return (std::popcount(index & constraints[p].mask) & 1) ? -1 : 1;
  }

  // -sum_p C_p prod_{k in p} s_k
  double constraint_energy(std::uint64_t index) const {
    double e = 0.0;
    for (std::size_t p = 0; p < constraints.size(); ++p) e -= constraints[p].strength * plaquette_sign(p, index);
    return e;
  }

  double energy(std::uint64_t index) const { return field_energy(index) + constraint_energy(index); }
  double energy(const BitString& z) const {
    if (z.size() != K) throw Error(ErrorKind::ShapeMismatch, "string length does not match qubit count");
    return energy(z.to_index());
  }
};

inline LhzModel map_to_lhz(const LogicalModel& model, std::span<const BitString> strings, const VerificationReport& report,
                           double initialStrength = 4.0) {
  if (report.N != model.N || report.energies.size() != (std::size_t{1} << model.N)) {
    throw Error(ErrorKind::NotVerified, "verification report does not belong to this model");
  }
  if (!report.isValid && !report.validUpToZ2) {
    throw Error(ErrorKind::NotVerified, "target strings are not the degenerate ground states of the logical model");
  }
  if (detail::common_length(strings) != model.N) throw Error(ErrorKind::ShapeMismatch, "strings do not match model size");

  const auto layout = lhz_layout(model.N);
  LhzModel lhz;
  lhz.N = model.N;
  lhz.K = layout.pairs.size();
  if (lhz.K > 63) throw Error(ErrorKind::TooLarge, "too many physical qubits for a 64-bit basis index");
  lhz.pairs = layout.pairs;
  lhz.localFields.resize(static_cast<Eigen::Index>(lhz.K));
  for (std::size_t k = 0; k < lhz.K; ++k) {
    const auto [i, j] = layout.pairs[k];
    lhz.localFields(static_cast<Eigen::Index>(k)) = model.couplings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  lhz.memberSets.assign(lhz.K, {});
  for (std::size_t p = 0; p < layout.plaquettes.size(); ++p) {
    Constraint c;
    c.members = layout.plaquettes[p];
    c.strength = initialStrength;
    for (auto k : c.members) {
      c.mask |= std::uint64_t{1} << k;
      lhz.memberSets[k].push_back(p);
    }
    lhz.constraints.push_back(std::move(c));
  }
  for (const auto& x : strings) lhz.groundStrings.push_back(logical_to_physical(x));
  detail::require_distinct(lhz.groundStrings);
  for (std::size_t a = 0; a < lhz.groundStrings.size(); ++a) {
    for (std::size_t b = a + 1; b < lhz.groundStrings.size(); ++b) {
      if (hamming(lhz.groundStrings[a], lhz.groundStrings[b]) < 2) {
        throw Error(ErrorKind::ShapeMismatch, "physical ground strings closer than Hamming distance 2");
      }
    }
  }
  return lhz;
}

}  // namespace lgprep
