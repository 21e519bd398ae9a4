#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/eigensolver.hpp"
#include "lgprep/error.hpp"
#include "lgprep/model.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {

inline constexpr std::size_t kMaxDiagonalQubits = 26;
inline constexpr std::size_t kMaxDenseQubits = 10;

// Classical energies of every basis string at unit problem weight, split into
// the local-field part H_J and the constraint part H_C.
struct DiagonalSpectrum {
  std::size_t K = 0;
  Eigen::VectorXd fieldEnergies;
  Eigen::VectorXd constraintEnergies;

  std::uint64_t dimension() const { return std::uint64_t{1} << K; }
  double energy(std::uint64_t index) const {
    const auto i = static_cast<Eigen::Index>(index);
    return fieldEnergies(i) + constraintEnergies(i);
  }
  Eigen::VectorXd energies() const { return fieldEnergies + constraintEnergies; }
};

inline DiagonalSpectrum diagonal_energies(const LhzModel& model) {
  if (model.K > kMaxDiagonalQubits) throw Error(ErrorKind::TooLarge, "dense diagonal limited to 26 qubits");
  DiagonalSpectrum d;
  d.K = model.K;
  const auto dim = static_cast<Eigen::Index>(d.dimension());
  d.fieldEnergies.resize(dim);
  d.constraintEnergies.resize(dim);
  for (Eigen::Index x = 0; x < dim; ++x) {
    d.fieldEnergies(x) = model.field_energy(static_cast<std::uint64_t>(x));
    d.constraintEnergies(x) = model.constraint_energy(static_cast<std::uint64_t>(x));
  }
  return d;
}

// Energy of z with the given bits flipped, minus the energy of z, at unit
// problem weight.
inline double excitation_energy(const LhzModel& model, const BitString& z, std::span<const std::size_t> flipped) {
  if (z.size() != model.K) throw Error(ErrorKind::ShapeMismatch, "string length does not match qubit count");
  std::uint64_t index = z.to_index();
  const std::uint64_t base = index;
  for (auto k : flipped) {
    if (k >= model.K) throw Error(ErrorKind::ShapeMismatch, "flip index out of range");
    index ^= std::uint64_t{1} << k;
  }
  return model.energy(index) - model.energy(base);
}

// H(t) restricted to one instant: diagonal part plus uniform transverse field.
// Applied matrix-free; the transverse term is a sweep of single bit flips.
struct HamiltonianSlice {
  std::size_t K = 0;
  Eigen::VectorXd diagonal;
  double transverse = 0.0;

  template <typename Vector>
  void apply(const Vector& in, Vector& out) const {
    const auto dim = static_cast<std::uint64_t>(diagonal.size());
    out = diagonal.cast<typename Vector::Scalar>().cwiseProduct(in);
    if (transverse == 0.0) return;
    for (std::size_t k = 0; k < K; ++k) {
      const std::uint64_t bit = std::uint64_t{1} << k;
      for (std::uint64_t x = 0; x < dim; ++x) {
        out(static_cast<Eigen::Index>(x)) -= transverse * in(static_cast<Eigen::Index>(x ^ bit));
      }
    }
  }

  Eigen::MatrixXd dense() const {
    if (K > kMaxDenseQubits + 2) throw Error(ErrorKind::TooLarge, "dense Hamiltonian too large");
    const auto dim = diagonal.size();
    Eigen::MatrixXd H = diagonal.asDiagonal();
    for (Eigen::Index x = 0; x < dim; ++x) {
      for (std::size_t k = 0; k < K; ++k) H(x ^ (Eigen::Index{1} << k), x) -= transverse;
    }
    return H;
  }
};

inline HamiltonianSlice hamiltonian_at(const DiagonalSpectrum& spectrum, const Schedule& schedule, double t) {
  const auto w = schedule.weights(t);
  HamiltonianSlice h;
  h.K = spectrum.K;
  h.diagonal = w.fields * spectrum.fieldEnergies + w.constraints * spectrum.constraintEnergies;
  h.transverse = w.transverse;
  return h;
}

struct InstantaneousSpectrum {
  double t = 0.0;
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns; H(t) is real symmetric so real vectors suffice
};

namespace detail {

// Spectrum of a purely diagonal Hamiltonian. Within a degenerate level the
// ground strings come first, in model order, so the reported vectors are the
// z_n themselves.
inline InstantaneousSpectrum diagonal_spectrum(const LhzModel& model, const HamiltonianSlice& h, double t, std::size_t k) {
  const auto dim = static_cast<std::uint64_t>(h.diagonal.size());
  std::vector<std::size_t> rank(dim, model.groundStrings.size());
  for (std::size_t n = 0; n < model.groundStrings.size(); ++n) rank[model.groundStrings[n].to_index()] = n;
  std::vector<std::uint64_t> order(dim);
  std::iota(order.begin(), order.end(), 0);
  const double scale = std::max(1.0, h.diagonal.cwiseAbs().maxCoeff());
  std::stable_sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
    const double ea = h.diagonal(static_cast<Eigen::Index>(a));
    const double eb = h.diagonal(static_cast<Eigen::Index>(b));
    if (std::abs(ea - eb) > 1e-12 * scale) return ea < eb;
    return rank[a] < rank[b];
  });
  InstantaneousSpectrum s;
  s.t = t;
  s.eigenvalues.resize(static_cast<Eigen::Index>(k));
  s.eigenvectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    s.eigenvalues(ci) = h.diagonal(static_cast<Eigen::Index>(order[c]));
    s.eigenvectors(static_cast<Eigen::Index>(order[c]), ci) = 1.0;
  }
  return s;
}

}  // namespace detail

// Lowest k eigenpairs of H(t). Dense diagonalization up to kMaxDenseQubits,
// block Krylov above.
inline InstantaneousSpectrum instantaneous_spectrum(const LhzModel& model, const DiagonalSpectrum& spectrum,
                                                    const Schedule& schedule, double t, std::size_t k,
                                                    const EigenOptions& options = {}) {
  if (t < 0.0 || t > schedule.T) throw Error(ErrorKind::OutOfRange, "time outside [0, T]");
  const auto dim = spectrum.dimension();
  if (k == 0 || k > dim) throw Error(ErrorKind::OutOfRange, "eigenpair count outside [1, 2^K]");
  const auto h = hamiltonian_at(spectrum, schedule, t);
  if (h.transverse == 0.0) return detail::diagonal_spectrum(model, h, t, k);

  InstantaneousSpectrum s;
  s.t = t;
  if (spectrum.K <= kMaxDenseQubits) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.dense());
    s.eigenvalues = es.eigenvalues().head(static_cast<Eigen::Index>(k));
    s.eigenvectors = es.eigenvectors().leftCols(static_cast<Eigen::Index>(k));
    return s;
  }
  auto pairs = lowest_eigenpairs([&h](const Eigen::VectorXd& in, Eigen::VectorXd& out) { h.apply(in, out); },
                                 static_cast<std::size_t>(dim), k, options);
  s.eigenvalues = std::move(pairs.values);
  s.eigenvectors = std::move(pairs.vectors);
  return s;
}

inline InstantaneousSpectrum instantaneous_spectrum(const LhzModel& model, const Schedule& schedule, double t,
                                                    std::size_t k) {
  return instantaneous_spectrum(model, diagonal_energies(model), schedule, t, k);
}

}  // namespace lgprep
