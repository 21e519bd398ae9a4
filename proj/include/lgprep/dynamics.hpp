#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/effective.hpp"
#include "lgprep/error.hpp"
#include "lgprep/hamiltonian.hpp"
#include "lgprep/model.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {

using cplx = std::complex<double>;

inline constexpr std::size_t kMaxPropagationQubits = 20;
// Above this fraction of the sweep the M lowest levels are treated as one
// subspace; individual eigenvectors are not well defined there.
inline constexpr double kSubspaceFraction = 0.98;

struct StateVector {
  Eigen::VectorXcd amplitudes;
  double t = 0.0;
};

struct TrajectorySample {
  double tOverT = 0.0;
  Eigen::VectorXd populations;  // P_1..P_M in order of increasing energy
  double leakage = 0.0;
};

struct PreparationResult {
  Eigen::VectorXd finalProbabilities;  // |<z_n|psi(T)>|^2, model order
  double leakage = 0.0;
  double normDrift = 0.0;
  std::size_t stepsUsed = 0;
  std::vector<TrajectorySample> trajectory;
  Eigen::VectorXcd finalState;
};

struct PropagationOptions {
  std::size_t steps = 4000;
  std::size_t samples = 300;  // 0 disables the trajectory
  double normTolerance = 1e-7;
  std::size_t maxRefinements = 3;  // step-count doublings after a norm failure
  double krylovTolerance = 1e-13;
  std::size_t krylovMaxDim = 40;
  bool keepFinalState = false;
};

// psi <- exp(-i H dt) psi for a real symmetric H given by `apply`, through a
// Lanczos basis with full reorthogonalization. The step is split when the
// Krylov error estimate does not converge within maxDim vectors. The error
// estimate needs a small eigensolve, so it is only checked every few vectors.
template <typename Apply>
void krylov_expm(const Apply& apply, Eigen::VectorXcd& psi, double dt, std::size_t maxDim, double tol) {
  const double beta0 = psi.norm();
  if (beta0 == 0.0) return;
  const Eigen::Index dim = psi.size();
  const Eigen::Index mMax = std::min<Eigen::Index>(static_cast<Eigen::Index>(maxDim), dim);
  Eigen::MatrixXcd V(dim, mMax + 1);
  Eigen::VectorXd alpha(mMax);
  Eigen::VectorXd beta(mMax);
  Eigen::VectorXcd w(dim);
  V.col(0) = psi / beta0;

  for (Eigen::Index j = 0; j < mMax; ++j) {
    apply(V.col(j).eval(), w);
    alpha(j) = V.col(j).dot(w).real();
    w -= alpha(j) * V.col(j);
    if (j > 0) w -= beta(j - 1) * V.col(j - 1);
    w -= V.leftCols(j + 1) * (V.leftCols(j + 1).adjoint() * w).eval();
    beta(j) = w.norm();

    const Eigen::Index m = j + 1;
    const bool invariant = beta(j) < 1e-14 * std::max(1.0, std::abs(alpha(j)));
    const bool check = invariant || m == mMax || (m >= 6 && m % 3 == 0);
    if (check) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      const Eigen::VectorXd sub = beta.head(std::max<Eigen::Index>(m - 1, 0));
      es.computeFromTridiagonal(alpha.head(m), sub, Eigen::ComputeEigenvectors);
      const Eigen::VectorXd first = es.eigenvectors().row(0).transpose();
      Eigen::VectorXcd coef(m);
      for (Eigen::Index i = 0; i < m; ++i) coef(i) = std::exp(cplx(0.0, -es.eigenvalues()(i) * dt)) * first(i);
      const Eigen::VectorXcd y = es.eigenvectors().cast<cplx>() * coef;
      const double err = beta(j) * std::abs(y(m - 1));
      if (err < tol || invariant || m == dim) {
        psi = beta0 * (V.leftCols(m) * y);
        return;
      }
    }
    if (m < mMax) V.col(m) = w / beta(j);
  }
  krylov_expm(apply, psi, 0.5 * dt, maxDim, tol);
  krylov_expm(apply, psi, 0.5 * dt, maxDim, tol);
}

inline StateVector initial_state_full(std::size_t K) {
  if (K < 1) throw Error(ErrorKind::OutOfRange, "need at least one qubit");
  if (K > kMaxPropagationQubits) throw Error(ErrorKind::TooLarge, "state vector too large");
  const auto dim = Eigen::Index{1} << K;
  StateVector s;
  s.amplitudes = Eigen::VectorXcd::Constant(dim, cplx(std::pow(2.0, -0.5 * static_cast<double>(K)), 0.0));
  s.t = 0.0;
  return s;
}

namespace detail {

// Energy order of the ground strings for trajectory labels near T. Order by
// `energies`; where they tie (at t = T every level sits at E0) fall back to
// the second-order shifts e_n, which set the order on the approach to T.
inline std::vector<Eigen::Index> level_order(const Eigen::VectorXd& energies, const Eigen::VectorXd& shifts) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(energies.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double tol = 1e-12 * std::max(1.0, energies.cwiseAbs().maxCoeff());
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(energies(a) - energies(b)) > tol) return energies(a) < energies(b);
    return shifts(a) < shifts(b);
  });
  return order;
}

}  // namespace detail

struct AmfPopulations {
  Eigen::VectorXd populations;  // increasing energy
  double leakage = 0.0;
};

// Populations of the M lowest instantaneous eigenstates. Close to the end of
// the sweep the M-dimensional low-energy subspace is used as a whole and its
// frame is the direct rotation of the ground strings into it, which turns
// into the z_n themselves at t = T.
inline AmfPopulations amf_populations(const StateVector& state, const LhzModel& model, const DiagonalSpectrum& spectrum,
                                      const Schedule& schedule, double t) {
  if (static_cast<std::uint64_t>(state.amplitudes.size()) != spectrum.dimension()) {
    throw Error(ErrorKind::ShapeMismatch, "state dimension does not match the model");
  }
  const std::size_t M = model.groundStrings.size();
  const auto Mi = static_cast<Eigen::Index>(M);
  const auto inst = instantaneous_spectrum(model, spectrum, schedule, t, M);
  const Eigen::MatrixXcd phi = inst.eigenvectors.cast<cplx>();
  AmfPopulations out;
  out.populations.resize(Mi);

  if (t > kSubspaceFraction * schedule.T) {
    Eigen::MatrixXd O(Mi, Mi);
    for (Eigen::Index n = 0; n < Mi; ++n) {
      const auto idx = static_cast<Eigen::Index>(model.groundStrings[static_cast<std::size_t>(n)].to_index());
      O.row(n) = inst.eigenvectors.row(idx);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(O, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd W = svd.matrixU() * svd.matrixV().transpose();
    // chi_n = sum_m phi_m W_nm
    const Eigen::MatrixXd chi = inst.eigenvectors * W.transpose();
    Eigen::VectorXd energies(Mi);
    for (Eigen::Index n = 0; n < Mi; ++n) energies(n) = inst.eigenvalues.dot(W.row(n).transpose().cwiseAbs2());
    Eigen::VectorXd shifts = Eigen::VectorXd::Zero(Mi);
    try {
      shifts = detail::second_order_shifts(model);
    } catch (const Error&) {
      // Labels then fall back to model order where energies tie.
    }
    const auto order = detail::level_order(energies, shifts);
    for (Eigen::Index r = 0; r < Mi; ++r) {
      out.populations(r) = std::norm(chi.col(order[static_cast<std::size_t>(r)]).cast<cplx>().dot(state.amplitudes));
    }
  } else {
    for (Eigen::Index n = 0; n < Mi; ++n) out.populations(n) = std::norm(phi.col(n).dot(state.amplitudes));
  }
  out.leakage = 1.0 - out.populations.sum();
  return out;
}

namespace detail {

inline std::vector<std::size_t> sample_steps(std::size_t steps, std::size_t samples) {
  std::vector<std::size_t> at;
  if (samples == 0) return at;
  if (samples == 1) return {steps};
  for (std::size_t j = 0; j < samples; ++j) {
    at.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(j) * static_cast<double>(steps) /
                                                       static_cast<double>(samples - 1))));
  }
  at.erase(std::unique(at.begin(), at.end()), at.end());
  return at;
}

inline Eigen::VectorXd ground_probabilities(const LhzModel& model, const Eigen::VectorXcd& psi) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(model.groundStrings.size()));
  for (std::size_t n = 0; n < model.groundStrings.size(); ++n) {
    p(static_cast<Eigen::Index>(n)) = std::norm(psi(static_cast<Eigen::Index>(model.groundStrings[n].to_index())));
  }
  return p;
}

inline PreparationResult propagate_full_once(const LhzModel& model, const DiagonalSpectrum& spectrum,
                                             const Schedule& schedule, const StateVector& initial,
                                             const PropagationOptions& options, std::size_t steps) {
  PreparationResult result;
  result.stepsUsed = steps;
  const double T = schedule.T;
  const double dt = T / static_cast<double>(steps);
  Eigen::VectorXcd psi = initial.amplitudes;
  const double norm0 = psi.norm();
  const auto samples = sample_steps(steps, options.samples);
  std::size_t nextSample = 0;

  auto record = [&](std::size_t step) {
    const double t = T * static_cast<double>(step) / static_cast<double>(steps);
    const auto amf = amf_populations(StateVector{psi, t}, model, spectrum, schedule, t);
    result.trajectory.push_back({static_cast<double>(step) / static_cast<double>(steps), amf.populations, amf.leakage});
  };

  for (std::size_t s = 0; s < steps; ++s) {
    if (nextSample < samples.size() && samples[nextSample] == s) {
      record(s);
      ++nextSample;
    }
    const auto slice = hamiltonian_at(spectrum, schedule, (static_cast<double>(s) + 0.5) * dt);
    krylov_expm([&slice](const Eigen::VectorXcd& in, Eigen::VectorXcd& out) { slice.apply(in, out); }, psi, dt,
                options.krylovMaxDim, options.krylovTolerance);
  }
  if (nextSample < samples.size()) record(steps);

  result.normDrift = std::abs(psi.norm() - norm0);
  result.finalProbabilities = ground_probabilities(model, psi);
  result.leakage = psi.squaredNorm() - result.finalProbabilities.sum();
  if (options.keepFinalState) result.finalState = psi;
  return result;
}

}  // namespace detail

// Integrates i d|psi>/dt = H(t)|psi> from 0 to T with the exponential
// midpoint rule, exp(-i H(t + dt/2) dt) per step. The step count is doubled
// (up to maxRefinements times) when the norm drifts beyond tolerance.
inline PreparationResult propagate_full(const LhzModel& model, const DiagonalSpectrum& spectrum,
                                        const Schedule& schedule, const StateVector& initial,
                                        const PropagationOptions& options = {}) {
  if (model.K > kMaxPropagationQubits) throw Error(ErrorKind::TooLarge, "full propagation limited to 20 qubits");
  if (options.steps == 0) throw Error(ErrorKind::OutOfRange, "step count must be positive");
  std::size_t steps = options.steps;
  double drift = 0.0;
  for (std::size_t attempt = 0; attempt <= options.maxRefinements; ++attempt) {
    auto result = detail::propagate_full_once(model, spectrum, schedule, initial, options, steps);
    if (result.normDrift <= options.normTolerance) return result;
    drift = result.normDrift;
    steps *= 2;
  }
  throw Error(ErrorKind::IntegratorFailure, "norm drift exceeds tolerance", {drift});
}

inline PreparationResult propagate_full(const LhzModel& model, const Schedule& schedule,
                                        const PropagationOptions& options = {}) {
  return propagate_full(model, diagonal_energies(model), schedule, initial_state_full(model.K), options);
}

inline PreparationResult propagate_full(const LhzModel& model, std::span<const double> strengths,
                                        const Schedule& schedule, const PropagationOptions& options = {}) {
  return propagate_full(model.with_strengths(strengths), schedule, options);
}

// Ground state of a small real symmetric matrix with a fixed sign convention:
// the largest-magnitude component is made positive.
inline Eigen::VectorXd ground_vector(const Eigen::MatrixXd& H) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  Eigen::VectorXd v = es.eigenvectors().col(0);
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
  return v;
}

using LevelHamiltonian = std::function<Eigen::MatrixXd(double)>;

// M-level propagation in the ground-string basis under H(t), from the ground
// state of H(t0). `shifts` breaks energy ties in the trajectory labels near T.
// Leakage is zero by construction.
inline PreparationResult propagate_levels(const LevelHamiltonian& H, const Eigen::VectorXd& shifts, const Schedule& schedule,
                                          double t0, const PropagationOptions& options = {}) {
  const double T = schedule.T;
  if (!(t0 > 0.0 && t0 < T)) throw Error(ErrorKind::OutOfRange, "effective propagation needs 0 < t0 < T");
  if (options.steps == 0) throw Error(ErrorKind::OutOfRange, "step count must be positive");
  const auto Mi = shifts.size();
  PreparationResult result;
  result.stepsUsed = options.steps;
  Eigen::VectorXcd beta = ground_vector(H(t0)).cast<cplx>();
  if (beta.size() != Mi) throw Error(ErrorKind::ShapeMismatch, "level Hamiltonian does not match the shift vector");
  const double dt = (T - t0) / static_cast<double>(options.steps);
  const auto samples = detail::sample_steps(options.steps, options.samples);
  std::size_t nextSample = 0;

  auto record = [&](std::size_t step) {
    const double t = std::min(t0 + dt * static_cast<double>(step), T);
    TrajectorySample sample;
    sample.tOverT = t / T;
    sample.populations.resize(Mi);
    const Eigen::MatrixXd Ht = H(t);
    if (t > kSubspaceFraction * T) {
      const Eigen::VectorXd p = beta.cwiseAbs2();
      const auto order = detail::level_order(Ht.diagonal(), shifts);
      for (Eigen::Index r = 0; r < Mi; ++r) sample.populations(r) = p(order[static_cast<std::size_t>(r)]);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ht);
      for (Eigen::Index n = 0; n < Mi; ++n) sample.populations(n) = std::norm(es.eigenvectors().col(n).cast<cplx>().dot(beta));
    }
    sample.leakage = 0.0;
    result.trajectory.push_back(std::move(sample));
  };

  for (std::size_t s = 0; s < options.steps; ++s) {
    if (nextSample < samples.size() && samples[nextSample] == s) {
      record(s);
      ++nextSample;
    }
    const double tm = t0 + (static_cast<double>(s) + 0.5) * dt;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H(tm));
    Eigen::VectorXcd phase(Mi);
    for (Eigen::Index i = 0; i < Mi; ++i) phase(i) = std::exp(cplx(0.0, -es.eigenvalues()(i) * dt));
    const Eigen::MatrixXcd U = es.eigenvectors().cast<cplx>();
    beta = U * phase.asDiagonal() * (U.adjoint() * beta);
  }
  if (nextSample < samples.size()) record(options.steps);

  result.normDrift = std::abs(beta.norm() - 1.0);
  if (result.normDrift > options.normTolerance) {
    throw Error(ErrorKind::IntegratorFailure, "norm drift exceeds tolerance", {result.normDrift});
  }
  result.finalProbabilities = beta.cwiseAbs2();
  result.leakage = 0.0;
  if (options.keepFinalState) result.finalState = beta;
  return result;
}

// Leading-order effective model.
inline PreparationResult propagate_effective(const EffectiveHamiltonian& heff, const Schedule& schedule, double t0,
                                             const PropagationOptions& options = {}) {
  return propagate_levels([&](double t) { return evaluate(heff, t, schedule); }, heff.e, schedule, t0, options);
}

// Same M-level dynamics with the numerically exact rotated Hamiltonian. Slow
// (one full eigensolve per step); used to separate truncation error of the
// leading-order model from the neglected frame and leakage terms.
inline PreparationResult propagate_rotated(const LhzModel& model, const Schedule& schedule, double t0,
                                           const PropagationOptions& options = {}) {
  return propagate_levels([&](double t) { return direct_rotation_oracle(model, schedule, t); },
                          detail::second_order_shifts(model), schedule, t0, options);
}

}  // namespace lgprep
