#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/diabatic.hpp"
#include "lgprep/dynamics.hpp"
#include "lgprep/effective.hpp"
#include "lgprep/error.hpp"
#include "lgprep/hamiltonian.hpp"
#include "lgprep/model.hpp"
#include "lgprep/optimize.hpp"
#include "lgprep/parallel.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {

struct TargetSpec {
  Eigen::VectorXd probabilities;

  static TargetSpec from(std::span<const double> p) {
    if (p.empty()) throw Error(ErrorKind::ShapeMismatch, "empty target vector");
    TargetSpec t;
    t.probabilities.resize(static_cast<Eigen::Index>(p.size()));
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw Error(ErrorKind::OutOfRange, "target probability outside [0, 1]", {p[i]});
      t.probabilities(static_cast<Eigen::Index>(i)) = p[i];
      sum += p[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::OutOfRange, "target probabilities must sum to 1", {sum});
    return t;
  }

  static TargetSpec uniform(std::size_t M) { return from(std::vector<double>(M, 1.0 / static_cast<double>(M))); }
  std::size_t size() const { return static_cast<std::size_t>(probabilities.size()); }
};

inline double cost(const Eigen::VectorXd& b, const TargetSpec& targets) {
  if (b.size() != targets.probabilities.size()) throw Error(ErrorKind::ShapeMismatch, "probability vector length mismatch");
  return (b - targets.probabilities).squaredNorm();
}

enum class Stage { Static, Iterative, Exact };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::Static: return "static";
    case Stage::Iterative: return "iterative";
    case Stage::Exact: return "exact";
  }
  return "unknown";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "static") return Stage::Static;
  if (s == "iterative") return Stage::Iterative;
  if (s == "exact") return Stage::Exact;
  throw Error(ErrorKind::ParseError, "unknown optimization level '" + s + "'");
}

struct ControlConfig {
  double lower = 0.1;
  double upper = 20.0;
  std::size_t restarts = 8;        // static stage
  std::size_t refineRestarts = 1;  // iterative and exact stages; the first start is Cinit
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  double t0Fraction = 0.1;
  std::size_t effectiveSteps = 1000;
  std::size_t exactInnerSteps = 1000;  // full propagation inside the exact-stage loop
  PropagationOptions propagation{.steps = 4000, .samples = 0};
  NelderMeadOptions simplex{};
  NelderMeadOptions refineSimplex{.maxEvaluations = 200, .fTolerance = 1e-10, .xTolerance = 1e-5, .initialStep = 0.05};
  // Starts whose cost is within this of the best count as tied; the tie goes
  // to the smallest-norm C.
  double costTieTolerance = 1e-6;
  DiabaticOptions diabatic{};
};

struct ControlResult {
  std::vector<double> C;
  Stage stage = Stage::Static;
  double costValue = 0.0;
  double td = 0.0;
  Eigen::VectorXd achieved;
  double leakage = 0.0;
  std::size_t evaluations = 0;
  std::size_t bestStart = 0;
};

// Value returned to the optimizer for configurations where the objective is
// undefined. Larger than any attainable cost (which is at most 2).
inline constexpr double kInadmissibleCost = 10.0;

// True when the ground strings are exactly the M lowest diagonal states of the
// final Hamiltonian. Weak constraints can let constraint-violating strings
// drop below them, and the perturbative picture no longer applies.
inline bool ground_manifold_is_lowest(const LhzModel& model) {
  if (model.K > kMaxPropagationQubits) return true;
  const auto energies = diagonal_energies(model).energies();
  const double E0 = model.energy(model.groundStrings.front());
  const double tol = 1e-9 * std::max(1.0, std::abs(E0));
  std::size_t atGround = 0;
  for (Eigen::Index x = 0; x < energies.size(); ++x) {
    if (energies(x) < E0 - tol) return false;
    if (energies(x) <= E0 + tol) ++atGround;
  }
  return atGround == model.groundStrings.size();
}

struct GroundAmplitudes {
  Eigen::VectorXd b;  // squared components in the z_n basis
  double td = 0.0;
};

inline GroundAmplitudes ground_amplitudes_at_td(const LhzModel& model, std::span<const double> C, const Schedule& schedule,
                                                const DiabaticOptions& options = {}) {
  const auto heff = build_effective(model.with_strengths(C));
  GroundAmplitudes out;
  out.td = estimate_td(heff, schedule, options).td;
  out.b = ground_vector(evaluate(heff, out.td, schedule)).cwiseAbs2();
  return out;
}

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline void check_targets(const LhzModel& model, const TargetSpec& targets) {
  if (targets.size() != model.groundStrings.size()) {
    throw Error(ErrorKind::ShapeMismatch, "target count does not match the number of ground strings");
  }
  if (model.groundStrings.size() < 2) throw Error(ErrorKind::OutOfRange, "optimization needs at least two ground strings");
}

// Maps any library error to the penalty value; the optimizer never sees an
// exception.
template <typename Fn>
double guarded(Fn&& fn) {
  try {
    const double v = fn();
    return std::isfinite(v) ? v : kInadmissibleCost;
  } catch (const Error&) {
    return kInadmissibleCost;
  }
}

struct StartOutcome {
  NelderMeadResult fit;
  std::size_t index = 0;
};

// Runs one simplex search per start (concurrently, up to `jobs`). Among the
// starts tied for the lowest cost the smallest-norm C wins, then the lower
// cost, then the lower start index.
inline StartOutcome multi_start(const std::function<double(const Eigen::VectorXd&)>& objective,
                                const std::vector<Eigen::VectorXd>& starts, const ControlConfig& config,
                                const NelderMeadOptions& simplex) {
  std::vector<NelderMeadResult> fits(starts.size());
  parallel_for(starts.size(), config.jobs,
               [&](std::size_t i) { fits[i] = nelder_mead(objective, starts[i], config.lower, config.upper, simplex); });
  double lowest = fits[0].value;
  for (const auto& f : fits) lowest = std::min(lowest, f.value);
  std::size_t best = fits.size();
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (fits[i].value > lowest + config.costTieTolerance) continue;
    if (best == fits.size()) {
      best = i;
      continue;
    }
    const auto& a = fits[i];
    const auto& b = fits[best];
    const double na = a.x.norm();
    const double nb = b.x.norm();
    if (na < nb || (na == nb && a.value < b.value)) best = i;
  }
  std::size_t evaluations = 0;
  for (const auto& f : fits) evaluations += f.evaluations;
  StartOutcome out{fits[best], best};
  out.fit.evaluations = evaluations;
  if (out.fit.value >= kInadmissibleCost) {
    throw Error(ErrorKind::OptimizationFailed, "every start ended in an inadmissible configuration", detail::to_std(out.fit.x));
  }
  return out;
}

// Seeded starts. Start 0 is `first` when given; the rest are drawn
// log-uniformly from the box, or multiplicatively jittered around `first`.
inline std::vector<Eigen::VectorXd> make_starts(std::size_t dim, std::size_t count, const ControlConfig& config,
                                                const Eigen::VectorXd* first) {
  std::vector<Eigen::VectorXd> starts;
  for (std::size_t i = 0; i < count; ++i) {
    if (i == 0 && first) {
      starts.push_back(*first);
      continue;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    if (first) {
      std::normal_distribution<double> jitter(0.0, 0.3);
      for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = (*first)(k) * std::exp(jitter(rng));
    } else {
      const double lo = std::log(std::max(config.lower, 0.5));
      const double hi = std::log(std::min(config.upper, 10.0));
      std::uniform_real_distribution<double> u(std::min(lo, hi), std::max(lo, hi));
      for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = std::exp(u(rng));
    }
    starts.push_back(x.cwiseMax(config.lower).cwiseMin(config.upper));
  }
  return starts;
}

inline ControlResult finish(const LhzModel& model, const StartOutcome& outcome, Stage stage, const Schedule& schedule,
                            const ControlConfig& config) {
  ControlResult r;
  r.C = to_std(outcome.fit.x);
  r.stage = stage;
  r.costValue = outcome.fit.value;
  r.evaluations = outcome.fit.evaluations;
  r.bestStart = outcome.index;
  r.td = estimate_td(build_effective(model.with_strengths(r.C)), schedule, config.diabatic).td;
  return r;
}

}  // namespace detail

// Minimizes the cost of the H_eff ground state at the freeze-in time. t_d is
// recomputed for every candidate C.
inline ControlResult optimize_static(const LhzModel& model, const TargetSpec& targets, const Schedule& schedule,
                                     const ControlConfig& config = {}) {
  detail::check_targets(model, targets);
  auto objective = [&](const Eigen::VectorXd& c) {
    return detail::guarded([&] {
      const auto C = detail::to_std(c);
      if (!ground_manifold_is_lowest(model.with_strengths(C))) return kInadmissibleCost;
      return cost(ground_amplitudes_at_td(model, C, schedule, config.diabatic).b, targets);
    });
  };
  const auto starts = detail::make_starts(model.num_constraints(), std::max<std::size_t>(1, config.restarts), config, nullptr);
  const auto outcome = detail::multi_start(objective, starts, config, config.simplex);
  auto r = detail::finish(model, outcome, Stage::Static, schedule, config);
  r.achieved = ground_amplitudes_at_td(model, r.C, schedule, config.diabatic).b;
  return r;
}

inline PreparationResult effective_run(const LhzModel& model, std::span<const double> C, const Schedule& schedule,
                                       const ControlConfig& config) {
  PropagationOptions opts;
  opts.steps = config.effectiveSteps;
  opts.samples = 0;
  return propagate_effective(build_effective(model.with_strengths(C)), schedule, config.t0Fraction * schedule.T, opts);
}

// Refines C against the final probabilities of the effective M-level dynamics
// started in the H_eff ground state at t0 = t0Fraction * T.
inline ControlResult optimize_iterative(const LhzModel& model, const TargetSpec& targets, std::span<const double> Cinit,
                                        const Schedule& schedule, const ControlConfig& config = {}) {
  detail::check_targets(model, targets);
  if (Cinit.size() != model.num_constraints()) throw Error(ErrorKind::ShapeMismatch, "wrong number of constraint strengths");
  if (!(config.t0Fraction > 0.0 && config.t0Fraction < 1.0)) throw Error(ErrorKind::OutOfRange, "t0 fraction outside (0, 1)");
  auto objective = [&](const Eigen::VectorXd& c) {
    return detail::guarded([&] {
      const auto C = detail::to_std(c);
      if (!ground_manifold_is_lowest(model.with_strengths(C))) return kInadmissibleCost;
      return cost(effective_run(model, C, schedule, config).finalProbabilities, targets);
    });
  };
  const Eigen::VectorXd first = detail::to_eigen(Cinit).cwiseMax(config.lower).cwiseMin(config.upper);
  const auto starts = detail::make_starts(first.size(), std::max<std::size_t>(1, config.refineRestarts), config, &first);
  const auto outcome = detail::multi_start(objective, starts, config, config.refineSimplex);
  auto r = detail::finish(model, outcome, Stage::Iterative, schedule, config);
  r.achieved = effective_run(model, r.C, schedule, config).finalProbabilities;
  return r;
}

inline constexpr std::size_t kMaxExactOptimizationQubits = 14;

// Refines C against the final probabilities of the full 2^K dynamics.
inline ControlResult optimize_exact(const LhzModel& model, const TargetSpec& targets, std::span<const double> Cinit,
                                    const Schedule& schedule, const ControlConfig& config = {}) {
  detail::check_targets(model, targets);
  if (model.K > kMaxExactOptimizationQubits) throw Error(ErrorKind::TooLarge, "exact optimization limited to 14 qubits");
  if (Cinit.size() != model.num_constraints()) throw Error(ErrorKind::ShapeMismatch, "wrong number of constraint strengths");
  PropagationOptions opts = config.propagation;
  opts.samples = 0;
  PropagationOptions inner = opts;
  inner.steps = config.exactInnerSteps;
  auto objective = [&](const Eigen::VectorXd& c) {
    return detail::guarded([&] {
      const auto C = detail::to_std(c);
      if (!ground_manifold_is_lowest(model.with_strengths(C))) return kInadmissibleCost;
      return cost(propagate_full(model, C, schedule, inner).finalProbabilities, targets);
    });
  };
  const Eigen::VectorXd first = detail::to_eigen(Cinit).cwiseMax(config.lower).cwiseMin(config.upper);
  const auto starts = detail::make_starts(first.size(), std::max<std::size_t>(1, config.refineRestarts), config, &first);
  const auto outcome = detail::multi_start(objective, starts, config, config.refineSimplex);
  auto r = detail::finish(model, outcome, Stage::Exact, schedule, config);
  const auto run = propagate_full(model, r.C, schedule, opts);
  r.achieved = run.finalProbabilities;
  r.leakage = run.leakage;
  return r;
}

}  // namespace lgprep
