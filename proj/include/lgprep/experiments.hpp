#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/control.hpp"
#include "lgprep/dynamics.hpp"
#include "lgprep/effective.hpp"
#include "lgprep/error.hpp"
#include "lgprep/model.hpp"
#include "lgprep/parallel.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {

inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

inline std::vector<double> default_error_grid() { return linear_grid(0.6, 1.4, 9); }

struct RobustnessRow {
  std::size_t constraint = 0;
  double e = 1.0;
  std::optional<Eigen::VectorXd> probabilities;  // empty for inadmissible points
  double leakage = 0.0;
};

struct RobustnessScan {
  std::vector<double> baselineC;
  std::vector<double> errorFactors;
  std::vector<std::size_t> constraints;
  std::vector<RobustnessRow> rows;  // constraint-major, then e
  Eigen::VectorXd baseline;         // probabilities at e = 1
  std::vector<bool> independent;    // per scanned constraint: H_eff unchanged over the whole grid
  std::size_t missing = 0;

  // Largest |p(e) - p(1)| / p(1) over all probabilities for one row.
  double relative_deviation(const RobustnessRow& row) const {
    if (!row.probabilities) return NAN;
    return ((*row.probabilities - baseline).cwiseAbs().cwiseQuotient(baseline.cwiseMax(1e-300))).maxCoeff();
  }
};

struct ScanOptions {
  std::size_t jobs = 1;
  PropagationOptions propagation{.steps = 4000, .samples = 0};
};

namespace detail {

inline bool same_effective(const EffectiveHamiltonian& a, const EffectiveHamiltonian& b) {
  const double tol = 1e-12;
  return std::abs(a.e0 - b.e0) <= tol && (a.e - b.e).cwiseAbs().maxCoeff() <= tol &&
         (a.g - b.g).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace detail

// Final full-dynamics probabilities with one constraint strength scaled by e
// and the others held at the baseline.
inline RobustnessScan scan_robustness(const LhzModel& model, std::span<const double> baselineC, std::span<const double> eGrid,
                                      const Schedule& schedule, std::span<const std::size_t> constraints = {},
                                      const ScanOptions& options = {}) {
  if (baselineC.size() != model.num_constraints()) throw Error(ErrorKind::ShapeMismatch, "wrong number of constraint strengths");
  RobustnessScan scan;
  scan.baselineC.assign(baselineC.begin(), baselineC.end());
  scan.errorFactors.assign(eGrid.begin(), eGrid.end());
  if (constraints.empty()) {
    for (std::size_t p = 0; p < model.num_constraints(); ++p) scan.constraints.push_back(p);
  } else {
    for (auto p : constraints) {
      if (p >= model.num_constraints()) throw Error(ErrorKind::OutOfRange, "constraint index out of range");
      scan.constraints.push_back(p);
    }
  }
  scan.baseline = propagate_full(model, baselineC, schedule, options.propagation).finalProbabilities;

  const std::size_t nE = eGrid.size();
  scan.rows.resize(scan.constraints.size() * nE);
  parallel_for(scan.rows.size(), options.jobs, [&](std::size_t i) {
    RobustnessRow row;
    row.constraint = scan.constraints[i / nE];
    row.e = eGrid[i % nE];
    std::vector<double> C = scan.baselineC;
    C[row.constraint] *= row.e;
    try {
      const auto scaled = model.with_strengths(C);
      if (ground_manifold_is_lowest(scaled)) {
        const auto run = propagate_full(scaled, schedule, options.propagation);
        row.probabilities = run.finalProbabilities;
        row.leakage = run.leakage;
      }
    } catch (const Error& err) {
      if (err.kind() == ErrorKind::IntegratorFailure) throw;
    }
    scan.rows[i] = std::move(row);
  });
  for (const auto& r : scan.rows) scan.missing += r.probabilities ? 0 : 1;

  const auto reference = build_effective(model.with_strengths(baselineC));
  for (auto p : scan.constraints) {
    bool same = true;
    for (double e : eGrid) {
      std::vector<double> C = scan.baselineC;
      C[p] *= e;
      try {
        same = same && detail::same_effective(reference, build_effective(model.with_strengths(C)));
      } catch (const Error&) {
        same = false;
      }
    }
    scan.independent.push_back(same);
  }
  return scan;
}

// Triangular binning of the 2-simplex. Each side is split into `divisions`
// parts, giving divisions^2 congruent triangles.
class SimplexHistogram {
 public:
  explicit SimplexHistogram(std::size_t divisions = 20) : n_(divisions), counts_(divisions * divisions, 0) {
    if (divisions == 0) throw Error(ErrorKind::OutOfRange, "histogram needs at least one division");
  }

  std::size_t divisions() const { return n_; }
  std::size_t bins() const { return counts_.size(); }
  const std::vector<std::size_t>& counts() const { return counts_; }

  // Bin of (p1, p2, 1 - p1 - p2). Upward triangles come first, row by row.
  std::size_t bin(double p1, double p2) const {
    const double n = static_cast<double>(n_);
    const double a = std::clamp(p1, 0.0, 1.0) * n;
    const double b = std::clamp(p2, 0.0, 1.0) * n;
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(a), n_ - 1);
    const auto j = std::min<std::size_t>(static_cast<std::size_t>(b), n_ - 1 - i);
    const double fa = a - static_cast<double>(i);
    const double fb = b - static_cast<double>(j);
    if (fa + fb > 1.0 && i + j + 2 <= n_) return upward_count() + down_index(i, j);
    return up_index(i, j);
  }

  void add(double p1, double p2) { ++counts_[bin(p1, p2)]; }
  void add_to_bin(std::size_t b) { ++counts_.at(b); }

  // Barycentric vertices of a bin, for plotting.
  std::array<std::array<double, 2>, 3> corners(std::size_t bin) const {
    const double h = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; i + j < n_; ++j) {
        const double x = static_cast<double>(i) * h;
        const double y = static_cast<double>(j) * h;
        if (up_index(i, j) == bin) return {{{x, y}, {x + h, y}, {x, y + h}}};
        if (i + j + 2 <= n_ && upward_count() + down_index(i, j) == bin) return {{{x + h, y}, {x, y + h}, {x + h, y + h}}};
      }
    }
    throw Error(ErrorKind::OutOfRange, "bin index out of range");
  }

  double coverage() const {
    const auto hit = std::count_if(counts_.begin(), counts_.end(), [](std::size_t c) { return c > 0; });
    return static_cast<double>(hit) / static_cast<double>(counts_.size());
  }

 private:
  std::size_t upward_count() const { return n_ * (n_ + 1) / 2; }
  // Row i holds n - i upward and n - i - 1 downward triangles.
  std::size_t up_index(std::size_t i, std::size_t j) const { return i * n_ - i * (i - 1) / 2 + j; }
  std::size_t down_index(std::size_t i, std::size_t j) const { return i * (n_ - 1) - (i * (i - 1)) / 2 + j; }

  std::size_t n_;
  std::vector<std::size_t> counts_;
};

struct ErgodicityPoint {
  std::vector<double> C;
  double tOverT = 0.0;
  Eigen::VectorXd p;
};

struct ErgodicityScan {
  std::vector<double> cGrid;
  std::vector<double> tdGrid;  // as fractions of T
  std::vector<ErgodicityPoint> points;  // only filled when requested
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // C combinations with singular denominators
  std::optional<SimplexHistogram> histogram;  // M = 3 only
};

struct ErgodicityOptions {
  std::size_t jobs = 1;
  bool keepPoints = false;
  std::size_t divisions = 20;
};

// Grid values lo, lo + step, ... up to hi (inclusive within rounding).
inline std::vector<double> stepped_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::OutOfRange, "invalid grid");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
  return g;
}

// Freeze times k T / steps for k = 1 .. steps - 1, plus one just before T.
inline std::vector<double> default_freeze_fractions(std::size_t steps = 30) {
  std::vector<double> f;
  for (std::size_t k = 1; k < steps; ++k) f.push_back(static_cast<double>(k) / static_cast<double>(steps));
  f.push_back(1.0 - 1e-4);
  return f;
}

// Probability vectors of the H_eff ground state for every C on the grid (the
// same values for each constraint) and every freeze time. The amplitudes are
// taken as frozen from that time on.
inline ErgodicityScan scan_ergodicity(const LhzModel& model, std::span<const double> cGrid, std::span<const double> tdFractions,
                                      const Schedule& schedule, const ErgodicityOptions& options = {}) {
  const std::size_t P = model.num_constraints();
  const std::size_t M = model.groundStrings.size();
  if (cGrid.empty() || tdFractions.empty()) throw Error(ErrorKind::OutOfRange, "empty scan grid");
  for (double f : tdFractions) {
    if (!(f > 0.0 && f < 1.0)) throw Error(ErrorKind::OutOfRange, "freeze fraction outside (0, 1)");
  }
  std::size_t combos = 1;
  for (std::size_t p = 0; p < P; ++p) combos *= cGrid.size();

  struct Chunk {
    std::vector<ErgodicityPoint> points;
    std::vector<std::size_t> bins;
    bool skipped = false;
  };
  std::vector<Chunk> chunks(combos);
  std::optional<SimplexHistogram> shape;
  if (M == 3) shape.emplace(options.divisions);

  parallel_for(combos, options.jobs, [&](std::size_t index) {
    std::vector<double> C(P);
    std::size_t rest = index;
    for (std::size_t p = P; p-- > 0;) {
      C[p] = cGrid[rest % cGrid.size()];
      rest /= cGrid.size();
    }
    Chunk& chunk = chunks[index];
    EffectiveHamiltonian heff;
    try {
      heff = build_effective(model.with_strengths(C));
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::SingularDenominator) throw;
      chunk.skipped = true;
      return;
    }
    for (double f : tdFractions) {
      const Eigen::VectorXd p = ground_vector(evaluate(heff, f * schedule.T, schedule)).cwiseAbs2();
      if (shape) chunk.bins.push_back(shape->bin(p(0), p(1)));
      if (options.keepPoints) chunk.points.push_back({C, f, p});
    }
  });

  ErgodicityScan scan;
  scan.cGrid.assign(cGrid.begin(), cGrid.end());
  scan.tdGrid.assign(tdFractions.begin(), tdFractions.end());
  scan.histogram = std::move(shape);
  for (auto& chunk : chunks) {
    if (chunk.skipped) {
      ++scan.skipped;
      continue;
    }
    scan.evaluated += tdFractions.size();
    if (scan.histogram) {
      for (auto b : chunk.bins) scan.histogram->add_to_bin(b);
    }
    for (auto& pt : chunk.points) scan.points.push_back(std::move(pt));
  }
  return scan;
}

}  // namespace lgprep
