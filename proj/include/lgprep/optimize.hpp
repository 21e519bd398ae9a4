#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "lgprep/error.hpp"

namespace lgprep {

struct NelderMeadOptions {
  std::size_t maxEvaluations = 600;
  double fTolerance = 1e-12;   // spread of simplex values
  double xTolerance = 1e-7;    // simplex diameter
  double initialStep = 0.15;   // relative to max(|x0_i|, 1)
  double boundPenalty = 1e3;   // per unit squared distance outside the box
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Box-constrained Nelder-Mead. Trial points are clamped into [lower, upper]
// before the objective sees them; the distance that was clamped away is
// charged as a quadratic penalty so the simplex is pulled back inside.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                                    const Eigen::VectorXd& x0, double lower, double upper,
                                    const NelderMeadOptions& options = {}) {
  const Eigen::Index n = x0.size();
  if (n == 0) throw Error(ErrorKind::ShapeMismatch, "empty parameter vector");
  if (!(lower < upper)) throw Error(ErrorKind::OutOfRange, "lower bound must be below upper bound");

  std::size_t evaluations = 0;
  auto f = [&](const Eigen::VectorXd& x) {
    ++evaluations;
    const Eigen::VectorXd clamped = x.cwiseMax(lower).cwiseMin(upper);
    const double outside = (x - clamped).squaredNorm();
    double value = objective(clamped);
    if (!std::isfinite(value)) value = 1e300;
    return value + options.boundPenalty * outside;
  };

  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.push_back(x0.cwiseMax(lower).cwiseMin(upper));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = simplex[0];
    const double step = options.initialStep * std::max(std::abs(v(i)), 1.0);
    v(i) = (v(i) + step <= upper) ? v(i) + step : v(i) - step;
    simplex.push_back(v);
  }
  for (const auto& v : simplex) values.push_back(f(v));

  std::vector<std::size_t> order(simplex.size());
  bool converged = false;
  while (evaluations < options.maxEvaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];

    double diameter = 0.0;
    for (const auto& v : simplex) diameter = std::max(diameter, (v - simplex[best]).cwiseAbs().maxCoeff());
    if (values[worst] - values[best] <= options.fTolerance && diameter <= options.xTolerance * std::max(1.0, simplex[best].norm())) {
      converged = true;
      break;
    }
    if (diameter <= options.xTolerance) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = f(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid)) : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = f(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = f(simplex[i]);
    }
  }

  const auto bestIt = std::min_element(values.begin(), values.end());
  const auto b = static_cast<std::size_t>(bestIt - values.begin());
  NelderMeadResult result;
  result.x = simplex[b].cwiseMax(lower).cwiseMin(upper);
  result.value = values[b];
  result.evaluations = evaluations;
  result.converged = converged;
  return result;
}

}  // namespace lgprep
