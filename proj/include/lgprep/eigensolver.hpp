#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "lgprep/error.hpp"

namespace lgprep {

struct EigenOptions {
  double tolerance = 1e-10;  // residual norm relative to max(1, |lambda|)
  std::size_t maxIterations = 500;
  std::size_t extraVectors = 3;  // block size is k + extraVectors
  std::size_t maxBasisBlocks = 12;
  std::uint64_t seed = 12345;
};

struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  double maxResidual = 0.0;
  std::size_t iterations = 0;
};

using LinearOperator = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

namespace detail {

// Orthogonalizes the columns of `block` against `basis` and among themselves
// (two Gram-Schmidt passes). Columns that collapse are dropped.
inline Eigen::MatrixXd orthonormalize_against(const Eigen::MatrixXd& basis, Eigen::MatrixXd block) {
  Eigen::MatrixXd out(block.rows(), 0);
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    Eigen::VectorXd v = block.col(c);
    const double before = v.norm();
    if (before == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
      if (out.cols() > 0) v -= out * (out.transpose() * v);
    }
    const double after = v.norm();
    if (after < 1e-10 * before) continue;
    out.conservativeResize(Eigen::NoChange, out.cols() + 1);
    out.col(out.cols() - 1) = v / after;
  }
  return out;
}

}  // namespace detail

// Lowest k eigenpairs of a real symmetric operator by block Krylov expansion
// with Rayleigh-Ritz extraction and thick restarts. The block is wider than k
// so that degenerate or near-degenerate levels are resolved together.
inline EigenPairs lowest_eigenpairs(const LinearOperator& apply, std::size_t dim, std::size_t k,
                                    const EigenOptions& options = {}) {
  if (k == 0 || k > dim) throw Error(ErrorKind::OutOfRange, "requested eigenpair count outside [1, dim]");
  const auto n = static_cast<Eigen::Index>(dim);
  const std::size_t block = std::min(dim, k + options.extraVectors);
  const std::size_t maxBasis = std::min(dim, block * options.maxBasisBlocks);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd start(n, static_cast<Eigen::Index>(block));
  for (Eigen::Index c = 0; c < start.cols(); ++c) {
    for (Eigen::Index r = 0; r < n; ++r) start(r, c) = normal(rng);
  }

  Eigen::MatrixXd V = detail::orthonormalize_against(Eigen::MatrixXd(n, 0), start);
  Eigen::MatrixXd HV(n, V.cols());
  Eigen::VectorXd tmp(n);
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    apply(V.col(c), tmp);
    HV.col(c) = tmp;
  }

  EigenPairs result;
  for (std::size_t iter = 1; iter <= options.maxIterations; ++iter) {
    Eigen::MatrixXd S = V.transpose() * HV;
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const auto keep = static_cast<Eigen::Index>(std::min<std::size_t>(block, static_cast<std::size_t>(V.cols())));
    Eigen::MatrixXd Y = es.eigenvectors().leftCols(keep);
    Eigen::MatrixXd X = V * Y;
    Eigen::MatrixXd HX = HV * Y;
    Eigen::VectorXd theta = es.eigenvalues().head(keep);
    Eigen::MatrixXd R = HX - X * theta.asDiagonal();

    double worst = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      worst = std::max(worst, R.col(ci).norm() / std::max(1.0, std::abs(theta(ci))));
    }
    result.iterations = iter;
    result.maxResidual = worst;
    if (worst < options.tolerance || static_cast<std::size_t>(V.cols()) == dim) {
      result.values = theta.head(static_cast<Eigen::Index>(k));
      result.vectors = X.leftCols(static_cast<Eigen::Index>(k));
      return result;
    }

    if (static_cast<std::size_t>(V.cols()) + block > maxBasis) {
      V = X;
      HV = HX;
    }
    Eigen::MatrixXd fresh = detail::orthonormalize_against(V, R);
    if (fresh.cols() == 0) {
      result.values = theta.head(static_cast<Eigen::Index>(k));
      result.vectors = X.leftCols(static_cast<Eigen::Index>(k));
      return result;
    }
    const Eigen::Index old = V.cols();
    V.conservativeResize(Eigen::NoChange, old + fresh.cols());
    HV.conservativeResize(Eigen::NoChange, old + fresh.cols());
    for (Eigen::Index c = 0; c < fresh.cols(); ++c) {
      V.col(old + c) = fresh.col(c);
      apply(fresh.col(c), tmp);
      HV.col(old + c) = tmp;
    }
  }
  throw Error(ErrorKind::SolverFailure, "eigensolver did not converge", {result.maxResidual});
}

}  // namespace lgprep
