#pragma once

#include <functional>

#include "lgprep/error.hpp"

namespace lgprep {

// Weights of the three terms of the sweep Hamiltonian at one instant:
//   H(t) = fields * H_J + constraints * H_C - transverse * sum_i sigma^x_i.
struct TermWeights {
  double transverse = 0.0;
  double fields = 0.0;
  double constraints = 0.0;
};

// Run time T plus switching functions of t. The default linear sweep ramps
// the problem terms up as t/T and the transverse field down as 1 - t/T. The
// effective-model formulas assume this linear form; other schedules are only
// supported by the full-space routines.
struct Schedule {
  double T = 100.0;
  std::function<double(double)> transverse;
  std::function<double(double)> fields;
  std::function<double(double)> constraints;

  static Schedule linear(double runTime) {
    if (!(runTime > 0.0)) throw Error(ErrorKind::OutOfRange, "run time T must be positive");
    Schedule s;
    s.T = runTime;
    s.transverse = [runTime](double t) { return 1.0 - t / runTime; };
    s.fields = [runTime](double t) { return t / runTime; };
    s.constraints = [runTime](double t) { return t / runTime; };
    return s;
  }

  TermWeights weights(double t) const { return {transverse(t), fields(t), constraints(t)}; }
};

}  // namespace lgprep
