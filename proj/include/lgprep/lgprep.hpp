#pragma once

#include "lgprep/bitstring.hpp"
#include "lgprep/control.hpp"
#include "lgprep/diabatic.hpp"
#include "lgprep/dynamics.hpp"
#include "lgprep/effective.hpp"
#include "lgprep/eigensolver.hpp"
#include "lgprep/error.hpp"
#include "lgprep/experiments.hpp"
#include "lgprep/hamiltonian.hpp"
#include "lgprep/model.hpp"
#include "lgprep/optimize.hpp"
#include "lgprep/parallel.hpp"
#include "lgprep/schedule.hpp"

namespace lgprep {
inline constexpr const char* kVersion = "0.1.0";
}
