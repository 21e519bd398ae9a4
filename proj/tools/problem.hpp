#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lgprep/lgprep.hpp"

namespace lgprep::cli {

// A problem file: target bit strings, optionally the logical couplings (the
// Hopfield rule is used when absent), the symmetry-breaking field, and one or
// more named target distributions.
struct Problem {
  std::string name;
  std::vector<BitString> strings;
  std::optional<Eigen::MatrixXd> couplings;
  double field = 0.0;
  std::vector<double> targets;
  std::map<std::string, std::vector<double>> targetSets;
  std::map<std::string, std::vector<double>> referenceC;
  nlohmann::json raw;

  LogicalModel logical() const {
    if (!couplings) return encode_hopfield(strings, field);
    return LogicalModel{strings.front().size(), *couplings, field};
  }

  // Named set, or the default `targets` entry for an empty name.
  TargetSpec target_spec(const std::string& set) const {
    if (set.empty() || set == "default") return TargetSpec::from(targets);
    auto it = targetSets.find(set);
    if (it == targetSets.end()) throw Error(ErrorKind::ParseError, "unknown target set '" + set + "'");
    return TargetSpec::from(it->second);
  }
};

inline Problem parse_problem(const nlohmann::json& j) {
  Problem p;
  p.raw = j;
  try {
    p.name = j.value("name", "");
    for (const auto& s : j.at("bitstrings")) p.strings.push_back(BitString::parse(s.get<std::string>()));
    if (p.strings.empty()) throw Error(ErrorKind::ParseError, "no bit strings given");
    const std::size_t N = p.strings.front().size();
    if (j.contains("couplings")) {
      const auto& rows = j.at("couplings");
      if (rows.size() != N) throw Error(ErrorKind::ShapeMismatch, "coupling matrix must be N x N");
      Eigen::MatrixXd J(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
      for (std::size_t r = 0; r < N; ++r) {
        if (rows[r].size() != N) throw Error(ErrorKind::ShapeMismatch, "coupling matrix must be N x N");
        for (std::size_t c = 0; c < N; ++c) J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
      }
      if ((J - J.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw Error(ErrorKind::ParseError, "coupling matrix is not symmetric");
      p.couplings = J;
    }
    p.field = j.value("field", 0.0);
    if (j.contains("targets")) {
      p.targets = j.at("targets").get<std::vector<double>>();
    } else {
      p.targets.assign(p.strings.size(), 1.0 / static_cast<double>(p.strings.size()));
    }
    if (j.contains("target_sets")) {
      for (const auto& [k, v] : j.at("target_sets").items()) p.targetSets[k] = v.get<std::vector<double>>();
    }
    if (j.contains("reference_C")) {
      for (const auto& [k, v] : j.at("reference_C").items()) p.referenceC[k] = v.get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed problem file: ") + e.what());
  }
  // Validates every distribution up front so that a bad file fails at load.
  if (p.targets.size() != p.strings.size()) throw Error(ErrorKind::ShapeMismatch, "target count does not match bit strings");
  TargetSpec::from(p.targets);
  for (const auto& [k, v] : p.targetSets) {
    if (v.size() != p.strings.size()) throw Error(ErrorKind::ShapeMismatch, "target set '" + k + "' has the wrong length");
    TargetSpec::from(v);
  }
  return p;
}

inline Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open problem file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("invalid JSON: ") + e.what());
  }
  return parse_problem(j);
}

}  // namespace lgprep::cli
