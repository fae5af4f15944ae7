#pragma once

// Experiment configuration: an INI document with sections
// [ensemble] [integrand] [study] [solver] [dictionary].

#include "homoglab/integrand.hpp"
#include "homoglab/solver.hpp"
#include "homoglab/two_scale.hpp"

#include <optional>
#include <string>
#include <vector>

namespace homoglab {

enum class ReferenceKind { automatic, exact, cell };

struct ExperimentConfig {
  std::string kind = "sweep";

  // [ensemble]
  int dim = 2;
  CellDistribution cells = CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5});
  bool random_shift = true;
  std::optional<int> period;
  std::uint64_t seed = 1;
  std::optional<CellDistribution> weight;

  // [integrand]
  IntegrandSpec integrand;
  double load = 1.0;

  // [study]
  std::vector<double> eps{0.125, 0.0625, 0.03125};
  std::vector<double> delta;
  std::vector<int> L{8};
  std::vector<Vec> F{{1.0, 0.0}};
  int realizations = 8;
  int mesh_per_eps = 8;
  int reference_n = 0;   ///< 0: 256 in d = 1, 128 in d = 2
  int n_per_cell = 8;
  int cell_samples = 8;
  int directions = 0;    ///< 0: 3 for p = 2, 8 otherwise
  ReferenceKind reference = ReferenceKind::automatic;
  std::optional<double> linkage_tol;  ///< unset: 0.02 in 1D, 0.005 in 2D
  double diagram_tol = 0.05;
  PairingMode pairing_mode = PairingMode::gradient;
  int corrector_samples = 8;
  bool contrast = false;
  int moment_samples = 100000;

  // [solver]
  SolverOptions solver;
  bool tol_given = false;

  // [dictionary]
  DictionaryConfig dictionary;

  MediumEnsemble ensemble() const;
  /// Same ensemble without periodization.
  MediumEnsemble ergodic_ensemble() const;
  int reference_mesh() const { return reference_n > 0 ? reference_n : (dim == 1 ? 256 : 128); }
  double linkage_threshold() const { return linkage_tol ? *linkage_tol : (dim == 1 ? 0.02 : 0.005); }
  int direction_count() const { return directions > 0 ? directions : (integrand.exponent() == 2.0 ? 3 : 8); }
  void validate() const;
  /// Full config with defaults, in a fixed key order.
  std::string resolved() const;
};

ExperimentConfig parse_config(const std::string& text);
/// Throws IoError when the file cannot be read, ValidationError on bad content.
ExperimentConfig load_config(const std::string& path);

} // namespace homoglab
