#pragma once

// Reproducible studies driven by an ExperimentConfig. Each run_* function
// returns typed results; to_output() turns them into report.csv, auxiliary
// tables and SVG plots.

#include "homoglab/config.hpp"
#include "homoglab/report.hpp"
#include "homoglab/solver.hpp"
#include "homoglab/two_scale.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace homoglab {

struct RunOptions {
  bool force = false;    ///< run even when h > eps/4
  bool timing = false;   ///< fill wall_ms columns (otherwise 0, so reports stay byte-stable)
};

struct NamedTable {
  std::string name;
  Table table;
};

struct NamedPlot {
  std::string name;
  std::string svg;
};

struct StudyOutput {
  Table report;
  std::vector<NamedTable> extra;
  std::vector<NamedPlot> plots;
  std::vector<std::string> warnings;
  bool converged = true;
};

/// Homogenized reference used by sweeps and diagrams.
struct Reference {
  HomogenizedIntegrand integrand;
  std::string source;  ///< "exact" or "cell"
  std::vector<EffectiveRow> rows;
};

/// Closed form of V_hom when one exists: d = 1 (any p, delta = 0) and the
/// symmetric two-phase checkerboard in d = 2 (p = 2).
std::optional<HomogenizedIntegrand> exact_homogenized(const ExperimentConfig& cfg);
Reference homogenized_reference(const ExperimentConfig& cfg, double delta);

/// Least-squares line through (log x, log y).
struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  ///< root mean square in log space
  int points = 0;
};
RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);
double median(std::vector<double> v);

// --- sweep ------------------------------------------------------------------

struct SweepRow {
  double eps = 0.0;
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double energy = 0.0;
  double gap = 0.0;
  double lp_distance = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  bool converged = true;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<double> eps;
  std::vector<double> median_gap;
  std::vector<double> median_distance;
  double hom_energy = 0.0;
  std::string reference_source;
  RateFit gap_rate;
  RateFit distance_rate;
  std::vector<std::string> warnings;
};

SweepResult run_sweep(const ExperimentConfig& cfg, const RunOptions& opt = {});
StudyOutput to_output(const SweepResult& r, const ExperimentConfig& cfg);

// --- regularization diagram -------------------------------------------------

struct DiagramResult {
  std::vector<double> eps;
  std::vector<double> delta;                 ///< positive deltas, decreasing
  std::vector<double> hom_delta;             ///< min E_hom,delta per delta
  double hom = 0.0;                          ///< min E_hom (delta = 0)
  std::vector<std::vector<double>> coupled;  ///< [eps][delta] min E_eps,delta
  std::vector<double> decoupled;             ///< [eps] mean of min E_eps^omega
  std::vector<double> vhom_delta;            ///< V_hom,L,delta(e_1) per delta
  double vhom = 0.0;                         ///< V_hom,L(e_1)
  double path_a = 0.0;                       ///< delta -> 0 of the homogenized row
  double path_b = 0.0;                       ///< delta -> 0 of the coupled row at the finest eps
  double disagreement = 0.0;                 ///< |A - B| / |min E_hom|
  bool paths_agree = true;                   ///< disagreement <= diagram_tol
  bool vhom_monotone = true;
  bool ordering_holds = true;                ///< min E_eps,delta >= decoupled min
  MomentEstimate moment;
  std::vector<std::string> warnings;
  bool converged = true;
};

DiagramResult run_diagram(const ExperimentConfig& cfg, const RunOptions& opt = {});
StudyOutput to_output(const DiagramResult& r, const ExperimentConfig& cfg);

// --- quenched pairings and Young measures -------------------------------------

struct PairingStudy {
  Dictionary dictionary;
  PairingMode mode = PairingMode::function;
  std::vector<double> eps;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<PairingVector>> quenched;  ///< [realization][eps]
  std::vector<PairingVector> mean;                  ///< [eps]
  std::optional<PairingVector> limit;
  std::vector<std::vector<double>> quenched_distance;  ///< [eps][realization] to limit
  std::vector<double> mean_distance;                   ///< [eps]
  YoungMeasureReport young;
  std::vector<std::string> warnings;
  bool converged = true;
};

/// Solves every (eps, realization) problem and pairs the minimizers with the
/// dictionary; with_limit adds the homogenized limit pairing.
PairingStudy run_pairing_study(const ExperimentConfig& cfg, const MediumEnsemble& ensemble, bool with_limit,
                               const RunOptions& opt = {});

StudyOutput quenched_vs_mean_output(const PairingStudy& s, const ExperimentConfig& cfg);
StudyOutput pair_output(const PairingStudy& s, const ExperimentConfig& cfg);
StudyOutput young_output(const PairingStudy& s, const ExperimentConfig& cfg);

// --- nonergodic ---------------------------------------------------------------

struct NonergodicResult {
  std::vector<std::uint64_t> seeds;
  std::vector<double> cell_values;       ///< V_hom^omega(e_1) from the fundamental cell
  PairingStudy periodic;
  std::optional<PairingStudy> ergodic;   ///< contrast run
  std::vector<std::string> warnings;
  bool converged = true;
};

NonergodicResult run_nonergodic(const ExperimentConfig& cfg, const RunOptions& opt = {});
StudyOutput to_output(const NonergodicResult& r, const ExperimentConfig& cfg);

// --- cell, solve, degenerate ----------------------------------------------------

struct CellStudy {
  std::vector<EffectiveRow> rows;  ///< for every (delta, L, F)
  std::vector<std::string> warnings;
  bool converged = true;
};

CellStudy run_cell(const ExperimentConfig& cfg, const RunOptions& opt = {});
StudyOutput to_output(const CellStudy& r, const ExperimentConfig& cfg, const RunOptions& opt = {});

StudyOutput run_solve(const ExperimentConfig& cfg, const RunOptions& opt = {});
StudyOutput run_degenerate(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// Dispatches on the command name and writes report.csv, config.resolved,
/// auxiliary CSVs and plots/*.svg into out_dir. Returns the process exit code.
int run_command(const std::string& command, const ExperimentConfig& cfg, const std::string& out_dir,
                const RunOptions& opt = {});

/// "config=<fnv1a of resolved config> seed=<master seed>".
std::string provenance(const ExperimentConfig& cfg);

} // namespace homoglab
