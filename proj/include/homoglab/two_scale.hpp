#pragma once

// Two-scale diagnostics: normalized test dictionaries, quenched / mean /
// limit pairings, the metric on pairing vectors, the unfolding isometry
// check and empirical Young-measure clustering.

#include "homoglab/integrand.hpp"
#include "homoglab/mesh.hpp"
#include "homoglab/random_medium.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace homoglab {

/// phi_Q(x) = prod_i cos(pi k_i x_i); k = (0, 0) is the constant 1_Q.
struct CosineMode {
  std::array<int, 2> k{0, 0};

  std::string id() const;
  double operator()(const Point& x, int dim) const;
  /// ||phi_Q||_{L^q(Q)}, Q = (0,1)^d.
  double lq_norm(double q, int dim) const;
};

struct DictionaryEntry {
  std::size_t omega_index = 0;  ///< into Dictionary::observables
  std::size_t q_index = 0;      ///< into Dictionary::modes
  std::string id;
  double norm = 1.0;            ///< ||phi_Omega phi_Q||_{B^q}
};

struct DictionaryConfig {
  int probe_radius = 2;    ///< value observables at z with |z|_inf < radius
  int cosine_degree = 2;   ///< cosines with max_i k_i <= degree
  std::size_t max_entries = 32;
  int mc_samples = 10000;  ///< for normalizations without closed form
  std::uint64_t seed = 0;
};

class Dictionary {
public:
  int dim = 1;
  double p = 2.0;
  std::vector<ObservableSpec> observables;  ///< identity first
  std::vector<double> observable_means;     ///< <phi_Omega>
  std::vector<double> observable_norms;     ///< ||phi_Omega||_{L^q(P)}
  std::vector<CosineMode> modes;            ///< 1_Q first
  std::vector<DictionaryEntry> entries;

  std::size_t size() const { return entries.size(); }
  double q() const { return p / (p - 1.0); }
  /// Stable fingerprint of ids, order and normalizations.
  std::string fingerprint() const;
};

/// phi_Omega: identity, then values at lattice points within the probe
/// radius (row-major). phi_Q: 1_Q, then cosines by increasing max degree.
/// Entries are products enumerated along anti-diagonals of (Omega, Q) index
/// pairs and truncated at max_entries.
Dictionary build_dictionary(const DictionaryConfig& cfg, double p, const EnsembleSpec& coefficient);

enum class PairingMode { function, gradient };

/// Normalized pairings U(phi_j / ||phi_j||). In gradient mode every test
/// function contributes 1 + d consecutive entries (u, d_1 u, d_2 u).
struct PairingVector {
  std::vector<double> values;
  std::vector<double> stderr;  ///< per entry, mean pairings only
  double eps = 0.0;
  double r = 0.0;
  std::string provenance;
  std::string fingerprint;
  PairingMode mode = PairingMode::function;
};

PairingVector quenched_pairing(const DiscreteField& u, const Realization& r, double eps, const Dictionary& dict,
                               PairingMode mode = PairingMode::function);

struct FieldSample {
  Realization realization;
  DiscreteField field;
};

/// Realization average of quenched pairings (left-to-right sum / N).
PairingVector mean_pairing(const std::vector<FieldSample>& samples, double eps, const Dictionary& dict,
                           PairingMode mode = PairingMode::function);

/// Entrywise average in index order; mean_pairing is defined through it.
PairingVector average_pairings(const std::vector<PairingVector>& vs);

/// Correlations C_ik(phi_Omega) = <d_i phi^{e_k}(omega, 0) phi_Omega(omega)> of
/// linear correctors with the dictionary observables, estimated from
/// periodized cell problems by RVE-averaging over sampled realizations.
struct CorrectorSampler {
  int dim = 1;
  std::vector<std::array<std::array<double, 2>, 2>> correlation;  ///< per observable
  std::vector<std::array<std::array<double, 2>, 2>> stderr;
  int samples = 0;
};

/// p = 2 only: chi is linear in F, so correlations of the two unit-direction
/// correctors determine chi(omega, x) for every macroscopic gradient.
CorrectorSampler sample_linear_correctors(const MediumEnsemble& ensemble, const IntegrandSpec& v,
                                          const Dictionary& dict, int L, int n_per_cell, int n_samples);

/// <int_Q u phi> for a deterministic limit u_hom (eps = 0). Gradient mode
/// pairs grad u_hom + chi and needs a corrector sampler.
PairingVector limit_pairing(const DiscreteField& u_hom, const Dictionary& dict, PairingMode mode,
                            const CorrectorSampler* sampler = nullptr);

/// sum_j 2^-j t_j / (1 + t_j), t_j = |U_j - V_j|, j = 1..J.
double metric_distance(const PairingVector& a, const PairingVector& b);

/// u(omega, x) given in closed form for a fixed eps.
using FieldRecipe = std::function<double(const Realization& omega, const Point& x, double eps)>;

struct IsometryReport {
  double norm_u = 0.0;
  double norm_unfolded = 0.0;
  double defect = 0.0;   ///< |norm_unfolded - norm_u| / norm_u
  double stderr = 0.0;   ///< relative standard error of the defect
  int samples = 0;
};

/// Empirical B^p norms of u and of T_eps u(omega, x) = u(tau_{-x/eps} omega, x)
/// over realizations 0..n_samples-1, with midpoint quadrature on a grid of
/// n_quad points per axis.
IsometryReport unfold_isometry_check(std::shared_ptr<const EnsembleSpec> ensemble, const FieldRecipe& u, double eps,
                                     double p, int n_samples, int n_quad = 64);

struct YoungCluster {
  std::vector<std::size_t> members;
  double weight = 0.0;
  double diameter = 0.0;
  PairingVector barycenter;
};

struct YoungMeasureReport {
  std::vector<YoungCluster> clusters;
  double min_separation = 0.0;          ///< between clusters; 0 when k = 1
  std::vector<double> cauchy_defects;   ///< per realization

  std::size_t k() const { return clusters.size(); }
};

/// Single-linkage clustering of final-eps pairing vectors.
YoungMeasureReport empirical_young_measure(const std::vector<std::vector<PairingVector>>& trajectories,
                                           double linkage_tol);

} // namespace homoglab
