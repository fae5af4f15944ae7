#pragma once

// Energies on uniform P1 meshes and their minimization.
//
//   I_eps(u)  = sum_i w_i [ int_Q V(tau_{x/eps} omega_i, x, grad u_i) - f u_i ]
//               + delta sum_i w_i int_Q |grad u_i - mean_j grad u_j|^p
//   cell(F)   = L^-d int_{[0,L)^d} V(omega, y, F + grad phi) + delta |grad phi|^p
//
// Quadratic energies (p = 2, coupled or not) go through preconditioned linear CG,
// everything else through preconditioned Polak-Ribiere nonlinear CG with an
// Armijo backtracking line search.

#include "homoglab/homogenized.hpp"
#include "homoglab/integrand.hpp"
#include "homoglab/kernels.hpp"
#include "homoglab/mesh.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace homoglab {

/// Right-hand side f; a closed-form field overrides the constant.
struct Load {
  double constant = 1.0;
  std::function<double(const Point&)> field;

  double at(const Point& x) const { return field ? field(x) : constant; }
};

struct WeightedMedium {
  Medium medium;
  double weight = 1.0;
};

class EnergyFunctional {
public:
  std::shared_ptr<const Mesh> mesh;
  Constraint constraint = Constraint::dirichlet_zero;
  double p = 2.0;
  double eps = 1.0;
  double scale = 1.0;
  Vec offset{0.0, 0.0};
  double corrector_penalty = 0.0;
  double variance_penalty = 0.0;
  bool coupled = false;
  std::vector<double> weights;
  std::vector<std::uint64_t> seeds;
  std::vector<double> coefficients;  ///< blocks * num_elements
  std::optional<HomogenizedIntegrand> homogenized;
  std::vector<double> load;          ///< nodal load vector, empty for cell problems
  std::vector<std::string> warnings;

  std::size_t blocks() const { return weights.size(); }
  std::size_t num_dofs() const { return blocks() * mesh->num_nodes(); }
  bool quadratic() const { return p == 2.0; }

  kernels::ElementProblem problem() const;
  double value(std::span<const double> u) const;
  /// Energy and constrained gradient.
  double value_and_gradient(std::span<const double> u, std::span<double> grad, kernels::Workspace& ws) const;
  /// Zeroes Dirichlet entries / removes block means.
  void constrain(std::span<double> v) const;
  /// Variance coupling term alone (zero when uncoupled).
  double variance_term(std::span<const double> u) const;
};

/// Builds I_eps for the given realizations. With coupled = true and
/// delta > 0 the variance term couples all realizations.
EnergyFunctional assemble_energy(const std::vector<WeightedMedium>& realizations, double eps,
                                 std::shared_ptr<const Mesh> mesh, const IntegrandSpec& v, const Load& f,
                                 double delta = 0.0, bool coupled = false);

/// Energy int_Q m(x) W_hom(grad u) - f u of a homogenized problem.
EnergyFunctional assemble_homogenized(std::shared_ptr<const Mesh> mesh, const HomogenizedIntegrand& hom,
                                      const IntegrandSpec& v, const Load& f);

enum class Method { automatic, linear_cg, nonlinear_cg };

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 20000;
  Method method = Method::automatic;
  bool record_trace = false;
};

struct MinimizeResult {
  std::vector<DiscreteField> fields;   ///< one per realization block
  DiscreteField mean_field;            ///< weighted mean of the fields
  double energy = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  bool converged = false;
  std::string method;
  std::vector<double> energy_trace;    ///< accepted energies when requested
};

MinimizeResult minimize(const EnergyFunctional& e, const SolverOptions& opt = {});

struct CellResult {
  double value = 0.0;
  DiscreteField corrector;
  int iterations = 0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  bool converged = false;
};

/// Regularized periodic cell problem on [0,L)^d with n_per_cell elements per
/// unit length. Unperiodized media are periodized with period L; an already
/// periodic medium must have a period dividing L.
CellResult cell_problem(const Medium& r, int L, const IntegrandSpec& v, const Vec& F, double delta,
                        int n_per_cell, const SolverOptions& opt = {});

struct EffectiveRow {
  Vec F{0.0, 0.0};
  int L = 1;
  double delta = 0.0;
  double mean = 0.0;
  double stderr = 0.0;
  int n_samples = 0;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<int> iterations;           ///< per sample
  std::vector<double> grad_norms;        ///< per sample
  std::vector<double> sample_ms;         ///< per sample
  int max_iterations = 0;
  double max_grad_norm = 0.0;
  double wall_ms = 0.0;
  bool converged = true;
};

/// Monte Carlo mean of the cell value over realizations 0..n_samples-1 for
/// each F in the grid.
std::vector<EffectiveRow> effective_integrand(const MediumEnsemble& ensemble, int L, const IntegrandSpec& v,
                                              const std::vector<Vec>& F_grid, double delta, int n_samples,
                                              int n_per_cell, const SolverOptions& opt = {});

/// Homogenized integrand tabulated over `directions` unit directions from
/// ensemble means (d = 1 uses the single direction e_1).
HomogenizedIntegrand homogenize(const MediumEnsemble& ensemble, int L, const IntegrandSpec& v, double delta,
                                int n_samples, int n_per_cell, int directions, const SolverOptions& opt = {},
                                std::vector<EffectiveRow>* rows = nullptr);

/// Same from the cell problems of a single medium.
HomogenizedIntegrand homogenize_medium(const Medium& r, int L, const IntegrandSpec& v, double delta, int n_per_cell,
                                       int directions, const SolverOptions& opt = {});

/// Joint minimization of the variance-regularized energy over N >= 2
/// Dirichlet fields with equal weights 1/N.
MinimizeResult minimize_coupled(const std::vector<Medium>& realizations, double eps,
                                std::shared_ptr<const Mesh> mesh, const IntegrandSpec& v, const Load& f,
                                double delta, const SolverOptions& opt = {});

} // namespace homoglab
