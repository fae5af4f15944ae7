#pragma once

// Convex power-law densities V(omega, x, F) = c(omega, x) / p * |F|^p where the
// local coefficient c = a(omega) * lambda(omega) * m(x) combines the random
// a-field, an optional independent degenerate weight lambda and a smooth
// deterministic modulation m.

#include "homoglab/random_medium.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace homoglab {

enum class IntegrandForm { weighted_p_dirichlet, two_phase_quadratic, degenerate_weighted };

std::string to_string(IntegrandForm form);
IntegrandForm parse_integrand_form(const std::string& s);

/// m(x) = 1 + amplitude * prod_i sin(2 pi x_i); bounded in [1 - |A|, 1 + |A|].
struct Modulation {
  double amplitude = 0.0;

  double operator()(const Point& x, int dim) const;
  double min_value() const { return 1.0 - std::abs(amplitude); }
  double max_value() const { return 1.0 + std::abs(amplitude); }
};

struct IntegrandSpec {
  IntegrandForm form = IntegrandForm::weighted_p_dirichlet;
  double p = 2.0;
  Modulation modulation;

  /// Effective exponent (the quadratic form always uses 2).
  double exponent() const { return form == IntegrandForm::two_phase_quadratic ? 2.0 : p; }
  void validate() const;
};

/// A realization of the a-field together with an optional independent
/// lambda-field, moved jointly by the group action.
struct Medium {
  Realization coefficient;
  std::optional<Realization> weight;

  int dim() const { return coefficient.dim(); }
  /// a(z) * lambda(z) at micro point z.
  double micro_coefficient(const Point& z) const;
  Medium shifted(const Vec& v) const;
  Medium periodized(int period) const;
  std::optional<int> period() const { return coefficient.period(); }
  std::uint64_t seed() const { return coefficient.seed(); }
};

/// a-ensemble plus optional lambda-ensemble; realization i of both is drawn
/// from independent streams.
struct MediumEnsemble {
  std::shared_ptr<const EnsembleSpec> coefficient;
  std::shared_ptr<const EnsembleSpec> weight;

  int dim() const { return coefficient->dim; }
  void validate() const;
  Medium sample(std::uint64_t index) const;
  MediumEnsemble periodized(int period) const;
};

/// Full local coefficient c = a(z) lambda(z) m(x) at micro point z and macro point x.
double local_coefficient(const IntegrandSpec& v, const Medium& r, const Point& micro, const Point& macro);

/// V(omega, x, F) with the medium evaluated at x itself (callers pass the
/// shifted medium tau_{x/eps} omega, or use the micro/macro overload).
double evaluate_density(const IntegrandSpec& v, const Medium& r, const Point& x, const Vec& F);
double evaluate_density(const IntegrandSpec& v, double coefficient, const Vec& F, int dim);

/// dV/dF = c |F|^(p-2) F; zero at F = 0 (minimal-norm subgradient for p < 2).
Vec density_gradient(const IntegrandSpec& v, const Medium& r, const Point& x, const Vec& F);
Vec density_gradient(const IntegrandSpec& v, double coefficient, const Vec& F, int dim);

/// Empirical growth constants relative to the reference density |F|^p / p:
/// c_low = min V / (|F|^p/p), c_high = max V / (|F|^p/p). Growth (A3) with
/// constant C holds when c_high / p <= C and c_low / p >= 1 / C; the
/// degenerate-weighted form is reported as not satisfying (A3).
struct GrowthReport {
  double c_low = 0.0;
  double c_high = 0.0;
  std::size_t samples = 0;
  double bound = 0.0;
  bool satisfies_a3 = false;
  std::string note;
};

GrowthReport verify_growth(const IntegrandSpec& v, const MediumEnsemble& ensemble, std::size_t n,
                           double bound = 10.0, std::uint64_t seed = 0);

/// Monte Carlo estimate of <lambda^(-1/(p-1))>^(p-1).
struct MomentEstimate {
  double value = 0.0;
  double stderr = 0.0;
  std::size_t samples = 0;
  /// Running estimate moved by more than 10% over the last doubling of n,
  /// or the Hill tail index of lambda^(-1/(p-1)) is at most 1.5.
  bool divergence_suspected = false;
  double last_doubling_change = 0.0;
  double tail_index = 0.0;
};

MomentEstimate moment_estimate(const EnsembleSpec& lambda, double p, std::size_t n);

} // namespace homoglab
