#pragma once

// Stationary random checkerboards on Z^d, d in {1,2}.
//
// A realization is never stored: the value of lattice cell z is a pure
// function of (realization seed, z), produced by a counter-based hash and
// mapped through the inverse CDF of the cell distribution. The continuum
// field is
//
//     omega(x) = cell_value( floor(x + t - y) )          (mod L if periodized)
//
// with y the per-realization checkerboard offset and t the accumulated
// translation of the group action tau_t.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace homoglab {

/// Points and vectors in R^d; the second component is unused when d = 1.
using Point = std::array<double, 2>;
using Vec = std::array<double, 2>;
using Cell = std::array<std::int64_t, 2>;

enum class DistributionKind { discrete, uniform, power };

/// Law of a single checkerboard cell value.
///
/// discrete: values v_k > 0 with probabilities p_k.
/// uniform:  uniform on (lower, upper], lower >= 0.
/// power:    upper * U^(1/exponent), i.e. a Beta(exponent, 1) law scaled to
///           (0, upper]; its negative moments of order s exist iff s < exponent.
struct CellDistribution {
  DistributionKind kind = DistributionKind::discrete;
  std::vector<double> values{1.0};
  std::vector<double> probabilities{1.0};
  double lower = 0.0;
  double upper = 1.0;
  double exponent = 1.0;

  static CellDistribution discrete(std::vector<double> values, std::vector<double> probs);
  static CellDistribution uniform(double lower, double upper);
  static CellDistribution power(double exponent, double upper = 1.0);
  static CellDistribution constant(double value) { return discrete({value}, {1.0}); }

  void validate() const;
  /// Inverse CDF; u in [0, 1).
  double quantile(double u) const;
  /// E[X^s] when it has a closed form (nullopt otherwise, or when infinite).
  std::optional<double> moment(double s) const;
  double mean() const { return moment(1.0).value_or(0.0); }
  double min_value() const;
  double max_value() const;
};

struct EnsembleSpec {
  int dim = 2;
  CellDistribution cells;
  bool random_shift = true;
  std::optional<int> period;
  std::uint64_t seed = 0;

  void validate() const;
};

/// One sampled parameter field omega together with its translation state.
class Realization {
public:
  Realization() = default;
  Realization(std::shared_ptr<const EnsembleSpec> spec, std::uint64_t seed, Point offset);

  const EnsembleSpec& spec() const { return *spec_; }
  std::shared_ptr<const EnsembleSpec> spec_ptr() const { return spec_; }
  int dim() const { return spec_->dim; }
  std::uint64_t seed() const { return seed_; }
  const Point& offset() const { return offset_; }
  const Point& translation() const { return translation_; }
  const std::optional<int>& period() const { return period_; }

  /// Lattice index of the cell containing x (after wrapping for periodic fields).
  Cell cell_of(const Point& x) const;
  /// Value of lattice cell z of the base (untranslated) field.
  double cell_value(const Cell& z) const;
  double eval(const Point& x) const { return cell_value(cell_of(x)); }

  friend Realization shift(const Realization& r, const Vec& v);
  friend Realization periodize(const Realization& r, int period);

private:
  std::shared_ptr<const EnsembleSpec> spec_;
  std::uint64_t seed_ = 0;
  Point offset_{0.0, 0.0};
  Point translation_{0.0, 0.0};
  std::optional<int> period_;
};

/// Realization number `index` of the ensemble. Periodized ensembles return
/// periodized realizations.
Realization sample_realization(std::shared_ptr<const EnsembleSpec> spec, std::uint64_t index);

/// Group action: shift(r, v) evaluates as x -> r.eval(x + v).
Realization shift(const Realization& r, const Vec& v);

/// pi_L: wraps the lattice index modulo L. The result agrees with r on the
/// L^d block of cells starting at cell 0 and is L-periodic.
Realization periodize(const Realization& r, int period);

/// Local observable phi(omega) = g(omega(z_1), ..., omega(z_k)) with integer
/// probe offsets z_i.
struct ObservableSpec {
  std::string id;
  std::vector<std::array<int, 2>> probes;
  std::function<double(std::span<const double>)> g;

  static ObservableSpec identity();
  static ObservableSpec value_at(std::array<int, 2> z);

  /// phi(tau_z omega) for the realization r.
  double evaluate(const Realization& r, const Point& z) const;
};

struct Box {
  Point lo{0.0, 0.0};
  Point hi{1.0, 1.0};
  double volume(int dim) const;
};

/// Integral over Q of S phi(omega, x / eps). The integrand is constant on
/// every eps-scaled lattice cell, so summing cell values against the exact
/// cell-box intersection volume integrates it without quadrature error.
double birkhoff_average(const Realization& r, const ObservableSpec& obs, const Box& q, double eps);

namespace detail {
std::uint64_t mix64(std::uint64_t x);
std::uint64_t counter_hash(std::uint64_t seed, std::int64_t a, std::int64_t b, std::uint64_t stream);
/// 53-bit uniform in [0, 1).
double to_unit(std::uint64_t bits);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
} // namespace detail

} // namespace homoglab
