#include "homoglab/integrand.hpp"

#include "homoglab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace homoglab {

namespace {
constexpr std::uint64_t kGrowthStream = 7;
constexpr std::uint64_t kMomentStream = 11;

double norm(const Vec& F, int dim) {
  return dim == 1 ? std::abs(F[0]) : std::hypot(F[0], F[1]);
}
} // namespace

std::string to_string(IntegrandForm form) {
  switch (form) {
  case IntegrandForm::weighted_p_dirichlet: return "weighted-p-dirichlet";
  case IntegrandForm::two_phase_quadratic: return "two-phase-quadratic";
  case IntegrandForm::degenerate_weighted: return "degenerate-weighted";
  }
  return "?";
}

IntegrandForm parse_integrand_form(const std::string& s) {
  if (s == "weighted-p-dirichlet") return IntegrandForm::weighted_p_dirichlet;
  if (s == "two-phase-quadratic") return IntegrandForm::two_phase_quadratic;
  if (s == "degenerate-weighted") return IntegrandForm::degenerate_weighted;
  throw ValidationError("unknown integrand form '" + s + "'");
}

double Modulation::operator()(const Point& x, int dim) const {
  if (amplitude == 0.0) return 1.0;
  double s = 1.0;
  for (int i = 0; i < dim; ++i) s *= std::sin(2.0 * std::numbers::pi * x[i]);
  return 1.0 + amplitude * s;
}

void IntegrandSpec::validate() const {
  require(p >= 1.5 && p <= 4.0, "exponent p must lie in [1.5, 4]");
  require(std::abs(modulation.amplitude) < 1.0, "modulation amplitude must satisfy |A| < 1");
}

// ---------------------------------------------------------------------------

double Medium::micro_coefficient(const Point& z) const {
  double c = coefficient.eval(z);
  if (weight) c *= weight->eval(z);
  return c;
}

Medium Medium::shifted(const Vec& v) const {
  Medium m{shift(coefficient, v), std::nullopt};
  if (weight) m.weight = shift(*weight, v);
  return m;
}

Medium Medium::periodized(int period) const {
  Medium m{periodize(coefficient, period), std::nullopt};
  if (weight) m.weight = periodize(*weight, period);
  return m;
}

void MediumEnsemble::validate() const {
  require(coefficient != nullptr, "missing coefficient ensemble");
  coefficient->validate();
  if (weight) {
    weight->validate();
    require(weight->dim == coefficient->dim, "lambda ensemble dimension differs");
    require(weight->period == coefficient->period, "lambda ensemble period differs");
  }
}

Medium MediumEnsemble::sample(std::uint64_t index) const {
  Medium m{sample_realization(coefficient, index), std::nullopt};
  if (weight) m.weight = sample_realization(weight, index);
  return m;
}

MediumEnsemble MediumEnsemble::periodized(int period) const {
  MediumEnsemble out = *this;
  auto a = std::make_shared<EnsembleSpec>(*coefficient);
  a->period = period;
  out.coefficient = a;
  if (weight) {
    auto w = std::make_shared<EnsembleSpec>(*weight);
    w->period = period;
    out.weight = w;
  }
  return out;
}

// ---------------------------------------------------------------------------

double local_coefficient(const IntegrandSpec& v, const Medium& r, const Point& micro, const Point& macro) {
  return r.micro_coefficient(micro) * v.modulation(macro, r.dim());
}

double evaluate_density(const IntegrandSpec& v, double coefficient, const Vec& F, int dim) {
  const double p = v.exponent();
  const double n = norm(F, dim);
  if (n == 0.0) return 0.0;
  if (p == 2.0) return 0.5 * coefficient * n * n;
  return coefficient / p * std::pow(n, p);
}

double evaluate_density(const IntegrandSpec& v, const Medium& r, const Point& x, const Vec& F) {
  return evaluate_density(v, local_coefficient(v, r, x, x), F, r.dim());
}

Vec density_gradient(const IntegrandSpec& v, double coefficient, const Vec& F, int dim) {
  const double p = v.exponent();
  const double n = norm(F, dim);
  if (n == 0.0) return {0.0, 0.0};
  const double s = p == 2.0 ? coefficient : coefficient * std::pow(n, p - 2.0);
  return {s * F[0], dim == 2 ? s * F[1] : 0.0};
}

Vec density_gradient(const IntegrandSpec& v, const Medium& r, const Point& x, const Vec& F) {
  return density_gradient(v, local_coefficient(v, r, x, x), F, r.dim());
}

// ---------------------------------------------------------------------------

GrowthReport verify_growth(const IntegrandSpec& v, const MediumEnsemble& ensemble, std::size_t n,
                           double bound, std::uint64_t seed) {
  require(n >= 1, "verify_growth needs n >= 1");
  v.validate();
  ensemble.validate();
  const int dim = ensemble.dim();
  const double p = v.exponent();

  GrowthReport rep;
  rep.samples = n;
  rep.bound = bound;
  rep.c_low = std::numeric_limits<double>::infinity();
  rep.c_high = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Medium med = ensemble.sample(i);
    auto u = [&](std::int64_t k) {
      return detail::to_unit(detail::counter_hash(seed, static_cast<std::int64_t>(i), k, kGrowthStream));
    };
    const Point x{u(0), dim == 2 ? u(1) : 0.0};
    // |F| log-uniform in [1e-2, 1e2]
    const double mag = std::pow(10.0, -2.0 + 4.0 * u(2));
    const double angle = 2.0 * std::numbers::pi * u(3);
    Vec F = dim == 1 ? Vec{u(3) < 0.5 ? -mag : mag, 0.0} : Vec{mag * std::cos(angle), mag * std::sin(angle)};
    const double val = evaluate_density(v, med, x, F);
    const double ref = std::pow(norm(F, dim), p) / p;
    rep.c_low = std::min(rep.c_low, val / ref);
    rep.c_high = std::max(rep.c_high, val / ref);
  }

  if (v.form == IntegrandForm::degenerate_weighted) {
    rep.satisfies_a3 = false;
    rep.note = "degenerate weight: only (A3') can hold";
  } else {
    rep.satisfies_a3 = rep.c_low > 0.0 && rep.c_high / p <= bound && rep.c_low / p >= 1.0 / bound;
    rep.note = rep.satisfies_a3 ? "within bound" : "growth constants exceed bound";
  }
  return rep;
}

MomentEstimate moment_estimate(const EnsembleSpec& lambda, double p, std::size_t n) {
  require(p > 1.0, "moment_estimate needs p > 1");
  require(n >= 1, "moment_estimate needs n >= 1");
  lambda.validate();
  const double s = 1.0 / (p - 1.0);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = detail::to_unit(detail::counter_hash(lambda.seed, static_cast<std::int64_t>(i), 0, kMomentStream));
    x[i] = std::pow(lambda.cells.quantile(u), -s);
  }

  MomentEstimate est;
  est.samples = n;
  double sum = 0.0, sum_sq = 0.0, half_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += x[i];
    sum_sq += x[i] * x[i];
    if (i + 1 == n / 2) half_mean = sum / static_cast<double>(i + 1);
  }
  const double mean = sum / static_cast<double>(n);
  const double var = n > 1 ? std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(n - 1)) : 0.0;
  est.value = std::pow(mean, p - 1.0);
  // delta method for mean^(p-1)
  est.stderr = (p - 1.0) * std::pow(mean, p - 2.0) * std::sqrt(var / static_cast<double>(n));
  if (n >= 2 && half_mean > 0.0) est.last_doubling_change = std::abs(mean - half_mean) / half_mean;

  // Hill estimator on the top k = sqrt(n) order statistics.
  const std::size_t k = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  est.tail_index = std::numeric_limits<double>::infinity();
  if (n > k + 1) {
    std::vector<double> sorted = x;
    std::nth_element(sorted.begin(), sorted.end() - static_cast<std::ptrdiff_t>(k + 1), sorted.end());
    std::sort(sorted.end() - static_cast<std::ptrdiff_t>(k + 1), sorted.end());
    const double threshold = *(sorted.end() - static_cast<std::ptrdiff_t>(k + 1));
    double acc = 0.0;
    for (auto it = sorted.end() - static_cast<std::ptrdiff_t>(k); it != sorted.end(); ++it)
      acc += std::log(*it / threshold);
    if (acc > 0.0) est.tail_index = static_cast<double>(k) / acc;
  }
  est.divergence_suspected = est.last_doubling_change > 0.10 || est.tail_index <= 1.5;
  return est;
}

} // namespace homoglab
