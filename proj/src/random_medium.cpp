#include "homoglab/random_medium.hpp"

#include "homoglab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace homoglab {

namespace detail {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t counter_hash(std::uint64_t seed, std::int64_t a, std::int64_t b, std::uint64_t stream) {
  std::uint64_t h = mix64(seed ^ (stream * 0xD6E8FEB86659FD93ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(a) * 0xA0761D6478BD642FULL);
  h = mix64(h ^ static_cast<std::uint64_t>(b) * 0xE7037ED1A0B428DBULL);
  return h;
}

double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

} // namespace detail

namespace {
constexpr std::uint64_t kCellStream = 0;
constexpr std::uint64_t kOffsetStream = 1;
} // namespace

// ---------------------------------------------------------------------------
// CellDistribution

CellDistribution CellDistribution::discrete(std::vector<double> values, std::vector<double> probs) {
  CellDistribution d;
  d.kind = DistributionKind::discrete;
  d.values = std::move(values);
  d.probabilities = std::move(probs);
  return d;
}

CellDistribution CellDistribution::uniform(double lower, double upper) {
  CellDistribution d;
  d.kind = DistributionKind::uniform;
  d.lower = lower;
  d.upper = upper;
  return d;
}

CellDistribution CellDistribution::power(double exponent, double upper) {
  CellDistribution d;
  d.kind = DistributionKind::power;
  d.exponent = exponent;
  d.upper = upper;
  return d;
}

void CellDistribution::validate() const {
  switch (kind) {
  case DistributionKind::discrete: {
    require(!values.empty(), "discrete distribution needs at least one value");
    require(values.size() == probabilities.size(), "values and probabilities differ in length");
    for (double v : values) require(v > 0.0 && std::isfinite(v), "cell values must be positive");
    for (double p : probabilities) require(p >= 0.0, "probabilities must be nonnegative");
    const double total = std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
    require(std::abs(total - 1.0) <= 1e-12, "probabilities must sum to 1");
    break;
  }
  case DistributionKind::uniform:
    require(lower >= 0.0 && upper > lower && std::isfinite(upper), "uniform needs 0 <= lower < upper");
    break;
  case DistributionKind::power:
    require(exponent > 0.0 && upper > 0.0, "power law needs exponent > 0 and upper > 0");
    break;
  }
}

double CellDistribution::quantile(double u) const {
  switch (kind) {
  case DistributionKind::discrete: {
    double cum = 0.0;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      cum += probabilities[k];
      if (u < cum) return values[k];
    }
    return values.back();
  }
  case DistributionKind::uniform:
    // 1 - u lies in (0, 1], so the value lies in (lower, upper]
    return lower + (upper - lower) * (1.0 - u);
  case DistributionKind::power:
    return upper * std::pow(1.0 - u, 1.0 / exponent);
  }
  return 0.0;
}

std::optional<double> CellDistribution::moment(double s) const {
  switch (kind) {
  case DistributionKind::discrete: {
    double m = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) m += probabilities[k] * std::pow(values[k], s);
    return m;
  }
  case DistributionKind::uniform: {
    const double width = upper - lower;
    if (s == -1.0) {
      if (lower <= 0.0) return std::nullopt;
      return std::log(upper / lower) / width;
    }
    if (s + 1.0 <= 0.0 && lower <= 0.0) return std::nullopt;
    return (std::pow(upper, s + 1.0) - std::pow(lower, s + 1.0)) / ((s + 1.0) * width);
  }
  case DistributionKind::power:
    if (s + exponent <= 0.0) return std::nullopt;
    return exponent / (exponent + s) * std::pow(upper, s);
  }
  return std::nullopt;
}

double CellDistribution::min_value() const {
  switch (kind) {
  case DistributionKind::discrete: return *std::min_element(values.begin(), values.end());
  case DistributionKind::uniform: return lower;
  case DistributionKind::power: return 0.0;
  }
  return 0.0;
}

double CellDistribution::max_value() const {
  switch (kind) {
  case DistributionKind::discrete: return *std::max_element(values.begin(), values.end());
  case DistributionKind::uniform:
  case DistributionKind::power: return upper;
  }
  return 0.0;
}

void EnsembleSpec::validate() const {
  require(dim == 1 || dim == 2, "dimension must be 1 or 2");
  cells.validate();
  if (period) require(*period >= 1, "period L must be >= 1");
}

// ---------------------------------------------------------------------------
// Realization

Realization::Realization(std::shared_ptr<const EnsembleSpec> spec, std::uint64_t seed, Point offset)
    : spec_(std::move(spec)), seed_(seed), offset_(offset) {}

Cell Realization::cell_of(const Point& x) const {
  Cell c{0, 0};
  for (int i = 0; i < spec_->dim; ++i) {
    const double z = (x[i] + translation_[i]) - offset_[i];
    auto k = static_cast<std::int64_t>(std::floor(z));
    if (period_) {
      const std::int64_t L = *period_;
      k = ((k % L) + L) % L;
    }
    c[i] = k;
  }
  return c;
}

double Realization::cell_value(const Cell& z) const {
  const std::uint64_t bits = detail::counter_hash(seed_, z[0], z[1], kCellStream);
  return spec_->cells.quantile(detail::to_unit(bits));
}

Realization sample_realization(std::shared_ptr<const EnsembleSpec> spec, std::uint64_t index) {
  require(spec != nullptr, "null ensemble spec");
  spec->validate();
  const std::uint64_t seed = detail::derive_seed(spec->seed, index);
  Point y{0.0, 0.0};
  if (spec->random_shift) {
    for (int i = 0; i < spec->dim; ++i)
      y[i] = detail::to_unit(detail::counter_hash(seed, i, 0, kOffsetStream));
  }
  Realization r(spec, seed, y);
  if (spec->period) return periodize(r, *spec->period);
  return r;
}

Realization shift(const Realization& r, const Vec& v) {
  Realization out = r;
  for (int i = 0; i < r.dim(); ++i) out.translation_[i] = r.translation_[i] + v[i];
  return out;
}

Realization periodize(const Realization& r, int period) {
  require(period >= 1, "period L must be >= 1");
  require(!r.period_, "realization is already periodized");
  Realization out = r;
  out.period_ = period;
  return out;
}

// ---------------------------------------------------------------------------
// Observables and Birkhoff averages

ObservableSpec ObservableSpec::identity() {
  ObservableSpec o;
  o.id = "one";
  o.g = [](std::span<const double>) { return 1.0; };
  return o;
}

ObservableSpec ObservableSpec::value_at(std::array<int, 2> z) {
  ObservableSpec o;
  o.id = "value@(" + std::to_string(z[0]) + "," + std::to_string(z[1]) + ")";
  o.probes = {z};
  o.g = [](std::span<const double> v) { return v[0]; };
  return o;
}

double ObservableSpec::evaluate(const Realization& r, const Point& z) const {
  std::array<double, 8> small{};
  std::vector<double> large;
  std::span<double> vals;
  if (probes.size() <= small.size()) {
    vals = std::span<double>(small.data(), probes.size());
  } else {
    large.resize(probes.size());
    vals = large;
  }
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const Point x{z[0] + probes[k][0], z[1] + probes[k][1]};
    vals[k] = r.eval(x);
  }
  return g(vals);
}

double Box::volume(int dim) const {
  double v = 1.0;
  for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
  return v;
}

double birkhoff_average(const Realization& r, const ObservableSpec& obs, const Box& q, double eps) {
  require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  const int d = r.dim();
  // In micro coordinates z = x / eps, cells are [c - t + y, c + 1 - t + y).
  std::array<std::int64_t, 2> first{0, 0}, last{0, 0};
  std::array<double, 2> base{0.0, 0.0};
  for (int i = 0; i < d; ++i) {
    base[i] = r.offset()[i] - r.translation()[i];
    first[i] = static_cast<std::int64_t>(std::floor(q.lo[i] / eps - base[i]));
    last[i] = static_cast<std::int64_t>(std::floor(q.hi[i] / eps - base[i]));
  }

  auto clip = [&](int i, std::int64_t c, double& lo, double& hi) {
    lo = std::max(q.lo[i], eps * (static_cast<double>(c) + base[i]));
    hi = std::min(q.hi[i], eps * (static_cast<double>(c) + 1.0 + base[i]));
    return hi > lo;
  };

  double total = 0.0;
  if (d == 1) {
    for (std::int64_t c = first[0]; c <= last[0]; ++c) {
      double lo, hi;
      if (!clip(0, c, lo, hi)) continue;
      const Point mid{0.5 * (lo + hi) / eps, 0.0};
      total += (hi - lo) * obs.evaluate(r, mid);
    }
    return total;
  }
  for (std::int64_t c1 = first[1]; c1 <= last[1]; ++c1) {
    double lo1, hi1;
    if (!clip(1, c1, lo1, hi1)) continue;
    double row = 0.0;
    for (std::int64_t c0 = first[0]; c0 <= last[0]; ++c0) {
      double lo0, hi0;
      if (!clip(0, c0, lo0, hi0)) continue;
      const Point mid{0.5 * (lo0 + hi0) / eps, 0.5 * (lo1 + hi1) / eps};
      row += (hi0 - lo0) * obs.evaluate(r, mid);
    }
    total += (hi1 - lo1) * row;
  }
  return total;
}

} // namespace homoglab
