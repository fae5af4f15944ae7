#include "homoglab/homogenized.hpp"

#include "homoglab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace homoglab {

HomogenizedIntegrand::HomogenizedIntegrand(int dim, double p, std::vector<double> directional_values)
    : dim_(dim), p_(p), samples_(std::move(directional_values)) {
  require(dim == 1 || dim == 2, "dimension must be 1 or 2");
  require(!samples_.empty(), "homogenized integrand needs samples");
  if (dim == 1) {
    a0_ = samples_[0];
    return;
  }
  const std::size_t M = samples_.size();
  require(M >= 3, "two-dimensional homogenized integrand needs >= 3 directions");
  const double dphi = 2.0 * std::numbers::pi / static_cast<double>(M);
  for (double s : samples_) a0_ += s;
  a0_ /= static_cast<double>(M);
  const std::size_t K = (M - 1) / 2;
  a_.assign(K, 0.0);
  b_.assign(K, 0.0);
  for (std::size_t m = 1; m <= K; ++m) {
    for (std::size_t k = 0; k < M; ++k) {
      const double phi = dphi * static_cast<double>(m * k);
      a_[m - 1] += samples_[k] * std::cos(phi);
      b_[m - 1] += samples_[k] * std::sin(phi);
    }
    a_[m - 1] *= 2.0 / static_cast<double>(M);
    b_[m - 1] *= 2.0 / static_cast<double>(M);
  }
  if (M % 2 == 0) {
    for (std::size_t k = 0; k < M; ++k) nyquist_ += (k % 2 == 0 ? 1.0 : -1.0) * samples_[k];
    nyquist_ /= static_cast<double>(M);
  }
}

std::vector<Vec> HomogenizedIntegrand::directions(int dim, int count) {
  if (dim == 1) return {Vec{1.0, 0.0}};
  std::vector<Vec> out;
  for (int k = 0; k < count; ++k) {
    const double t = std::numbers::pi * k / count;
    out.push_back({std::cos(t), std::sin(t)});
  }
  return out;
}

double HomogenizedIntegrand::angular(double theta) const {
  if (dim_ == 1) return a0_;
  const double phi = 2.0 * theta;
  double g = a0_;
  for (std::size_t m = 1; m <= a_.size(); ++m)
    g += a_[m - 1] * std::cos(static_cast<double>(m) * phi) + b_[m - 1] * std::sin(static_cast<double>(m) * phi);
  if (nyquist_ != 0.0) g += nyquist_ * std::cos(static_cast<double>(samples_.size() / 2) * phi);
  return g;
}

double HomogenizedIntegrand::angular_derivative(double theta) const {
  if (dim_ == 1) return 0.0;
  const double phi = 2.0 * theta;
  double dg = 0.0;
  for (std::size_t m = 1; m <= a_.size(); ++m) {
    const double mm = static_cast<double>(m);
    dg += 2.0 * mm * (-a_[m - 1] * std::sin(mm * phi) + b_[m - 1] * std::cos(mm * phi));
  }
  if (nyquist_ != 0.0) {
    const double mm = static_cast<double>(samples_.size() / 2);
    dg += -2.0 * mm * nyquist_ * std::sin(mm * phi);
  }
  return dg;
}

double HomogenizedIntegrand::value(const Vec& F) const {
  if (dim_ == 1) {
    const double r = std::abs(F[0]);
    return r == 0.0 ? 0.0 : a0_ * std::pow(r, p_);
  }
  const double r = std::hypot(F[0], F[1]);
  if (r == 0.0) return 0.0;
  return std::pow(r, p_) * angular(std::atan2(F[1], F[0]));
}

Vec HomogenizedIntegrand::gradient(const Vec& F) const {
  if (dim_ == 1) {
    const double r = std::abs(F[0]);
    if (r == 0.0) return {0.0, 0.0};
    return {p_ * a0_ * std::pow(r, p_ - 2.0) * F[0], 0.0};
  }
  const double r = std::hypot(F[0], F[1]);
  if (r == 0.0) return {0.0, 0.0};
  const double theta = std::atan2(F[1], F[0]);
  const double g = angular(theta), dg = angular_derivative(theta);
  const double s = std::pow(r, p_ - 2.0);
  return {s * (p_ * g * F[0] - dg * F[1]), s * (p_ * g * F[1] + dg * F[0])};
}

double HomogenizedIntegrand::stiffness_scale() const {
  return p_ * *std::max_element(samples_.begin(), samples_.end());
}

} // namespace homoglab
