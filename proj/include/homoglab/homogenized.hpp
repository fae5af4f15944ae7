#pragma once

#include "homoglab/random_medium.hpp"

#include <vector>

namespace homoglab {

/// A p-homogeneous even density W(F) = |F|^p g(theta) reconstructed from
/// samples g(theta_k) = W(cos theta_k, sin theta_k), theta_k = k pi / M.
/// g is pi-periodic and is interpolated by the trigonometric polynomial in
/// 2 theta through the samples, so quadratic forms (p = 2) are reproduced
/// exactly once M >= 3. In d = 1 a single sample W(1) suffices.
class HomogenizedIntegrand {
public:
  HomogenizedIntegrand() = default;
  HomogenizedIntegrand(int dim, double p, std::vector<double> directional_values);

  int dim() const { return dim_; }
  double p() const { return p_; }
  const std::vector<double>& samples() const { return samples_; }
  /// Unit directions at which the samples are taken.
  static std::vector<Vec> directions(int dim, int count);

  double angular(double theta) const;
  double angular_derivative(double theta) const;
  double value(const Vec& F) const;
  Vec gradient(const Vec& F) const;
  /// Curvature scale used by preconditioners (max over the samples times p).
  double stiffness_scale() const;

private:
  int dim_ = 1;
  double p_ = 2.0;
  std::vector<double> samples_;
  double a0_ = 0.0;
  std::vector<double> a_, b_;  // modes m = 1..K in the variable 2 theta
  double nyquist_ = 0.0;
};

} // namespace homoglab
