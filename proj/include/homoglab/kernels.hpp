#pragma once

// Element-level energy and gradient kernels for stacked P1 fields.
//
// The energy of N stacked fields u_1..u_N (weights w_i) is
//
//   sum_i w_i [ s sum_e |e| ( c_ie W(F + G_ie) + dc |G_ie|^p ) - b . u_i ]
//     + dv s sum_e |e| sum_i w_i |G_ie - m_e|^p,     m_e = sum_j w_j G_je
//
// with G_ie the element gradient of u_i, W the base density (|.|^p / p or a
// homogenized table), s a global scale, F an affine offset, dc the
// corrector penalty of regularized cell problems and dv the variance
// penalty of the coupled problem.
//
// The OpenMP kernel evaluates element terms into per-element buffers and
// gathers them node by node in a fixed order; the serial kernel scatters
// element contributions directly and is kept as the reference.

#include "homoglab/homogenized.hpp"
#include "homoglab/mesh.hpp"

#include <span>
#include <vector>

namespace homoglab::kernels {

struct ElementProblem {
  const Mesh* mesh = nullptr;
  double p = 2.0;
  std::size_t blocks = 1;
  std::span<const double> weights;       ///< per block
  std::span<const double> coefficients;  ///< blocks * num_elements
  const HomogenizedIntegrand* homogenized = nullptr;
  double scale = 1.0;
  Vec offset{0.0, 0.0};
  double corrector_penalty = 0.0;
  double variance_penalty = 0.0;
  std::span<const double> load;          ///< per node, may be empty
};

struct Workspace {
  std::vector<Vec> flux;
  std::vector<double> element_energy;
};

/// Energy at u; fills grad (same length as u) unless it is empty.
double energy_gradient(const ElementProblem& prob, std::span<const double> u, std::span<double> grad,
                       Workspace& ws);

/// Diagonal of the quadratic surrogate (p = 2 with the same coefficients).
std::vector<double> quadratic_diagonal(const ElementProblem& prob);

namespace serial {
double energy_gradient(const ElementProblem& prob, std::span<const double> u, std::span<double> grad);
} // namespace serial

} // namespace homoglab::kernels
