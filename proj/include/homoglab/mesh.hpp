#pragma once

// Uniform P1 meshes of a box [0, extent)^d: intervals for d = 1, squares
// split along the (0,0)-(1,1) diagonal for d = 2. A mesh is either a box
// with Dirichlet boundary nodes flagged, or a torus whose nodes on opposite
// faces are identified.

#include "homoglab/random_medium.hpp"

#include <array>
#include <memory>
#include <span>
#include <vector>

namespace homoglab {

struct Mesh {
  int dim = 1;
  int n = 2;              ///< subdivisions per axis
  double extent = 1.0;    ///< side length of the box
  bool periodic = false;

  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> elements;  ///< d + 1 local nodes used
  std::vector<double> measure;
  std::vector<Point> barycenter;
  std::vector<std::array<Vec, 3>> shape_grad; ///< gradient of each local basis function
  std::vector<char> boundary;                  ///< Dirichlet nodes (never set on a torus)

  // node -> incident (element, local index), in increasing element order
  std::vector<int> adj_offset;
  std::vector<int> adj_element;
  std::vector<int> adj_local;

  int nodes_per_element() const { return dim + 1; }
  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return elements.size(); }
  double h() const { return extent / n; }
  double volume() const;

  /// Element containing x (x clamped into the box, or wrapped on a torus)
  /// and its barycentric weights.
  std::pair<std::size_t, std::array<double, 3>> locate(const Point& x) const;
};

/// Mesh of Q = (0,1)^d with n subdivisions per axis.
std::shared_ptr<const Mesh> build_mesh(int dim, int n);
/// Periodic mesh of the torus [0, extent)^d with n subdivisions per axis.
std::shared_ptr<const Mesh> build_torus(int dim, int n, double extent);

enum class Constraint { dirichlet_zero, periodic_mean_zero };

/// Nodal P1 function. Dirichlet fields keep zero on boundary nodes, periodic
/// fields live on a torus mesh and have zero nodal mean.
struct DiscreteField {
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> values;
  Constraint constraint = Constraint::dirichlet_zero;

  static DiscreteField zeros(std::shared_ptr<const Mesh> mesh, Constraint c);

  double evaluate(const Point& x) const;
  Vec element_gradient(std::size_t e) const;
  double element_mean(std::size_t e) const;
  /// Discrete L^p norm with one-point quadrature per element.
  double lp_norm(double p) const;
  /// Projects onto the constraint set (zero boundary, or mean zero).
  void apply_constraint();
};

/// (sum_e |e| |u - v|^p)^(1/p) evaluated at the barycenters of `fine`'s
/// elements, where the two fields may live on different box meshes.
double lp_distance(const DiscreteField& u, const DiscreteField& v, double p);

} // namespace homoglab
