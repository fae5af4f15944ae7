#include "homoglab/mesh.hpp"

#include "homoglab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace homoglab {

namespace {

void build_adjacency(Mesh& m) {
  const std::size_t nn = m.num_nodes();
  const int npe = m.nodes_per_element();
  std::vector<int> count(nn + 1, 0);
  for (const auto& el : m.elements)
    for (int k = 0; k < npe; ++k) ++count[static_cast<std::size_t>(el[k]) + 1];
  std::partial_sum(count.begin(), count.end(), count.begin());
  m.adj_offset = count;
  m.adj_element.assign(static_cast<std::size_t>(count.back()), 0);
  m.adj_local.assign(static_cast<std::size_t>(count.back()), 0);
  std::vector<int> fill(m.adj_offset.begin(), m.adj_offset.end() - 1);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (int k = 0; k < npe; ++k) {
      const auto node = static_cast<std::size_t>(m.elements[e][k]);
      const auto slot = static_cast<std::size_t>(fill[node]++);
      m.adj_element[slot] = static_cast<int>(e);
      m.adj_local[slot] = k;
    }
  }
}

// Geometry of one element from unwrapped vertex coordinates.
void add_element(Mesh& m, std::array<int, 3> ids, const std::array<Point, 3>& xs) {
  m.elements.push_back(ids);
  if (m.dim == 1) {
    const double len = xs[1][0] - xs[0][0];
    m.measure.push_back(len);
    m.barycenter.push_back({0.5 * (xs[0][0] + xs[1][0]), 0.0});
    m.shape_grad.push_back({Vec{-1.0 / len, 0.0}, Vec{1.0 / len, 0.0}, Vec{0.0, 0.0}});
    return;
  }
  const double x1 = xs[1][0] - xs[0][0], y1 = xs[1][1] - xs[0][1];
  const double x2 = xs[2][0] - xs[0][0], y2 = xs[2][1] - xs[0][1];
  const double det = x1 * y2 - x2 * y1;
  m.measure.push_back(0.5 * std::abs(det));
  m.barycenter.push_back({(xs[0][0] + xs[1][0] + xs[2][0]) / 3.0, (xs[0][1] + xs[1][1] + xs[2][1]) / 3.0});
  // inverse transpose of the Jacobian applied to reference gradients
  const Vec g1{y2 / det, -x2 / det};
  const Vec g2{-y1 / det, x1 / det};
  m.shape_grad.push_back({Vec{-g1[0] - g2[0], -g1[1] - g2[1]}, g1, g2});
}

std::shared_ptr<const Mesh> build(int dim, int n, double extent, bool periodic) {
  require(dim == 1 || dim == 2, "mesh dimension must be 1 or 2");
  require(n >= 2, "mesh needs n >= 2 subdivisions");
  require(extent > 0.0, "mesh extent must be positive");
  auto m = std::make_shared<Mesh>();
  m->dim = dim;
  m->n = n;
  m->extent = extent;
  m->periodic = periodic;
  const double h = extent / n;
  const int per_axis = periodic ? n : n + 1;

  auto node_id = [&](int i, int j) {
    if (periodic) {
      i %= n;
      j %= n;
    }
    return dim == 1 ? i : j * per_axis + i;
  };

  if (dim == 1) {
    for (int i = 0; i < per_axis; ++i) {
      m->nodes.push_back({i * h, 0.0});
      m->boundary.push_back(!periodic && (i == 0 || i == n));
    }
    for (int i = 0; i < n; ++i)
      add_element(*m, {node_id(i, 0), node_id(i + 1, 0), 0}, {Point{i * h, 0.0}, Point{(i + 1) * h, 0.0}, Point{}});
  } else {
    for (int j = 0; j < per_axis; ++j)
      for (int i = 0; i < per_axis; ++i) {
        m->nodes.push_back({i * h, j * h});
        m->boundary.push_back(!periodic && (i == 0 || j == 0 || i == n || j == n));
      }
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Point p00{i * h, j * h}, p10{(i + 1) * h, j * h};
        const Point p01{i * h, (j + 1) * h}, p11{(i + 1) * h, (j + 1) * h};
        add_element(*m, {node_id(i, j), node_id(i + 1, j), node_id(i + 1, j + 1)}, {p00, p10, p11});
        add_element(*m, {node_id(i, j), node_id(i + 1, j + 1), node_id(i, j + 1)}, {p00, p11, p01});
      }
    }
  }
  build_adjacency(*m);
  return m;
}

} // namespace

double Mesh::volume() const { return std::pow(extent, dim); }

std::pair<std::size_t, std::array<double, 3>> Mesh::locate(const Point& x) const {
  const double hh = h();
  std::array<int, 2> cell{0, 0};
  std::array<double, 2> local{0.0, 0.0};
  for (int a = 0; a < dim; ++a) {
    double z = x[a];
    if (periodic) {
      z = std::fmod(z, extent);
      if (z < 0) z += extent;
    } else {
      z = std::clamp(z, 0.0, extent);
    }
    int c = static_cast<int>(std::floor(z / hh));
    c = std::clamp(c, 0, n - 1);
    cell[a] = c;
    local[a] = std::clamp(z / hh - c, 0.0, 1.0);
  }
  if (dim == 1) {
    return {static_cast<std::size_t>(cell[0]), {1.0 - local[0], local[0], 0.0}};
  }
  const std::size_t sq = static_cast<std::size_t>(cell[1]) * static_cast<std::size_t>(n) + static_cast<std::size_t>(cell[0]);
  const double xi = local[0], eta = local[1];
  if (xi >= eta) return {2 * sq, {1.0 - xi, xi - eta, eta}};        // (p00, p10, p11)
  return {2 * sq + 1, {1.0 - eta, xi, eta - xi}};                    // (p00, p11, p01)
}

std::shared_ptr<const Mesh> build_mesh(int dim, int n) { return build(dim, n, 1.0, false); }

std::shared_ptr<const Mesh> build_torus(int dim, int n, double extent) { return build(dim, n, extent, true); }

// ---------------------------------------------------------------------------

DiscreteField DiscreteField::zeros(std::shared_ptr<const Mesh> mesh, Constraint c) {
  require(mesh != nullptr, "null mesh");
  require((c == Constraint::periodic_mean_zero) == mesh->periodic,
          "periodic constraint requires a torus mesh and vice versa");
  DiscreteField f;
  f.values.assign(mesh->num_nodes(), 0.0);
  f.mesh = std::move(mesh);
  f.constraint = c;
  return f;
}

double DiscreteField::evaluate(const Point& x) const {
  const auto [e, w] = mesh->locate(x);
  const auto& el = mesh->elements[e];
  double v = 0.0;
  for (int k = 0; k < mesh->nodes_per_element(); ++k) v += w[k] * values[static_cast<std::size_t>(el[k])];
  return v;
}

Vec DiscreteField::element_gradient(std::size_t e) const {
  const auto& el = mesh->elements[e];
  const auto& g = mesh->shape_grad[e];
  Vec G{0.0, 0.0};
  for (int k = 0; k < mesh->nodes_per_element(); ++k) {
    const double u = values[static_cast<std::size_t>(el[k])];
    G[0] += u * g[k][0];
    G[1] += u * g[k][1];
  }
  return G;
}

double DiscreteField::element_mean(std::size_t e) const {
  const auto& el = mesh->elements[e];
  double s = 0.0;
  for (int k = 0; k < mesh->nodes_per_element(); ++k) s += values[static_cast<std::size_t>(el[k])];
  return s / mesh->nodes_per_element();
}

double DiscreteField::lp_norm(double p) const {
  double acc = 0.0;
  for (std::size_t e = 0; e < mesh->num_elements(); ++e)
    acc += mesh->measure[e] * std::pow(std::abs(element_mean(e)), p);
  return std::pow(acc, 1.0 / p);
}

void DiscreteField::apply_constraint() {
  if (constraint == Constraint::dirichlet_zero) {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (mesh->boundary[i]) values[i] = 0.0;
    return;
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  for (double& v : values) v -= mean;
}

double lp_distance(const DiscreteField& u, const DiscreteField& v, double p) {
  const DiscreteField& fine = u.mesh->num_elements() >= v.mesh->num_elements() ? u : v;
  const DiscreteField& coarse = &fine == &u ? v : u;
  double acc = 0.0;
  for (std::size_t e = 0; e < fine.mesh->num_elements(); ++e) {
    const Point& x = fine.mesh->barycenter[e];
    acc += fine.mesh->measure[e] * std::pow(std::abs(fine.element_mean(e) - coarse.evaluate(x)), p);
  }
  return std::pow(acc, 1.0 / p);
}

} // namespace homoglab
