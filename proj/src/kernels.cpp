#include "homoglab/kernels.hpp"

#include "homoglab/parallel.hpp"

#include <cmath>

namespace homoglab::kernels {

namespace {

inline double vnorm(const Vec& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1]); }

// |v|^p and p |v|^(p-2) v
inline double power_term(const Vec& v, double p, Vec* deriv) {
  const double n = vnorm(v);
  if (n == 0.0) {
    if (deriv) *deriv = {0.0, 0.0};
    return 0.0;
  }
  if (p == 2.0) {
    if (deriv) *deriv = {2.0 * v[0], 2.0 * v[1]};
    return n * n;
  }
  const double np2 = std::pow(n, p - 2.0);
  if (deriv) *deriv = {p * np2 * v[0], p * np2 * v[1]};
  return np2 * n * n;
}

inline double base_density(const ElementProblem& P, const Vec& F, Vec* deriv) {
  if (P.homogenized) {
    if (deriv) *deriv = P.homogenized->gradient(F);
    return P.homogenized->value(F);
  }
  // |F|^p / p has derivative |F|^(p-2) F
  const double v = power_term(F, P.p, deriv);
  if (deriv) {
    (*deriv)[0] /= P.p;
    (*deriv)[1] /= P.p;
  }
  return v / P.p;
}

inline Vec element_grad(const Mesh& m, std::size_t e, const double* u) {
  const auto& el = m.elements[e];
  const auto& g = m.shape_grad[e];
  Vec G{0.0, 0.0};
  for (int k = 0; k < m.dim + 1; ++k) {
    const double uk = u[el[static_cast<std::size_t>(k)]];
    G[0] += uk * g[static_cast<std::size_t>(k)][0];
    G[1] += uk * g[static_cast<std::size_t>(k)][1];
  }
  return G;
}

// Energy density contributions of element e for all blocks. G holds the
// block gradients at this element (stride 2); flux receives dE/dG_ie
// (already multiplied by |e|, scale and weights) when non-null.
inline double element_terms(const ElementProblem& P, std::size_t e, const Vec* G, Vec* flux) {
  const Mesh& m = *P.mesh;
  const std::size_t ne = m.num_elements();
  const double vol = m.measure[e] * P.scale;
  double energy = 0.0;
  Vec mean{0.0, 0.0};
  for (std::size_t i = 0; i < P.blocks; ++i) {
    const double w = P.weights[i];
    const double c = P.coefficients[i * ne + e];
    const Vec full{P.offset[0] + G[i][0], P.offset[1] + G[i][1]};
    Vec dW, dP{0.0, 0.0};
    double local = c * base_density(P, full, flux ? &dW : nullptr);
    if (P.corrector_penalty != 0.0) local += P.corrector_penalty * power_term(G[i], P.p, flux ? &dP : nullptr);
    energy += w * vol * local;
    if (flux) {
      flux[i] = {w * vol * (c * dW[0] + P.corrector_penalty * dP[0]),
                 w * vol * (c * dW[1] + P.corrector_penalty * dP[1])};
    }
    mean[0] += w * G[i][0];
    mean[1] += w * G[i][1];
  }
  if (P.variance_penalty != 0.0) {
    Vec S{0.0, 0.0};
    constexpr std::size_t kMaxStack = 64;
    Vec s_stack[kMaxStack];
    std::vector<Vec> s_heap;
    Vec* s = s_stack;
    if (P.blocks > kMaxStack) {
      s_heap.resize(P.blocks);
      s = s_heap.data();
    }
    for (std::size_t i = 0; i < P.blocks; ++i) {
      const double w = P.weights[i];
      const Vec D{G[i][0] - mean[0], G[i][1] - mean[1]};
      energy += P.variance_penalty * vol * w * power_term(D, P.p, flux ? &s[i] : nullptr);
      if (flux) {
        S[0] += w * s[i][0];
        S[1] += w * s[i][1];
      }
    }
    if (flux) {
      for (std::size_t i = 0; i < P.blocks; ++i) {
        const double k = P.variance_penalty * vol * P.weights[i];
        flux[i][0] += k * (s[i][0] - S[0]);
        flux[i][1] += k * (s[i][1] - S[1]);
      }
    }
  }
  return energy;
}

} // namespace

double energy_gradient(const ElementProblem& P, std::span<const double> u, std::span<double> grad, Workspace& ws) {
  const Mesh& m = *P.mesh;
  const std::size_t ne = m.num_elements();
  const std::size_t nn = m.num_nodes();
  const std::size_t N = P.blocks;
  const bool want_grad = !grad.empty();

  ws.element_energy.resize(ne);
  if (want_grad) ws.flux.resize(N * ne);
  Vec* Fbuf = ws.flux.data();
  const bool par = !par::in_parallel();

  const auto nel = static_cast<long long>(ne);
#pragma omp parallel if (par)
  {
    std::vector<Vec> Gl(N), Fl(N);
#pragma omp for schedule(static)
    for (long long ee = 0; ee < nel; ++ee) {
      const auto e = static_cast<std::size_t>(ee);
      for (std::size_t i = 0; i < N; ++i) Gl[i] = element_grad(m, e, u.data() + i * nn);
      ws.element_energy[e] = element_terms(P, e, Gl.data(), want_grad ? Fl.data() : nullptr);
      if (want_grad)
        for (std::size_t i = 0; i < N; ++i) Fbuf[i * ne + e] = Fl[i];
    }
  }

  double energy = par::reduce_sum(ne, [&](std::size_t e) { return ws.element_energy[e]; });
  if (!P.load.empty()) {
    energy -= par::reduce_sum(N * nn, [&](std::size_t k) { return P.weights[k / nn] * P.load[k % nn] * u[k]; });
  }

  if (want_grad) {
    const auto total = static_cast<long long>(N * nn);
#pragma omp parallel for schedule(static) if (par)
    for (long long kk = 0; kk < total; ++kk) {
      const auto k = static_cast<std::size_t>(kk);
      const std::size_t i = k / nn, node = k % nn;
      double g = 0.0;
      for (int a = m.adj_offset[node]; a < m.adj_offset[node + 1]; ++a) {
        const auto e = static_cast<std::size_t>(m.adj_element[static_cast<std::size_t>(a)]);
        const auto& sg = m.shape_grad[e][static_cast<std::size_t>(m.adj_local[static_cast<std::size_t>(a)])];
        const Vec& f = Fbuf[i * ne + e];
        g += f[0] * sg[0] + f[1] * sg[1];
      }
      if (!P.load.empty()) g -= P.weights[i] * P.load[node];
      grad[k] = g;
    }
  }
  return energy;
}

std::vector<double> quadratic_diagonal(const ElementProblem& P) {
  const Mesh& m = *P.mesh;
  const std::size_t ne = m.num_elements(), nn = m.num_nodes(), N = P.blocks;
  const double hom_scale = P.homogenized ? P.homogenized->stiffness_scale() : 1.0;
  std::vector<double> diag(N * nn, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double w = P.weights[i];
    for (std::size_t e = 0; e < ne; ++e) {
      const double k = w * P.scale * m.measure[e] *
                       (P.coefficients[i * ne + e] * hom_scale + 2.0 * P.corrector_penalty +
                        2.0 * P.variance_penalty);
      for (int a = 0; a < m.dim + 1; ++a) {
        const auto& g = m.shape_grad[e][static_cast<std::size_t>(a)];
        diag[i * nn + static_cast<std::size_t>(m.elements[e][static_cast<std::size_t>(a)])] +=
            k * (g[0] * g[0] + g[1] * g[1]);
      }
    }
  }
  return diag;
}

namespace serial {

double energy_gradient(const ElementProblem& P, std::span<const double> u, std::span<double> grad) {
  const Mesh& m = *P.mesh;
  const std::size_t ne = m.num_elements(), nn = m.num_nodes(), N = P.blocks;
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<Vec> G(N), F(N);
  double energy = 0.0;
  for (std::size_t e = 0; e < ne; ++e) {
    for (std::size_t i = 0; i < N; ++i) G[i] = element_grad(m, e, u.data() + i * nn);
    energy += element_terms(P, e, G.data(), want_grad ? F.data() : nullptr);
    if (!want_grad) continue;
    for (std::size_t i = 0; i < N; ++i) {
      for (int a = 0; a < m.dim + 1; ++a) {
        const auto& sg = m.shape_grad[e][static_cast<std::size_t>(a)];
        grad[i * nn + static_cast<std::size_t>(m.elements[e][static_cast<std::size_t>(a)])] +=
            F[i][0] * sg[0] + F[i][1] * sg[1];
      }
    }
  }
  if (!P.load.empty()) {
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t k = 0; k < nn; ++k) {
        energy -= P.weights[i] * P.load[k] * u[i * nn + k];
        if (want_grad) grad[i * nn + k] -= P.weights[i] * P.load[k];
      }
    }
  }
  return energy;
}

} // namespace serial

} // namespace homoglab::kernels
