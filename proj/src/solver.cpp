#include "homoglab/solver.hpp"

#include "homoglab/errors.hpp"
#include "homoglab/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace homoglab {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<long long>(y.size());
#pragma omp parallel for schedule(static) if (y.size() > par::kBlock && !par::in_parallel())
  for (long long i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] += a * x[static_cast<std::size_t>(i)];
}

double norm2(std::span<const double> v) { return std::sqrt(par::dot(v, v)); }

// Linear problems solved by CG: the same integrand without offset and load
// is a homogeneous quadratic whose gradient is exactly A v.
bool linear_applicable(const EnergyFunctional& e) {
  if (!e.quadratic()) return false;
  if (e.homogenized && e.homogenized->dim() == 2 && e.homogenized->samples().size() % 2 == 0) return false;
  return true;
}

std::vector<double> preconditioner(const EnergyFunctional& e) {
  std::vector<double> diag = kernels::quadratic_diagonal(e.problem());
  const std::size_t nn = e.mesh->num_nodes();
  for (std::size_t k = 0; k < diag.size(); ++k) {
    const bool fixed = e.constraint == Constraint::dirichlet_zero && e.mesh->boundary[k % nn];
    diag[k] = (fixed || diag[k] <= 0.0) ? 1.0 : 1.0 / diag[k];
  }
  return diag;
}

void apply_diag(std::span<const double> inv, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = inv[i] * x[i];
}

MinimizeResult package(const EnergyFunctional& e, std::vector<double> u) {
  MinimizeResult res;
  const std::size_t nn = e.mesh->num_nodes();
  res.mean_field = DiscreteField::zeros(e.mesh, e.constraint);
  for (std::size_t i = 0; i < e.blocks(); ++i) {
    DiscreteField f{e.mesh, std::vector<double>(u.begin() + static_cast<std::ptrdiff_t>(i * nn),
                                                u.begin() + static_cast<std::ptrdiff_t>((i + 1) * nn)),
                    e.constraint};
    for (std::size_t k = 0; k < nn; ++k) res.mean_field.values[k] += e.weights[i] * f.values[k];
    res.fields.push_back(std::move(f));
  }
  return res;
}

MinimizeResult linear_cg(const EnergyFunctional& e, const SolverOptions& opt) {
  const auto t0 = Clock::now();
  const std::size_t n = e.num_dofs();
  kernels::Workspace ws;
  kernels::ElementProblem P = e.problem();
  kernels::ElementProblem A = P;
  A.offset = {0.0, 0.0};
  A.load = {};
  const std::vector<double> inv = preconditioner(e);

  std::vector<double> u(n, 0.0), r(n), z(n), p(n), Ap(n);
  kernels::energy_gradient(P, u, r, ws);
  for (double& v : r) v = -v;
  e.constrain(r);
  const double bnorm = norm2(r);

  MinimizeResult out;
  int it = 0;
  double rnorm = bnorm;
  bool converged = bnorm == 0.0;
  if (!converged) {
    apply_diag(inv, r, z);
    e.constrain(z);
    p = z;
    double rz = par::dot(r, z);
    for (it = 1; it <= opt.max_iter; ++it) {
      kernels::energy_gradient(A, p, Ap, ws);
      e.constrain(Ap);
      const double pAp = par::dot(p, Ap);
      if (!(pAp > 0.0)) throw SolverError("linear CG met a non-positive curvature direction");
      const double alpha = rz / pAp;
      axpy(alpha, p, u);
      axpy(-alpha, Ap, r);
      rnorm = norm2(r);
      if (opt.record_trace) out.energy_trace.push_back(e.value(u));
      if (rnorm <= opt.tol * bnorm) {
        converged = true;
        break;
      }
      apply_diag(inv, r, z);
      e.constrain(z);
      const double rz_new = par::dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (!converged) it = opt.max_iter;
  }
  e.constrain(u);
  std::vector<double> g(n);
  const double energy = e.value_and_gradient(u, g, ws);
  if (!std::isfinite(energy)) throw SolverError("energy is not finite");
  MinimizeResult res = package(e, std::move(u));
  res.energy_trace = std::move(out.energy_trace);
  res.energy = energy;
  res.iterations = it;
  res.grad_norm = norm2(g);
  res.converged = converged;
  res.method = "linear-cg";
  res.wall_ms = elapsed_ms(t0);
  return res;
}

MinimizeResult nonlinear_cg(const EnergyFunctional& e, const SolverOptions& opt) {
  constexpr double kArmijo = 1e-4;
  constexpr double kBacktrack = 0.5;
  constexpr int kMaxBacktracks = 60;
  const auto t0 = Clock::now();
  const std::size_t n = e.num_dofs();
  kernels::Workspace ws;
  const std::vector<double> inv = preconditioner(e);

  std::vector<double> u(n, 0.0), g(n), z(n), d(n), trial(n), g_old(n), u_old(n);
  double E = e.value_and_gradient(u, g, ws);
  if (!std::isfinite(E)) throw SolverError("energy is not finite at the starting point");
  apply_diag(inv, g, z);
  e.constrain(z);
  for (std::size_t i = 0; i < n; ++i) d[i] = -z[i];
  double gz = par::dot(g, z);

  MinimizeResult out;
  if (opt.record_trace) out.energy_trace.push_back(E);
  bool converged = false;
  int it = 0;
  double gnorm = norm2(g);
  double alpha_prev = 1.0;
  bool have_prev = false;
  for (; it < opt.max_iter; ++it) {
    if (gnorm <= opt.tol * (1.0 + std::abs(E))) {
      converged = true;
      break;
    }
    double slope = par::dot(g, d);
    if (!(slope < 0.0)) {
      for (std::size_t i = 0; i < n; ++i) d[i] = -z[i];
      slope = -gz;
    }
    double alpha = 1.0;
    if (have_prev) {
      // Barzilai-Borwein step in the preconditioner metric
      double sMs = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = u[i] - u_old[i];
        sMs += s * s / inv[i];
        sy += s * (g[i] - g_old[i]);
      }
      alpha = sy > 0.0 ? sMs / sy : 2.0 * alpha_prev;
    }
    double E_trial = 0.0;
    bool accepted = false;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] + alpha * d[i];
      E_trial = e.value(trial);
      if (std::isnan(E_trial)) throw SolverError("energy evaluated to NaN during line search");
      if (E_trial <= E + kArmijo * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= kBacktrack;
    }
    if (!accepted) break;
    if (E_trial > E) throw SolverError("accepted step increased the energy");
    u_old.swap(u);
    u.swap(trial);
    g_old.swap(g);
    E = e.value_and_gradient(u, g, ws);
    if (!std::isfinite(E)) throw SolverError("energy is not finite");
    if (opt.record_trace) out.energy_trace.push_back(E);
    alpha_prev = alpha;
    have_prev = true;
    gnorm = norm2(g);

    // Polak-Ribiere+, preconditioned
    apply_diag(inv, g, z);
    e.constrain(z);
    const double gz_new = par::dot(g, z);
    double gz_cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) gz_cross += g_old[i] * z[i];
    const double beta = std::max(0.0, (gz_new - gz_cross) / gz);
    gz = gz_new;
    for (std::size_t i = 0; i < n; ++i) d[i] = -z[i] + beta * d[i];
  }
  if (!converged && gnorm <= opt.tol * (1.0 + std::abs(E))) converged = true;
  e.constrain(u);
  MinimizeResult res = package(e, std::move(u));
  res.energy_trace = std::move(out.energy_trace);
  res.energy = E;
  res.iterations = it;
  res.grad_norm = gnorm;
  res.converged = converged;
  res.method = "nonlinear-cg";
  res.wall_ms = elapsed_ms(t0);
  return res;
}

std::vector<double> nodal_load(const Mesh& m, const Load& f) {
  std::vector<double> b(m.num_nodes(), 0.0);
  const double share = 1.0 / (m.dim + 1);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const double w = m.measure[e] * f.at(m.barycenter[e]) * share;
    for (int a = 0; a < m.dim + 1; ++a) b[static_cast<std::size_t>(m.elements[e][static_cast<std::size_t>(a)])] += w;
  }
  for (std::size_t k = 0; k < b.size(); ++k)
    if (m.boundary[k]) b[k] = 0.0;
  return b;
}

} // namespace

kernels::ElementProblem EnergyFunctional::problem() const {
  kernels::ElementProblem P;
  P.mesh = mesh.get();
  P.p = p;
  P.blocks = blocks();
  P.weights = weights;
  P.coefficients = coefficients;
  P.homogenized = homogenized ? &*homogenized : nullptr;
  P.scale = scale;
  P.offset = offset;
  P.corrector_penalty = corrector_penalty;
  P.variance_penalty = variance_penalty;
  P.load = load;
  return P;
}

double EnergyFunctional::value(std::span<const double> u) const {
  kernels::Workspace ws;
  return kernels::energy_gradient(problem(), u, {}, ws);
}

double EnergyFunctional::value_and_gradient(std::span<const double> u, std::span<double> grad,
                                            kernels::Workspace& ws) const {
  const double E = kernels::energy_gradient(problem(), u, grad, ws);
  constrain(grad);
  return E;
}

void EnergyFunctional::constrain(std::span<double> v) const {
  const std::size_t nn = mesh->num_nodes();
  for (std::size_t i = 0; i < blocks(); ++i) {
    std::span<double> b = v.subspan(i * nn, nn);
    if (constraint == Constraint::dirichlet_zero) {
      for (std::size_t k = 0; k < nn; ++k)
        if (mesh->boundary[k]) b[k] = 0.0;
    } else {
      const double mean = par::reduce_sum(nn, [&](std::size_t k) { return b[k]; }) / static_cast<double>(nn);
      for (double& x : b) x -= mean;
    }
  }
}

double EnergyFunctional::variance_term(std::span<const double> u) const {
  if (variance_penalty == 0.0) return 0.0;
  kernels::ElementProblem P = problem();
  std::vector<double> zero(coefficients.size(), 0.0);
  P.coefficients = zero;
  P.corrector_penalty = 0.0;
  P.load = {};
  kernels::Workspace ws;
  return kernels::energy_gradient(P, u, {}, ws);
}

EnergyFunctional assemble_energy(const std::vector<WeightedMedium>& realizations, double eps,
                                 std::shared_ptr<const Mesh> mesh, const IntegrandSpec& v, const Load& f,
                                 double delta, bool coupled) {
  require(!realizations.empty(), "energy needs at least one realization");
  require(eps > 0.0, "eps must be positive");
  require(delta >= 0.0, "delta must be nonnegative");
  require(mesh != nullptr && !mesh->periodic, "energy needs a Dirichlet mesh of Q");
  require(!(coupled && delta > 0.0 && realizations.size() == 1),
          "variance coupling needs at least two realizations");
  v.validate();
  double wsum = 0.0;
  for (const auto& r : realizations) {
    require(r.weight > 0.0, "realization weights must be positive");
    require(r.medium.dim() == mesh->dim, "realization dimension differs from the mesh");
    wsum += r.weight;
  }
  require(std::abs(wsum - 1.0) <= 1e-12, "realization weights must sum to 1");

  EnergyFunctional E;
  E.mesh = mesh;
  E.constraint = Constraint::dirichlet_zero;
  E.p = v.exponent();
  E.eps = eps;
  E.coupled = coupled;
  E.variance_penalty = coupled ? delta : 0.0;
  const std::size_t ne = mesh->num_elements();
  E.coefficients.resize(realizations.size() * ne);
  for (std::size_t i = 0; i < realizations.size(); ++i) {
    E.weights.push_back(realizations[i].weight);
    E.seeds.push_back(realizations[i].medium.seed());
    const Medium& r = realizations[i].medium;
    const auto nel = static_cast<long long>(ne);
#pragma omp parallel for schedule(static) if (!par::in_parallel())
    for (long long ee = 0; ee < nel; ++ee) {
      const auto e = static_cast<std::size_t>(ee);
      const Point& x = mesh->barycenter[e];
      E.coefficients[i * ne + e] = local_coefficient(v, r, {x[0] / eps, x[1] / eps}, x);
    }
  }
  E.load = nodal_load(*mesh, f);
  if (mesh->h() > eps / 4.0) {
    std::ostringstream msg;
    msg << "mesh width h=" << mesh->h() << " exceeds eps/4=" << eps / 4.0;
    E.warnings.push_back(msg.str());
  }
  return E;
}

EnergyFunctional assemble_homogenized(std::shared_ptr<const Mesh> mesh, const HomogenizedIntegrand& hom,
                                      const IntegrandSpec& v, const Load& f) {
  require(mesh != nullptr && !mesh->periodic, "homogenized energy needs a Dirichlet mesh of Q");
  require(hom.dim() == mesh->dim, "homogenized integrand dimension differs from the mesh");
  EnergyFunctional E;
  E.mesh = mesh;
  E.p = hom.p();
  E.weights = {1.0};
  E.seeds = {0};
  E.homogenized = hom;
  E.coefficients.resize(mesh->num_elements());
  for (std::size_t e = 0; e < mesh->num_elements(); ++e)
    E.coefficients[e] = v.modulation(mesh->barycenter[e], mesh->dim);
  E.load = nodal_load(*mesh, f);
  return E;
}

MinimizeResult minimize(const EnergyFunctional& e, const SolverOptions& opt) {
  require(opt.tol > 0.0, "solver tolerance must be positive");
  require(opt.max_iter >= 1, "solver max_iter must be >= 1");
  Method m = opt.method;
  if (m == Method::automatic) m = linear_applicable(e) ? Method::linear_cg : Method::nonlinear_cg;
  if (m == Method::linear_cg) {
    require(linear_applicable(e), "linear CG needs a quadratic energy");
    return linear_cg(e, opt);
  }
  return nonlinear_cg(e, opt);
}

CellResult cell_problem(const Medium& r, int L, const IntegrandSpec& v, const Vec& F, double delta,
                        int n_per_cell, const SolverOptions& opt) {
  require(L >= 1, "cell size L must be >= 1");
  require(n_per_cell >= 4, "n_per_cell must be >= 4");
  require(delta >= 0.0, "delta must be nonnegative");
  require(std::isfinite(F[0]) && std::isfinite(F[1]), "F must be finite");
  v.validate();
  Medium med = r;
  if (auto per = r.period()) {
    require(L % *per == 0, "cell size must be a multiple of the medium period");
  } else {
    med = r.periodized(L);
  }
  const int d = r.dim();
  auto mesh = build_torus(d, L * n_per_cell, static_cast<double>(L));

  EnergyFunctional E;
  E.mesh = mesh;
  E.constraint = Constraint::periodic_mean_zero;
  E.p = v.exponent();
  E.scale = 1.0 / std::pow(static_cast<double>(L), d);
  E.offset = {F[0], d == 2 ? F[1] : 0.0};
  E.corrector_penalty = delta;
  E.weights = {1.0};
  E.seeds = {r.seed()};
  E.coefficients.resize(mesh->num_elements());
  for (std::size_t e = 0; e < mesh->num_elements(); ++e) E.coefficients[e] = med.micro_coefficient(mesh->barycenter[e]);

  CellResult out;
  if (E.offset[0] == 0.0 && E.offset[1] == 0.0) {
    out.corrector = DiscreteField::zeros(mesh, Constraint::periodic_mean_zero);
    out.converged = true;
    return out;
  }
  MinimizeResult m = minimize(E, opt);
  out.value = m.energy;
  out.corrector = std::move(m.fields.front());
  out.iterations = m.iterations;
  out.grad_norm = m.grad_norm;
  out.wall_ms = m.wall_ms;
  out.converged = m.converged;
  return out;
}

std::vector<EffectiveRow> effective_integrand(const MediumEnsemble& ensemble, int L, const IntegrandSpec& v,
                                              const std::vector<Vec>& F_grid, double delta, int n_samples,
                                              int n_per_cell, const SolverOptions& opt) {
  require(n_samples >= 1, "effective_integrand needs n_samples >= 1");
  require(!F_grid.empty(), "effective_integrand needs a nonempty F grid");
  ensemble.validate();
  const std::size_t nF = F_grid.size(), nS = static_cast<std::size_t>(n_samples);
  std::vector<CellResult> cells(nF * nS);
  std::vector<std::uint64_t> seeds(nS);
  par::for_each_index(nS, [&](std::size_t s) {
    const Medium r = ensemble.sample(s);
    seeds[s] = r.seed();
    for (std::size_t k = 0; k < nF; ++k) {
      CellResult c = cell_problem(r, L, v, F_grid[k], delta, n_per_cell, opt);
      c.corrector = {};
      cells[k * nS + s] = std::move(c);
    }
  });

  std::vector<EffectiveRow> rows;
  for (std::size_t k = 0; k < nF; ++k) {
    EffectiveRow row;
    row.F = F_grid[k];
    row.L = L;
    row.delta = delta;
    row.n_samples = n_samples;
    row.seeds = seeds;
    par::CompensatedSum sum;
    for (std::size_t s = 0; s < nS; ++s) {
      const CellResult& c = cells[k * nS + s];
      row.values.push_back(c.value);
      row.iterations.push_back(c.iterations);
      row.grad_norms.push_back(c.grad_norm);
      row.sample_ms.push_back(c.wall_ms);
      sum.add(c.value);
      row.max_iterations = std::max(row.max_iterations, c.iterations);
      row.max_grad_norm = std::max(row.max_grad_norm, c.grad_norm);
      row.wall_ms += c.wall_ms;
      row.converged = row.converged && c.converged;
    }
    row.mean = sum.value() / static_cast<double>(nS);
    if (nS > 1) {
      par::CompensatedSum ss;
      for (double x : row.values) ss.add((x - row.mean) * (x - row.mean));
      row.stderr = std::sqrt(ss.value() / static_cast<double>(nS - 1) / static_cast<double>(nS));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

HomogenizedIntegrand homogenize(const MediumEnsemble& ensemble, int L, const IntegrandSpec& v, double delta,
                                int n_samples, int n_per_cell, int directions, const SolverOptions& opt,
                                std::vector<EffectiveRow>* rows) {
  const int d = ensemble.dim();
  const auto dirs = HomogenizedIntegrand::directions(d, directions);
  auto table = effective_integrand(ensemble, L, v, dirs, delta, n_samples, n_per_cell, opt);
  std::vector<double> samples;
  for (const auto& row : table) samples.push_back(row.mean);
  if (rows) *rows = std::move(table);
  return HomogenizedIntegrand(d, v.exponent(), std::move(samples));
}

HomogenizedIntegrand homogenize_medium(const Medium& r, int L, const IntegrandSpec& v, double delta, int n_per_cell,
                                       int directions, const SolverOptions& opt) {
  const int d = r.dim();
  const auto dirs = HomogenizedIntegrand::directions(d, directions);
  std::vector<double> samples;
  for (const Vec& F : dirs) samples.push_back(cell_problem(r, L, v, F, delta, n_per_cell, opt).value);
  return HomogenizedIntegrand(d, v.exponent(), std::move(samples));
}

MinimizeResult minimize_coupled(const std::vector<Medium>& realizations, double eps,
                                std::shared_ptr<const Mesh> mesh, const IntegrandSpec& v, const Load& f,
                                double delta, const SolverOptions& opt) {
  require(realizations.size() >= 2, "coupled minimization needs N >= 2 realizations");
  require(delta >= 0.0, "delta must be nonnegative");
  const double w = 1.0 / static_cast<double>(realizations.size());
  std::vector<WeightedMedium> list;
  for (const auto& r : realizations) list.push_back({r, w});
  // the last weight absorbs rounding so the weights sum to 1
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < list.size(); ++i) rest -= list[i].weight;
  list.back().weight = rest;
  EnergyFunctional E = assemble_energy(list, eps, std::move(mesh), v, f, delta, true);
  return minimize(E, opt);
}

} // namespace homoglab
