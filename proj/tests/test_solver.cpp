#include "homoglab/errors.hpp"
#include "homoglab/kernels.hpp"
#include "homoglab/parallel.hpp"
#include "homoglab/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace homoglab;

namespace {

MediumEnsemble two_phase(int dim, std::uint64_t seed = 5) {
  auto a = std::make_shared<EnsembleSpec>();
  a->dim = dim;
  a->cells = CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5});
  a->seed = seed;
  return MediumEnsemble{a, nullptr};
}

MediumEnsemble constant(int dim, double c) {
  auto a = std::make_shared<EnsembleSpec>();
  a->dim = dim;
  a->cells = CellDistribution::constant(c);
  return MediumEnsemble{a, nullptr};
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = U(rng);
  return v;
}

} // namespace

TEST_CASE("mesh counts and measure") {
  auto m1 = build_mesh(1, 4);
  CHECK(m1->num_nodes() == 5);
  CHECK(m1->num_elements() == 4);
  auto m2 = build_mesh(2, 2);
  CHECK(m2->num_nodes() == 9);
  CHECK(m2->num_elements() == 8);
  for (auto m : {m1, m2, build_mesh(2, 7), build_torus(2, 6, 3.0)}) {
    double total = 0.0;
    for (double a : m->measure) total += a;
    CHECK(total == doctest::Approx(m->volume()).epsilon(1e-14));
  }
  CHECK(build_torus(2, 4, 2.0)->num_nodes() == 16);
}

TEST_CASE("energy hand values") {
  const IntegrandSpec v;
  const Medium m = constant(1, 1.0).sample(0);
  auto mesh = build_mesh(1, 4);
  EnergyFunctional E = assemble_energy({{m, 1.0}}, 1.0, mesh, v, Load{0.0, {}});
  std::vector<double> u(mesh->num_nodes(), 0.0);
  CHECK(E.value(u) == 0.0);
  u[2] = 1.0;  // hat at the middle node
  CHECK(E.value(u) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("identical fields have zero variance term") {
  const Medium a = two_phase(2).sample(0), b = two_phase(2).sample(1);
  auto mesh = build_mesh(2, 8);
  EnergyFunctional E =
      assemble_energy({{a, 0.5}, {b, 0.5}}, 0.25, mesh, IntegrandSpec{}, Load{1.0, {}}, 3.0, true);
  auto one = random_vector(mesh->num_nodes(), 1);
  std::vector<double> u(one);
  u.insert(u.end(), one.begin(), one.end());
  E.constrain(u);
  CHECK(E.variance_term(u) == 0.0);
}

TEST_CASE("analytic gradient matches finite differences") {
  const MediumEnsemble e = two_phase(2);
  auto mesh = build_mesh(2, 6);
  for (double p : {2.0, 3.0, 1.5}) {
    IntegrandSpec v;
    v.p = p;
    EnergyFunctional E =
        assemble_energy({{e.sample(0), 0.5}, {e.sample(1), 0.5}}, 0.5, mesh, v, Load{1.0, {}}, 0.3, true);
    auto u = random_vector(E.num_dofs(), 2);
    E.constrain(u);
    std::vector<double> g(u.size());
    kernels::Workspace ws;
    E.value_and_gradient(u, g, ws);
    auto dir = random_vector(u.size(), 3);
    E.constrain(dir);
    double dg = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dg += g[i] * dir[i];
    const double h = 1e-6;
    std::vector<double> up(u), um(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      up[i] += h * dir[i];
      um[i] -= h * dir[i];
    }
    const double fd = (E.value(up) - E.value(um)) / (2 * h);
    CHECK(fd == doctest::Approx(dg).epsilon(1e-6));
  }
}

TEST_CASE("OpenMP and serial kernels agree") {
  const MediumEnsemble e = two_phase(2);
  auto mesh = build_mesh(2, 24);
  for (double p : {2.0, 3.0}) {
    IntegrandSpec v;
    v.p = p;
    EnergyFunctional E = assemble_energy({{e.sample(0), 0.25}, {e.sample(1), 0.25}, {e.sample(2), 0.5}}, 0.125, mesh,
                                         v, Load{1.0, {}}, 0.2, true);
    const kernels::ElementProblem prob = E.problem();
    const auto u = random_vector(E.num_dofs(), 4);
    std::vector<double> g1(u.size()), g2(u.size());
    kernels::Workspace ws;
    const double e1 = kernels::energy_gradient(prob, u, g1, ws);
    const double e2 = kernels::serial::energy_gradient(prob, u, g2);
    CHECK(e1 == doctest::Approx(e2).epsilon(1e-13));
    double worst = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) worst = std::max(worst, std::abs(g1[i] - g2[i]));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("kernel results do not depend on the thread count") {
  const MediumEnsemble e = two_phase(2);
  auto mesh = build_mesh(2, 32);
  EnergyFunctional E = assemble_energy({{e.sample(0), 1.0}}, 0.125, mesh, IntegrandSpec{IntegrandForm::weighted_p_dirichlet, 3.0, {}},
                                       Load{1.0, {}});
  const auto u = random_vector(E.num_dofs(), 5);
  const int before = par::max_threads();
  std::vector<std::vector<double>> grads;
  std::vector<double> energies;
  for (int t : {1, 2, 8}) {
    par::set_threads(t);
    std::vector<double> g(u.size());
    kernels::Workspace ws;
    energies.push_back(kernels::energy_gradient(E.problem(), u, g, ws));
    grads.push_back(g);
  }
  par::set_threads(before);
  CHECK(energies[0] == energies[1]);
  CHECK(energies[0] == energies[2]);
  CHECK(grads[0] == grads[1]);
  CHECK(grads[0] == grads[2]);
}

TEST_CASE("1D constant medium: closed-form minimum and h^2 convergence") {
  // -u'' = 1, u(0) = u(1) = 0: u = x(1-x)/2, min int u'^2/2 - u = -1/24
  const Medium m = constant(1, 1.0).sample(0);
  std::vector<double> err;
  for (int n : {8, 16, 32, 64}) {
    const MinimizeResult r = minimize(assemble_energy({{m, 1.0}}, 1.0, build_mesh(1, n), IntegrandSpec{}, Load{}));
    CHECK(r.converged);
    err.push_back(std::abs(r.energy + 1.0 / 24.0));
  }
  for (std::size_t k = 1; k < err.size(); ++k) CHECK(err[k - 1] / err[k] == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("zero load gives the zero minimizer") {
  const MediumEnsemble e = two_phase(2);
  for (double p : {2.0, 3.0}) {
    IntegrandSpec v;
    v.p = p;
    const MinimizeResult r = minimize(assemble_energy({{e.sample(0), 1.0}}, 0.25, build_mesh(2, 16), v, Load{0.0, {}}));
    CHECK(r.energy == 0.0);
    for (double x : r.fields.front().values) CHECK(x == 0.0);
  }
}

TEST_CASE("linear and nonlinear CG agree for p = 2") {
  const Medium m = two_phase(2, 77).sample(0);
  const EnergyFunctional E = assemble_energy({{m, 1.0}}, 0.125, build_mesh(2, 32), IntegrandSpec{}, Load{});
  SolverOptions lin, nl;
  lin.method = Method::linear_cg;
  nl.method = Method::nonlinear_cg;
  nl.record_trace = true;
  const MinimizeResult a = minimize(E, lin), b = minimize(E, nl);
  CHECK(a.method != b.method);
  CHECK(std::abs(a.energy - b.energy) <= 1e-8);
  for (std::size_t k = 1; k < b.energy_trace.size(); ++k) CHECK(b.energy_trace[k] <= b.energy_trace[k - 1]);
}

TEST_CASE("nonlinear CG energy never increases for p != 2") {
  const Medium m = two_phase(2, 78).sample(0);
  for (double p : {1.5, 3.0}) {
    IntegrandSpec v;
    v.p = p;
    SolverOptions opt;
    opt.tol = 1e-6;
    opt.record_trace = true;
    const MinimizeResult r = minimize(assemble_energy({{m, 1.0}}, 0.25, build_mesh(2, 16), v, Load{}), opt);
    CHECK(r.converged);
    CHECK(r.energy_trace.size() >= 2);
    for (std::size_t k = 1; k < r.energy_trace.size(); ++k) CHECK(r.energy_trace[k] <= r.energy_trace[k - 1]);
  }
}

TEST_CASE("cell problems") {
  SUBCASE("constant medium: value c/2 |F|^2 and zero corrector") {
    const Medium m = constant(2, 3.0).sample(0);
    const CellResult r = cell_problem(m, 4, IntegrandSpec{}, {0.6, 0.8}, 0.0, 4);
    CHECK(r.value == doctest::Approx(1.5).epsilon(1e-10));
    for (double x : r.corrector.values) CHECK(std::abs(x) <= 1e-10);
  }
  SUBCASE("F = 0 gives zero") {
    const CellResult r = cell_problem(two_phase(2).sample(0), 4, IntegrandSpec{}, {0.0, 0.0}, 0.1, 4);
    CHECK(r.value == 0.0);
  }
  SUBCASE("1D cell value is half the harmonic mean of the cells") {
    const Medium m = two_phase(1).sample(3);
    const int L = 16;
    const Medium p = m.periodized(L);
    double inv = 0.0;
    for (int z = 0; z < L; ++z) inv += 1.0 / p.coefficient.cell_value({z, 0});
    const CellResult r = cell_problem(m, L, IntegrandSpec{}, {1.0, 0.0}, 0.0, 4);
    CHECK(r.value == doctest::Approx(0.5 * L / inv).epsilon(1e-8));
  }
  SUBCASE("periodic medium needs L to be a multiple of the period") {
    const Medium m = two_phase(2).periodized(3).sample(0);
    CHECK_THROWS_AS(cell_problem(m, 4, IntegrandSpec{}, {1.0, 0.0}, 0.0, 4), ValidationError);
  }
}

TEST_CASE("effective integrand") {
  SUBCASE("constant medium has zero stderr") {
    const auto rows = effective_integrand(constant(2, 2.0), 4, IntegrandSpec{}, {{1.0, 0.0}, {0.0, 2.0}}, 0.0, 4, 4);
    CHECK(rows[0].mean == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rows[1].mean == doctest::Approx(4.0).epsilon(1e-10));
    CHECK(rows[0].stderr <= 1e-10);
  }
  SUBCASE("monotone in delta per seed") {
    std::vector<std::vector<double>> values;
    for (double d : {0.1, 0.01, 0.0})
      values.push_back(effective_integrand(two_phase(2), 4, IntegrandSpec{}, {{1.0, 0.0}}, d, 4, 4)[0].values);
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(values[0][s] >= values[1][s]);
      CHECK(values[1][s] >= values[2][s]);
    }
  }
  SUBCASE("Voigt-Reuss bracketing per realization and frame symmetry") {
    const auto rows = effective_integrand(two_phase(2), 4, IntegrandSpec{}, {{1.0, 0.0}, {0.0, 1.0}}, 0.0, 8, 4);
    CHECK(2 * rows[0].mean >= 1.6);
    CHECK(2 * rows[0].mean <= 2.5);
    CHECK(std::abs(rows[0].mean - rows[1].mean) <= 2.0 * std::hypot(rows[0].stderr, rows[1].stderr) + 0.02);
  }
  SUBCASE("convex along the F grid") {
    IntegrandSpec v;
    v.p = 3.0;
    const auto rows = effective_integrand(two_phase(2), 2, v, {{0.5, 0.0}, {1.0, 0.0}, {1.5, 0.0}}, 0.0, 4, 4);
    CHECK(rows[1].mean <= 0.5 * (rows[0].mean + rows[2].mean) + 2.0 * rows[1].stderr);
  }
}

TEST_CASE("homogenized table reproduces quadratic forms") {
  const HomogenizedIntegrand h(2, 2.0, {1.0, 1.5, 2.0});  // directions 0, pi/3, 2pi/3
  const auto dirs = HomogenizedIntegrand::directions(2, 3);
  for (std::size_t k = 0; k < dirs.size(); ++k) CHECK(h.value(dirs[k]) == doctest::Approx(h.samples()[k]));
  // p-homogeneity and gradient
  const Vec F{0.3, -0.7};
  CHECK(h.value({2 * F[0], 2 * F[1]}) == doctest::Approx(4 * h.value(F)));
  const Vec g = h.gradient(F);
  const double eps = 1e-6;
  CHECK(g[0] == doctest::Approx((h.value({F[0] + eps, F[1]}) - h.value({F[0] - eps, F[1]})) / (2 * eps)).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx((h.value({F[0], F[1] + eps}) - h.value({F[0], F[1] - eps})) / (2 * eps)).epsilon(1e-6));
}

TEST_CASE("coupled minimization") {
  const MediumEnsemble e = two_phase(2, 12);
  auto mesh = build_mesh(2, 16);
  const IntegrandSpec v;
  std::vector<Medium> media{e.sample(0), e.sample(1), e.sample(2)};
  SUBCASE("delta = 0 equals independent solves") {
    const MinimizeResult c = minimize_coupled(media, 0.25, mesh, v, Load{}, 0.0);
    double mean = 0.0;
    for (const auto& m : media) mean += minimize(assemble_energy({{m, 1.0}}, 0.25, mesh, v, Load{})).energy;
    mean /= 3.0;
    CHECK(c.energy == doctest::Approx(mean).epsilon(1e-7));
  }
  SUBCASE("identical realizations replicate the single minimizer") {
    const MinimizeResult c = minimize_coupled({media[0], media[0]}, 0.25, mesh, v, Load{}, 1.0);
    const MinimizeResult s = minimize(assemble_energy({{media[0], 1.0}}, 0.25, mesh, v, Load{}));
    CHECK(c.energy == doctest::Approx(s.energy).epsilon(1e-7));
  }
  SUBCASE("energy ordering and gradient collapse with growing delta") {
    const double decoupled = minimize_coupled(media, 0.25, mesh, v, Load{}, 0.0).energy;
    double last_spread = std::numeric_limits<double>::infinity();
    for (double d : {1.0, 10.0, 1000.0}) {
      const MinimizeResult c = minimize_coupled(media, 0.25, mesh, v, Load{}, d);
      CHECK(c.energy >= decoupled - 1e-9);
      double spread = 0.0;
      for (const auto& f : c.fields) {
        double s = 0.0;
        for (std::size_t el = 0; el < mesh->num_elements(); ++el) {
          const Vec g = f.element_gradient(el), m = c.mean_field.element_gradient(el);
          s += mesh->measure[el] * ((g[0] - m[0]) * (g[0] - m[0]) + (g[1] - m[1]) * (g[1] - m[1]));
        }
        spread = std::max(spread, std::sqrt(s));
      }
      CHECK(spread < last_spread);
      last_spread = spread;
    }
  }
  SUBCASE("p = 2 coupled: linear CG and nonlinear CG agree") {
    SolverOptions lin, nl;
    lin.method = Method::linear_cg;
    nl.method = Method::nonlinear_cg;
    const MinimizeResult a = minimize_coupled(media, 0.25, mesh, v, Load{}, 0.3, lin);
    const MinimizeResult b = minimize_coupled(media, 0.25, mesh, v, Load{}, 0.3, nl);
    CHECK(a.method == "linear-cg");
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(a.energy == doctest::Approx(b.energy).epsilon(1e-8));
  }
}

TEST_CASE("assembly validation") {
  const Medium m = two_phase(2).sample(0);
  auto mesh = build_mesh(2, 4);
  CHECK_THROWS_AS(assemble_energy({}, 0.25, mesh, IntegrandSpec{}, Load{}), ValidationError);
  CHECK_THROWS_AS(assemble_energy({{m, 1.0}}, 0.0, mesh, IntegrandSpec{}, Load{}), ValidationError);
  CHECK_THROWS_AS(assemble_energy({{m, 0.5}, {m, 0.4}}, 0.25, mesh, IntegrandSpec{}, Load{}), ValidationError);
  CHECK_THROWS_AS(assemble_energy({{m, 1.0}}, 0.25, mesh, IntegrandSpec{}, Load{}, -1.0), ValidationError);
}
