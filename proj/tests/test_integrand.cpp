#include "homoglab/errors.hpp"
#include "homoglab/integrand.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace homoglab;

namespace {

MediumEnsemble ensemble(CellDistribution cells, int dim = 2, std::optional<CellDistribution> weight = {}) {
  auto a = std::make_shared<EnsembleSpec>();
  a->dim = dim;
  a->cells = std::move(cells);
  a->seed = 3;
  MediumEnsemble e{a, nullptr};
  if (weight) {
    auto w = std::make_shared<EnsembleSpec>(*a);
    w->cells = *weight;
    w->seed = 4;
    e.weight = w;
  }
  return e;
}

IntegrandSpec form(IntegrandForm f, double p) {
  IntegrandSpec v;
  v.form = f;
  v.p = p;
  return v;
}

} // namespace

TEST_CASE("density hand values") {
  const IntegrandSpec v;
  CHECK(evaluate_density(v, 2.0, {1.0, 0.0}, 2) == 1.0);
  CHECK(evaluate_density(v, 2.0, {0.0, 0.0}, 2) == 0.0);
  const Vec g = density_gradient(v, 1.0, {3.0, 4.0}, 2);
  CHECK(g[0] == 3.0);
  CHECK(g[1] == 4.0);
  const Vec z = density_gradient(v, 1.0, {0.0, 0.0}, 2);
  CHECK(z == Vec{0.0, 0.0});
  const Vec g3 = density_gradient(form(IntegrandForm::weighted_p_dirichlet, 3.0), 2.0, {1.0, 0.0}, 2);
  CHECK(g3[0] == doctest::Approx(2.0));
  CHECK(g3[1] == 0.0);
  const Vec z15 = density_gradient(form(IntegrandForm::weighted_p_dirichlet, 1.5), 2.0, {0.0, 0.0}, 2);
  CHECK(z15 == Vec{0.0, 0.0});
}

TEST_CASE("F = 0 gives zero for every form") {
  const MediumEnsemble e = ensemble(CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5}), 2,
                                    CellDistribution::uniform(0.1, 1.0));
  const Medium m = e.sample(0);
  for (auto f : {IntegrandForm::weighted_p_dirichlet, IntegrandForm::two_phase_quadratic,
                 IntegrandForm::degenerate_weighted})
    CHECK(evaluate_density(form(f, 3.0), m, {0.3, 0.4}, {0.0, 0.0}) == 0.0);
}

TEST_CASE("gradient matches finite differences, convexity and p-homogeneity") {
  const MediumEnsemble e = ensemble(CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5}), 2,
                                    CellDistribution::uniform(0.1, 1.0));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-2.0, 2.0), X(0.0, 10.0);
  for (auto f : {IntegrandForm::weighted_p_dirichlet, IntegrandForm::two_phase_quadratic,
                 IntegrandForm::degenerate_weighted})
    for (double p : {1.5, 2.0, 3.0, 4.5}) {
      const IntegrandSpec v = form(f, p);
      const double q = v.exponent();
      int bad_fd = 0, bad_cvx = 0, bad_hom = 0;
      for (int k = 0; k < 1000; ++k) {
        const Medium m = e.sample(static_cast<std::uint64_t>(k % 16));
        const Point x{X(rng), X(rng)};
        Vec F{U(rng), U(rng)}, G{U(rng), U(rng)};
        if (std::hypot(F[0], F[1]) < 0.1) F[0] += 0.5;
        const Vec g = density_gradient(v, m, x, F);
        for (int i = 0; i < 2; ++i) {
          const double h = 1e-6 * std::max(1.0, std::abs(F[i]));
          Vec Fp = F, Fm = F;
          Fp[i] += h;
          Fm[i] -= h;
          const double fd = (evaluate_density(v, m, x, Fp) - evaluate_density(v, m, x, Fm)) / (2 * h);
          if (std::abs(fd - g[i]) > 1e-6 * std::max(1.0, std::abs(g[i]))) ++bad_fd;
        }
        const Vec mid{0.5 * (F[0] + G[0]), 0.5 * (F[1] + G[1])};
        const double lhs = evaluate_density(v, m, x, mid);
        const double rhs = 0.5 * evaluate_density(v, m, x, F) + 0.5 * evaluate_density(v, m, x, G);
        if (lhs > rhs * (1 + 1e-14)) ++bad_cvx;
        const double t = 0.1 + X(rng);
        const double vt = evaluate_density(v, m, x, {t * F[0], t * F[1]});
        if (std::abs(vt - std::pow(t, q) * evaluate_density(v, m, x, F)) > 1e-12 * vt) ++bad_hom;
      }
      CHECK(bad_fd == 0);
      CHECK(bad_cvx == 0);
      CHECK(bad_hom == 0);
    }
}

TEST_CASE("degenerate form is bounded below by lambda |F|^p / p") {
  const MediumEnsemble e = ensemble(CellDistribution::uniform(1.0, 3.0), 2, CellDistribution::uniform(0.0, 1.0));
  const IntegrandSpec v = form(IntegrandForm::degenerate_weighted, 3.0);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Medium m = e.sample(i);
    const Point x{0.37 * i, 0.11 * i};
    const Vec F{1.3, -0.4};
    const double lambda = m.weight->eval(x);
    CHECK(evaluate_density(v, m, x, F) >= lambda * std::pow(std::hypot(F[0], F[1]), 3.0) / 3.0);
  }
}

TEST_CASE("growth constants") {
  const GrowthReport unit = verify_growth(IntegrandSpec{}, ensemble(CellDistribution::constant(1.0)), 1000);
  CHECK(unit.c_low == doctest::Approx(1.0));
  CHECK(unit.c_high == doctest::Approx(1.0));
  CHECK(unit.satisfies_a3);

  const GrowthReport two = verify_growth(IntegrandSpec{}, ensemble(CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5})),
                                         1000);
  CHECK(two.c_high / 2.0 >= 4.0 / 2.0 - 1e-12);
  CHECK(two.c_low == doctest::Approx(1.0));

  const GrowthReport degenerate = verify_growth(form(IntegrandForm::degenerate_weighted, 2.0),
                                                ensemble(CellDistribution::constant(1.0), 2,
                                                         CellDistribution::uniform(0.0, 1.0)),
                                                1000);
  CHECK_FALSE(degenerate.satisfies_a3);
  CHECK(degenerate.c_low < 0.01);
}

TEST_CASE("moment estimates") {
  EnsembleSpec one;
  one.cells = CellDistribution::constant(1.0);
  const MomentEstimate c = moment_estimate(one, 2.0, 1000);
  CHECK(c.value == 1.0);
  CHECK_FALSE(c.divergence_suspected);

  EnsembleSpec u;
  u.cells = CellDistribution::uniform(std::exp(-1.0), 1.0);
  const MomentEstimate m = moment_estimate(u, 2.0, 100000);
  CHECK(std::abs(m.value - 1.0 / (1.0 - std::exp(-1.0))) <= 4.0 * m.stderr);
  CHECK_FALSE(m.divergence_suspected);

  EnsembleSpec d;
  d.cells = CellDistribution::uniform(0.0, 1.0);
  CHECK(moment_estimate(d, 2.0, 100000).divergence_suspected);
  CHECK_THROWS_AS(moment_estimate(d, 1.0, 10), ValidationError);
}

TEST_CASE("integrand form names round trip") {
  for (auto f : {IntegrandForm::weighted_p_dirichlet, IntegrandForm::two_phase_quadratic,
                 IntegrandForm::degenerate_weighted})
    CHECK(parse_integrand_form(to_string(f)) == f);
  CHECK_THROWS_AS(parse_integrand_form("quartic"), ValidationError);
}
