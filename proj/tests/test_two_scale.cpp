#include "homoglab/errors.hpp"
#include "homoglab/solver.hpp"
#include "homoglab/two_scale.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace homoglab;

namespace {

std::shared_ptr<const EnsembleSpec> two_phase(int dim, std::uint64_t seed = 21) {
  auto s = std::make_shared<EnsembleSpec>();
  s->dim = dim;
  s->cells = CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5});
  s->seed = seed;
  return s;
}

DiscreteField filled(std::shared_ptr<const Mesh> mesh, const std::function<double(const Point&)>& f) {
  DiscreteField u = DiscreteField::zeros(mesh, Constraint::dirichlet_zero);
  for (std::size_t i = 0; i < mesh->num_nodes(); ++i) u.values[i] = f(mesh->nodes[i]);
  return u;
}

PairingVector with_values(std::vector<double> v) {
  PairingVector p;
  p.values = std::move(v);
  return p;
}

} // namespace

TEST_CASE("dictionary layout") {
  DictionaryConfig cfg;
  cfg.probe_radius = 0;
  cfg.cosine_degree = 0;
  const Dictionary one = build_dictionary(cfg, 2.0, *two_phase(2));
  REQUIRE(one.size() == 1);
  CHECK(one.entries[0].norm == 1.0);

  const Dictionary full = build_dictionary(DictionaryConfig{}, 2.0, *two_phase(2));
  CHECK(full.size() == 32);
  CHECK(full.observables.front().probes.empty());
  CHECK(full.modes.front().k == std::array<int, 2>{0, 0});
  CHECK(full.entries[0].omega_index == 0);
  CHECK(full.entries[0].q_index == 0);
  // anti-diagonal order
  for (std::size_t j = 1; j < full.size(); ++j) {
    const auto& a = full.entries[j - 1];
    const auto& b = full.entries[j];
    CHECK(a.omega_index + a.q_index <= b.omega_index + b.q_index);
  }
  CHECK(build_dictionary(DictionaryConfig{}, 2.0, *two_phase(2)).fingerprint() == full.fingerprint());
  CHECK(build_dictionary(DictionaryConfig{}, 3.0, *two_phase(2)).fingerprint() != full.fingerprint());
}

TEST_CASE("cosine normalizations") {
  CHECK(CosineMode{{1, 0}}.lq_norm(2.0, 2) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(CosineMode{{1, 2}}.lq_norm(2.0, 2) == doctest::Approx(0.5));
  CHECK(CosineMode{{0, 0}}.lq_norm(1.5, 2) == 1.0);
  // quadrature check for q = 1.5
  const CosineMode m{{1, 0}};
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += std::pow(std::abs(std::cos(std::numbers::pi * (i + 0.5) / n)), 1.5);
  CHECK(m.lq_norm(1.5, 1) == doctest::Approx(std::pow(s / n, 1.0 / 1.5)).epsilon(1e-8));
}

TEST_CASE("value-at observable normalization is ||omega(0)||_q") {
  const Dictionary d = build_dictionary(DictionaryConfig{}, 2.0, *two_phase(2));
  CHECK(d.observable_norms[1] == doctest::Approx(std::sqrt(8.5)));
  CHECK(d.observable_means[1] == doctest::Approx(2.5));
}

TEST_CASE("quenched pairings") {
  auto spec = two_phase(2);
  const Realization r = sample_realization(spec, 0);
  const Dictionary dict = build_dictionary(DictionaryConfig{}, 2.0, *spec);
  auto mesh = build_mesh(2, 128);
  SUBCASE("zero field") {
    const PairingVector p = quenched_pairing(DiscreteField::zeros(mesh, Constraint::dirichlet_zero), r, 0.1, dict,
                                             PairingMode::gradient);
    for (double v : p.values) CHECK(v == 0.0);
  }
  SUBCASE("identity observable gives plain L^1 pairings") {
    const DiscreteField u = filled(mesh, [](const Point& x) { return x[0] * x[0] + x[1]; });
    const PairingVector p = quenched_pairing(u, r, 1.0 / 16, dict);
    double plain = 0.0;
    for (std::size_t e = 0; e < mesh->num_elements(); ++e) plain += mesh->measure[e] * u.element_mean(e);
    CHECK(p.values[0] == doctest::Approx(plain).epsilon(1e-13));
    CHECK(p.values[0] == doctest::Approx(1.0 / 3.0 + 0.5).epsilon(1e-4));
    // identity * cos(pi x1) entry
    for (std::size_t j = 0; j < dict.size(); ++j)
      if (dict.entries[j].omega_index == 0 && dict.modes[dict.entries[j].q_index].k == std::array<int, 2>{1, 0}) {
        double ref = 0.0;
        for (std::size_t e = 0; e < mesh->num_elements(); ++e)
          ref += mesh->measure[e] * u.element_mean(e) * std::cos(std::numbers::pi * mesh->barycenter[e][0]);
        CHECK(p.values[j] == doctest::Approx(ref / dict.entries[j].norm).epsilon(1e-12));
      }
  }
  SUBCASE("value-at-origin observable against u = 1 is a Birkhoff average") {
    const DiscreteField u = filled(mesh, [](const Point&) { return 1.0; });
    const PairingVector p = quenched_pairing(u, r, 1.0 / 64, dict);
    std::size_t j0 = 0;
    for (std::size_t j = 0; j < dict.size(); ++j)
      if (dict.observables[dict.entries[j].omega_index].id == ObservableSpec::value_at({0, 0}).id &&
          dict.entries[j].q_index == 0)
        j0 = j;
    REQUIRE(j0 > 0);
    CHECK(std::abs(p.values[j0] * dict.entries[j0].norm - 2.5) <= 0.15);
  }
}

TEST_CASE("mean pairings") {
  auto spec = two_phase(2);
  const Dictionary dict = build_dictionary(DictionaryConfig{}, 2.0, *spec);
  auto mesh = build_mesh(2, 32);
  const DiscreteField one = filled(mesh, [](const Point&) { return 1.0; });
  SUBCASE("single realization equals the quenched pairing") {
    const Realization r = sample_realization(spec, 3);
    CHECK(mean_pairing({{r, one}}, 0.25, dict).values == quenched_pairing(one, r, 0.25, dict).values);
  }
  SUBCASE("zero fields") {
    const PairingVector p =
        mean_pairing({{sample_realization(spec, 0), DiscreteField::zeros(mesh, Constraint::dirichlet_zero)}}, 0.5, dict);
    for (double v : p.values) CHECK(v == 0.0);
  }
  SUBCASE("Monte Carlo mean of the value-at-origin entry") {
    std::size_t j0 = 0;
    for (std::size_t j = 0; j < dict.size(); ++j)
      if (dict.entries[j].omega_index == 1 && dict.entries[j].q_index == 0) j0 = j;
    double last_se = 1e9;
    for (int N : {16, 64, 256}) {
      std::vector<FieldSample> samples;
      for (int i = 0; i < N; ++i) samples.push_back({sample_realization(spec, static_cast<std::uint64_t>(i)), one});
      const PairingVector p = mean_pairing(samples, 1.0 / 4, dict);
      const double v = p.values[j0] * dict.entries[j0].norm, se = p.stderr[j0] * dict.entries[j0].norm;
      CHECK(std::abs(v - 2.5) <= 4.0 * se);
      CHECK(se < last_se);
      last_se = se;
    }
  }
  SUBCASE("mean is the ordered average of quenched pairings") {
    std::vector<FieldSample> samples;
    std::vector<PairingVector> q;
    for (int i = 0; i < 5; ++i) {
      const Realization r = sample_realization(spec, static_cast<std::uint64_t>(i));
      const DiscreteField u = filled(mesh, [i](const Point& x) { return std::sin(3.0 * x[0] + i) * x[1]; });
      samples.push_back({r, u});
      q.push_back(quenched_pairing(u, r, 0.125, dict, PairingMode::gradient));
    }
    const PairingVector m = mean_pairing(samples, 0.125, dict, PairingMode::gradient);
    for (std::size_t j = 0; j < m.values.size(); ++j) {
      double s = 0.0;
      for (const auto& v : q) s += v.values[j];
      CHECK(m.values[j] == s / 5.0);
    }
  }
}

TEST_CASE("limit pairings") {
  auto spec = two_phase(2);
  const Dictionary dict = build_dictionary(DictionaryConfig{}, 2.0, *spec);
  auto mesh = build_mesh(2, 32);
  const DiscreteField u = filled(mesh, [](const Point& x) { return x[0] * (1 - x[0]) * x[1] * (1 - x[1]); });
  SUBCASE("function mode identity entry is the integral of u") {
    const PairingVector p = limit_pairing(u, dict, PairingMode::function);
    double ref = 0.0;
    for (std::size_t e = 0; e < mesh->num_elements(); ++e) ref += mesh->measure[e] * u.element_mean(e);
    CHECK(p.values[0] == doctest::Approx(ref).epsilon(1e-13));
    CHECK_THROWS_AS(limit_pairing(u, dict, PairingMode::gradient), ValidationError);
  }
  SUBCASE("constant medium has zero corrector") {
    auto c = std::make_shared<EnsembleSpec>(*two_phase(2));
    c->cells = CellDistribution::constant(2.0);
    const Dictionary dc = build_dictionary(DictionaryConfig{}, 2.0, *c);
    const CorrectorSampler s = sample_linear_correctors(MediumEnsemble{c, nullptr}, IntegrandSpec{}, dc, 2, 4, 2);
    for (const auto& m : s.correlation)
      for (const auto& row : m)
        for (double x : row) CHECK(std::abs(x) <= 1e-9);
    const PairingVector p = limit_pairing(u, dc, PairingMode::gradient, &s);
    // gradient of u paired with 1_Q vanishes (u has zero boundary values)
    CHECK(std::abs(p.values[1]) <= 1e-12);
  }
  SUBCASE("identity-observable gradient entries ignore the mean-zero corrector") {
    const CorrectorSampler s = sample_linear_correctors(MediumEnsemble{spec, nullptr}, IntegrandSpec{}, dict, 4, 4, 4);
    const PairingVector p = limit_pairing(u, dict, PairingMode::gradient, &s);
    for (std::size_t j = 0; j < dict.size(); ++j) {
      if (dict.entries[j].omega_index != 0) continue;
      const auto& mode = dict.modes[dict.entries[j].q_index];
      for (int i = 0; i < 2; ++i) {
        double ref = 0.0;
        for (std::size_t e = 0; e < mesh->num_elements(); ++e)
          ref += mesh->measure[e] * u.element_gradient(e)[static_cast<std::size_t>(i)] * mode(mesh->barycenter[e], 2);
        const double se = p.stderr[j * 3 + 1 + static_cast<std::size_t>(i)];
        CHECK(std::abs(p.values[j * 3 + 1 + static_cast<std::size_t>(i)] - ref / dict.entries[j].norm) <=
              2.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("metric") {
  const PairingVector a = with_values({0.0, 0.0, 0.0}), b = with_values({1.0, 0.0, 0.0});
  CHECK(metric_distance(a, a) == 0.0);
  CHECK(metric_distance(a, b) == 0.25);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(32), y(32), z(32);
    for (std::size_t j = 0; j < 32; ++j) {
      x[j] = U(rng);
      y[j] = U(rng);
      z[j] = U(rng);
    }
    const PairingVector X = with_values(x), Y = with_values(y), Z = with_values(z);
    CHECK(metric_distance(X, Y) == metric_distance(Y, X));
    CHECK(metric_distance(X, Z) <= metric_distance(X, Y) + metric_distance(Y, Z));
    CHECK(metric_distance(X, Y) > 0.0);
    CHECK(metric_distance(X, Y) < 1.0);
  }
  PairingVector other = b;
  other.fingerprint = "elsewhere";
  CHECK_THROWS_AS(metric_distance(a, other), ValidationError);
}

TEST_CASE("unfolding isometry") {
  auto spec = two_phase(2, 31);
  const FieldRecipe smooth = [](const Realization&, const Point& x, double) { return std::sin(std::numbers::pi * x[0]); };
  const IsometryReport flat = unfold_isometry_check(spec, smooth, 0.25, 2.0, 8, 16);
  CHECK(flat.defect == 0.0);
  const FieldRecipe osc = [](const Realization& r, const Point& x, double eps) {
    return r.eval({x[0] / eps, x[1] / eps});
  };
  const IsometryReport a = unfold_isometry_check(spec, osc, 1.0, 2.0, 1000, 32);
  const IsometryReport b = unfold_isometry_check(spec, osc, 1.0 / 16, 2.0, 1000, 32);
  CHECK(a.defect <= 2.0 * a.stderr);
  CHECK(b.defect <= 2.0 * b.stderr);
  const double sa = a.stderr * a.norm_unfolded, sb = b.stderr * b.norm_unfolded;
  CHECK(std::abs(a.norm_unfolded - b.norm_unfolded) <= 3.0 * std::hypot(sa, sb));
}

TEST_CASE("Young measure clustering") {
  auto traj = [](double shift) {
    std::vector<PairingVector> t;
    for (double eps : {0.25, 0.125, 0.0625}) {
      PairingVector p = with_values({shift + eps * 0.01, 0.5});
      p.eps = eps;
      t.push_back(p);
    }
    return t;
  };
  SUBCASE("identical trajectories") {
    const YoungMeasureReport r = empirical_young_measure({traj(0.0), traj(0.0), traj(0.0)}, 0.01);
    CHECK(r.k() == 1);
    CHECK(r.clusters[0].weight == 1.0);
    CHECK(r.clusters[0].diameter == 0.0);
    CHECK(r.min_separation == 0.0);
  }
  SUBCASE("two separated groups") {
    const YoungMeasureReport r = empirical_young_measure({traj(0.0), traj(1.0), traj(0.0), traj(1.0), traj(0.0)}, 0.1);
    REQUIRE(r.k() == 2);
    CHECK(r.clusters[0].weight == doctest::Approx(0.6));
    CHECK(r.clusters[1].weight == doctest::Approx(0.4));
    CHECK(r.clusters[0].members == std::vector<std::size_t>{0, 2, 4});
    CHECK(r.min_separation == doctest::Approx(0.25));
    CHECK(r.cauchy_defects.size() == 5);
  }
  SUBCASE("short trajectories are rejected") {
    std::vector<PairingVector> t = traj(0.0);
    t.pop_back();
    CHECK_THROWS_AS(empirical_young_measure({t}, 0.1), ValidationError);
  }
}

TEST_CASE("strong convergence implies pairing convergence") {
  auto spec = two_phase(2, 41);
  const Realization r = sample_realization(spec, 0);
  const Dictionary dict = build_dictionary(DictionaryConfig{}, 2.0, *spec);
  auto mesh = build_mesh(2, 256);
  auto base = [](const Point& x) { return std::sin(std::numbers::pi * x[0]) * x[1]; };
  const PairingVector limit = limit_pairing(filled(mesh, base), dict, PairingMode::function);
  double last = 1.0;
  for (double eps : {0.25, 0.125, 1.0 / 16, 1.0 / 32}) {
    const DiscreteField ue = filled(mesh, [&](const Point& x) { return base(x) + eps * std::cos(7.0 * x[1]); });
    const double d = metric_distance(quenched_pairing(ue, r, eps, dict), limit);
    CHECK(d < last);
    last = d;
  }
}
