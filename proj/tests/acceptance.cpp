// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: homoglab_acceptance [criterion numbers...]

#include "homoglab/config.hpp"
#include "homoglab/experiments.hpp"
#include "homoglab/parallel.hpp"
#include "homoglab/solver.hpp"
#include "homoglab/two_scale.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace homoglab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::shared_ptr<const EnsembleSpec> two_phase(int dim, std::uint64_t seed) {
  auto s = std::make_shared<EnsembleSpec>();
  s->dim = dim;
  s->cells = CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5});
  s->seed = seed;
  return s;
}

MediumEnsemble medium_ensemble(int dim, std::uint64_t seed) { return MediumEnsemble{two_phase(dim, seed), nullptr}; }

ExperimentConfig two_phase_config(int dim) {
  ExperimentConfig c;
  c.dim = dim;
  c.cells = CellDistribution::discrete({1.0, 4.0}, {0.5, 0.5});
  c.validate();
  return c;
}

// 1. unfolding isometry
Outcome unfolding() {
  auto spec = two_phase(2, 101);
  FieldRecipe u = [](const Realization& r, const Point& x, double eps) {
    return r.eval({x[0] / eps, x[1] / eps});
  };
  Outcome o{true, ""};
  for (double eps : {1.0, 0.25, 0.0625}) {
    const IsometryReport rep = unfold_isometry_check(spec, u, eps, 2.0, 1000);
    const bool ok = rep.defect <= 2.0 * rep.stderr;
    o.pass = o.pass && ok;
    o.detail += "eps=" + num(eps) + " defect=" + num(rep.defect, 3) + " 2se=" + num(2 * rep.stderr, 3) + "; ";
  }
  return o;
}

// 2. metric axioms
Outcome metric_axioms() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  auto random_vector = [&] {
    PairingVector v;
    v.values.resize(32);
    for (auto& x : v.values) x = U(rng);
    return v;
  };
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const PairingVector a = random_vector(), b = random_vector(), c = random_vector();
    if (metric_distance(a, b) != metric_distance(b, a)) ++violations;
    if (metric_distance(a, a) != 0.0 || metric_distance(a, b) == 0.0) ++violations;
    if (metric_distance(a, c) > metric_distance(a, b) + metric_distance(b, c)) ++violations;
  }
  PairingVector z, e;
  z.values.assign(32, 0.0);
  e = z;
  e.values[0] = 1.0;
  const double hand = metric_distance(z, e);
  return {violations == 0 && hand == 0.25,
          "violations=" + std::to_string(violations) + " d(unit gap in entry 1)=" + num(hand)};
}

// 3. 1D harmonic-mean oracle
Outcome one_dimensional() {
  const IntegrandSpec v;
  const auto rows = effective_integrand(medium_ensemble(1, 303), 64, v, {{1.0, 0.0}}, 0.0, 64, 8);
  const double cell = rows.front().mean;
  const bool cell_ok = std::abs(cell - 0.8) <= 0.03 * 0.8;

  ExperimentConfig cfg = two_phase_config(1);
  cfg.seed = 303;
  cfg.eps = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  cfg.realizations = 8;
  const SweepResult s = run_sweep(cfg);
  bool mono = true;
  std::string gaps;
  for (std::size_t k = 0; k < s.median_gap.size(); ++k) {
    if (k && s.median_gap[k] >= s.median_gap[k - 1]) mono = false;
    gaps += (k ? " " : "") + num(s.median_gap[k], 3);
  }
  return {cell_ok && mono, "cell mean (64 samples)=" + num(cell, 5) + " +- " + num(rows.front().stderr, 2) +
                               "; median gaps " + gaps + " (" + s.reference_source + " reference)"};
}

// 4 and 5 share the L = 16 cell problems.
std::vector<EffectiveRow> cached_l16;

const EffectiveRow& l16() {
  if (cached_l16.empty())
    cached_l16 = effective_integrand(medium_ensemble(2, 404), 16, IntegrandSpec{}, {{1.0, 0.0}}, 0.0, 8, 8);
  return cached_l16.front();
}

Outcome duality() {
  const EffectiveRow& r = l16();
  return {std::abs(r.mean - 1.0) <= 0.05 + 2.0 * r.stderr,
          "V(e1) at L=16 = " + num(r.mean, 5) + " +- " + num(r.stderr, 2) + " (target 1)"};
}

Outcome bracketing() {
  Outcome o{true, ""};
  for (int L : {4, 8, 16}) {
    const double coeff =
        2.0 * (L == 16 ? l16().mean
                       : effective_integrand(medium_ensemble(2, 404), L, IntegrandSpec{}, {{1.0, 0.0}}, 0.0, 8, 8)
                             .front()
                             .mean);
    o.pass = o.pass && coeff >= 1.6 && coeff <= 2.5;
    o.detail += "L=" + std::to_string(L) + ": " + num(coeff, 5) + "; ";
  }
  return o;
}

// 6. regularization monotonicity and diagram
Outcome diagram() {
  ExperimentConfig c;
  c.dim = 2;
  c.cells = CellDistribution::constant(1.0);
  c.weight = CellDistribution::discrete({0.05, 1.0}, {0.5, 0.5});
  c.integrand.form = IntegrandForm::degenerate_weighted;
  c.seed = 11;
  c.eps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  c.delta = {0.2, 0.05, 0.0125};
  c.L = {8};
  c.realizations = 8;
  c.mesh_per_eps = 8;
  c.moment_samples = 20000;
  c.validate();
  const DiagramResult r = run_diagram(c);
  return {r.vhom_monotone && r.disagreement <= 0.05 && r.converged,
          std::string("V_hom,delta monotone=") + (r.vhom_monotone ? "yes" : "no") + " paths " + num(r.path_a, 6) +
              " vs " + num(r.path_b, 6) + " disagreement=" + num(100 * r.disagreement, 3) + "% of |min E_hom|"};
}

// 7. Young-measure dichotomy
Outcome young() {
  ExperimentConfig c = two_phase_config(2);
  c.seed = 707;
  c.eps = {1.0 / 16, 1.0 / 32, 1.0 / 64};
  c.realizations = 16;
  c.pairing_mode = PairingMode::gradient;
  c.mesh_per_eps = 4;
  const PairingStudy ergodic = run_pairing_study(c, c.ensemble(), false);
  double diam = 0.0;
  for (const auto& cl : ergodic.young.clusters) diam = std::max(diam, cl.diameter);

  c.period = 1;
  const PairingStudy periodic = run_pairing_study(c, c.ensemble(), false);
  bool weights_ok = periodic.young.k() == 2;
  std::string w;
  for (const auto& cl : periodic.young.clusters) {
    weights_ok = weights_ok && cl.weight > 0.2 && cl.weight < 0.8;
    w += num(cl.weight, 3) + " ";
  }
  return {ergodic.young.k() == 1 && diam <= 0.05 && weights_ok && ergodic.converged && periodic.converged,
          "ergodic k=" + std::to_string(ergodic.young.k()) + " diameter=" + num(diam, 3) +
              "; periodized k=" + std::to_string(periodic.young.k()) + " weights " + w +
              "separation=" + num(periodic.young.min_separation, 3)};
}

// 8. quenched vs mean
Outcome quenched_vs_mean() {
  ExperimentConfig c = two_phase_config(2);
  c.seed = 808;
  c.eps = {1.0 / 8, 1.0 / 16, 1.0 / 32};
  c.realizations = 8;
  const PairingStudy s = run_pairing_study(c, c.ensemble(), true);
  bool exact = true, bound = true;
  for (std::size_t k = 0; k < s.eps.size(); ++k) {
    const std::size_t J = s.mean[k].values.size();
    for (std::size_t j = 0; j < J; ++j) {
      double sum = 0.0;
      for (const auto& traj : s.quenched) sum += traj[k].values[j];
      if (sum / static_cast<double>(s.quenched.size()) != s.mean[k].values[j]) exact = false;
    }
    const double mx = *std::max_element(s.quenched_distance[k].begin(), s.quenched_distance[k].end());
    if (s.mean_distance[k] > mx) bound = false;
  }
  // mean_pairing from fields reproduces the same vector
  const Dictionary& dict = s.dictionary;
  const MediumEnsemble ens = c.ensemble();
  std::vector<FieldSample> samples;
  const double eps = c.eps.front();
  auto mesh = build_mesh(2, static_cast<int>(std::lround(c.mesh_per_eps / eps)));
  for (int i = 0; i < c.realizations; ++i) {
    const Medium m = ens.sample(static_cast<std::uint64_t>(i));
    const MinimizeResult r = minimize(assemble_energy({{m, 1.0}}, eps, mesh, c.integrand, Load{1.0, {}}), c.solver);
    samples.push_back({m.coefficient, r.fields.front()});
  }
  const PairingVector mp = mean_pairing(samples, eps, dict, s.mode);
  const bool same = mp.values == s.mean.front().values;
  std::string d;
  for (std::size_t k = 0; k < s.eps.size(); ++k) d += num(s.mean_distance[k], 3) + " ";
  return {exact && same && bound && s.converged, std::string("bit-exact=") + (exact && same ? "yes" : "no") +
                                                      " mean distances " + d + "bound holds=" + (bound ? "yes" : "no")};
}

// 9. solver correctness
Outcome solver() {
  const MediumEnsemble ens = medium_ensemble(2, 909);
  const Medium m = ens.sample(0);
  auto mesh = build_mesh(2, 32);
  const EnergyFunctional E = assemble_energy({{m, 1.0}}, 1.0 / 8, mesh, IntegrandSpec{}, Load{1.0, {}});
  SolverOptions lin;
  lin.method = Method::linear_cg;
  SolverOptions nl;
  nl.method = Method::nonlinear_cg;
  nl.record_trace = true;
  const MinimizeResult a = minimize(E, lin), b = minimize(E, nl);
  const double diff = std::abs(a.energy - b.energy);
  bool monotone = true;
  for (std::size_t k = 1; k < b.energy_trace.size(); ++k)
    if (b.energy_trace[k] > b.energy_trace[k - 1]) monotone = false;

  // p = 3 trace as well
  IntegrandSpec v3;
  v3.p = 3.0;
  SolverOptions nl3 = nl;
  nl3.tol = 1e-6;
  const MinimizeResult c = minimize(assemble_energy({{m, 1.0}}, 1.0 / 8, mesh, v3, Load{1.0, {}}), nl3);
  for (std::size_t k = 1; k < c.energy_trace.size(); ++k)
    if (c.energy_trace[k] > c.energy_trace[k - 1]) monotone = false;

  // d = 1 constant medium: exact minimum -1/24
  const MediumEnsemble one{std::make_shared<EnsembleSpec>(EnsembleSpec{1, CellDistribution::constant(1.0), true, {}, 0}),
                           nullptr};
  std::vector<double> err;
  for (int n : {8, 16, 32, 64}) {
    const MinimizeResult r =
        minimize(assemble_energy({{one.sample(0), 1.0}}, 1.0, build_mesh(1, n), IntegrandSpec{}, Load{1.0, {}}), lin);
    err.push_back(std::abs(r.energy + 1.0 / 24.0));
  }
  const RateFit rate = fit_rate({1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64}, err);
  const bool order2 = std::abs(rate.slope - 2.0) <= 0.1;
  return {diff <= 1e-8 && monotone && order2 && a.converged && b.converged && c.converged,
          "|E_lin - E_nlcg|=" + num(diff, 2) + " monotone=" + (monotone ? "yes" : "no") + " h-order=" +
              num(rate.slope, 4)};
}

// 10. reproducibility across worker counts
Outcome reproducibility() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "homoglab_acceptance_repro";
  fs::remove_all(root);
  ExperimentConfig sweep = two_phase_config(2);
  sweep.eps = {1.0 / 8, 1.0 / 16};
  sweep.realizations = 4;
  ExperimentConfig pair = sweep;
  pair.eps = {1.0 / 4, 1.0 / 8, 1.0 / 16};
  ExperimentConfig cell = sweep;
  cell.L = {4, 8};
  cell.cell_samples = 4;
  const std::vector<std::pair<std::string, ExperimentConfig>> runs{
      {"sweep", sweep}, {"quenched-vs-mean", pair}, {"cell", cell}};
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const int before = par::max_threads();
  bool same = true;
  for (const auto& [cmd, cfg] : runs) {
    std::string first;
    for (int t : {1, 2, 8}) {
      par::set_threads(t);
      const fs::path dir = root / (cmd + "_" + std::to_string(t));
      run_command(cmd, cfg, dir.string());
      const std::string text = slurp(dir / "report.csv");
      if (t == 1)
        first = text;
      else if (text != first || text.empty())
        same = false;
    }
  }
  par::set_threads(before);
  fs::remove_all(root);
  return {same, "sweep, quenched-vs-mean and cell reports at 1, 2, 8 threads identical=" + std::string(same ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"unfolding isometry", unfolding},
      {"metric axioms", metric_axioms},
      {"1D homogenization oracle", one_dimensional},
      {"2D duality oracle", duality},
      {"Voigt-Reuss bracketing", bracketing},
      {"regularization monotonicity and diagram", diagram},
      {"Young-measure dichotomy", young},
      {"quenched vs mean consistency", quenched_vs_mean},
      {"solver correctness", solver},
      {"reproducibility", reproducibility},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
