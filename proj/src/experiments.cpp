#include "homoglab/experiments.hpp"

#include "homoglab/errors.hpp"
#include "homoglab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace homoglab {

namespace {

std::shared_ptr<const Mesh> eps_mesh(const ExperimentConfig& cfg, double eps) {
  const int n = static_cast<int>(std::lround(cfg.mesh_per_eps / eps));
  return build_mesh(cfg.dim, n);
}

void check_resolution(const ExperimentConfig& cfg, const RunOptions& opt, std::vector<std::string>& warnings) {
  if (cfg.mesh_per_eps >= 4) return;
  std::ostringstream msg;
  msg << "mesh width eps/" << cfg.mesh_per_eps << " does not resolve eps (needs h <= eps/4)";
  if (!opt.force) throw ValidationError(msg.str() + "; rerun with --force to proceed");
  warnings.push_back(msg.str());
}

Load make_load(const ExperimentConfig& cfg) { return Load{cfg.load, {}}; }

double shown_ms(const RunOptions& opt, double ms) { return opt.timing ? ms : 0.0; }

MinimizeResult solve_realization(const ExperimentConfig& cfg, const Medium& m, double eps) {
  auto mesh = eps_mesh(cfg, eps);
  EnergyFunctional E = assemble_energy({{m, 1.0}}, eps, mesh, cfg.integrand, make_load(cfg));
  return minimize(E, cfg.solver);
}

MinimizeResult solve_homogenized(const ExperimentConfig& cfg, const HomogenizedIntegrand& hom,
                                 std::shared_ptr<const Mesh> mesh = nullptr) {
  if (!mesh) mesh = build_mesh(cfg.dim, cfg.reference_mesh());
  EnergyFunctional E = assemble_homogenized(mesh, hom, cfg.integrand, make_load(cfg));
  return minimize(E, cfg.solver);
}

std::string fmt(double v) { return format_number(v); }

std::string vec_id(const Vec& F, int dim) {
  return dim == 1 ? fmt(F[0]) : fmt(F[0]) + " " + fmt(F[1]);
}

// Linear extrapolation to delta = 0 through the two smallest deltas.
double extrapolate_zero(const std::vector<double>& delta, const std::vector<double>& values) {
  const std::size_t n = delta.size();
  if (n == 1) return values[0];
  const double d1 = delta[n - 2], d2 = delta[n - 1], v1 = values[n - 2], v2 = values[n - 1];
  return v2 - d2 * (v1 - v2) / (d1 - d2);
}

std::string component_suffix(PairingMode mode, std::size_t c) {
  if (mode == PairingMode::function) return "";
  return c == 0 ? "|u" : "|d" + std::to_string(c);
}

} // namespace

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

RateFit fit_rate(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  RateFit f;
  f.points = static_cast<int>(lx.size());
  if (lx.size() < 2) return f;
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

std::string provenance(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "config=" << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(cfg.resolved()) << std::dec
     << " seed=" << cfg.seed;
  return os.str();
}

std::optional<HomogenizedIntegrand> exact_homogenized(const ExperimentConfig& cfg) {
  if (cfg.period) return std::nullopt;
  const double p = cfg.integrand.exponent();
  const CellDistribution& a = cfg.cells;
  if (cfg.dim == 1) {
    // a |u'|^(p-2) u' is constant, so V_hom(F) = <c^(-s)>^-(p-1) |F|^p / p, s = 1/(p-1)
    const double s = 1.0 / (p - 1.0);
    auto ma = a.moment(-s);
    if (!ma) return std::nullopt;
    double m = *ma;
    if (cfg.weight) {
      auto mw = cfg.weight->moment(-s);
      if (!mw) return std::nullopt;
      m *= *mw;
    }
    return HomogenizedIntegrand(1, p, {std::pow(m, -(p - 1.0)) / p});
  }
  if (cfg.weight) return std::nullopt;
  if (a.kind == DistributionKind::discrete && a.values.size() == 1)
    return HomogenizedIntegrand(2, p, std::vector<double>(static_cast<std::size_t>(cfg.direction_count()), a.values[0] / p));
  if (p == 2.0 && a.kind == DistributionKind::discrete && a.values.size() == 2 &&
      std::abs(a.probabilities[0] - 0.5) <= 1e-12) {
    const double g = 0.5 * std::sqrt(a.values[0] * a.values[1]);
    return HomogenizedIntegrand(2, p, std::vector<double>(static_cast<std::size_t>(cfg.direction_count()), g));
  }
  return std::nullopt;
}

Reference homogenized_reference(const ExperimentConfig& cfg, double delta) {
  Reference ref;
  if (delta == 0.0 && cfg.reference != ReferenceKind::cell) {
    if (auto exact = exact_homogenized(cfg)) {
      ref.integrand = *exact;
      ref.source = "exact";
      return ref;
    }
    require(cfg.reference != ReferenceKind::exact, "no closed-form homogenized integrand for this ensemble");
  }
  const MediumEnsemble ens = cfg.ergodic_ensemble();
  ref.integrand = homogenize(ens, cfg.L.back(), cfg.integrand, delta, cfg.cell_samples, cfg.n_per_cell,
                             cfg.direction_count(), cfg.solver, &ref.rows);
  ref.source = "cell";
  return ref;
}

// ---------------------------------------------------------------------------

SweepResult run_sweep(const ExperimentConfig& cfg, const RunOptions& opt) {
  SweepResult out;
  check_resolution(cfg, opt, out.warnings);
  const MediumEnsemble ens = cfg.ensemble();
  const Reference ref = homogenized_reference(cfg, 0.0);
  out.reference_source = ref.source;
  const MinimizeResult hom = solve_homogenized(cfg, ref.integrand);
  out.hom_energy = hom.energy;
  if (!hom.converged) out.warnings.push_back("homogenized reference solve did not converge");
  const double p = cfg.integrand.exponent();
  const auto N = static_cast<std::size_t>(cfg.realizations);

  for (double eps : cfg.eps) {
    std::vector<SweepRow> rows(N);
    par::for_each_index(N, [&](std::size_t i) {
      const Medium m = ens.sample(i);
      const MinimizeResult r = solve_realization(cfg, m, eps);
      SweepRow& row = rows[i];
      row.eps = eps;
      row.index = i;
      row.seed = m.seed();
      row.energy = r.energy;
      row.gap = std::abs(r.energy - hom.energy);
      row.lp_distance = lp_distance(r.fields.front(), hom.fields.front(), p);
      row.iterations = r.iterations;
      row.grad_norm = r.grad_norm;
      row.wall_ms = shown_ms(opt, r.wall_ms);
      row.converged = r.converged;
    });
    std::vector<double> gaps, dists;
    for (const auto& r : rows) {
      gaps.push_back(r.gap);
      dists.push_back(r.lp_distance);
    }
    out.eps.push_back(eps);
    out.median_gap.push_back(median(gaps));
    out.median_distance.push_back(median(dists));
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  out.gap_rate = fit_rate(out.eps, out.median_gap);
  out.distance_rate = fit_rate(out.eps, out.median_distance);
  return out;
}

StudyOutput to_output(const SweepResult& r, const ExperimentConfig& cfg) {
  StudyOutput o;
  o.warnings = r.warnings;
  o.report.header = {"eps", "seed", "index", "energy", "hom_energy", "gap", "lp_distance", "iters", "grad_norm",
                     "converged", "wall_ms"};
  for (const auto& row : r.rows) {
    o.report.add({fmt(row.eps), format_number(row.seed), format_number(static_cast<std::uint64_t>(row.index)),
                  fmt(row.energy), fmt(r.hom_energy), fmt(row.gap), fmt(row.lp_distance), format_number(row.iterations),
                  fmt(row.grad_norm), row.converged ? "1" : "0", fmt(row.wall_ms)});
    o.converged = o.converged && row.converged;
  }
  Table summary{{"quantity", "eps", "value"}, {}};
  for (std::size_t k = 0; k < r.eps.size(); ++k) {
    summary.add({"median_gap", fmt(r.eps[k]), fmt(r.median_gap[k])});
    summary.add({"median_lp_distance", fmt(r.eps[k]), fmt(r.median_distance[k])});
  }
  summary.add({"gap_rate", "", fmt(r.gap_rate.slope)});
  summary.add({"gap_rate_residual", "", fmt(r.gap_rate.residual)});
  summary.add({"distance_rate", "", fmt(r.distance_rate.slope)});
  summary.add({"distance_rate_residual", "", fmt(r.distance_rate.residual)});
  summary.add({"hom_energy", "", fmt(r.hom_energy)});
  summary.add({"reference", "", r.reference_source});
  o.extra.push_back({"summary", std::move(summary)});

  PlotSpec plot{"energy gap vs eps", "eps", "|min I_eps - min I_hom|", {}, provenance(cfg)};
  plot.series.push_back({"median gap", r.eps, r.median_gap, true});
  plot.series.push_back({"median L^p distance", r.eps, r.median_distance, true});
  if (auto svg = render_svg(plot); !svg.empty()) o.plots.push_back({"energy_gap", svg});
  return o;
}

// ---------------------------------------------------------------------------

DiagramResult run_diagram(const ExperimentConfig& cfg, const RunOptions& opt) {
  DiagramResult out;
  check_resolution(cfg, opt, out.warnings);
  for (double d : cfg.delta)
    if (d > 0.0) out.delta.push_back(d);
  require(out.delta.size() >= 2, "diagram needs at least two positive deltas");
  const MediumEnsemble ens = cfg.ensemble();
  if (ens.weight) {
    out.moment = moment_estimate(*ens.weight, cfg.integrand.exponent(), static_cast<std::size_t>(cfg.moment_samples));
    if (out.moment.divergence_suspected)
      out.warnings.push_back("moment condition looks divergent; running as a stress test");
  }

  // homogenized corners, all from cell problems on the same seed set and on
  // the mesh of the finest eps
  const auto corner_mesh = eps_mesh(cfg, cfg.eps.back());
  ExperimentConfig cell_cfg = cfg;
  cell_cfg.reference = ReferenceKind::cell;
  std::vector<std::vector<double>> per_seed;  // [delta index][seed], last = delta 0
  auto corner = [&](double delta, double& vhom, double& energy) {
    const Reference ref = homogenized_reference(cell_cfg, delta);
    vhom = ref.rows.front().mean;
    per_seed.push_back(ref.rows.front().values);
    for (const auto& row : ref.rows) out.converged = out.converged && row.converged;
    const MinimizeResult m = solve_homogenized(cfg, ref.integrand, corner_mesh);
    out.converged = out.converged && m.converged;
    energy = m.energy;
  };
  for (double d : out.delta) {
    double v = 0, e = 0;
    corner(d, v, e);
    out.vhom_delta.push_back(v);
    out.hom_delta.push_back(e);
  }
  corner(0.0, out.vhom, out.hom);
  for (std::size_t k = 0; k + 1 < per_seed.size(); ++k)
    for (std::size_t s = 0; s < per_seed[k].size(); ++s) {
      const double hi = per_seed[k][s], lo = per_seed[k + 1][s];
      if (hi < lo - 1e-9 * std::abs(lo)) out.vhom_monotone = false;
    }

  const auto N = static_cast<std::size_t>(cfg.realizations);
  require(N >= 2, "diagram needs at least two realizations");
  std::vector<Medium> media;
  for (std::size_t i = 0; i < N; ++i) media.push_back(ens.sample(i));
  for (double eps : cfg.eps) {
    out.eps.push_back(eps);
    auto mesh = eps_mesh(cfg, eps);
    std::vector<double> row;
    for (double d : out.delta) {
      const MinimizeResult m = minimize_coupled(media, eps, mesh, cfg.integrand, make_load(cfg), d, cfg.solver);
      out.converged = out.converged && m.converged;
      row.push_back(m.energy);
    }
    std::vector<double> single(N);
    std::vector<char> ok(N, 1);
    par::for_each_index(N, [&](std::size_t i) {
      const MinimizeResult m = solve_realization(cfg, media[i], eps);
      single[i] = m.energy;
      ok[i] = m.converged;
    });
    double mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      mean += single[i];
      out.converged = out.converged && ok[i];
    }
    mean /= static_cast<double>(N);
    out.decoupled.push_back(mean);
    const double slack = 10.0 * cfg.solver.tol * (1.0 + std::abs(mean));
    for (double v : row)
      if (v < mean - slack) out.ordering_holds = false;
    out.coupled.push_back(std::move(row));
  }

  out.path_a = extrapolate_zero(out.delta, out.hom_delta);
  out.path_b = extrapolate_zero(out.delta, out.coupled.back());
  out.disagreement = std::abs(out.path_a - out.path_b) / std::abs(out.hom);
  out.paths_agree = out.disagreement <= cfg.diagram_tol;
  if (!out.paths_agree) out.warnings.push_back("diagram paths disagree by more than diagram_tol");
  return out;
}

StudyOutput to_output(const DiagramResult& r, const ExperimentConfig& cfg) {
  StudyOutput o;
  o.warnings = r.warnings;
  o.converged = r.converged;
  o.report.header = {"eps", "delta", "quantity", "value"};
  for (std::size_t k = 0; k < r.eps.size(); ++k) {
    for (std::size_t j = 0; j < r.delta.size(); ++j)
      o.report.add({fmt(r.eps[k]), fmt(r.delta[j]), "min_E_eps_delta", fmt(r.coupled[k][j])});
    o.report.add({fmt(r.eps[k]), "0", "min_E_eps", fmt(r.decoupled[k])});
  }
  for (std::size_t j = 0; j < r.delta.size(); ++j) {
    o.report.add({"0", fmt(r.delta[j]), "min_E_hom_delta", fmt(r.hom_delta[j])});
    o.report.add({"0", fmt(r.delta[j]), "V_hom_delta_e1", fmt(r.vhom_delta[j])});
  }
  o.report.add({"0", "0", "min_E_hom", fmt(r.hom)});
  o.report.add({"0", "0", "V_hom_e1", fmt(r.vhom)});
  o.report.add({"", "", "path_eps_then_delta", fmt(r.path_a)});
  o.report.add({"", "", "path_delta_then_eps", fmt(r.path_b)});
  o.report.add({"", "", "relative_disagreement", fmt(r.disagreement)});
  o.report.add({"", "", "paths_agree", r.paths_agree ? "1" : "0"});
  o.report.add({"", "", "V_hom_delta_monotone", r.vhom_monotone ? "1" : "0"});
  o.report.add({"", "", "coupled_above_decoupled", r.ordering_holds ? "1" : "0"});
  if (r.moment.samples > 0) {
    o.report.add({"", "", "moment_estimate", fmt(r.moment.value)});
    o.report.add({"", "", "moment_stderr", fmt(r.moment.stderr)});
    o.report.add({"", "", "moment_divergence_suspected", r.moment.divergence_suspected ? "1" : "0"});
  }

  PlotSpec plot{"coupled minimal energy vs eps", "eps", "|min E_eps,delta|", {}, provenance(cfg)};
  for (std::size_t j = 0; j < r.delta.size(); ++j) {
    Series s{"delta=" + fmt(r.delta[j]), r.eps, {}, true};
    for (const auto& row : r.coupled) s.y.push_back(std::abs(row[j]));
    plot.series.push_back(std::move(s));
  }
  Series dec{"delta=0 (decoupled)", r.eps, {}, true};
  for (double v : r.decoupled) dec.y.push_back(std::abs(v));
  plot.series.push_back(std::move(dec));
  if (auto svg = render_svg(plot); !svg.empty()) o.plots.push_back({"diagram", svg});

  PlotSpec vplot{"regularized effective integrand vs delta", "delta", "V_hom,delta(e1)", {}, provenance(cfg)};
  vplot.series.push_back({"V_hom,delta(e1)", r.delta, r.vhom_delta, true});
  if (auto svg = render_svg(vplot); !svg.empty()) o.plots.push_back({"vhom_vs_delta", svg});
  return o;
}

// ---------------------------------------------------------------------------

PairingStudy run_pairing_study(const ExperimentConfig& cfg, const MediumEnsemble& ensemble, bool with_limit,
                               const RunOptions& opt) {
  PairingStudy st;
  check_resolution(cfg, opt, st.warnings);
  const double p = cfg.integrand.exponent();
  st.dictionary = build_dictionary(cfg.dictionary, p, *ensemble.coefficient);
  st.mode = cfg.pairing_mode;
  if (with_limit && st.mode == PairingMode::gradient && p != 2.0) {
    st.mode = PairingMode::function;
    st.warnings.push_back("gradient-mode limit pairing needs p = 2; using function mode");
  }
  st.eps = cfg.eps;
  const auto N = static_cast<std::size_t>(cfg.realizations);
  st.quenched.assign(N, {});
  st.seeds.resize(N);
  std::vector<Medium> media;
  for (std::size_t i = 0; i < N; ++i) {
    media.push_back(ensemble.sample(i));
    st.seeds[i] = media.back().seed();
  }
  for (double eps : st.eps) {
    std::vector<PairingVector> col(N);
    std::vector<char> ok(N, 1);
    par::for_each_index(N, [&](std::size_t i) {
      const MinimizeResult r = solve_realization(cfg, media[i], eps);
      ok[i] = r.converged;
      col[i] = quenched_pairing(r.fields.front(), media[i].coefficient, eps, st.dictionary, st.mode);
    });
    for (std::size_t i = 0; i < N; ++i) {
      st.converged = st.converged && ok[i];
      st.quenched[i].push_back(col[i]);
    }
    st.mean.push_back(average_pairings(col));
  }

  if (with_limit) {
    const Reference ref = homogenized_reference(cfg, 0.0);
    const MinimizeResult hom = solve_homogenized(cfg, ref.integrand);
    st.converged = st.converged && hom.converged;
    std::optional<CorrectorSampler> sampler;
    if (st.mode == PairingMode::gradient)
      sampler = sample_linear_correctors(cfg.ergodic_ensemble(), cfg.integrand, st.dictionary, cfg.L.back(),
                                         cfg.n_per_cell, cfg.corrector_samples);
    st.limit = limit_pairing(hom.fields.front(), st.dictionary, st.mode, sampler ? &*sampler : nullptr);
    for (std::size_t k = 0; k < st.eps.size(); ++k) {
      std::vector<double> d;
      for (std::size_t i = 0; i < N; ++i) d.push_back(metric_distance(st.quenched[i][k], *st.limit));
      st.quenched_distance.push_back(std::move(d));
      st.mean_distance.push_back(metric_distance(st.mean[k], *st.limit));
    }
  }
  if (st.eps.size() >= 3)
    st.young = empirical_young_measure(st.quenched, cfg.linkage_threshold());
  else
    st.warnings.push_back("fewer than three eps values; Young-measure clustering skipped");
  return st;
}

namespace {

Table young_table(const PairingStudy& s) {
  Table t{{"cluster", "weight", "diameter", "entry_j", "barycenter_value"}, {}};
  for (std::size_t c = 0; c < s.young.clusters.size(); ++c) {
    const auto& cl = s.young.clusters[c];
    for (std::size_t j = 0; j < cl.barycenter.values.size(); ++j)
      t.add({format_number(static_cast<std::uint64_t>(c)), fmt(cl.weight), fmt(cl.diameter),
             format_number(static_cast<std::uint64_t>(j + 1)), fmt(cl.barycenter.values[j])});
  }
  return t;
}

Table defect_table(const PairingStudy& s) {
  Table t{{"seed", "cluster", "cauchy_defect"}, {}};
  std::vector<std::size_t> label(s.seeds.size(), 0);
  for (std::size_t c = 0; c < s.young.clusters.size(); ++c)
    for (std::size_t i : s.young.clusters[c].members) label[i] = c;
  for (std::size_t i = 0; i < s.young.cauchy_defects.size(); ++i)
    t.add({format_number(s.seeds[i]), format_number(static_cast<std::uint64_t>(label[i])),
           fmt(s.young.cauchy_defects[i])});
  return t;
}

Table pair_table(const PairingStudy& s) {
  Table t{{"seed", "eps", "j", "phi_id", "value"}, {}};
  const std::size_t C = s.mode == PairingMode::function ? 1 : 1 + s.dictionary.dim;
  auto emit = [&](const std::string& seed, const PairingVector& v) {
    for (std::size_t j = 0; j < v.values.size(); ++j)
      t.add({seed, fmt(v.eps), format_number(static_cast<std::uint64_t>(j + 1)),
             s.dictionary.entries[j / C].id + component_suffix(s.mode, j % C), fmt(v.values[j])});
  };
  for (std::size_t i = 0; i < s.quenched.size(); ++i)
    for (const auto& v : s.quenched[i]) emit(format_number(s.seeds[i]), v);
  for (const auto& v : s.mean) emit("mean", v);
  if (s.limit) emit("limit", *s.limit);
  return t;
}

Table dictionary_table(const Dictionary& d) {
  Table t{{"j", "phi_id", "normalization"}, {}};
  for (std::size_t j = 0; j < d.size(); ++j)
    t.add({format_number(static_cast<std::uint64_t>(j + 1)), d.entries[j].id, fmt(d.entries[j].norm)});
  return t;
}

} // namespace

StudyOutput quenched_vs_mean_output(const PairingStudy& s, const ExperimentConfig& cfg) {
  StudyOutput o;
  o.warnings = s.warnings;
  o.converged = s.converged;
  o.report.header = {"eps", "seed", "distance_to_limit"};
  Table summary{{"eps", "mean_distance", "max_quenched_distance", "mean_le_max"}, {}};
  std::vector<double> maxd;
  for (std::size_t k = 0; k < s.eps.size(); ++k) {
    for (std::size_t i = 0; i < s.seeds.size(); ++i)
      o.report.add({fmt(s.eps[k]), format_number(s.seeds[i]), fmt(s.quenched_distance[k][i])});
    o.report.add({fmt(s.eps[k]), "mean", fmt(s.mean_distance[k])});
    const double mx = *std::max_element(s.quenched_distance[k].begin(), s.quenched_distance[k].end());
    maxd.push_back(mx);
    summary.add({fmt(s.eps[k]), fmt(s.mean_distance[k]), fmt(mx), s.mean_distance[k] <= mx ? "1" : "0"});
  }
  o.extra.push_back({"summary", std::move(summary)});
  o.extra.push_back({"young", young_table(s)});
  o.extra.push_back({"cauchy", defect_table(s)});
  o.extra.push_back({"dictionary", dictionary_table(s.dictionary)});
  PlotSpec plot{"metric distance to the limit pairing", "eps", "distance", {}, provenance(cfg)};
  plot.series.push_back({"mean pairing", s.eps, s.mean_distance, true});
  plot.series.push_back({"max quenched", s.eps, maxd, true});
  if (auto svg = render_svg(plot); !svg.empty()) o.plots.push_back({"metric_distance", svg});
  return o;
}

StudyOutput pair_output(const PairingStudy& s, const ExperimentConfig& cfg) {
  StudyOutput o;
  o.warnings = s.warnings;
  o.converged = s.converged;
  o.report = pair_table(s);
  o.extra.push_back({"dictionary", dictionary_table(s.dictionary)});
  if (!s.mean_distance.empty()) {
    PlotSpec plot{"metric distance to the limit pairing", "eps", "distance", {}, provenance(cfg)};
    plot.series.push_back({"mean pairing", s.eps, s.mean_distance, true});
    if (auto svg = render_svg(plot); !svg.empty()) o.plots.push_back({"metric_distance", svg});
  }
  return o;
}

StudyOutput young_output(const PairingStudy& s, const ExperimentConfig&) {
  StudyOutput o;
  o.warnings = s.warnings;
  o.converged = s.converged;
  o.report = young_table(s);
  o.extra.push_back({"cauchy", defect_table(s)});
  o.extra.push_back({"dictionary", dictionary_table(s.dictionary)});
  return o;
}

// ---------------------------------------------------------------------------

NonergodicResult run_nonergodic(const ExperimentConfig& cfg, const RunOptions& opt) {
  require(cfg.period.has_value(), "nonergodic study needs [ensemble] period");
  NonergodicResult out;
  const MediumEnsemble ens = cfg.ensemble();
  const auto N = static_cast<std::size_t>(cfg.realizations);
  out.seeds.resize(N);
  out.cell_values.resize(N);
  std::vector<char> ok(N, 1);
  par::for_each_index(N, [&](std::size_t i) {
    const Medium m = ens.sample(i);
    out.seeds[i] = m.seed();
    const CellResult c = cell_problem(m, *cfg.period, cfg.integrand, {1.0, 0.0}, 0.0, cfg.n_per_cell, cfg.solver);
    out.cell_values[i] = c.value;
    ok[i] = c.converged;
  });
  for (char c : ok) out.converged = out.converged && c;
  out.periodic = run_pairing_study(cfg, ens, false, opt);
  out.converged = out.converged && out.periodic.converged;
  out.warnings = out.periodic.warnings;
  if (cfg.contrast) {
    ExperimentConfig ergodic = cfg;
    ergodic.period.reset();
    out.ergodic = run_pairing_study(ergodic, ergodic.ensemble(), false, opt);
    out.converged = out.converged && out.ergodic->converged;
  }
  return out;
}

StudyOutput to_output(const NonergodicResult& r, const ExperimentConfig&) {
  StudyOutput o;
  o.warnings = r.warnings;
  o.converged = r.converged;
  o.report.header = {"ensemble", "seed", "cluster", "cell_value", "cauchy_defect"};
  auto emit = [&](const std::string& name, const PairingStudy& s, const std::vector<double>* cells) {
    std::vector<std::size_t> label(s.seeds.size(), 0);
    for (std::size_t c = 0; c < s.young.clusters.size(); ++c)
      for (std::size_t i : s.young.clusters[c].members) label[i] = c;
    for (std::size_t i = 0; i < s.seeds.size(); ++i)
      o.report.add({name, format_number(s.seeds[i]), format_number(static_cast<std::uint64_t>(label[i])),
                    cells ? fmt((*cells)[i]) : "",
                    i < s.young.cauchy_defects.size() ? fmt(s.young.cauchy_defects[i]) : ""});
  };
  emit("periodized", r.periodic, &r.cell_values);
  if (r.ergodic) emit("ergodic", *r.ergodic, nullptr);

  Table clusters{{"ensemble", "cluster", "weight", "diameter", "min_separation"}, {}};
  auto add = [&](const std::string& name, const PairingStudy& s) {
    for (std::size_t c = 0; c < s.young.clusters.size(); ++c)
      clusters.add({name, format_number(static_cast<std::uint64_t>(c)), fmt(s.young.clusters[c].weight),
                    fmt(s.young.clusters[c].diameter), fmt(s.young.min_separation)});
  };
  add("periodized", r.periodic);
  if (r.ergodic) add("ergodic", *r.ergodic);
  o.extra.push_back({"clusters", std::move(clusters)});
  o.extra.push_back({"young", young_table(r.periodic)});
  return o;
}

// ---------------------------------------------------------------------------

CellStudy run_cell(const ExperimentConfig& cfg, const RunOptions&) {
  CellStudy out;
  const MediumEnsemble ens = cfg.ensemble();
  std::vector<double> deltas = cfg.delta.empty() ? std::vector<double>{0.0} : cfg.delta;
  for (double d : deltas)
    for (int L : cfg.L) {
      if (cfg.period && L % *cfg.period != 0) {
        out.warnings.push_back("skipping L=" + std::to_string(L) + ": not a multiple of the period");
        continue;
      }
      auto rows = effective_integrand(ens, L, cfg.integrand, cfg.F, d, cfg.cell_samples, cfg.n_per_cell, cfg.solver);
      for (auto& row : rows) {
        out.converged = out.converged && row.converged;
        out.rows.push_back(std::move(row));
      }
    }
  return out;
}

StudyOutput to_output(const CellStudy& r, const ExperimentConfig& cfg, const RunOptions& opt) {
  StudyOutput o;
  o.warnings = r.warnings;
  o.converged = r.converged;
  o.report.header = {"F", "L", "delta", "eps", "seed", "value", "stderr", "iters", "grad_norm", "wall_ms"};
  for (const auto& row : r.rows) {
    const std::string F = vec_id(row.F, cfg.dim);
    for (std::size_t s = 0; s < row.values.size(); ++s)
      o.report.add({F, format_number(row.L), fmt(row.delta), "", format_number(row.seeds[s]), fmt(row.values[s]), "",
                    format_number(row.iterations[s]), fmt(row.grad_norms[s]), fmt(shown_ms(opt, row.sample_ms[s]))});
    o.report.add({F, format_number(row.L), fmt(row.delta), "", "mean", fmt(row.mean), fmt(row.stderr),
                  format_number(row.max_iterations), fmt(row.max_grad_norm), fmt(shown_ms(opt, row.wall_ms))});
  }
  // V_hom,L vs L at the first F, one series per delta
  PlotSpec plot{"effective integrand vs L", "L", "V_hom,L(F)", {}, provenance(cfg)};
  std::vector<double> deltas;
  for (const auto& row : r.rows)
    if (std::find(deltas.begin(), deltas.end(), row.delta) == deltas.end()) deltas.push_back(row.delta);
  for (double d : deltas) {
    Series s{"delta=" + fmt(d), {}, {}, true};
    for (const auto& row : r.rows)
      if (row.delta == d && row.F == cfg.F.front()) {
        s.x.push_back(row.L);
        s.y.push_back(row.mean);
      }
    plot.series.push_back(std::move(s));
  }
  if (auto svg = render_svg(plot); !svg.empty()) o.plots.push_back({"vhom_vs_L", svg});
  return o;
}

StudyOutput run_solve(const ExperimentConfig& cfg, const RunOptions& opt) {
  StudyOutput o;
  check_resolution(cfg, opt, o.warnings);
  const MediumEnsemble ens = cfg.ensemble();
  const auto N = static_cast<std::size_t>(cfg.realizations);
  o.report.header = {"F", "L", "delta", "eps", "seed", "value", "stderr", "iters", "grad_norm", "wall_ms"};
  std::vector<double> eps_list, mean_energy;
  for (double eps : cfg.eps) {
    std::vector<MinimizeResult> res(N);
    std::vector<std::uint64_t> seeds(N);
    par::for_each_index(N, [&](std::size_t i) {
      const Medium m = ens.sample(i);
      seeds[i] = m.seed();
      res[i] = solve_realization(cfg, m, eps);
      res[i].fields.clear();
      res[i].mean_field = {};
    });
    par::CompensatedSum sum;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& r = res[i];
      o.converged = o.converged && r.converged;
      sum.add(r.energy);
      o.report.add({"", "", "0", fmt(eps), format_number(seeds[i]), fmt(r.energy), "", format_number(r.iterations),
                    fmt(r.grad_norm), fmt(shown_ms(opt, r.wall_ms))});
    }
    const double mean = sum.value() / static_cast<double>(N);
    double ss = 0.0;
    for (const auto& r : res) ss += (r.energy - mean) * (r.energy - mean);
    const double se = N > 1 ? std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N)) : 0.0;
    o.report.add({"", "", "0", fmt(eps), "mean", fmt(mean), fmt(se), "", "", ""});
    eps_list.push_back(eps);
    mean_energy.push_back(std::abs(mean));
  }
  PlotSpec plot{"mean minimal energy vs eps", "eps", "|mean min I_eps|", {}, provenance(cfg)};
  plot.series.push_back({"mean", eps_list, mean_energy, true});
  if (auto svg = render_svg(plot); !svg.empty()) o.plots.push_back({"energy", svg});
  return o;
}

StudyOutput run_degenerate(const ExperimentConfig& cfg, const RunOptions&) {
  StudyOutput o;
  const MediumEnsemble ens = cfg.ensemble();
  o.report.header = {"quantity", "value"};
  const GrowthReport g = verify_growth(cfg.integrand, ens, static_cast<std::size_t>(cfg.moment_samples));
  o.report.add({"growth_c_low", fmt(g.c_low)});
  o.report.add({"growth_c_high", fmt(g.c_high)});
  o.report.add({"growth_samples", format_number(static_cast<std::uint64_t>(g.samples))});
  o.report.add({"growth_bound", fmt(g.bound)});
  o.report.add({"growth_satisfied", g.satisfies_a3 ? "1" : "0"});
  if (ens.weight) {
    const MomentEstimate m =
        moment_estimate(*ens.weight, cfg.integrand.exponent(), static_cast<std::size_t>(cfg.moment_samples));
    o.report.add({"moment_estimate", fmt(m.value)});
    o.report.add({"moment_stderr", fmt(m.stderr)});
    o.report.add({"moment_last_doubling_change", fmt(m.last_doubling_change)});
    o.report.add({"moment_tail_index", fmt(m.tail_index)});
    o.report.add({"moment_divergence_suspected", m.divergence_suspected ? "1" : "0"});
    if (m.divergence_suspected) o.warnings.push_back("moment condition looks divergent");
  }
  return o;
}

// ---------------------------------------------------------------------------

int run_command(const std::string& command, const ExperimentConfig& cfg, const std::string& out_dir,
                const RunOptions& opt) {
  StudyOutput o;
  if (command == "sweep") {
    o = to_output(run_sweep(cfg, opt), cfg);
  } else if (command == "diagram") {
    o = to_output(run_diagram(cfg, opt), cfg);
  } else if (command == "nonergodic") {
    o = to_output(run_nonergodic(cfg, opt), cfg);
  } else if (command == "quenched-vs-mean") {
    o = quenched_vs_mean_output(run_pairing_study(cfg, cfg.ensemble(), true, opt), cfg);
  } else if (command == "cell") {
    o = to_output(run_cell(cfg, opt), cfg, opt);
  } else if (command == "solve") {
    o = run_solve(cfg, opt);
  } else if (command == "pair") {
    o = pair_output(run_pairing_study(cfg, cfg.ensemble(), true, opt), cfg);
  } else if (command == "young") {
    o = young_output(run_pairing_study(cfg, cfg.ensemble(), false, opt), cfg);
  } else if (command == "degenerate") {
    o = run_degenerate(cfg, opt);
  } else {
    throw ValidationError("unknown command '" + command + "'");
  }
  write_file(out_dir + "/report.csv", o.report.to_csv());
  write_file(out_dir + "/config.resolved", cfg.resolved());
  for (const auto& t : o.extra) write_file(out_dir + "/" + t.name + ".csv", t.table.to_csv());
  for (const auto& p : o.plots) write_file(out_dir + "/plots/" + p.name + ".svg", p.svg);
  for (const auto& w : o.warnings) std::cerr << "warning: " << w << "\n";
  if (!o.converged) {
    std::cerr << "error: at least one solve stopped before reaching the tolerance\n";
    return 2;
  }
  return 0;
}

} // namespace homoglab
