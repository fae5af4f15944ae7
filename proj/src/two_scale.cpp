#include "homoglab/two_scale.hpp"

#include "homoglab/errors.hpp"
#include "homoglab/parallel.hpp"
#include "homoglab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace homoglab {

namespace {

constexpr std::uint64_t kNormStream = 13;

std::size_t components(PairingMode mode, int dim) { return mode == PairingMode::function ? 1 : 1 + dim; }

// integral of |cos(pi k x)|^q over (0,1) for k >= 1
double cosine_power_integral(double q) {
  return std::exp(std::lgamma((q + 1.0) / 2.0) - std::lgamma(q / 2.0 + 1.0)) / std::sqrt(std::numbers::pi);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Monte Carlo moments <phi>, <|phi|^q> of an observable over realizations.
std::pair<double, double> observable_moments(const ObservableSpec& obs, const EnsembleSpec& spec, double q,
                                             int samples, std::uint64_t seed) {
  auto s = std::make_shared<EnsembleSpec>(spec);
  s->seed = detail::derive_seed(seed ^ spec.seed, kNormStream);
  s->period.reset();
  par::CompensatedSum m1, mq;
  for (int i = 0; i < samples; ++i) {
    const Realization r = sample_realization(s, static_cast<std::uint64_t>(i));
    const double v = obs.evaluate(r, {0.0, 0.0});
    m1.add(v);
    mq.add(std::pow(std::abs(v), q));
  }
  return {m1.value() / samples, mq.value() / samples};
}

} // namespace

std::string CosineMode::id() const {
  if (k[0] == 0 && k[1] == 0) return "1";
  std::ostringstream os;
  os << "cos(" << k[0] << "," << k[1] << ")";
  return os.str();
}

double CosineMode::operator()(const Point& x, int dim) const {
  double v = 1.0;
  for (int i = 0; i < dim; ++i)
    if (k[i] != 0) v *= std::cos(std::numbers::pi * k[i] * x[i]);
  return v;
}

double CosineMode::lq_norm(double q, int dim) const {
  double integral = 1.0;
  for (int i = 0; i < dim; ++i)
    if (k[i] != 0) integral *= cosine_power_integral(q);
  return std::pow(integral, 1.0 / q);
}

std::string Dictionary::fingerprint() const {
  std::ostringstream os;
  os << std::setprecision(17) << dim << ';' << p;
  for (const auto& e : entries) os << ';' << e.id << '=' << e.norm;
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << fnv1a(os.str());
  return hex.str();
}

Dictionary build_dictionary(const DictionaryConfig& cfg, double p, const EnsembleSpec& coefficient) {
  require(cfg.probe_radius >= 0 && cfg.cosine_degree >= 0, "dictionary radius and degree must be >= 0");
  require(cfg.max_entries >= 1, "dictionary needs at least one entry");
  require(cfg.mc_samples >= 1, "dictionary needs mc_samples >= 1");
  require(p > 1.0, "dictionary exponent must exceed 1");
  coefficient.validate();
  Dictionary dict;
  dict.dim = coefficient.dim;
  dict.p = p;
  const double q = dict.q();
  const int d = dict.dim;

  dict.observables.push_back(ObservableSpec::identity());
  const int R = cfg.probe_radius;
  for (int j = (d == 2 ? -(R - 1) : 0); j <= (d == 2 ? R - 1 : 0); ++j)
    for (int i = -(R - 1); i <= R - 1; ++i) dict.observables.push_back(ObservableSpec::value_at({i, j}));

  for (const auto& obs : dict.observables) {
    if (obs.probes.empty()) {
      dict.observable_means.push_back(1.0);
      dict.observable_norms.push_back(1.0);
      continue;
    }
    const auto m1 = obs.probes.size() == 1 ? coefficient.cells.moment(1.0) : std::nullopt;
    const auto mq = obs.probes.size() == 1 ? coefficient.cells.moment(q) : std::nullopt;
    if (m1 && mq) {
      dict.observable_means.push_back(*m1);
      dict.observable_norms.push_back(std::pow(*mq, 1.0 / q));
    } else {
      const auto [a, b] = observable_moments(obs, coefficient, q, cfg.mc_samples, cfg.seed);
      dict.observable_means.push_back(a);
      dict.observable_norms.push_back(std::pow(b, 1.0 / q));
    }
  }

  dict.modes.push_back(CosineMode{{0, 0}});
  for (int deg = 1; deg <= cfg.cosine_degree; ++deg) {
    if (d == 1) {
      dict.modes.push_back(CosineMode{{deg, 0}});
      continue;
    }
    for (int k2 = 0; k2 <= deg; ++k2)
      for (int k1 = 0; k1 <= deg; ++k1)
        if (std::max(k1, k2) == deg) dict.modes.push_back(CosineMode{{k1, k2}});
  }

  const std::size_t nO = dict.observables.size(), nQ = dict.modes.size();
  for (std::size_t s = 0; s + 1 < nO + nQ && dict.entries.size() < cfg.max_entries; ++s) {
    for (std::size_t a = 0; a <= s && dict.entries.size() < cfg.max_entries; ++a) {
      const std::size_t b = s - a;
      if (a >= nO || b >= nQ) continue;
      DictionaryEntry e;
      e.omega_index = a;
      e.q_index = b;
      e.id = dict.observables[a].id + "*" + dict.modes[b].id();
      e.norm = dict.observable_norms[a] * dict.modes[b].lq_norm(q, d);
      require(e.norm > 0.0, "dictionary normalization must be positive");
      dict.entries.push_back(std::move(e));
    }
  }
  return dict;
}

PairingVector quenched_pairing(const DiscreteField& u, const Realization& r, double eps, const Dictionary& dict,
                               PairingMode mode) {
  require(eps > 0.0, "eps must be positive");
  require(u.mesh != nullptr && u.mesh->dim == dict.dim, "field dimension differs from the dictionary");
  const Mesh& m = *u.mesh;
  const int d = dict.dim;
  const std::size_t C = components(mode, d);
  const std::size_t nO = dict.observables.size(), nQ = dict.modes.size();
  std::vector<par::CompensatedSum> acc(dict.size() * C);
  std::vector<double> obs(nO), modes(nQ);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Point& x = m.barycenter[e];
    const Point z{x[0] / eps, x[1] / eps};
    for (std::size_t a = 0; a < nO; ++a) obs[a] = dict.observables[a].evaluate(r, z);
    for (std::size_t b = 0; b < nQ; ++b) modes[b] = dict.modes[b](x, d);
    const double ue = u.element_mean(e);
    const Vec g = mode == PairingMode::gradient ? u.element_gradient(e) : Vec{0.0, 0.0};
    for (std::size_t j = 0; j < dict.size(); ++j) {
      const auto& en = dict.entries[j];
      const double w = m.measure[e] * obs[en.omega_index] * modes[en.q_index];
      acc[j * C].add(w * ue);
      for (std::size_t c = 1; c < C; ++c) acc[j * C + c].add(w * g[c - 1]);
    }
  }
  PairingVector out;
  out.values.resize(acc.size());
  for (std::size_t j = 0; j < dict.size(); ++j)
    for (std::size_t c = 0; c < C; ++c) out.values[j * C + c] = acc[j * C + c].value() / dict.entries[j].norm;
  out.eps = eps;
  out.r = u.lp_norm(dict.p);
  out.provenance = "seed:" + std::to_string(r.seed());
  out.fingerprint = dict.fingerprint();
  out.mode = mode;
  return out;
}

PairingVector average_pairings(const std::vector<PairingVector>& vs) {
  require(!vs.empty(), "cannot average an empty list of pairings");
  const std::size_t n = vs.front().values.size();
  PairingVector out;
  out.values.assign(n, 0.0);
  out.stderr.assign(n, 0.0);
  out.eps = vs.front().eps;
  out.fingerprint = vs.front().fingerprint;
  out.mode = vs.front().mode;
  out.provenance = "mean";
  const double N = static_cast<double>(vs.size());
  for (const auto& v : vs) {
    require(v.fingerprint == out.fingerprint && v.values.size() == n && v.mode == out.mode,
            "pairings use different dictionaries");
    for (std::size_t j = 0; j < n; ++j) out.values[j] += v.values[j];
    out.r += v.r;
  }
  for (double& x : out.values) x /= N;
  out.r /= N;
  if (vs.size() > 1) {
    for (std::size_t j = 0; j < n; ++j) {
      double ss = 0.0;
      for (const auto& v : vs) ss += (v.values[j] - out.values[j]) * (v.values[j] - out.values[j]);
      out.stderr[j] = std::sqrt(ss / (N - 1.0) / N);
    }
  }
  return out;
}

PairingVector mean_pairing(const std::vector<FieldSample>& samples, double eps, const Dictionary& dict,
                           PairingMode mode) {
  require(!samples.empty(), "mean pairing needs at least one sample");
  const Mesh* mesh = samples.front().field.mesh.get();
  for (const auto& s : samples) require(s.field.mesh.get() == mesh, "mean pairing needs a common mesh");
  std::vector<PairingVector> q(samples.size());
  par::for_each_index(samples.size(), [&](std::size_t i) {
    q[i] = quenched_pairing(samples[i].field, samples[i].realization, eps, dict, mode);
  });
  return average_pairings(q);
}

CorrectorSampler sample_linear_correctors(const MediumEnsemble& ensemble, const IntegrandSpec& v,
                                          const Dictionary& dict, int L, int n_per_cell, int n_samples) {
  require(v.exponent() == 2.0, "linear corrector sampling needs p = 2");
  require(n_samples >= 1, "corrector sampler needs n_samples >= 1");
  const int d = ensemble.dim();
  const std::size_t nO = dict.observables.size();
  using Mat = std::array<std::array<double, 2>, 2>;
  std::vector<std::vector<Mat>> per(static_cast<std::size_t>(n_samples), std::vector<Mat>(nO, Mat{}));
  par::for_each_index(static_cast<std::size_t>(n_samples), [&](std::size_t s) {
    const Medium r = ensemble.sample(s);
    const Realization coef = r.period() ? r.coefficient : periodize(r.coefficient, L);
    for (int k = 0; k < d; ++k) {
      Vec F{0.0, 0.0};
      F[static_cast<std::size_t>(k)] = 1.0;
      const CellResult cell = cell_problem(r, L, v, F, 0.0, n_per_cell);
      const Mesh& m = *cell.corrector.mesh;
      const double vol = std::pow(static_cast<double>(L), d);
      std::vector<std::array<par::CompensatedSum, 2>> acc(nO);
      for (std::size_t e = 0; e < m.num_elements(); ++e) {
        const Vec g = cell.corrector.element_gradient(e);
        for (std::size_t a = 0; a < nO; ++a) {
          const double phi = dict.observables[a].evaluate(coef, m.barycenter[e]);
          for (int i = 0; i < d; ++i) acc[a][static_cast<std::size_t>(i)].add(m.measure[e] * g[static_cast<std::size_t>(i)] * phi);
        }
      }
      for (std::size_t a = 0; a < nO; ++a)
        for (int i = 0; i < d; ++i)
          per[s][a][static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = acc[a][static_cast<std::size_t>(i)].value() / vol;
    }
  });
  CorrectorSampler out;
  out.dim = d;
  out.samples = n_samples;
  out.correlation.assign(nO, Mat{});
  out.stderr.assign(nO, Mat{});
  const double N = n_samples;
  for (std::size_t a = 0; a < nO; ++a) {
    for (int i = 0; i < d; ++i) {
      for (int k = 0; k < d; ++k) {
        const auto ii = static_cast<std::size_t>(i), kk = static_cast<std::size_t>(k);
        double mean = 0.0;
        for (const auto& s : per) mean += s[a][ii][kk];
        mean /= N;
        double ss = 0.0;
        for (const auto& s : per) ss += (s[a][ii][kk] - mean) * (s[a][ii][kk] - mean);
        out.correlation[a][ii][kk] = mean;
        out.stderr[a][ii][kk] = n_samples > 1 ? std::sqrt(ss / (N - 1.0) / N) : 0.0;
      }
    }
  }
  return out;
}

PairingVector limit_pairing(const DiscreteField& u_hom, const Dictionary& dict, PairingMode mode,
                            const CorrectorSampler* sampler) {
  require(mode == PairingMode::function || sampler != nullptr, "gradient-mode limit pairing needs a corrector sampler");
  require(u_hom.mesh != nullptr && u_hom.mesh->dim == dict.dim, "field dimension differs from the dictionary");
  if (sampler) require(sampler->correlation.size() == dict.observables.size(), "corrector sampler does not match the dictionary");
  const Mesh& m = *u_hom.mesh;
  const int d = dict.dim;
  const std::size_t C = components(mode, d);
  const std::size_t nQ = dict.modes.size();
  // moments over Q: int u phi_Q and int d_k u phi_Q
  std::vector<par::CompensatedSum> iu(nQ);
  std::vector<std::array<par::CompensatedSum, 2>> ig(nQ);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Point& x = m.barycenter[e];
    const double ue = u_hom.element_mean(e);
    const Vec g = u_hom.element_gradient(e);
    for (std::size_t b = 0; b < nQ; ++b) {
      const double w = m.measure[e] * dict.modes[b](x, d);
      iu[b].add(w * ue);
      ig[b][0].add(w * g[0]);
      ig[b][1].add(w * g[1]);
    }
  }
  PairingVector out;
  out.values.assign(dict.size() * C, 0.0);
  out.stderr.assign(dict.size() * C, 0.0);
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const auto& en = dict.entries[j];
    const double mean_obs = dict.observable_means[en.omega_index];
    out.values[j * C] = mean_obs * iu[en.q_index].value() / en.norm;
    if (mode == PairingMode::function) continue;
    const auto& Cm = sampler->correlation[en.omega_index];
    const auto& Cs = sampler->stderr[en.omega_index];
    for (int i = 0; i < d; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      double v = mean_obs * ig[en.q_index][ii].value();
      double var = 0.0;
      for (int k = 0; k < d; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double Gk = ig[en.q_index][kk].value();
        v += Cm[ii][kk] * Gk;
        var += Gk * Gk * Cs[ii][kk] * Cs[ii][kk];
      }
      out.values[j * C + 1 + ii] = v / en.norm;
      out.stderr[j * C + 1 + ii] = std::sqrt(var) / en.norm;
    }
  }
  out.eps = 0.0;
  out.r = u_hom.lp_norm(dict.p);
  out.provenance = "limit";
  out.fingerprint = dict.fingerprint();
  out.mode = mode;
  return out;
}

double metric_distance(const PairingVector& a, const PairingVector& b) {
  require(a.fingerprint == b.fingerprint && a.values.size() == b.values.size() && a.mode == b.mode,
          "pairings use different dictionaries");
  double dist = 0.0, w = 0.5;
  for (std::size_t j = 0; j < a.values.size(); ++j, w *= 0.5) {
    const double t = std::abs(a.values[j] - b.values[j]);
    dist += w * t / (1.0 + t);
  }
  return dist;
}

IsometryReport unfold_isometry_check(std::shared_ptr<const EnsembleSpec> ensemble, const FieldRecipe& u, double eps,
                                     double p, int n_samples, int n_quad) {
  require(eps > 0.0 && p >= 1.0, "isometry check needs eps > 0 and p >= 1");
  require(n_samples >= 2 && n_quad >= 1, "isometry check needs >= 2 samples");
  ensemble->validate();
  const int d = ensemble->dim;
  const std::size_t npts = d == 1 ? static_cast<std::size_t>(n_quad) : static_cast<std::size_t>(n_quad) * n_quad;
  std::vector<double> plain(static_cast<std::size_t>(n_samples)), unfolded(plain.size());
  par::for_each_index(plain.size(), [&](std::size_t s) {
    const Realization r = sample_realization(ensemble, s);
    par::CompensatedSum a, b;
    for (std::size_t k = 0; k < npts; ++k) {
      const Point x{(static_cast<double>(k % n_quad) + 0.5) / n_quad,
                    d == 2 ? (static_cast<double>(k / n_quad) + 0.5) / n_quad : 0.0};
      a.add(std::pow(std::abs(u(r, x, eps)), p));
      const Realization back = shift(r, {-x[0] / eps, d == 2 ? -x[1] / eps : 0.0});
      b.add(std::pow(std::abs(u(back, x, eps)), p));
    }
    plain[s] = a.value() / static_cast<double>(npts);
    unfolded[s] = b.value() / static_cast<double>(npts);
  });
  auto stats = [&](const std::vector<double>& v) {
    par::CompensatedSum m;
    for (double x : v) m.add(x);
    const double mean = m.value() / n_samples;
    par::CompensatedSum ss;
    for (double x : v) ss.add((x - mean) * (x - mean));
    return std::pair{mean, std::sqrt(ss.value() / (n_samples - 1) / n_samples)};
  };
  const auto [ma, sa] = stats(plain);
  const auto [mb, sb] = stats(unfolded);
  IsometryReport rep;
  rep.samples = n_samples;
  rep.norm_u = std::pow(ma, 1.0 / p);
  rep.norm_unfolded = std::pow(mb, 1.0 / p);
  rep.defect = rep.norm_u > 0.0 ? std::abs(rep.norm_unfolded - rep.norm_u) / rep.norm_u : 0.0;
  // delta method: relative error of m^(1/p) is (1/p) se(m) / m
  const double ra = ma > 0.0 ? sa / (p * ma) : 0.0, rb = mb > 0.0 ? sb / (p * mb) : 0.0;
  rep.stderr = std::sqrt(ra * ra + rb * rb);
  return rep;
}

YoungMeasureReport empirical_young_measure(const std::vector<std::vector<PairingVector>>& trajectories,
                                           double linkage_tol) {
  require(!trajectories.empty(), "Young measure needs at least one trajectory");
  require(linkage_tol >= 0.0, "linkage tolerance must be nonnegative");
  const std::size_t N = trajectories.size();
  YoungMeasureReport rep;
  for (const auto& t : trajectories) {
    require(t.size() >= 3, "each trajectory needs at least three eps values");
    double defect = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) {
      require(t[k].eps < t[k - 1].eps, "trajectory eps values must decrease");
      defect = std::max(defect, metric_distance(t[k - 1], t[k]));
    }
    rep.cauchy_defects.push_back(defect);
  }
  std::vector<std::vector<double>> dist(N, std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      dist[i][j] = dist[j][i] = metric_distance(trajectories[i].back(), trajectories[j].back());

  std::vector<std::size_t> parent(N);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      if (dist[i][j] <= linkage_tol) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }

  std::vector<std::size_t> label(N, N);
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t root = find(i);
    if (label[root] == N) {
      label[root] = rep.clusters.size();
      rep.clusters.emplace_back();
    }
    rep.clusters[label[root]].members.push_back(i);
  }
  for (auto& c : rep.clusters) {
    c.weight = static_cast<double>(c.members.size()) / static_cast<double>(N);
    std::vector<PairingVector> finals;
    for (std::size_t i : c.members) {
      finals.push_back(trajectories[i].back());
      for (std::size_t j : c.members) c.diameter = std::max(c.diameter, dist[i][j]);
    }
    c.barycenter = average_pairings(finals);
    c.barycenter.provenance = "cluster";
  }
  if (rep.clusters.size() > 1) {
    rep.min_separation = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        if (find(i) != find(j)) rep.min_separation = std::min(rep.min_separation, dist[i][j]);
  }
  return rep;
}

} // namespace homoglab
