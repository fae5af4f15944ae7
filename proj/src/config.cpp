#include "homoglab/config.hpp"

#include "homoglab/errors.hpp"
#include "homoglab/report.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace homoglab {

namespace {

namespace pt = boost::property_tree;

constexpr std::uint64_t kWeightSeedSalt = 0x5bd1e9955bd1e995ULL;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"ensemble",
       {"dim", "distribution", "values", "probabilities", "value", "lower", "upper", "exponent", "random_shift",
        "period", "seed", "weight", "weight_values", "weight_probabilities", "weight_value", "weight_lower",
        "weight_upper", "weight_exponent"}},
      {"integrand", {"form", "p", "modulation", "load"}},
      {"study",
       {"kind", "eps", "delta", "L", "F", "realizations", "mesh_per_eps", "reference_n", "n_per_cell", "cell_samples",
        "directions", "reference", "linkage_tol", "diagram_tol", "pairing", "corrector_samples", "contrast",
        "moment_samples"}},
      {"solver", {"tol", "max_iter", "method"}},
      {"dictionary", {"probe_radius", "cosine_degree", "max_entries", "mc_samples", "seed"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  try {
    const auto slash = s.find('/');
    std::size_t pos = 0;
    if (slash != std::string::npos) {
      const double a = std::stod(s.substr(0, slash), &pos);
      if (pos != slash) throw std::invalid_argument(s);
      const std::string rest = s.substr(slash + 1);
      const double b = std::stod(rest, &pos);
      if (pos != rest.size() || b == 0.0) throw std::invalid_argument(s);
      return a / b;
    }
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("key '" + key + "': cannot parse number '" + s + "'");
  }
}

long long parse_int(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("key '" + key + "': cannot parse integer '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  try {
    std::size_t pos = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
    const unsigned long long v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("key '" + key + "': cannot parse unsigned integer '" + s + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ValidationError("key '" + key + "': cannot parse boolean '" + s + "'");
}

std::vector<double> parse_doubles(const std::string& key, const std::string& raw) {
  std::vector<double> out;
  for (const auto& t : split(raw, ',')) out.push_back(parse_double(key, t));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v[i]);
  return s;
}

CellDistribution parse_distribution(const pt::ptree& sec, const std::string& prefix, const std::string& kind) {
  auto get = [&](const std::string& k) { return sec.get_optional<std::string>(prefix + k); };
  auto need = [&](const std::string& k) {
    auto v = get(k);
    require(v.has_value(), "[ensemble] missing key '" + prefix + k + "'");
    return *v;
  };
  if (kind == "discrete") {
    auto values = parse_doubles(prefix + "values", need("values"));
    std::vector<double> probs;
    if (auto p = get("probabilities")) {
      probs = parse_doubles(prefix + "probabilities", *p);
    } else {
      probs.assign(values.size(), values.empty() ? 0.0 : 1.0 / static_cast<double>(values.size()));
    }
    return CellDistribution::discrete(std::move(values), std::move(probs));
  }
  if (kind == "constant") return CellDistribution::constant(parse_double(prefix + "value", need("value")));
  if (kind == "uniform")
    return CellDistribution::uniform(parse_double(prefix + "lower", need("lower")),
                                     parse_double(prefix + "upper", need("upper")));
  if (kind == "power") {
    const double upper = get("upper") ? parse_double(prefix + "upper", *get("upper")) : 1.0;
    return CellDistribution::power(parse_double(prefix + "exponent", need("exponent")), upper);
  }
  throw ValidationError("unknown distribution '" + kind + "'");
}

std::string kind_name(const CellDistribution& d) {
  switch (d.kind) {
  case DistributionKind::discrete: return "discrete";
  case DistributionKind::uniform: return "uniform";
  case DistributionKind::power: return "power";
  }
  return "discrete";
}

void write_distribution(std::ostringstream& os, const CellDistribution& d, const std::string& prefix) {
  switch (d.kind) {
  case DistributionKind::discrete:
    os << prefix << "values = " << join(d.values) << "\n";
    os << prefix << "probabilities = " << join(d.probabilities) << "\n";
    break;
  case DistributionKind::uniform:
    os << prefix << "lower = " << format_number(d.lower) << "\n";
    os << prefix << "upper = " << format_number(d.upper) << "\n";
    break;
  case DistributionKind::power:
    os << prefix << "exponent = " << format_number(d.exponent) << "\n";
    os << prefix << "upper = " << format_number(d.upper) << "\n";
    break;
  }
}

std::string method_name(Method m) {
  switch (m) {
  case Method::automatic: return "automatic";
  case Method::linear_cg: return "linear-cg";
  case Method::nonlinear_cg: return "nonlinear-cg";
  }
  return "automatic";
}

std::string reference_name(ReferenceKind r) {
  switch (r) {
  case ReferenceKind::automatic: return "auto";
  case ReferenceKind::exact: return "exact";
  case ReferenceKind::cell: return "cell";
  }
  return "auto";
}

template <class T>
bool strictly_decreasing(const std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

} // namespace

MediumEnsemble ExperimentConfig::ensemble() const {
  auto a = std::make_shared<EnsembleSpec>();
  a->dim = dim;
  a->cells = cells;
  a->random_shift = random_shift;
  a->period = period;
  a->seed = seed;
  MediumEnsemble ens{a, nullptr};
  if (weight) {
    auto w = std::make_shared<EnsembleSpec>(*a);
    w->cells = *weight;
    w->seed = detail::mix64(seed ^ kWeightSeedSalt);
    ens.weight = w;
  }
  return ens;
}

MediumEnsemble ExperimentConfig::ergodic_ensemble() const {
  ExperimentConfig c = *this;
  c.period.reset();
  return c.ensemble();
}

void ExperimentConfig::validate() const {
  require(dim == 1 || dim == 2, "[ensemble] dim must be 1 or 2");
  cells.validate();
  if (weight) weight->validate();
  if (period) require(*period >= 1, "[ensemble] period must be >= 1");
  integrand.validate();
  if (integrand.form == IntegrandForm::degenerate_weighted)
    require(weight.has_value(), "degenerate-weighted integrand needs a weight distribution");
  else
    require(!weight.has_value(), "a weight distribution needs form = degenerate-weighted");
  require(!eps.empty(), "[study] eps list is empty");
  require(strictly_decreasing(eps), "[study] eps list must be strictly decreasing");
  require(mesh_per_eps >= 1, "[study] mesh_per_eps must be >= 1");
  for (double e : eps) {
    require(e > 0.0 && e <= 1.0, "[study] eps values must lie in (0, 1]");
    const double n = mesh_per_eps / e;
    require(std::abs(n - std::round(n)) <= 1e-9 * n && std::round(n) >= 2,
            "[study] mesh_per_eps / eps must be an integer >= 2 (eps = 1/integer)");
  }
  require(strictly_decreasing(delta), "[study] delta list must be strictly decreasing");
  for (double d : delta) require(d >= 0.0, "[study] delta values must be >= 0");
  require(!L.empty(), "[study] L list is empty");
  for (std::size_t i = 0; i < L.size(); ++i) {
    require(L[i] >= 1, "[study] L values must be >= 1");
    if (i) require(L[i] > L[i - 1], "[study] L list must be strictly increasing");
  }
  require(!F.empty(), "[study] F list is empty");
  require(realizations >= 1, "[study] realizations must be >= 1");
  require(reference_n == 0 || reference_n >= 2, "[study] reference_n must be >= 2");
  require(n_per_cell >= 4, "[study] n_per_cell must be >= 4");
  require(cell_samples >= 1, "[study] cell_samples must be >= 1");
  require(directions == 0 || directions >= 3, "[study] directions must be >= 3");
  require(linkage_threshold() >= 0.0, "[study] linkage_tol must be >= 0");
  require(diagram_tol > 0.0, "[study] diagram_tol must be positive");
  require(corrector_samples >= 1, "[study] corrector_samples must be >= 1");
  require(moment_samples >= 2, "[study] moment_samples must be >= 2");
  require(solver.tol > 0.0, "[solver] tol must be positive");
  require(solver.max_iter >= 1, "[solver] max_iter must be >= 1");
  require(dictionary.max_entries >= 1, "[dictionary] max_entries must be >= 1");
}

std::string ExperimentConfig::resolved() const {
  std::ostringstream os;
  os << "[ensemble]\n";
  os << "dim = " << dim << "\n";
  os << "distribution = " << kind_name(cells) << "\n";
  write_distribution(os, cells, "");
  os << "random_shift = " << (random_shift ? "true" : "false") << "\n";
  os << "period = " << (period ? std::to_string(*period) : "none") << "\n";
  os << "seed = " << seed << "\n";
  if (weight) {
    os << "weight = " << kind_name(*weight) << "\n";
    write_distribution(os, *weight, "weight_");
  } else {
    os << "weight = none\n";
  }
  os << "\n[integrand]\n";
  os << "form = " << to_string(integrand.form) << "\n";
  os << "p = " << format_number(integrand.p) << "\n";
  os << "modulation = " << format_number(integrand.modulation.amplitude) << "\n";
  os << "load = " << format_number(load) << "\n";
  os << "\n[study]\n";
  os << "kind = " << kind << "\n";
  os << "eps = " << join(eps) << "\n";
  os << "delta = " << join(delta) << "\n";
  os << "L = ";
  for (std::size_t i = 0; i < L.size(); ++i) os << (i ? ", " : "") << L[i];
  os << "\nF = ";
  for (std::size_t i = 0; i < F.size(); ++i) {
    os << (i ? "; " : "") << format_number(F[i][0]);
    if (dim == 2) os << ' ' << format_number(F[i][1]);
  }
  os << "\nrealizations = " << realizations << "\n";
  os << "mesh_per_eps = " << mesh_per_eps << "\n";
  os << "reference_n = " << reference_mesh() << "\n";
  os << "n_per_cell = " << n_per_cell << "\n";
  os << "cell_samples = " << cell_samples << "\n";
  os << "directions = " << direction_count() << "\n";
  os << "reference = " << reference_name(reference) << "\n";
  os << "linkage_tol = " << format_number(linkage_threshold()) << "\n";
  os << "diagram_tol = " << format_number(diagram_tol) << "\n";
  os << "pairing = " << (pairing_mode == PairingMode::gradient ? "gradient" : "function") << "\n";
  os << "corrector_samples = " << corrector_samples << "\n";
  os << "contrast = " << (contrast ? "true" : "false") << "\n";
  os << "moment_samples = " << moment_samples << "\n";
  os << "\n[solver]\n";
  os << "tol = " << format_number(solver.tol) << "\n";
  os << "max_iter = " << solver.max_iter << "\n";
  os << "method = " << method_name(solver.method) << "\n";
  os << "\n[dictionary]\n";
  os << "probe_radius = " << dictionary.probe_radius << "\n";
  os << "cosine_degree = " << dictionary.cosine_degree << "\n";
  os << "max_entries = " << dictionary.max_entries << "\n";
  os << "mc_samples = " << dictionary.mc_samples << "\n";
  os << "seed = " << dictionary.seed << "\n";
  return os.str();
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  const auto& known = known_keys();
  for (const auto& [section, body] : tree) {
    auto it = known.find(section);
    require(it != known.end() && !body.empty(), "config: unknown section or top-level key '" + section + "'");
    for (const auto& [key, value] : body)
      require(it->second.count(key) == 1, "config: unknown key '" + key + "' in [" + section + "]");
  }

  ExperimentConfig c;
  auto sec = [&](const std::string& name) {
    static const pt::ptree empty;
    auto child = tree.get_child_optional(name);
    return child ? *child : empty;
  };

  const pt::ptree ens = sec("ensemble");
  auto str = [](const pt::ptree& s, const std::string& k) { return s.get_optional<std::string>(k); };
  if (auto v = str(ens, "dim")) c.dim = static_cast<int>(parse_int("dim", *v));
  if (auto v = str(ens, "distribution"))
    c.cells = parse_distribution(ens, "", trim(*v));
  else if (str(ens, "values"))
    c.cells = parse_distribution(ens, "", "discrete");
  if (auto v = str(ens, "random_shift")) c.random_shift = parse_bool("random_shift", *v);
  if (auto v = str(ens, "period"); v && trim(*v) != "none") c.period = static_cast<int>(parse_int("period", *v));
  if (auto v = str(ens, "seed")) c.seed = parse_u64("seed", *v);
  if (auto v = str(ens, "weight"); v && trim(*v) != "none") c.weight = parse_distribution(ens, "weight_", trim(*v));

  const pt::ptree in = sec("integrand");
  if (auto v = str(in, "form")) c.integrand.form = parse_integrand_form(trim(*v));
  if (auto v = str(in, "p")) c.integrand.p = parse_double("p", *v);
  if (auto v = str(in, "modulation")) c.integrand.modulation.amplitude = parse_double("modulation", *v);
  if (auto v = str(in, "load")) c.load = parse_double("load", *v);

  const pt::ptree st = sec("study");
  if (auto v = str(st, "kind")) c.kind = trim(*v);
  if (auto v = str(st, "eps")) c.eps = parse_doubles("eps", *v);
  if (auto v = str(st, "delta")) c.delta = parse_doubles("delta", *v);
  if (auto v = str(st, "L")) {
    c.L.clear();
    for (const auto& t : split(*v, ',')) c.L.push_back(static_cast<int>(parse_int("L", t)));
  }
  if (auto v = str(st, "F")) {
    c.F.clear();
    for (const auto& t : split(*v, ';')) {
      std::istringstream is(t);
      std::vector<double> comps;
      std::string tok;
      while (is >> tok) comps.push_back(parse_double("F", tok));
      require(comps.size() == 1 || comps.size() == 2, "[study] each F needs one or two components");
      c.F.push_back({comps[0], comps.size() == 2 ? comps[1] : 0.0});
    }
  }
  if (auto v = str(st, "realizations")) c.realizations = static_cast<int>(parse_int("realizations", *v));
  if (auto v = str(st, "mesh_per_eps")) c.mesh_per_eps = static_cast<int>(parse_int("mesh_per_eps", *v));
  if (auto v = str(st, "reference_n")) c.reference_n = static_cast<int>(parse_int("reference_n", *v));
  if (auto v = str(st, "n_per_cell")) c.n_per_cell = static_cast<int>(parse_int("n_per_cell", *v));
  if (auto v = str(st, "cell_samples")) c.cell_samples = static_cast<int>(parse_int("cell_samples", *v));
  if (auto v = str(st, "directions")) c.directions = static_cast<int>(parse_int("directions", *v));
  if (auto v = str(st, "reference")) {
    const std::string r = trim(*v);
    if (r == "auto") c.reference = ReferenceKind::automatic;
    else if (r == "exact") c.reference = ReferenceKind::exact;
    else if (r == "cell") c.reference = ReferenceKind::cell;
    else throw ValidationError("[study] reference must be auto, exact or cell");
  }
  if (auto v = str(st, "linkage_tol")) c.linkage_tol = parse_double("linkage_tol", *v);
  if (auto v = str(st, "diagram_tol")) c.diagram_tol = parse_double("diagram_tol", *v);
  if (auto v = str(st, "pairing")) {
    const std::string m = trim(*v);
    require(m == "function" || m == "gradient", "[study] pairing must be function or gradient");
    c.pairing_mode = m == "function" ? PairingMode::function : PairingMode::gradient;
  }
  if (auto v = str(st, "corrector_samples")) c.corrector_samples = static_cast<int>(parse_int("corrector_samples", *v));
  if (auto v = str(st, "contrast")) c.contrast = parse_bool("contrast", *v);
  if (auto v = str(st, "moment_samples")) c.moment_samples = static_cast<int>(parse_int("moment_samples", *v));

  const pt::ptree so = sec("solver");
  if (auto v = str(so, "tol")) {
    c.solver.tol = parse_double("tol", *v);
    c.tol_given = true;
  }
  if (auto v = str(so, "max_iter")) c.solver.max_iter = static_cast<int>(parse_int("max_iter", *v));
  if (auto v = str(so, "method")) {
    const std::string m = trim(*v);
    if (m == "automatic") c.solver.method = Method::automatic;
    else if (m == "linear-cg") c.solver.method = Method::linear_cg;
    else if (m == "nonlinear-cg") c.solver.method = Method::nonlinear_cg;
    else throw ValidationError("[solver] method must be automatic, linear-cg or nonlinear-cg");
  }
  if (!c.tol_given) c.solver.tol = c.integrand.exponent() == 2.0 ? 1e-8 : 1e-6;

  const pt::ptree di = sec("dictionary");
  if (auto v = str(di, "probe_radius")) c.dictionary.probe_radius = static_cast<int>(parse_int("probe_radius", *v));
  if (auto v = str(di, "cosine_degree")) c.dictionary.cosine_degree = static_cast<int>(parse_int("cosine_degree", *v));
  if (auto v = str(di, "max_entries")) {
    const long long m = parse_int("max_entries", *v);
    require(m >= 1, "[dictionary] max_entries must be >= 1");
    c.dictionary.max_entries = static_cast<std::size_t>(m);
  }
  if (auto v = str(di, "mc_samples")) c.dictionary.mc_samples = static_cast<int>(parse_int("mc_samples", *v));
  if (auto v = str(di, "seed")) c.dictionary.seed = parse_u64("dictionary seed", *v);

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

} // namespace homoglab
