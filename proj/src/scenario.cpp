#include "kahlerlab/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "kahlerlab/errors.hpp"
#include "kahlerlab/families.hpp"

namespace kl {

namespace {

const std::vector<std::string> kOrtho{"orthotoric"};
const std::vector<std::string> kCalabi{"calabi_type"};
const std::vector<std::string> kHirz{"hirzebruch"};
const std::vector<std::string> kProduct{"kahler_product"};
const std::vector<std::string> kPreset{"toric", "ak_lebrun"};

}  // namespace

const std::vector<std::string>& family_kinds() {
  static const std::vector<std::string> k{"orthotoric", "toric", "calabi_type", "hirzebruch", "ak_lebrun",
                                          "kahler_product"};
  return k;
}

const std::vector<SchemaKey>& scenario_schema() {
  static const std::vector<SchemaKey> s{
      {"scenario", "name", KeyType::string, {}, true, "identifier used in reports"},
      {"scenario", "description", KeyType::string, {}, false, "free text"},
      {"family", "family", KeyType::string, {}, true,
       "orthotoric | toric | calabi_type | hirzebruch | ak_lebrun | kahler_product"},
      {"family", "label", KeyType::string, {}, false, "instance label"},
      {"family", "box_lo", KeyType::vector4, {}, false,
       "lower box corner; required with box_hi for orthotoric, toric and calabi_type"},
      {"family", "box_hi", KeyType::vector4, {}, false, "upper box corner"},
      {"family", "k", KeyType::number, kOrtho, false, "extremal quartic coefficient of x^4"},
      {"family", "l", KeyType::number, kOrtho, false, "extremal quartic coefficient of x^3"},
      {"family", "A", KeyType::number, kOrtho, false, "extremal quartic coefficient of x^2"},
      {"family", "B1", KeyType::number, kOrtho, false, "linear coefficient of F"},
      {"family", "B2", KeyType::number, kOrtho, false, "linear coefficient of G"},
      {"family", "C1", KeyType::number, kOrtho, false, "constant term of F"},
      {"family", "C2", KeyType::number, kOrtho, false, "constant term of G"},
      {"family", "F", KeyType::number_list, kOrtho, false,
       "general F, coefficients in descending degree (excludes k, l, A, B1, B2, C1, C2)"},
      {"family", "G", KeyType::number_list, kOrtho, false, "general G, coefficients in descending degree"},
      {"family", "phi_trace", KeyType::number, kOrtho, false,
       "coefficient c in phi = 1/2 (xi - eta) omega_I + c (xi + eta) omega (default 1.5)"},
      {"family", "A1", KeyType::number, kCalabi, true, "profile coefficient of z^4"},
      {"family", "A2", KeyType::number, kCalabi, true, "profile coefficient of z^3"},
      {"family", "A3", KeyType::number, kCalabi, true, "profile coefficient of z"},
      {"family", "A4", KeyType::number, kCalabi, true, "profile constant term"},
      {"family", "eps", KeyType::number, kCalabi, false, "curvature of the base (default 1)"},
      {"family", "chart", KeyType::string, kCalabi, false, "sigma | bianchi_nil (default sigma)"},
      {"family", "a", KeyType::number, kHirz, true, "Kahler class parameter, 0 < a < b"},
      {"family", "b", KeyType::number, kHirz, true, "Kahler class parameter"},
      {"family", "hk", KeyType::integer, kHirz, false, "Hirzebruch index k >= 1 (default 1)"},
      {"family", "force_numeric", KeyType::boolean, kHirz, false, "integrate psi even when a closed form exists"},
      {"family", "preset", KeyType::string, kPreset, true,
       "toric: guillemin | non_hessian; ak_lebrun: example2 | constant_h | generic_u"},
      {"family", "k1", KeyType::number, kProduct, true, "curvature of the first factor"},
      {"family", "k2", KeyType::number, kProduct, true, "curvature of the second factor"},
      {"suite", "suites", KeyType::name_list, {}, true,
       "kahler, weak_sd, extremal, biextremal, bach, hamiltonian, almost_kahler, lagrangian"},
      {"suite", "samples", KeyType::integer, {}, false, "samples per box (default 64)"},
      {"suite", "seed", KeyType::integer, {}, false, "sampling seed"},
      {"suite", "identity_tol", KeyType::number, {}, false, "default 1e-8"},
      {"suite", "zero_tol", KeyType::number, {}, false, "default 1e-9"},
      {"suite", "nonzero_floor", KeyType::number, {}, false, "default 1e-3"},
      {"suite", "constancy_tol", KeyType::number, {}, false, "default 1e-7"},
      {"suite", "constants", KeyType::name_list, {}, false, "kappa_lambda3, p_affine_in_s, wminus_over_kappa"},
      {"suite", "kappa_lambda3", KeyType::number, {}, false, "expected value of the kappa_lambda3 constant"},
      {"suite", "p_affine_in_s", KeyType::number, {}, false, "expected slope of p against s"},
      {"suite", "wminus_over_kappa", KeyType::number, {}, false, "expected ratio of the W- simple eigenvalue to kappa"},
      {"suite", "classify", KeyType::string, {}, false, "expected classification verdict"},
      {"suite", "fields", KeyType::name_list, {}, false, "default field list for scan"},
      {"suite", "report", KeyType::string, {}, false, "report output path"},
      {"suite", "table", KeyType::string, {}, false, "scan output path"},
  };
  return s;
}

namespace {

std::string where(const std::string& origin, const std::string& section, const std::string& key) {
  return origin + ": [" + section + "] " + key;
}

double parse_number(const std::string& raw, const std::string& ctx) {
  const std::string t = boost::algorithm::trim_copy(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(ctx + ": expected a number, got '" + raw + "'");
  return v;
}

long long parse_integer(const std::string& raw, const std::string& ctx) {
  const std::string t = boost::algorithm::trim_copy(raw);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(ctx + ": expected an integer, got '" + raw + "'");
  return v;
}

bool parse_bool(const std::string& raw, const std::string& ctx) {
  const std::string t = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(raw));
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw ConfigError(ctx + ": expected true or false, got '" + raw + "'");
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, raw, boost::algorithm::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::algorithm::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& raw, const std::string& ctx) {
  std::vector<double> out;
  for (const auto& p : split_list(raw)) out.push_back(parse_number(p, ctx));
  if (out.empty()) throw ConfigError(ctx + ": empty list");
  return out;
}

void check_type(const SchemaKey& k, const std::string& raw, const std::string& ctx) {
  switch (k.type) {
    case KeyType::string:
      if (boost::algorithm::trim_copy(raw).empty()) throw ConfigError(ctx + ": empty value");
      break;
    case KeyType::number: parse_number(raw, ctx); break;
    case KeyType::integer: parse_integer(raw, ctx); break;
    case KeyType::boolean: parse_bool(raw, ctx); break;
    case KeyType::vector4:
      if (parse_numbers(raw, ctx).size() != 4) throw ConfigError(ctx + ": expected 4 numbers");
      break;
    case KeyType::number_list: parse_numbers(raw, ctx); break;
    case KeyType::name_list:
      if (split_list(raw).empty()) throw ConfigError(ctx + ": empty list");
      break;
  }
}

const SchemaKey* find_key(const std::string& section, const std::string& key) {
  for (const auto& k : scenario_schema())
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

bool applies(const SchemaKey& k, const std::string& family) {
  return k.families.empty() || std::find(k.families.begin(), k.families.end(), family) != k.families.end();
}

}  // namespace

Scenario parse_scenario(std::istream& in, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": line " + std::to_string(e.line()) + ": " + e.message());
  }

  std::map<std::string, std::map<std::string, std::string>> values;
  for (const auto& [section, body] : tree) {
    if (section != "scenario" && section != "family" && section != "suite") {
      if (body.empty()) throw ConfigError(origin + ": key '" + section + "' outside a section");
      throw ConfigError(origin + ": unknown section [" + section + "]");
    }
    for (const auto& [key, node] : body) {
      if (!node.empty()) throw ConfigError(where(origin, section, key) + ": nested values are not allowed");
      values[section][key] = node.data();
    }
  }

  Scenario sc;
  sc.origin = origin;
  auto& fam = values["family"];
  if (!fam.count("family")) throw ConfigError(where(origin, "family", "family") + ": missing key");
  sc.family = boost::algorithm::trim_copy(fam["family"]);
  const auto& kinds = family_kinds();
  if (std::find(kinds.begin(), kinds.end(), sc.family) == kinds.end())
    throw ConfigError(where(origin, "family", "family") + ": unknown family '" + sc.family + "'");

  for (const auto& [section, kv] : values)
    for (const auto& [key, raw] : kv) {
      const SchemaKey* k = find_key(section, key);
      const std::string ctx = where(origin, section, key);
      if (!k) throw ConfigError(ctx + ": unknown key");
      if (!applies(*k, sc.family)) throw ConfigError(ctx + ": key does not apply to family " + sc.family);
      check_type(*k, raw, ctx);
    }
  for (const auto& k : scenario_schema())
    if (k.required && applies(k, sc.family) && !values[k.section].count(k.key))
      throw ConfigError(where(origin, k.section, k.key) + ": missing key");

  const bool has_lo = fam.count("box_lo") > 0, has_hi = fam.count("box_hi") > 0;
  if (has_lo != has_hi)
    throw ConfigError(where(origin, "family", has_lo ? "box_hi" : "box_lo") + ": missing key");
  if (!has_lo && (sc.family == "orthotoric" || sc.family == "toric" || sc.family == "calabi_type"))
    throw ConfigError(where(origin, "family", "box_lo") + ": missing key");

  if (sc.family == "orthotoric") {
    const bool general = fam.count("F") || fam.count("G");
    static const std::vector<std::string> quartic{"k", "l", "A", "B1", "B2", "C1", "C2"};
    if (general) {
      for (const auto& q : quartic)
        if (fam.count(q)) throw ConfigError(where(origin, "family", q) + ": not allowed together with F, G");
      for (const char* fg : {"F", "G"})
        if (!fam.count(fg)) throw ConfigError(where(origin, "family", fg) + ": missing key");
    } else {
      if (fam.count("phi_trace")) throw ConfigError(where(origin, "family", "phi_trace") + ": only with F, G");
      for (const auto& q : quartic)
        if (!fam.count(q)) throw ConfigError(where(origin, "family", q) + ": missing key");
    }
  }
  sc.family_keys = fam;

  auto& meta = values["scenario"];
  sc.name = boost::algorithm::trim_copy(meta["name"]);
  if (meta.count("description")) sc.description = boost::algorithm::trim_copy(meta["description"]);

  auto& su = values["suite"];
  const auto sctx = [&](const std::string& k) { return where(origin, "suite", k); };
  for (const auto& name : split_list(su["suites"])) {
    try {
      sc.suites.push_back(parse_suite(name));
    } catch (const ConfigError& e) {
      throw ConfigError(sctx("suites") + ": " + e.what());
    }
  }
  if (su.count("samples")) {
    const long long n = parse_integer(su["samples"], sctx("samples"));
    if (n < 17 || n > 1000000) throw ConfigError(sctx("samples") + ": must lie in [17, 1000000]");
    sc.tol.samples_per_box = static_cast<int>(n);
  }
  if (su.count("seed")) {
    const long long s = parse_integer(su["seed"], sctx("seed"));
    if (s < 0) throw ConfigError(sctx("seed") + ": must be non-negative");
    sc.tol.rng_seed = static_cast<std::uint64_t>(s);
    sc.seed_given = true;
  }
  if (su.count("identity_tol")) sc.tol.identity_tol = parse_number(su["identity_tol"], sctx("identity_tol"));
  if (su.count("zero_tol")) sc.tol.zero_tol = parse_number(su["zero_tol"], sctx("zero_tol"));
  if (su.count("nonzero_floor")) sc.tol.nonzero_floor = parse_number(su["nonzero_floor"], sctx("nonzero_floor"));
  if (su.count("constancy_tol")) sc.tol.constancy_tol = parse_number(su["constancy_tol"], sctx("constancy_tol"));
  try {
    sc.tol.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": [suite] " + e.what());
  }
  if (su.count("constants"))
    for (const auto& name : split_list(su["constants"])) {
      try {
        sc.constants.push_back(parse_constant_expr(name));
      } catch (const ConfigError& e) {
        throw ConfigError(sctx("constants") + ": " + e.what());
      }
    }
  for (ConstantExpr e : {ConstantExpr::kappa_lambda3, ConstantExpr::p_affine_in_s, ConstantExpr::wminus_over_kappa}) {
    const std::string key = to_string(e);
    if (!su.count(key)) continue;
    if (std::find(sc.constants.begin(), sc.constants.end(), e) == sc.constants.end())
      throw ConfigError(sctx(key) + ": expected value given but '" + key + "' is not in constants");
    sc.expected_constants[e] = parse_number(su[key], sctx(key));
  }
  if (su.count("classify")) {
    const std::string c = boost::algorithm::trim_copy(su["classify"]);
    bool known = false;
    for (Classification k : {Classification::einstein, Classification::parallel_ricci_product,
                             Classification::selfdual_nonconstant_s, Classification::degenerate_wminus,
                             Classification::none})
      known = known || c == to_string(k);
    if (!known) throw ConfigError(sctx("classify") + ": unknown verdict '" + c + "'");
    sc.expected_class = c;
  }
  if (su.count("fields")) sc.fields = split_list(su["fields"]);
  if (su.count("report")) sc.report_path = boost::algorithm::trim_copy(su["report"]);
  if (su.count("table")) sc.table_path = boost::algorithm::trim_copy(su["table"]);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  return parse_scenario(in, path);
}

namespace {

class Keys {
 public:
  Keys(const Scenario& sc) : sc_(sc) {}

  bool has(const std::string& k) const { return sc_.family_keys.count(k) > 0; }
  std::string ctx(const std::string& k) const { return where(sc_.origin, "family", k); }
  double num(const std::string& k) const { return parse_number(sc_.family_keys.at(k), ctx(k)); }
  double num(const std::string& k, double def) const { return has(k) ? num(k) : def; }
  std::string str(const std::string& k) const { return boost::algorithm::trim_copy(sc_.family_keys.at(k)); }
  std::vector<double> list(const std::string& k) const { return parse_numbers(sc_.family_keys.at(k), ctx(k)); }

  std::optional<Box> box() const {
    if (!has("box_lo")) return std::nullopt;
    const auto lo = list("box_lo"), hi = list("box_hi");
    Box b;
    for (int i = 0; i < 4; ++i) {
      b.lo[i] = lo[static_cast<std::size_t>(i)];
      b.hi[i] = hi[static_cast<std::size_t>(i)];
      if (!(b.lo[i] < b.hi[i])) throw ConfigError(ctx("box_hi") + ": each upper bound must exceed the lower bound");
    }
    return b;
  }

  std::string label(const std::string& def) const { return has("label") ? str("label") : def; }

 private:
  const Scenario& sc_;
};

FamilyInstance build_orthotoric(const Keys& k) {
  const Box box = *k.box();
  if (k.has("F")) {
    OrthotoricParams p;
    p.F = Polynomial(k.list("F"));
    p.G = Polynomial(k.list("G"));
    p.box = box;
    p.phi_trace = k.num("phi_trace", p.phi_trace);
    p.label = k.label(p.label);
    return orthotoric(p);
  }
  ExtremalQuartics q;
  q.k = k.num("k");
  q.l = k.num("l");
  q.A = k.num("A");
  q.B1 = k.num("B1");
  q.B2 = k.num("B2");
  q.C1 = k.num("C1");
  q.C2 = k.num("C2");
  return orthotoric_extremal(q, box, k.label("orthotoric"));
}

FamilyInstance build_toric(const Keys& k) {
  ToricParams p;
  p.box = *k.box();
  const std::string preset = k.str("preset");
  using G2 = std::array<std::array<Jet, 2>, 2>;
  if (preset == "guillemin") {
    p.G = [](const Jet& x1, const Jet& x2) {
      const Jet zero(0.0, x1.order());
      return G2{{{0.5 * reciprocal(x1), zero}, {zero, 0.5 * reciprocal(x2)}}};
    };
  } else if (preset == "non_hessian") {
    p.G = [](const Jet& x1, const Jet&) {
      const Jet zero(0.0, x1.order());
      return G2{{{Jet(1.0, x1.order()), zero}, {zero, 1.0 + x1}}};
    };
  } else {
    throw ConfigError(k.ctx("preset") + ": unknown toric preset '" + preset + "'");
  }
  p.label = k.label(preset);
  return toric(p);
}

FamilyInstance build_calabi(const Keys& k) {
  CalabiParams p;
  p.A1 = k.num("A1");
  p.A2 = k.num("A2");
  p.A3 = k.num("A3");
  p.A4 = k.num("A4");
  p.eps = k.num("eps", 1.0);
  if (k.has("chart")) {
    const std::string c = k.str("chart");
    if (c == "sigma") p.chart = CalabiChart::sigma;
    else if (c == "bianchi_nil") p.chart = CalabiChart::bianchi_nil;
    else throw ConfigError(k.ctx("chart") + ": unknown chart '" + c + "'");
  }
  p.box = *k.box();
  p.label = k.label(p.label);
  return calabi_type(p);
}

FamilyInstance build_hirzebruch(const Keys& k, const Scenario& sc) {
  HirzebruchParams p;
  p.a = k.num("a");
  p.b = k.num("b");
  if (k.has("hk")) {
    const long long hk = parse_integer(sc.family_keys.at("hk"), k.ctx("hk"));
    if (hk < 1 || hk > 1000) throw ConfigError(k.ctx("hk") + ": must be an integer >= 1");
    p.k = static_cast<int>(hk);
  }
  if (!(0.0 < p.a && p.a < p.b)) throw ConfigError(k.ctx("b") + ": need 0 < a < b");
  if (k.has("force_numeric")) p.force_numeric = parse_bool(sc.family_keys.at("force_numeric"), k.ctx("force_numeric"));
  if (auto b = k.box()) p.box = *b;
  p.label = k.label(p.label);
  return hirzebruch(p).instance;
}

FamilyInstance build_ak(const Keys& k) {
  const std::string preset = k.str("preset");
  AKParams p;
  if (preset == "example2") p = ak_example2();
  else if (preset == "constant_h") p = ak_constant_h();
  else if (preset == "generic_u") p = ak_generic_u();
  else throw ConfigError(k.ctx("preset") + ": unknown ak_lebrun preset '" + preset + "'");
  if (auto b = k.box()) p.box = *b;
  p.label = k.label(preset);
  return ak_lebrun(p);
}

FamilyInstance build_product(const Keys& k) {
  ProductParams p;
  p.k1 = k.num("k1");
  p.k2 = k.num("k2");
  if (auto b = k.box()) p.box = *b;
  p.label = k.label(p.label);
  return kahler_product(p);
}

}  // namespace

FamilyInstance build_instance(const Scenario& sc) {
  const Keys k(sc);
  if (sc.family == "orthotoric") return build_orthotoric(k);
  if (sc.family == "toric") return build_toric(k);
  if (sc.family == "calabi_type") return build_calabi(k);
  if (sc.family == "hirzebruch") return build_hirzebruch(k, sc);
  if (sc.family == "ak_lebrun") return build_ak(k);
  if (sc.family == "kahler_product") return build_product(k);
  throw ConfigError(sc.origin + ": unknown family '" + sc.family + "'");
}

}  // namespace kl
