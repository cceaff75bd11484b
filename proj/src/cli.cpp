#include "kahlerlab/cli.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "kahlerlab/curvature.hpp"
#include "kahlerlab/errors.hpp"
#include "kahlerlab/families.hpp"

namespace kl {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string point(const Point& p) {
  return "(" + num(p[0]) + "," + num(p[1]) + "," + num(p[2]) + "," + num(p[3]) + ")";
}

const char* constant_tag(ConstantExpr e) {
  switch (e) {
    case ConstantExpr::kappa_lambda3: return "Ckappa";
    case ConstantExpr::p_affine_in_s: return "monoextremal";
    case ConstantExpr::wminus_over_kappa: return "propkappa";
  }
  return "?";
}

// Opens the requested output file or falls back to the given stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty()) return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw ConfigError(path + ": cannot open for writing");
    os_ = file_.get();
  }
  std::ostream& operator*() { return *os_; }
  bool to_file() const { return file_ != nullptr; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

std::uint64_t resolve_seed(const CliOptions& opt, const Scenario& sc) {
  if (opt.seed) return *opt.seed;
  if (sc.seed_given) return sc.tol.rng_seed;
  if (const char* env = std::getenv(kSeedEnv)) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || end == env || *end != '\0')
      throw ConfigError(std::string(kSeedEnv) + ": expected a non-negative integer, got '" + env + "'");
    return v;
  }
  return kDefaultSeed;
}

ToleranceConfig effective_tolerances(const CliOptions& opt, const Scenario& sc) {
  ToleranceConfig t = sc.tol;
  if (opt.tol) t.identity_tol = *opt.tol;
  if (opt.samples) t.samples_per_box = *opt.samples;
  if (opt.threads) t.threads = *opt.threads;
  t.rng_seed = resolve_seed(opt, sc);
  t.validate();
  return t;
}

const std::vector<std::pair<std::string, int>>& scan_fields() {
  static const std::vector<std::pair<std::string, int>> f{
      {"s", 2},          {"p", 2},           {"mu", 2},          {"kappa", 4},          {"lambda", 2},
      {"Wminus_norm", 2}, {"Cminus_norm", 3}, {"bach_norm", 4},   {"nijenhuis_norm", 2}, {"lagrangian_spread", 2},
  };
  return f;
}

VerifyOutcome run_verify(const Scenario& sc, const FamilyInstance& inst, const ToleranceConfig& tol) {
  VerifyOutcome o;
  o.checks = run_suites(inst, sc.suites, tol);
  bool fail = false;
  for (const auto& c : o.checks) fail = fail || c.verdict == Verdict::fail;
  for (ConstantExpr e : sc.constants) {
    o.constants.push_back(extract_constant(inst, e, tol));
    const ConstantFit& f = o.constants.back();
    fail = fail || f.verdict == Verdict::fail;
    const auto it = sc.expected_constants.find(e);
    if (it != sc.expected_constants.end() &&
        (f.verdict == Verdict::not_applicable ||
         std::abs(f.constant - it->second) > tol.constancy_tol * std::max(1.0, std::abs(it->second))))
      fail = true;
  }
  if (sc.expected_class) {
    o.classification = classify(inst, tol);
    fail = fail || o.classification->ambiguous || *sc.expected_class != to_string(o.classification->verdict);
  }
  o.exit_code = fail ? kExitFail : kExitPass;
  return o;
}

void write_report(std::ostream& os, const Scenario& sc, const FamilyInstance& inst, const ToleranceConfig& tol,
                  const VerifyOutcome& o) {
  os << "# kahlerlab verify report\n";
  os << "scenario " << sc.name << "\n";
  os << "family " << inst.family << " label " << inst.label << "\n";
  os << "samples " << tol.samples_per_box << " seed " << tol.rng_seed << "\n";
  os << "tolerances identity=" << num(tol.identity_tol) << " zero=" << num(tol.zero_tol)
     << " nonzero_floor=" << num(tol.nonzero_floor) << " constancy=" << num(tol.constancy_tol) << "\n";
  int pass = 0, fail = 0, na = 0;
  auto count = [&](Verdict v) {
    if (v == Verdict::pass) ++pass;
    else if (v == Verdict::fail) ++fail;
    else ++na;
  };
  for (const auto& c : o.checks) {
    count(c.verdict);
    os << "check " << c.suite << "/" << c.name << " tag=" << c.tag;
    if (c.bound == Bound::upper) {
      os << " bound=upper tol=" << num(c.tolerance) << " max=" << num(c.max) << " mean=" << num(c.mean);
    } else {
      os << " bound=lower floor=" << num(c.tolerance) << " min=" << num(c.min) << " mean=" << num(c.mean)
         << " fraction=" << num(c.fraction) << " required=" << num(c.required_fraction);
    }
    os << " evaluated=" << c.evaluated << " skipped=" << c.skipped;
    if (c.evaluated > 0) os << " worst=" << point(c.worst);
    os << " verdict=" << to_string(c.verdict);
    if (!c.note.empty()) os << " note=\"" << c.note << "\"";
    os << "\n";
  }
  for (const auto& f : o.constants) {
    Verdict v = f.verdict;
    os << "constant " << to_string(f.expr) << " tag=" << constant_tag(f.expr);
    if (f.verdict != Verdict::not_applicable) {
      os << " value=" << num(f.constant) << " spread=" << num(f.spread) << " tol=" << num(tol.constancy_tol);
      if (f.expr == ConstantExpr::p_affine_in_s) os << " intercept=" << num(f.intercept);
      if (f.alt_constant) os << " alt_value=" << num(*f.alt_constant) << " alt_spread=" << num(*f.alt_spread);
    }
    const auto it = sc.expected_constants.find(f.expr);
    if (it != sc.expected_constants.end()) {
      os << " expected=" << num(it->second);
      if (f.verdict != Verdict::not_applicable) {
        const double dev = std::abs(f.constant - it->second) / std::max(1.0, std::abs(it->second));
        os << " deviation=" << num(dev);
        if (dev > tol.constancy_tol) v = Verdict::fail;
      } else {
        v = Verdict::fail;
      }
    }
    count(v);
    os << " verdict=" << to_string(v);
    if (!f.note.empty()) os << " note=\"" << f.note << "\"";
    os << "\n";
  }
  if (o.classification) {
    const auto& c = *o.classification;
    for (const auto& e : c.evidence)
      os << "evidence classify/" << e.name << " tag=" << e.tag << " max=" << num(e.max) << " min=" << num(e.min)
         << " fraction_zero=" << num(e.fraction) << "\n";
    const bool ok = !c.ambiguous && sc.expected_class && *sc.expected_class == to_string(c.verdict);
    count(ok ? Verdict::pass : Verdict::fail);
    os << "classify tag=prop:tri verdict=" << to_string(c.verdict) << " expected=" << *sc.expected_class
       << " ambiguous=" << (c.ambiguous ? "yes" : "no") << " result=" << (ok ? "pass" : "fail") << " detail=\""
       << c.detail << " (on sampled domain)\"\n";
  }
  os << "summary pass=" << pass << " fail=" << fail << " not-applicable=" << na << " exit=" << o.exit_code << "\n";
}

int cmd_verify(const std::string& scenario, const CliOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = load_scenario(scenario);
    const ToleranceConfig tol = effective_tolerances(opt, sc);
    const FamilyInstance inst = build_instance(sc);
    const VerifyOutcome o = run_verify(sc, inst, tol);
    Sink sink(opt.out ? *opt.out : sc.report_path, out);
    write_report(*sink, sc, inst, tol, o);
    if (sink.to_file())
      out << sc.name << ": " << (o.exit_code == kExitPass ? "pass" : "fail") << "\n";
    return o.exit_code;
  });
}

namespace {

std::optional<double> scan_value(const std::string& field, const CurvatureBundle& b, std::uint64_t seed) {
  try {
    if (field == "s") return b.s.value();
    if (field == "p") return ricci_form_data(b).p.value();
    if (field == "mu") {
      const auto d = ricci_form_data(b);
      if (!d.mu) return std::nullopt;
      return d.mu->value();
    }
    if (field == "lambda") return ricci_form_data(b).lambda.value();
    if (field == "kappa") return conformal_scalar(b).route_rescale;
    if (field == "Wminus_norm") return norm(b, b.weyl_minus);
    if (field == "Cminus_norm") return cotton_asd_and_codiff(b).cminus_norm;
    if (field == "bach_norm") return bach_forms(b).bach_norm;
    if (field == "nijenhuis_norm") return nijenhuis_norm(b);
    if (field == "lagrangian_spread") return lagrangian_spread(b, 64, seed).spread;
  } catch (const PreconditionError&) {
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace

int cmd_scan(const std::string& scenario, const std::vector<std::string>& requested, const CliOptions& opt,
             std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = load_scenario(scenario);
    const ToleranceConfig tol = effective_tolerances(opt, sc);
    if (opt.order < 2 || opt.order > 4) throw ConfigError("--order must be 2, 3 or 4");
    const std::vector<std::string> fields = requested.empty() ? sc.fields : requested;
    if (fields.empty()) throw ConfigError("no fields requested (use --fields or [suite] fields)");
    const FamilyInstance inst = build_instance(sc);
    for (const auto& f : fields) {
      bool known = inst.extras.count(f) > 0;
      for (const auto& [name, order] : scan_fields())
        if (name == f) {
          known = true;
          if (order > opt.order)
            throw ConfigError("field '" + f + "' needs --order " + std::to_string(order));
        }
      if (!known) throw ConfigError("unknown field '" + f + "'");
    }
    const std::vector<Point> pts = sample_points(inst.box, tol.samples_per_box, tol.rng_seed);
    std::vector<std::vector<std::optional<double>>> rows(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::unique_ptr<CurvatureBundle> b;
      for (const auto& f : fields) {
        if (inst.extras.count(f)) {
          rows[i].push_back(inst.extras.at(f)(pts[i]));
          continue;
        }
        if (!b) b = curvature_bundle(inst, pts[i], opt.order);
        rows[i].push_back(scan_value(f, *b, tol.rng_seed + i));
      }
    }
    Sink sink(opt.out ? *opt.out : sc.table_path, out);
    std::ostream& os = *sink;
    for (int c = 0; c < 4; ++c) os << inst.coords[static_cast<std::size_t>(c)] << ",";
    for (std::size_t j = 0; j < fields.size(); ++j) os << fields[j] << (j + 1 < fields.size() ? "," : "\n");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (int c = 0; c < 4; ++c) os << num(pts[i][static_cast<std::size_t>(c)]) << ",";
      for (std::size_t j = 0; j < fields.size(); ++j)
        os << (rows[i][j] ? num(*rows[i][j]) : "nan") << (j + 1 < fields.size() ? "," : "\n");
    }
    return kExitPass;
  });
}

int cmd_classify(const std::string& scenario, const CliOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Scenario sc = load_scenario(scenario);
    const ToleranceConfig tol = effective_tolerances(opt, sc);
    const FamilyInstance inst = build_instance(sc);
    const ClassifyResult r = classify(inst, tol);
    Sink sink(opt.out ? *opt.out : std::string(), out);
    std::ostream& os = *sink;
    for (const auto& e : r.evidence)
      os << "evidence " << e.name << " tag=" << e.tag << " max=" << num(e.max) << " min=" << num(e.min)
         << " fraction_zero=" << num(e.fraction) << "\n";
    os << "verdict " << to_string(r.verdict) << " ambiguous=" << (r.ambiguous ? "yes" : "no") << " detail=\""
       << r.detail << " (on sampled domain)\"\n";
    if (r.ambiguous) return kExitFail;
    if (sc.expected_class && *sc.expected_class != to_string(r.verdict)) return kExitFail;
    return kExitPass;
  });
}

int cmd_table(const TableParams& p, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(p.a > 0.0 && p.a < p.b)) throw ConfigError("need 0 < a < b");
    const bool boundary = p.eps.has_value() || p.kb.has_value();
    if (boundary && !(p.eps && p.kb)) throw ConfigError("--eps and --kb must be given together");
    if (boundary && p.k) throw ConfigError("--k cannot be combined with --eps/--kb");
    if (!boundary && !p.k) throw ConfigError("table needs --k or the --eps/--kb pair");
    const int k = p.k.value_or(1);
    if (k < 1) throw ConfigError("--k must be >= 1");

    std::vector<std::pair<std::string, CalabiCoefficients>> rows;
    if (boundary) {
      rows.emplace_back("parak1", boundary_coefficients_literal(p.a, p.b, *p.eps, *p.kb));
    } else if (k == 1) {
      rows.emplace_back("calabiP", calabi_f1_coefficients(p.a, p.b));
    } else {
      rows.emplace_back("parak", calabi_fk_coefficients_literal(p.a, p.b, k));
      rows.emplace_back("profile", calabi_fk_coefficients(p.a, p.b, k));
    }
    out << "a " << num(p.a) << " b " << num(p.b);
    if (boundary) out << " eps " << num(*p.eps) << " kb " << num(*p.kb);
    else out << " k " << k;
    out << "\n";
    for (const auto& [name, c] : rows)
      out << name << " A1 " << num(c.A1) << " A2 " << num(c.A2) << " A3 " << num(c.A3) << " A4 " << num(c.A4) << "\n";
    const CalabiCoefficients& c = rows.front().second;
    const double scale = std::max({1.0, std::abs(c.A1), std::abs(c.A2), std::abs(c.A3), std::abs(c.A4)});
    const double zero = 1e-12 * scale;
    auto yes = [](bool b) { return b ? "yes" : "no"; };
    const double bach = 4.0 * c.A1 * c.A4 - c.A2 * c.A3;
    out << "weakly_selfdual " << yes(std::abs(c.A3) <= zero) << " (A3 = " << num(c.A3) << ")\n";
    out << "selfdual " << yes(std::abs(c.A3) <= zero && std::abs(c.A4) <= zero) << "\n";
    out << "bach_flat " << yes(std::abs(bach) <= zero * scale) << " (4A1A4 - A2A3 = " << num(bach) << ")\n";
    return kExitPass;
  });
}

}  // namespace kl
