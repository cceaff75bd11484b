#include "kahlerlab/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <thread>

#include <boost/random/sobol.hpp>

#include "kahlerlab/curvature.hpp"
#include "kahlerlab/errors.hpp"

namespace kl {

void ToleranceConfig::validate() const {
  if (!(identity_tol > 0.0 && zero_tol > 0.0 && nonzero_floor > 0.0 && constancy_tol > 0.0))
    throw ConfigError("tolerances must be positive");
  if (!(nonzero_floor > identity_tol)) throw ConfigError("nonzero_floor must exceed identity_tol");
  if (samples_per_box < 17) throw ConfigError("samples_per_box must be at least 17 (corners and center)");
  if (threads < 0) throw ConfigError("threads must be non-negative");
}

std::vector<Point> sample_points(const Box& box, int n, std::uint64_t seed) {
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int mask = 0; mask < 16 && static_cast<int>(pts.size()) < n; ++mask) {
    Point p;
    for (int i = 0; i < 4; ++i) p[i] = (mask >> i) & 1 ? box.hi[i] : box.lo[i];
    pts.push_back(p);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, 4> shift;
  for (double& s : shift) s = u(rng);
  boost::random::sobol qrng(4);
  const double scale = 1.0 / (static_cast<double>(qrng.max()) + 1.0);
  while (static_cast<int>(pts.size()) < n) {
    Point p;
    for (int i = 0; i < 4; ++i) {
      double v = static_cast<double>(qrng()) * scale + shift[static_cast<std::size_t>(i)];
      v -= std::floor(v);
      p[i] = box.lo[i] + v * (box.hi[i] - box.lo[i]);
    }
    pts.push_back(p);
  }
  return pts;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::not_applicable: return "not-applicable";
  }
  return "?";
}

namespace {

constexpr std::array<std::pair<Suite, const char*>, 8> kSuiteNames{{
    {Suite::kahler, "kahler"},
    {Suite::weak_sd, "weak_sd"},
    {Suite::extremal, "extremal"},
    {Suite::biextremal, "biextremal"},
    {Suite::bach, "bach"},
    {Suite::hamiltonian, "hamiltonian"},
    {Suite::almost_kahler, "almost_kahler"},
    {Suite::lagrangian, "lagrangian"},
}};

}  // namespace

const char* to_string(Suite s) {
  for (const auto& [k, n] : kSuiteNames)
    if (k == s) return n;
  return "?";
}

Suite parse_suite(const std::string& name) {
  for (const auto& [k, n] : kSuiteNames)
    if (name == n) return k;
  throw ConfigError("unknown suite '" + name + "'");
}

const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> v = [] {
    std::vector<Suite> out;
    for (const auto& [k, n] : kSuiteNames) out.push_back(k);
    return out;
  }();
  return v;
}

namespace {

// Runs fn(i) for i in [0, n) on a pool of threads; the first exception by
// index is rethrown after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Lazily computed quantities at one sample point.
class SampleContext {
 public:
  SampleContext(const FamilyInstance& inst, const Point& pt, const ToleranceConfig& tol, std::uint64_t seed)
      : inst_(inst), pt_(pt), tol_(tol), seed_(seed) {}

  const FamilyInstance& inst() const { return inst_; }
  const Point& point() const { return pt_; }
  const ToleranceConfig& tol() const { return tol_; }
  std::uint64_t seed() const { return seed_; }

  const CurvatureBundle& bundle() {
    if (!b_) b_ = curvature_bundle(inst_, pt_, 4);
    return *b_;
  }
  double scale() { return bundle().curvature_scale; }

  const RicciFormData& ricci() {
    return lazy(ricci_, [&] { return ricci_form_data(bundle(), tol_.identity_tol); });
  }
  const ConformalScalar& conformal() {
    return lazy(conformal_, [&] { return conformal_scalar(bundle()); });
  }
  const CottonCodiff& cotton() {
    return lazy(cotton_, [&] { return cotton_asd_and_codiff(bundle()); });
  }
  const BachForms& bach() {
    return lazy(bach_, [&] { return bach_forms(bundle(), tol_.identity_tol); });
  }
  const WeylSpectrum& wplus() {
    return lazy(wplus_, [&] { return weyl_spectrum(bundle(), 1); });
  }
  const WeylSpectrum& wminus() {
    return lazy(wminus_, [&] { return weyl_spectrum(bundle(), -1, ricci().omega_I); });
  }
  const HamiltonianFormData& hamiltonian() {
    return lazy(ham_, [&] {
      const auto& phi = bundle().fields.phi;
      if (!phi) throw PreconditionError("instance carries no candidate hamiltonian 2-form");
      return hamiltonian_analysis(bundle(), *phi, tol_.identity_tol);
    });
  }

  std::optional<double> reference(const std::string& name) const {
    const auto it = inst_.reference.find(name);
    if (it == inst_.reference.end()) return std::nullopt;
    return it->second(pt_);
  }

 private:
  template <class T, class F>
  const T& lazy(std::optional<T>& slot, F&& make) {
    if (!slot) slot = make();
    return *slot;
  }

  const FamilyInstance& inst_;
  Point pt_;
  const ToleranceConfig& tol_;
  std::uint64_t seed_;
  std::unique_ptr<CurvatureBundle> b_;
  std::optional<RicciFormData> ricci_;
  std::optional<ConformalScalar> conformal_;
  std::optional<CottonCodiff> cotton_;
  std::optional<BachForms> bach_;
  std::optional<WeylSpectrum> wplus_, wminus_;
  std::optional<HamiltonianFormData> ham_;
};

using Eval = std::function<std::optional<double>(SampleContext&)>;

enum class TolKind { identity, zero, floor };

struct Member {
  std::string name;
  std::string tag;
  Bound bound = Bound::upper;
  TolKind tol = TolKind::identity;
  double required_fraction = 1.0;
  Eval eval;
};

double tolerance_of(const ToleranceConfig& t, TolKind k) {
  switch (k) {
    case TolKind::identity: return t.identity_tol;
    case TolKind::zero: return t.zero_tol;
    case TolKind::floor: return t.nonzero_floor;
  }
  return t.identity_tol;
}

double relative(double value, double ref) { return std::abs(value - ref) / std::max(1.0, std::abs(ref)); }

Eval against_reference(const std::string& ref, std::function<double(SampleContext&)> value) {
  return [ref, value](SampleContext& c) -> std::optional<double> {
    const auto r = c.reference(ref);
    if (!r) throw PreconditionError("no closed form for this instance");
    return relative(value(c), *r);
  };
}

// Equation tags of the closed-form references, by family.
std::map<std::string, std::string> reference_tags(const FamilyInstance& inst) {
  if (inst.family == "orthotoric") {
    if (inst.params.count("k"))
      return {{"s", "exts"}, {"mu", "extmu"}, {"p", "extmu"}, {"kappa", "newkappa"}};
    return {{"s", "newscalar"}, {"mu", "newmu"}, {"p", "pfaffian"}, {"kappa", "newkappa"}};
  }
  if (inst.family == "calabi_type" || inst.family == "hirzebruch")
    return {{"s", "s-coh"}, {"mu", "mu-coh"}, {"p", "pfaffian"}, {"kappa", "kappa-coh"}};
  if (inst.family == "ak_lebrun") return {{"s", "ak-metric"}, {"mu", "ak-metric"}, {"p", "ak-metric"}, {"kappa", "ak-metric"}};
  return {{"s", "product"}, {"mu", "product"}, {"p", "product"}, {"kappa", "product"}};
}

std::vector<Member> kahler_members(const FamilyInstance& inst) {
  auto tags = reference_tags(inst);
  return {
      {"omega_closed", "kahler", Bound::upper, TolKind::zero, 1.0,
       [](SampleContext& c) { return closedness_residual(c.bundle()); }},
      {"J_parallel", "kahler", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return parallel_J_residual(c.bundle()); }},
      {"J_squared", "kahler", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return complex_structure_residual(c.bundle()); }},
      {"first_bianchi", "bianchi", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return first_bianchi_residual(c.bundle()); }},
      {"weyl_traceless", "split", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return weyl_trace_residual(c.bundle()); }},
      {"ricci_J_invariant", "kahler", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return ricci_J_anti_invariant(c.bundle()); }},
      {"s_closed_form", tags["s"], Bound::upper, TolKind::identity, 1.0,
       against_reference("s", [](SampleContext& c) { return c.bundle().s.value(); })},
      {"mu_closed_form", tags["mu"], Bound::upper, TolKind::identity, 1.0,
       against_reference("mu", [](SampleContext& c) {
         const auto& mu = c.ricci().mu;
         if (!mu) throw PreconditionError("mu undefined where rho0 vanishes");
         return mu->value();
       })},
      {"p_closed_form", tags["p"], Bound::upper, TolKind::identity, 1.0,
       against_reference("p", [](SampleContext& c) { return c.ricci().p.value(); })},
      {"kappa_closed_form", tags["kappa"], Bound::upper, TolKind::identity, 1.0,
       against_reference("kappa", [](SampleContext& c) { return c.conformal().route_rescale; })},
      {"kappa_routes", "kappas", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) -> std::optional<double> {
         if (!c.reference("kappa") && !c.bundle().fields.conformal_factor)
           throw PreconditionError("instance carries no conformal factor");
         return c.conformal().difference;
       }},
  };
}

std::vector<Member> weak_sd_members() {
  return {
      {"cotton_asd", "w-harm", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.cotton().cminus_norm / c.scale(); }},
      {"codiff_wminus", "CY", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.cotton().difference; }},
      {"matsumoto_tanno", "MT", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return matsumoto_tanno_residual(c.bundle()); }},
      {"bianchirho", "bianchirho", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return bianchirho_residual(c.bundle()); }},
      {"cplus_s", "C+s", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) -> std::optional<double> {
         if (std::abs(c.bundle().s.value()) <= c.tol().zero_tol) throw PreconditionError("s below the zero threshold");
         return cplus_s_residual(c.bundle());
       }},
      {"wplus_omega_eigenform", "lemma1", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.wplus().eigenform_residual / c.scale(); }},
      {"wplus_eigenvalue_s", "lemma1", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return std::abs(c.wplus().eigenform_value - c.bundle().s.value()) / c.scale(); }},
      {"wminus_degenerate", "prop:tri", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.wminus().gap / c.scale(); }},
      {"wminus_simple_kappa", "propkappa", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return relative(c.wminus().simple, c.conformal().route_rescale); }},
  };
}

std::vector<Member> extremal_members() {
  return {
      {"s_holomorphic_potential", "extremal", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return holomorphic_potential_residual(c.bundle(), c.bundle().s); }},
      {"J_grad_s_killing", "extremal", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return killing_residual(c.bundle(), hamiltonian_vector(c.bundle(), c.bundle().s)); }},
  };
}

std::vector<Member> biextremal_members() {
  auto m = extremal_members();
  m.push_back({"p_holomorphic_potential", "biextremal", Bound::upper, TolKind::identity, 1.0,
               [](SampleContext& c) { return holomorphic_potential_residual(c.bundle(), c.ricci().p); }});
  return m;
}

std::vector<Member> bach_members() {
  auto scale2 = [](SampleContext& c) { return c.scale() * c.scale(); };
  return {
      {"bach_route_plus", "bach+-", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.bach().route_plus_residual; }},
      {"bach_route_minus", "bach+-", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.bach().route_minus_residual; }},
      {"bach_J_invariant", "Bachform", Bound::upper, TolKind::identity, 1.0,
       [scale2](SampleContext& c) { return c.bach().anti_invariant_norm / std::max(scale2(c), c.bach().bach_norm); }},
      {"bach_form", "Bachform", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) -> std::optional<double> {
         const auto& bf = c.bach();
         if (!bf.btilde) throw PreconditionError("Bach tensor not J-invariant");
         const auto& b = c.bundle();
         return norm(b, *bf.btilde - *bf.btilde_reference) /
                std::max({1.0, norm(b, *bf.btilde), norm(b, *bf.btilde_reference)});
       }},
      {"bach_flat", "bach", Bound::upper, TolKind::identity, 1.0,
       [scale2](SampleContext& c) { return c.bach().bach_norm / scale2(c); }},
  };
}

std::vector<Member> hamiltonian_members() {
  using H = HamiltonianFormData;
  auto field = [](double H::*f) {
    return [f](SampleContext& c) -> std::optional<double> { return c.hamiltonian().*f; };
  };
  return {
      {"phi_closed", "biham", Bound::upper, TolKind::zero, 1.0, field(&H::residual_closed)},
      {"phi0_twistor", "twistdef", Bound::upper, TolKind::identity, 1.0, field(&H::residual_twistor)},
      {"twistor_part_dsigma", "biham", Bound::upper, TolKind::identity, 1.0, field(&H::residual_hamiltonian)},
      {"sigma_potential", "biham", Bound::upper, TolKind::identity, 1.0, field(&H::potential_sigma)},
      {"pi_potential", "biham", Bound::upper, TolKind::identity, 1.0, field(&H::potential_pi)},
      {"K1_killing", "biham", Bound::upper, TolKind::identity, 1.0, field(&H::killing_K1)},
      {"K2_killing", "biham", Bound::upper, TolKind::identity, 1.0, field(&H::killing_K2)},
      {"dxi_perp_deta", "dxi-deta", Bound::upper, TolKind::identity, 1.0, field(&H::dxi_deta)},
      {"omega_K1_K2", "biham", Bound::upper, TolKind::zero, 1.0, field(&H::omega_K1_K2)},
      {"dpi", "dpi", Bound::upper, TolKind::identity, 1.0, field(&H::dpi_residual)},
      {"swap", "swap", Bound::upper, TolKind::identity, 1.0, field(&H::swap_residual)},
      {"Idsig", "Idsig", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) -> std::optional<double> { return c.hamiltonian().idsig_residual; }},
  };
}

std::vector<Member> almost_kahler_members() {
  return {
      {"omega_closed", "ak-omega", Bound::upper, TolKind::zero, 1.0,
       [](SampleContext& c) { return closedness_residual(c.bundle()); }},
      {"nijenhuis_nonzero", "ak-lem2", Bound::lower, TolKind::floor, 0.9,
       [](SampleContext& c) { return nijenhuis_norm(c.bundle()); }},
      {"ricci_J_invariant", "ak-lemma1", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return ricci_J_anti_invariant(c.bundle()); }},
      {"bianchirho", "bianchirho", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return bianchirho_residual(c.bundle()); }},
      {"cotton_asd", "w-harm", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.cotton().cminus_norm / c.scale(); }},
      {"J_grad_s_killing", "ak-killing", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return killing_residual(c.bundle(), hamiltonian_vector(c.bundle(), c.bundle().s)); }},
  };
}

std::vector<Member> lagrangian_members() {
  return {
      {"lagrangian_spread", "lagrangian", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return lagrangian_spread(c.bundle(), 64, c.seed()).spread / c.scale(); }},
      {"ricci_J_invariant", "lagrangian", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return ricci_J_anti_invariant(c.bundle()); }},
      {"wminus_zero", "lagrangian", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return norm(c.bundle(), c.bundle().weyl_minus) / c.scale(); }},
      {"wplus_omega_eigenform", "lagrangian", Bound::upper, TolKind::identity, 1.0,
       [](SampleContext& c) { return c.wplus().eigenform_residual / c.scale(); }},
  };
}

bool applicable(const FamilyInstance& inst, Suite s, std::string& why) {
  switch (s) {
    case Suite::kahler:
    case Suite::lagrangian:
      return true;
    case Suite::almost_kahler:
      if (inst.is_kahler()) why = "instance is Kahler";
      return !inst.is_kahler();
    default:
      if (!inst.is_kahler()) why = "suite requires a Kahler instance";
      return inst.is_kahler();
  }
}

std::vector<Member> members_of(const FamilyInstance& inst, Suite s) {
  switch (s) {
    case Suite::kahler: return kahler_members(inst);
    case Suite::weak_sd: return weak_sd_members();
    case Suite::extremal: return extremal_members();
    case Suite::biextremal: return biextremal_members();
    case Suite::bach: return bach_members();
    case Suite::hamiltonian: return hamiltonian_members();
    case Suite::almost_kahler: return almost_kahler_members();
    case Suite::lagrangian: return lagrangian_members();
  }
  return {};
}

struct Cell {
  std::optional<double> value;
  std::string note;
};

CheckReport aggregate(const Member& m, const ToleranceConfig& tol, const std::vector<Point>& pts,
                      const std::vector<Cell>& cells) {
  CheckReport r;
  r.name = m.name;
  r.tag = m.tag;
  r.bound = m.bound;
  r.tolerance = tolerance_of(tol, m.tol);
  r.required_fraction = m.required_fraction;
  double sum = 0.0;
  int good = 0;
  r.max = -std::numeric_limits<double>::infinity();
  r.min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    if (!c.value) {
      ++r.skipped;
      if (r.note.empty()) r.note = c.note;
      continue;
    }
    const double v = std::isnan(*c.value) ? std::numeric_limits<double>::infinity() : *c.value;
    ++r.evaluated;
    sum += v;
    if (v > r.max) {
      r.max = v;
      if (m.bound == Bound::upper) r.worst = pts[i];
    }
    if (v < r.min) {
      r.min = v;
      if (m.bound == Bound::lower) r.worst = pts[i];
    }
    if (m.bound == Bound::upper ? v <= r.tolerance : v >= r.tolerance) ++good;
  }
  if (r.evaluated == 0) {
    r.max = r.min = 0.0;
    r.verdict = Verdict::not_applicable;
    if (r.note.empty()) r.note = "no applicable samples";
    return r;
  }
  r.mean = sum / r.evaluated;
  r.fraction = static_cast<double>(good) / r.evaluated;
  if (m.bound == Bound::upper)
    r.verdict = r.max <= r.tolerance ? Verdict::pass : Verdict::fail;
  else
    r.verdict = r.fraction >= r.required_fraction ? Verdict::pass : Verdict::fail;
  if (r.skipped > 0 && r.note.empty()) r.note = "some samples not applicable";
  return r;
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t i) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(i)};
  std::array<std::uint64_t, 1> out{};
  seq.generate(reinterpret_cast<std::uint32_t*>(out.data()), reinterpret_cast<std::uint32_t*>(out.data() + 1));
  return out[0];
}

bool p_affine_predicted(const FamilyInstance& inst, const ToleranceConfig& tol) {
  const auto it = inst.params.find("A3");
  return it != inst.params.end() && std::abs(it->second) <= tol.zero_tol;
}

// Least-squares line p = a s + b and the largest relative deviation from it.
struct LineFit {
  double slope = 0.0, intercept = 0.0, residual = 0.0;
  std::size_t worst = 0;
};

LineFit fit_line(const std::vector<std::pair<double, double>>& sp) {
  const double n = static_cast<double>(sp.size());
  double ms = 0.0, mp = 0.0;
  for (const auto& [s, p] : sp) {
    ms += s;
    mp += p;
  }
  ms /= n;
  mp /= n;
  double sss = 0.0, ssp = 0.0;
  for (const auto& [s, p] : sp) {
    sss += (s - ms) * (s - ms);
    ssp += (s - ms) * (p - mp);
  }
  LineFit f;
  f.slope = sss > 0.0 ? ssp / sss : 0.0;
  f.intercept = mp - f.slope * ms;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const double r = relative(sp[i].second, f.slope * sp[i].first + f.intercept);
    if (r > f.residual) {
      f.residual = r;
      f.worst = i;
    }
  }
  return f;
}

}  // namespace

std::vector<CheckReport> run_suites(const FamilyInstance& inst, const std::vector<Suite>& suites,
                                    const ToleranceConfig& tol) {
  tol.validate();
  const std::vector<Point> pts = sample_points(inst.box, tol.samples_per_box, tol.rng_seed);
  const std::size_t n = pts.size();

  struct Block {
    Suite suite;
    bool ok;
    std::string why;
    std::vector<Member> members;
  };
  std::vector<Block> blocks;
  std::size_t total = 0;
  for (Suite s : suites) {
    Block b{s, true, {}, members_of(inst, s)};
    b.ok = applicable(inst, s, b.why);
    if (b.ok) total += b.members.size();
    blocks.push_back(std::move(b));
  }
  const bool want_sp = std::find(suites.begin(), suites.end(), Suite::biextremal) != suites.end() &&
                       inst.is_kahler() && p_affine_predicted(inst, tol);

  std::vector<std::vector<Cell>> cells(n, std::vector<Cell>(total));
  std::vector<std::optional<std::pair<double, double>>> sp(n);
  parallel_for(static_cast<int>(n), tol.threads, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    SampleContext ctx(inst, pts[ui], tol, sample_seed(tol.rng_seed, ui));
    std::size_t k = 0;
    for (const Block& b : blocks) {
      if (!b.ok) continue;
      for (const Member& m : b.members) {
        Cell& cell = cells[ui][k++];
        try {
          cell.value = m.eval(ctx);
          if (!cell.value) cell.note = "not defined at this sample";
        } catch (const PreconditionError& e) {
          cell.note = e.what();
        }
      }
    }
    if (want_sp) {
      try {
        sp[ui] = std::make_pair(ctx.bundle().s.value(), ctx.ricci().p.value());
      } catch (const PreconditionError&) {
      }
    }
  });

  std::vector<CheckReport> out;
  std::size_t k = 0;
  for (const Block& b : blocks) {
    for (const Member& m : b.members) {
      if (!b.ok) {
        CheckReport r;
        r.suite = to_string(b.suite);
        r.name = m.name;
        r.tag = m.tag;
        r.bound = m.bound;
        r.tolerance = tolerance_of(tol, m.tol);
        r.required_fraction = m.required_fraction;
        r.skipped = static_cast<int>(n);
        r.note = b.why;
        out.push_back(r);
        continue;
      }
      std::vector<Cell> column(n);
      for (std::size_t i = 0; i < n; ++i) column[i] = cells[i][k];
      ++k;
      out.push_back(aggregate(m, tol, pts, column));
      out.back().suite = to_string(b.suite);
    }
    if (b.suite == Suite::biextremal) {
      CheckReport r;
      r.suite = to_string(b.suite);
      r.name = "p_affine_in_s";
      r.tag = "monoextremal";
      r.tolerance = tol.identity_tol;
      if (!b.ok) {
        r.skipped = static_cast<int>(n);
        r.note = b.why;
      } else if (!want_sp) {
        r.skipped = static_cast<int>(n);
        r.note = "no affine relation predicted for this instance";
      } else {
        std::vector<std::pair<double, double>> data;
        std::vector<std::size_t> index;
        for (std::size_t i = 0; i < n; ++i)
          if (sp[i]) {
            data.push_back(*sp[i]);
            index.push_back(i);
          }
        r.evaluated = static_cast<int>(data.size());
        r.skipped = static_cast<int>(n - data.size());
        if (data.size() >= 3) {
          const LineFit f = fit_line(data);
          r.max = r.mean = f.residual;
          r.worst = pts[index[f.worst]];
          r.fraction = 1.0;
          r.verdict = f.residual <= r.tolerance ? Verdict::pass : Verdict::fail;
          const double a2 = inst.params.count("A2") ? inst.params.at("A2") : 0.0;
          char buf[160];
          std::snprintf(buf, sizeof buf, "slope %.17g intercept %.17g; predicted %.17g %.17g", f.slope,
                        f.intercept, -0.5 * a2, -0.25 * a2 * a2);
          r.note = buf;
        } else {
          r.note = "fewer than three samples";
        }
      }
      out.push_back(r);
    }
  }
  return out;
}

std::vector<CheckReport> run_suite(const FamilyInstance& inst, Suite suite, const ToleranceConfig& tol) {
  return run_suites(inst, {suite}, tol);
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::einstein: return "einstein";
    case Classification::parallel_ricci_product: return "parallel-ricci-product";
    case Classification::selfdual_nonconstant_s: return "selfdual-nonconstant-s";
    case Classification::degenerate_wminus: return "degenerate-Wminus";
    case Classification::none: return "none";
  }
  return "?";
}

namespace {

struct ClassifySample {
  double cminus = 0.0, rho0 = 0.0, ds = 0.0, wminus = 0.0, gap = 0.0;
};

enum class Vanishing { everywhere, nowhere, mixed };

Vanishing vanishing(const std::vector<ClassifySample>& v, double ClassifySample::*f, const ToleranceConfig& tol) {
  int zero = 0, nonzero = 0;
  for (const auto& s : v) {
    if (s.*f <= tol.identity_tol) ++zero;
    else if (s.*f >= tol.nonzero_floor) ++nonzero;
  }
  const int n = static_cast<int>(v.size());
  if (zero == n) return Vanishing::everywhere;
  if (nonzero == n) return Vanishing::nowhere;
  return Vanishing::mixed;
}

CheckReport evidence(const std::string& name, const std::string& tag, const std::vector<ClassifySample>& v,
                     double ClassifySample::*f, const std::vector<Point>& pts, double tol) {
  CheckReport r;
  r.name = name;
  r.tag = tag;
  r.tolerance = tol;
  r.evaluated = static_cast<int>(v.size());
  r.min = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  int good = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i].*f;
    sum += x;
    if (x > r.max || i == 0) {
      r.max = x;
      r.worst = pts[i];
    }
    r.min = std::min(r.min, x);
    if (x <= tol) ++good;
  }
  r.mean = v.empty() ? 0.0 : sum / static_cast<double>(v.size());
  r.fraction = v.empty() ? 0.0 : static_cast<double>(good) / static_cast<double>(v.size());
  r.verdict = r.max <= tol ? Verdict::pass : Verdict::fail;
  return r;
}

}  // namespace

ClassifyResult classify(const FamilyInstance& inst, const ToleranceConfig& tol) {
  tol.validate();
  ClassifyResult res;
  if (!inst.is_kahler()) {
    res.detail = "instance is not Kahler";
    return res;
  }
  const std::vector<Point> pts = sample_points(inst.box, tol.samples_per_box, tol.rng_seed);
  std::vector<ClassifySample> v(pts.size());
  parallel_for(static_cast<int>(pts.size()), tol.threads, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto b = curvature_bundle(inst, pts[ui], 3);
    const double sc = b->curvature_scale;
    ClassifySample& s = v[ui];
    s.cminus = cotton_asd_and_codiff(*b).cminus_norm / sc;
    s.rho0 = norm(*b, b->ric0) / sc;
    s.ds = norm(*b, grad_form(b->s)) / sc;
    s.wminus = norm(*b, b->weyl_minus) / sc;
    s.gap = weyl_spectrum(*b, -1).gap / sc;
  });
  res.evidence.push_back(evidence("cotton_asd", "w-harm", v, &ClassifySample::cminus, pts, tol.identity_tol));
  res.evidence.push_back(evidence("rho0_zero", "prop:tri", v, &ClassifySample::rho0, pts, tol.identity_tol));
  res.evidence.push_back(evidence("ds_zero", "prop:tri", v, &ClassifySample::ds, pts, tol.identity_tol));
  res.evidence.push_back(evidence("wminus_zero", "prop:tri", v, &ClassifySample::wminus, pts, tol.identity_tol));
  res.evidence.push_back(evidence("wminus_degenerate", "prop:tri", v, &ClassifySample::gap, pts, tol.identity_tol));

  if (res.evidence[0].verdict != Verdict::pass) {
    res.detail = "not weakly selfdual";
    return res;
  }
  auto ambiguous = [&](const std::string& what) {
    res.ambiguous = true;
    res.detail = what + " vanishes at some samples only";
    return res;
  };
  switch (vanishing(v, &ClassifySample::rho0, tol)) {
    case Vanishing::everywhere:
      res.verdict = Classification::einstein;
      res.detail = "rho0 vanishes";
      return res;
    case Vanishing::mixed: return ambiguous("rho0");
    case Vanishing::nowhere: break;
  }
  switch (vanishing(v, &ClassifySample::ds, tol)) {
    case Vanishing::everywhere:
      res.verdict = Classification::parallel_ricci_product;
      res.detail = "s constant, rho0 nonvanishing";
      return res;
    case Vanishing::mixed: return ambiguous("ds");
    case Vanishing::nowhere: break;
  }
  switch (vanishing(v, &ClassifySample::wminus, tol)) {
    case Vanishing::everywhere:
      res.verdict = Classification::selfdual_nonconstant_s;
      res.detail = "W- vanishes, ds does not";
      return res;
    case Vanishing::mixed: return ambiguous("W-");
    case Vanishing::nowhere: break;
  }
  if (res.evidence[4].verdict == Verdict::pass) {
    res.verdict = Classification::degenerate_wminus;
    res.detail = "W- and rho0 nonvanishing, W- degenerate at every sample";
  } else {
    res.detail = "W- nonvanishing but not degenerate at some sample";
  }
  return res;
}

const char* to_string(ConstantExpr e) {
  switch (e) {
    case ConstantExpr::kappa_lambda3: return "kappa_lambda3";
    case ConstantExpr::p_affine_in_s: return "p_affine_in_s";
    case ConstantExpr::wminus_over_kappa: return "wminus_over_kappa";
  }
  return "?";
}

ConstantExpr parse_constant_expr(const std::string& name) {
  for (ConstantExpr e : {ConstantExpr::kappa_lambda3, ConstantExpr::p_affine_in_s, ConstantExpr::wminus_over_kappa})
    if (name == to_string(e)) return e;
  throw ConfigError("unknown constant expression '" + name + "'");
}

namespace {

std::pair<double, double> mean_and_spread(const std::vector<double>& v, double zero_tol) {
  double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double x : v) {
    sum += x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double mean = sum / static_cast<double>(v.size());
  const double range = hi - lo;
  return {mean, std::abs(mean) > zero_tol ? range / std::abs(mean) : range};
}

}  // namespace

ConstantFit extract_constant(const FamilyInstance& inst, ConstantExpr expr, const ToleranceConfig& tol) {
  tol.validate();
  ConstantFit fit;
  fit.expr = expr;
  if (!inst.is_kahler()) {
    fit.note = "instance is not Kahler";
    return fit;
  }
  const std::vector<Point> pts = sample_points(inst.box, tol.samples_per_box, tol.rng_seed);
  const std::size_t n = pts.size();
  std::vector<std::optional<double>> a(n), b(n);
  std::vector<std::string> notes(n);
  parallel_for(static_cast<int>(n), tol.threads, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    SampleContext ctx(inst, pts[ui], tol, 0);
    try {
      switch (expr) {
        case ConstantExpr::kappa_lambda3: {
          const double lam = std::abs(ctx.ricci().lambda.value());
          if (lam <= tol.zero_tol * ctx.scale()) throw PreconditionError("lambda_Ric below the zero threshold");
          const double kappa = ctx.conformal().route_rescale;
          a[ui] = kappa * lam * lam * lam;
          if (const auto& cf = ctx.bundle().fields.conformal_factor) {
            const double l = std::abs(cf->value());
            b[ui] = kappa * l * l * l;
          }
          break;
        }
        case ConstantExpr::p_affine_in_s:
          a[ui] = ctx.bundle().s.value();
          b[ui] = ctx.ricci().p.value();
          break;
        case ConstantExpr::wminus_over_kappa: {
          const double kappa = ctx.conformal().route_rescale;
          if (std::abs(kappa) <= tol.zero_tol) throw PreconditionError("kappa below the zero threshold");
          a[ui] = ctx.wminus().simple / kappa;
          break;
        }
      }
    } catch (const PreconditionError& e) {
      notes[ui] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!a[i]) {
      fit.note = notes[i];
      return fit;
    }

  if (expr == ConstantExpr::p_affine_in_s) {
    std::vector<std::pair<double, double>> sp;
    for (std::size_t i = 0; i < n; ++i) sp.emplace_back(*a[i], *b[i]);
    const LineFit f = fit_line(sp);
    for (const auto& [s, p] : sp) fit.values.push_back(p - f.slope * s - f.intercept);
    fit.constant = f.slope;
    fit.intercept = f.intercept;
    fit.spread = f.residual;
  } else {
    for (const auto& x : a) fit.values.push_back(*x);
    std::tie(fit.constant, fit.spread) = mean_and_spread(fit.values, tol.zero_tol);
    if (expr == ConstantExpr::kappa_lambda3 && std::all_of(b.begin(), b.end(), [](const auto& x) { return x.has_value(); })) {
      std::vector<double> alt;
      for (const auto& x : b) alt.push_back(*x);
      const auto [m, s] = mean_and_spread(alt, tol.zero_tol);
      fit.alt_constant = m;
      fit.alt_spread = s;
    }
  }
  fit.verdict = fit.spread < tol.constancy_tol ? Verdict::pass : Verdict::fail;
  return fit;
}

}  // namespace kl
