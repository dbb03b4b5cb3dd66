#include "apslab/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace apslab::scenario {

namespace {

const std::vector<std::pair<Kind, const char*>> kKindNames = {
    {Kind::Solve, "solve"},
    {Kind::Index, "index"},
    {Kind::ApsShift, "aps_shift"},
    {Kind::GraphIdentity, "graph_identity"},
    {Kind::DeformSweep, "deform_sweep"},
    {Kind::FredholmPair, "fredholm_pair"},
    {Kind::PairIdentity, "pair_identity"},
    {Kind::Split, "split"},
    {Kind::Cobordism, "cobordism"},
    {Kind::Greens, "greens"},
    {Kind::Energy, "energy"},
    {Kind::OdeBounds, "ode_bounds"},
    {Kind::ExtensionBound, "extension_bound"},
    {Kind::NormProbe, "norm_probe"},
};

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

// Object reader that tracks the JSON path and the keys it consumed.
class Obj {
 public:
  Obj(const json& j, std::string path, std::vector<std::string>* warn) : j_(j), path_(std::move(path)), warn_(warn) {
    if (!j_.is_object()) throw ParseError(path_, "expected an object");
  }
  const std::string& path() const { return path_; }
  std::string at(const std::string& k) const { return path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const json& raw(const std::string& k) {
    used_.insert(k);
    auto it = j_.find(k);
    if (it == j_.end()) throw ParseError(at(k), "missing required field");
    return *it;
  }

  double num(const std::string& k) { return number(raw(k), at(k)); }
  double num(const std::string& k, double def) { return has(k) ? num(k) : def; }
  long long integer(const std::string& k) { return as_integer(raw(k), at(k)); }
  long long integer(const std::string& k, long long def) { return has(k) ? integer(k) : def; }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_boolean()) throw ParseError(at(k), "expected a boolean");
    return v.get<bool>();
  }
  std::string str(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_string()) throw ParseError(at(k), "expected a string");
    return v.get<std::string>();
  }
  Obj sub(const std::string& k) { return Obj(raw(k), at(k), warn_); }
  const json& array(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_array()) throw ParseError(at(k), "expected an array");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) warn_->push_back(at(it.key()) + ": unknown key ignored");
  }

  std::vector<std::string>* warnings() const { return warn_; }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ParseError(path, "expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ParseError(path, "non-finite number");
    return x;
  }
  static long long as_integer(const json& v, const std::string& path) {
    if (v.is_number_integer()) return v.get<long long>();
    double x = number(v, path);
    if (x != std::floor(x) || std::abs(x) > 9.0e15) throw ParseError(path, "expected an integer");
    return static_cast<long long>(x);
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>* warn_;
  std::set<std::string> used_;
};

std::string idx(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

cd parse_complex(const json& v, const std::string& path) {
  if (v.is_number()) return {Obj::number(v, path), 0.0};
  if (v.is_array() && v.size() == 2) return {Obj::number(v[0], idx(path, 0)), Obj::number(v[1], idx(path, 1))};
  throw ParseError(path, "expected a number or [re, im]");
}

MatrixXcd parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ParseError(path, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!v[i].is_array() || v[i].empty()) throw ParseError(idx(path, i), "expected a non-empty row");
    if (i == 0) cols = v[i].size();
    if (v[i].size() != cols) throw ParseError(idx(path, i), "ragged matrix row");
  }
  MatrixXcd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = parse_complex(v[i][k], idx(idx(path, i), k));
  return m;
}

int positive_int(Obj& o, const std::string& k, long long def, long long lo = 1, long long hi = 1000000) {
  long long v = o.integer(k, def);
  if (v < lo || v > hi)
    throw ParseError(o.at(k), "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]: " + std::to_string(v));
  return static_cast<int>(v);
}

ComponentSpec parse_component(Obj& o) {
  ComponentSpec c;
  std::string type = o.str("type");
  if (type == "integers") {
    c.kind = ComponentSpec::Kind::ShiftedIntegers;
    c.shift = o.num("shift", 0.0);
    c.fiber_dim = positive_int(o, "fiber_dim", 1, 1, 64);
    if (o.has("sigma")) {
      const json& sg = o.raw("sigma");
      const bool scalar = sg.is_number() || (sg.is_array() && sg.size() == 2 && sg[0].is_number());
      c.sigma = scalar ? MatrixXcd(MatrixXcd::Identity(c.fiber_dim, c.fiber_dim) * parse_complex(sg, o.at("sigma")))
                       : parse_matrix(sg, o.at("sigma"));
      if (c.sigma.rows() != c.fiber_dim || c.sigma.cols() != c.fiber_dim)
        throw ParseError(o.at("sigma"), "sigma must be fiber_dim x fiber_dim");
    }
  } else if (type == "chiral") {
    c.kind = ComponentSpec::Kind::Chiral;
    c.fiber_dim = 2;
    c.offset = o.has("offset") ? parse_complex(o.raw("offset"), o.at("offset")) : cd(0.0, 0.0);
    if (o.has("frame")) {
      c.frame = parse_matrix(o.raw("frame"), o.at("frame"));
      if (c.frame.rows() != 2 || c.frame.cols() != 2) throw ParseError(o.at("frame"), "frame must be 2 x 2");
    }
  } else if (type == "explicit") {
    c.kind = ComponentSpec::Kind::Explicit;
    const json& blocks = o.array("blocks");
    std::set<long long> seen;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      Obj b(blocks[i], idx(o.at("blocks"), i), o.warnings());
      ExplicitBlock eb;
      long long id = b.integer("mode_id");
      if (!seen.insert(id).second) throw ParseError(b.at("mode_id"), "duplicate mode_id " + std::to_string(id));
      eb.n = id;
      eb.a = parse_matrix(b.raw("a"), b.at("a"));
      if (eb.a.rows() != eb.a.cols()) throw ParseError(b.at("a"), "block must be square");
      if (b.has("sigma")) eb.sigma = parse_matrix(b.raw("sigma"), b.at("sigma"));
      b.finish();
      c.blocks.push_back(std::move(eb));
    }
  } else {
    throw ParseError(o.at("type"), "unknown component type '" + type + "'");
  }
  o.finish();
  return c;
}

ModelSpec parse_model(Obj& o) {
  ModelSpec m;
  m.band = o.num("band", 4.0);
  if (m.band < 0.0) throw ParseError(o.at("band"), "band must be non-negative");
  m.doubled = o.boolean("doubled", false);
  const json& comps = o.array("components");
  if (comps.empty()) throw ParseError(o.at("components"), "at least one component required");
  for (std::size_t i = 0; i < comps.size(); ++i) {
    Obj c(comps[i], idx(o.at("components"), i), o.warnings());
    m.components.push_back(parse_component(c));
  }
  o.finish();
  return m;
}

ConditionSpec::Coef parse_coef(Obj& o, bool with_value) {
  ConditionSpec::Coef c;
  c.component = static_cast<int>(o.integer("component", 0));
  c.n = o.integer("n");
  c.copy = static_cast<int>(o.integer("copy", 0));
  c.fiber = static_cast<int>(o.integer("fiber", 0));
  if (c.copy < 0 || c.copy > 1) throw ParseError(o.at("copy"), "copy must be 0 or 1");
  if (c.fiber < 0) throw ParseError(o.at("fiber"), "fiber must be non-negative");
  if (with_value && o.has("value")) c.value = parse_complex(o.raw("value"), o.at("value"));
  o.finish();
  return c;
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

ConditionSpec parse_condition(Obj& o) {
  ConditionSpec c;
  std::string type = o.str("type");
  using T = ConditionSpec::Type;
  if (type == "aps") {
    c.type = T::Aps;
    c.a = o.num("a", 0.0);
    c.closed = o.boolean("closed", false);
  } else if (type == "right_reference") {
    c.type = T::RightReference;
    c.a = o.num("a", 0.0);
  } else if (type == "chiral") {
    c.type = T::Chiral;
    c.sign = static_cast<int>(o.integer("sign", 1));
    if (c.sign != 1 && c.sign != -1) throw ParseError(o.at("sign"), "sign must be +1 or -1");
  } else if (type == "transmission") {
    c.type = T::Transmission;
  } else if (type == "graph") {
    c.a = o.num("a", 0.0);
    c.closed = o.boolean("closed", false);
    if (o.has("w_plus") || o.has("w_minus") || o.has("g")) {
      c.type = T::Graph;
      auto sections = [&](const std::string& key, std::vector<std::vector<ConditionSpec::Coef>>& out) {
        if (!o.has(key)) return;
        const json& arr = o.array(key);
        for (std::size_t i = 0; i < arr.size(); ++i) {
          if (!arr[i].is_array()) throw ParseError(idx(o.at(key), i), "expected an array of coefficients");
          std::vector<ConditionSpec::Coef> sec;
          for (std::size_t k = 0; k < arr[i].size(); ++k) {
            Obj co(arr[i][k], idx(idx(o.at(key), i), k), o.warnings());
            sec.push_back(parse_coef(co, true));
          }
          out.push_back(std::move(sec));
        }
      };
      sections("w_plus", c.w_plus);
      sections("w_minus", c.w_minus);
      if (o.has("g")) {
        const json& arr = o.array("g");
        for (std::size_t i = 0; i < arr.size(); ++i) {
          Obj e(arr[i], idx(o.at("g"), i), o.warnings());
          Obj from = e.sub("from"), to = e.sub("to");
          ConditionSpec::Entry en{parse_coef(from, false), parse_coef(to, false)};
          en.to.value = parse_complex(e.raw("value"), e.at("value"));
          e.finish();
          c.g.push_back(en);
        }
      }
    } else {
      c.type = T::RandomGraph;
      if (o.has("seed")) c.seed = static_cast<std::uint64_t>(o.integer("seed"));
      c.salt = fnv(o.path());
      c.sampler.max_w = positive_int(o, "max_w", 3, 0, 64);
      c.sampler.max_g_norm = o.num("max_g_norm", 2.0);
      c.sampler.min_g_norm = o.num("min_g_norm", 0.0);
      c.sampler.allow_zero_w = o.boolean("allow_zero_w", true);
      if (c.sampler.min_g_norm < 0.0 || c.sampler.min_g_norm > c.sampler.max_g_norm)
        throw ParseError(o.at("min_g_norm"), "need 0 <= min_g_norm <= max_g_norm");
    }
  } else if (type == "deformed" || type == "complement") {
    c.type = type == "deformed" ? T::Deformed : T::Complement;
    if (c.type == T::Deformed) {
      c.s = o.num("s");
      if (c.s < 0.0 || c.s > 1.0) throw ParseError(o.at("s"), "s must lie in [0, 1]: " + fmt(c.s));
    }
    Obj in = o.sub("of");
    c.inner = std::make_shared<ConditionSpec>(parse_condition(in));
  } else {
    throw ParseError(o.at("type"), "unknown condition type '" + type + "'");
  }
  o.finish();
  return c;
}

std::optional<ConditionSpec> condition_field(Obj& o, const std::string& k, bool required) {
  if (!o.has(k)) {
    if (required) o.raw(k);
    return std::nullopt;
  }
  Obj c = o.sub(k);
  return parse_condition(c);
}

ConditionSpec aps_spec(double a) {
  ConditionSpec c;
  c.a = a;
  return c;
}

ConditionSpec right_reference_spec(double a) {
  ConditionSpec c;
  c.type = ConditionSpec::Type::RightReference;
  c.a = a;
  return c;
}

void parse_payload(Scenario& s, Obj& p) {
  const bool needs_model = s.kind != Kind::OdeBounds;
  if (p.has("model")) {
    Obj m = p.sub("model");
    s.model = parse_model(m);
  } else {
    s.model = integer_spectrum(0.0);
  }
  if (!needs_model && p.has("model")) s.warnings.push_back(p.at("model") + ": ignored by ode_bounds");
  s.rho = p.num("rho", 1.0);
  if (!(s.rho > 0.0)) throw ParseError(p.at("rho"), "rho must be positive: " + fmt(s.rho));

  if (p.has("expect")) {
    Obj e = p.sub("expect");
    if (e.has("index")) s.expect_index = e.integer("index");
    s.expect_refusal = e.boolean("refusal", false);
    e.finish();
  }

  auto lr = [&](bool left_required) {
    s.left = condition_field(p, "left", left_required);
    if (!s.left) s.left = aps_spec(0.0);
    s.right = condition_field(p, "right", false);
    if (!s.right) s.right = right_reference_spec(0.0);
  };
  auto sampling = [&](int def_samples) {
    s.samples = positive_int(p, "samples", def_samples);
    s.modes = positive_int(p, "modes", 3, 1, 64);
    s.max_abs_lambda = p.num("max_abs_lambda", 4.0);
  };

  switch (s.kind) {
    case Kind::Solve: {
      lr(false);
      s.max_abs_lambda = p.num("max_abs_lambda", 4.0);
      s.rhs_modes = positive_int(p, "rhs_modes", 4, 1, 64);
      if (p.has("rhs")) {
        const json& arr = p.array("rhs");
        for (std::size_t i = 0; i < arr.size(); ++i) {
          Obj r(arr[i], idx(p.at("rhs"), i), p.warnings());
          ProfileSpec ps;
          Obj at = r.sub("at");
          ps.at = parse_coef(at, false);
          const json& terms = r.array("terms");
          for (std::size_t k = 0; k < terms.size(); ++k) {
            Obj t(terms[k], idx(r.at("terms"), k), p.warnings());
            ProfileTerm term;
            term.c = parse_complex(t.raw("c"), t.at("c"));
            term.p = positive_int(t, "p", 0, 0, 32);
            term.mu = t.has("mu") ? parse_complex(t.raw("mu"), t.at("mu")) : cd(0.0, 0.0);
            t.finish();
            ps.terms.push_back(term);
          }
          r.finish();
          s.rhs.push_back(std::move(ps));
        }
      }
      break;
    }
    case Kind::Index:
      lr(false);
      break;
    case Kind::ApsShift: {
      s.right = condition_field(p, "right", false);
      if (!s.right) s.right = right_reference_spec(0.0);
      if (p.has("pairs")) {
        const json& arr = p.array("pairs");
        for (std::size_t i = 0; i < arr.size(); ++i) {
          const std::string path = idx(p.at("pairs"), i);
          if (!arr[i].is_array() || arr[i].size() != 2) throw ParseError(path, "expected [a, b]");
          double a = Obj::number(arr[i][0], idx(path, 0)), b = Obj::number(arr[i][1], idx(path, 1));
          if (a > b) throw ParseError(path, "need a <= b, got a=" + fmt(a) + " b=" + fmt(b));
          s.shifts.emplace_back(a, b);
        }
      }
      if (p.has("grid")) {
        const json& arr = p.array("grid");
        std::vector<double> g;
        for (std::size_t i = 0; i < arr.size(); ++i) g.push_back(Obj::number(arr[i], idx(p.at("grid"), i)));
        for (std::size_t i = 0; i < g.size(); ++i)
          for (std::size_t k = 0; k < g.size(); ++k)
            if (g[i] < g[k]) s.shifts.emplace_back(g[i], g[k]);
      }
      if (p.has("a") || p.has("b")) {
        double a = p.num("a"), b = p.num("b");
        if (a > b) throw ParseError(p.at("b"), "need a <= b, got a=" + fmt(a) + " b=" + fmt(b));
        s.shifts.emplace_back(a, b);
      }
      if (s.shifts.empty()) throw ParseError(p.path(), "aps_shift needs pairs, grid or a/b");
      break;
    }
    case Kind::GraphIdentity:
      lr(true);
      break;
    case Kind::DeformSweep:
      lr(false);
      s.steps = positive_int(p, "steps", 11, 2, 10000);
      break;
    case Kind::FredholmPair: {
      auto side = [&](const std::string& k) {
        Obj o = p.sub(k);
        Scenario::Side sd;
        Obj c = o.sub("condition");
        sd.condition = parse_condition(c);
        sd.complement = o.boolean("complement", false);
        o.finish();
        return sd;
      };
      s.x = side("x");
      s.y = side("y");
      break;
    }
    case Kind::PairIdentity:
      s.right = condition_field(p, "right", false);
      if (!s.right) s.right = right_reference_spec(0.0);
      s.b1 = condition_field(p, "b1", true);
      s.b2 = condition_field(p, "b2", true);
      break;
    case Kind::Split:
      lr(false);
      s.cut = condition_field(p, "cut", true);
      break;
    case Kind::Cobordism:
      break;
    case Kind::Greens:
    case Kind::Energy:
      sampling(100);
      break;
    case Kind::OdeBounds: {
      if (p.has("lambdas")) {
        const json& arr = p.array("lambdas");
        for (std::size_t i = 0; i < arr.size(); ++i) s.lambdas.push_back(Obj::number(arr[i], idx(p.at("lambdas"), i)));
      } else {
        s.lambdas = {0.0, 1.0, -1.0, 2.0, -2.0, 10.0, -10.0};
      }
      s.count = positive_int(p, "count", 20);
      break;
    }
    case Kind::ExtensionBound:
      s.cut1 = p.num("cut", 0.0);
      s.cutoff_r = p.num("r", 1.0);
      if (!(s.cutoff_r > 0.0)) throw ParseError(p.at("r"), "r must be positive: " + fmt(s.cutoff_r));
      s.growth = p.num("growth", 10.0);
      if (!(s.growth >= 1.0)) throw ParseError(p.at("growth"), "growth must be >= 1: " + fmt(s.growth));
      sampling(20);
      break;
    case Kind::NormProbe:
      s.cut1 = p.num("cut1", 0.0);
      s.cut2 = p.num("cut2", 1.0);
      if (s.cut1 > s.cut2) throw ParseError(p.at("cut2"), "need cut1 <= cut2");
      sampling(100);
      break;
  }
  p.finish();
}

int resolve_coord(const BasisPtr& basis, const ConditionSpec::Coef& c) {
  for (const auto& b : basis->blocks())
    if (b.component == c.component && b.n == c.n && b.copy == c.copy) {
      if (c.fiber >= b.k)
        throw Error("fiber " + std::to_string(c.fiber) + " out of range for mode n=" + std::to_string(c.n));
      return b.offset + c.fiber;
    }
  throw Error("no mode with component=" + std::to_string(c.component) + " n=" + std::to_string(c.n) +
              " copy=" + std::to_string(c.copy) + " in the truncated basis");
}

json cert_json(const Certificate& c) { return {{"n_used", c.n_used}, {"n_doubled", c.n_doubled}, {"agrees", c.agrees}}; }

json index_json(const IndexReport& r) {
  return {{"index", r.index},
          {"dim_ker", r.dim_ker},
          {"dim_coker", r.dim_coker},
          {"counting_index", r.counting_index},
          {"verification_residual", r.verification_residual},
          {"certificate", cert_json(r.certificate)}};
}

IdentityRow identity_row(const IdentityReport& r) {
  IdentityRow row;
  row.name = r.name;
  row.lhs = r.lhs;
  row.rhs = r.rhs;
  row.holds = r.holds;
  std::ostringstream os;
  os << r.detail;
  if (!r.certified) os << (os.tellp() > 0 ? "; " : "") << "rhs changed between N and 2N";
  row.detail = os.str();
  return row;
}

json identity_json(const IdentityReport& r) {
  json runs = json::array();
  for (const auto& x : r.runs) runs.push_back(index_json(x));
  return {{"name", r.name},     {"lhs", r.lhs},         {"rhs", r.rhs},         {"holds", r.holds},
          {"certified", r.certified}, {"refused", r.refused}, {"witness", r.witness}, {"detail", r.detail},
          {"runs", runs}};
}

class Runner {
 public:
  Runner(const Scenario& s, const RunOptions& opt, Report& rep) : s_(s), rep_(rep) {
    seed_ = opt.seed ? *opt.seed : s.seed;
    n_ = opt.truncation ? *opt.truncation : (s.truncation ? *s.truncation : opt.default_truncation);
    rep_.seed = seed_;
    rep_.truncation = n_;
  }

  void go() {
    switch (s_.kind) {
      case Kind::Solve: return solve();
      case Kind::Index: return index_kind();
      case Kind::ApsShift: return aps_shift();
      case Kind::GraphIdentity: return identity(graph_index_check(setup(), n_));
      case Kind::DeformSweep: return sweep();
      case Kind::FredholmPair: return pair();
      case Kind::PairIdentity: return pair_identity();
      case Kind::Split: return identity(split_check(setup(), f(*s_.cut), n_));
      case Kind::Cobordism: return cobordism();
      case Kind::Greens: return greens();
      case Kind::Energy: return energy();
      case Kind::OdeBounds: return ode();
      case Kind::ExtensionBound: return extension();
      case Kind::NormProbe: return norm_probe();
    }
  }

 private:
  ConditionFactory f(const ConditionSpec& c) const { return make_factory(c, seed_); }
  Setup setup() const { return Setup{s_.model, s_.rho, f(*s_.left), f(*s_.right)}; }

  void verdict(std::string contract, bool pass, std::string detail) {
    rep_.verdicts.push_back({std::move(contract), pass, std::move(detail)});
  }

  CsvRow row(std::string id) const {
    CsvRow r;
    r.scenario_id = std::move(id);
    r.kind = to_string(s_.kind);
    return r;
  }

  void index_verdicts(const IndexReport& r, const std::string& what) {
    verdict(what + "truncation certificate", r.certificate.agrees,
            "N=" + std::to_string(r.certificate.n_used) + " and 2N=" + std::to_string(r.certificate.n_doubled));
    verdict(what + "kernel/cokernel verification <= " + fmt(s_.tol.residual), r.verification_residual <= s_.tol.residual,
            "residual=" + fmt(r.verification_residual));
    verdict(what + "counting index equals index", r.counting_index == r.index,
            "counting=" + std::to_string(r.counting_index) + " index=" + std::to_string(r.index));
  }

  void expect(long long got) {
    if (s_.expect_index)
      verdict("expected index", got == *s_.expect_index,
              "expected=" + std::to_string(*s_.expect_index) + " got=" + std::to_string(got));
  }

  void index_kind() {
    auto r = index(setup(), n_);
    rep_.outputs = index_json(r);
    index_verdicts(r, "");
    expect(r.index);
    auto c = row(s_.id);
    c.index = r.index;
    c.dim_ker = r.dim_ker;
    c.dim_coker = r.dim_coker;
    c.residual_max = r.verification_residual;
    rep_.rows.push_back(c);
  }

  void solve() {
    auto p = instantiate(setup(), n_);
    CylinderSection psi(p.basis, p.rho);
    if (!s_.rhs.empty()) {
      for (const auto& ps : s_.rhs) {
        std::vector<ExpTerm> terms;
        for (const auto& t : ps.terms) terms.push_back({t.c, t.p, t.mu});
        int c = resolve_coord(p.basis, ps.at);
        psi[c] = psi[c] + Profile(ExpPoly(std::move(terms)));
      }
    } else {
      std::mt19937_64 rng(seed_);
      psi = random_cylinder_section(p.basis, p.rho, rng, s_.rhs_modes, s_.max_abs_lambda);
    }
    auto res = solve_bvp(p, psi);
    const bool solvable = res.particular.has_value();
    rep_.outputs = {{"solvable", solvable},
                    {"dim_kernel", res.kernel_basis.size()},
                    {"dim_obstruction", res.obstruction_basis.size()},
                    {"residual", res.residual},
                    {"boundary_residual", res.boundary_residual}};
    if (solvable) {
      verdict("solution residual <= " + fmt(s_.tol.inverse), res.residual <= s_.tol.inverse, "residual=" + fmt(res.residual));
      verdict("boundary residual <= " + fmt(s_.tol.residual), res.boundary_residual <= s_.tol.residual,
              "boundary_residual=" + fmt(res.boundary_residual));
    } else {
      double worst = 0.0;
      for (const auto& y : res.obstruction_basis) worst = std::max(worst, std::abs(section_inner(psi, y)));
      verdict("obstruction pairs nontrivially with the data", worst > s_.tol.residual * section_norm(psi),
              "max |(psi, y)|=" + fmt(worst));
    }
    auto c = row(s_.id);
    c.dim_ker = static_cast<long long>(res.kernel_basis.size());
    c.dim_coker = static_cast<long long>(res.obstruction_basis.size());
    c.residual_max = std::max(res.residual, res.boundary_residual);
    rep_.rows.push_back(c);
  }

  void identity(const IdentityReport& r) {
    rep_.outputs = identity_json(r);
    rep_.identities.push_back(identity_row(r));
    std::string d = "lhs=" + std::to_string(r.lhs) + " rhs=" + std::to_string(r.rhs);
    if (!r.detail.empty()) d += " (" + r.detail + ")";
    verdict(r.name + " identity holds", r.holds, d);
    double worst = 0.0;
    for (const auto& x : r.runs) worst = std::max(worst, x.verification_residual);
    auto c = row(s_.id);
    c.index = r.lhs;
    c.residual_max = worst;
    rep_.rows.push_back(c);
  }

  void aps_shift() {
    json all = json::array();
    double worst = 0.0;
    for (auto [a, b] : s_.shifts) {
      Setup base{s_.model, s_.rho, factory::aps(a), f(*s_.right)};
      auto r = aps_shift_check(base, a, b, n_);
      all.push_back({{"a", a}, {"b", b}, {"identity", identity_json(r)}});
      auto row_ = identity_row(r);
      row_.name = "aps_shift[" + fmt(a) + "," + fmt(b) + ")";
      rep_.identities.push_back(row_);
      verdict(row_.name + " holds", r.holds, "lhs=" + std::to_string(r.lhs) + " rhs=" + std::to_string(r.rhs));
      for (const auto& x : r.runs) worst = std::max(worst, x.verification_residual);
    }
    rep_.outputs = {{"shifts", all}};
    auto c = row(s_.id);
    c.residual_max = worst;
    rep_.rows.push_back(c);
  }

  void sweep() {
    auto r = deformation_sweep(setup(), s_.steps, n_);
    json steps = json::array();
    for (std::size_t k = 0; k < r.runs.size(); ++k) {
      json j = index_json(r.runs[k]);
      j["s"] = r.s[k];
      steps.push_back(j);
      auto c = row(s_.id + "/s=" + fmt(r.s[k]));
      c.index = r.runs[k].index;
      c.dim_ker = r.runs[k].dim_ker;
      c.dim_coker = r.runs[k].dim_coker;
      c.residual_max = r.runs[k].verification_residual;
      c.pass = r.runs[k].index == r.value && r.runs[k].verification_residual <= s_.tol.residual;
      rep_.rows.push_back(c);
      index_verdicts(r.runs[k], "s=" + fmt(r.s[k]) + ": ");
    }
    rep_.outputs = {{"steps", steps}, {"constant", r.constant}, {"value", r.value}};
    std::string vals;
    for (const auto& x : r.runs) vals += (vals.empty() ? "" : ",") + std::to_string(x.index);
    verdict("index constant along the deformation", r.constant, "indices=[" + vals + "]");
    expect(r.value);
    auto c = row(s_.id + "/constancy");
    c.index = r.value;
    c.pass = r.constant;
    rep_.rows.push_back(c);
  }

  void pair() {
    auto at = [&](int n) {
      Model m = build_model(s_.model, n);
      auto e = left_end(m);
      BoundaryCondition x = f(s_.x->condition)(e), y = f(s_.y->condition)(e);
      return std::tuple{fredholm_pair({&x, s_.x->complement}, {&y, s_.y->complement}),
                        fredholm_pair({&y, s_.y->complement}, {&x, s_.x->complement}),
                        fredholm_pair({&x, !s_.x->complement}, {&y, !s_.y->complement})};
    };
    auto [xy, yx, perp] = at(n_);
    auto [xy2, yx2, perp2] = at(2 * n_);
    rep_.outputs = {{"dim_intersection", xy.dim_intersection},
                    {"codim_sum", xy.codim_sum},
                    {"index", xy.index},
                    {"index_complements", perp.index},
                    {"certificate", {{"n_used", n_}, {"n_doubled", 2 * n_}, {"agrees", xy2.index == xy.index}}}};
    verdict("truncation certificate", xy2.index == xy.index && perp2.index == perp.index,
            "N gives " + std::to_string(xy.index) + ", 2N gives " + std::to_string(xy2.index));
    verdict("index(X,Y) = index(Y,X)", xy.index == yx.index && xy.dim_intersection == yx.dim_intersection,
            "index(X,Y)=" + std::to_string(xy.index) + " index(Y,X)=" + std::to_string(yx.index));
    verdict("index of the complements is -index", perp.index == -xy.index,
            "index(X,Y)=" + std::to_string(xy.index) + " index(X^perp,Y^perp)=" + std::to_string(perp.index));
    expect(xy.index);
    auto c = row(s_.id);
    c.index = xy.index;
    c.dim_ker = xy.dim_intersection;
    c.dim_coker = xy.codim_sum;
    rep_.rows.push_back(c);
  }

  void pair_identity() {
    Setup base{s_.model, s_.rho, f(*s_.b1), f(*s_.right)};
    auto r = pair_identity_check(base, f(*s_.b1), f(*s_.b2), n_);
    rep_.outputs = identity_json(r);
    auto c = row(s_.id);
    if (s_.expect_refusal) {
      verdict("refusal when ||g1|| ||g2|| >= 1", r.refused, "product=" + fmt(r.witness));
      rep_.identities.push_back(identity_row(r));
    } else if (r.refused) {
      verdict("pair identity applicable", false, r.detail);
    } else {
      identity(r);
      return;
    }
    rep_.rows.push_back(c);
  }

  void cobordism() {
    auto r = cobordism_check(s_.model, s_.rho, n_);
    rep_.outputs = {{"left_contribution", r.left_contribution},
                    {"right_contribution", r.right_contribution},
                    {"total", r.total},
                    {"plus", index_json(r.plus)},
                    {"minus", index_json(r.minus)}};
    verdict("boundary contributions cancel", r.total == 0,
            "left=" + std::to_string(r.left_contribution) + " right=" + std::to_string(r.right_contribution));
    verdict("chiral B+ index is 0", r.plus.index == 0, "index=" + std::to_string(r.plus.index));
    verdict("chiral B- index is 0", r.minus.index == 0, "index=" + std::to_string(r.minus.index));
    index_verdicts(r.plus, "B+: ");
    index_verdicts(r.minus, "B-: ");
    rep_.identities.push_back({"cobordism", r.total, 0, r.total == 0,
                               "left=" + std::to_string(r.left_contribution) + " right=" +
                                   std::to_string(r.right_contribution)});
    auto c = row(s_.id);
    c.index = r.total;
    c.residual_max = std::max(r.plus.verification_residual, r.minus.verification_residual);
    rep_.rows.push_back(c);
  }

  void greens() {
    Model m = build_model(s_.model, n_);
    std::mt19937_64 rng(seed_);
    double worst = 0.0;
    for (int k = 0; k < s_.samples; ++k) {
      auto a = random_cylinder_section(m.basis, s_.rho, rng, s_.modes, s_.max_abs_lambda);
      auto b = random_cylinder_section(m.basis, s_.rho, rng, s_.modes, s_.max_abs_lambda);
      double sc = greens_scale(a, b, m.sigma);
      if (sc > 0.0) worst = std::max(worst, std::abs(greens_residual(a, b, m.sigma)) / sc);
    }
    rep_.outputs = {{"samples", s_.samples}, {"max_relative_residual", worst}};
    verdict("Green residual <= " + fmt(s_.tol.residual) + " relative", worst <= s_.tol.residual, "max=" + fmt(worst));
    auto c = row(s_.id);
    c.residual_max = worst;
    rep_.rows.push_back(c);
  }

  void energy() {
    Model m = build_model(s_.model, n_);
    std::mt19937_64 rng(seed_);
    double worst = 0.0;
    for (int k = 0; k < s_.samples; ++k) {
      auto a = random_cylinder_section(m.basis, s_.rho, rng, s_.modes, s_.max_abs_lambda);
      worst = std::max(worst, energy_identity_residual(a, m.sigma));
    }
    rep_.outputs = {{"samples", s_.samples}, {"max_residual", worst}};
    verdict("energy residual <= " + fmt(s_.tol.residual), worst <= s_.tol.residual, "max=" + fmt(worst));
    auto c = row(s_.id);
    c.residual_max = worst;
    rep_.rows.push_back(c);
  }

  void ode() {
    std::mt19937_64 rng(seed_);
    json per = json::array();
    bool all = true;
    std::string first;
    for (double lam : s_.lambdas) {
      double min_l2 = kInf, min_h1 = kInf;
      int held = 0;
      for (int k = 0; k < s_.count; ++k) {
        auto r = ode_bound_check(lam, Profile(random_exppoly(rng)), s_.rho);
        min_l2 = std::min(min_l2, r.l2_slack);
        min_h1 = std::min(min_h1, r.h1_slack);
        held += r.holds ? 1 : 0;
        if (!r.holds && first.empty())
          first = "lambda=" + fmt(lam) + " ||f||^2=" + fmt(r.f_l2) + " bound=" + fmt(r.l2_bound) +
                  " ||f'||^2=" + fmt(r.fp_l2) + " bound=" + fmt(r.h1_bound);
      }
      all = all && held == s_.count;
      per.push_back({{"lambda", lam}, {"held", held}, {"min_l2_slack", min_l2}, {"min_h1_slack", min_h1}});
    }
    rep_.outputs = {{"per_lambda", per}};
    verdict("ODE L2 and H1 bounds hold", all, first.empty() ? "all samples within bounds" : first);
    rep_.rows.push_back(row(s_.id));
  }

  std::vector<BoundarySection> boundary_samples(const BasisPtr& b, std::mt19937_64& rng, int n) const {
    std::vector<BoundarySection> out;
    SectionSampler opt;
    opt.max_support = s_.modes;
    opt.max_abs_lambda = s_.max_abs_lambda;
    for (int i = 0; i < n; ++i) out.push_back(random_section(b, rng, opt));
    return out;
  }

  void extension() {
    Model m = build_model(s_.model, n_);
    std::mt19937_64 rng(seed_);
    auto small = extension_bound_probe(boundary_samples(m.basis, rng, s_.samples), s_.cut1, s_.cutoff_r, s_.rho, m.sigma);
    int big_n = static_cast<int>(std::ceil(s_.samples * s_.growth));
    auto big = extension_bound_probe(boundary_samples(m.basis, rng, big_n), s_.cut1, s_.cutoff_r, s_.rho, m.sigma);
    rep_.outputs = {{"samples", small.count}, {"max_ratio", small.max_ratio}, {"grown_samples", big.count},
                    {"grown_max_ratio", big.max_ratio}};
    verdict("extension ratio finite", std::isfinite(big.max_ratio), "max=" + fmt(big.max_ratio));
    verdict("extension ratio stable under sample growth", big.max_ratio <= 2.0 * small.max_ratio,
            "small=" + fmt(small.max_ratio) + " grown=" + fmt(big.max_ratio));
    auto c = row(s_.id);
    rep_.rows.push_back(c);
  }

  void norm_probe() {
    Model m = build_model(s_.model, n_);
    std::mt19937_64 rng(seed_);
    auto st = norm_equivalence_probe(boundary_samples(m.basis, rng, s_.samples), s_.cut1, s_.cut2);
    double bound = std::sqrt(1.0 + std::max(s_.cut1 * s_.cut1, s_.cut2 * s_.cut2));
    rep_.outputs = {{"count", st.count}, {"min", st.min}, {"max", st.max}, {"bound", bound}};
    verdict("ratios positive and finite", st.count > 0 && st.min > 0.0 && std::isfinite(st.max),
            "min=" + fmt(st.min) + " max=" + fmt(st.max));
    verdict("ratios within the cut-dependent bound", st.max <= bound && st.min >= 1.0 / bound,
            "min=" + fmt(st.min) + " max=" + fmt(st.max) + " bound=" + fmt(bound));
    rep_.rows.push_back(row(s_.id));
  }

  const Scenario& s_;
  Report& rep_;
  std::uint64_t seed_ = 0;
  int n_ = 32;
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* k) {
  if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
  return j.at(k).get<T>();
}

// Replays a failed parse to find the JSON path of the token that broke it.
class PathLocator : public nlohmann::json_sax<json> {
 public:
  bool null() override { return value(); }
  bool boolean(bool) override { return value(); }
  bool number_integer(number_integer_t) override { return value(); }
  bool number_unsigned(number_unsigned_t) override { return value(); }
  bool number_float(number_float_t, const string_t&) override { return value(); }
  bool string(string_t&) override { return value(); }
  bool binary(binary_t&) override { return value(); }
  bool start_object(std::size_t) override {
    value();
    st_.push_back({false, -1, ""});
    return true;
  }
  bool key(string_t& k) override {
    st_.back().key = k;
    return true;
  }
  bool end_object() override {
    st_.pop_back();
    return true;
  }
  bool start_array(std::size_t) override {
    value();
    st_.push_back({true, -1, ""});
    return true;
  }
  bool end_array() override {
    st_.pop_back();
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& e) override {
    path_ = "$";
    for (std::size_t i = 0; i < st_.size(); ++i) {
      const auto& f = st_[i];
      // the failing token never reached value(), so the innermost array index is one ahead
      if (f.arr) path_ += "[" + std::to_string(f.idx + (i + 1 == st_.size() ? 1 : 0)) + "]";
      else path_ += "." + f.key;
    }
    id_ = e.id;
    return false;
  }

  const std::string& path() const { return path_; }
  int id() const { return id_; }

 private:
  struct Frame {
    bool arr;
    long idx;
    std::string key;
  };
  bool value() {
    if (!st_.empty() && st_.back().arr) ++st_.back().idx;
    return true;
  }
  std::vector<Frame> st_;
  std::string path_ = "$";
  int id_ = 0;
};

json parse_json(const std::string& bytes) {
  try {
    return json::parse(bytes);
  } catch (const json::exception& e) {
    PathLocator loc;
    json::sax_parse(bytes, &loc);
    if (e.id == 406) throw ParseError(loc.path(), "non-finite number");
    throw ParseError("$", std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string to_string(Kind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "unknown";
}

std::optional<Kind> kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kKindNames)
    if (s == name) return kind;
  return std::nullopt;
}

const std::vector<Kind>& all_kinds() {
  static const std::vector<Kind> v = [] {
    std::vector<Kind> out;
    for (const auto& kn : kKindNames) out.push_back(kn.first);
    return out;
  }();
  return v;
}

ConditionFactory make_factory(const ConditionSpec& c, std::uint64_t scenario_seed) {
  using T = ConditionSpec::Type;
  switch (c.type) {
    case T::Aps: return factory::aps(c.a, c.closed);
    case T::RightReference: return factory::right_reference(c.a);
    case T::Chiral: return factory::chiral(c.sign);
    case T::Transmission: return factory::transmission();
    case T::RandomGraph:
      return factory::random_graph(c.a, c.seed ? *c.seed : scenario_seed ^ c.salt, c.sampler);
    case T::Graph:
      return [c](const EndView& e) {
        auto sections = [&](const std::vector<std::vector<ConditionSpec::Coef>>& in) {
          std::vector<BoundarySection> out;
          for (const auto& sec : in) {
            BoundarySection phi(e.basis);
            for (const auto& co : sec) phi.coeffs()[resolve_coord(e.basis, co)] += co.value;
            out.push_back(std::move(phi));
          }
          return out;
        };
        std::vector<ModeEntry> entries;
        for (const auto& en : c.g)
          entries.push_back({resolve_coord(e.basis, en.from), resolve_coord(e.basis, en.to), en.to.value});
        return make_graph(e.basis, c.a, sections(c.w_plus), sections(c.w_minus), entries, c.closed);
      };
    case T::Deformed: return factory::deformed(make_factory(*c.inner, scenario_seed), c.s);
    case T::Complement: return factory::complement_of(make_factory(*c.inner, scenario_seed));
  }
  throw Error("unhandled condition type");
}

Scenario parse_scenario(const json& j, const std::string& path) {
  Scenario s;
  Obj o(j, path, &s.warnings);
  s.id = o.str("id");
  if (s.id.empty()) throw ParseError(o.at("id"), "id must be non-empty");
  std::string kind = o.str("kind");
  auto k = kind_from_string(kind);
  if (!k) throw ParseError(o.at("kind"), "unknown kind '" + kind + "'");
  s.kind = *k;
  long long seed = o.integer("seed", 0);
  if (seed < 0) throw ParseError(o.at("seed"), "seed must be non-negative");
  s.seed = static_cast<std::uint64_t>(seed);
  if (o.has("truncation")) s.truncation = positive_int(o, "truncation", 32, 1, 100000);
  if (o.has("tolerances")) {
    Obj t = o.sub("tolerances");
    s.tol.residual = t.num("residual", s.tol.residual);
    s.tol.inverse = t.num("inverse", s.tol.inverse);
    if (!(s.tol.residual > 0.0)) throw ParseError(t.at("residual"), "tolerance must be positive");
    if (!(s.tol.inverse > 0.0)) throw ParseError(t.at("inverse"), "tolerance must be positive");
    t.finish();
  }
  if (o.has("payload")) {
    Obj p = o.sub("payload");
    parse_payload(s, p);
  } else {
    json empty = json::object();
    Obj p(empty, o.at("payload"), &s.warnings);
    parse_payload(s, p);
  }
  o.finish();
  return s;
}

Scenario parse_scenario_text(const std::string& bytes) {
  return parse_scenario(parse_json(bytes));
}

std::vector<Scenario> parse_scenario_file(const std::string& bytes) {
  json j = parse_json(bytes);
  std::vector<Scenario> out;
  if (j.is_object() && j.contains("scenarios")) {
    const json& arr = j.at("scenarios");
    if (!arr.is_array()) throw ParseError("$.scenarios", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse_scenario(arr[i], idx("$.scenarios", i)));
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_scenario(j[i], idx("$", i)));
  } else {
    out.push_back(parse_scenario(j));
  }
  return out;
}

std::optional<Verdict> Report::first_failure() const {
  for (const auto& v : verdicts)
    if (!v.pass) return v;
  return std::nullopt;
}

int default_truncation_from_env() {
  const char* v = std::getenv("APSLAB_DEFAULT_N");
  if (!v || !*v) return 32;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 100000) throw Error(std::string("APSLAB_DEFAULT_N is not a positive integer: ") + v);
  return static_cast<int>(n);
}

Report run(const Scenario& s, const RunOptions& opt) {
  Report rep;
  rep.id = s.id;
  rep.kind = to_string(s.kind);
  rep.warnings = s.warnings;
  auto t0 = std::chrono::steady_clock::now();
  try {
    Runner r(s, opt, rep);
    r.go();
  } catch (const std::exception& e) {
    rep.error = "scenario '" + s.id + "' (" + rep.kind + ", N=" + std::to_string(rep.truncation) + "): " + e.what();
    rep.verdicts.push_back({"completed without error", false, e.what()});
  }
  if (opt.strict && !rep.warnings.empty())
    rep.verdicts.push_back({"strict schema", false, rep.warnings.front()});
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.pass = !rep.verdicts.empty() && !rep.first_failure();
  for (auto& row : rep.rows) {
    // sweep steps carry their own verdict; the scenario row carries the overall one
    if (row.scenario_id == rep.id) row.pass = rep.pass;
    row.seconds = rep.seconds;
  }
  if (!rep.error.empty() && rep.rows.empty()) {
    CsvRow row;
    row.scenario_id = rep.id;
    row.kind = rep.kind;
    row.seconds = rep.seconds;
    rep.rows.push_back(row);
  }
  return rep;
}

std::vector<Report> run_all(const std::vector<Scenario>& s, const RunOptions& opt, int jobs) {
  std::vector<Report> out(s.size());
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(s.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < s.size(); i = next++) out[i] = run(s[i], opt);
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return out;
}

Format format_from_string(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "csv") return Format::Csv;
  if (s == "md") return Format::Md;
  throw Error("unknown format '" + s + "' (json, csv, md)");
}

json to_json(const Report& r) {
  json verdicts = json::array(), identities = json::array(), rows = json::array();
  for (const auto& v : r.verdicts) verdicts.push_back({{"contract", v.contract}, {"pass", v.pass}, {"detail", v.detail}});
  for (const auto& i : r.identities)
    identities.push_back({{"name", i.name}, {"lhs", i.lhs}, {"rhs", i.rhs}, {"holds", i.holds}, {"detail", i.detail}});
  for (const auto& c : r.rows)
    rows.push_back({{"scenario_id", c.scenario_id},
                    {"kind", c.kind},
                    {"index", opt_json(c.index)},
                    {"dim_ker", opt_json(c.dim_ker)},
                    {"dim_coker", opt_json(c.dim_coker)},
                    {"residual_max", opt_json(c.residual_max)},
                    {"pass", c.pass},
                    {"seconds", c.seconds}});
  json j = {{"id", r.id},         {"kind", r.kind},           {"seed", r.seed},
            {"truncation", r.truncation}, {"pass", r.pass},   {"seconds", r.seconds},
            {"outputs", r.outputs}, {"verdicts", verdicts},   {"identities", identities},
            {"rows", rows},       {"warnings", r.warnings},   {"error", r.error}};
  if (auto f = r.first_failure()) j["failure"] = {{"contract", f->contract}, {"detail", f->detail}};
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  r.id = j.at("id").get<std::string>();
  r.kind = j.at("kind").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.truncation = j.at("truncation").get<int>();
  r.pass = j.at("pass").get<bool>();
  r.seconds = j.at("seconds").get<double>();
  r.outputs = j.at("outputs");
  r.error = j.value("error", "");
  r.warnings = j.value("warnings", std::vector<std::string>{});
  for (const auto& v : j.at("verdicts"))
    r.verdicts.push_back({v.at("contract").get<std::string>(), v.at("pass").get<bool>(), v.at("detail").get<std::string>()});
  for (const auto& i : j.at("identities"))
    r.identities.push_back({i.at("name").get<std::string>(), i.at("lhs").get<long long>(), i.at("rhs").get<long long>(),
                            i.at("holds").get<bool>(), i.at("detail").get<std::string>()});
  for (const auto& c : j.at("rows")) {
    CsvRow row;
    row.scenario_id = c.at("scenario_id").get<std::string>();
    row.kind = c.at("kind").get<std::string>();
    row.index = opt_from<long long>(c, "index");
    row.dim_ker = opt_from<long long>(c, "dim_ker");
    row.dim_coker = opt_from<long long>(c, "dim_coker");
    row.residual_max = opt_from<double>(c, "residual_max");
    row.pass = c.at("pass").get<bool>();
    row.seconds = c.at("seconds").get<double>();
    r.rows.push_back(row);
  }
  return r;
}

std::vector<Report> reports_from_json(const json& j) {
  std::vector<Report> out;
  for (const auto& r : j.at("reports")) out.push_back(report_from_json(r));
  return out;
}

std::string emit(const std::vector<Report>& reports, Format f) {
  bool all = std::all_of(reports.begin(), reports.end(), [](const Report& r) { return r.pass; });
  std::ostringstream os;
  switch (f) {
    case Format::Json: {
      json arr = json::array();
      for (const auto& r : reports) arr.push_back(to_json(r));
      os << json{{"pass", all}, {"reports", arr}}.dump(2) << "\n";
      break;
    }
    case Format::Csv: {
      os << "scenario_id,kind,index,dim_ker,dim_coker,residual_max,pass,seconds\n";
      auto opt = [](const auto& v) {
        std::ostringstream s;
        if (v) s << std::setprecision(17) << *v;
        return s.str();
      };
      for (const auto& r : reports)
        for (const auto& c : r.rows)
          os << csv_field(c.scenario_id) << "," << c.kind << "," << opt(c.index) << "," << opt(c.dim_ker) << ","
             << opt(c.dim_coker) << "," << opt(c.residual_max) << "," << (c.pass ? "true" : "false") << ","
             << std::setprecision(6) << c.seconds << "\n";
      break;
    }
    case Format::Md: {
      os << "# apslab report\n\n";
      os << "Overall: " << (all ? "PASS" : "FAIL") << " (" << reports.size() << " scenarios)\n";
      for (const auto& r : reports) {
        os << "\n## " << md_cell(r.id) << " (" << r.kind << ")\n\n";
        os << "N = " << r.truncation << ", seed = " << r.seed << ", " << std::setprecision(3) << r.seconds << " s, "
           << (r.pass ? "PASS" : "FAIL") << "\n\n";
        if (!r.identities.empty()) {
          os << "| identity | lhs | rhs | holds | detail |\n|---|---:|---:|---|---|\n";
          for (const auto& i : r.identities)
            os << "| " << md_cell(i.name) << " | " << i.lhs << " | " << i.rhs << " | " << (i.holds ? "yes" : "no") << " | "
               << md_cell(i.detail) << " |\n";
          os << "\n";
        }
        for (const auto& v : r.verdicts)
          os << "- " << (v.pass ? "[pass] " : "[FAIL] ") << md_cell(v.contract) << ": " << md_cell(v.detail) << "\n";
        for (const auto& w : r.warnings) os << "- warning: " << md_cell(w) << "\n";
        if (!r.error.empty()) os << "\nError: " << md_cell(r.error) << "\n";
      }
      break;
    }
  }
  return os.str();
}

}  // namespace apslab::scenario
