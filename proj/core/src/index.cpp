#include "apslab/index.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace apslab {

EndView left_end(const Model& m) { return {m.basis, m.sigma}; }
EndView right_end(const Model& m) { return {m.basis->negated(), m.sigma.negated()}; }

CylinderProblem instantiate(const Setup& s, int truncation) {
  if (!s.left || !s.right) throw Error("setup needs both boundary conditions");
  Model m = build_model(s.model, truncation);
  CylinderProblem p;
  p.basis = m.basis;
  p.sigma = m.sigma;
  p.rho = s.rho;
  p.left = s.left(left_end(m));
  EndView r = right_end(m);
  p.right = s.right(r);
  p.validate();
  return p;
}

namespace factory {

ConditionFactory aps(double a, bool closed_below) {
  return [=](const EndView& e) { return make_generalized_aps(e.basis, a, closed_below); };
}

ConditionFactory chiral(int sign) {
  return [=](const EndView& e) { return make_chiral(e.basis, e.sigma, sign); };
}

ConditionFactory transmission() {
  return [](const EndView& e) { return make_transmission(e.basis); };
}

ConditionFactory random_graph(double a, std::uint64_t seed, GraphSampler opt) {
  return [=](const EndView& e) {
    std::mt19937_64 rng(seed);
    return random_graph_condition(e.basis, a, rng, opt);
  };
}

ConditionFactory deformed(ConditionFactory f, double s) {
  return [=](const EndView& e) { return deform(f(e), s); };
}

ConditionFactory complement_of(ConditionFactory opposite) {
  return [=](const EndView& e) {
    EndView o{e.basis->negated(), e.sigma.negated()};
    BoundaryCondition c = orthocomplement(opposite(o));
    c.basis = e.basis;
    return c;
  };
}

ConditionFactory right_reference(double a) { return aps(-a, true); }

}  // namespace factory

namespace {

double member_distance(const BoundarySection& x, const BoundaryCondition& b) {
  double n = x.coeffs().norm();
  if (n == 0.0) return 0.0;
  return (x.coeffs() - b.project(x).coeffs()).norm() / n;
}

}  // namespace

int counting_index(const CylinderProblem& p) {
  int total = 0;
  for (const auto& c : joint_clusters(p.left, p.right))
    total += p.left.dim_on(c) + p.right.dim_on(c) - static_cast<int>(c.size());
  return total;
}

IndexReport index_once(const CylinderProblem& p, bool keep_bases) {
  IndexReport r;
  auto kd = homogeneous_kernel(p);
  auto ck = cokernel(p);
  r.dim_ker = static_cast<int>(kd.basis.size());
  r.dim_coker = static_cast<int>(ck.size());
  r.index = r.dim_ker - r.dim_coker;
  r.counting_index = counting_index(p);
  r.certificate.n_used = p.basis->truncation();

  double worst = 0.0;
  for (const auto& phi : kd.basis) {
    double n = section_norm(phi);
    worst = std::max(worst, section_norm(model_apply(phi, p.sigma)) / n);
    worst = std::max(worst, member_distance(phi.trace(0.0), p.left));
    worst = std::max(worst, member_distance(phi.trace(p.rho), p.right));
  }
  auto adl = adjoint(p.left, p.sigma);
  auto adr = adjoint(p.right, p.sigma.negated());
  for (const auto& psi : ck) {
    double n = section_norm(psi);
    worst = std::max(worst, section_norm(model_adjoint_apply(psi, p.sigma)) / n);
    for (auto [t, ad] : {std::pair{0.0, &adl}, std::pair{p.rho, &adr}}) {
      auto tr = psi.trace(t);
      BoundarySection x(tr.basis(), apply_blocks_adjoint(ad->sigma, tr.coeffs()));
      worst = std::max(worst, member_distance(x, ad->inner));
    }
  }
  r.verification_residual = worst;
  if (keep_bases) {
    r.kernel = std::move(kd.basis);
    r.cokernel = std::move(ck);
  }
  return r;
}

IndexReport index(const Setup& s, int truncation, bool keep_bases) {
  IndexReport r = index_once(instantiate(s, truncation), keep_bases);
  IndexReport r2 = index_once(instantiate(s, 2 * truncation), false);
  r.certificate.n_doubled = 2 * truncation;
  r.certificate.agrees = r.dim_ker == r2.dim_ker && r.dim_coker == r2.dim_coker;
  if (!r.certificate.agrees) {
    std::ostringstream os;
    os << "truncation certificate failed: N=" << truncation << " gives (" << r.dim_ker << "," << r.dim_coker
       << "), 2N gives (" << r2.dim_ker << "," << r2.dim_coker << ")";
    throw Error(os.str());
  }
  return r;
}

IdentityReport aps_shift_check(const Setup& base, double a, double b, int truncation) {
  if (!(a <= b)) throw Error("aps_shift_check needs a <= b");
  IdentityReport rep;
  rep.name = "aps_shift";
  Setup sa = base, sb = base;
  sa.left = factory::aps(a);
  sb.left = factory::aps(b);
  auto ra = index(sa, truncation), rb = index(sb, truncation);
  rep.lhs = rb.index - ra.index;
  auto count = [&](int n) {
    Model m = build_model(base.model, n);
    long long c = 0;
    for (int i = 0; i < m.basis->dim(); ++i) c += Interval{a, b, true, false}.contains(m.basis->lambda(i)) ? 1 : 0;
    return c;
  };
  rep.rhs = count(truncation);
  rep.certified = rep.rhs == count(2 * truncation);
  rep.holds = rep.lhs == rep.rhs && rep.certified;
  rep.runs = {ra, rb};
  return rep;
}

IdentityReport graph_index_check(const Setup& s, int truncation) {
  IdentityReport rep;
  rep.name = "graph_index";
  auto p = instantiate(s, truncation);
  const auto& b = p.left;
  auto cf = rebase(b, b.cut, b.closed_below);
  Setup ref = s;
  ref.left = factory::aps(b.cut, b.closed_below);
  auto rb = index(s, truncation), ra = index(ref, truncation);
  rep.lhs = rb.index;
  rep.rhs = static_cast<long long>(ra.index) + cf.dim_w_plus() - cf.dim_w_minus();
  std::ostringstream os;
  os << "ind B(a)=" << ra.index << " dim W+=" << cf.dim_w_plus() << " dim W-=" << cf.dim_w_minus();
  rep.detail = os.str();
  rep.holds = rep.lhs == rep.rhs;
  rep.runs = {rb, ra};
  return rep;
}

IdentityReport nested_shift_check(const Setup& base, const ConditionFactory& b1, const ConditionFactory& b2,
                                  int truncation) {
  IdentityReport rep;
  rep.name = "nested_shift";
  Setup s1 = base, s2 = base;
  s1.left = b1;
  s2.left = b2;
  auto r1 = index(s1, truncation), r2 = index(s2, truncation);
  rep.lhs = r2.index - r1.index;
  auto q = [&](int n) {
    Model m = build_model(base.model, n);
    auto e = left_end(m);
    return quotient_dim(b1(e), b2(e));
  };
  rep.rhs = q(truncation);
  rep.certified = rep.rhs == q(2 * truncation);
  rep.holds = rep.lhs == rep.rhs && rep.certified;
  rep.runs = {r1, r2};
  return rep;
}

SweepReport deformation_sweep(const Setup& s, int steps, int truncation) {
  if (steps < 2) throw Error("deformation_sweep needs at least two steps");
  SweepReport rep;
  for (int k = 0; k < steps; ++k) {
    double t = static_cast<double>(k) / (steps - 1);
    Setup sk = s;
    sk.left = factory::deformed(s.left, t);
    rep.s.push_back(t);
    rep.runs.push_back(index(sk, truncation));
  }
  rep.value = rep.runs.front().index;
  rep.constant = std::all_of(rep.runs.begin(), rep.runs.end(), [&](const IndexReport& r) { return r.index == rep.value; });
  return rep;
}

FredholmPairReport fredholm_pair(const Subspace& x, const Subspace& y) {
  if (!x.condition || !y.condition) throw Error("fredholm_pair needs two subspaces");
  const auto& bx = *x.condition;
  const auto& by = *y.condition;
  FredholmPairReport r;
  for (const auto& c : joint_clusters(bx, by)) {
    const int n = static_cast<int>(c.size());
    bool tail_only = std::none_of(c.begin(), c.end(), [&](int i) { return bx.atom_of(i) == -1 || by.atom_of(i) == -1; });
    int inter = 0, codim = 0;
    if (n == 1 && bx.atom_of(c[0]) == -2 && by.atom_of(c[0]) == -2) {
      bool lo = bx.basis->lambda(c[0]) < 0.0;
      bool in_x = lo != x.complement, in_y = lo != y.complement;
      inter = (in_x && in_y) ? 1 : 0;
      codim = (!in_x && !in_y) ? 1 : 0;
    } else {
      MatrixXcd id = MatrixXcd::Identity(n, n);
      MatrixXcd px = bx.projector(c), py = by.projector(c);
      if (x.complement) px = id - px;
      if (y.complement) py = id - py;
      int dx = x.complement ? n - bx.dim_on(c) : bx.dim_on(c);
      int dy = y.complement ? n - by.dim_on(c) : by.dim_on(c);
      MatrixXcd both(n, 2 * n);
      both << px, py;
      int sum = numerical_rank(both, 1e-9);
      inter = dx + dy - sum;
      codim = n - sum;
    }
    if (tail_only && (inter != 0 || codim != 0))
      throw Error("fredholm_pair: tails incompatible (not a Fredholm pair in the band-limited class)");
    r.dim_intersection += inter;
    r.codim_sum += codim;
  }
  r.index = r.dim_intersection - r.codim_sum;
  return r;
}

IdentityReport pair_identity_check(const Setup& base, const ConditionFactory& b1, const ConditionFactory& b2,
                                   int truncation) {
  IdentityReport rep;
  rep.name = "pair_identity";
  Model m = build_model(base.model, truncation);
  auto e = left_end(m);
  BoundaryCondition c1 = b1(e), c2 = b2(e);
  double prod = c1.g.operator_norm() * c2.g.operator_norm();
  rep.witness = prod;
  // a product within rounding of 1 cannot be certified below 1
  if (!(prod < 1.0 - 1e-12)) {
    rep.refused = true;
    rep.holds = false;
    std::ostringstream os;
    os << "refused: ||g1||*||g2|| = " << prod << " >= 1";
    rep.detail = os.str();
    return rep;
  }
  Setup s1 = base, s2 = base;
  s1.left = b1;
  s2.left = b2;
  auto r1 = index(s1, truncation), r2 = index(s2, truncation);
  rep.lhs = r1.index - r2.index;
  rep.rhs = fredholm_pair({&c1, false}, {&c2, true}).index;
  Model m2 = build_model(base.model, 2 * truncation);
  auto e2 = left_end(m2);
  BoundaryCondition d1 = b1(e2), d2 = b2(e2);
  rep.certified = fredholm_pair({&d1, false}, {&d2, true}).index == rep.rhs;
  rep.holds = rep.lhs == rep.rhs && rep.certified;
  rep.runs = {r1, r2};
  return rep;
}

IdentityReport split_check(const Setup& glued, const ConditionFactory& cut, int truncation) {
  IdentityReport rep;
  rep.name = "split";
  Setup left = glued, right = glued;
  left.rho = right.rho = glued.rho / 2.0;
  left.right = cut;
  right.left = factory::complement_of(cut);
  auto rg = index(glued, truncation), rl = index(left, truncation), rr = index(right, truncation);
  rep.lhs = rg.index;
  rep.rhs = static_cast<long long>(rl.index) + rr.index;
  std::ostringstream os;
  os << "left=" << rl.index << " right=" << rr.index;
  rep.detail = os.str();
  rep.holds = rep.lhs == rep.rhs;
  rep.runs = {rg, rl, rr};
  return rep;
}

CobordismReport cobordism_check(const ModelSpec& model, double rho, int truncation) {
  CobordismReport rep;
  auto contrib = [&](int n) {
    Model m = build_model(model, n);
    auto l = make_chiral(m.basis, m.sigma, 1);
    auto r = make_chiral(right_end(m).basis, m.sigma.negated(), 1);
    return std::pair{l.dim_w_plus() - l.dim_w_minus(), r.dim_w_plus() - r.dim_w_minus()};
  };
  auto [l, r] = contrib(truncation);
  auto [l2, r2] = contrib(2 * truncation);
  if (l != l2 || r != r2) throw Error("cobordism: truncation certificate failed for the kernel counts");
  rep.left_contribution = l;
  rep.right_contribution = r;
  rep.total = l + r;
  Setup plus{model, rho, factory::chiral(1), factory::chiral(1)};
  Setup minus{model, rho, factory::chiral(-1), factory::chiral(-1)};
  rep.plus = index(plus, truncation);
  rep.minus = index(minus, truncation);
  rep.holds = rep.total == 0 && rep.plus.index == 0 && rep.minus.index == 0;
  return rep;
}

}  // namespace apslab
