#include <doctest.h>

#include "apslab/index.hpp"
#include "dense_oracle.hpp"

#include <cmath>
#include <random>

using namespace apslab;

namespace {

Setup scalar_setup(double shift, ConditionFactory left, ConditionFactory right, double rho = 1.0) {
  return Setup{integer_spectrum(shift), rho, std::move(left), std::move(right)};
}

// per-mode sign table: left B(a) keeps lambda < a at t = 0; right H_[b,inf) keeps lambda >= b at t = rho
struct SignTable {
  int ker = 0, coker = 0;
};
SignTable sign_table(const Model& m, double a, double b) {
  SignTable t;
  for (int i = 0; i < m.basis->dim(); ++i) {
    double l = m.basis->lambda(i);
    t.ker += (l < a && l >= b) ? 1 : 0;
    t.coker += (l >= a && l < b) ? 1 : 0;
  }
  return t;
}

ConditionFactory graph_with(std::vector<double> wplus_lambdas, double a) {
  return [=](const EndView& e) {
    std::vector<BoundarySection> w;
    for (double l : wplus_lambdas)
      for (int i = 0; i < e.basis->dim(); ++i)
        if (e.basis->lambda(i) == l) {
          BoundarySection s(e.basis);
          s.coeffs()[i] = 1.0;
          w.push_back(s);
        }
    return make_graph(e.basis, a, w, {}, {});
  };
}

}  // namespace

TEST_CASE("index examples") {
  auto r0 = index(scalar_setup(0.0, factory::aps(0.0), factory::right_reference(0.0)), 16);
  CHECK(r0.index == 0);
  CHECK(r0.dim_ker == 0);
  CHECK(r0.dim_coker == 0);
  CHECK(r0.certificate.agrees);
  CHECK(r0.certificate.n_used == 16);
  CHECK(r0.certificate.n_doubled == 32);
  auto r1 = index(scalar_setup(0.0, factory::aps(1.0), factory::right_reference(0.0)), 16);
  CHECK(r1.index == 1);
  CHECK(r1.dim_ker == 1);
  CHECK(r1.dim_coker == 0);
  for (double a : {-2.5, -0.5, 0.5, 3.5}) {
    auto r = index(scalar_setup(0.0, factory::aps(a), factory::right_reference(a)), 16);
    CHECK(r.index == 0);
    CHECK(r.dim_ker == 0);
  }
}

TEST_CASE("APS sign table against brute force") {
  for (double shift : {0.0, 0.25}) {
    auto m = build_model(integer_spectrum(shift), 10);
    for (double a = -3.5; a <= 3.5; a += 0.5)
      for (double b = -3.5; b <= 3.5; b += 0.5) {
        CylinderProblem p;
        p.basis = m.basis;
        p.sigma = m.sigma;
        p.rho = 0.7;
        p.left = make_generalized_aps(m.basis, a);
        p.right = make_generalized_aps(m.basis->negated(), -b, true);
        auto r = index_once(p);
        auto t = sign_table(m, a, b);
        CAPTURE(a);
        CAPTURE(b);
        CHECK(r.dim_ker == t.ker);
        CHECK(r.dim_coker == t.coker);
        CHECK(r.counting_index == r.index);
      }
  }
}

TEST_CASE("aps_shift examples") {
  auto base = scalar_setup(0.0, factory::aps(0.0), factory::right_reference(0.0));
  auto r = aps_shift_check(base, -0.5, 1.5, 16);
  CHECK(r.holds);
  CHECK(r.lhs == 2);
  CHECK(r.rhs == 2);
  auto same_gap = aps_shift_check(base, 0.2, 0.8, 16);
  CHECK(same_gap.holds);
  CHECK(same_gap.rhs == 0);
  auto equal = aps_shift_check(base, 0.5, 0.5, 16);
  CHECK(equal.holds);
  CHECK(equal.lhs == 0);
  CHECK_THROWS_AS(aps_shift_check(base, 1.0, 0.0, 16), Error);
}

TEST_CASE("graph index examples") {
  auto base = scalar_setup(0.0, factory::aps(0.5), factory::right_reference(0.0));
  auto trivial = graph_index_check(base, 16);
  CHECK(trivial.holds);
  CHECK(trivial.lhs == trivial.rhs);

  auto one = scalar_setup(0.0, graph_with({2.0}, 0.5), factory::right_reference(0.0));
  auto r = graph_index_check(one, 16);
  CHECK(r.holds);
  CHECK(r.lhs - r.runs[1].index == 1);

  auto spec = integer_spectrum(0.0);
  spec.doubled = true;
  Setup tr{spec, 1.0, factory::transmission(), factory::right_reference(0.0)};
  // with ker A_0 != 0 both kernel directions sit in [0, inf): cut-form W+ has one vector, W- none
  auto t = graph_index_check(tr, 12);
  CHECK(t.holds);
  CHECK(t.lhs == t.runs[1].index + 1);
  auto half = integer_spectrum(0.5);
  half.doubled = true;
  Setup th{half, 1.0, factory::transmission(), factory::right_reference(0.0)};
  auto t2 = graph_index_check(th, 12);
  CHECK(t2.holds);
  CHECK(t2.lhs == t2.runs[1].index);
}

TEST_CASE("deformation sweeps") {
  auto g0 = scalar_setup(0.25, factory::aps(0.0), factory::right_reference(0.0));
  CHECK(deformation_sweep(g0, 3, 12).constant);
  auto spec = integer_spectrum(0.0);
  spec.doubled = true;
  Setup tr{spec, 1.0, factory::transmission(), factory::right_reference(0.0)};
  auto sw = deformation_sweep(tr, 3, 12);
  CHECK(sw.constant);
  CHECK(sw.s == std::vector<double>{0.0, 0.5, 1.0});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Setup s{integer_spectrum(0.25, 2), 1.0, factory::random_graph(0.0, seed), factory::right_reference(0.0)};
    auto r = deformation_sweep(s, 11, 10);
    CHECK(r.runs.size() == 11);
    CHECK(r.constant);
  }
  CHECK_THROWS_AS(deformation_sweep(g0, 1, 12), Error);
}

TEST_CASE("Fredholm pair examples") {
  auto spec = integer_spectrum(0.0);
  spec.band = 1.0;
  auto m = build_model(spec, 6);
  auto e = left_end(m);
  // band of three modes; X = span(e_-1, e_0), Y = span(e_0)
  auto x = graph_with({0.0}, 0.0)(e);
  auto y = graph_with({1.0}, 0.0)(e);
  auto r = fredholm_pair({&x, false}, {&y, true});
  CHECK(r.dim_intersection == 1);
  CHECK(r.codim_sum == 1);
  CHECK(r.index == 0);

  auto big = build_model(integer_spectrum(0.0), 12);
  for (double a : {-2.5, 0.5, 1.5})
    for (double b : {-1.5, 0.5, 3.5}) {
      auto upper = make_generalized_aps(big.basis, a);
      auto lower = make_generalized_aps(big.basis, b);
      auto pr = fredholm_pair({&upper, true}, {&lower, false});
      int expect = 0;
      for (int i = 0; i < big.basis->dim(); ++i) {
        double l = big.basis->lambda(i);
        expect += (l >= a && l < b) ? 1 : 0;
        expect -= (l >= b && l < a) ? 1 : 0;
      }
      CHECK(pr.index == expect);
    }
  auto p1 = make_generalized_aps(big.basis, 0.0);
  CHECK_THROWS_AS(fredholm_pair({&p1, false}, {&p1, false}), Error);
}

TEST_CASE("property: pair index of g = 0 conditions and antisymmetry") {
  std::mt19937_64 rng(31337);
  auto m = build_model(integer_spectrum(0.25, 2), 10);
  GraphSampler zero;
  zero.max_g_norm = 0.0;
  for (int k = 0; k < 30; ++k) {
    auto b1 = random_graph_condition(m.basis, 0.0, rng, zero);
    auto b2 = random_graph_condition(m.basis, 0.0, rng, zero);
    auto r = fredholm_pair({&b1, false}, {&b2, true});
    CHECK(r.index == b1.dim_w_plus() + b2.dim_w_minus() - b1.dim_w_minus() - b2.dim_w_plus());
    auto g1 = random_graph_condition(m.basis, 0.0, rng);
    auto g2 = random_graph_condition(m.basis, 0.0, rng);
    auto x = fredholm_pair({&g1, false}, {&g2, true});
    auto xp = fredholm_pair({&g1, true}, {&g2, false});
    CHECK(xp.index == -x.index);
    CHECK(x.index == x.dim_intersection - x.codim_sum);
  }
}

TEST_CASE("pair identity") {
  auto base = scalar_setup(0.25, factory::aps(0.0), factory::right_reference(0.0));
  auto same = pair_identity_check(base, factory::aps(0.0), factory::aps(0.0), 12);
  CHECK(same.holds);
  CHECK(same.lhs == 0);
  GraphSampler opt;
  opt.max_g_norm = 0.9;
  auto g = factory::random_graph(0.0, 77, opt);
  auto red = pair_identity_check(base, factory::aps(0.0), g, 12);
  Setup gs = base;
  gs.left = g;
  auto gi = graph_index_check(gs, 12);
  CHECK(red.holds);
  CHECK(red.lhs == -(gi.lhs - gi.runs[1].index));

  Setup chiral{chiral_spectrum(cd(0.0, 0.5)), 1.0, factory::chiral(1), factory::chiral(1)};
  auto sharp = pair_identity_check(chiral, factory::chiral(1), factory::chiral(-1), 8);
  CHECK(sharp.refused);
  CHECK_FALSE(sharp.holds);
  CHECK(sharp.witness == doctest::Approx(1.0));
}

TEST_CASE("splitting") {
  Setup glued = scalar_setup(0.25, factory::aps(0.0), factory::right_reference(0.0), 2.0);
  for (double a : {-1.5, 0.0, 2.0}) {
    auto r = split_check(glued, factory::aps(-a), 10);
    CHECK(r.holds);
  }
  auto spec = integer_spectrum(0.0);
  spec.doubled = true;
  Setup tg{spec, 2.0, factory::aps(1.5), factory::right_reference(-0.5)};
  auto r = split_check(tg, factory::deformed(factory::transmission(), 0.5), 10);
  CHECK(r.holds);
  // nonzero halves that still add up
  Setup uneven = scalar_setup(0.0, factory::aps(2.5), factory::right_reference(-1.5), 2.0);
  auto u = split_check(uneven, factory::aps(0.5), 10);
  CHECK(u.holds);
  CHECK(u.runs[1].index != 0);
  CHECK(u.runs[2].index != 0);
}

TEST_CASE("cobordism examples") {
  auto r = cobordism_check(chiral_spectrum(0.0), 1.0, 8);
  CHECK(r.left_contribution == 0);
  CHECK(r.right_contribution == 0);
  CHECK(r.total == 0);
  CHECK(r.plus.index == 0);
  CHECK(r.minus.index == 0);
  CHECK(r.holds);
  auto h = cobordism_check(chiral_spectrum(0.5), 1.0, 8);
  CHECK(h.holds);
  CHECK_THROWS_AS(cobordism_check(integer_spectrum(0.0), 1.0, 8), Error);
}

TEST_CASE("property: nested shift, adjoint symmetry, counting and dense agreement") {
  std::mt19937_64 rng(8080);
  for (int k = 0; k < 20; ++k) {
    Setup base{integer_spectrum(0.25 * (k % 4), 1 + k % 2), 0.6 + 0.1 * (k % 5), factory::aps(0.0),
               factory::random_graph(0.5, 100 + k)};
    auto nested = nested_shift_check(base, graph_with({1.0 + 0.25 * (k % 4)}, -0.5),
                                     graph_with({1.0 + 0.25 * (k % 4), 3.0 + 0.25 * (k % 4)}, -0.5), 10);
    CHECK(nested.holds);
    CHECK(nested.rhs == 1 + k % 2);  // one W+ vector per fiber
    Setup s = base;
    s.left = factory::random_graph(-1.0, 200 + k);
    auto p = instantiate(s, 10);
    auto r = index_once(p);
    auto q = index_once(adjoint_problem(p));
    CHECK(q.index == -r.index);
    CHECK(r.counting_index == r.index);
    auto d = oracle::dense_counts(p);
    CHECK(d.ker == r.dim_ker);
    CHECK(d.coker == r.dim_coker);
    CHECK(r.verification_residual <= 1e-10);
    CHECK(index(s, 10).certificate.agrees);
  }
}
