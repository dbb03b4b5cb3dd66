#include <doctest.h>

#include "apslab/profile.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace apslab;

namespace {
// composite Simpson on [a, b]
cd simpson(const std::function<cd(double)>& f, double a, double b, int n = 2000) {
  double h = (b - a) / n;
  cd acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}
}  // namespace

TEST_CASE("exponential-polynomial integrals against frozen values") {
  ExpPoly f({{1.0, 2, cd(0.3, 0.4)}});
  cd v = f.integral(0.0, 1.5);
  CHECK(v.real() == doctest::Approx(1.4091675136045891).epsilon(1e-14));
  CHECK(v.imag() == doctest::Approx(0.69811432090137918).epsilon(1e-14));
  ExpPoly h({{1.0, 1, -7.0}});
  CHECK(h.integral(0.2, 1.1).real() == doctest::Approx(0.011997818713647763).epsilon(1e-14));
}

TEST_CASE("antiderivative, resonance and derivative") {
  ExpPoly c = ExpPoly::constant(2.0);
  auto a = c.antiderivative();
  CHECK(std::abs(a(3.0) - a(0.0) - 6.0) <= 1e-14);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 200; ++k) {
    int p = k % 4;
    cd mu(nd(rng), nd(rng));
    if (k % 10 == 0) mu = 0.0;
    ExpPoly e({{cd(nd(rng), nd(rng)), p, mu}});
    auto d = e.antiderivative(1.3).derivative() - e;
    for (double t : {0.0, 0.4, 1.3}) CHECK(std::abs(d(t)) <= 1e-12 * (1.0 + std::abs(e(t))));
    double x = 0.7;
    cd fd = (e(x + 1e-6) - e(x - 1e-6)) / 2e-6;
    CHECK(std::abs(e.derivative()(x) - fd) <= 1e-6 * (1.0 + std::abs(fd)));
  }
}

TEST_CASE("small exponents integrate without cancellation") {
  for (double mu : {1e-3, 1e-7, 1e-10, 1e-13}) {
    ExpPoly e({{1.0, 1, mu}});
    // sum_m mu^m 2^{m+2} / (m! (m+2))
    double exact = 0.0, c = 1.0;
    for (int m = 0; m < 30; ++m, c *= mu * 2.0 / m) exact += c * 4.0 / (m + 2);
    CHECK(e.integral(0.0, 2.0).real() == doctest::Approx(exact).epsilon(1e-9));
    CHECK(e.integral(0.0, 2.0).real() == doctest::Approx(2.0).epsilon(1e-2));
  }
}

TEST_CASE("profiles: knots, products and integrals") {
  Profile chi = cutoff(1.0);
  CHECK(chi(0.0) == cd(1.0));
  CHECK(std::abs(chi(1.0 / 3.0) - 1.0) <= 1e-14);
  CHECK(std::abs(chi(0.5) - 0.5) <= 1e-14);
  CHECK(std::abs(chi(2.0 / 3.0)) <= 1e-14);
  CHECK(chi(0.9) == cd(0.0));
  // C^1 at the knots
  auto d = chi.derivative();
  CHECK(std::abs(d(1.0 / 3.0 + 1e-12)) <= 1e-9);
  CHECK(std::abs(d(2.0 / 3.0 - 1e-12)) <= 1e-9);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 20; ++k) {
    Profile p(ExpPoly({{cd(nd(rng), nd(rng)), k % 3, cd(nd(rng), nd(rng))}}));
    Profile q = p * chi;
    cd ref = simpson([&](double t) { return q(t); }, 0.0, 1.0 / 3.0) +
             simpson([&](double t) { return q(t); }, 1.0 / 3.0, 2.0 / 3.0) +
             simpson([&](double t) { return q(t); }, 2.0 / 3.0, 1.2);
    CHECK(std::abs(q.integral(1.2) - ref) <= 1e-10 * (1.0 + std::abs(ref)));
    cd ip = profile_inner(p, p, 1.0);
    CHECK(std::abs(ip.imag()) <= 1e-12 * std::abs(ip));
  }
}

TEST_CASE("r_lambda examples") {
  auto one = Profile(ExpPoly::constant(1.0));
  auto f0 = r_lambda(0.0, one, 1.0);
  for (double t : {0.0, 0.3, 1.0}) CHECK(std::abs(f0(t) - t) <= 1e-15);
  auto f2 = r_lambda(2.0, one, 1.0);
  CHECK(f2(0.7).real() == doctest::Approx(0.37670151802919676).epsilon(1e-14));
  CHECK(profile_inner(f2, f2, 1.0).real() == doctest::Approx(0.095189093378607287).epsilon(1e-13));
  auto f2p = f2.derivative();
  CHECK(profile_inner(f2p, f2p, 1.0).real() == doctest::Approx(0.24542109027781645).epsilon(1e-13));
  auto fm = r_lambda(-1.0, one, 1.0);
  CHECK(std::abs(fm(1.0)) <= 1e-15);
  CHECK(fm(0.3).real() == doctest::Approx(-0.50341469620859049).epsilon(1e-14));
  CHECK(profile_inner(fm, fm, 1.0).real() == doctest::Approx(0.1680912407245783).epsilon(1e-13));
  auto res = r_lambda(1.0, Profile(ExpPoly::exponential(1.0, -1.0)), 1.0);
  CHECK(res(0.5).real() == doctest::Approx(0.30326532985631671).epsilon(1e-14));
}

TEST_CASE("property: r_lambda solves the ODE with the right end condition") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 100; ++k) {
    double lam = std::round(nd(rng) * 4.0) / (k % 2 ? 1.0 : 2.0);
    double rho = 0.5 + std::abs(nd(rng));
    std::vector<ExpTerm> terms;
    for (int j = 0; j < 3; ++j) terms.push_back({cd(nd(rng), nd(rng)), j, cd(nd(rng), nd(rng))});
    if (k % 5 == 0) terms.push_back({1.0, 1, -lam});  // resonant
    Profile g(ExpPoly(std::move(terms)));
    if (k % 7 == 0) g = g * cutoff(rho);
    auto f = r_lambda(lam, g, rho);
    auto r = f.derivative() + f * cd(lam, 0.0) - g;
    double gn = profile_norm(g, rho);
    CHECK(gn == doctest::Approx(std::sqrt(profile_inner(g, g, rho).real())).epsilon(1e-10));
    CHECK(profile_norm(r, rho) <= 1e-12 * gn);
    CHECK(std::abs(lam >= 0.0 ? f(0.0) : f(rho)) <= 1e-12 * (1.0 + gn));
  }
}
