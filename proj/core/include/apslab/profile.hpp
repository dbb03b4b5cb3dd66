#pragma once

#include "apslab/spectral.hpp"

#include <vector>

namespace apslab {

// c * t^p * exp(mu t)
struct ExpTerm {
  cd c;
  int p = 0;
  cd mu;
};

class ExpPoly {
 public:
  ExpPoly() = default;
  explicit ExpPoly(std::vector<ExpTerm> terms) : terms_(std::move(terms)) {}
  static ExpPoly constant(cd c) { return ExpPoly({{c, 0, 0.0}}); }
  static ExpPoly exponential(cd c, cd mu) { return ExpPoly({{c, 0, mu}}); }

  const std::vector<ExpTerm>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  cd operator()(double t) const;
  ExpPoly derivative() const;
  // F with F' = *this; resonant terms (mu ~ 0) raise the degree. Terms with
  // |mu| span <= 1/2 use the Taylor series, accurate on [0, span].
  ExpPoly antiderivative(double span = 0.0) const;
  ExpPoly conj() const;
  // multiply by exp(dmu t)
  ExpPoly shifted(cd dmu) const;
  cd integral(double a, double b) const;
  // merge terms with equal (p, mu) and drop exact zeros
  ExpPoly& simplify();

  ExpPoly& operator+=(const ExpPoly& o);
  ExpPoly& operator*=(cd s);
  friend ExpPoly operator+(ExpPoly a, const ExpPoly& b) { return a += b; }
  friend ExpPoly operator-(ExpPoly a, const ExpPoly& b) {
    ExpPoly nb = b;
    nb *= -1.0;
    return a += nb;
  }
  friend ExpPoly operator*(ExpPoly a, cd s) { return a *= s; }
  friend ExpPoly operator*(const ExpPoly& a, const ExpPoly& b);

 private:
  std::vector<ExpTerm> terms_;
};

// Piecewise exponential-polynomial on [0, inf): piece i lives on
// [knots[i-1], knots[i]) with knots[-1] = 0 and the last piece open-ended.
class Profile {
 public:
  Profile() = default;
  explicit Profile(ExpPoly single) : pieces_{std::move(single)} {}
  Profile(std::vector<double> knots, std::vector<ExpPoly> pieces);

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<ExpPoly>& pieces() const { return pieces_; }
  bool is_zero() const;
  bool piecewise() const { return !knots_.empty(); }

  cd operator()(double t) const;
  Profile derivative() const;
  Profile conj() const;
  Profile refined(const std::vector<double>& knots) const;
  Profile& simplify();
  // integral over [0, rho]
  cd integral(double rho) const;

  Profile& operator+=(const Profile& o);
  Profile& operator*=(cd s);
  friend Profile operator+(Profile a, const Profile& b) { return a += b; }
  friend Profile operator-(Profile a, const Profile& b) {
    Profile nb = b;
    nb *= -1.0;
    return a += nb;
  }
  friend Profile operator*(Profile a, cd s) { return a *= s; }
  friend Profile operator*(const Profile& a, const Profile& b);

 private:
  std::vector<double> knots_;
  std::vector<ExpPoly> pieces_;  // empty -> zero profile
};

// f' + lambda f = g with f(0) = 0 (lambda >= 0) or f(rho) = 0 (lambda < 0)
Profile r_lambda(double lambda, const Profile& g, double rho);

// int_0^rho f conj(h)
cd profile_inner(const Profile& f, const Profile& h, double rho);
// L^2 norm on [0, rho], accurate also for tiny residuals
double profile_norm(const Profile& f, double rho);

// C^1 cutoff: 1 on [0, r/3], 0 on [2r/3, inf), cubic smoothstep between
Profile cutoff(double r);

}  // namespace apslab
