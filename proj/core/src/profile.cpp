#include "apslab/profile.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace apslab {

namespace {

constexpr double kResonance = 1e-11;

cd ipow(double t, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= t;
  return r;
}

// Gauss-Legendre nodes/weights on [-1, 1] via Golub-Welsch, cached per order
const std::pair<VectorXd, VectorXd>& gauss_legendre(int n) {
  static std::mutex mu;
  static std::map<int, std::pair<VectorXd, VectorXd>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    j(k, k - 1) = j(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  VectorXd w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  return cache.emplace(n, std::make_pair(es.eigenvalues(), w)).first->second;
}

cd quadrature_integral(int p, cd mu, double a, double b) {
  const int n = std::max(20, (p + 24) / 2 + 1);
  const auto& [x, w] = gauss_legendre(n);
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(mu) * (b - a))));
  const double h = (b - a) / pieces;
  cd acc = 0.0;
  for (int s = 0; s < pieces; ++s) {
    double c = a + (s + 0.5) * h;
    for (int k = 0; k < n; ++k) {
      double t = c + 0.5 * h * x[k];
      acc += w[k] * ipow(t, p) * std::exp(mu * t);
    }
  }
  return acc * (0.5 * h);
}

// int_a^b t^p e^{mu t} dt
cd monomial_integral(int p, cd mu, double a, double b) {
  if (a == b) return 0.0;
  double tmax = std::max(std::abs(a), std::abs(b));
  if (std::abs(mu) * tmax < 1.0) {
    // power series of the exponential; converges fast in this regime
    cd acc = 0.0, coef = 1.0;
    for (int m = 0; m < 80; ++m) {
      int q = p + m + 1;
      cd term = coef * (ipow(b, q) - ipow(a, q)) / static_cast<double>(q);
      acc += term;
      if (m > 2 && std::abs(term) <= 1e-18 * std::abs(acc)) break;
      coef *= mu / static_cast<double>(m + 1);
    }
    return acc;
  }
  // closed form, unless its terms dwarf the result (then rounding would dominate)
  cd inv = 1.0 / mu;
  cd val = 0.0;
  double mag = 0.0;
  for (double t : {b, a}) {
    cd e = std::exp(mu * t);
    cd fall = 1.0, mp = inv, sum = 0.0;
    double s = 0.0;
    for (int k = 0; k <= p; ++k) {
      cd term = ((k % 2) ? -1.0 : 1.0) * fall * mp * ipow(t, p - k);
      sum += term;
      s += std::abs(term);
      fall *= static_cast<double>(p - k);
      mp *= inv;
    }
    val += (t == b ? 1.0 : -1.0) * e * sum;
    mag += std::abs(e) * s;
  }
  if (mag * 1e-16 <= 1e-14 * std::abs(val)) return val;
  return quadrature_integral(p, mu, a, b);
}

bool same_exponent(cd a, cd b) { return std::abs(a - b) <= 1e-14 * (1.0 + std::abs(a)); }

}  // namespace

cd ExpPoly::operator()(double t) const {
  cd acc = 0.0;
  for (const auto& x : terms_) acc += x.c * ipow(t, x.p) * std::exp(x.mu * t);
  return acc;
}

ExpPoly ExpPoly::derivative() const {
  std::vector<ExpTerm> out;
  for (const auto& x : terms_) {
    if (x.p > 0) out.push_back({x.c * static_cast<double>(x.p), x.p - 1, x.mu});
    if (x.mu != 0.0) out.push_back({x.c * x.mu, x.p, x.mu});
  }
  ExpPoly r(std::move(out));
  r.simplify();
  return r;
}

ExpPoly ExpPoly::antiderivative(double span) const {
  std::vector<ExpTerm> out;
  for (const auto& x : terms_) {
    const double amu = std::abs(x.mu);
    if (amu <= kResonance) {
      out.push_back({x.c / static_cast<double>(x.p + 1), x.p + 1, 0.0});
      continue;
    }
    if (amu * span <= 0.5) {
      // near resonance the closed form divides by small mu^{k+1}; integrate the Taylor series instead
      cd coef = x.c;
      double size = std::abs(x.c);  // |coef| span^m, the relative size of term m on [0, span]
      for (int m = 0; m < 40 && size > 1e-18 * std::abs(x.c); ++m) {
        out.push_back({coef / static_cast<double>(x.p + m + 1), x.p + m + 1, 0.0});
        coef *= x.mu / static_cast<double>(m + 1);
        size *= amu * span / (m + 1);
      }
      continue;
    }
    // e^{mu t} sum_k (-1)^k p!/(p-k)! t^{p-k} / mu^{k+1}
    cd fall = 1.0;
    cd inv = 1.0 / x.mu;
    cd mp = inv;
    for (int k = 0; k <= x.p; ++k) {
      double sgn = (k % 2) ? -1.0 : 1.0;
      out.push_back({x.c * sgn * fall * mp, x.p - k, x.mu});
      fall *= static_cast<double>(x.p - k);
      mp *= inv;
    }
  }
  ExpPoly r(std::move(out));
  r.simplify();
  return r;
}

ExpPoly ExpPoly::conj() const {
  std::vector<ExpTerm> out;
  for (const auto& x : terms_) out.push_back({std::conj(x.c), x.p, std::conj(x.mu)});
  return ExpPoly(std::move(out));
}

ExpPoly ExpPoly::shifted(cd dmu) const {
  std::vector<ExpTerm> out = terms_;
  for (auto& x : out) x.mu += dmu;
  return ExpPoly(std::move(out));
}

cd ExpPoly::integral(double a, double b) const {
  cd acc = 0.0;
  for (const auto& x : terms_) acc += x.c * monomial_integral(x.p, x.mu, a, b);
  return acc;
}

ExpPoly& ExpPoly::simplify() {
  std::sort(terms_.begin(), terms_.end(), [](const ExpTerm& a, const ExpTerm& b) {
    if (a.p != b.p) return a.p < b.p;
    if (a.mu.real() != b.mu.real()) return a.mu.real() < b.mu.real();
    return a.mu.imag() < b.mu.imag();
  });
  std::vector<ExpTerm> out;
  for (const auto& x : terms_) {
    bool merged = false;
    for (auto it = out.rbegin(); it != out.rend() && it->p == x.p; ++it) {
      if (same_exponent(it->mu, x.mu)) {
        it->c += x.c;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(x);
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const ExpTerm& x) { return x.c == 0.0; }), out.end());
  terms_ = std::move(out);
  return *this;
}

ExpPoly& ExpPoly::operator+=(const ExpPoly& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  return simplify();
}

ExpPoly& ExpPoly::operator*=(cd s) {
  for (auto& x : terms_) x.c *= s;
  return simplify();
}

ExpPoly operator*(const ExpPoly& a, const ExpPoly& b) {
  std::vector<ExpTerm> out;
  out.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& x : a.terms_)
    for (const auto& y : b.terms_) out.push_back({x.c * y.c, x.p + y.p, x.mu + y.mu});
  ExpPoly r(std::move(out));
  r.simplify();
  return r;
}

// ---------------------------------------------------------------- Profile

Profile::Profile(std::vector<double> knots, std::vector<ExpPoly> pieces)
    : knots_(std::move(knots)), pieces_(std::move(pieces)) {
  if (!pieces_.empty() && pieces_.size() != knots_.size() + 1) throw Error("profile: pieces and knots disagree");
  for (std::size_t i = 0; i < knots_.size(); ++i)
    if (!(knots_[i] > 0.0) || (i && !(knots_[i] > knots_[i - 1]))) throw Error("profile: knots must increase");
  if (pieces_.empty()) knots_.clear();
}

bool Profile::is_zero() const {
  return std::all_of(pieces_.begin(), pieces_.end(), [](const ExpPoly& e) { return e.empty(); });
}

cd Profile::operator()(double t) const {
  if (pieces_.empty()) return 0.0;
  auto i = std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin();
  return pieces_[i](t);
}

Profile Profile::derivative() const {
  Profile r = *this;
  for (auto& p : r.pieces_) p = p.derivative();
  return r;
}

Profile Profile::conj() const {
  Profile r = *this;
  for (auto& p : r.pieces_) p = p.conj();
  return r;
}

Profile Profile::refined(const std::vector<double>& knots) const {
  std::vector<ExpPoly> pieces;
  if (pieces_.empty()) return Profile(knots, std::vector<ExpPoly>(knots.size() + 1));
  for (std::size_t i = 0; i <= knots.size(); ++i) {
    double left = i ? knots[i - 1] : 0.0;
    auto j = std::upper_bound(knots_.begin(), knots_.end(), left) - knots_.begin();
    pieces.push_back(pieces_[j]);
  }
  return Profile(knots, std::move(pieces));
}

Profile& Profile::simplify() {
  for (auto& p : pieces_) p.simplify();
  if (is_zero()) {
    pieces_.clear();
    knots_.clear();
  }
  return *this;
}

cd Profile::integral(double rho) const {
  cd acc = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    double a = i ? knots_[i - 1] : 0.0;
    double b = i < knots_.size() ? knots_[i] : rho;
    if (a >= rho) break;
    b = std::min(b, rho);
    acc += pieces_[i].integral(a, b);
  }
  return acc;
}

namespace {
std::vector<double> merge_knots(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> k;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(k));
  k.erase(std::unique(k.begin(), k.end()), k.end());
  return k;
}
}  // namespace

Profile& Profile::operator+=(const Profile& o) {
  if (o.pieces_.empty()) return *this;
  if (pieces_.empty()) return *this = o;
  auto k = merge_knots(knots_, o.knots_);
  Profile a = refined(k), b = o.refined(k);
  for (std::size_t i = 0; i < a.pieces_.size(); ++i) a.pieces_[i] += b.pieces_[i];
  *this = std::move(a);
  return *this;
}

Profile& Profile::operator*=(cd s) {
  for (auto& p : pieces_) p *= s;
  return *this;
}

Profile operator*(const Profile& a, const Profile& b) {
  if (a.pieces_.empty() || b.pieces_.empty()) return Profile();
  auto k = merge_knots(a.knots_, b.knots_);
  Profile x = a.refined(k), y = b.refined(k);
  for (std::size_t i = 0; i < x.pieces_.size(); ++i) x.pieces_[i] = x.pieces_[i] * y.pieces_[i];
  return x;
}

cd profile_inner(const Profile& f, const Profile& h, double rho) { return (f * h.conj()).integral(rho); }

double profile_norm(const Profile& f, double rho) {
  // pointwise |f|^2 under composite Gauss-Legendre: no cancellation between expanded products
  double acc = 0.0;
  const auto& pieces = f.pieces();
  const auto& knots = f.knots();
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    double a = i ? knots[i - 1] : 0.0;
    double b = i < knots.size() ? knots[i] : rho;
    if (a >= rho) break;
    b = std::min(b, rho);
    if (pieces[i].empty() || b <= a) continue;
    int deg = 0;
    double mu = 0.0;
    for (const auto& t : pieces[i].terms()) {
      deg = std::max(deg, t.p);
      mu = std::max(mu, std::abs(t.mu));
    }
    const auto& [x, w] = gauss_legendre(deg + 16);
    const int parts = 1 + static_cast<int>(std::ceil(mu * (b - a) / 2.0));
    const double h = (b - a) / parts;
    for (int s = 0; s < parts; ++s) {
      double c = a + (s + 0.5) * h;
      for (int k = 0; k < x.size(); ++k) acc += 0.5 * h * w[k] * std::norm(pieces[i](c + 0.5 * h * x[k]));
    }
  }
  return std::sqrt(acc);
}

Profile r_lambda(double lambda, const Profile& g, double rho) {
  if (!(rho > 0.0)) throw Error("cylinder length must be positive");
  if (g.pieces().empty()) return Profile();
  // only pieces that start before rho matter
  std::vector<double> knots;
  for (double k : g.knots())
    if (k < rho) knots.push_back(k);
  const std::size_t np = knots.size() + 1;
  auto left = [&](std::size_t i) { return i ? knots[i - 1] : 0.0; };
  auto right = [&](std::size_t i) { return i < knots.size() ? knots[i] : rho; };
  std::vector<ExpPoly> h(np);
  for (std::size_t i = 0; i < np; ++i) h[i] = g.pieces()[i].shifted(lambda).antiderivative(right(i));
  std::vector<ExpPoly> f(np);
  if (lambda >= 0.0) {
    cd acc = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      f[i] = (h[i] - ExpPoly::constant(h[i](left(i)) - acc)).shifted(-lambda);
      acc += h[i](right(i)) - h[i](left(i));
    }
  } else {
    cd acc = 0.0;
    for (std::size_t i = np; i-- > 0;) {
      f[i] = (h[i] - ExpPoly::constant(h[i](right(i)) + acc)).shifted(-lambda);
      acc += h[i](right(i)) - h[i](left(i));
    }
  }
  for (auto& p : f) p.simplify();
  Profile out(knots, std::move(f));
  return out.simplify();
}

Profile cutoff(double r) {
  if (!(r > 0.0)) throw Error("cutoff radius must be positive");
  const double a = 3.0 / r;
  ExpPoly one = ExpPoly::constant(1.0);
  ExpPoly cubic({{-4.0, 0, 0.0}, {12.0 * a, 1, 0.0}, {-9.0 * a * a, 2, 0.0}, {2.0 * a * a * a, 3, 0.0}});
  return Profile({r / 3.0, 2.0 * r / 3.0}, {one, cubic, ExpPoly()});
}

}  // namespace apslab
