#include "apslab/cylinder.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace apslab {

CylinderSection::CylinderSection(BasisPtr basis, double rho) : basis_(std::move(basis)), rho_(rho) {
  if (!basis_) throw Error("cylinder section needs a basis");
  if (!(rho_ > 0.0)) throw Error("cylinder length must be positive");
  prof_.resize(basis_->dim());
}

BoundarySection CylinderSection::trace(double t) const {
  BoundarySection s(basis_);
  for (int i = 0; i < dim(); ++i) s.coeffs()[i] = prof_[i](t);
  return s;
}

bool CylinderSection::is_zero() const {
  return std::all_of(prof_.begin(), prof_.end(), [](const Profile& p) { return p.is_zero(); });
}

CylinderSection CylinderSection::derivative() const {
  CylinderSection r = *this;
  for (auto& p : r.prof_) p = p.derivative().simplify();
  return r;
}

CylinderSection& CylinderSection::operator+=(const CylinderSection& o) {
  if (o.dim() != dim()) throw Error("cylinder sections over different bases");
  for (int i = 0; i < dim(); ++i) {
    prof_[i] += o.prof_[i];
    prof_[i].simplify();
  }
  return *this;
}

CylinderSection& CylinderSection::operator*=(cd s) {
  for (auto& p : prof_) p *= s;
  return *this;
}

cd section_inner(const CylinderSection& a, const CylinderSection& b) {
  if (a.dim() != b.dim()) throw Error("cylinder sections over different bases");
  cd acc = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    if (a[i].is_zero() || b[i].is_zero()) continue;
    acc += profile_inner(a[i], b[i], a.rho());
  }
  return acc;
}

double section_norm(const CylinderSection& a) {
  double acc = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    if (!a[i].is_zero()) acc += std::pow(profile_norm(a[i], a.rho()), 2);
  return std::sqrt(acc);
}

double grid_sup_distance(const CylinderSection& a, const CylinderSection& b, int points) {
  if (a.dim() != b.dim()) throw Error("cylinder sections over different bases");
  double best = 0.0;
  for (int k = 0; k < points; ++k) {
    double t = a.rho() * k / (points - 1);
    double acc = 0.0;
    for (int i = 0; i < a.dim(); ++i) acc += std::norm(a[i](t) - b[i](t));
    best = std::max(best, std::sqrt(acc));
  }
  return best;
}

CylinderSection apply_sigma(const SigmaZero& sigma, const CylinderSection& phi, bool adjoint, bool inverse) {
  const auto& blocks = phi.basis()->blocks();
  if (sigma.blocks.size() != blocks.size()) throw Error("sigma_0 does not match the basis");
  CylinderSection out(phi.basis(), phi.rho());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    MatrixXcd m = sigma.blocks[b];
    if (adjoint) m = m.adjoint().eval();
    if (inverse) m = m.inverse().eval();
    const int off = blocks[b].offset, k = blocks[b].k;
    for (int i = 0; i < k; ++i) {
      Profile acc;
      for (int j = 0; j < k; ++j)
        if (m(i, j) != 0.0 && !phi[off + j].is_zero()) acc += phi[off + j] * m(i, j);
      out[off + i] = acc.simplify();
    }
  }
  return out;
}

CylinderSection s0_apply(const CylinderSection& psi, const SigmaZero& sigma) {
  CylinderSection g = apply_sigma(sigma, psi, false, true);
  CylinderSection out(psi.basis(), psi.rho());
  for (int i = 0; i < g.dim(); ++i)
    if (!g[i].is_zero()) out[i] = r_lambda(psi.basis()->lambda(i), g[i], psi.rho());
  return out;
}

CylinderSection extension_apply(const BoundarySection& phi, double r, double rho) {
  if (!(rho >= r)) throw Error("extension needs rho >= r");
  Profile chi = cutoff(r);
  CylinderSection out(phi.basis(), rho);
  for (int i = 0; i < phi.basis()->dim(); ++i) {
    if (phi[i] == 0.0) continue;
    Profile e(ExpPoly::exponential(phi[i], -std::abs(phi.basis()->lambda(i))));
    out[i] = (chi * e).simplify();
  }
  return out;
}

CylinderSection homogeneous(const BoundarySection& phi, double rho) {
  CylinderSection out(phi.basis(), rho);
  for (int i = 0; i < phi.basis()->dim(); ++i)
    if (phi[i] != 0.0) out[i] = Profile(ExpPoly::exponential(phi[i], -phi.basis()->lambda(i)));
  return out;
}

CylinderSection model_apply(const CylinderSection& phi, const SigmaZero& sigma) {
  CylinderSection h(phi.basis(), phi.rho());
  for (int i = 0; i < phi.dim(); ++i) {
    if (phi[i].is_zero()) continue;
    h[i] = (phi[i].derivative() + phi[i] * cd(phi.basis()->lambda(i), 0.0)).simplify();
  }
  return apply_sigma(sigma, h);
}

CylinderSection model_adjoint_apply(const CylinderSection& psi, const SigmaZero& sigma) {
  // -sigma^* psi' + A sigma^* psi
  CylinderSection xi = apply_sigma(sigma, psi, true, false);
  CylinderSection out(psi.basis(), psi.rho());
  for (int i = 0; i < xi.dim(); ++i) {
    if (xi[i].is_zero()) continue;
    out[i] = (xi[i] * cd(psi.basis()->lambda(i), 0.0) - xi[i].derivative()).simplify();
  }
  return out;
}

// ---------------------------------------------------------------- problems

void CylinderProblem::validate() const {
  if (!basis) throw Error("problem needs a basis");
  if (!(rho > 0.0)) throw Error("cylinder length must be positive");
  if (sigma.blocks.size() != basis->blocks().size()) throw Error("sigma_0 does not match the basis");
  if (!left.basis->lattice_compatible(*basis) || !right.basis->lattice_compatible(*basis))
    throw Error("boundary conditions live on a different lattice");
  if ((left.basis->lambda() - basis->lambda()).cwiseAbs().maxCoeff() > 0.0)
    throw Error("left condition must be expressed over A");
  if ((right.basis->lambda() + basis->lambda()).cwiseAbs().maxCoeff() > 0.0)
    throw Error("right condition must be expressed over -A");
}

CylinderProblem reference_problem(const Model& m, double rho) {
  CylinderProblem p;
  p.basis = m.basis;
  p.sigma = m.sigma;
  p.rho = rho;
  p.left = make_generalized_aps(m.basis, 0.0);
  p.right = make_generalized_aps(m.basis->negated(), 0.0, true);
  return p;
}

namespace {

struct ClusterSystem {
  MatrixXcd k;   // stacked constraints
  MatrixXcd pl, pr;
  VectorXd d0, dr;
};

bool trivial_singleton(const CylinderProblem& p, const std::vector<int>& c) {
  return c.size() == 1 && p.left.atom_of(c[0]) == -2 && p.right.atom_of(c[0]) == -2;
}

ClusterSystem cluster_system(const CylinderProblem& p, const std::vector<int>& c) {
  const int n = static_cast<int>(c.size());
  ClusterSystem s;
  s.pl = p.left.projector(c);
  s.pr = p.right.projector(c);
  s.d0.resize(n);
  s.dr.resize(n);
  for (int j = 0; j < n; ++j) {
    double l = p.basis->lambda(c[j]);
    // unknown x_j is f_j(0) for lambda >= 0 and f_j(rho) otherwise
    s.d0[j] = l >= 0.0 ? 1.0 : std::exp(l * p.rho);
    s.dr[j] = l >= 0.0 ? std::exp(-l * p.rho) : 1.0;
  }
  MatrixXcd id = MatrixXcd::Identity(n, n);
  s.k.resize(2 * n, n);
  s.k.topRows(n) = (id - s.pl) * s.d0.cast<cd>().asDiagonal();
  s.k.bottomRows(n) = (id - s.pr) * s.dr.cast<cd>().asDiagonal();
  return s;
}

void add_homogeneous(CylinderSection& out, const CylinderProblem& p, const std::vector<int>& c, const VectorXcd& x) {
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (x[j] == 0.0) continue;
    double l = p.basis->lambda(c[j]);
    cd coef = x[j] * (l >= 0.0 ? 1.0 : std::exp(l * p.rho));
    out[c[j]] += Profile(ExpPoly::exponential(coef, -l));
    out[c[j]].simplify();
  }
}

}  // namespace

KernelData homogeneous_kernel(const CylinderProblem& p) {
  p.validate();
  KernelData kd;
  for (const auto& c : joint_clusters(p.left, p.right)) {
    ++kd.clusters;
    kd.largest_cluster = std::max<int>(kd.largest_cluster, c.size());
    if (trivial_singleton(p, c)) {
      double l = p.basis->lambda(c[0]);
      // sign table: left keeps lambda < 0, right (over -A) keeps lambda > 0
      bool left_in = l < 0.0, right_in = -l < 0.0;
      if (left_in && right_in) {
        CylinderSection s(p.basis, p.rho);
        add_homogeneous(s, p, c, VectorXcd::Ones(1));
        kd.basis.push_back(std::move(s));
      }
      continue;
    }
    auto sys = cluster_system(p, c);
    MatrixXcd nul = null_space(sys.k, 1e-9);
    for (int j = 0; j < nul.cols(); ++j) {
      CylinderSection s(p.basis, p.rho);
      add_homogeneous(s, p, c, nul.col(j));
      kd.basis.push_back(std::move(s));
    }
  }
  return kd;
}

CylinderProblem adjoint_problem(const CylinderProblem& p) {
  CylinderProblem q;
  q.basis = p.basis->negated();
  q.rho = p.rho;
  q.sigma = p.sigma;
  for (auto& m : q.sigma.blocks) m = -MatrixXcd::Identity(m.rows(), m.cols());
  q.sigma.skew_unitary = false;
  q.left = orthocomplement(p.left);
  q.right = orthocomplement(p.right);
  // orthocomplements carry freshly negated bases; rebind to the shared ones
  q.left.basis = q.basis;
  q.right.basis = p.basis;
  return q;
}

std::vector<CylinderSection> cokernel(const CylinderProblem& p) {
  auto q = adjoint_problem(p);
  auto kd = homogeneous_kernel(q);
  std::vector<CylinderSection> out;
  for (const auto& xi : kd.basis) {
    CylinderSection rebased(p.basis, p.rho);
    for (int i = 0; i < xi.dim(); ++i) rebased[i] = xi[i];
    out.push_back(apply_sigma(p.sigma, rebased, true, true));
  }
  return out;
}

SolveResult solve_bvp(const CylinderProblem& p, const CylinderSection& psi) {
  p.validate();
  if (psi.dim() != p.basis->dim()) throw Error("right-hand side over a different basis");
  SolveResult res;
  CylinderSection phi = s0_apply(psi, p.sigma);
  BoundarySection a0 = phi.trace(0.0), ar = phi.trace(p.rho);
  bool obstructed = false;
  for (const auto& c : joint_clusters(p.left, p.right)) {
    if (trivial_singleton(p, c)) continue;
    const int n = static_cast<int>(c.size());
    auto sys = cluster_system(p, c);
    VectorXcd v0(n), vr(n);
    for (int j = 0; j < n; ++j) {
      v0[j] = a0[c[j]];
      vr[j] = ar[c[j]];
    }
    MatrixXcd id = MatrixXcd::Identity(n, n);
    VectorXcd rhs(2 * n);
    rhs.head(n) = -(id - sys.pl) * v0;
    rhs.tail(n) = -(id - sys.pr) * vr;
    if (rhs.norm() == 0.0) continue;
    Eigen::BDCSVD<MatrixXcd> svd(sys.k, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-9);
    VectorXcd x = svd.solve(rhs);
    double miss = (sys.k * x - rhs).norm();
    if (miss > 1e-10 * std::max(1.0, rhs.norm())) {
      obstructed = true;
      continue;
    }
    add_homogeneous(phi, p, c, x);
  }
  res.kernel_basis = homogeneous_kernel(p).basis;
  if (obstructed) {
    res.obstruction_basis = cokernel(p);
    return res;
  }
  CylinderSection r = model_apply(phi, p.sigma) - psi;
  double pn = section_norm(psi);
  res.residual = pn > 0.0 ? section_norm(r) / pn : section_norm(r);
  auto t0 = phi.trace(0.0), tr = phi.trace(p.rho);
  // relative to the size of Phi: a trace that is only rounding noise must not count as a miss
  double scale = std::max({t0.coeffs().norm(), tr.coeffs().norm(), section_norm(phi) / std::sqrt(p.rho), 1e-300});
  BoundarySection trr(p.right.basis, tr.coeffs());
  res.boundary_residual = std::max((t0.coeffs() - p.left.project(t0).coeffs()).norm(),
                                   (tr.coeffs() - p.right.project(trr).coeffs()).norm()) /
                          scale;
  res.particular = std::move(phi);
  return res;
}

// ---------------------------------------------------------------- identities

double riso_residual(const CylinderSection& phi, const SigmaZero& sigma) {
  const auto& lam = phi.basis()->lambda();
  BoundarySection end = phi.trace(phi.rho());
  double scale = std::max(1.0, end.coeffs().norm());
  for (int i = 0; i < end.coeffs().size(); ++i)
    if (lam[i] < 0.0 && std::abs(end[i]) > 1e-12 * scale)
      throw Error("riso_residual: Q_(-inf,0) Phi(rho) does not vanish");
  CylinderSection lhs = phi - s0_apply(model_apply(phi, sigma), sigma);
  BoundarySection start = project(phi.trace(0.0), Interval::at_least(0.0));
  CylinderSection rhs = homogeneous(start, phi.rho());
  return grid_sup_distance(lhs, rhs);
}

cd greens_residual(const CylinderSection& phi, const CylinderSection& psi, const SigmaZero& sigma) {
  cd lhs = section_inner(model_apply(phi, sigma), psi) - section_inner(phi, model_adjoint_apply(psi, sigma));
  auto s0 = apply_blocks(sigma, phi.trace(0.0).coeffs());
  auto sr = apply_blocks(sigma, phi.trace(phi.rho()).coeffs());
  cd rhs = -psi.trace(0.0).coeffs().dot(s0) + psi.trace(phi.rho()).coeffs().dot(sr);
  return lhs - rhs;
}

double greens_scale(const CylinderSection& phi, const CylinderSection& psi, const SigmaZero& sigma) {
  double a = std::pow(section_norm(phi), 2) + std::pow(section_norm(model_apply(phi, sigma)), 2);
  double b = std::pow(section_norm(psi), 2) + std::pow(section_norm(model_adjoint_apply(psi, sigma)), 2);
  return std::sqrt(a * b);
}

double energy_identity_residual(const CylinderSection& phi, const SigmaZero& sigma) {
  CylinderSection d = apply_sigma(sigma, model_apply(phi, sigma), false, true);
  const double rho = phi.rho();
  double total = 0.0;
  for (int i = 0; i < phi.dim(); ++i) {
    const Profile& f = phi[i];
    if (f.is_zero() && d[i].is_zero()) continue;
    double l = phi.basis()->lambda(i);
    Profile fp = f.derivative();
    double lhs = profile_inner(d[i], d[i], rho).real();
    double rhs = profile_inner(fp, fp, rho).real() + l * l * profile_inner(f, f, rho).real() +
                 l * (std::norm(f(rho)) - std::norm(f(0.0)));
    total += std::abs(lhs - rhs);
  }
  return total;
}

OdeBoundReport ode_bound_check(double lambda, const Profile& g, double rho) {
  Profile f = r_lambda(lambda, g, rho);
  Profile fp = f.derivative();
  OdeBoundReport r;
  r.f_l2 = profile_inner(f, f, rho).real();
  r.fp_l2 = profile_inner(fp, fp, rho).real();
  r.g_l2 = profile_inner(g, g, rho).real();
  if (lambda != 0.0) {
    r.l2_bound = r.g_l2 / (lambda * lambda);
    r.h1_bound = (4.0 + 1.0 / (lambda * lambda)) * r.g_l2;
  } else {
    r.l2_bound = rho * rho / 2.0 * r.g_l2;
    r.h1_bound = (1.0 + rho * rho / 2.0) * r.g_l2;
  }
  r.l2_slack = r.l2_bound - r.f_l2;
  r.h1_slack = r.h1_bound - (r.f_l2 + r.fp_l2);
  r.holds = r.l2_slack >= 0.0 && r.h1_slack >= 0.0;
  return r;
}

ExtensionProbe extension_bound_probe(const std::vector<BoundarySection>& samples, double cut, double r, double rho,
                                     const SigmaZero& sigma) {
  ExtensionProbe pr;
  for (const auto& phi : samples) {
    double d = check_norm(phi, cut);
    if (d == 0.0) continue;
    CylinderSection e = extension_apply(phi, r, rho);
    double gn = std::pow(section_norm(e), 2) + std::pow(section_norm(model_apply(e, sigma)), 2);
    pr.max_ratio = std::max(pr.max_ratio, gn / (d * d));
    ++pr.count;
  }
  if (pr.count == 0) throw Error("extension_bound_probe: empty sample");
  return pr;
}

ExpPoly random_exppoly(std::mt19937_64& rng, const ProfileSampler& opt) {
  std::uniform_int_distribution<int> nt(1, opt.max_terms), deg(0, opt.max_degree);
  std::uniform_real_distribution<double> mu(-opt.mu_range, opt.mu_range);
  std::normal_distribution<double> nd;
  std::vector<ExpTerm> terms;
  int n = nt(rng);
  for (int i = 0; i < n; ++i) {
    cd c(nd(rng), nd(rng));
    int p = deg(rng);
    cd m(mu(rng), opt.complex_mu ? mu(rng) : 0.0);
    terms.push_back({c, p, m});
  }
  ExpPoly e(std::move(terms));
  e.simplify();
  return e;
}

CylinderSection random_cylinder_section(const BasisPtr& basis, double rho, std::mt19937_64& rng, int modes,
                                        double max_abs_lambda, const ProfileSampler& opt) {
  std::vector<int> eligible;
  const auto& blocks = basis->blocks();
  for (int i = 0; i < static_cast<int>(blocks.size()); ++i)
    if (blocks[i].lambda.cwiseAbs().maxCoeff() <= max_abs_lambda) eligible.push_back(i);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  CylinderSection s(basis, rho);
  for (int j = 0; j < std::min<int>(modes, eligible.size()); ++j) {
    const auto& b = blocks[eligible[j]];
    for (int f = 0; f < b.k; ++f) s[b.offset + f] = Profile(random_exppoly(rng, opt));
  }
  return s;
}

}  // namespace apslab
