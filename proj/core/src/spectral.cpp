#include "apslab/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace apslab {

namespace {

struct RawBlock {
  Block b;
  MatrixXcd sigma;  // eigen coordinates
};

void eigen_block(const MatrixXcd& a, VectorXd& lam, MatrixXcd& frame) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(a);
  if (es.info() != Eigen::Success) throw Error("eigen decomposition failed");
  lam = es.eigenvalues();
  frame = es.eigenvectors();
  // zero blocks: keep the identity frame so kernels stay on coordinate axes
  if (a.norm() == 0.0) frame = MatrixXcd::Identity(a.rows(), a.cols());
}

bool same_basis(const EigenmodeBasis& a, const EigenmodeBasis& b) {
  return &a == &b || (a.lattice_compatible(b) && a.is_negated() == b.is_negated());
}

}  // namespace

EigenmodeBasis::EigenmodeBasis(ModelSpec spec, int truncation, std::vector<Block> blocks, bool negated)
    : spec_(std::move(spec)), n_(truncation), negated_(negated), blocks_(std::move(blocks)) {
  if (n_ <= 0) throw Error("truncation must be positive");
  if (!(spec_.band >= 0.0)) throw Error("band limit must be nonnegative");
  if (!(spec_.band < lambda_max())) throw Error("band limit must lie strictly inside the truncation");
  int total = 0;
  std::set<std::int64_t> ids;
  for (auto& b : blocks_) {
    if (!ids.insert(b.mode_id).second) throw Error("duplicate mode_id " + std::to_string(b.mode_id));
    b.offset = total;
    total += b.k;
  }
  lambda_.resize(total);
  coord_block_.resize(total);
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i) {
    const auto& b = blocks_[i];
    for (int f = 0; f < b.k; ++f) {
      lambda_[b.offset + f] = b.lambda[f];
      coord_block_[b.offset + f] = i;
    }
  }
}

int EigenmodeBasis::find_block(std::int64_t mode_id) const {
  for (int i = 0; i < static_cast<int>(blocks_.size()); ++i)
    if (blocks_[i].mode_id == mode_id) return i;
  return -1;
}

int EigenmodeBasis::coord(std::int64_t mode_id, int fiber) const {
  int b = find_block(mode_id);
  if (b < 0 || fiber < 0 || fiber >= blocks_[b].k) return -1;
  return blocks_[b].offset + fiber;
}

std::vector<int> EigenmodeBasis::band_coords() const {
  std::vector<int> out;
  for (int i = 0; i < dim(); ++i)
    if (in_band(i)) out.push_back(i);
  return out;
}

bool EigenmodeBasis::lattice_compatible(const EigenmodeBasis& o) const {
  if (blocks_.size() != o.blocks_.size()) return false;
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].mode_id != o.blocks_[i].mode_id || blocks_[i].k != o.blocks_[i].k) return false;
  return true;
}

std::shared_ptr<const EigenmodeBasis> EigenmodeBasis::negated() const {
  auto blocks = blocks_;
  for (auto& b : blocks) b.lambda = -b.lambda;
  return std::make_shared<EigenmodeBasis>(spec_, n_, std::move(blocks), !negated_);
}

SigmaZero SigmaZero::negated() const {
  SigmaZero s = *this;
  for (auto& m : s.blocks) m = -m;
  return s;
}

void SigmaZero::validate(double tol) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& m = blocks[i];
    Eigen::JacobiSVD<MatrixXcd> svd(m);
    if (svd.singularValues().size() == 0 || svd.singularValues().minCoeff() <= tol)
      throw Error("sigma_0 block " + std::to_string(i) + " is not invertible");
    if (skew_unitary) {
      auto id = MatrixXcd::Identity(m.rows(), m.cols());
      if ((m.adjoint() * m - id).norm() > tol || (m.adjoint() + m).norm() > tol)
        throw Error("sigma_0 block " + std::to_string(i) + " is not skew-unitary");
    }
  }
}

Model build_model(const ModelSpec& spec, int truncation) {
  if (truncation <= 0) throw Error("truncation must be positive");
  if (spec.components.empty()) throw Error("model needs at least one component");
  const double lmax = truncation;
  const std::int64_t nc = static_cast<std::int64_t>(spec.components.size());
  const std::int64_t copies = spec.doubled ? 2 : 1;
  std::vector<std::tuple<std::int64_t, int, RawBlock>> raw;

  for (int c = 0; c < static_cast<int>(nc); ++c) {
    const auto& comp = spec.components[c];
    auto push = [&](std::int64_t n, const MatrixXcd& a, const MatrixXcd& sig_fiber, const VectorXd* exact = nullptr) {
      RawBlock rb;
      rb.b.n = n;
      rb.b.component = c;
      rb.b.k = static_cast<int>(a.rows());
      eigen_block(a, rb.b.lambda, rb.b.frame);
      if (exact) rb.b.lambda = *exact;
      if (rb.b.lambda.cwiseAbs().maxCoeff() > lmax) return;
      rb.sigma = rb.b.frame.adjoint() * sig_fiber * rb.b.frame;
      raw.emplace_back(n, c, std::move(rb));
    };
    switch (comp.kind) {
      case ComponentSpec::Kind::ShiftedIntegers: {
        if (comp.fiber_dim < 1) throw Error("fiber_dim must be positive");
        const int k = comp.fiber_dim;
        MatrixXcd sig = comp.sigma.size() ? comp.sigma : MatrixXcd(MatrixXcd::Identity(k, k));
        if (sig.rows() != k || sig.cols() != k) throw Error("sigma size does not match fiber_dim");
        auto lo = static_cast<std::int64_t>(std::ceil(-lmax - comp.shift));
        auto hi = static_cast<std::int64_t>(std::floor(lmax - comp.shift));
        for (std::int64_t n = lo; n <= hi; ++n) {
          MatrixXcd a = MatrixXcd::Identity(k, k) * cd(static_cast<double>(n) + comp.shift, 0.0);
          push(n, a, sig);
        }
        break;
      }
      case ComponentSpec::Kind::Chiral: {
        MatrixXcd u = comp.frame.size() ? comp.frame : MatrixXcd(MatrixXcd::Identity(2, 2));
        if (u.rows() != 2 || u.cols() != 2 || (u.adjoint() * u - MatrixXcd::Identity(2, 2)).norm() > 1e-12)
          throw Error("chiral frame must be a 2x2 unitary");
        MatrixXcd sig = comp.sigma;
        if (!sig.size()) {
          MatrixXcd d = MatrixXcd::Zero(2, 2);
          d(0, 0) = 1.0;
          d(1, 1) = -1.0;
          sig = cd(0.0, -1.0) * u * d * u.adjoint();
        }
        const double re = comp.offset.real(), im = comp.offset.imag();
        const double r = std::sqrt(std::max(0.0, lmax * lmax - re * re));
        auto lo = static_cast<std::int64_t>(std::ceil(-r - im)) - 1;
        auto hi = static_cast<std::int64_t>(std::floor(r - im)) + 1;
        for (std::int64_t n = lo; n <= hi; ++n) {
          cd b = cd(0.0, static_cast<double>(n)) + comp.offset;
          MatrixXcd blk(2, 2);
          blk << 0.0, std::conj(b), b, 0.0;
          // +-|b| exactly, so a pair never straddles the band edge through rounding
          VectorXd ex(2);
          ex << -std::abs(b), std::abs(b);
          push(n, u * blk * u.adjoint(), sig, &ex);
        }
        break;
      }
      case ComponentSpec::Kind::Explicit: {
        for (const auto& eb : comp.blocks) {
          if (eb.a.rows() != eb.a.cols() || eb.a.rows() == 0) throw Error("explicit block must be square");
          if ((eb.a - eb.a.adjoint()).norm() > 1e-12) throw Error("explicit block must be Hermitian");
          MatrixXcd sig = eb.sigma.size() ? eb.sigma : MatrixXcd(MatrixXcd::Identity(eb.a.rows(), eb.a.rows()));
          if (sig.rows() != eb.a.rows() || sig.cols() != eb.a.cols()) throw Error("explicit sigma size mismatch");
          push(eb.n, eb.a, sig);
        }
        break;
      }
    }
  }

  std::stable_sort(raw.begin(), raw.end(), [](const auto& x, const auto& y) {
    return std::tie(std::get<0>(x), std::get<1>(x)) < std::tie(std::get<0>(y), std::get<1>(y));
  });

  std::vector<Block> blocks;
  SigmaZero sigma;
  for (auto& [n, c, rb] : raw) {
    for (std::int64_t copy = 0; copy < copies; ++copy) {
      Block b = rb.b;
      b.copy = static_cast<int>(copy);
      b.mode_id = (n * nc + c) * copies + copy;
      if (copy == 1) b.lambda = -b.lambda;
      blocks.push_back(b);
      sigma.blocks.push_back(copy == 1 ? MatrixXcd(-rb.sigma) : rb.sigma);
    }
  }
  sigma.skew_unitary = std::all_of(sigma.blocks.begin(), sigma.blocks.end(), [](const MatrixXcd& m) {
    auto id = MatrixXcd::Identity(m.rows(), m.cols());
    return (m.adjoint() * m - id).norm() <= 1e-12 && (m.adjoint() + m).norm() <= 1e-12;
  });
  sigma.validate();
  auto basis = std::make_shared<EigenmodeBasis>(spec, truncation, std::move(blocks), false);
  return {basis, std::move(sigma)};
}

ModelSpec integer_spectrum(double shift, int fiber_dim, cd sigma, double band) {
  ModelSpec s;
  ComponentSpec c;
  c.kind = ComponentSpec::Kind::ShiftedIntegers;
  c.shift = shift;
  c.fiber_dim = fiber_dim;
  c.sigma = MatrixXcd::Identity(fiber_dim, fiber_dim) * sigma;
  s.components.push_back(c);
  s.band = band;
  return s;
}

ModelSpec chiral_spectrum(cd offset, const MatrixXcd& frame, double band) {
  ModelSpec s;
  ComponentSpec c;
  c.kind = ComponentSpec::Kind::Chiral;
  c.fiber_dim = 2;
  c.offset = offset;
  c.frame = frame;
  s.components.push_back(c);
  s.band = band;
  return s;
}

BoundarySection::BoundarySection(BasisPtr basis) : basis_(std::move(basis)) {
  if (!basis_) throw Error("section needs a basis");
  c_ = VectorXcd::Zero(basis_->dim());
}

BoundarySection::BoundarySection(BasisPtr basis, VectorXcd coeffs) : basis_(std::move(basis)), c_(std::move(coeffs)) {
  if (!basis_) throw Error("section needs a basis");
  if (c_.size() != basis_->dim()) throw Error("coefficient vector does not match the basis");
}

std::vector<std::int64_t> BoundarySection::support() const {
  std::vector<std::int64_t> out;
  for (const auto& b : basis_->blocks()) {
    if (c_.segment(b.offset, b.k).cwiseAbs().maxCoeff() > 0.0) out.push_back(b.mode_id);
  }
  return out;
}

void BoundarySection::set(std::int64_t mode_id, int fiber, cd value) {
  int i = basis_->coord(mode_id, fiber);
  if (i < 0) throw Error("mode " + std::to_string(mode_id) + " not in basis");
  c_[i] = value;
}

BoundarySection BoundarySection::unit(BasisPtr basis, std::int64_t mode_id, int fiber) {
  BoundarySection s(std::move(basis));
  s.set(mode_id, fiber, 1.0);
  return s;
}

bool Interval::contains(double x) const {
  bool lo_ok = lo_closed ? x >= lo : x > lo;
  bool hi_ok = hi_closed ? x <= hi : x < hi;
  return lo_ok && hi_ok;
}

Interval Interval::intersect(const Interval& o) const {
  Interval r;
  if (lo > o.lo) {
    r.lo = lo;
    r.lo_closed = lo_closed;
  } else if (o.lo > lo) {
    r.lo = o.lo;
    r.lo_closed = o.lo_closed;
  } else {
    r.lo = lo;
    r.lo_closed = lo_closed && o.lo_closed;
  }
  if (hi < o.hi) {
    r.hi = hi;
    r.hi_closed = hi_closed;
  } else if (o.hi < hi) {
    r.hi = o.hi;
    r.hi_closed = o.hi_closed;
  } else {
    r.hi = hi;
    r.hi_closed = hi_closed && o.hi_closed;
  }
  return r;
}

double sobolev_norm(const BoundarySection& phi, double s) {
  const auto& lam = phi.basis()->lambda();
  double acc = 0.0;
  for (int i = 0; i < lam.size(); ++i) {
    double a = std::norm(phi[i]);
    if (a != 0.0) acc += a * std::pow(1.0 + lam[i] * lam[i], s);
  }
  return std::sqrt(acc);
}

namespace {
double mixed_norm(const BoundarySection& phi, double cut, bool check) {
  const auto& lam = phi.basis()->lambda();
  double acc = 0.0;
  for (int i = 0; i < lam.size(); ++i) {
    double a = std::norm(phi[i]);
    if (a == 0.0) continue;
    // check: H^{1/2} on lambda <= cut. hat is check over -A at -cut.
    bool smooth = check ? lam[i] <= cut : lam[i] >= cut;
    acc += a * std::pow(1.0 + lam[i] * lam[i], smooth ? 0.5 : -0.5);
  }
  return std::sqrt(acc);
}
}  // namespace

double check_norm(const BoundarySection& phi, double cut) { return mixed_norm(phi, cut, true); }
double hat_norm(const BoundarySection& phi, double cut) { return mixed_norm(phi, cut, false); }

BoundarySection project(const BoundarySection& phi, const Interval& iv) {
  BoundarySection out(phi.basis());
  const auto& lam = phi.basis()->lambda();
  for (int i = 0; i < lam.size(); ++i)
    if (iv.contains(lam[i])) out.coeffs()[i] = phi[i];
  return out;
}

BoundarySection project_complement(const BoundarySection& phi, const Interval& iv) {
  BoundarySection out(phi.basis());
  const auto& lam = phi.basis()->lambda();
  for (int i = 0; i < lam.size(); ++i)
    if (!iv.contains(lam[i])) out.coeffs()[i] = phi[i];
  return out;
}

cd l2_pairing(const BoundarySection& phi, const BoundarySection& psi) {
  if (!same_basis(*phi.basis(), *psi.basis())) throw Error("l2_pairing: basis mismatch");
  return psi.coeffs().dot(phi.coeffs());  // sum phi_j conj(psi_j)
}

VectorXcd apply_blocks(const SigmaZero& sigma, const VectorXcd& v) {
  VectorXcd out(v.size());
  int off = 0;
  for (const auto& m : sigma.blocks) {
    if (off + m.rows() > v.size()) throw Error("sigma_0 block size mismatch");
    out.segment(off, m.rows()) = m * v.segment(off, m.rows());
    off += static_cast<int>(m.rows());
  }
  if (off != v.size()) throw Error("sigma_0 block size mismatch");
  return out;
}

VectorXcd apply_blocks_adjoint(const SigmaZero& sigma, const VectorXcd& v) {
  VectorXcd out(v.size());
  int off = 0;
  for (const auto& m : sigma.blocks) {
    out.segment(off, m.rows()) = m.adjoint() * v.segment(off, m.rows());
    off += static_cast<int>(m.rows());
  }
  if (off != v.size()) throw Error("sigma_0 block size mismatch");
  return out;
}

VectorXcd apply_blocks_inverse(const SigmaZero& sigma, const VectorXcd& v) {
  VectorXcd out(v.size());
  int off = 0;
  for (const auto& m : sigma.blocks) {
    out.segment(off, m.rows()) = m.partialPivLu().solve(v.segment(off, m.rows()));
    off += static_cast<int>(m.rows());
  }
  if (off != v.size()) throw Error("sigma_0 block size mismatch");
  return out;
}

VectorXcd apply_blocks_inv_adjoint(const SigmaZero& sigma, const VectorXcd& v) {
  VectorXcd out(v.size());
  int off = 0;
  for (const auto& m : sigma.blocks) {
    out.segment(off, m.rows()) = m.adjoint().partialPivLu().solve(v.segment(off, m.rows()));
    off += static_cast<int>(m.rows());
  }
  if (off != v.size()) throw Error("sigma_0 block size mismatch");
  return out;
}

cd beta_pairing(const BoundarySection& phi, const BoundarySection& psi, const SigmaZero& sigma) {
  if (!phi.basis()->lattice_compatible(*psi.basis())) throw Error("beta_pairing: basis mismatch");
  VectorXcd s = apply_blocks(sigma, phi.coeffs());
  return -psi.coeffs().dot(s);
}

RatioStats norm_equivalence_probe(const std::vector<BoundarySection>& samples, double cut1, double cut2) {
  if (!(cut1 < cut2)) throw Error("norm_equivalence_probe needs cut1 < cut2");
  RatioStats st{kInf, 0.0, 0};
  for (const auto& s : samples) {
    double d = check_norm(s, cut2);
    if (d == 0.0) continue;
    double r = check_norm(s, cut1) / d;
    st.min = std::min(st.min, r);
    st.max = std::max(st.max, r);
    ++st.count;
  }
  if (st.count == 0) throw Error("norm_equivalence_probe: empty sample");
  return st;
}

VectorXcd random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  VectorXcd v(n);
  for (int i = 0; i < n; ++i) v[i] = cd(nd(rng), nd(rng));
  return v;
}

BoundarySection random_section(const BasisPtr& basis, std::mt19937_64& rng, const SectionSampler& opt) {
  std::vector<int> eligible;
  const auto& blocks = basis->blocks();
  for (int i = 0; i < static_cast<int>(blocks.size()); ++i)
    if (blocks[i].lambda.cwiseAbs().maxCoeff() <= opt.max_abs_lambda) eligible.push_back(i);
  BoundarySection s(basis);
  if (eligible.empty()) return s;
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::uniform_int_distribution<int> cnt(1, std::max(1, std::min<int>(opt.max_support, eligible.size())));
  int m = cnt(rng);
  for (int j = 0; j < m; ++j) {
    const auto& b = blocks[eligible[j]];
    s.coeffs().segment(b.offset, b.k) = random_vector(b.k, rng);
  }
  return s;
}

}  // namespace apslab
