#include "apslab/conditions.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace apslab {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Aps: return "aps";
    case Provenance::Graph: return "graph";
    case Provenance::Chiral: return "chiral";
    case Provenance::Transmission: return "transmission";
  }
  return "?";
}

// ---------------------------------------------------------------- numerics

int numerical_rank(const MatrixXcd& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::BDCSVD<MatrixXcd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > rel_tol * s[0]) ++r;
  return r;
}

MatrixXcd null_space(const MatrixXcd& m, double rel_tol) {
  const auto n = m.cols();
  if (n == 0) return MatrixXcd(0, 0);
  if (m.rows() == 0) return MatrixXcd::Identity(n, n);
  Eigen::BDCSVD<MatrixXcd> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int r = 0;
  if (s.size() && s[0] > 0.0)
    for (int i = 0; i < s.size(); ++i)
      if (s[i] > rel_tol * s[0]) ++r;
  return svd.matrixV().rightCols(n - r);
}

MatrixXcd orth_columns(const MatrixXcd& m, double tol) {
  if (m.cols() == 0 || m.rows() == 0) return MatrixXcd(m.rows(), 0);
  if (m.norm() == 0.0) return MatrixXcd(m.rows(), 0);
  Eigen::ColPivHouseholderQR<MatrixXcd> qr(m);
  qr.setThreshold(tol);
  const auto r = qr.rank();
  MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(m.rows(), r);
  return q;
}

MatrixXcd orth_complement(const MatrixXcd& within, const MatrixXcd& sub, double tol) {
  if (within.cols() == 0) return MatrixXcd(within.rows(), 0);
  if (sub.cols() == 0) return within;
  MatrixXcd c = within.adjoint() * sub;  // coefficients of sub in the frame
  MatrixXcd n = null_space(c.adjoint(), tol);
  return within * n;
}

namespace {

MatrixXcd graph_projector(const MatrixXcd& g) {
  // projector onto {(v, g v)} in V- (+) V+ coordinates:
  // [[I,0],[g,0]] * [[I,-g^*],[g,I]]^{-1}
  const auto r = g.cols(), s = g.rows();
  MatrixXcd m(r + s, r + s);
  m.setZero();
  m.topLeftCorner(r, r).setIdentity();
  m.bottomRightCorner(s, s).setIdentity();
  m.topRightCorner(r, s) = -g.adjoint();
  m.bottomLeftCorner(s, r) = g;
  MatrixXcd left = MatrixXcd::Zero(r + s, r + s);
  left.topLeftCorner(r, r).setIdentity();
  left.bottomLeftCorner(s, r) = g;
  return left * m.partialPivLu().inverse();
}

MatrixXcd unit_columns(int rows, const std::vector<int>& pos) {
  MatrixXcd m = MatrixXcd::Zero(rows, static_cast<int>(pos.size()));
  for (int j = 0; j < static_cast<int>(pos.size()); ++j) m(pos[j], j) = 1.0;
  return m;
}

std::vector<int> band_coords_within(const EigenmodeBasis& basis, double radius) {
  std::vector<int> out;
  for (int i = 0; i < basis.dim(); ++i)
    if (std::abs(basis.lambda(i)) <= radius) out.push_back(i);
  return out;
}

void split_band(const BoundaryCondition& b, std::vector<int>& lo, std::vector<int>& up) {
  lo.clear();
  up.clear();
  for (int p = 0; p < b.band_size(); ++p)
    (b.lower_at_cut(b.basis->lambda(b.band[p])) ? lo : up).push_back(p);
}

BoundaryCondition skeleton(const BasisPtr& basis, double a, bool closed_below, double radius) {
  if (!basis) throw Error("condition needs a basis");
  if (!(std::abs(a) <= radius)) throw Error("cut lies outside the band");
  if (radius >= basis->lambda_max()) throw Error("cut lies outside the truncation");
  BoundaryCondition b;
  b.basis = basis;
  b.cut = a;
  b.closed_below = closed_below;
  b.radius = radius;
  b.band = band_coords_within(*basis, radius);
  b.finalize();
  return b;
}

double growth_of(const BoundaryCondition& b) {
  const auto& lam = b.basis->lambda();
  double cg = 1.0;
  auto upd = [&](int from, int to) {
    double r = std::sqrt((1.0 + lam[to] * lam[to]) / (1.0 + lam[from] * lam[from]));
    cg = std::max(cg, r);
  };
  if (b.g.band.size()) {
    MatrixXcd full = b.vp * b.g.band * b.vm.adjoint();
    for (int i = 0; i < full.rows(); ++i)
      for (int j = 0; j < full.cols(); ++j)
        if (std::abs(full(i, j)) > 1e-14) upd(b.band[j], b.band[i]);
  }
  for (const auto& t : b.g.tails)
    for (int i = 0; i < static_cast<int>(t.upper.size()); ++i)
      for (int j = 0; j < static_cast<int>(t.lower.size()); ++j)
        if (std::abs(t.g(i, j)) > 1e-14) upd(t.lower[j], t.upper[i]);
  return cg;
}

}  // namespace

double ModeMap::operator_norm() const {
  double n = 0.0;
  if (band.size()) n = Eigen::BDCSVD<MatrixXcd>(band).singularValues()[0];
  for (const auto& t : tails)
    if (t.g.size()) n = std::max(n, Eigen::BDCSVD<MatrixXcd>(t.g).singularValues()[0]);
  return n;
}

// ---------------------------------------------------------------- condition

void BoundaryCondition::finalize() {
  const int n = basis->dim();
  atom_index_.assign(n, -2);
  band_pos_.assign(n, -1);
  for (int p = 0; p < band_size(); ++p) {
    band_pos_[band[p]] = p;
    atom_index_[band[p]] = -1;
  }
  for (int gi = 0; gi < static_cast<int>(g.tails.size()); ++gi) {
    for (int c : g.tails[gi].lower) {
      if (atom_index_[c] != -2) throw Error("tail group overlaps band or another group");
      atom_index_[c] = gi;
    }
    for (int c : g.tails[gi].upper) {
      if (atom_index_[c] != -2) throw Error("tail group overlaps band or another group");
      atom_index_[c] = gi;
    }
  }
  g.structure = g.tails.empty() ? ModeMap::Structure::FiniteBand : ModeMap::Structure::PairedDiagonal;
  g.growth = growth_of(*this);
}

int BoundaryCondition::atom_of(int coord) const { return atom_index_[coord]; }

std::vector<std::vector<int>> BoundaryCondition::atoms() const {
  std::vector<std::vector<int>> out;
  if (!band.empty()) out.push_back(band);
  for (const auto& t : g.tails) {
    std::vector<int> a = t.lower;
    a.insert(a.end(), t.upper.begin(), t.upper.end());
    std::sort(a.begin(), a.end());
    out.push_back(a);
  }
  for (int i = 0; i < basis->dim(); ++i)
    if (atom_index_[i] == -2) out.push_back({i});
  return out;
}

MatrixXcd BoundaryCondition::band_projector() const {
  MatrixXcd v(band_size(), vm.cols() + vp.cols());
  v << vm, vp;
  MatrixXcd p = wp * wp.adjoint();
  if (v.cols()) p += v * graph_projector(g.band) * v.adjoint();
  return p;
}

MatrixXcd BoundaryCondition::band_frame() const {
  MatrixXcd gr = vm + vp * g.band;
  MatrixXcd f(band_size(), wp.cols() + vm.cols());
  f << wp, orth_columns(gr);
  return f;
}

MatrixXcd BoundaryCondition::projector(const std::vector<int>& coords) const {
  const int m = static_cast<int>(coords.size());
  std::map<int, int> loc;
  for (int i = 0; i < m; ++i) loc[coords[i]] = i;
  MatrixXcd p = MatrixXcd::Zero(m, m);
  bool band_done = false;
  std::vector<char> group_done(g.tails.size(), 0);
  auto local = [&](int c) {
    auto it = loc.find(c);
    if (it == loc.end()) throw Error("projector: coordinate set is not a union of atoms");
    return it->second;
  };
  for (int c : coords) {
    int a = atom_index_[c];
    if (a == -2) {
      if (basis->lambda(c) < 0.0) p(loc[c], loc[c]) = 1.0;
    } else if (a == -1) {
      if (band_done) continue;
      band_done = true;
      MatrixXcd bp = band_projector();
      std::vector<int> idx(band_size());
      for (int i = 0; i < band_size(); ++i) idx[i] = local(band[i]);
      for (int i = 0; i < band_size(); ++i)
        for (int j = 0; j < band_size(); ++j) p(idx[i], idx[j]) = bp(i, j);
    } else {
      if (group_done[a]) continue;
      group_done[a] = 1;
      const auto& t = g.tails[a];
      MatrixXcd gp = graph_projector(t.g);
      std::vector<int> idx;
      for (int c2 : t.lower) idx.push_back(local(c2));
      for (int c2 : t.upper) idx.push_back(local(c2));
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) p(idx[i], idx[j]) = gp(i, j);
    }
  }
  return p;
}

int BoundaryCondition::dim_on(const std::vector<int>& coords) const {
  int d = 0;
  bool band_done = false;
  std::vector<char> group_done(g.tails.size(), 0);
  for (int c : coords) {
    int a = atom_index_[c];
    if (a == -2) {
      d += basis->lambda(c) < 0.0 ? 1 : 0;
    } else if (a == -1) {
      if (!band_done) d += dim_w_plus() + static_cast<int>(vm.cols());
      band_done = true;
    } else if (!group_done[a]) {
      group_done[a] = 1;
      d += static_cast<int>(g.tails[a].lower.size());
    }
  }
  return d;
}

BoundarySection BoundaryCondition::project(const BoundarySection& phi) const {
  if (!phi.basis()->lattice_compatible(*basis)) throw Error("section and condition live on different lattices");
  VectorXcd out = VectorXcd::Zero(phi.coeffs().size());
  const auto& x = phi.coeffs();
  if (band_size()) {
    VectorXcd xs(band_size());
    for (int i = 0; i < band_size(); ++i) xs[i] = x[band[i]];
    VectorXcd ys = band_projector() * xs;
    for (int i = 0; i < band_size(); ++i) out[band[i]] = ys[i];
  }
  for (const auto& t : g.tails) {
    std::vector<int> idx = t.lower;
    idx.insert(idx.end(), t.upper.begin(), t.upper.end());
    VectorXcd xs(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) xs[i] = x[idx[i]];
    VectorXcd ys = graph_projector(t.g) * xs;
    for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = ys[i];
  }
  for (int i = 0; i < x.size(); ++i)
    if (atom_index_[i] == -2 && basis->lambda(i) < 0.0) out[i] = x[i];
  return BoundarySection(phi.basis(), out);
}

void BoundaryCondition::validate(double tol) const {
  const int s = band_size();
  if (wp.rows() != s || wm.rows() != s || vm.rows() != s || vp.rows() != s) throw Error("frame row count mismatch");
  if (g.band.rows() != vp.cols() || g.band.cols() != vm.cols()) throw Error("g shape does not match V frames");
  MatrixXcd all(s, wp.cols() + wm.cols() + vm.cols() + vp.cols());
  all << wp, wm, vm, vp;
  if (all.cols() != s) throw Error("W and V frames do not span the band");
  if ((all.adjoint() * all - MatrixXcd::Identity(s, s)).norm() > tol) throw Error("W and V frames are not orthonormal");
  for (const auto& t : g.tails) {
    if (t.g.rows() != static_cast<int>(t.upper.size()) || t.g.cols() != static_cast<int>(t.lower.size()))
      throw Error("tail block shape mismatch");
    for (int c : t.lower)
      if (basis->lambda(c) >= 0.0 || std::abs(basis->lambda(c)) <= radius) throw Error("tail lower coordinate misplaced");
    for (int c : t.upper)
      if (basis->lambda(c) <= 0.0 || std::abs(basis->lambda(c)) <= radius) throw Error("tail upper coordinate misplaced");
  }
}

// ---------------------------------------------------------------- constructors

BoundaryCondition make_generalized_aps(const BasisPtr& basis, double a, bool closed_below) {
  auto b = skeleton(basis, a, closed_below, std::max(basis->band(), std::abs(a)));
  std::vector<int> lo, up;
  split_band(b, lo, up);
  b.vm = unit_columns(b.band_size(), lo);
  b.vp = unit_columns(b.band_size(), up);
  b.wp = MatrixXcd(b.band_size(), 0);
  b.wm = MatrixXcd(b.band_size(), 0);
  b.g.band = MatrixXcd::Zero(b.vp.cols(), b.vm.cols());
  b.provenance = Provenance::Aps;
  b.finalize();
  return b;
}

BoundaryCondition make_chiral(const BasisPtr& basis, const SigmaZero& sigma, int sign) {
  if (sign != 1 && sign != -1) throw Error("chiral sign must be +1 or -1");
  if (!sigma.skew_unitary) throw Error("chiral condition needs a skew-unitary sigma_0");
  if (sigma.blocks.size() != basis->blocks().size()) throw Error("sigma_0 does not match the basis");
  auto b = skeleton(basis, 0.0, false, basis->band());
  const int s = b.band_size();
  const double ktol = 1e-12;
  std::vector<MatrixXcd> gblk(sigma.blocks.size());
  for (std::size_t i = 0; i < sigma.blocks.size(); ++i) {
    const auto& blk = basis->blocks()[i];
    MatrixXcd gi = cd(0.0, 1.0) * sigma.blocks[i];
    MatrixXcd lam = blk.lambda.cast<cd>().asDiagonal();
    double scale = std::max(1.0, blk.lambda.cwiseAbs().maxCoeff());
    if ((gi * lam + lam * gi).norm() > 1e-10 * scale)
      throw Error("A does not anticommute with i sigma_0 at mode " + std::to_string(blk.mode_id));
    gblk[i] = gi;
  }
  std::vector<int> lo, up;
  std::vector<MatrixXcd> wps, wms;
  MatrixXcd gfull = MatrixXcd::Zero(s, s);
  for (std::size_t i = 0; i < gblk.size(); ++i) {
    const auto& blk = basis->blocks()[i];
    std::vector<int> kern, l_out, u_out;
    for (int f = 0; f < blk.k; ++f) {
      int c = blk.offset + f;
      double l = blk.lambda[f];
      int p = b.band_pos(c);
      if (p < 0 && std::abs(l) <= b.radius) throw Error("internal: band lookup");
      if (std::abs(l) <= b.radius) {
        if (std::abs(l) <= ktol) kern.push_back(f);
        else (l < 0 ? lo : up).push_back(p);
      } else {
        (l < 0 ? l_out : u_out).push_back(f);
      }
    }
    for (int f1 = 0; f1 < blk.k; ++f1) {
      int p1 = b.band_pos(blk.offset + f1);
      if (p1 < 0) continue;
      for (int f2 = 0; f2 < blk.k; ++f2) {
        int p2 = b.band_pos(blk.offset + f2);
        if (p2 >= 0) gfull(p1, p2) = static_cast<double>(sign) * gblk[i](f1, f2);
      }
    }
    if (!kern.empty()) {
      MatrixXcd gk(kern.size(), kern.size());
      for (std::size_t x = 0; x < kern.size(); ++x)
        for (std::size_t y = 0; y < kern.size(); ++y) gk(x, y) = gblk[i](kern[x], kern[y]);
      Eigen::SelfAdjointEigenSolver<MatrixXcd> es(gk);
      for (int e = 0; e < static_cast<int>(kern.size()); ++e) {
        VectorXcd col = VectorXcd::Zero(s);
        for (std::size_t x = 0; x < kern.size(); ++x) col[b.band_pos(blk.offset + kern[x])] = es.eigenvectors()(x, e);
        (es.eigenvalues()[e] * sign > 0 ? wps : wms).push_back(col);
      }
    }
    if (!l_out.empty() || !u_out.empty()) {
      if (l_out.size() != u_out.size()) throw Error("chiral tail is unbalanced at mode " + std::to_string(blk.mode_id));
      TailGroup t;
      t.g.resize(u_out.size(), l_out.size());
      for (std::size_t x = 0; x < u_out.size(); ++x)
        for (std::size_t y = 0; y < l_out.size(); ++y)
          t.g(x, y) = static_cast<double>(sign) * gblk[i](u_out[x], l_out[y]);
      for (int f : l_out) t.lower.push_back(blk.offset + f);
      for (int f : u_out) t.upper.push_back(blk.offset + f);
      b.g.tails.push_back(std::move(t));
    }
  }
  auto stack = [s](const std::vector<MatrixXcd>& cols) {
    MatrixXcd m(s, static_cast<int>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) m.col(j) = cols[j];
    return m;
  };
  b.wp = stack(wps);
  b.wm = stack(wms);
  b.vm = unit_columns(s, lo);
  b.vp = unit_columns(s, up);
  b.g.band = b.vp.adjoint() * gfull * b.vm;
  b.provenance = Provenance::Chiral;
  b.finalize();
  return b;
}

BoundaryCondition make_transmission(const BasisPtr& basis) {
  if (!basis->doubled()) throw Error("transmission needs a doubled basis");
  auto b = skeleton(basis, 0.0, false, basis->band());
  const int s = b.band_size();
  const auto& blocks = basis->blocks();
  std::vector<int> lo, up;
  std::vector<std::pair<int, int>> pairs;  // (upper pos, lower pos)
  std::vector<VectorXcd> wps, wms;
  const double r2 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b0 = blocks[i];
    if (b0.copy != 0) continue;
    if (i + 1 >= blocks.size() || blocks[i + 1].copy != 1 || blocks[i + 1].mode_id != b0.mode_id + 1)
      throw Error("basis is not a two-copy doubling");
    const auto& b1 = blocks[i + 1];
    for (int f = 0; f < b0.k; ++f) {
      int c0 = b0.offset + f, c1 = b1.offset + f;
      double l0 = basis->lambda(c0), l1 = basis->lambda(c1);
      if (std::abs(l0 + l1) > 1e-12) throw Error("second copy does not carry negated eigenvalues");
      int lc = l0 < 0 ? c0 : c1, uc = l0 < 0 ? c1 : c0;
      if (std::abs(l0) <= b.radius) {
        int p0 = b.band_pos(c0), p1 = b.band_pos(c1);
        if (std::abs(l0) <= 1e-12) {
          VectorXcd wpl = VectorXcd::Zero(s), wmi = VectorXcd::Zero(s);
          wpl[p0] = r2;
          wpl[p1] = r2;
          wmi[p0] = r2;
          wmi[p1] = -r2;
          wps.push_back(wpl);
          wms.push_back(wmi);
        } else {
          lo.push_back(b.band_pos(lc));
          up.push_back(b.band_pos(uc));
          pairs.emplace_back(b.band_pos(uc), b.band_pos(lc));
        }
      } else {
        TailGroup t;
        t.lower = {lc};
        t.upper = {uc};
        t.g = MatrixXcd::Ones(1, 1);
        b.g.tails.push_back(std::move(t));
      }
    }
  }
  auto stack = [s](const std::vector<VectorXcd>& cols) {
    MatrixXcd m(s, static_cast<int>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) m.col(j) = cols[j];
    return m;
  };
  b.wp = stack(wps);
  b.wm = stack(wms);
  b.vm = unit_columns(s, lo);
  b.vp = unit_columns(s, up);
  MatrixXcd gfull = MatrixXcd::Zero(s, s);
  for (auto [u, l] : pairs) gfull(u, l) = 1.0;
  b.g.band = b.vp.adjoint() * gfull * b.vm;
  b.provenance = Provenance::Transmission;
  b.finalize();
  return b;
}

namespace {

MatrixXcd band_columns(const BoundaryCondition& b, const std::vector<BoundarySection>& secs) {
  MatrixXcd m(b.band_size(), static_cast<int>(secs.size()));
  for (std::size_t j = 0; j < secs.size(); ++j) {
    const auto& x = secs[j].coeffs();
    if (x.size() != b.basis->dim()) throw Error("W section does not match the basis");
    for (int i = 0; i < x.size(); ++i)
      if (x[i] != 0.0 && b.band_pos(i) < 0) throw Error("W section leaves the band");
    for (int p = 0; p < b.band_size(); ++p) m(p, j) = x[b.band[p]];
  }
  return m;
}

void fill_graph(BoundaryCondition& b, const MatrixXcd& wp_raw, const MatrixXcd& wm_raw) {
  std::vector<int> lo, up;
  split_band(b, lo, up);
  const int s = b.band_size();
  b.wp = orth_columns(wp_raw);
  b.wm = orth_columns(wm_raw);
  for (int p : lo)
    if (b.wp.rows() && b.wp.row(p).norm() > 1e-12) throw Error("W+ must lie in the upper spectral half");
  for (int p : up)
    if (b.wm.rows() && b.wm.row(p).norm() > 1e-12) throw Error("W- must lie in the lower spectral half");
  b.vm = orth_complement(unit_columns(s, lo), b.wm);
  b.vp = orth_complement(unit_columns(s, up), b.wp);
}

}  // namespace

BoundaryCondition make_graph(const BasisPtr& basis, double a, const std::vector<BoundarySection>& w_plus,
                             const std::vector<BoundarySection>& w_minus, const std::vector<ModeEntry>& g_entries,
                             bool closed_below) {
  auto b = skeleton(basis, a, closed_below, basis->band());
  b.finalize();
  fill_graph(b, band_columns(b, w_plus), band_columns(b, w_minus));
  MatrixXcd graw = MatrixXcd::Zero(b.band_size(), b.band_size());
  for (const auto& e : g_entries) {
    if (e.from < 0 || e.to < 0 || e.from >= basis->dim() || e.to >= basis->dim()) throw Error("g entry out of range");
    int pf = b.band_pos(e.from), pt = b.band_pos(e.to);
    if (pf < 0 || pt < 0) throw Error("g entry leaves the band");
    graw(pt, pf) += e.value;
  }
  b.g.band = b.vp.adjoint() * graw * b.vm;
  b.provenance = Provenance::Graph;
  b.finalize();
  return b;
}

BoundaryCondition random_graph_condition(const BasisPtr& basis, double a, std::mt19937_64& rng,
                                         const GraphSampler& opt) {
  auto b = skeleton(basis, a, false, basis->band());
  b.finalize();
  std::vector<int> lo, up;
  split_band(b, lo, up);
  const int s = b.band_size();
  auto pick = [&](int avail) {
    int hi = std::min(opt.max_w, avail);
    int lo_w = opt.allow_zero_w ? 0 : std::min(1, hi);
    return std::uniform_int_distribution<int>(lo_w, hi)(rng);
  };
  int p = pick(static_cast<int>(up.size()));
  int q = pick(static_cast<int>(lo.size()));
  MatrixXcd wp_raw = MatrixXcd::Zero(s, p), wm_raw = MatrixXcd::Zero(s, q);
  for (int j = 0; j < p; ++j) {
    VectorXcd v = random_vector(static_cast<int>(up.size()), rng);
    for (std::size_t i = 0; i < up.size(); ++i) wp_raw(up[i], j) = v[i];
  }
  for (int j = 0; j < q; ++j) {
    VectorXcd v = random_vector(static_cast<int>(lo.size()), rng);
    for (std::size_t i = 0; i < lo.size(); ++i) wm_raw(lo[i], j) = v[i];
  }
  fill_graph(b, wp_raw, wm_raw);
  MatrixXcd g = MatrixXcd::Zero(b.vp.cols(), b.vm.cols());
  if (g.size()) {
    for (int i = 0; i < g.rows(); ++i) g.row(i) = random_vector(static_cast<int>(g.cols()), rng).transpose();
    double target = std::uniform_real_distribution<double>(opt.min_g_norm, opt.max_g_norm)(rng);
    double n = Eigen::BDCSVD<MatrixXcd>(g).singularValues()[0];
    g *= target / n;
  }
  b.g.band = g;
  b.provenance = Provenance::Graph;
  b.finalize();
  return b;
}

// ---------------------------------------------------------------- adjoint calculus

BoundaryCondition orthocomplement(const BoundaryCondition& b) {
  BoundaryCondition c;
  c.basis = b.basis->negated();
  c.cut = -b.cut;
  c.closed_below = !b.closed_below;
  c.radius = b.radius;
  c.band = b.band;
  c.wp = b.wm;
  c.wm = b.wp;
  c.vm = b.vp;
  c.vp = b.vm;
  c.g.band = -b.g.band.adjoint();
  for (const auto& t : b.g.tails) c.g.tails.push_back({t.upper, t.lower, -t.g.adjoint()});
  c.provenance = b.provenance;
  c.finalize();
  return c;
}

AdjointCondition adjoint(const BoundaryCondition& b, const SigmaZero& sigma) {
  if (sigma.blocks.size() != b.basis->blocks().size()) throw Error("sigma_0 does not match the basis");
  return {orthocomplement(b), sigma};
}

BoundaryCondition adjoint_of_adjoint(const AdjointCondition& ad) {
  // (B^ad)^ad with respect to the adjoint symbol -sigma^*: -sigma^{-1} sigma (inner)^perp = (inner)^perp
  return orthocomplement(ad.inner);
}

BoundaryCondition deform(const BoundaryCondition& b, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw Error("deformation parameter must lie in [0,1]");
  BoundaryCondition c = b;
  c.g.band *= s;
  for (auto& t : c.g.tails) t.g *= s;
  c.finalize();
  return c;
}

BoundaryCondition rebase(const BoundaryCondition& b, double a, bool closed_below) {
  if (!(std::abs(a) <= b.radius)) throw Error("rebase target cut leaves the band");
  BoundaryCondition c = b;
  c.cut = a;
  c.closed_below = closed_below;
  std::vector<int> lo, up;
  split_band(c, lo, up);
  const int s = c.band_size();
  MatrixXcd f = b.band_frame();
  MatrixXcd pl = MatrixXcd::Zero(s, s), pu = MatrixXcd::Zero(s, s);
  for (int p : lo) pl(p, p) = 1.0;
  for (int p : up) pu(p, p) = 1.0;
  MatrixXcd fl = pl * f;
  MatrixXcd n = null_space(fl, 1e-10);  // coefficients of B cap upper
  c.wp = f * n;
  c.vm = orth_columns(fl);
  c.wm = orth_complement(unit_columns(s, lo), c.vm);
  c.vp = orth_complement(unit_columns(s, up), c.wp);
  MatrixXcd rest = f * orth_complement(MatrixXcd::Identity(f.cols(), f.cols()), n);
  MatrixXcd x = c.vm.adjoint() * pl * rest;
  MatrixXcd y = c.vp.adjoint() * pu * rest;
  if (x.rows() != x.cols()) throw Error("rebase: graph part is not square");
  c.g.band = x.size() ? MatrixXcd(y * x.inverse()) : MatrixXcd::Zero(c.vp.cols(), c.vm.cols());
  c.finalize();
  return c;
}

// ---------------------------------------------------------------- queries

bool membership(const BoundarySection& phi, const BoundaryCondition& b, double tol) {
  auto p = b.project(phi);
  double n = phi.coeffs().norm();
  return (phi.coeffs() - p.coeffs()).norm() <= tol * std::max(n, 1e-300);
}

bool membership(const BoundarySection& psi, const AdjointCondition& ad, double tol) {
  BoundarySection x(psi.basis(), apply_blocks_adjoint(ad.sigma, psi.coeffs()));
  return membership(x, ad.inner, tol);
}

BoundarySection sample_member(const BoundaryCondition& b, std::mt19937_64& rng) {
  BoundarySection raw(b.basis, random_vector(b.basis->dim(), rng));
  return b.project(raw);
}

BoundarySection sample_member(const AdjointCondition& ad, std::mt19937_64& rng) {
  auto inner = sample_member(ad.inner, rng);
  return BoundarySection(inner.basis(), apply_blocks_inv_adjoint(ad.sigma, inner.coeffs()));
}

std::vector<std::vector<int>> joint_clusters(const BoundaryCondition& x, const BoundaryCondition& y) {
  if (!x.basis->lattice_compatible(*y.basis)) throw Error("conditions live on different lattices");
  const int n = x.basis->dim();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto unite = [&](const std::vector<int>& a) {
    for (std::size_t i = 1; i < a.size(); ++i) {
      int r0 = find(a[0]), r1 = find(a[i]);
      if (r0 != r1) parent[r1] = r0;
    }
  };
  for (const auto& a : x.atoms()) unite(a);
  for (const auto& a : y.atoms()) unite(a);
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<int>> out;
  for (auto& [r, v] : groups) out.push_back(std::move(v));
  std::sort(out.begin(), out.end());
  return out;
}

bool same_subspace(const BoundaryCondition& x, const BoundaryCondition& y, double tol) {
  for (const auto& c : joint_clusters(x, y)) {
    if (c.size() == 1 && x.atom_of(c[0]) == -2 && y.atom_of(c[0]) == -2) {
      if ((x.basis->lambda(c[0]) < 0) != (y.basis->lambda(c[0]) < 0)) return false;
      continue;
    }
    if ((x.projector(c) - y.projector(c)).norm() > tol) return false;
  }
  return true;
}

int quotient_dim(const BoundaryCondition& b1, const BoundaryCondition& b2) {
  int d = 0;
  for (const auto& c : joint_clusters(b1, b2)) {
    MatrixXcd p1 = b1.projector(c), p2 = b2.projector(c);
    MatrixXcd id = MatrixXcd::Identity(p1.rows(), p1.cols());
    if (((id - p2) * p1).norm() > 1e-8) throw Error("quotient_dim: conditions are not nested");
    d += b2.dim_on(c) - b1.dim_on(c);
  }
  return d;
}

Regularity regularity_order(const BoundaryCondition& b) {
  // band data is smooth; a growth-bounded pairing preserves every H^s weight
  if (std::isfinite(b.g.growth)) return {true, 0};
  return {false, 1};
}

std::vector<MatrixXcd> chiral_projectors(const BasisPtr& basis, const SigmaZero& sigma, int sign) {
  std::vector<MatrixXcd> out;
  for (std::size_t i = 0; i < sigma.blocks.size(); ++i) {
    const auto& m = sigma.blocks[i];
    MatrixXcd id = MatrixXcd::Identity(m.rows(), m.cols());
    out.push_back(0.5 * (id + static_cast<double>(sign) * cd(0.0, 1.0) * m));
  }
  if (out.size() != basis->blocks().size()) throw Error("sigma_0 does not match the basis");
  return out;
}

PseudoLocalResult pseudo_local_check(const BasisPtr& basis, const std::vector<MatrixXcd>& p, double a) {
  const auto& blocks = basis->blocks();
  if (p.size() != blocks.size()) throw Error("projector family does not match the basis");
  PseudoLocalResult r{true, kInf, 0};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& blk = blocks[i];
    const auto& pi = p[i];
    if (pi.rows() != blk.k || pi.cols() != blk.k) throw Error("projector block has the wrong size");
    if ((pi * pi - pi).norm() > 1e-10 || (pi - pi.adjoint()).norm() > 1e-10)
      throw Error("block " + std::to_string(blk.mode_id) + " is not an orthogonal projector");
    if (blk.lambda.cwiseAbs().minCoeff() <= basis->band()) continue;
    MatrixXcd q = MatrixXcd::Zero(blk.k, blk.k);
    for (int f = 0; f < blk.k; ++f)
      if (blk.lambda[f] >= a) q(f, f) = 1.0;
    double smin = Eigen::JacobiSVD<MatrixXcd>(pi - q).singularValues().minCoeff();
    if (smin < 1e-9) return {false, smin, blk.mode_id};
    if (smin < r.min_singular) {
      r.min_singular = smin;
      r.witness_mode = blk.mode_id;
    }
  }
  if (!std::isfinite(r.min_singular)) r.min_singular = 0.0;
  return r;
}

}  // namespace apslab
