#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace apslab {

using cd = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One boundary circle. Shifted integers give scalar-per-fiber blocks
// lambda = n + shift; chiral gives A_n = U [[0, conj b_n],[b_n, 0]] U^*
// with b_n = i n + offset; explicit carries literal blocks.
struct ExplicitBlock {
  std::int64_t n = 0;
  MatrixXcd a;      // Hermitian k x k, fiber coordinates
  MatrixXcd sigma;  // k x k, fiber coordinates
};

struct ComponentSpec {
  enum class Kind { ShiftedIntegers, Chiral, Explicit };
  Kind kind = Kind::ShiftedIntegers;
  double shift = 0.0;
  int fiber_dim = 1;
  MatrixXcd sigma;  // fiber-coordinate sigma_0; empty -> identity (or -i U diag(1,-1) U^* for chiral)
  cd offset{0.0, 0.0};
  MatrixXcd frame;  // chiral only; empty -> identity
  std::vector<ExplicitBlock> blocks;
};

struct ModelSpec {
  std::vector<ComponentSpec> components;
  double band = 4.0;     // Lambda_band
  bool doubled = false;  // two copies, second with A -> -A and sigma -> -sigma
};

struct Block {
  std::int64_t mode_id = 0;
  int component = 0;
  int copy = 0;
  std::int64_t n = 0;
  int k = 1;
  int offset = 0;   // first flat coordinate
  VectorXd lambda;  // eigenvalues in the block's eigen frame
  MatrixXcd frame;  // columns: eigenvectors in fiber coordinates
};

class EigenmodeBasis {
 public:
  EigenmodeBasis(ModelSpec spec, int truncation, std::vector<Block> blocks, bool negated);

  const ModelSpec& spec() const { return spec_; }
  int truncation() const { return n_; }
  double lambda_max() const { return static_cast<double>(n_); }
  double band() const { return spec_.band; }
  bool is_negated() const { return negated_; }
  bool doubled() const { return spec_.doubled; }

  int dim() const { return static_cast<int>(lambda_.size()); }
  const VectorXd& lambda() const { return lambda_; }
  double lambda(int coord) const { return lambda_[coord]; }
  const std::vector<Block>& blocks() const { return blocks_; }
  int block_of(int coord) const { return coord_block_[coord]; }
  int fiber_of(int coord) const { return coord - blocks_[coord_block_[coord]].offset; }
  std::int64_t mode_of(int coord) const { return blocks_[coord_block_[coord]].mode_id; }
  int find_block(std::int64_t mode_id) const;  // -1 if absent
  int coord(std::int64_t mode_id, int fiber) const;  // -1 if absent
  bool in_band(int coord) const { return std::abs(lambda_[coord]) <= spec_.band; }
  std::vector<int> band_coords() const;

  // same mode lattice and fiber sizes (eigenvalues may differ, e.g. by negation)
  bool lattice_compatible(const EigenmodeBasis& other) const;
  std::shared_ptr<const EigenmodeBasis> negated() const;

 private:
  ModelSpec spec_;
  int n_;
  bool negated_;
  std::vector<Block> blocks_;
  VectorXd lambda_;
  std::vector<int> coord_block_;
};

using BasisPtr = std::shared_ptr<const EigenmodeBasis>;

// Per-block sigma_0 in the block's eigen coordinates.
struct SigmaZero {
  std::vector<MatrixXcd> blocks;
  bool skew_unitary = false;

  SigmaZero negated() const;
  void validate(double tol = 1e-12) const;
};

struct Model {
  BasisPtr basis;
  SigmaZero sigma;
};

Model build_model(const ModelSpec& spec, int truncation);
ModelSpec integer_spectrum(double shift = 0.0, int fiber_dim = 1, cd sigma = cd(1.0, 0.0), double band = 4.0);
ModelSpec chiral_spectrum(cd offset, const MatrixXcd& frame = MatrixXcd(), double band = 4.0);

class BoundarySection {
 public:
  BoundarySection() = default;
  explicit BoundarySection(BasisPtr basis);
  BoundarySection(BasisPtr basis, VectorXcd coeffs);

  const BasisPtr& basis() const { return basis_; }
  const VectorXcd& coeffs() const { return c_; }
  VectorXcd& coeffs() { return c_; }
  cd operator[](int coord) const { return c_[coord]; }

  std::vector<std::int64_t> support() const;  // mode ids with a nonzero coefficient
  bool is_zero() const { return support().empty(); }
  void set(std::int64_t mode_id, int fiber, cd value);

  static BoundarySection unit(BasisPtr basis, std::int64_t mode_id, int fiber = 0);

 private:
  BasisPtr basis_;
  VectorXcd c_;
};

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_closed = false;
  bool hi_closed = false;

  bool contains(double x) const;
  static Interval below(double a) { return {-kInf, a, false, false}; }      // (-inf, a)
  static Interval at_most(double a) { return {-kInf, a, false, true}; }     // (-inf, a]
  static Interval at_least(double a) { return {a, kInf, true, false}; }     // [a, inf)
  static Interval above(double a) { return {a, kInf, false, false}; }       // (a, inf)
  static Interval all() { return {}; }
  Interval intersect(const Interval& o) const;
};

double sobolev_norm(const BoundarySection& phi, double s);
double check_norm(const BoundarySection& phi, double cut);
double hat_norm(const BoundarySection& phi, double cut);
BoundarySection project(const BoundarySection& phi, const Interval& iv);
// complement of the interval inside R
BoundarySection project_complement(const BoundarySection& phi, const Interval& iv);
cd l2_pairing(const BoundarySection& phi, const BoundarySection& psi);
// beta(phi, psi) = -(sigma phi, psi); psi may live over the negated lattice
cd beta_pairing(const BoundarySection& phi, const BoundarySection& psi, const SigmaZero& sigma);

VectorXcd apply_blocks(const SigmaZero& sigma, const VectorXcd& v);
VectorXcd apply_blocks_adjoint(const SigmaZero& sigma, const VectorXcd& v);      // sigma^*
VectorXcd apply_blocks_inverse(const SigmaZero& sigma, const VectorXcd& v);      // sigma^{-1}
VectorXcd apply_blocks_inv_adjoint(const SigmaZero& sigma, const VectorXcd& v);  // (sigma^{-1})^*

struct RatioStats {
  double min = 0.0;
  double max = 0.0;
  int count = 0;
};

RatioStats norm_equivalence_probe(const std::vector<BoundarySection>& samples, double cut1, double cut2);

struct SectionSampler {
  int max_support = 6;   // modes touched per sample
  double max_abs_lambda = kInf;
};

BoundarySection random_section(const BasisPtr& basis, std::mt19937_64& rng, const SectionSampler& opt = {});
VectorXcd random_vector(int n, std::mt19937_64& rng);

}  // namespace apslab
