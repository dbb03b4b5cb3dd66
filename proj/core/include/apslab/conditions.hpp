#pragma once

#include "apslab/spectral.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace apslab {

enum class Provenance { Aps, Graph, Chiral, Transmission };
std::string to_string(Provenance p);

// Out-of-band piece of g: couples the lower coordinates of a group to its
// upper coordinates. g is |upper| x |lower|.
struct TailGroup {
  std::vector<int> lower;
  std::vector<int> upper;
  MatrixXcd g;
};

struct ModeMap {
  enum class Structure { FiniteBand, PairedDiagonal };
  Structure structure = Structure::FiniteBand;
  MatrixXcd band;  // dim V+ x dim V- in the condition's V coordinates
  std::vector<TailGroup> tails;
  double growth = 1.0;  // C_g

  double operator_norm() const;
};

// Entries of a user-supplied g on band coordinates, mapping from -> to.
struct ModeEntry {
  int from = 0;
  int to = 0;
  cd value{0.0, 0.0};
};

// B = W+ (+) Gamma(g) in canonical graph form.
// The band S = {|lambda| <= Lambda_band} carries explicit orthonormal frames
// (columns over S). Outside S every coordinate is a singleton (in B iff
// lambda < 0) unless it belongs to a tail group.
class BoundaryCondition {
 public:
  BasisPtr basis;
  double cut = 0.0;
  bool closed_below = false;  // cut eigenvalue belongs to the lower side
  double radius = 0.0;        // S = {|lambda| <= radius}
  std::vector<int> band;      // flat coordinates of S, ascending
  MatrixXcd wp, wm, vm, vp;   // |S| x dim
  ModeMap g;
  Provenance provenance = Provenance::Aps;

  int band_size() const { return static_cast<int>(band.size()); }
  int dim_w_plus() const { return static_cast<int>(wp.cols()); }
  int dim_w_minus() const { return static_cast<int>(wm.cols()); }
  bool lower_at_cut(double lambda) const { return closed_below ? lambda <= cut : lambda < cut; }

  // -1 for band coordinates, group index for tails, -2 for singletons
  int atom_of(int coord) const;
  std::vector<std::vector<int>> atoms() const;

  // orthogonal projector onto B on the band, in S coordinates
  MatrixXcd band_projector() const;
  // projector restricted to a union of atoms
  MatrixXcd projector(const std::vector<int>& coords) const;
  // dim of B restricted to a union of atoms
  int dim_on(const std::vector<int>& coords) const;
  BoundarySection project(const BoundarySection& phi) const;
  // B restricted to the band as orthonormal columns over S
  MatrixXcd band_frame() const;

  void validate(double tol = 1e-10) const;

  // index of the coordinate inside band, -1 if not in band
  int band_pos(int coord) const { return band_pos_[coord]; }

  // fills lookup tables and the growth constant; constructors call it
  void finalize();

 private:
  std::vector<int> atom_index_;  // -1 band, >= 0 tail group, -2 singleton
  std::vector<int> band_pos_;
};

struct AdjointCondition {
  BoundaryCondition inner;  // L^2 orthocomplement, over the negated basis
  SigmaZero sigma;          // psi in B^ad  <=>  sigma^* psi in inner
};

BoundaryCondition make_generalized_aps(const BasisPtr& basis, double a, bool closed_below = false);
BoundaryCondition make_chiral(const BasisPtr& basis, const SigmaZero& sigma, int sign);
BoundaryCondition make_transmission(const BasisPtr& doubled_basis);
// W columns are sections over the basis; g is given by entries on band coordinates
// and compressed to a map V- -> V+.
BoundaryCondition make_graph(const BasisPtr& basis, double a, const std::vector<BoundarySection>& w_plus,
                             const std::vector<BoundarySection>& w_minus, const std::vector<ModeEntry>& g_entries,
                             bool closed_below = false);

struct GraphSampler {
  int max_w = 3;
  double max_g_norm = 2.0;
  double min_g_norm = 0.0;
  bool allow_zero_w = true;
};

// seeded band-limited graph condition at cut a; g has operator norm in [min_g_norm, max_g_norm]
BoundaryCondition random_graph_condition(const BasisPtr& basis, double a, std::mt19937_64& rng,
                                         const GraphSampler& opt = {});

BoundaryCondition orthocomplement(const BoundaryCondition& b);
AdjointCondition adjoint(const BoundaryCondition& b, const SigmaZero& sigma);
BoundaryCondition adjoint_of_adjoint(const AdjointCondition& ad);
BoundaryCondition deform(const BoundaryCondition& b, double s);
BoundaryCondition rebase(const BoundaryCondition& b, double a, bool closed_below = false);

bool membership(const BoundarySection& phi, const BoundaryCondition& b, double tol = 1e-10);
bool membership(const BoundarySection& psi, const AdjointCondition& ad, double tol = 1e-10);
BoundarySection sample_member(const BoundaryCondition& b, std::mt19937_64& rng);
BoundarySection sample_member(const AdjointCondition& ad, std::mt19937_64& rng);

// true when both describe the same subspace of the shared coordinate space
bool same_subspace(const BoundaryCondition& x, const BoundaryCondition& y, double tol = 1e-9);

// coordinate clusters of the joint atom structure of two conditions on one lattice
std::vector<std::vector<int>> joint_clusters(const BoundaryCondition& x, const BoundaryCondition& y);

int quotient_dim(const BoundaryCondition& b1, const BoundaryCondition& b2);

struct Regularity {
  bool infinite = true;
  int order = 0;
};
Regularity regularity_order(const BoundaryCondition& b);

struct PseudoLocalResult {
  bool ok = false;
  double min_singular = 0.0;
  std::int64_t witness_mode = 0;
};
// P: one orthogonal projector per block in eigen coordinates
PseudoLocalResult pseudo_local_check(const BasisPtr& basis, const std::vector<MatrixXcd>& p, double a);
std::vector<MatrixXcd> chiral_projectors(const BasisPtr& basis, const SigmaZero& sigma, int sign);

// numerical helpers shared with the index code
int numerical_rank(const MatrixXcd& m, double rel_tol = 1e-9);
MatrixXcd null_space(const MatrixXcd& m, double rel_tol = 1e-9);
MatrixXcd orth_columns(const MatrixXcd& m, double tol = 1e-10);
MatrixXcd orth_complement(const MatrixXcd& within, const MatrixXcd& sub, double tol = 1e-10);

}  // namespace apslab
