#pragma once

#include "apslab/cylinder.hpp"

#include <functional>
#include <string>
#include <vector>

namespace apslab {

// The adapted operator seen from one end: A with sigma_0 at t = 0, -A with -sigma_0 at t = rho.
struct EndView {
  BasisPtr basis;
  SigmaZero sigma;
};

using ConditionFactory = std::function<BoundaryCondition(const EndView&)>;

// A cylinder problem described independently of the truncation, so that it
// can be rebuilt at 2N for the certificate.
struct Setup {
  ModelSpec model;
  double rho = 1.0;
  ConditionFactory left;
  ConditionFactory right;
};

EndView left_end(const Model& m);
EndView right_end(const Model& m);
CylinderProblem instantiate(const Setup& s, int truncation);

namespace factory {
ConditionFactory aps(double a, bool closed_below = false);
ConditionFactory chiral(int sign);
ConditionFactory transmission();
ConditionFactory random_graph(double a, std::uint64_t seed, GraphSampler opt = {});
ConditionFactory deformed(ConditionFactory f, double s);
// orthocomplement of a condition built over the opposite end, re-expressed on this end
ConditionFactory complement_of(ConditionFactory opposite);
// H_[a,inf)(A) seen from the right end, i.e. B(-a) over -A with the cut eigenvalue included
ConditionFactory right_reference(double a = 0.0);
}  // namespace factory

struct Certificate {
  int n_used = 0;
  int n_doubled = 0;
  bool agrees = false;
};

struct IndexReport {
  int dim_ker = 0;
  int dim_coker = 0;
  int index = 0;
  int counting_index = 0;  // sum over clusters of dim B_L + dim B_R - size
  Certificate certificate;
  double verification_residual = 0.0;
  std::vector<CylinderSection> kernel;
  std::vector<CylinderSection> cokernel;
};

// single run at the problem's own truncation, no certificate
IndexReport index_once(const CylinderProblem& p, bool keep_bases = true);
// run at N and 2N; throws when the two runs disagree
IndexReport index(const Setup& s, int truncation, bool keep_bases = false);
int counting_index(const CylinderProblem& p);

struct IdentityReport {
  std::string name;
  long long lhs = 0;
  long long rhs = 0;
  bool holds = false;
  bool certified = true;
  bool refused = false;
  double witness = 0.0;
  std::string detail;
  std::vector<IndexReport> runs;
};

IdentityReport aps_shift_check(const Setup& base, double a, double b, int truncation);
IdentityReport graph_index_check(const Setup& s, int truncation);
IdentityReport nested_shift_check(const Setup& base, const ConditionFactory& b1, const ConditionFactory& b2,
                                  int truncation);

struct SweepReport {
  std::vector<double> s;
  std::vector<IndexReport> runs;
  bool constant = false;
  int value = 0;
};
SweepReport deformation_sweep(const Setup& s, int steps, int truncation);

struct Subspace {
  const BoundaryCondition* condition = nullptr;
  bool complement = false;
};

struct FredholmPairReport {
  int dim_intersection = 0;
  int codim_sum = 0;
  int index = 0;
};
FredholmPairReport fredholm_pair(const Subspace& x, const Subspace& y);

IdentityReport pair_identity_check(const Setup& base, const ConditionFactory& b1, const ConditionFactory& b2,
                                   int truncation);
// glued: problem over [0, 2 rho]; cut: condition over -A at the right end of the left half
IdentityReport split_check(const Setup& glued, const ConditionFactory& cut, int truncation);

struct CobordismReport {
  int left_contribution = 0;   // dim W+ - dim W- at t = 0
  int right_contribution = 0;  // same at t = rho (adapted operator -A)
  int total = 0;
  IndexReport plus;   // chiral B+ at both ends
  IndexReport minus;  // chiral B- at both ends
  bool holds = false;
};
CobordismReport cobordism_check(const ModelSpec& model, double rho, int truncation);

}  // namespace apslab
