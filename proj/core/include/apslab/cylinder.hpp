#pragma once

#include "apslab/conditions.hpp"
#include "apslab/profile.hpp"

#include <optional>
#include <random>
#include <vector>

namespace apslab {

// Phi(t) = sum_j f_j(t) phi_j over the eigen coordinates of a basis.
class CylinderSection {
 public:
  CylinderSection() = default;
  CylinderSection(BasisPtr basis, double rho);

  const BasisPtr& basis() const { return basis_; }
  double rho() const { return rho_; }
  const Profile& operator[](int coord) const { return prof_[coord]; }
  Profile& operator[](int coord) { return prof_[coord]; }
  int dim() const { return static_cast<int>(prof_.size()); }

  BoundarySection trace(double t) const;
  bool is_zero() const;
  CylinderSection derivative() const;

  CylinderSection& operator+=(const CylinderSection& o);
  CylinderSection& operator*=(cd s);
  friend CylinderSection operator+(CylinderSection a, const CylinderSection& b) { return a += b; }
  friend CylinderSection operator-(CylinderSection a, const CylinderSection& b) {
    CylinderSection nb = b;
    nb *= -1.0;
    return a += nb;
  }

 private:
  BasisPtr basis_;
  double rho_ = 1.0;
  std::vector<Profile> prof_;
};

cd section_inner(const CylinderSection& a, const CylinderSection& b);
double section_norm(const CylinderSection& a);
// max over a uniform grid of |a(t) - b(t)| (Euclidean over coordinates)
double grid_sup_distance(const CylinderSection& a, const CylinderSection& b, int points = 64);

// apply a per-block matrix family pointwise in t
CylinderSection apply_sigma(const SigmaZero& sigma, const CylinderSection& phi, bool adjoint = false, bool inverse = false);

CylinderSection s0_apply(const CylinderSection& psi, const SigmaZero& sigma);
CylinderSection extension_apply(const BoundarySection& phi, double r, double rho);
CylinderSection model_apply(const CylinderSection& phi, const SigmaZero& sigma);
CylinderSection model_adjoint_apply(const CylinderSection& psi, const SigmaZero& sigma);
// exp(-t A) phi
CylinderSection homogeneous(const BoundarySection& phi, double rho);

struct CylinderProblem {
  BasisPtr basis;  // A
  SigmaZero sigma;
  double rho = 1.0;
  BoundaryCondition left;   // over A at t = 0
  BoundaryCondition right;  // over -A at t = rho

  void validate() const;
};

// reference problem: B(0) at t = 0 and H_[0,inf)(A) at t = rho
CylinderProblem reference_problem(const Model& m, double rho);

// Kernel of the homogeneous problem, one orthonormal coefficient block per cluster.
struct KernelData {
  std::vector<CylinderSection> basis;
  int clusters = 0;
  int largest_cluster = 0;
};
KernelData homogeneous_kernel(const CylinderProblem& p);

// The adjoint problem in the variable Xi = sigma^* Psi: d/dt - A with the orthocomplements.
CylinderProblem adjoint_problem(const CylinderProblem& p);
// cokernel elements Psi (already mapped back through (sigma^*)^{-1})
std::vector<CylinderSection> cokernel(const CylinderProblem& p);

struct SolveResult {
  std::optional<CylinderSection> particular;
  std::vector<CylinderSection> kernel_basis;
  std::vector<CylinderSection> obstruction_basis;
  double residual = 0.0;         // ||D0 Phi - Psi|| / ||Psi||
  double boundary_residual = 0.0;
};
SolveResult solve_bvp(const CylinderProblem& p, const CylinderSection& psi);

double riso_residual(const CylinderSection& phi, const SigmaZero& sigma);
cd greens_residual(const CylinderSection& phi, const CylinderSection& psi, const SigmaZero& sigma);
// scale used by the Green contract: ||Phi||_{D0} ||Psi||_{D0*}
double greens_scale(const CylinderSection& phi, const CylinderSection& psi, const SigmaZero& sigma);
double energy_identity_residual(const CylinderSection& phi, const SigmaZero& sigma);

struct OdeBoundReport {
  double f_l2 = 0.0, fp_l2 = 0.0, g_l2 = 0.0;  // squared norms
  double l2_bound = 0.0, h1_bound = 0.0;      // right-hand sides (squared)
  double l2_slack = 0.0, h1_slack = 0.0;
  bool holds = false;
};
OdeBoundReport ode_bound_check(double lambda, const Profile& g, double rho);

struct ExtensionProbe {
  double max_ratio = 0.0;
  int count = 0;
};
ExtensionProbe extension_bound_probe(const std::vector<BoundarySection>& samples, double cut, double r, double rho,
                                     const SigmaZero& sigma);

// seeded exponential-polynomial profiles and sections
struct ProfileSampler {
  int max_terms = 3;
  int max_degree = 2;
  double mu_range = 2.0;
  bool complex_mu = true;
};
ExpPoly random_exppoly(std::mt19937_64& rng, const ProfileSampler& opt = {});
CylinderSection random_cylinder_section(const BasisPtr& basis, double rho, std::mt19937_64& rng, int modes,
                                        double max_abs_lambda, const ProfileSampler& opt = {});

}  // namespace apslab
