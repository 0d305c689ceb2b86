#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <numbers>
#include <vector>

#include "evobayes/mesh.hpp"

namespace evobayes::fem {

/// Optical and mechanical background properties (cm, s).
struct OpticalProps {
  double mu_a = 0.1;         // absorption, 1/cm
  double mu_s_prime = 8.0;   // reduced scattering, 1/cm
  double D_B = 1e-9;         // particle diffusion, cm^2/s
  double k0 = 2.0 * std::numbers::pi / 632.8e-7;  // HeNe light wavenumber, 1/cm

  double kappa() const { return 1.0 / (3.0 * (mu_a + mu_s_prime)); }
  /// B(theta) = 2 mu_s' k0^2 D_B theta, the thermal Brownian decorrelation term.
  double brownian(double theta) const { return 2.0 * mu_s_prime * k0 * k0 * D_B * theta; }
  void validate() const;
};

struct UltrasoundConfig {
  double omega_a = 2.0 * std::numbers::pi * 1e6;  // rad/s
  double c_elasto = 1.0;
  std::vector<double> theta_samples{1.25e-7, 2.5e-7, 3.75e-7, 5e-7};

  /// A(theta) = c sin^2(omega_a theta / 2).
  double modulation(double theta) const;
  void validate() const;
};

/// Nodal field p restricted to the insonified region.
struct ParameterField {
  std::vector<int> nodes;      // IR-local index -> global node index
  std::vector<double> values;  // cm^2

  static ParameterField constant(const Mesh& mesh, double value);
  std::size_t size() const { return values.size(); }
  /// Full nodal vector, zero outside the IR.
  Eigen::VectorXd expand(std::size_t num_nodes) const;
};

struct PointSource {
  int node = 0;
  double strength = 1.0;
};

struct SparseSystem {
  Eigen::SparseMatrix<double> K;
  Eigen::VectorXd q;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Edges (node pairs) that belong to exactly one triangle.
std::vector<std::array<int, 2>> boundary_edges(const Mesh& mesh);

/// Stiffness with diffusion coefficient `kappa` plus the lumped Robin boundary
/// mass (the weak form of G + kappa dG/dn = 0 contributes the unit boundary mass).
SparseMatrix diffusion_operator(const Mesh& mesh, double kappa);
/// Consistent P1 mass matrix.
SparseMatrix mass_matrix(const Mesh& mesh);
/// Mass matrix weighted by a P1 nodal coefficient: int c_h phi_i phi_j.
SparseMatrix weighted_mass(const Mesh& mesh, const Eigen::VectorXd& nodal_coefficient);

/// K(p) for -div(kappa grad) + (mu_a + B + A I_IR p) with the Robin term; q is the
/// point-source load. Throws AssemblyError for non-finite p or a non-positive
/// reaction coefficient.
SparseSystem assemble(const Mesh& mesh, const OpticalProps& props, const UltrasoundConfig& us,
                      const ParameterField& p, double theta, const PointSource& source);

/// Sparse Cholesky factorization with a residual-checked solve.
class FactorizedSystem {
 public:
  explicit FactorizedSystem(SparseMatrix K);
  /// Throws SolveError if the relative residual exceeds `tolerance`.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double tolerance = 1e-10) const;
  const SparseMatrix& matrix() const { return K_; }

 private:
  SparseMatrix K_;
  Eigen::SimplicialLLT<SparseMatrix> llt_;
};

double relative_residual(const SparseMatrix& K, const Eigen::VectorXd& x, const Eigen::VectorXd& b);

/// Background correlation field G = K(0)^-1 q at delay `theta`.
Eigen::VectorXd solve_background(const Mesh& mesh, const OpticalProps& props,
                                 const UltrasoundConfig& us, double theta,
                                 const PointSource& source);

/// Perturbation field G^delta for a given background G. The linearized mode
/// drops A I_IR p from the left-hand side.
Eigen::VectorXd solve_perturbation(const Mesh& mesh, const OpticalProps& props,
                                   const UltrasoundConfig& us, const ParameterField& p,
                                   double theta, const Eigen::VectorXd& background,
                                   bool linearized);

}  // namespace evobayes::fem
