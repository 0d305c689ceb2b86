#include "evobayes/fem.hpp"

#include <cmath>
#include <map>

#include "evobayes/errors.hpp"

namespace evobayes::fem {

using Triplets = std::vector<Eigen::Triplet<double>>;

void OpticalProps::validate() const {
  if (!(mu_a > 0 && mu_s_prime > 0 && D_B > 0 && k0 > 0)) {
    throw ConfigError("optical properties must be strictly positive");
  }
}

double UltrasoundConfig::modulation(double theta) const {
  const double s = std::sin(0.5 * omega_a * theta);
  return c_elasto * s * s;
}

void UltrasoundConfig::validate() const {
  if (!(omega_a > 0)) throw ConfigError("omega_a must be positive");
  if (!(c_elasto >= 0)) throw ConfigError("c_elasto must be nonnegative");
  if (theta_samples.empty()) throw ConfigError("theta_samples is empty");
  for (std::size_t i = 0; i < theta_samples.size(); ++i) {
    if (!(theta_samples[i] >= 0)) throw ConfigError("theta_samples must be nonnegative");
    if (i > 0 && !(theta_samples[i] > theta_samples[i - 1])) {
      throw ConfigError("theta_samples must be strictly increasing");
    }
  }
}

ParameterField ParameterField::constant(const Mesh& mesh, double value) {
  ParameterField f;
  f.nodes = mesh.ir_nodes();
  f.values.assign(f.nodes.size(), value);
  return f;
}

Eigen::VectorXd ParameterField::expand(std::size_t num_nodes) const {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_nodes));
  for (std::size_t i = 0; i < nodes.size(); ++i) full[nodes[i]] = values[i];
  return full;
}

std::vector<std::array<int, 2>> boundary_edges(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  }
  std::vector<std::array<int, 2>> edges;
  for (const auto& [key, n] : count) {
    if (n == 1) edges.push_back({key.first, key.second});
  }
  return edges;
}

namespace {

SparseMatrix from_triplets(std::size_t n, const Triplets& trips) {
  SparseMatrix K(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  K.setFromTriplets(trips.begin(), trips.end());
  K.makeCompressed();
  return K;
}

// Integral of phi_l phi_i phi_j over a triangle, divided by its area.
double triple(int l, int i, int j) {
  if (l == i && i == j) return 1.0 / 10.0;
  if (l == i || i == j || l == j) return 1.0 / 30.0;
  return 1.0 / 60.0;
}

}  // namespace

SparseMatrix diffusion_operator(const Mesh& mesh, double kappa) {
  Triplets trips;
  trips.reserve(9 * mesh.num_triangles() + 4 * mesh.boundary.size());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.signed_area(t);
    double b[3], c[3];
    for (int i = 0; i < 3; ++i) {
      const Point pj = mesh.nodes[tri[(i + 1) % 3]];
      const Point pk = mesh.nodes[tri[(i + 2) % 3]];
      b[i] = pj.y - pk.y;
      c[i] = pk.x - pj.x;
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trips.emplace_back(tri[i], tri[j], kappa * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
      }
    }
  }
  // Row-summed (lumped) boundary mass: with kappa ~ 0.04 cm the consistent L/6
  // coupling would outweigh the stiffness and break the discrete maximum principle.
  for (const auto& e : boundary_edges(mesh)) {
    const double len = distance(mesh.nodes[e[0]], mesh.nodes[e[1]]);
    trips.emplace_back(e[0], e[0], len / 2.0);
    trips.emplace_back(e[1], e[1], len / 2.0);
  }
  return from_triplets(mesh.num_nodes(), trips);
}

SparseMatrix mass_matrix(const Mesh& mesh) {
  Triplets trips;
  trips.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.signed_area(t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trips.emplace_back(tri[i], tri[j], area * (i == j ? 1.0 / 6.0 : 1.0 / 12.0));
      }
    }
  }
  return from_triplets(mesh.num_nodes(), trips);
}

SparseMatrix weighted_mass(const Mesh& mesh, const Eigen::VectorXd& coeff) {
  Triplets trips;
  trips.reserve(9 * mesh.num_triangles());
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double cl[3] = {coeff[tri[0]], coeff[tri[1]], coeff[tri[2]]};
    if (cl[0] == 0.0 && cl[1] == 0.0 && cl[2] == 0.0) continue;
    const double area = mesh.signed_area(t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double v = 0.0;
        for (int l = 0; l < 3; ++l) v += cl[l] * triple(l, i, j);
        trips.emplace_back(tri[i], tri[j], area * v);
      }
    }
  }
  return from_triplets(mesh.num_nodes(), trips);
}

SparseSystem assemble(const Mesh& mesh, const OpticalProps& props, const UltrasoundConfig& us,
                      const ParameterField& p, double theta, const PointSource& source) {
  for (double v : p.values) {
    if (!std::isfinite(v)) throw AssemblyError("non-finite parameter value");
  }
  if (p.nodes.size() != p.values.size()) throw AssemblyError("parameter field index map mismatch");
  if (source.node < 0 || static_cast<std::size_t>(source.node) >= mesh.num_nodes()) {
    throw AssemblyError("source node out of range");
  }
  const double base = props.mu_a + props.brownian(theta);
  const double a = us.modulation(theta);
  // Negative p is allowed as long as the total reaction stays positive, since the
  // stochastic search explores unconstrained parameters.
  for (double v : p.values) {
    if (base + a * v <= 0.0) throw AssemblyError("reaction coefficient is not positive");
  }
  SparseSystem sys;
  sys.K = diffusion_operator(mesh, props.kappa()) + base * mass_matrix(mesh);
  if (a != 0.0) sys.K += a * weighted_mass(mesh, p.expand(mesh.num_nodes()));
  sys.q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_nodes()));
  sys.q[source.node] = source.strength;
  return sys;
}

double relative_residual(const SparseMatrix& K, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const double nb = b.norm();
  const double r = (K * x - b).norm();
  return nb > 0 ? r / nb : r;
}

FactorizedSystem::FactorizedSystem(SparseMatrix K) : K_(std::move(K)) {
  llt_.compute(K_);
  if (llt_.info() != Eigen::Success) {
    throw AssemblyError("system matrix is not positive definite");
  }
}

Eigen::VectorXd FactorizedSystem::solve(const Eigen::VectorXd& rhs, double tolerance) const {
  Eigen::VectorXd x = llt_.solve(rhs);
  double res = relative_residual(K_, x, rhs);
  if (res > tolerance) {
    // one step of iterative refinement before giving up
    x += llt_.solve(rhs - K_ * x);
    res = relative_residual(K_, x, rhs);
  }
  if (!(res <= tolerance)) throw SolveError("forward solve residual too large", res);
  return x;
}

Eigen::VectorXd solve_background(const Mesh& mesh, const OpticalProps& props,
                                 const UltrasoundConfig& us, double theta,
                                 const PointSource& source) {
  const auto sys = assemble(mesh, props, us, ParameterField::constant(mesh, 0.0), theta, source);
  return FactorizedSystem(sys.K).solve(sys.q);
}

Eigen::VectorXd solve_perturbation(const Mesh& mesh, const OpticalProps& props,
                                   const UltrasoundConfig& us, const ParameterField& p,
                                   double theta, const Eigen::VectorXd& background,
                                   bool linearized) {
  const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
  if (background.size() != n) throw AssemblyError("background field has wrong length");
  const double a = us.modulation(theta);
  const Eigen::VectorXd pn = p.expand(mesh.num_nodes());
  if (a == 0.0 || pn.isZero(0.0)) return Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd rhs = -a * (weighted_mass(mesh, pn) * background);
  const PointSource dummy{mesh.boundary.empty() ? 0 : mesh.boundary.front(), 0.0};
  const auto sys = linearized
                       ? assemble(mesh, props, us, ParameterField::constant(mesh, 0.0), theta, dummy)
                       : assemble(mesh, props, us, p, theta, dummy);
  return FactorizedSystem(sys.K).solve(rhs);
}

}  // namespace evobayes::fem
