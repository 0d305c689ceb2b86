#pragma once

// Manufactured-solution study shared by the unit and acceptance tests.
#include <cmath>
#include <vector>

#include "evobayes/fem.hpp"

namespace evobayes::testing {

struct MmsStudy {
  std::vector<double> h;
  std::vector<double> l2_error;
  double max_residual = 0.0;
  double slope = 0.0;  // least-squares slope of log(error) vs log(h)
};

inline fem::Mesh mms_disk(double h) {
  fem::MeshOptions o;
  o.radius = 1.0;
  o.target_h = h;
  o.ir = fem::IrSpec{{0.0, 0.0}, 0.3, 0.0};
  return fem::build_disk_mesh(o);
}

// u = sin(x) e^y is harmonic, so -div(kappa grad u) + mu u = mu u, and the Robin
// datum is g = u + kappa du/dn on the unit circle.
inline MmsStudy mms_study(const std::vector<double>& hs = {0.2, 0.1, 0.05, 0.025}) {
  using namespace evobayes::fem;
  const double kappa = 0.3;
  const double mu = 1.5;
  auto u = [](double x, double y) { return std::sin(x) * std::exp(y); };
  auto dudn = [](double x, double y) {
    return (std::cos(x) * std::exp(y) * x + std::sin(x) * std::exp(y) * y) / std::hypot(x, y);
  };
  MmsStudy s;
  s.h = hs;
  for (double h : hs) {
    const Mesh m = mms_disk(h);
    const SparseMatrix K = diffusion_operator(m, kappa) + mu * mass_matrix(m);
    const auto n = static_cast<Eigen::Index>(m.num_nodes());
    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i) f[i] = mu * u(m.nodes[i].x, m.nodes[i].y);
    Eigen::VectorXd b = mass_matrix(m) * f;
    for (const auto& e : boundary_edges(m)) {
      const Point a = m.nodes[e[0]], c = m.nodes[e[1]];
      const double len = distance(a, c);
      b[e[0]] += 0.5 * len * (u(a.x, a.y) + kappa * dudn(a.x, a.y));
      b[e[1]] += 0.5 * len * (u(c.x, c.y) + kappa * dudn(c.x, c.y));
    }
    const Eigen::VectorXd x = FactorizedSystem(K).solve(b);
    s.max_residual = std::max(s.max_residual, relative_residual(K, x, b));
    // edge-midpoint rule, exact for quadratics
    double e2 = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
      const auto& tri = m.triangles[t];
      const double area = m.signed_area(t);
      for (int k = 0; k < 3; ++k) {
        const int i = tri[k], j = tri[(k + 1) % 3];
        const double xm = 0.5 * (m.nodes[i].x + m.nodes[j].x);
        const double ym = 0.5 * (m.nodes[i].y + m.nodes[j].y);
        const double d = 0.5 * (x[i] + x[j]) - u(xm, ym);
        e2 += area / 3.0 * d * d;
      }
    }
    s.l2_error.push_back(std::sqrt(e2));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double nn = static_cast<double>(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double lx = std::log(hs[i]), ly = std::log(s.l2_error[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  s.slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  return s;
}

}  // namespace evobayes::testing
