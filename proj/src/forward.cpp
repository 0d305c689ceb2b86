#include "evobayes/forward.hpp"

#include <cmath>

#include "evobayes/errors.hpp"

namespace evobayes {

void LinearForward::evaluate(std::span<const double> p, std::span<double> out) const {
  Eigen::Map<const Eigen::VectorXd> x(p.data(), static_cast<Eigen::Index>(p.size()));
  Eigen::Map<Eigen::VectorXd> y(out.data(), static_cast<Eigen::Index>(out.size()));
  y.noalias() = A_ * x;
}

void ScaledForward::evaluate(std::span<const double> p, std::span<double> out) const {
  std::vector<double> phys(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) phys[i] = p[i] * ps_;
  base_.evaluate(phys, out);
  for (double& v : out) v /= ms_;
}

}  // namespace evobayes

namespace evobayes::fem {

std::vector<std::complex<double>> fourier_weights(const UltrasoundConfig& us) {
  us.validate();
  std::vector<double> t;
  t.push_back(0.0);
  for (double s : us.theta_samples) {
    if (s > 0.0) t.push_back(s);
  }
  const std::size_t n = t.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double half = 0.5 * (t[i + 1] - t[i]);
    w[i] += half;
    w[i + 1] += half;
  }
  // back to the caller's sample list (a sample at theta = 0 keeps its weight)
  std::vector<std::complex<double>> out;
  out.reserve(us.theta_samples.size());
  for (double s : us.theta_samples) {
    std::size_t i = 0;
    while (t[i] != s) ++i;
    out.push_back(w[i] * std::polar(1.0, -us.omega_a * s));
  }
  return out;
}

std::vector<ViewPlacement> place(const Mesh& mesh, const DetectorGeometry& geometry) {
  geometry.validate();
  std::vector<ViewPlacement> out(static_cast<std::size_t>(geometry.views));
  for (int v = 0; v < geometry.views; ++v) {
    auto& vp = out[v];
    vp.source_node = mesh.boundary_node_at(geometry.source_angle(v));
    if (vp.source_node < 0) {
      throw GeometryError("no boundary node at source angle " +
                          std::to_string(geometry.source_angle(v)));
    }
    for (int d = 0; d < geometry.detectors; ++d) {
      const int node = mesh.boundary_node_at(geometry.detector_angle(v, d));
      if (node < 0) {
        throw GeometryError("no boundary node at detector angle " +
                            std::to_string(geometry.detector_angle(v, d)));
      }
      vp.detector_nodes.push_back(node);
    }
  }
  return out;
}

MeasurementSet measurement_operator(const Mesh& mesh, const OpticalProps& props,
                                    const UltrasoundConfig& us, const ParameterField& p,
                                    const DetectorGeometry& geometry, bool linearized) {
  const auto placement = place(mesh, geometry);
  const auto w = fourier_weights(us);
  MeasurementSet m = MeasurementSet::layout(geometry, mesh.radius);
  m.mesh_hash = mesh.hash();
  std::size_t row = 0;
  for (const auto& vp : placement) {
    std::vector<std::complex<double>> acc(vp.detector_nodes.size());
    for (std::size_t i = 0; i < us.theta_samples.size(); ++i) {
      const double theta = us.theta_samples[i];
      const auto G = solve_background(mesh, props, us, theta, PointSource{vp.source_node, 1.0});
      const auto Gd = solve_perturbation(mesh, props, us, p, theta, G, linearized);
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += w[i] * Gd[vp.detector_nodes[d]];
    }
    for (const auto& a : acc) m.values[row++] = std::abs(a);
  }
  return m;
}

UmotForward::UmotForward(Mesh mesh, OpticalProps props, UltrasoundConfig us,
                         DetectorGeometry geometry, bool linearized)
    : mesh_(std::move(mesh)),
      props_(props),
      us_(std::move(us)),
      geometry_(geometry),
      linearized_(linearized) {
  props_.validate();
  us_.validate();
  ir_ = mesh_.ir_nodes();
  placement_ = place(mesh_, geometry_);
  weights_ = fourier_weights(us_);
  const auto n = static_cast<Eigen::Index>(mesh_.num_nodes());
  const ParameterField zero = ParameterField::constant(mesh_, 0.0);
  for (double theta : us_.theta_samples) {
    modulation_.push_back(us_.modulation(theta));
    auto sys = assemble(mesh_, props_, us_, zero, theta, PointSource{placement_[0].source_node, 1.0});
    FactorizedSystem fs(sys.K);
    Eigen::MatrixXd G(n, geometry_.views);
    for (int v = 0; v < geometry_.views; ++v) {
      Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
      q[placement_[v].source_node] = 1.0;
      G.col(v) = fs.solve(q);
    }
    K0_.push_back(std::move(sys.K));
    background_.push_back(std::move(G));
  }
  if (linearized_) build_sensitivity();
}

void UmotForward::build_sensitivity() {
  const auto n = static_cast<Eigen::Index>(mesh_.num_nodes());
  const auto np = static_cast<Eigen::Index>(ir_.size());
  std::vector<int> local(mesh_.num_nodes(), -1);
  for (std::size_t k = 0; k < ir_.size(); ++k) local[ir_[k]] = static_cast<int>(k);

  L_ = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(num_measurements()), np);
  for (std::size_t i = 0; i < us_.theta_samples.size(); ++i) {
    if (modulation_[i] == 0.0) continue;
    FactorizedSystem fs(K0_[i]);
    const std::complex<double> coef = -modulation_[i] * weights_[i];
    for (int v = 0; v < geometry_.views; ++v) {
      // T(:, k) = M_{phi_k} G_v, the mass matrix weighted by the k-th IR hat function
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, np);
      const auto& G = background_[i].col(v);
      for (std::size_t t = 0; t < mesh_.num_triangles(); ++t) {
        const auto& tri = mesh_.triangles[t];
        const double area = mesh_.signed_area(t);
        for (int l = 0; l < 3; ++l) {
          const int k = local[tri[l]];
          if (k < 0) continue;
          for (int a = 0; a < 3; ++a) {
            double s = 0.0;
            for (int b = 0; b < 3; ++b) {
              const double c = (l == a && a == b) ? 1.0 / 10.0
                               : (l == a || a == b || l == b) ? 1.0 / 30.0
                                                              : 1.0 / 60.0;
              s += c * G[tri[b]];
            }
            T(tri[a], k) += area * s;
          }
        }
      }
      // adjoint fields: K symmetric, so G^delta_d = psi_d^T (-A M_p G)
      const auto& dets = placement_[v].detector_nodes;
      Eigen::MatrixXd E = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(dets.size()));
      for (std::size_t d = 0; d < dets.size(); ++d) E(dets[d], static_cast<Eigen::Index>(d)) = 1.0;
      Eigen::MatrixXd Psi(n, E.cols());
      for (Eigen::Index d = 0; d < E.cols(); ++d) Psi.col(d) = fs.solve(E.col(d));
      const Eigen::MatrixXd block = Psi.transpose() * T;
      L_.middleRows(static_cast<Eigen::Index>(v) * geometry_.detectors, geometry_.detectors) +=
          coef * block.cast<std::complex<double>>();
    }
  }
}

void UmotForward::evaluate(std::span<const double> p, std::span<double> out) const {
  if (p.size() != num_params() || out.size() != num_measurements()) {
    throw std::invalid_argument("UmotForward::evaluate: dimension mismatch");
  }
  if (linearized_) {
    Eigen::Map<const Eigen::VectorXd> x(p.data(), static_cast<Eigen::Index>(p.size()));
    const Eigen::VectorXcd y = L_ * x.cast<std::complex<double>>();
    for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = std::abs(y[i]);
    return;
  }
  ParameterField field;
  field.nodes = ir_;
  field.values.assign(p.begin(), p.end());
  const Eigen::VectorXd pn = field.expand(mesh_.num_nodes());
  const SparseMatrix Mp = weighted_mass(mesh_, pn);
  const double base_check = props_.mu_a;
  std::vector<std::complex<double>> acc(num_measurements());
  for (std::size_t i = 0; i < us_.theta_samples.size(); ++i) {
    const double a = modulation_[i];
    if (a == 0.0) continue;
    const double base = base_check + props_.brownian(us_.theta_samples[i]);
    for (double v : p) {
      if (!std::isfinite(v) || base + a * v <= 0.0) {
        throw AssemblyError("reaction coefficient is not positive");
      }
    }
    FactorizedSystem fs(K0_[i] + a * Mp);
    for (int v = 0; v < geometry_.views; ++v) {
      const Eigen::VectorXd rhs = -a * (Mp * background_[i].col(v));
      const Eigen::VectorXd Gd = fs.solve(rhs);
      const auto& dets = placement_[v].detector_nodes;
      for (std::size_t d = 0; d < dets.size(); ++d) {
        acc[static_cast<std::size_t>(v) * dets.size() + d] += weights_[i] * Gd[dets[d]];
      }
    }
  }
  for (std::size_t r = 0; r < acc.size(); ++r) out[r] = std::abs(acc[r]);
}

}  // namespace evobayes::fem
