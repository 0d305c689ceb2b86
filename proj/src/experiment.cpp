#include "evobayes/experiment.hpp"

#include <cmath>

#include "evobayes/errors.hpp"

namespace evobayes::umot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

stochastic::SolverConfig default_solver() {
  stochastic::SolverConfig s;
  s.init_spread = 0.3;
  s.ksg_normalization = 0.25;
  return s;
}

void ExperimentConfig::validate() const {
  if (!(mesh.data_refine >= 1)) throw ConfigError("mesh data_refine must be at least 1");
  optics.validate();
  ultrasound.validate();
  geometry.validate();
  if (!(phantom.background > 0)) throw ConfigError("phantom background must be positive");
  phantom.validate(fem::IrSpec{mesh.ir_center, mesh.ir_radius, mesh.ir_h});
  if (!(noise >= 0)) throw ConfigError("noise must be nonnegative");
  if (!(prior.correlation_length >= 0)) throw ConfigError("prior correlation length must be nonnegative");
  solver_config().validate();
  gn.validate();
}

stochastic::SolverConfig ExperimentConfig::solver_config() const {
  stochastic::SolverConfig s = solver;
  if (alpha_1 >= 0) {
    s.alpha_1 = alpha_1;
  } else if (s.scheme == stochastic::Scheme::ksg) {
    s.alpha_1 = 2.0;
  } else {
    s.alpha_1 = phantom.kind == scenario::PhantomKind::central ? 5.0 : 3.0;
  }
  return s;
}

namespace {

fem::MeshOptions options(const ExperimentConfig& cfg, double refine) {
  fem::MeshOptions o;
  o.radius = cfg.mesh.radius;
  o.target_h = cfg.mesh.target_h / refine;
  o.ir = fem::IrSpec{cfg.mesh.ir_center, cfg.mesh.ir_radius, cfg.mesh.ir_h / refine};
  o.boundary_multiple = cfg.geometry.required_boundary_multiple();
  o.grading = cfg.mesh.grading;
  return o;
}

}  // namespace

fem::Mesh reconstruction_mesh(const ExperimentConfig& cfg) { return fem::build_disk_mesh(options(cfg, 1.0)); }

fem::Mesh data_mesh(const ExperimentConfig& cfg) {
  return fem::build_disk_mesh(options(cfg, cfg.mesh.data_refine));
}

MeasurementSet simulate(const ExperimentConfig& cfg, const fem::Mesh& fine_mesh,
                        scenario::DataStatus* status) {
  return scenario::generate_data(cfg.phantom, fine_mesh, cfg.optics, cfg.ultrasound, cfg.geometry,
                                 cfg.noise, cfg.data_seed, status);
}

Problem::Problem(const ExperimentConfig& cfg, const fem::Mesh& mesh, const MeasurementSet& data) {
  scenario::check_geometry(data, cfg.geometry, mesh.radius);
  forward_ = std::make_unique<fem::UmotForward>(mesh, cfg.optics, cfg.ultrasound, cfg.geometry,
                                                cfg.linearized);
  p_scale_ = cfg.phantom.background;
  double ss = 0.0;
  for (double v : data.values) ss += v * v;
  m_scale_ = std::sqrt(ss / static_cast<double>(data.size()));
  if (!(m_scale_ > 0)) m_scale_ = 1.0;
  scaled_ = std::make_unique<ScaledForward>(*forward_, p_scale_, m_scale_);
  data_ = VectorXd::Map(data.values.data(), static_cast<Eigen::Index>(data.size())) / m_scale_;
}

std::vector<fem::Point> Problem::ir_points() const {
  std::vector<fem::Point> pts;
  for (int n : forward_->ir_nodes()) pts.push_back(mesh().nodes[static_cast<std::size_t>(n)]);
  return pts;
}

VectorXd Problem::truth(const scenario::Phantom& phantom) const {
  const auto f = scenario::rasterize_phantom(phantom, mesh());
  return VectorXd::Map(f.values.data(), static_cast<Eigen::Index>(f.size())) / p_scale_;
}

fem::ParameterField Problem::physical(const VectorXd& p) const {
  fem::ParameterField f;
  f.nodes = forward_->ir_nodes();
  f.values.resize(f.nodes.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    f.values[i] = std::max(0.0, p[static_cast<Eigen::Index>(i)] * p_scale_);
  }
  return f;
}

MatrixXd Problem::prior_factor(const PriorSpec& prior) const {
  if (prior.correlation_length == 0.0) return MatrixXd();
  const auto pts = ir_points();
  const auto n = static_cast<Eigen::Index>(pts.size());
  MatrixXd C(n, n);
  const double l2 = prior.correlation_length * prior.correlation_length;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      const double d = fem::distance(pts[a], pts[b]);
      C(a, b) = std::exp(-0.5 * d * d / l2);
    }
  }
  C.diagonal().array() += 1e-8;  // keeps the factorization defined for near-duplicate rows
  Eigen::LLT<MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) throw NumericalError("prior correlation matrix is not positive definite");
  return llt.matrixL();
}

ReconstructionResult reconstruct_stochastic(const Problem& problem, const ExperimentConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(problem.model().num_params());
  return stochastic::run(problem.model(), problem.data(), cfg.solver_config(),
                         VectorXd::Constant(n, cfg.prior.mean), problem.prior_factor(cfg.prior));
}

gn::GnResult reconstruct_gn(const Problem& problem, const ExperimentConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(problem.model().num_params());
  return gn::run_gn(problem.model(), problem.data(), VectorXd::Constant(n, cfg.prior.mean), cfg.gn);
}

}  // namespace evobayes::umot
