#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evobayes/fem.hpp"
#include "evobayes/forward.hpp"
#include "evobayes/gn.hpp"
#include "evobayes/measurement.hpp"
#include "evobayes/scenario.hpp"
#include "evobayes/stochastic.hpp"

namespace evobayes::umot {

struct MeshSpec {
  double radius = 4.0;
  double target_h = 0.5;
  fem::Point ir_center{};
  double ir_radius = 0.1;
  double ir_h = 0.025;
  double grading = 0.3;
  /// The data mesh divides both element sizes by this factor.
  double data_refine = 2.0;
};

/// Initial ensemble in background-relative units: mean `mean`, per-node std
/// SolverConfig::init_spread, Gaussian correlation over `correlation_length` cm
/// (0: independent nodes).
struct PriorSpec {
  double mean = 1.0;
  double correlation_length = 0.06;
};

/// Solver defaults for this problem: init_spread 0.3 and KSG measurement
/// normalization 0.25; everything else as in SolverConfig.
stochastic::SolverConfig default_solver();

struct ExperimentConfig {
  MeshSpec mesh;
  fem::OpticalProps optics;
  fem::UltrasoundConfig ultrasound;
  DetectorGeometry geometry;
  scenario::Phantom phantom = scenario::Phantom::side();
  double noise = 0.01;
  std::uint64_t data_seed = 1;
  /// Reconstruction forward model: linearized sensitivity (true) or full solves.
  bool linearized = true;
  stochastic::SolverConfig solver = default_solver();
  /// Negative: per scheme and phantom (KSG 2; LSG 3 side, 5 central).
  double alpha_1 = -1.0;
  PriorSpec prior;
  gn::GnConfig gn;

  void validate() const;
  /// Solver settings with the scheme-dependent alpha resolved.
  stochastic::SolverConfig solver_config() const;
};

fem::Mesh reconstruction_mesh(const ExperimentConfig& cfg);
fem::Mesh data_mesh(const ExperimentConfig& cfg);

MeasurementSet simulate(const ExperimentConfig& cfg, const fem::Mesh& fine_mesh,
                        scenario::DataStatus* status = nullptr);

/// Forward model and data in solver units: p~ = p / p_background and
/// measurements divided by their RMS.
class Problem {
 public:
  Problem(const ExperimentConfig& cfg, const fem::Mesh& mesh, const MeasurementSet& data);

  const fem::UmotForward& forward() const { return *forward_; }
  const ForwardModel& model() const { return *scaled_; }
  const Eigen::VectorXd& data() const { return data_; }
  double parameter_scale() const { return p_scale_; }
  double measurement_scale() const { return m_scale_; }
  const fem::Mesh& mesh() const { return forward_->mesh(); }
  std::vector<fem::Point> ir_points() const;

  /// Solver-unit truth for `phantom` on this mesh.
  Eigen::VectorXd truth(const scenario::Phantom& phantom) const;
  /// Physical field (cm^2), clamped at zero.
  fem::ParameterField physical(const Eigen::VectorXd& p_tilde) const;
  /// Cholesky factor of the prior correlation (empty for independent nodes).
  Eigen::MatrixXd prior_factor(const PriorSpec& prior) const;

 private:
  std::unique_ptr<fem::UmotForward> forward_;
  std::unique_ptr<ScaledForward> scaled_;
  Eigen::VectorXd data_;
  double p_scale_ = 1.0;
  double m_scale_ = 1.0;
};

ReconstructionResult reconstruct_stochastic(const Problem& problem, const ExperimentConfig& cfg);
gn::GnResult reconstruct_gn(const Problem& problem, const ExperimentConfig& cfg);

}  // namespace evobayes::umot
