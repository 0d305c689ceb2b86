#pragma once

#include <complex>
#include <vector>

#include "evobayes/fem.hpp"
#include "evobayes/forward_model.hpp"
#include "evobayes/measurement.hpp"

namespace evobayes::fem {

/// Complex weights w_i e^{-j omega theta_i} of the trapezoid rule for the Fourier
/// integral over the delay samples, with a zero-valued left endpoint at theta = 0
/// and the upper limit truncated at the last sample.
std::vector<std::complex<double>> fourier_weights(const UltrasoundConfig& us);

struct ViewPlacement {
  int source_node = -1;
  std::vector<int> detector_nodes;
};

/// Boundary nodes for every source and detector. Throws GeometryError when an
/// angle does not fall on a boundary node.
std::vector<ViewPlacement> place(const Mesh& mesh, const DetectorGeometry& geometry);

/// Reference path: explicit background and perturbation solves per view and delay.
MeasurementSet measurement_operator(const Mesh& mesh, const OpticalProps& props,
                                    const UltrasoundConfig& us, const ParameterField& p,
                                    const DetectorGeometry& geometry, bool linearized);

/// Cached UMOT forward map from IR nodal p (cm^2) to detector moduli.
///
/// Background fields are factorized once. In linearized mode a complex
/// sensitivity matrix L is precomputed by adjoint solves, so F(p) = |L p|.
/// In nonlinear mode K(p) is refactorized per delay on every evaluation.
class UmotForward final : public ForwardModel {
 public:
  UmotForward(Mesh mesh, OpticalProps props, UltrasoundConfig us, DetectorGeometry geometry,
              bool linearized);

  std::size_t num_params() const override { return ir_.size(); }
  std::size_t num_measurements() const override { return geometry_.num_measurements(); }
  void evaluate(std::span<const double> p, std::span<double> out) const override;

  bool linearized() const { return linearized_; }
  const Mesh& mesh() const { return mesh_; }
  const std::vector<int>& ir_nodes() const { return ir_; }
  const DetectorGeometry& geometry() const { return geometry_; }
  /// Only populated in linearized mode.
  const Eigen::MatrixXcd& sensitivity() const { return L_; }

 private:
  void build_sensitivity();

  Mesh mesh_;
  OpticalProps props_;
  UltrasoundConfig us_;
  DetectorGeometry geometry_;
  bool linearized_;
  std::vector<int> ir_;
  std::vector<ViewPlacement> placement_;
  std::vector<std::complex<double>> weights_;
  std::vector<double> modulation_;
  std::vector<SparseMatrix> K0_;                // per delay
  std::vector<Eigen::MatrixXd> background_;     // per delay: n_nodes x views
  Eigen::MatrixXcd L_;
};

}  // namespace evobayes::fem
