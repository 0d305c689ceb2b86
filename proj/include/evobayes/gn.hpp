#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evobayes/errors.hpp"
#include "evobayes/forward_model.hpp"
#include "evobayes/result.hpp"

namespace evobayes::gn {

enum class JacobianMode { finite_difference, adjoint };
enum class BetaInit { max_diag, fixed };
enum class Exec { serial, parallel };

struct GnConfig {
  BetaInit beta_init = BetaInit::max_diag;
  double beta_fixed = 1.0;
  double beta_decay = 2.0;
  /// Stop when 100 |chi_{k+1} - chi_k| / chi_k falls below this (percent).
  double stop_threshold = 0.1;
  int max_iters = 50;
  /// Abort after this many consecutive increases of chi.
  int max_increases = 5;
  JacobianMode jacobian_mode = JacobianMode::finite_difference;
  Exec exec = Exec::parallel;

  void validate() const;
};

/// Thrown when chi increases for GnConfig::max_increases iterations in a row.
class GnDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Forward-difference Jacobian, h_i = 1e-6 max(|p_i|, 1). Columns are independent
/// and computed in parallel in the parallel variant.
Eigen::MatrixXd jacobian(const ForwardModel& model, const Eigen::VectorXd& p,
                         Exec exec = Exec::parallel);

/// Solves (J^T J + beta I) delta = J^T residual and returns p - delta, with
/// residual = F(p) - M.
Eigen::VectorXd gn_step(const Eigen::VectorXd& p, const Eigen::MatrixXd& J,
                        const Eigen::VectorXd& residual, double beta);

struct GnRecord {
  int k = 0;
  double chi = 0.0;        // misfit at p_k, before the step
  double beta = 0.0;       // regularization used for the step from p_k
  double chi_next = 0.0;   // misfit at p_{k+1}
  double step_norm = 0.0;
  bool decreased = false;  // chi_next < chi, so beta is halved for the next step
};

struct GnResult {
  ReconstructionResult result;
  std::vector<GnRecord> log;
  double beta_initial = 0.0;
};

/// Regularized Gauss-Newton from `start`. Every step is taken; beta is divided by
/// beta_decay after each step that lowers chi.
GnResult run_gn(const ForwardModel& model, const Eigen::VectorXd& data,
                const Eigen::VectorXd& start, const GnConfig& config);

}  // namespace evobayes::gn
