#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace evobayes {

struct IterationRecord {
  int k = 0;
  double chi_mean = 0.0;  // misfit of the ensemble mean (the reported estimate)
  double chi_min = 0.0;   // best particle misfit this iteration
  double alpha = 0.0;
  double accept_frac = 1.0;
  double spread = 0.0;     // RMS particle deviation from the mean
  double gain_norm = 0.0;  // RMS size of the gain correction
};

/// Common output of the stochastic and Gauss-Newton solvers. Parameters are in
/// the units the solver was run in.
struct ReconstructionResult {
  Eigen::VectorXd estimate;
  std::vector<IterationRecord> history;
  std::vector<Eigen::VectorXd> mean_history;
  /// Per iteration, per particle: whether the update was accepted.
  std::vector<std::vector<bool>> accepted;
  /// Per particle: misfit of each accepted state, starting with the initial one.
  std::vector<std::vector<double>> accepted_chi;
  std::string stop_reason;
  int iterations() const { return static_cast<int>(history.size()); }
};

}  // namespace evobayes
