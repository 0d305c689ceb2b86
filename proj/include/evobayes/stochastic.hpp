#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evobayes/forward_model.hpp"
#include "evobayes/result.hpp"
#include "evobayes/rng.hpp"

namespace evobayes::stochastic {

enum class Scheme { ksg, lsg };
enum class Characterization { plain, augmented_sum, augmented_componentwise };
enum class PseudoForm { sde, algebraic };
/// Kernel variant: serial reference or OpenMP over particles. Both give
/// bit-identical results.
enum class Exec { serial, parallel };

Scheme parse_scheme(const std::string& s);
Characterization parse_characterization(const std::string& s);
std::string to_string(Scheme s);
std::string to_string(Characterization c);

struct SolverConfig {
  Scheme scheme = Scheme::ksg;
  Characterization characterization = Characterization::plain;
  int n_E = 100;
  double delta_tau = 1.0;
  double sigma_B = 0.02;
  /// Negative: 1% of the median absolute datum.
  double sigma_eta = -1.0;
  double alpha_1 = 2.0;
  bool rejection = false;
  int max_iters = 200;
  int plateau_window = 10;
  double plateau_rel = 1e-3;
  /// Std of the initial ensemble around the starting point.
  double init_spread = 0.5;
  std::uint64_t seed = 1;
  /// KSG only: when positive, measurements are divided internally by s with
  /// s^2 = sum_d Var_j F^d(initial ensemble) / ksg_normalization, which keeps the
  /// explicit gain step stable whatever the units of the data. Reported chi values
  /// stay in data units.
  double ksg_normalization = 0.0;
  /// Brownian path coupling with a run using delta_tau / refinement.
  int refinement = 1;
  bool record_means = false;
  Exec exec = Exec::parallel;

  void validate() const;
};

/// Particles are the columns of an n_p x n_E matrix.
struct Ensemble {
  Eigen::MatrixXd particles;
  int k = 0;
  std::vector<double> chi;

  Eigen::Index n_E() const { return particles.cols(); }
  Eigen::Index n_p() const { return particles.rows(); }
  /// Computed relative to the first particle, so identical particles give their
  /// common value exactly.
  Eigen::VectorXd mean() const;
  /// sqrt of the mean (over components) of the 1/n_E particle variance.
  double spread() const;
};

struct PseudoMeasurementState {
  Eigen::VectorXd M;    // current pseudo-measurement M_k
  Eigen::VectorXd data; // the observed data, M_0
  Eigen::VectorXd eta;  // accumulated random walk
  int k = 0;

  static PseudoMeasurementState start(const Eigen::VectorXd& data);
};

/// p_{k+1}(j) = p_k(j) + dB, dB ~ N(0, sigma_B^2 dtau I), one stream per particle.
Ensemble predict(const Ensemble& ensemble, double sigma_B, double delta_tau,
                 std::vector<NormalStream>& streams, int refinement = 1);

/// sde: M_{k+1} = M_k + drift dtau + d eta; algebraic: M_{k+1} = data + eta_{k+1}.
PseudoMeasurementState evolve_pseudo_measurement(const PseudoMeasurementState& state,
                                                 const Eigen::VectorXd& drift, double sigma_eta,
                                                 double delta_tau, PseudoForm form,
                                                 NormalStream& stream, int refinement = 1);

/// Columns H(:, j) = forward evaluations of particle j.
Eigen::MatrixXd evaluate_ensemble(const ForwardModel& model, const Eigen::MatrixXd& particles,
                                  Exec exec = Exec::parallel);

/// Centered cross-covariance with 1/n_E normalization: mean(p h^T) - mean(p) mean(h)^T.
Eigen::MatrixXd cross_covariance(const Eigen::MatrixXd& P, const Eigen::MatrixXd& H);

/// p_hat(j) = p(j) + (1 + alpha) C (dM - H(:, j) dtau).
Ensemble ksg_update(const Ensemble& predicted, const Eigen::MatrixXd& H,
                    const Eigen::VectorXd& delta_M, double delta_tau, double alpha,
                    Exec exec = Exec::parallel);

/// p_hat(j) = p(j) + (1 + alpha) G (M_next - H(:, j)), G = P M^T (M M^T + S)^-1 with
/// 1/sqrt(n_E - 1) scaled deviation matrices and S = diag(sigma_eta^2).
Ensemble lsg_update(const Ensemble& predicted, const Eigen::MatrixXd& H,
                    const Eigen::VectorXd& M_next, const Eigen::VectorXd& sigma_eta,
                    double alpha, Exec exec = Exec::parallel);
Ensemble lsg_update(const Ensemble& predicted, const Eigen::MatrixXd& H,
                    const Eigen::VectorXd& M_next, double sigma_eta, double alpha,
                    Exec exec = Exec::parallel);

/// alpha_{k+1} = alpha_k / exp(k).
double anneal_step(double alpha_k, int k);
/// alpha_k = alpha_1 exp(-(1 + ... + (k - 1))).
double alpha_at(double alpha_1, int k);

struct RejectionOutcome {
  Ensemble accepted;
  std::vector<bool> flags;
  std::vector<double> chi;  // last accepted chi per particle
};

/// Keeps candidate j only when chi_of(candidate j) < prev_chi[j], else the
/// predicted particle; the recorded chi changes only on acceptance.
RejectionOutcome rejection_filter(const std::vector<double>& prev_chi, const Ensemble& candidates,
                                  const Ensemble& predicted,
                                  const std::function<double(Eigen::Index)>& chi_of);
RejectionOutcome rejection_filter(const std::vector<double>& prev_chi, const Ensemble& candidates,
                                  const Ensemble& predicted,
                                  const std::vector<double>& candidate_chi);

/// plain: M - F; augmented_sum: (chi - E[chi], M - F) with chi = sum (M - F)^2;
/// augmented_componentwise: ((M^d - F^d)^2 - E[chi^d], M - F).
Eigen::VectorXd build_error_vector(Characterization c, const Eigen::VectorXd& M_next,
                                   const Eigen::VectorXd& forward_j,
                                   const Eigen::VectorXd& expected_chi);

/// Sum of squared misfits per column.
std::vector<double> misfit(const Eigen::MatrixXd& H, const Eigen::VectorXd& data);

/// Full prediction-update recursion. The ensemble starts at `initial_mean` plus
/// init_spread * L z with z standard normal and L = `initial_factor` (identity when
/// empty); the returned estimate is the final ensemble mean.
ReconstructionResult run(const ForwardModel& model, const Eigen::VectorXd& data,
                         const SolverConfig& config, const Eigen::VectorXd& initial_mean,
                         const Eigen::MatrixXd& initial_factor = Eigen::MatrixXd());

/// sigma_eta actually used by run() for this data.
double effective_sigma_eta(const SolverConfig& config, const Eigen::VectorXd& data);

}  // namespace evobayes::stochastic
