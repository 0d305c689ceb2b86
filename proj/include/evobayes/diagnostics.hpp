#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evobayes/forward_model.hpp"
#include "evobayes/mesh.hpp"
#include "evobayes/scenario.hpp"
#include "evobayes/stochastic.hpp"

namespace evobayes::diagnostics {

struct HellingerEstimate {
  double distance = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo Hellinger distance sqrt(1/2 E_Q[(sqrt L - sqrt L')^2]) from paired
/// log-likelihood-ratio samples drawn under the common reference measure.
HellingerEstimate hellinger_empirical(const std::vector<double>& log_lambda,
                                      const std::vector<double>& log_lambda_prime);

/// Scalar test problem: F(p) = p, data `data`, ensemble started around `start`.
struct ScalarToy {
  double data = 0.0;
  double start = 1.0;
  stochastic::SolverConfig config;

  /// The solver defaults with the plateau stop disabled.
  static ScalarToy standard();
  /// standard() with sigma_B = sigma_eta = 0.1, used for the step-size studies.
  static ScalarToy coupled();
};

struct StabilityReport {
  double epsilon = 0.0;
  int iterations = 0;
  std::vector<double> dtau;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> discrepancy;  // [dtau][seed]
  std::vector<std::vector<double>> bound;        // [dtau][seed], with C = 1
  std::vector<double> median_discrepancy;        // [dtau]
  bool monotone = false;  // median discrepancy non-increasing along the grid
  double bound_fraction = 0.0;
};

/// KSG on data m and m + epsilon with coupled seeds, a fixed iteration count per
/// delta_tau, and the final-estimate discrepancy per run pair.
StabilityReport stability_experiment(const ScalarToy& toy, const std::vector<double>& dtau_grid,
                                     double epsilon, const std::vector<std::uint64_t>& seeds,
                                     int iterations);

/// Scalar linear-Gaussian problem with an analytic posterior mean.
struct LinearGaussian {
  double prior_mean = 0.0;
  double prior_std = 1.0;
  double observation = 1.0;
  double noise_std = 1.0;

  double posterior_mean() const;
};

struct ConvergenceReport {
  std::vector<double> grid;
  std::vector<double> rms_error;
  std::vector<std::vector<double>> errors;  // [grid][replicate]
  double slope = 0.0;
  /// Fraction of replicates where the error at the last grid point is below the
  /// error at the first.
  double paired_fraction = 0.0;
  bool high_variance = false;
};

/// One LSG update of a prior ensemble, compared with the analytic posterior mean.
double lsg_posterior_mean(const LinearGaussian& problem, int n_E, std::uint64_t seed,
                          stochastic::Exec exec = stochastic::Exec::parallel);

ConvergenceReport mc_convergence_experiment(const LinearGaussian& problem,
                                            const std::vector<int>& n_E_grid, int replicates,
                                            std::uint64_t seed = 1);

struct TauOrderReport {
  double dtau = 0.0;
  int reference_refinement = 0;
  std::vector<int> refinements;
  std::vector<std::vector<double>> error;        // [1 + refinements][seed] vs the reference
  std::vector<std::vector<double>> contraction;  // [refinements][seed]
  std::vector<double> median_contraction;
};

/// Runs the toy over the same tau span at steps dtau / r on one underlying
/// Brownian path (finest step dtau / reference_refinement).
TauOrderReport tau_order_experiment(const ScalarToy& toy, double dtau, int coarse_iterations,
                                    const std::vector<int>& refinements, int reference_refinement,
                                    const std::vector<std::uint64_t>& seeds);

/// Final estimate of the toy run at step dtau / r, iterations * r steps, on the
/// path sampled at dtau / finest.
double coupled_run(const ScalarToy& toy, double dtau, int iterations, int r, int finest,
                   std::uint64_t seed);

struct MartingaleReport {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double expected = 0.0;
  double lag1 = 0.0;
  double lag2 = 0.0;
  bool mean_ok = false;
  bool correlation_ok = false;
};

/// chi_{k+1} = (m_k + dB_{k-1} + dB_k)^2 with dB ~ N(0, dtau): the objective along
/// the diffusion around the ensemble means `m` of a converged run.
std::vector<double> version1_tail(const std::vector<double>& means, double delta_tau,
                                  std::uint64_t seed);

/// p_star = 0: mean chi within 3 SE of 2 dtau, lag-2 correlation of chi within
/// 3/sqrt(n) of 0. p_star != 0: mean increment within 3 SE of 0.
MartingaleReport version1_martingale_check(const std::vector<double>& chi_tail, double delta_tau,
                                           double p_star = 0.0);

/// Converged KSG toy run (data 0, start 1, solver defaults, `burn_in` + `tail`
/// iterations), then version1_tail over the last `tail` ensemble means. With
/// p_star != 0 the means are held at p_star instead.
MartingaleReport version1_toy_check(std::uint64_t seed, int tail, double delta_tau,
                                    double p_star = 0.0, int burn_in = 400);

struct InclusionMetrics {
  double peak = 0.0;
  fem::Point peak_at{};
  double distance = 0.0;
  double contrast = 0.0;       // peak / reconstructed background
  double true_contrast = 0.0;  // inclusion value / true background
};

struct ErrorMetrics {
  double rel_l2 = 0.0;
  double background = 0.0;       // mean reconstruction outside the inclusions
  double background_rms = 0.0;   // RMS relative error outside the inclusions
  std::vector<InclusionMetrics> inclusions;
};

/// Peaks are searched in each inclusion's Voronoi cell (nodes closer to it than to
/// any other inclusion center).
ErrorMetrics error_metrics(const std::vector<fem::Point>& positions, const std::vector<double>& recon,
                           const std::vector<double>& truth, const scenario::Phantom& phantom);

std::string to_text(const StabilityReport& r);
std::string to_text(const ConvergenceReport& r);
std::string to_text(const TauOrderReport& r);
std::string to_text(const MartingaleReport& r);

}  // namespace evobayes::diagnostics
