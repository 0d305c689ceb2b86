#include "evobayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "evobayes/rng.hpp"

namespace evobayes::diagnostics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double autocorrelation(const std::vector<double>& x, std::size_t lag) {
  const double m = mean_of(x);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + lag < x.size()) num += (x[i] - m) * (x[i + lag] - m);
  }
  return den > 0 ? num / den : 0.0;
}

double sample_sd(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

const LinearForward& identity1() {
  static const LinearForward f(MatrixXd::Identity(1, 1));
  return f;
}

}  // namespace

HellingerEstimate hellinger_empirical(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hellinger: sample lists differ in length");
  if (a.size() < 2) throw std::invalid_argument("hellinger: need at least two samples");
  std::vector<double> x(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::exp(0.5 * a[i]) - std::exp(0.5 * b[i]);
    x[i] = d * d;
  }
  const double h = 0.5 * mean_of(x);
  HellingerEstimate out;
  out.distance = std::sqrt(h);
  const double se_h = 0.5 * sample_sd(x) / std::sqrt(static_cast<double>(x.size()));
  out.std_error = out.distance > 0 ? se_h / (2.0 * out.distance) : 0.0;
  return out;
}

ScalarToy ScalarToy::standard() {
  ScalarToy t;
  t.config.plateau_rel = 0.0;
  return t;
}

ScalarToy ScalarToy::coupled() {
  ScalarToy t = standard();
  t.config.sigma_B = 0.1;
  t.config.sigma_eta = 0.1;
  return t;
}

StabilityReport stability_experiment(const ScalarToy& toy, const std::vector<double>& dtau_grid,
                                     double epsilon, const std::vector<std::uint64_t>& seeds,
                                     int iterations) {
  StabilityReport rep;
  rep.epsilon = epsilon;
  rep.iterations = iterations;
  rep.dtau = dtau_grid;
  rep.seeds = seeds;
  const VectorXd m = VectorXd::Constant(1, toy.data);
  const VectorXd m2 = VectorXd::Constant(1, toy.data + epsilon);
  std::size_t held = 0, total = 0;
  for (double dt : dtau_grid) {
    std::vector<double> disc, bound;
    for (auto seed : seeds) {
      stochastic::SolverConfig cfg = toy.config;
      cfg.scheme = stochastic::Scheme::ksg;
      cfg.delta_tau = dt;
      cfg.seed = seed;
      cfg.max_iters = iterations;
      cfg.plateau_rel = 0.0;
      cfg.record_means = true;
      const auto a = stochastic::run(identity1(), m, cfg, VectorXd::Constant(1, toy.start));
      const auto b = stochastic::run(identity1(), m2, cfg, VectorXd::Constant(1, toy.start));
      const double d = std::abs(a.estimate[0] - b.estimate[0]);
      disc.push_back(d);

      // ||M||: largest |F| seen along either run; dM_i: the pseudo-measurement
      // increments both runs drew (drift = data, shared eta stream).
      double norm_f = std::max(std::abs(toy.start), 0.0);
      for (const auto* r : {&a, &b}) {
        for (const auto& v : r->mean_history) norm_f = std::max(norm_f, std::abs(v[0]));
      }
      const double sa = stochastic::effective_sigma_eta(cfg, m);
      const double sb = stochastic::effective_sigma_eta(cfg, m2);
      NormalStream eta(seed, 3, 0);
      double sum_dm = 0.0;
      for (int k = 0; k < a.iterations(); ++k) {
        double w = 0.0;
        brownian_increment(eta, dt, cfg.refinement, &w, 1);
        sum_dm += std::max(std::abs(m[0] * dt + sa * w), std::abs(m2[0] * dt + sb * w));
      }
      const double k = a.iterations();
      const double B = std::exp(0.5 * norm_f * sum_dm) * norm_f * std::sqrt(k * dt);
      bound.push_back(B);
      ++total;
      if (B >= d) ++held;
    }
    rep.median_discrepancy.push_back(median(disc));
    rep.discrepancy.push_back(disc);
    rep.bound.push_back(bound);
  }
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.median_discrepancy.size(); ++i) {
    if (rep.median_discrepancy[i] > rep.median_discrepancy[i - 1]) rep.monotone = false;
  }
  rep.bound_fraction = total ? static_cast<double>(held) / static_cast<double>(total) : 0.0;
  return rep;
}

double LinearGaussian::posterior_mean() const {
  const double vp = prior_std * prior_std, vn = noise_std * noise_std;
  return prior_mean + vp / (vp + vn) * (observation - prior_mean);
}

double lsg_posterior_mean(const LinearGaussian& pb, int n_E, std::uint64_t seed,
                          stochastic::Exec exec) {
  stochastic::Ensemble e;
  e.particles.resize(1, n_E);
  auto s = make_streams(seed, 1, static_cast<std::size_t>(n_E));
  for (int j = 0; j < n_E; ++j) e.particles(0, j) = pb.prior_mean + pb.prior_std * s[j]();
  const auto up = stochastic::lsg_update(e, e.particles, VectorXd::Constant(1, pb.observation),
                                         pb.noise_std, 0.0, exec);
  return up.mean()[0];
}

ConvergenceReport mc_convergence_experiment(const LinearGaussian& pb, const std::vector<int>& grid,
                                            int replicates, std::uint64_t seed) {
  if (grid.size() < 3) throw std::invalid_argument("mc_convergence: need at least three grid points");
  if (replicates < 1) throw std::invalid_argument("mc_convergence: need a replicate");
  ConvergenceReport rep;
  rep.high_variance = replicates < 2;
  const double truth = pb.posterior_mean();
  for (int n : grid) {
    rep.grid.push_back(n);
    std::vector<double> err(static_cast<std::size_t>(replicates));
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < replicates; ++r) {
      const double est = lsg_posterior_mean(pb, n, seed + static_cast<std::uint64_t>(r),
                                            stochastic::Exec::serial);
      err[static_cast<std::size_t>(r)] = std::abs(est - truth);
    }
    double ms = 0.0;
    for (double e : err) ms += e * e;
    rep.rms_error.push_back(std::sqrt(ms / replicates));
    rep.errors.push_back(err);
  }
  // least-squares slope of log rms error against log n_E
  const std::size_t g = grid.size();
  double xb = 0, yb = 0;
  for (std::size_t i = 0; i < g; ++i) {
    xb += std::log(rep.grid[i]);
    yb += std::log(rep.rms_error[i]);
  }
  xb /= g;
  yb /= g;
  double num = 0, den = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const double x = std::log(rep.grid[i]) - xb;
    num += x * (std::log(rep.rms_error[i]) - yb);
    den += x * x;
  }
  rep.slope = num / den;
  int better = 0;
  for (int r = 0; r < replicates; ++r) {
    if (rep.errors.back()[static_cast<std::size_t>(r)] < rep.errors.front()[static_cast<std::size_t>(r)]) ++better;
  }
  rep.paired_fraction = static_cast<double>(better) / replicates;
  return rep;
}

double coupled_run(const ScalarToy& toy, double dtau, int iterations, int r, int finest,
                   std::uint64_t seed) {
  if (r < 1 || finest < r || finest % r != 0) {
    throw std::invalid_argument("tau_order: step dtau/" + std::to_string(r) +
                                " is not nested in the reference dtau/" + std::to_string(finest));
  }
  stochastic::SolverConfig cfg = toy.config;
  cfg.scheme = stochastic::Scheme::ksg;
  cfg.delta_tau = dtau / r;
  cfg.refinement = finest / r;
  cfg.max_iters = iterations * r;
  cfg.plateau_rel = 0.0;
  cfg.seed = seed;
  // The annealing schedule is per iteration, not per unit tau; it would differ
  // between step sizes.
  cfg.alpha_1 = 0.0;
  return stochastic::run(identity1(), VectorXd::Constant(1, toy.data), cfg,
                         VectorXd::Constant(1, toy.start))
      .estimate[0];
}

TauOrderReport tau_order_experiment(const ScalarToy& toy, double dtau, int coarse_iterations,
                                    const std::vector<int>& refinements, int finest,
                                    const std::vector<std::uint64_t>& seeds) {
  TauOrderReport rep;
  rep.dtau = dtau;
  rep.reference_refinement = finest;
  rep.refinements = refinements;
  std::vector<int> levels{1};
  levels.insert(levels.end(), refinements.begin(), refinements.end());
  rep.error.assign(levels.size(), std::vector<double>(seeds.size()));
  rep.contraction.assign(refinements.size(), std::vector<double>(seeds.size()));
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const double ref = coupled_run(toy, dtau, coarse_iterations, finest, finest, seeds[s]);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      rep.error[l][s] = std::abs(coupled_run(toy, dtau, coarse_iterations, levels[l], finest, seeds[s]) - ref);
    }
    for (std::size_t i = 0; i < refinements.size(); ++i) {
      rep.contraction[i][s] = rep.error[0][s] / rep.error[i + 1][s];
    }
  }
  for (const auto& c : rep.contraction) rep.median_contraction.push_back(median(c));
  return rep;
}

std::vector<double> version1_tail(const std::vector<double>& means, double dt, std::uint64_t seed) {
  NormalStream s(seed, 5, 0);
  const double sd = std::sqrt(dt);
  double prev = sd * s();
  std::vector<double> chi;
  chi.reserve(means.size());
  for (double m : means) {
    const double cur = sd * s();
    const double p = m + prev + cur;
    chi.push_back(p * p);
    prev = cur;
  }
  return chi;
}

MartingaleReport version1_martingale_check(const std::vector<double>& chi, double dt, double p_star) {
  if (chi.size() < 500) throw std::invalid_argument("martingale check: tail shorter than 500 samples");
  MartingaleReport r;
  r.n = chi.size();
  const double n = static_cast<double>(chi.size());
  r.lag1 = autocorrelation(chi, 1);
  r.lag2 = autocorrelation(chi, 2);
  if (p_star == 0.0) {
    r.expected = 2.0 * dt;
    r.mean = mean_of(chi);
    // chi_{k+1} and chi_{k+2} share one increment: the sequence is 1-dependent.
    r.std_error = sample_sd(chi) * std::sqrt(std::max(1.0 + 2.0 * r.lag1, 0.0) / n);
    // chi values two steps apart share no increment
    r.correlation_ok = std::abs(r.lag2) <= 3.0 / std::sqrt(n);
  } else {
    r.expected = 0.0;
    // the increments telescope: their mean is (chi_last - chi_first) / (n - 1)
    r.mean = (chi.back() - chi.front()) / (n - 1.0);
    r.std_error = std::sqrt(2.0) * sample_sd(chi) / (n - 1.0);
    r.correlation_ok = true;
  }
  r.mean_ok = std::abs(r.mean - r.expected) <= 3.0 * r.std_error;
  return r;
}

MartingaleReport version1_toy_check(std::uint64_t seed, int tail, double dt, double p_star, int burn_in) {
  std::vector<double> means;
  if (p_star == 0.0) {
    stochastic::SolverConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = burn_in + tail;
    cfg.plateau_rel = 0.0;
    cfg.record_means = true;
    const auto r = stochastic::run(identity1(), VectorXd::Zero(1), cfg, VectorXd::Ones(1));
    for (std::size_t k = static_cast<std::size_t>(burn_in); k < r.mean_history.size(); ++k) {
      means.push_back(r.mean_history[k][0]);
    }
  } else {
    means.assign(static_cast<std::size_t>(tail), p_star);
  }
  return version1_martingale_check(version1_tail(means, dt, seed), dt, p_star);
}

ErrorMetrics error_metrics(const std::vector<fem::Point>& pos, const std::vector<double>& recon,
                           const std::vector<double>& truth, const scenario::Phantom& ph) {
  if (pos.size() != recon.size() || recon.size() != truth.size() || recon.empty()) {
    throw std::invalid_argument("error_metrics: mismatched field sizes");
  }
  ErrorMetrics m;
  double num = 0, den = 0, bg_sum = 0, bg_sq = 0;
  std::size_t bg_n = 0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    num += (recon[i] - truth[i]) * (recon[i] - truth[i]);
    den += truth[i] * truth[i];
    bool inside = false;
    for (const auto& inc : ph.inclusions) inside = inside || fem::distance(pos[i], inc.center) <= inc.radius;
    if (!inside) {
      bg_sum += recon[i];
      const double rel = truth[i] != 0 ? (recon[i] - truth[i]) / truth[i] : recon[i];
      bg_sq += rel * rel;
      ++bg_n;
    }
  }
  m.rel_l2 = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
  m.background = bg_n ? bg_sum / static_cast<double>(bg_n) : 0.0;
  m.background_rms = bg_n ? std::sqrt(bg_sq / static_cast<double>(bg_n)) : 0.0;
  for (std::size_t c = 0; c < ph.inclusions.size(); ++c) {
    const auto& inc = ph.inclusions[c];
    InclusionMetrics im;
    im.peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < recon.size(); ++i) {
      const double d = fem::distance(pos[i], inc.center);
      bool mine = true;
      for (std::size_t o = 0; o < ph.inclusions.size(); ++o) {
        if (o != c && fem::distance(pos[i], ph.inclusions[o].center) < d) mine = false;
      }
      if (mine && recon[i] > im.peak) {
        im.peak = recon[i];
        im.peak_at = pos[i];
      }
    }
    im.distance = fem::distance(im.peak_at, inc.center);
    im.contrast = m.background != 0 ? im.peak / m.background : 0.0;
    im.true_contrast = ph.background != 0 ? inc.value / ph.background : 0.0;
    m.inclusions.push_back(im);
  }
  return m;
}

std::string to_text(const StabilityReport& r) {
  std::ostringstream o;
  o << "stability: epsilon=" << r.epsilon << " iterations=" << r.iterations << '\n';
  for (std::size_t i = 0; i < r.dtau.size(); ++i) {
    o << "  dtau=" << r.dtau[i] << " median_discrepancy=" << r.median_discrepancy[i] << '\n';
  }
  o << "  monotone_non_increasing=" << (r.monotone ? "PASS" : "FAIL") << '\n';
  o << "  bound_holds_fraction=" << r.bound_fraction << ' ' << (r.bound_fraction >= 0.9 ? "PASS" : "FAIL")
    << '\n';
  return o.str();
}

std::string to_text(const ConvergenceReport& r) {
  std::ostringstream o;
  o << "mc_rate:\n";
  for (std::size_t i = 0; i < r.grid.size(); ++i) {
    o << "  n_E=" << r.grid[i] << " rms_error=" << r.rms_error[i] << '\n';
  }
  const bool ok = r.slope >= -0.7 && r.slope <= -0.3;
  o << "  slope=" << r.slope << " in [-0.7,-0.3] " << (ok ? "PASS" : "FAIL") << '\n';
  o << "  paired_fraction=" << r.paired_fraction << ' ' << (r.paired_fraction >= 0.9 ? "PASS" : "FAIL")
    << '\n';
  if (r.high_variance) o << "  warning: single replicate, high variance\n";
  return o.str();
}

std::string to_text(const TauOrderReport& r) {
  std::ostringstream o;
  o << "tau_order: dtau=" << r.dtau << " reference=dtau/" << r.reference_refinement << '\n';
  for (std::size_t i = 0; i < r.refinements.size(); ++i) {
    o << "  dtau vs dtau/" << r.refinements[i] << " median_contraction=" << r.median_contraction[i]
      << '\n';
  }
  return o.str();
}

std::string to_text(const MartingaleReport& r) {
  std::ostringstream o;
  o << "martingale: n=" << r.n << " mean=" << r.mean << " expected=" << r.expected
    << " se=" << r.std_error << ' ' << (r.mean_ok ? "PASS" : "FAIL") << '\n';
  o << "  lag1=" << r.lag1 << " lag2=" << r.lag2 << ' ' << (r.correlation_ok ? "PASS" : "FAIL") << '\n';
  return o.str();
}

}  // namespace evobayes::diagnostics
