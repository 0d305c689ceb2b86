#include "evobayes/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "evobayes/errors.hpp"

namespace evobayes::stochastic {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Scheme parse_scheme(const std::string& s) {
  if (s == "ksg") return Scheme::ksg;
  if (s == "lsg") return Scheme::lsg;
  throw ConfigError("unknown scheme '" + s + "'");
}

Characterization parse_characterization(const std::string& s) {
  if (s == "plain" || s == "version2_plain") return Characterization::plain;
  if (s == "augmented_sum" || s == "version2_augmented_sum") return Characterization::augmented_sum;
  if (s == "augmented_componentwise" || s == "version2_augmented_componentwise") {
    return Characterization::augmented_componentwise;
  }
  throw ConfigError("unknown characterization '" + s + "'");
}

std::string to_string(Scheme s) { return s == Scheme::ksg ? "ksg" : "lsg"; }

std::string to_string(Characterization c) {
  switch (c) {
    case Characterization::plain: return "plain";
    case Characterization::augmented_sum: return "augmented_sum";
    case Characterization::augmented_componentwise: return "augmented_componentwise";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (n_E < 2) throw ConfigError("n_E must be at least 2");
  if (!(delta_tau > 0)) throw ConfigError("delta_tau must be positive");
  if (!(sigma_B >= 0)) throw ConfigError("sigma_B must be nonnegative");
  if (!(alpha_1 >= 0)) throw ConfigError("alpha_1 must be nonnegative");
  if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (plateau_window < 1) throw ConfigError("plateau_window must be positive");
  if (!(init_spread >= 0)) throw ConfigError("init_spread must be nonnegative");
  if (refinement < 1) throw ConfigError("refinement must be positive");
}

namespace {

// Deviations from the column mean. The mean is taken relative to the first
// column so that identical columns give exactly zero deviations.
MatrixXd centered(const MatrixXd& X) {
  const VectorXd ref = X.col(0);
  MatrixXd D = X.colwise() - ref;
  const VectorXd shift = D.rowwise().mean();
  D.colwise() -= shift;
  return D;
}

// out(:, j) = particles(:, j) + scale * gain * innovation(:, j)
Ensemble apply_gain(const Ensemble& predicted, const MatrixXd& gain, const MatrixXd& innovation,
                    double scale, Exec exec) {
  Ensemble out = predicted;
  const Index n = predicted.n_E();
  auto body = [&](Index j) {
    const VectorXd corr = gain * innovation.col(j);
    out.particles.col(j) += scale * corr;
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Index j = 0; j < n; ++j) body(j);
  } else {
    for (Index j = 0; j < n; ++j) body(j);
  }
  return out;
}

bool all_zero(const MatrixXd& X) { return (X.array() == 0.0).all(); }

double median_abs(const VectorXd& v) {
  std::vector<double> a(v.size());
  for (Index i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
  if (a.empty()) return 0.0;
  const std::size_t mid = a.size() / 2;
  std::nth_element(a.begin(), a.begin() + mid, a.end());
  double m = a[mid];
  if (a.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(a.begin(), a.begin() + mid));
  }
  return m;
}

MatrixXd initial_ensemble(const SolverConfig& cfg, const VectorXd& initial_mean,
                          const MatrixXd& initial_factor, Index n_p) {
  if (initial_factor.size() != 0 && (initial_factor.rows() != n_p || initial_factor.cols() != n_p)) {
    throw std::invalid_argument("run: initial factor must be n_p x n_p");
  }
  MatrixXd P(n_p, cfg.n_E);
  auto init = make_streams(cfg.seed, 1, static_cast<std::size_t>(cfg.n_E));
  VectorXd z(n_p);
  for (Index j = 0; j < cfg.n_E; ++j) {
    for (Index l = 0; l < n_p; ++l) z[l] = init[j]();
    if (initial_factor.size() != 0) z = initial_factor * z;
    P.col(j) = initial_mean + cfg.init_spread * z;
  }
  return P;
}

}  // namespace

VectorXd Ensemble::mean() const {
  if (particles.cols() == 0) return VectorXd::Zero(particles.rows());
  const VectorXd ref = particles.col(0);
  return ref + (particles.colwise() - ref).rowwise().mean();
}

double Ensemble::spread() const {
  if (particles.cols() == 0 || particles.rows() == 0) return 0.0;
  const MatrixXd D = centered(particles);
  return std::sqrt(D.squaredNorm() / static_cast<double>(D.size()));
}

PseudoMeasurementState PseudoMeasurementState::start(const VectorXd& data) {
  PseudoMeasurementState s;
  s.M = data;
  s.data = data;
  s.eta = VectorXd::Zero(data.size());
  return s;
}

Ensemble predict(const Ensemble& ensemble, double sigma_B, double delta_tau,
                 std::vector<NormalStream>& streams, int refinement) {
  if (streams.size() < static_cast<std::size_t>(ensemble.n_E())) {
    throw std::invalid_argument("predict: one stream per particle required");
  }
  Ensemble out = ensemble;
  if (sigma_B == 0.0) return out;
  std::vector<double> dB(static_cast<std::size_t>(ensemble.n_p()));
  for (Index j = 0; j < ensemble.n_E(); ++j) {
    brownian_increment(streams[j], delta_tau, refinement, dB.data(), dB.size());
    for (Index l = 0; l < ensemble.n_p(); ++l) out.particles(l, j) += sigma_B * dB[l];
  }
  return out;
}

PseudoMeasurementState evolve_pseudo_measurement(const PseudoMeasurementState& state,
                                                 const VectorXd& drift, double sigma_eta,
                                                 double delta_tau, PseudoForm form,
                                                 NormalStream& stream, int refinement) {
  PseudoMeasurementState next = state;
  next.k = state.k + 1;
  VectorXd d_eta = VectorXd::Zero(state.M.size());
  if (sigma_eta != 0.0) {
    brownian_increment(stream, delta_tau, refinement, d_eta.data(), static_cast<std::size_t>(d_eta.size()));
    d_eta *= sigma_eta;
  }
  next.eta = state.eta + d_eta;
  if (form == PseudoForm::sde) {
    if (drift.size() != state.M.size()) throw std::invalid_argument("drift has wrong length");
    next.M = state.M + drift * delta_tau + d_eta;
  } else {
    next.M = state.data + next.eta;
  }
  return next;
}

MatrixXd evaluate_ensemble(const ForwardModel& model, const MatrixXd& particles, Exec exec) {
  const auto n_M = static_cast<Index>(model.num_measurements());
  const auto n_p = static_cast<Index>(model.num_params());
  if (particles.rows() != n_p) throw std::invalid_argument("evaluate_ensemble: dimension mismatch");
  const Index n = particles.cols();
  MatrixXd H(n_M, n);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto body = [&](Index j) {
    try {
      model.evaluate(std::span<const double>(particles.col(j).data(), static_cast<std::size_t>(n_p)),
                     std::span<double>(H.col(j).data(), static_cast<std::size_t>(n_M)));
    } catch (...) {
      errors[j] = std::current_exception();
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Index j = 0; j < n; ++j) body(j);
  } else {
    for (Index j = 0; j < n; ++j) body(j);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return H;
}

MatrixXd cross_covariance(const MatrixXd& P, const MatrixXd& H) {
  if (P.cols() != H.cols()) throw std::invalid_argument("cross_covariance: ensemble size mismatch");
  if (P.cols() < 2) throw NumericalError("covariance needs at least two particles");
  return centered(P) * centered(H).transpose() / static_cast<double>(P.cols());
}

Ensemble ksg_update(const Ensemble& predicted, const MatrixXd& H, const VectorXd& delta_M,
                    double delta_tau, double alpha, Exec exec) {
  if (predicted.n_E() < 2) throw NumericalError("KSG update needs at least two particles");
  if (H.rows() != delta_M.size()) throw std::invalid_argument("ksg_update: dimension mismatch");
  const MatrixXd C = cross_covariance(predicted.particles, H);
  if (all_zero(C)) return predicted;
  const MatrixXd innovation = (-delta_tau * H).colwise() + delta_M;
  return apply_gain(predicted, C, innovation, 1.0 + alpha, exec);
}

Ensemble lsg_update(const Ensemble& predicted, const MatrixXd& H, const VectorXd& M_next,
                    const VectorXd& sigma_eta, double alpha, Exec exec) {
  const Index n = predicted.n_E();
  if (n < 2) throw NumericalError("LSG update needs at least two particles");
  if (H.rows() != M_next.size() || sigma_eta.size() != M_next.size()) {
    throw std::invalid_argument("lsg_update: dimension mismatch");
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(n - 1));
  const MatrixXd Hs = centered(H) * s;
  if (all_zero(Hs)) return predicted;
  const MatrixXd Ps = centered(predicted.particles) * s;
  MatrixXd S = Hs * Hs.transpose();
  S.diagonal() += sigma_eta.array().square().matrix();
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("LSG innovation covariance is not positive definite");
  }
  // G = Ps Hs^T S^-1, formed once as (S^-1 Hs Ps^T)^T
  const MatrixXd G = llt.solve(Hs * Ps.transpose()).transpose();
  const MatrixXd innovation = (-H).colwise() + M_next;
  return apply_gain(predicted, G, innovation, 1.0 + alpha, exec);
}

Ensemble lsg_update(const Ensemble& predicted, const MatrixXd& H, const VectorXd& M_next,
                    double sigma_eta, double alpha, Exec exec) {
  return lsg_update(predicted, H, M_next, VectorXd::Constant(M_next.size(), sigma_eta), alpha, exec);
}

double anneal_step(double alpha_k, int k) {
  if (k < 1) throw std::invalid_argument("anneal_step: k must be >= 1");
  return alpha_k / std::exp(static_cast<double>(k));
}

double alpha_at(double alpha_1, int k) {
  const double kk = static_cast<double>(k);
  return alpha_1 * std::exp(-0.5 * kk * (kk - 1.0));
}

RejectionOutcome rejection_filter(const std::vector<double>& prev_chi, const Ensemble& candidates,
                                  const Ensemble& predicted,
                                  const std::function<double(Index)>& chi_of) {
  std::vector<double> cand(static_cast<std::size_t>(candidates.n_E()));
  for (Index j = 0; j < candidates.n_E(); ++j) cand[j] = chi_of(j);
  return rejection_filter(prev_chi, candidates, predicted, cand);
}

RejectionOutcome rejection_filter(const std::vector<double>& prev_chi, const Ensemble& candidates,
                                  const Ensemble& predicted, const std::vector<double>& candidate_chi) {
  const auto n = static_cast<std::size_t>(candidates.n_E());
  if (prev_chi.size() != n || candidate_chi.size() != n ||
      predicted.n_E() != candidates.n_E()) {
    throw std::invalid_argument("rejection_filter: ensemble size mismatch");
  }
  RejectionOutcome out{predicted, std::vector<bool>(n, false), prev_chi};
  out.accepted.k = candidates.k;
  for (std::size_t j = 0; j < n; ++j) {
    if (candidate_chi[j] < prev_chi[j]) {
      out.flags[j] = true;
      out.chi[j] = candidate_chi[j];
      out.accepted.particles.col(static_cast<Index>(j)) = candidates.particles.col(static_cast<Index>(j));
    }
  }
  out.accepted.chi = out.chi;
  return out;
}

VectorXd build_error_vector(Characterization c, const VectorXd& M_next, const VectorXd& forward_j,
                            const VectorXd& expected_chi) {
  if (M_next.size() != forward_j.size()) throw std::invalid_argument("build_error_vector: size mismatch");
  const VectorXd r = M_next - forward_j;
  const Index n = r.size();
  switch (c) {
    case Characterization::plain:
      return r;
    case Characterization::augmented_sum: {
      if (expected_chi.size() != 1) throw std::invalid_argument("augmented_sum needs a scalar E[chi]");
      VectorXd e(n + 1);
      e[0] = r.squaredNorm() - expected_chi[0];
      e.tail(n) = r;
      return e;
    }
    case Characterization::augmented_componentwise: {
      if (expected_chi.size() != n) throw std::invalid_argument("componentwise needs one E[chi] per datum");
      VectorXd e(2 * n);
      e.head(n) = r.array().square().matrix() - expected_chi;
      e.tail(n) = r;
      return e;
    }
  }
  throw ConfigError("unknown characterization");
}

std::vector<double> misfit(const MatrixXd& H, const VectorXd& data) {
  std::vector<double> chi(static_cast<std::size_t>(H.cols()));
  for (Index j = 0; j < H.cols(); ++j) chi[j] = (data - H.col(j)).squaredNorm();
  return chi;
}

double effective_sigma_eta(const SolverConfig& config, const VectorXd& data) {
  return config.sigma_eta >= 0.0 ? config.sigma_eta : 0.01 * median_abs(data);
}

namespace {

// Builds the "measurement functions" and their targets for the gain. For the
// chi entries the target is the previous expected chi, so the innovation is
// E[chi] - chi_j, i.e. the first block of the error vector with its sign flipped
// (it is the prediction that carries the chi, not the data).
struct GainInputs {
  MatrixXd H;
  VectorXd target;
};

GainInputs gain_inputs(Characterization c, const MatrixXd& F, const VectorXd& target,
                       const VectorXd& reference, const VectorXd& expected_chi, double chi_scale) {
  if (c == Characterization::plain) return {F, target};
  const Index n_M = F.rows();
  const Index n = F.cols();
  const MatrixXd sq = (F.colwise() - reference).array().square().matrix();
  if (c == Characterization::augmented_sum) {
    GainInputs g{MatrixXd(n_M + 1, n), VectorXd(n_M + 1)};
    g.H.row(0) = sq.colwise().sum();
    g.H.bottomRows(n_M) = F;
    g.target[0] = expected_chi[0] * chi_scale;
    g.target.tail(n_M) = target;
    return g;
  }
  GainInputs g{MatrixXd(2 * n_M, n), VectorXd(2 * n_M)};
  g.H.topRows(n_M) = sq;
  g.H.bottomRows(n_M) = F;
  g.target.head(n_M) = expected_chi * chi_scale;
  g.target.tail(n_M) = target;
  return g;
}

VectorXd expected_chi_of(Characterization c, const MatrixXd& F, const VectorXd& reference) {
  const MatrixXd sq = (F.colwise() - reference).array().square().matrix();
  if (c == Characterization::augmented_componentwise) return sq.rowwise().mean();
  VectorXd e(1);
  e[0] = sq.colwise().sum().mean();
  return e;
}

}  // namespace

namespace {

ReconstructionResult run_impl(const ForwardModel& model, const VectorXd& data, const SolverConfig& cfg,
                              const VectorXd& initial_mean, const MatrixXd& initial_factor);

}  // namespace

ReconstructionResult run(const ForwardModel& model, const VectorXd& data, const SolverConfig& cfg,
                         const VectorXd& initial_mean, const MatrixXd& initial_factor) {
  cfg.validate();
  if (cfg.scheme != Scheme::ksg || !(cfg.ksg_normalization > 0)) {
    return run_impl(model, data, cfg, initial_mean, initial_factor);
  }
  // Probe the initial ensemble (same seed, so run_impl rebuilds it identically).
  const MatrixXd init = initial_ensemble(cfg, initial_mean, initial_factor, static_cast<Index>(model.num_params()));
  const MatrixXd F0 = evaluate_ensemble(model, init, cfg.exec);
  const MatrixXd D = centered(F0);
  const double total_var = D.squaredNorm() / static_cast<double>(F0.cols());
  if (!(total_var > 0)) return run_impl(model, data, cfg, initial_mean, initial_factor);
  const double s = std::sqrt(total_var / cfg.ksg_normalization);
  const ScaledForward scaled(model, 1.0, s);
  SolverConfig inner = cfg;
  inner.ksg_normalization = 0.0;
  if (inner.sigma_eta >= 0) inner.sigma_eta /= s;
  ReconstructionResult res = run_impl(scaled, data / s, inner, initial_mean, initial_factor);
  for (auto& h : res.history) {
    h.chi_mean *= s * s;
    h.chi_min *= s * s;
  }
  for (auto& a : res.accepted_chi) {
    for (double& c : a) c *= s * s;
  }
  return res;
}

namespace {

ReconstructionResult run_impl(const ForwardModel& model, const VectorXd& data, const SolverConfig& cfg,
                              const VectorXd& initial_mean, const MatrixXd& initial_factor) {
  const auto n_p = static_cast<Index>(model.num_params());
  const auto n_M = static_cast<Index>(model.num_measurements());
  if (initial_mean.size() != n_p) throw std::invalid_argument("run: initial mean has wrong length");
  if (data.size() != n_M) throw std::invalid_argument("run: data has wrong length");
  const Index n_E = cfg.n_E;
  const double sig_eta = effective_sigma_eta(cfg, data);
  const bool ksg = cfg.scheme == Scheme::ksg;

  Ensemble ens;
  ens.particles = initial_ensemble(cfg, initial_mean, initial_factor, n_p);
  auto streams = make_streams(cfg.seed, 2, static_cast<std::size_t>(n_E));
  NormalStream eta_stream(cfg.seed, 3, 0);

  const MatrixXd F0 = evaluate_ensemble(model, ens.particles, cfg.exec);
  ens.chi = misfit(F0, data);
  VectorXd expected_chi = expected_chi_of(cfg.characterization, F0, data);

  ReconstructionResult res;
  res.accepted_chi.resize(static_cast<std::size_t>(n_E));
  for (Index j = 0; j < n_E; ++j) res.accepted_chi[j].push_back(ens.chi[j]);

  PseudoMeasurementState pm = PseudoMeasurementState::start(data);
  double alpha = cfg.alpha_1;
  res.stop_reason = "max_iters";
  for (int k = 1; k <= cfg.max_iters; ++k) {
    Ensemble pred = predict(ens, cfg.sigma_B, cfg.delta_tau, streams, cfg.refinement);
    pred.k = k;
    const MatrixXd F = evaluate_ensemble(model, pred.particles, cfg.exec);

    PseudoMeasurementState next = evolve_pseudo_measurement(
        pm, data, sig_eta, cfg.delta_tau, ksg ? PseudoForm::sde : PseudoForm::algebraic, eta_stream,
        cfg.refinement);
    // KSG consumes the increment dM, LSG the level M_{k+1}; chi in the augmented
    // modes is measured against the data level in both cases.
    const VectorXd target = ksg ? VectorXd(next.M - pm.M) : next.M;
    const VectorXd& reference = ksg ? data : next.M;
    const GainInputs g = gain_inputs(cfg.characterization, F, target, reference, expected_chi,
                                     ksg ? cfg.delta_tau : 1.0);
    Ensemble cand = ksg ? ksg_update(pred, g.H, g.target, cfg.delta_tau, alpha, cfg.exec)
                        : lsg_update(pred, g.H, g.target, sig_eta, alpha, cfg.exec);
    cand.k = k;
    if (cfg.characterization != Characterization::plain) {
      expected_chi = expected_chi_of(cfg.characterization, F, reference);
    }

    const std::vector<double> pred_chi = misfit(F, data);
    IterationRecord rec;
    rec.k = k;
    rec.alpha = alpha;
    rec.gain_norm = std::sqrt((cand.particles - pred.particles).squaredNorm() / static_cast<double>(n_E));
    std::vector<bool> flags(static_cast<std::size_t>(n_E), true);
    if (cfg.rejection) {
      const MatrixXd Fc = evaluate_ensemble(model, cand.particles, cfg.exec);
      auto out = rejection_filter(ens.chi, cand, pred, misfit(Fc, data));
      flags = out.flags;
      ens = std::move(out.accepted);
      for (Index j = 0; j < n_E; ++j) {
        if (flags[j]) res.accepted_chi[j].push_back(ens.chi[j]);
      }
      rec.chi_min = *std::min_element(ens.chi.begin(), ens.chi.end());
    } else {
      ens = std::move(cand);
      ens.chi = pred_chi;
      rec.chi_min = *std::min_element(pred_chi.begin(), pred_chi.end());
    }
    ens.k = k;
    rec.accept_frac = static_cast<double>(std::count(flags.begin(), flags.end(), true)) / static_cast<double>(n_E);
    rec.spread = ens.spread();
    const VectorXd mean = ens.mean();
    const VectorXd Fm = VectorXd::Map(model(std::span<const double>(mean.data(), mean.size())).data(), n_M);
    rec.chi_mean = (data - Fm).squaredNorm();
    res.history.push_back(rec);
    res.accepted.push_back(flags);
    if (cfg.record_means) res.mean_history.push_back(mean);

    pm = std::move(next);
    alpha = anneal_step(alpha, k);

    const int w = cfg.plateau_window;
    if (k > w) {
      const double before = res.history[static_cast<std::size_t>(k - 1 - w)].chi_mean;
      const double rel = before > 0 ? std::abs(rec.chi_mean - before) / before : 0.0;
      if (rel < cfg.plateau_rel) {
        res.stop_reason = "plateau";
        break;
      }
    }
  }
  res.estimate = ens.mean();
  return res;
}

}  // namespace

}  // namespace evobayes::stochastic
