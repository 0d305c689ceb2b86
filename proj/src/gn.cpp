#include "evobayes/gn.hpp"

#include <cmath>
#include <exception>
#include <span>
#include <string>

namespace evobayes::gn {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void GnConfig::validate() const {
  if (!(beta_decay > 1)) throw ConfigError("gn beta_decay must exceed 1");
  if (!(stop_threshold > 0)) throw ConfigError("gn stop_threshold must be positive");
  if (beta_init == BetaInit::fixed && !(beta_fixed > 0)) throw ConfigError("gn beta must be positive");
  if (max_iters < 1) throw ConfigError("gn max_iters must be positive");
  if (max_increases < 1) throw ConfigError("gn max_increases must be positive");
  if (jacobian_mode == JacobianMode::adjoint) {
    throw ConfigError("adjoint Jacobian is not implemented; use finite_difference");
  }
}

namespace {

VectorXd eval(const ForwardModel& model, const VectorXd& p) {
  VectorXd out(static_cast<Index>(model.num_measurements()));
  model.evaluate(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                 std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

}  // namespace

MatrixXd jacobian(const ForwardModel& model, const VectorXd& p, Exec exec) {
  const auto n_p = static_cast<Index>(model.num_params());
  if (p.size() != n_p) throw std::invalid_argument("jacobian: parameter length mismatch");
  const VectorXd f0 = eval(model, p);
  MatrixXd J(f0.size(), n_p);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_p));
  auto column = [&](Index i) {
    try {
      VectorXd q = p;
      const double h = 1e-6 * std::max(std::abs(p[i]), 1.0);
      q[i] += h;
      J.col(i) = (eval(model, q) - f0) / h;
    } catch (const std::exception& e) {
      errors[i] = std::make_exception_ptr(
          NumericalError("jacobian column " + std::to_string(i) + ": " + e.what()));
    }
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (Index i = 0; i < n_p; ++i) column(i);
  } else {
    for (Index i = 0; i < n_p; ++i) column(i);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return J;
}

VectorXd gn_step(const VectorXd& p, const MatrixXd& J, const VectorXd& residual, double beta) {
  if (!(beta >= 0)) throw std::invalid_argument("gn_step: beta must be nonnegative");
  if (J.cols() != p.size() || J.rows() != residual.size()) {
    throw std::invalid_argument("gn_step: dimension mismatch");
  }
  MatrixXd H = J.transpose() * J;
  H.diagonal().array() += beta;
  const VectorXd g = J.transpose() * residual;
  Eigen::LDLT<MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array().abs() == 0.0).any()) {
    throw NumericalError("Gauss-Newton normal matrix is singular");
  }
  return p - ldlt.solve(g);
}

GnResult run_gn(const ForwardModel& model, const VectorXd& data, const VectorXd& start,
                const GnConfig& cfg) {
  cfg.validate();
  if (data.size() != static_cast<Index>(model.num_measurements())) {
    throw std::invalid_argument("run_gn: data has wrong length");
  }
  GnResult out;
  out.result.stop_reason = "max_iters";
  VectorXd p = start;
  VectorXd r = eval(model, p) - data;
  double chi = r.squaredNorm();
  double beta = 0.0;
  int increases = 0;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    const MatrixXd J = jacobian(model, p, cfg.exec);
    if (k == 1) {
      beta = cfg.beta_init == BetaInit::max_diag ? J.colwise().squaredNorm().maxCoeff() : cfg.beta_fixed;
      if (!(beta > 0)) beta = 1.0;  // J = 0: any positive value gives a zero step
      out.beta_initial = beta;
    }
    const VectorXd p_next = gn_step(p, J, r, beta);
    const VectorXd r_next = eval(model, p_next) - data;
    const double chi_next = r_next.squaredNorm();

    GnRecord rec{k, chi, beta, chi_next, (p_next - p).norm(), chi_next < chi};
    out.log.push_back(rec);
    IterationRecord h;
    h.k = k;
    h.chi_mean = chi_next;
    h.chi_min = chi_next;
    h.alpha = 0.0;
    h.accept_frac = 1.0;
    h.spread = 0.0;
    h.gain_norm = rec.step_norm;
    out.result.history.push_back(h);
    out.result.mean_history.push_back(p_next);

    const double rel = chi > 0 ? 100.0 * std::abs(chi_next - chi) / chi : 0.0;
    p = p_next;
    r = r_next;
    if (rec.decreased) {
      beta /= cfg.beta_decay;
      increases = 0;
    } else if (chi_next > chi) {
      ++increases;
    }
    chi = chi_next;
    if (rel < cfg.stop_threshold) {
      out.result.stop_reason = "threshold";
      break;
    }
    if (increases >= cfg.max_increases) {
      out.result.estimate = p;
      throw GnDivergence("Gauss-Newton misfit increased for " + std::to_string(increases) +
                         " consecutive iterations (chi = " + std::to_string(chi) + ")");
    }
  }
  out.result.estimate = p;
  return out;
}

}  // namespace evobayes::gn
