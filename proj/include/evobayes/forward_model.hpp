#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace evobayes {

/// Parameter-to-measurement map F: R^n_p -> R^n_M.
///
/// evaluate() must be safe to call concurrently on the same object.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual std::size_t num_params() const = 0;
  virtual std::size_t num_measurements() const = 0;
  virtual void evaluate(std::span<const double> p, std::span<double> out) const = 0;

  std::vector<double> operator()(std::span<const double> p) const {
    std::vector<double> out(num_measurements());
    evaluate(p, out);
    return out;
  }
};

/// F(p) = A p.
class LinearForward final : public ForwardModel {
 public:
  explicit LinearForward(Eigen::MatrixXd A) : A_(std::move(A)) {}
  std::size_t num_params() const override { return static_cast<std::size_t>(A_.cols()); }
  std::size_t num_measurements() const override { return static_cast<std::size_t>(A_.rows()); }
  void evaluate(std::span<const double> p, std::span<double> out) const override;
  const Eigen::MatrixXd& matrix() const { return A_; }

 private:
  Eigen::MatrixXd A_;
};

/// Wraps a model so the solver sees O(1) quantities:
/// G(p~) = F(p~ * param_scale) / measurement_scale.
class ScaledForward final : public ForwardModel {
 public:
  ScaledForward(const ForwardModel& base, double param_scale, double measurement_scale)
      : base_(base), ps_(param_scale), ms_(measurement_scale) {}
  std::size_t num_params() const override { return base_.num_params(); }
  std::size_t num_measurements() const override { return base_.num_measurements(); }
  void evaluate(std::span<const double> p, std::span<double> out) const override;

 private:
  const ForwardModel& base_;
  double ps_;
  double ms_;
};

}  // namespace evobayes
