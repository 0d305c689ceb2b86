#pragma once

#include <stdexcept>
#include <string>

namespace evobayes {

/// Invalid or degenerate triangulation.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// System matrix is not positive definite or inputs are unphysical.
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failed or missed its residual target.
class SolveError : public std::runtime_error {
 public:
  SolveError(const std::string& what, double residual)
      : std::runtime_error(what + " (relative residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Detector/source placement cannot be matched to the mesh, or metadata disagree.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration file or option value.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown inside an iterative solver (singular gain system, divergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evobayes
