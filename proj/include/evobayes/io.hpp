#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "evobayes/fem.hpp"
#include "evobayes/gn.hpp"
#include "evobayes/result.hpp"

namespace evobayes::io {

/// `node_index,p_value_cm2`, global node indices.
void write_field_csv(std::ostream& out, const fem::ParameterField& field);
/// `k,chi_mean,chi_min,alpha,accept_frac,ensemble_spread`
void write_history_csv(std::ostream& out, const ReconstructionResult& result);
/// `k,chi,beta,chi_next,step_norm,beta_halved`
void write_gn_history_csv(std::ostream& out, const std::vector<gn::GnRecord>& log);

/// P1 interpolation of an IR field; points outside the IR get 0.
class FieldSampler {
 public:
  FieldSampler(const fem::Mesh& mesh, const fem::ParameterField& field);
  double operator()(fem::Point p) const;

 private:
  const fem::Mesh& mesh_;
  Eigen::VectorXd nodal_;
  std::vector<std::size_t> tris_;  // triangles touching the IR
};

/// 8-bit binary PGM of the field on a size x size grid covering the IR disk's
/// bounding square; 255 maps to `max_value` (the field maximum when <= 0).
void write_pgm(std::ostream& out, const FieldSampler& f, fem::Point center, double half_width, int size,
               double max_value = 0.0);

/// `arclength_cm,p_value` along the segment a -> b.
void write_cross_section_csv(std::ostream& out, const FieldSampler& f, fem::Point a, fem::Point b,
                             int samples);

/// Ordered key = value lines.
using Manifest = std::vector<std::pair<std::string, std::string>>;
void write_manifest(std::ostream& out, const Manifest& m);

/// Writes `content` to dir/name through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& dir, const std::string& name, const std::string& content);

std::string format_double(double x);

}  // namespace evobayes::io
