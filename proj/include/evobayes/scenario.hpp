#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evobayes/fem.hpp"
#include "evobayes/measurement.hpp"

namespace evobayes::scenario {

struct Inclusion {
  fem::Point center{};
  double radius = 0.03;  // cm
  double value = 3e-7;   // cm^2
};

enum class PhantomKind { side, central, custom };

struct Phantom {
  PhantomKind kind = PhantomKind::custom;
  double background = 1e-7;  // cm^2
  std::vector<Inclusion> inclusions;

  /// Two inclusions on the IR axis: 2e-7 at the top, 3e-7 at the bottom.
  static Phantom side();
  /// One 3e-7 inclusion at the IR center.
  static Phantom central();

  /// Throws ConfigError for negative values or inclusions outside the IR.
  void validate(const fem::IrSpec& ir) const;
  /// Value at a point inside the IR (last matching inclusion wins).
  double value_at(fem::Point p) const;
};

PhantomKind parse_phantom_kind(const std::string& s);
std::string to_string(PhantomKind k);

/// Nodal field over the IR nodes of `mesh`.
fem::ParameterField rasterize_phantom(const Phantom& phantom, const fem::Mesh& mesh);

struct DataStatus {
  bool all_zero = false;
};

/// Noisy data M_i = clean_i (1 + noise_frac xi_i) from the nonlinear forward model.
/// Each view draws from its own substream of `seed`.
MeasurementSet generate_data(const Phantom& phantom, const fem::Mesh& fine_mesh,
                             const fem::OpticalProps& props, const fem::UltrasoundConfig& us,
                             const DetectorGeometry& geometry, double noise_frac,
                             std::uint64_t seed, DataStatus* status = nullptr);

/// Adds multiplicative noise in place (the same substreams generate_data uses).
void add_noise(MeasurementSet& m, double noise_frac, std::uint64_t seed);

/// Anti-inverse-crime guard: throws GeometryError when both meshes are identical
/// unless `allow_same` is set.
void check_distinct_meshes(const fem::Mesh& data_mesh, const fem::Mesh& recon_mesh, bool allow_same);
void check_distinct_meshes(const std::string& data_hash, const std::string& recon_hash,
                           bool allow_same);

void write_measurements(std::ostream& out, const MeasurementSet& m);
MeasurementSet read_measurements(std::istream& in);
/// Throws GeometryError listing every differing metadata field.
void check_geometry(const MeasurementSet& data, const DetectorGeometry& geometry, double radius);

}  // namespace evobayes::scenario
