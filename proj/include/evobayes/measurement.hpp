#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace evobayes {

/// Fan-beam style detector arrangement. In each view the central detector sits
/// diametrically opposite the source, detectors are spread evenly over
/// `span_deg`, and the whole arrangement rotates by `step_deg` between views.
struct DetectorGeometry {
  int detectors = 21;
  double span_deg = 180.0;
  int views = 12;
  double step_deg = 30.0;
  double first_source_deg = 0.0;

  void validate() const;
  std::size_t num_measurements() const {
    return static_cast<std::size_t>(detectors) * static_cast<std::size_t>(views);
  }
  /// Angles in [0, 360).
  double source_angle(int view) const;
  double detector_angle(int view, int detector) const;
  /// Smallest boundary node count divisor that puts every source and detector
  /// angle on an evenly spaced boundary ring with a node at angle 0.
  int required_boundary_multiple() const;

  bool operator==(const DetectorGeometry&) const = default;
};

struct MeasurementSet {
  std::vector<double> values;
  std::vector<int> view;
  std::vector<int> detector;
  std::vector<double> angle_deg;

  DetectorGeometry geometry{};
  double radius = 0.0;
  double noise_frac = 0.0;
  std::uint64_t seed = 0;
  std::string mesh_hash;

  std::size_t size() const { return values.size(); }
  /// Fills view/detector/angle metadata from `geometry`, values zeroed.
  static MeasurementSet layout(const DetectorGeometry& geometry, double radius);
};

}  // namespace evobayes
