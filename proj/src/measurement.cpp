#include "evobayes/measurement.hpp"

#include <cmath>
#include <numeric>

#include "evobayes/errors.hpp"

namespace evobayes {

namespace {

double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0) a += 360.0;
  // snap values that round to 360
  if (a >= 360.0 - 1e-12) a = 0.0;
  return a;
}

long long millideg(double a) { return std::llround(a * 1000.0); }

}  // namespace

void DetectorGeometry::validate() const {
  if (detectors < 1 || views < 1) throw GeometryError("detector and view counts must be positive");
  if (!(span_deg >= 0 && span_deg < 360)) throw GeometryError("span_deg must lie in [0, 360)");
  if (detectors > 1 && !(span_deg > 0)) throw GeometryError("span_deg must be positive");
}

double DetectorGeometry::source_angle(int v) const {
  return wrap_deg(first_source_deg + v * step_deg);
}

double DetectorGeometry::detector_angle(int v, int d) const {
  const double spacing = detectors > 1 ? span_deg / (detectors - 1) : 0.0;
  return wrap_deg(source_angle(v) + 180.0 - 0.5 * span_deg + d * spacing);
}

int DetectorGeometry::required_boundary_multiple() const {
  // every angle must be an integer multiple of 360/N; work in millidegrees
  long long g = 360000;
  for (int v = 0; v < views; ++v) {
    g = std::gcd(g, millideg(source_angle(v)));
    for (int d = 0; d < detectors; ++d) g = std::gcd(g, millideg(detector_angle(v, d)));
  }
  if (g == 0) g = 360000;
  return static_cast<int>(360000 / g);
}

MeasurementSet MeasurementSet::layout(const DetectorGeometry& geometry, double radius) {
  geometry.validate();
  MeasurementSet m;
  m.geometry = geometry;
  m.radius = radius;
  const std::size_t n = geometry.num_measurements();
  m.values.assign(n, 0.0);
  m.view.reserve(n);
  m.detector.reserve(n);
  m.angle_deg.reserve(n);
  for (int v = 0; v < geometry.views; ++v) {
    for (int d = 0; d < geometry.detectors; ++d) {
      m.view.push_back(v);
      m.detector.push_back(d);
      m.angle_deg.push_back(geometry.detector_angle(v, d));
    }
  }
  return m;
}

}  // namespace evobayes
