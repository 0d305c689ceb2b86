#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace evobayes::fem {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

/// Insonified region: a disk (the 2D cross-section of the focal zone at its waist).
/// `h` is the element size used inside the region; 0 means "same as the outer size".
struct IrSpec {
  Point center{};
  double radius = 0.1;
  double h = 0.0;

  bool contains(Point p) const;
};

struct MeshOptions {
  double radius = 4.0;
  double target_h = 0.4;
  IrSpec ir{};
  /// Boundary node count is rounded up to a multiple of this, so that a fixed
  /// angular lattice (detectors, sources) lands exactly on nodes.
  int boundary_multiple = 1;
  /// Growth rate of the element size away from the refined zone (cm per cm).
  double grading = 0.3;
};

/// Triangulated disk with nodal insonified-region flags.
///
/// Nodes are laid out on concentric rings; ring 0 is the center. Triangles are
/// counter-clockwise. Boundary nodes are listed in increasing polar angle.
class Mesh {
 public:
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> boundary;
  std::vector<std::uint8_t> in_ir;
  double radius = 0.0;
  double h = 0.0;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double signed_area(std::size_t t) const;

  /// Global indices of nodes flagged as inside the insonified region, ascending.
  std::vector<int> ir_nodes() const;

  /// Throws MeshError when any structural invariant is violated.
  void validate(const IrSpec* ir = nullptr) const;

  /// Boundary node whose polar angle (degrees) matches `angle_deg`, or -1 when no
  /// node is within `tol_cm` of the corresponding boundary point.
  int boundary_node_at(double angle_deg, double tol_cm = 1e-6) const;

  /// Content hash of coordinates, connectivity and flags (hex SHA-1).
  std::string hash() const;
};

/// Ring-based triangulation of a disk, refined inside the insonified region.
Mesh build_disk_mesh(const MeshOptions& options);

/// Plain-text export: header `n_nodes n_triangles`, then `x y ir_flag` per node,
/// then `i j k` per triangle (0-based).
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in);

}  // namespace evobayes::fem
