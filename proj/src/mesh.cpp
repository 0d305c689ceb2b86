#include "evobayes/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

#include "evobayes/errors.hpp"
#include "evobayes/hash.hpp"

namespace evobayes::fem {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Ring {
  double radius;
  int first;   // global index of the ring's first node
  int count;   // number of nodes on the ring
  double phase;  // angular offset in units of the node spacing
};

class SizeField {
 public:
  SizeField(const MeshOptions& o)
      : outer_(o.target_h),
        inner_((o.ir.h > 0.0 && o.ir.h < o.target_h) ? o.ir.h : o.target_h),
        grading_(o.grading),
        fine_radius_(std::min(std::hypot(o.ir.center.x, o.ir.center.y) + o.ir.radius, o.radius)),
        radius_(o.radius) {
    // The boundary count is rounded up to the requested multiple; grade back
    // toward the resulting (possibly smaller) boundary spacing to avoid slivers.
    boundary_count_ = std::max(6, static_cast<int>(std::lround(kTwoPi * o.radius / outer_)));
    boundary_count_ = (boundary_count_ + o.boundary_multiple - 1) / o.boundary_multiple *
                      o.boundary_multiple;
    boundary_h_ = kTwoPi * o.radius / boundary_count_;
  }

  bool graded() const { return inner_ < outer_ || boundary_h_ < outer_ * (1.0 - 1e-9); }
  double inner() const { return inner_; }
  double fine_radius() const { return fine_radius_; }
  int boundary_count() const { return boundary_count_; }

  double at(double r) const {
    if (inner_ < outer_ && r <= fine_radius_ * (1.0 + 1e-12)) return inner_;
    double h = inner_ < outer_ ? std::min(outer_, inner_ + grading_ * (r - fine_radius_)) : outer_;
    return std::min(h, boundary_h_ + grading_ * (radius_ - r));
  }

 private:
  double outer_;
  double inner_;
  double grading_;
  double fine_radius_;
  double radius_;
  int boundary_count_ = 0;
  double boundary_h_ = 0.0;
};

std::vector<double> ring_radii(const MeshOptions& o, const SizeField& size) {
  std::vector<double> radii{0.0};
  const double R = o.radius;
  if (!size.graded()) {
    const int n = std::max(1, static_cast<int>(std::lround(R / o.target_h)));
    for (int i = 1; i <= n; ++i) radii.push_back(R * i / n);
    return radii;
  }
  double r = 0.0;
  if (size.inner() < o.target_h) {
    const double rf = size.fine_radius();
    const int nf = std::max(1, static_cast<int>(std::ceil(rf / size.inner() - 1e-9)));
    for (int i = 1; i <= nf; ++i) radii.push_back(rf * i / nf);
    r = rf;
  }
  if (R - r <= 1e-12 * R) {
    radii.back() = R;
    return radii;
  }
  for (;;) {
    const double hl = size.at(r);
    if (R - r <= 1.5 * hl) {
      if (R - r > hl) radii.push_back(r + 0.5 * (R - r));
      break;
    }
    r += hl;
    radii.push_back(r);
  }
  radii.push_back(R);
  return radii;
}

double ring_angle(const Ring& ring, long m) {
  return kTwoPi * (static_cast<double>(m) + ring.phase) / ring.count;
}

double signed_area(Point a, Point b, Point c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

void add_triangle(const std::vector<Point>& nodes, std::vector<std::array<int, 3>>& tris, int a,
                  int b, int c) {
  const double area = signed_area(nodes[a], nodes[b], nodes[c]);
  if (area == 0.0) throw MeshError("degenerate triangulation: zero-area element");
  if (area < 0.0) std::swap(b, c);
  tris.push_back({a, b, c});
}

// Connects two consecutive rings with a strip of triangles, always advancing
// along whichever ring has the next node at the smaller polar angle.
void stitch(const std::vector<Point>& nodes, std::vector<std::array<int, 3>>& tris, const Ring& in,
            const Ring& out) {
  if (in.count == 1) {
    for (int m = 0; m < out.count; ++m) {
      add_triangle(nodes, tris, in.first, out.first + m, out.first + (m + 1) % out.count);
    }
    return;
  }
  const double start = ring_angle(in, 0);
  const long ob = static_cast<long>(std::ceil(start * out.count / kTwoPi - out.phase - 1e-12));
  long ia = 0;
  long ib = 0;
  auto in_node = [&](long m) { return in.first + static_cast<int>(m % in.count); };
  auto out_node = [&](long m) { return out.first + static_cast<int>((ob + m) % out.count); };
  while (ia < in.count || ib < out.count) {
    const double next_in = ring_angle(in, ia + 1);
    const double next_out = ring_angle(out, ob + ib + 1);
    const bool advance_in = ib == out.count || (ia < in.count && next_in < next_out);
    if (advance_in) {
      add_triangle(nodes, tris, in_node(ia), out_node(ib), in_node(ia + 1));
      ++ia;
    } else {
      add_triangle(nodes, tris, in_node(ia), out_node(ib), out_node(ib + 1));
      ++ib;
    }
  }
}

double max_edge_length(const Mesh& mesh) {
  double h = 0.0;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      h = std::max(h, distance(mesh.nodes[t[e]], mesh.nodes[t[(e + 1) % 3]]));
    }
  }
  return h;
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

bool IrSpec::contains(Point p) const {
  return distance(p, center) <= radius * (1.0 + 1e-9);
}

double Mesh::signed_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return fem::signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
}

std::vector<int> Mesh::ir_nodes() const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < in_ir.size(); ++i) {
    if (in_ir[i]) ids.push_back(static_cast<int>(i));
  }
  return ids;
}

void Mesh::validate(const IrSpec* ir) const {
  if (nodes.empty() || triangles.empty()) throw MeshError("empty mesh");
  if (in_ir.size() != nodes.size()) throw MeshError("IR flag count does not match node count");
  const int n = static_cast<int>(nodes.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    for (int v : triangles[t]) {
      if (v < 0 || v >= n) throw MeshError("triangle references a missing node");
    }
    if (!(signed_area(t) > 0.0)) {
      throw MeshError("triangle " + std::to_string(t) + " has non-positive signed area");
    }
  }
  for (int b : boundary) {
    const double r = std::hypot(nodes[b].x, nodes[b].y);
    if (std::abs(r - radius) > 1e-9) {
      throw MeshError("boundary node " + std::to_string(b) + " is off the disk boundary");
    }
  }
  if (ir != nullptr) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (static_cast<bool>(in_ir[i]) != ir->contains(nodes[i])) {
        throw MeshError("IR flag of node " + std::to_string(i) + " disagrees with the IR geometry");
      }
    }
  }
}

int Mesh::boundary_node_at(double angle_deg, double tol_cm) const {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const Point target{radius * std::cos(a), radius * std::sin(a)};
  int best = -1;
  double best_d = tol_cm;
  for (int b : boundary) {
    const double d = distance(nodes[b], target);
    if (d <= best_d) {
      best_d = d;
      best = b;
    }
  }
  return best;
}

std::string Mesh::hash() const {
  std::string bytes;
  bytes.reserve(nodes.size() * 17 + triangles.size() * 12);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    bytes.append(reinterpret_cast<const char*>(&nodes[i].x), sizeof(double));
    bytes.append(reinterpret_cast<const char*>(&nodes[i].y), sizeof(double));
    bytes.push_back(static_cast<char>(in_ir[i]));
  }
  for (const auto& t : triangles) bytes.append(reinterpret_cast<const char*>(t.data()), sizeof(t));
  return sha1_hex(bytes);
}

Mesh build_disk_mesh(const MeshOptions& o) {
  if (!(o.radius > 0.0)) throw std::invalid_argument("mesh radius must be positive");
  if (!(o.target_h > 0.0 && o.target_h < o.radius)) {
    throw std::invalid_argument("target_h must lie in (0, radius)");
  }
  if (o.boundary_multiple < 1) throw std::invalid_argument("boundary_multiple must be >= 1");
  if (!(o.ir.radius > 0.0)) throw std::invalid_argument("IR radius must be positive");

  const SizeField size(o);
  const std::vector<double> radii = ring_radii(o, size);

  Mesh mesh;
  mesh.radius = o.radius;
  std::vector<Ring> rings;
  rings.push_back({0.0, 0, 1, 0.0});
  mesh.nodes.push_back({0.0, 0.0});
  for (std::size_t i = 1; i < radii.size(); ++i) {
    const bool outermost = i + 1 == radii.size();
    const int count = outermost ? size.boundary_count()
                                : std::max(6, static_cast<int>(std::lround(kTwoPi * radii[i] /
                                                                           size.at(radii[i]))));
    Ring ring{radii[i], static_cast<int>(mesh.nodes.size()), count,
              outermost ? 0.0 : 0.5 * static_cast<double>(i % 2)};
    for (int m = 0; m < count; ++m) {
      const double a = ring_angle(ring, m);
      double x = ring.radius * std::cos(a);
      double y = ring.radius * std::sin(a);
      if (outermost) {
        // Re-project so the node sits on the circle to rounding precision.
        const double s = o.radius / std::hypot(x, y);
        x *= s;
        y *= s;
      }
      mesh.nodes.push_back({x, y});
    }
    rings.push_back(ring);
  }
  for (std::size_t i = 1; i < rings.size(); ++i) stitch(mesh.nodes, mesh.triangles, rings[i - 1], rings[i]);

  const Ring& last = rings.back();
  for (int m = 0; m < last.count; ++m) mesh.boundary.push_back(last.first + m);
  mesh.in_ir.resize(mesh.nodes.size());
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) mesh.in_ir[i] = o.ir.contains(mesh.nodes[i]);
  mesh.h = max_edge_length(mesh);
  mesh.validate(&o.ir);
  return mesh;
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out.precision(17);
  out << mesh.nodes.size() << ' ' << mesh.triangles.size() << '\n';
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    out << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' ' << int(mesh.in_ir[i]) << '\n';
  }
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

Mesh read_mesh(std::istream& in) {
  Mesh mesh;
  std::size_t n_nodes = 0;
  std::size_t n_tris = 0;
  if (!(in >> n_nodes >> n_tris)) throw MeshError("mesh file: bad header");
  mesh.nodes.resize(n_nodes);
  mesh.in_ir.resize(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    int flag = 0;
    if (!(in >> mesh.nodes[i].x >> mesh.nodes[i].y >> flag)) throw MeshError("mesh file: bad node line");
    mesh.in_ir[i] = flag != 0;
  }
  mesh.triangles.resize(n_tris);
  for (auto& t : mesh.triangles) {
    if (!(in >> t[0] >> t[1] >> t[2])) throw MeshError("mesh file: bad triangle line");
  }
  // Boundary = nodes on edges that belong to exactly one triangle.
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& t : mesh.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e];
      const int b = t[(e + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::vector<int> boundary;
  for (const auto& [edge, count] : edge_count) {
    if (count == 1) {
      boundary.push_back(edge.first);
      boundary.push_back(edge.second);
    }
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  auto angle = [&](int i) {
    const double a = std::atan2(mesh.nodes[i].y, mesh.nodes[i].x);
    return a < 0.0 ? a + kTwoPi : a;
  };
  std::sort(boundary.begin(), boundary.end(), [&](int a, int b) { return angle(a) < angle(b); });
  mesh.boundary = std::move(boundary);
  for (int b : mesh.boundary) mesh.radius = std::max(mesh.radius, std::hypot(mesh.nodes[b].x, mesh.nodes[b].y));
  mesh.h = max_edge_length(mesh);
  mesh.validate();
  return mesh;
}

}  // namespace evobayes::fem
