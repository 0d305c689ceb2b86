#include "evobayes/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "evobayes/errors.hpp"
#include "evobayes/forward.hpp"
#include "evobayes/rng.hpp"

namespace evobayes::scenario {

Phantom Phantom::side() {
  Phantom p;
  p.kind = PhantomKind::side;
  p.inclusions = {Inclusion{{0.0, 0.06}, 0.03, 2e-7}, Inclusion{{0.0, -0.06}, 0.03, 3e-7}};
  return p;
}

Phantom Phantom::central() {
  Phantom p;
  p.kind = PhantomKind::central;
  p.inclusions = {Inclusion{{0.0, 0.0}, 0.03, 3e-7}};
  return p;
}

void Phantom::validate(const fem::IrSpec& ir) const {
  if (!(background >= 0)) throw ConfigError("phantom background must be nonnegative");
  for (const auto& inc : inclusions) {
    if (!(inc.value >= 0)) throw ConfigError("inclusion value must be nonnegative");
    if (!(inc.radius > 0)) throw ConfigError("inclusion radius must be positive");
    if (fem::distance(inc.center, ir.center) + inc.radius > ir.radius * (1.0 + 1e-9)) {
      throw ConfigError("inclusion does not lie inside the insonified region");
    }
  }
}

double Phantom::value_at(fem::Point p) const {
  double v = background;
  for (const auto& inc : inclusions) {
    if (fem::distance(p, inc.center) <= inc.radius * (1.0 + 1e-9)) v = inc.value;
  }
  return v;
}

PhantomKind parse_phantom_kind(const std::string& s) {
  if (s == "side" || s == "side_inhomogeneity") return PhantomKind::side;
  if (s == "central" || s == "central_inhomogeneity") return PhantomKind::central;
  if (s == "custom") return PhantomKind::custom;
  throw ConfigError("unknown phantom kind '" + s + "'");
}

std::string to_string(PhantomKind k) {
  switch (k) {
    case PhantomKind::side: return "side";
    case PhantomKind::central: return "central";
    case PhantomKind::custom: return "custom";
  }
  return "?";
}

fem::ParameterField rasterize_phantom(const Phantom& phantom, const fem::Mesh& mesh) {
  fem::ParameterField f;
  f.nodes = mesh.ir_nodes();
  f.values.reserve(f.nodes.size());
  for (int n : f.nodes) f.values.push_back(phantom.value_at(mesh.nodes[n]));
  return f;
}

void add_noise(MeasurementSet& m, double noise_frac, std::uint64_t seed) {
  if (!(noise_frac >= 0)) throw ConfigError("noise fraction must be nonnegative");
  m.noise_frac = noise_frac;
  m.seed = seed;
  if (noise_frac == 0.0) return;
  const auto per_view = static_cast<std::size_t>(m.geometry.detectors);
  for (int v = 0; v < m.geometry.views; ++v) {
    NormalStream s(seed, 7, static_cast<std::uint32_t>(v));
    for (std::size_t d = 0; d < per_view; ++d) {
      double& x = m.values[static_cast<std::size_t>(v) * per_view + d];
      x *= 1.0 + noise_frac * s();
    }
  }
}

MeasurementSet generate_data(const Phantom& phantom, const fem::Mesh& fine_mesh,
                             const fem::OpticalProps& props, const fem::UltrasoundConfig& us,
                             const DetectorGeometry& geometry, double noise_frac,
                             std::uint64_t seed, DataStatus* status) {
  const fem::UmotForward fwd(fine_mesh, props, us, geometry, false);
  const auto p = rasterize_phantom(phantom, fine_mesh);
  MeasurementSet m = MeasurementSet::layout(geometry, fine_mesh.radius);
  m.mesh_hash = fine_mesh.hash();
  fwd.evaluate(p.values, m.values);
  bool zero = true;
  for (double v : m.values) zero = zero && v == 0.0;
  if (status != nullptr) status->all_zero = zero;
  add_noise(m, noise_frac, seed);
  return m;
}

void check_distinct_meshes(const std::string& data_hash, const std::string& recon_hash,
                           bool allow_same) {
  if (!allow_same && data_hash == recon_hash) {
    throw GeometryError(
        "data and reconstruction meshes are identical (inverse crime); pass the override to allow");
  }
}

void check_distinct_meshes(const fem::Mesh& data_mesh, const fem::Mesh& recon_mesh, bool allow_same) {
  check_distinct_meshes(data_mesh.hash(), recon_mesh.hash(), allow_same);
}

void write_measurements(std::ostream& out, const MeasurementSet& m) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "# radius_cm=" << num(m.radius) << '\n';
  out << "# detectors=" << m.geometry.detectors << '\n';
  out << "# span_deg=" << num(m.geometry.span_deg) << '\n';
  out << "# views=" << m.geometry.views << '\n';
  out << "# step_deg=" << num(m.geometry.step_deg) << '\n';
  out << "# first_source_deg=" << num(m.geometry.first_source_deg) << '\n';
  out << "# noise_frac=" << num(m.noise_frac) << '\n';
  out << "# seed=" << m.seed << '\n';
  out << "# mesh_hash=" << m.mesh_hash << '\n';
  out << "view,detector,angle_deg,value\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.view[i] << ',' << m.detector[i] << ',' << num(m.angle_deg[i]) << ',' << num(m.values[i])
        << '\n';
  }
}

MeasurementSet read_measurements(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::string line;
  bool header = false;
  struct Row {
    int view, detector;
    double angle, value;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      meta[key] = line.substr(eq + 1);
      continue;
    }
    if (!header) {
      if (line.rfind("view,detector,angle_deg,value", 0) != 0) {
        throw ConfigError("measurement file: missing column header");
      }
      header = true;
      continue;
    }
    Row r{};
    char c1, c2, c3;
    std::istringstream ls(line);
    if (!(ls >> r.view >> c1 >> r.detector >> c2 >> r.angle >> c3 >> r.value) || c1 != ',' ||
        c2 != ',' || c3 != ',') {
      throw ConfigError("measurement file: bad row '" + line + "'");
    }
    rows.push_back(r);
  }
  auto need = [&](const std::string& k) {
    const auto it = meta.find(k);
    if (it == meta.end()) throw ConfigError("measurement file: missing metadata '" + k + "'");
    return it->second;
  };
  DetectorGeometry g;
  g.detectors = std::stoi(need("detectors"));
  g.span_deg = std::stod(need("span_deg"));
  g.views = std::stoi(need("views"));
  g.step_deg = std::stod(need("step_deg"));
  if (meta.count("first_source_deg")) g.first_source_deg = std::stod(meta["first_source_deg"]);
  MeasurementSet m = MeasurementSet::layout(g, std::stod(need("radius_cm")));
  m.noise_frac = std::stod(need("noise_frac"));
  m.seed = std::stoull(need("seed"));
  m.mesh_hash = need("mesh_hash");
  if (rows.size() != m.size()) throw ConfigError("measurement file: row count does not match geometry");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].view != m.view[i] || rows[i].detector != m.detector[i]) {
      throw ConfigError("measurement file: rows out of order");
    }
    if (!std::isfinite(rows[i].value)) throw ConfigError("measurement file: non-finite value");
    m.values[i] = rows[i].value;
  }
  return m;
}

void check_geometry(const MeasurementSet& data, const DetectorGeometry& g, double radius) {
  std::ostringstream diff;
  auto cmp = [&](const char* name, double a, double b) {
    if (std::abs(a - b) > 1e-9 * std::max(1.0, std::abs(b))) {
      diff << "  " << name << ": data=" << a << " config=" << b << '\n';
    }
  };
  cmp("radius_cm", data.radius, radius);
  cmp("detectors", data.geometry.detectors, g.detectors);
  cmp("span_deg", data.geometry.span_deg, g.span_deg);
  cmp("views", data.geometry.views, g.views);
  cmp("step_deg", data.geometry.step_deg, g.step_deg);
  cmp("first_source_deg", data.geometry.first_source_deg, g.first_source_deg);
  if (!diff.str().empty()) {
    throw GeometryError("data geometry does not match the configuration:\n" + diff.str());
  }
}

}  // namespace evobayes::scenario
