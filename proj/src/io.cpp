#include "evobayes/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "evobayes/errors.hpp"

namespace evobayes::io {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_field_csv(std::ostream& out, const fem::ParameterField& f) {
  out << "node_index,p_value_cm2\n";
  for (std::size_t i = 0; i < f.size(); ++i) out << f.nodes[i] << ',' << format_double(f.values[i]) << '\n';
}

void write_history_csv(std::ostream& out, const ReconstructionResult& r) {
  out << "k,chi_mean,chi_min,alpha,accept_frac,ensemble_spread\n";
  for (const auto& h : r.history) {
    out << h.k << ',' << format_double(h.chi_mean) << ',' << format_double(h.chi_min) << ','
        << format_double(h.alpha) << ',' << format_double(h.accept_frac) << ',' << format_double(h.spread)
        << '\n';
  }
}

void write_gn_history_csv(std::ostream& out, const std::vector<gn::GnRecord>& log) {
  out << "k,chi,beta,chi_next,step_norm,beta_halved\n";
  for (const auto& r : log) {
    out << r.k << ',' << format_double(r.chi) << ',' << format_double(r.beta) << ','
        << format_double(r.chi_next) << ',' << format_double(r.step_norm) << ',' << (r.decreased ? 1 : 0)
        << '\n';
  }
}

FieldSampler::FieldSampler(const fem::Mesh& mesh, const fem::ParameterField& field)
    : mesh_(mesh), nodal_(field.expand(mesh.num_nodes())) {
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    if (mesh.in_ir[tri[0]] || mesh.in_ir[tri[1]] || mesh.in_ir[tri[2]]) tris_.push_back(t);
  }
}

double FieldSampler::operator()(fem::Point p) const {
  for (std::size_t t : tris_) {
    const auto& tri = mesh_.triangles[t];
    const fem::Point a = mesh_.nodes[tri[0]], b = mesh_.nodes[tri[1]], c = mesh_.nodes[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    const double l0 = 1.0 - l1 - l2;
    const double eps = -1e-12;
    if (l0 >= eps && l1 >= eps && l2 >= eps) {
      return l0 * nodal_[tri[0]] + l1 * nodal_[tri[1]] + l2 * nodal_[tri[2]];
    }
  }
  return 0.0;
}

void write_pgm(std::ostream& out, const FieldSampler& f, fem::Point center, double half_width, int size,
               double max_value) {
  if (size < 2) throw ConfigError("PGM size must be at least 2");
  std::vector<double> v(static_cast<std::size_t>(size) * static_cast<std::size_t>(size));
  const double step = 2.0 * half_width / (size - 1);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      // row 0 is the top of the image
      const fem::Point p{center.x - half_width + c * step, center.y + half_width - r * step};
      v[static_cast<std::size_t>(r) * size + c] = f(p);
    }
  }
  double top = max_value;
  if (!(top > 0)) top = *std::max_element(v.begin(), v.end());
  out << "P5\n" << size << ' ' << size << "\n255\n";
  for (double x : v) {
    const double s = top > 0 ? std::clamp(x / top, 0.0, 1.0) : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * s))));
  }
}

void write_cross_section_csv(std::ostream& out, const FieldSampler& f, fem::Point a, fem::Point b,
                             int samples) {
  if (samples < 2) throw ConfigError("cross-section needs at least two samples");
  out << "arclength_cm,p_value\n";
  const double len = fem::distance(a, b);
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    const fem::Point p{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    out << format_double(t * len) << ',' << format_double(f(p)) << '\n';
  }
}

void write_manifest(std::ostream& out, const Manifest& m) {
  for (const auto& [k, v] : m) out << k << " = " << v << '\n';
}

void write_file_atomic(const std::filesystem::path& dir, const std::string& name, const std::string& content) {
  const auto target = dir / name;
  const auto tmp = dir / ("." + name + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace evobayes::io
