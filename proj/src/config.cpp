#include "evobayes/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "evobayes/errors.hpp"

namespace evobayes {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_d(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

long long to_i(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return x;
}

int to_int(const std::string& key, const std::string& v) { return static_cast<int>(to_i(key, v)); }

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const long long x = to_i(key, v);
  if (x < 0) throw ConfigError(key + ": expected a nonnegative integer");
  return static_cast<std::uint64_t>(x);
}

bool to_b(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_d(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

struct Key {
  std::string name;
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

#define NUM(sec, key, field)                                                             \
  Key {                                                                                  \
    sec "." key, [](AppConfig& c, const std::string& v) { c.field = to_d(sec "." key, v); }, \
        [](const AppConfig& c) { return fmt(c.field); }                                  \
  }
#define INT(sec, key, field)                                                               \
  Key {                                                                                    \
    sec "." key, [](AppConfig& c, const std::string& v) { c.field = to_int(sec "." key, v); }, \
        [](const AppConfig& c) { return std::to_string(c.field); }                         \
  }
#define U64(sec, key, field)                                                               \
  Key {                                                                                    \
    sec "." key, [](AppConfig& c, const std::string& v) { c.field = to_u64(sec "." key, v); }, \
        [](const AppConfig& c) { return std::to_string(c.field); }                         \
  }
#define BOOL(sec, key, field)                                                            \
  Key {                                                                                  \
    sec "." key, [](AppConfig& c, const std::string& v) { c.field = to_b(sec "." key, v); }, \
        [](const AppConfig& c) { return std::string(c.field ? "true" : "false"); }       \
  }

// Applied in this order, whatever the order in the file.
const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      NUM("mesh", "radius", experiment.mesh.radius),
      NUM("mesh", "target_h", experiment.mesh.target_h),
      NUM("mesh", "ir_center_x", experiment.mesh.ir_center.x),
      NUM("mesh", "ir_center_y", experiment.mesh.ir_center.y),
      NUM("mesh", "ir_radius", experiment.mesh.ir_radius),
      NUM("mesh", "ir_h", experiment.mesh.ir_h),
      NUM("mesh", "grading", experiment.mesh.grading),
      NUM("mesh", "data_refine", experiment.mesh.data_refine),

      NUM("optics", "mu_a", experiment.optics.mu_a),
      NUM("optics", "mu_s_prime", experiment.optics.mu_s_prime),
      NUM("optics", "D_B", experiment.optics.D_B),
      Key{"optics.wavelength_cm",
          [](AppConfig& c, const std::string& v) {
            c.experiment.optics.k0 = 2.0 * std::numbers::pi / to_d("optics.wavelength_cm", v);
          },
          [](const AppConfig& c) { return fmt(2.0 * std::numbers::pi / c.experiment.optics.k0); }},

      Key{"ultrasound.frequency_hz",
          [](AppConfig& c, const std::string& v) {
            c.experiment.ultrasound.omega_a = 2.0 * std::numbers::pi * to_d("ultrasound.frequency_hz", v);
          },
          [](const AppConfig& c) { return fmt(c.experiment.ultrasound.omega_a / (2.0 * std::numbers::pi)); }},
      NUM("ultrasound", "c_elasto", experiment.ultrasound.c_elasto),
      Key{"ultrasound.delays",
          [](AppConfig& c, const std::string& v) {
            c.experiment.ultrasound.theta_samples = to_list("ultrasound.delays", v);
          },
          [](const AppConfig& c) { return fmt_list(c.experiment.ultrasound.theta_samples); }},

      Key{"phantom.kind",
          [](AppConfig& c, const std::string& v) {
            const auto kind = scenario::parse_phantom_kind(trim(v));
            if (kind == scenario::PhantomKind::side) c.experiment.phantom = scenario::Phantom::side();
            if (kind == scenario::PhantomKind::central) c.experiment.phantom = scenario::Phantom::central();
            c.experiment.phantom.kind = kind;
          },
          [](const AppConfig& c) { return scenario::to_string(c.experiment.phantom.kind); }},
      NUM("phantom", "background", experiment.phantom.background),
      Key{"phantom.inclusions",
          [](AppConfig& c, const std::string& v) {
            std::vector<scenario::Inclusion> inc;
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ';')) {
              if (trim(item).empty()) continue;
              std::istringstream is(item);
              scenario::Inclusion i;
              std::string extra;
              if (!(is >> i.center.x >> i.center.y >> i.radius >> i.value) || (is >> extra)) {
                throw ConfigError("phantom.inclusions: expected 'x y radius value; ...', got '" + item + "'");
              }
              inc.push_back(i);
            }
            c.experiment.phantom.inclusions = inc;
            c.experiment.phantom.kind = scenario::PhantomKind::custom;
          },
          [](const AppConfig& c) {
            std::string s;
            for (const auto& i : c.experiment.phantom.inclusions) {
              s += (s.empty() ? "" : "; ") + fmt(i.center.x) + " " + fmt(i.center.y) + " " +
                   fmt(i.radius) + " " + fmt(i.value);
            }
            return s;
          }},

      INT("geometry", "detectors", experiment.geometry.detectors),
      NUM("geometry", "span_deg", experiment.geometry.span_deg),
      INT("geometry", "views", experiment.geometry.views),
      NUM("geometry", "step_deg", experiment.geometry.step_deg),
      NUM("geometry", "first_source_deg", experiment.geometry.first_source_deg),

      NUM("data", "noise", experiment.noise),
      U64("data", "seed", experiment.data_seed),

      Key{"solver.scheme",
          [](AppConfig& c, const std::string& v) { c.experiment.solver.scheme = stochastic::parse_scheme(trim(v)); },
          [](const AppConfig& c) { return stochastic::to_string(c.experiment.solver.scheme); }},
      Key{"solver.characterization",
          [](AppConfig& c, const std::string& v) {
            c.experiment.solver.characterization = stochastic::parse_characterization(trim(v));
          },
          [](const AppConfig& c) { return stochastic::to_string(c.experiment.solver.characterization); }},
      INT("solver", "n_E", experiment.solver.n_E),
      NUM("solver", "delta_tau", experiment.solver.delta_tau),
      NUM("solver", "sigma_B", experiment.solver.sigma_B),
      Key{"solver.sigma_eta",
          [](AppConfig& c, const std::string& v) {
            c.experiment.solver.sigma_eta = trim(v) == "auto" ? -1.0 : to_d("solver.sigma_eta", v);
          },
          [](const AppConfig& c) {
            return c.experiment.solver.sigma_eta < 0 ? std::string("auto") : fmt(c.experiment.solver.sigma_eta);
          }},
      Key{"solver.alpha_1",
          [](AppConfig& c, const std::string& v) {
            c.experiment.alpha_1 = trim(v) == "auto" ? -1.0 : to_d("solver.alpha_1", v);
            if (trim(v) != "auto" && c.experiment.alpha_1 < 0) throw ConfigError("solver.alpha_1 must be >= 0");
          },
          [](const AppConfig& c) {
            return c.experiment.alpha_1 < 0 ? std::string("auto") : fmt(c.experiment.alpha_1);
          }},
      BOOL("solver", "rejection", experiment.solver.rejection),
      INT("solver", "max_iters", experiment.solver.max_iters),
      INT("solver", "plateau_window", experiment.solver.plateau_window),
      NUM("solver", "plateau_rel", experiment.solver.plateau_rel),
      NUM("solver", "init_spread", experiment.solver.init_spread),
      U64("solver", "seed", experiment.solver.seed),
      NUM("solver", "ksg_normalization", experiment.solver.ksg_normalization),
      BOOL("solver", "linearized", experiment.linearized),

      NUM("prior", "mean", experiment.prior.mean),
      NUM("prior", "correlation_length", experiment.prior.correlation_length),

      Key{"gn.beta_init",
          [](AppConfig& c, const std::string& v) {
            if (trim(v) == "max_diag") {
              c.experiment.gn.beta_init = gn::BetaInit::max_diag;
            } else {
              c.experiment.gn.beta_init = gn::BetaInit::fixed;
              c.experiment.gn.beta_fixed = to_d("gn.beta_init", v);
            }
          },
          [](const AppConfig& c) {
            return c.experiment.gn.beta_init == gn::BetaInit::max_diag ? std::string("max_diag")
                                                                       : fmt(c.experiment.gn.beta_fixed);
          }},
      NUM("gn", "beta_decay", experiment.gn.beta_decay),
      NUM("gn", "stop_threshold", experiment.gn.stop_threshold),
      INT("gn", "max_iters", experiment.gn.max_iters),
      INT("gn", "max_increases", experiment.gn.max_increases),
      Key{"gn.jacobian",
          [](AppConfig& c, const std::string& v) {
            const std::string t = trim(v);
            if (t == "finite_difference") {
              c.experiment.gn.jacobian_mode = gn::JacobianMode::finite_difference;
            } else if (t == "adjoint") {
              c.experiment.gn.jacobian_mode = gn::JacobianMode::adjoint;
            } else {
              throw ConfigError("gn.jacobian: expected finite_difference or adjoint");
            }
          },
          [](const AppConfig& c) {
            return std::string(c.experiment.gn.jacobian_mode == gn::JacobianMode::adjoint ? "adjoint"
                                                                                          : "finite_difference");
          }},

      INT("diagnostics", "seeds", diagnostics.seeds),
      INT("diagnostics", "stability_iters", diagnostics.stability_iters),
      NUM("diagnostics", "stability_epsilon", diagnostics.stability_epsilon),
      INT("diagnostics", "mc_replicates", diagnostics.mc_replicates),
      INT("diagnostics", "tau_seeds", diagnostics.tau_seeds),
      NUM("diagnostics", "tau_dtau", diagnostics.tau_dtau),
      INT("diagnostics", "tau_iters", diagnostics.tau_iters),
      INT("diagnostics", "tau_reference", diagnostics.tau_reference),
      NUM("diagnostics", "martingale_dtau", diagnostics.martingale_dtau),
      INT("diagnostics", "martingale_tail", diagnostics.martingale_tail),

      NUM("toy", "start", toy.start),
      NUM("toy", "data", toy.data),
      NUM("toy", "prior_std", toy.prior_std),
      NUM("toy", "noise_std", toy.noise_std),
      INT("toy", "n_E", toy.n_E),

      INT("output", "pgm_size", output.pgm_size),
      Key{"output.section",
          [](AppConfig& c, const std::string& v) {
            std::istringstream is(v);
            auto& o = c.output;
            std::string extra;
            if (!(is >> o.section_from.x >> o.section_from.y >> o.section_to.x >> o.section_to.y) ||
                (is >> extra)) {
              throw ConfigError("output.section: expected 'x0 y0 x1 y1'");
            }
          },
          [](const AppConfig& c) {
            const auto& o = c.output;
            return fmt(o.section_from.x) + " " + fmt(o.section_from.y) + " " + fmt(o.section_to.x) + " " +
                   fmt(o.section_to.y);
          }},
      INT("output", "section_samples", output.section_samples),
  };
  return k;
}

#undef NUM
#undef INT
#undef U64
#undef BOOL

}  // namespace

AppConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> values;
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, leaf] : body) values[section + "." + key] = leaf.data();
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not section.key=value");
    values[trim(o.substr(0, eq))] = o.substr(eq + 1);
  }
  std::map<std::string, const Key*> known;
  for (const auto& k : keys()) known[k.name] = &k;
  for (const auto& [name, v] : values) {
    if (!known.count(name)) throw ConfigError("config: unknown key '" + name + "'");
  }
  AppConfig cfg;
  for (const auto& k : keys()) {
    const auto it = values.find(k.name);
    if (it != values.end()) k.set(cfg, it->second);
  }
  cfg.experiment.validate();
  return cfg;
}

AppConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string describe(const AppConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace evobayes
