// Batch front end: generate-data, reconstruct, diagnose, toy.
#include <CLI11.hpp>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "evobayes/config.hpp"
#include "evobayes/diagnostics.hpp"
#include "evobayes/errors.hpp"
#include "evobayes/experiment.hpp"
#include "evobayes/hash.hpp"
#include "evobayes/io.hpp"

namespace fs = std::filesystem;
using namespace evobayes;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::int64_t seed = -1;
  int threads = 0;
};

// Exit code 1: an assertion in a diagnostic suite failed.
class AssertionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

AppConfig load(const Common& c, std::string* text) {
  *text = c.config_path.empty() ? std::string() : read_text(c.config_path);
  return parse_config(*text, c.overrides);
}

fs::path prepare_out(const Common& c) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  return dir;
}

io::Manifest manifest(const Common& c, const std::string& command, const std::string& text,
                      const AppConfig& cfg, std::uint64_t seed) {
  io::Manifest m;
  m.emplace_back("command", command);
  m.emplace_back("config_path", c.config_path.empty() ? "(built-in defaults)" : c.config_path);
  m.emplace_back("config_hash", git_blob_hash(text));
  std::string ov;
  for (const auto& o : c.overrides) ov += (ov.empty() ? "" : " ") + o;
  m.emplace_back("overrides", ov);
  m.emplace_back("effective_config_hash", git_blob_hash(describe(cfg)));
  m.emplace_back("seed", std::to_string(seed));
  m.emplace_back("out_dir", c.out_dir);
  return m;
}

void put(const fs::path& dir, const std::string& name, const std::string& content) {
  io::write_file_atomic(dir, name, content);
}

template <class F>
std::string render(F&& f) {
  std::ostringstream o;
  f(o);
  return o.str();
}

void write_manifest(const fs::path& dir, const io::Manifest& m) {
  put(dir, "manifest.txt", render([&](std::ostream& o) { io::write_manifest(o, m); }));
}

int cmd_generate(const Common& c, double noise) {
  std::string text;
  AppConfig cfg = load(c, &text);
  auto& e = cfg.experiment;
  if (c.seed >= 0) e.data_seed = static_cast<std::uint64_t>(c.seed);
  if (noise >= 0) e.noise = noise;
  e.validate();
  const auto dir = prepare_out(c);
  auto m = manifest(c, "generate-data", text, cfg, e.data_seed);
  m.emplace_back("phantom", scenario::to_string(e.phantom.kind));
  m.emplace_back("noise", io::format_double(e.noise));
  write_manifest(dir, m);

  const fem::Mesh fine = umot::data_mesh(e);
  scenario::DataStatus status;
  const MeasurementSet data = umot::simulate(e, fine, &status);
  if (status.all_zero) std::cerr << "warning: all clean measurements are zero\n";
  put(dir, "measurements.csv", render([&](std::ostream& o) { scenario::write_measurements(o, data); }));
  const auto truth = scenario::rasterize_phantom(e.phantom, fine);
  put(dir, "truth_field.csv", render([&](std::ostream& o) { io::write_field_csv(o, truth); }));
  const io::FieldSampler s(fine, truth);
  put(dir, "truth.pgm", render([&](std::ostream& o) {
        io::write_pgm(o, s, e.mesh.ir_center, e.mesh.ir_radius, cfg.output.pgm_size);
      }));
  std::cout << "wrote " << data.size() << " measurements (data mesh " << fine.num_nodes() << " nodes) to "
            << dir.string() << "\n";
  return 0;
}

std::string metrics_text(const umot::Problem& pb, const AppConfig& cfg, const Eigen::VectorXd& est) {
  const auto& ph = cfg.experiment.phantom;
  const auto f = pb.physical(est);
  const auto t = scenario::rasterize_phantom(ph, pb.mesh());
  const auto m = diagnostics::error_metrics(pb.ir_points(), f.values, t.values, ph);
  std::ostringstream o;
  o << "# against the configured phantom (" << scenario::to_string(ph.kind) << ")\n";
  o << "rel_l2 = " << io::format_double(m.rel_l2) << "\n";
  o << "background_mean_cm2 = " << io::format_double(m.background) << "\n";
  o << "background_rms_rel = " << io::format_double(m.background_rms) << "\n";
  for (std::size_t i = 0; i < m.inclusions.size(); ++i) {
    const auto& im = m.inclusions[i];
    o << "inclusion" << i << ".peak_cm2 = " << io::format_double(im.peak) << "\n";
    o << "inclusion" << i << ".peak_distance_cm = " << io::format_double(im.distance) << "\n";
    o << "inclusion" << i << ".contrast = " << io::format_double(im.contrast) << "\n";
    o << "inclusion" << i << ".true_contrast = " << io::format_double(im.true_contrast) << "\n";
  }
  return o.str();
}

int cmd_reconstruct(const Common& c, const std::string& data_path, const std::string& scheme, bool rs,
                    const std::string& characterization, bool allow_same) {
  std::string text;
  AppConfig cfg = load(c, &text);
  auto& e = cfg.experiment;
  const bool use_gn = scheme == "gn";
  if (!scheme.empty() && !use_gn) e.solver.scheme = stochastic::parse_scheme(scheme);
  if (rs) e.solver.rejection = true;
  if (!characterization.empty()) e.solver.characterization = stochastic::parse_characterization(characterization);
  if (c.seed >= 0) e.solver.seed = static_cast<std::uint64_t>(c.seed);
  e.validate();

  std::ifstream df(data_path);
  if (!df) throw ConfigError("cannot read data file '" + data_path + "'");
  const MeasurementSet data = scenario::read_measurements(df);
  scenario::check_geometry(data, e.geometry, e.mesh.radius);
  const fem::Mesh mesh = umot::reconstruction_mesh(e);
  scenario::check_distinct_meshes(data.mesh_hash, mesh.hash(), allow_same);

  const auto dir = prepare_out(c);
  const auto solver = e.solver_config();
  auto m = manifest(c, "reconstruct", text, cfg, e.solver.seed);
  m.emplace_back("data_path", data_path);
  m.emplace_back("data_hash", git_blob_hash(read_text(data_path)));
  m.emplace_back("scheme", use_gn ? "gn" : stochastic::to_string(solver.scheme));
  m.emplace_back("rejection", solver.rejection ? "true" : "false");
  m.emplace_back("characterization", stochastic::to_string(solver.characterization));
  m.emplace_back("alpha_1", io::format_double(solver.alpha_1));
  m.emplace_back("mesh_nodes", std::to_string(mesh.num_nodes()));
  write_manifest(dir, m);

  const umot::Problem pb(e, mesh, data);
  ReconstructionResult res;
  if (use_gn) {
    auto g = umot::reconstruct_gn(pb, e);
    put(dir, "gn_history.csv", render([&](std::ostream& o) { io::write_gn_history_csv(o, g.log); }));
    res = std::move(g.result);
  } else {
    res = umot::reconstruct_stochastic(pb, e);
  }
  const auto field = pb.physical(res.estimate);
  put(dir, "field.csv", render([&](std::ostream& o) { io::write_field_csv(o, field); }));
  put(dir, "history.csv", render([&](std::ostream& o) { io::write_history_csv(o, res); }));
  const io::FieldSampler s(mesh, field);
  put(dir, "recon.pgm", render([&](std::ostream& o) {
        io::write_pgm(o, s, e.mesh.ir_center, e.mesh.ir_radius, cfg.output.pgm_size);
      }));
  fem::Point a = cfg.output.section_from, b = cfg.output.section_to;
  if (a.x == b.x && a.y == b.y) {
    a = {e.mesh.ir_center.x, e.mesh.ir_center.y - e.mesh.ir_radius};
    b = {e.mesh.ir_center.x, e.mesh.ir_center.y + e.mesh.ir_radius};
  }
  put(dir, "cross_section.csv", render([&](std::ostream& o) {
        io::write_cross_section_csv(o, s, a, b, cfg.output.section_samples);
      }));
  const std::string metrics = metrics_text(pb, cfg, res.estimate);
  put(dir, "metrics.txt", metrics);
  std::cout << (use_gn ? "gn" : stochastic::to_string(solver.scheme)) << ": " << res.iterations()
            << " iterations, stop " << res.stop_reason << "\n"
            << metrics;
  return 0;
}

int cmd_diagnose(const Common& c, const std::string& suite) {
  const std::vector<std::string> all{"stability", "mc_rate", "tau_order", "martingale"};
  std::vector<std::string> suites;
  if (suite == "all") {
    suites = all;
  } else if (std::find(all.begin(), all.end(), suite) != all.end()) {
    suites = {suite};
  } else {
    throw CLI::ValidationError("--suite", "unknown suite '" + suite + "'");
  }
  std::string text;
  const AppConfig cfg = load(c, &text);
  const auto& d = cfg.diagnostics;
  const std::uint64_t seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 1;
  const auto dir = prepare_out(c);
  auto m = manifest(c, "diagnose", text, cfg, seed);
  m.emplace_back("suite", suite);
  write_manifest(dir, m);

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < d.seeds; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));
  std::string summary;
  bool ok = true;
  for (const auto& s : suites) {
    if (s == "stability") {
      auto toy = diagnostics::ScalarToy::standard();
      toy.data = 1.0;
      toy.start = 0.0;
      const auto r = diagnostics::stability_experiment(toy, {1.0, 0.25, 0.0625},
                                                       d.stability_epsilon * std::abs(toy.data), seeds,
                                                       d.stability_iters);
      put(dir, "stability.csv", render([&](std::ostream& o) {
            o << "dtau,seed,discrepancy,bound\n";
            for (std::size_t i = 0; i < r.dtau.size(); ++i) {
              for (std::size_t j = 0; j < r.seeds.size(); ++j) {
                o << io::format_double(r.dtau[i]) << ',' << r.seeds[j] << ','
                  << io::format_double(r.discrepancy[i][j]) << ',' << io::format_double(r.bound[i][j]) << '\n';
              }
            }
          }));
      summary += diagnostics::to_text(r);
      ok = ok && r.monotone && r.bound_fraction >= 0.9;
    } else if (s == "mc_rate") {
      const auto r = diagnostics::mc_convergence_experiment(diagnostics::LinearGaussian{}, {16, 64, 256, 1024},
                                                            d.mc_replicates, seed);
      put(dir, "mc_rate.csv", render([&](std::ostream& o) {
            o << "n_E,replicate,abs_error\n";
            for (std::size_t i = 0; i < r.grid.size(); ++i) {
              for (std::size_t j = 0; j < r.errors[i].size(); ++j) {
                o << r.grid[i] << ',' << j << ',' << io::format_double(r.errors[i][j]) << '\n';
              }
            }
          }));
      summary += diagnostics::to_text(r);
      ok = ok && r.slope >= -0.7 && r.slope <= -0.3 && r.paired_fraction >= 0.9;
    } else if (s == "tau_order") {
      std::vector<std::uint64_t> ts;
      for (int i = 0; i < d.tau_seeds; ++i) ts.push_back(seed + static_cast<std::uint64_t>(i));
      const auto r = diagnostics::tau_order_experiment(diagnostics::ScalarToy::coupled(), d.tau_dtau,
                                                       d.tau_iters, {4, 16}, d.tau_reference, ts);
      put(dir, "tau_order.csv", render([&](std::ostream& o) {
            o << "seed,err_dtau,err_dtau_4,err_dtau_16\n";
            for (std::size_t j = 0; j < ts.size(); ++j) {
              o << ts[j] << ',' << io::format_double(r.error[0][j]) << ',' << io::format_double(r.error[1][j])
                << ',' << io::format_double(r.error[2][j]) << '\n';
            }
          }));
      const bool pass = r.median_contraction[0] >= 1.5 && r.median_contraction[1] >= r.median_contraction[0];
      summary += diagnostics::to_text(r) + "  contraction>=1.5 and monotone " + (pass ? "PASS" : "FAIL") + "\n";
      ok = ok && pass;
    } else if (s == "martingale") {
      const auto r0 = diagnostics::version1_toy_check(seed, d.martingale_tail, d.martingale_dtau);
      const auto r1 = diagnostics::version1_toy_check(seed, d.martingale_tail, d.martingale_dtau, 0.7);
      put(dir, "martingale.csv", render([&](std::ostream& o) {
            o << "case,n,mean,expected,std_error,lag1,lag2,mean_ok,correlation_ok\n";
            for (const auto* r : {&r0, &r1}) {
              o << (r == &r0 ? "p_star_0" : "p_star_0.7") << ',' << r->n << ',' << io::format_double(r->mean)
                << ',' << io::format_double(r->expected) << ',' << io::format_double(r->std_error) << ','
                << io::format_double(r->lag1) << ',' << io::format_double(r->lag2) << ',' << r->mean_ok << ','
                << r->correlation_ok << '\n';
            }
          }));
      summary += diagnostics::to_text(r0) + diagnostics::to_text(r1);
      ok = ok && r0.mean_ok && r0.correlation_ok && r1.mean_ok;
    }
  }
  summary += std::string("overall ") + (ok ? "PASS" : "FAIL") + "\n";
  put(dir, "summary.txt", summary);
  std::cout << summary;
  if (!ok) throw AssertionFailure("diagnostic assertions failed");
  return 0;
}

int cmd_toy(const Common& c, const std::string& problem, const std::string& scheme) {
  std::string text;
  const AppConfig cfg = load(c, &text);
  const auto& t = cfg.toy;
  const std::uint64_t seed = c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 1;
  const auto dir = prepare_out(c);
  auto m = manifest(c, "toy", text, cfg, seed);
  m.emplace_back("problem", problem);
  write_manifest(dir, m);
  std::ostringstream summary;
  if (problem == "quadratic") {
    stochastic::SolverConfig sc;
    sc.scheme = stochastic::parse_scheme(scheme);
    sc.seed = seed;
    sc.record_means = true;
    const LinearForward F(Eigen::MatrixXd::Identity(1, 1));
    const auto r = stochastic::run(F, Eigen::VectorXd::Constant(1, t.data), sc, Eigen::VectorXd::Constant(1, t.start));
    put(dir, "history.csv", render([&](std::ostream& o) { io::write_history_csv(o, r); }));
    put(dir, "means.csv", render([&](std::ostream& o) {
          o << "k,mean\n";
          for (std::size_t k = 0; k < r.mean_history.size(); ++k) {
            o << k + 1 << ',' << io::format_double(r.mean_history[k][0]) << '\n';
          }
        }));
    summary << "quadratic toy (" << scheme << "): start " << t.start << ", data " << t.data << ", "
            << r.iterations() << " iterations (" << r.stop_reason << "), final mean "
            << io::format_double(r.estimate[0]) << "\n";
  } else if (problem == "linear_gaussian") {
    diagnostics::LinearGaussian lg;
    lg.prior_mean = t.start;
    lg.prior_std = t.prior_std;
    lg.observation = t.data;
    lg.noise_std = t.noise_std;
    const double est = diagnostics::lsg_posterior_mean(lg, t.n_E, seed);
    summary << "linear_gaussian: n_E " << t.n_E << ", LSG mean " << io::format_double(est) << ", Kalman mean "
            << io::format_double(lg.posterior_mean()) << ", relative difference "
            << io::format_double(std::abs(est - lg.posterior_mean()) / std::abs(lg.posterior_mean())) << "\n";
  } else {
    throw CLI::ValidationError("--problem", "unknown toy problem '" + problem + "'");
  }
  put(dir, "summary.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary Bayesian (KSG/LSG) and Gauss-Newton reconstruction for UMOT"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "INI config file (defaults built in)");
    sub->add_option("--set", c.overrides, "Override a config key: section.key=value")->take_all();
    sub->add_option("--out", c.out_dir, "Output directory")->required();
    sub->add_option("--seed", c.seed, "Seed (data seed for generate-data, solver seed otherwise)");
    sub->add_option("--threads", c.threads, "Cap on worker threads (results do not depend on it)");
  };

  auto* gen = app.add_subcommand("generate-data", "Simulate noisy measurements on the fine mesh");
  add_common(gen);
  double noise = -1.0;
  gen->add_option("--noise", noise, "Noise fraction (overrides data.noise)");

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct p from a measurement file");
  add_common(rec);
  std::string data_path, scheme, characterization;
  bool rs = false, allow_same = false;
  rec->add_option("--data", data_path, "measurements.csv from generate-data")->required();
  rec->add_option("--scheme", scheme, "ksg | lsg | gn")->check(CLI::IsMember({"ksg", "lsg", "gn"}));
  rec->add_flag("--rs", rs, "Rejection strategy");
  rec->add_option("--characterization", characterization, "plain | augmented_sum | augmented_componentwise");
  rec->add_flag("--allow-same-mesh", allow_same, "Permit data generated on the reconstruction mesh");

  auto* diag = app.add_subcommand("diagnose", "Numerical checks of the stability and convergence claims");
  add_common(diag);
  std::string suite = "all";
  diag->add_option("--suite", suite, "stability | mc_rate | tau_order | martingale | all");

  auto* toy = app.add_subcommand("toy", "Scalar demonstrations");
  add_common(toy);
  std::string problem = "quadratic", toy_scheme = "ksg";
  toy->add_option("--problem", problem, "quadratic | linear_gaussian");
  toy->add_option("--scheme", toy_scheme, "ksg | lsg (quadratic)")->check(CLI::IsMember({"ksg", "lsg"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (c.threads > 0) omp_set_num_threads(c.threads);

  try {
    if (gen->parsed()) return cmd_generate(c, noise);
    if (rec->parsed()) return cmd_reconstruct(c, data_path, scheme, rs, characterization, allow_same);
    if (diag->parsed()) return cmd_diagnose(c, suite);
    if (toy->parsed()) return cmd_toy(c, problem, toy_scheme);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return 2;
  } catch (const AssertionFailure& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
