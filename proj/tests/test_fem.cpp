#include <doctest.h>

#include <cmath>
#include <numbers>

#include "evobayes/errors.hpp"
#include "evobayes/fem.hpp"
#include "evobayes/forward.hpp"
#include "mms.hpp"

using namespace evobayes;
using namespace evobayes::fem;

namespace {

Mesh small_umot_mesh() {
  MeshOptions o;
  o.radius = 4.0;
  o.target_h = 0.6;
  o.ir = IrSpec{{0.0, 0.0}, 0.1, 0.05};
  o.boundary_multiple = DetectorGeometry{}.required_boundary_multiple();
  return build_disk_mesh(o);
}

Mesh unit_disk(double h) {
  MeshOptions o;
  o.radius = 1.0;
  o.target_h = h;
  o.ir = IrSpec{{0.0, 0.0}, 0.3, 0.0};
  return build_disk_mesh(o);
}

// Dense assembly through explicit barycentric gradients, independent of the sparse path.
Eigen::MatrixXd dense_operator(const Mesh& m, double kappa, double reaction) {
  const auto n = static_cast<Eigen::Index>(m.num_nodes());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (const auto& t : m.triangles) {
    Eigen::Matrix3d V;
    for (int i = 0; i < 3; ++i) V.row(i) << 1.0, m.nodes[t[i]].x, m.nodes[t[i]].y;
    const double area = 0.5 * std::abs(V.determinant());
    const Eigen::Matrix3d C = V.inverse();  // columns: coefficients of each hat function
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double grad = C(1, i) * C(1, j) + C(2, i) * C(2, j);
        const double mass = area / 12.0 * (i == j ? 2.0 : 1.0);
        K(t[i], t[j]) += kappa * area * grad + reaction * mass;
      }
    }
  }
  const int nb = static_cast<int>(m.boundary.size());
  for (int b = 0; b < nb; ++b) {
    const int i = m.boundary[b];
    const int j = m.boundary[(b + 1) % nb];
    const double len = std::hypot(m.nodes[i].x - m.nodes[j].x, m.nodes[i].y - m.nodes[j].y);
    K(i, i) += len / 2.0;
    K(j, j) += len / 2.0;
  }
  return K;
}

double max_rel_diff(const SparseMatrix& A, const Eigen::MatrixXd& B) {
  const Eigen::MatrixXd D = Eigen::MatrixXd(A) - B;
  return D.cwiseAbs().maxCoeff() / B.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("optical property derived quantities") {
  OpticalProps props;
  CHECK(std::abs(props.kappa() * 3.0 * (0.1 + 8.0) - 1.0) < 1e-12);
  const double theta = 2.5e-7;
  const double expected = 2.0 * 8.0 * props.k0 * props.k0 * 1e-9 * theta;
  CHECK(std::abs(props.brownian(theta) - expected) <= 1e-12 * expected);
  CHECK(props.brownian(0.0) == 0.0);
  UltrasoundConfig us;
  CHECK(us.modulation(0.0) == 0.0);
  CHECK(std::abs(us.modulation(5e-7) - 1.0) < 1e-12);  // half period at 1 MHz
}

TEST_CASE("assembly at zero delay reduces to the absorption-only operator") {
  const Mesh m = unit_disk(0.3);
  OpticalProps props;
  UltrasoundConfig us;
  const auto p = ParameterField::constant(m, 5e-7);
  const auto sys = assemble(m, props, us, p, 0.0, PointSource{m.boundary[0], 1.0});
  const Eigen::MatrixXd oracle = dense_operator(m, props.kappa(), props.mu_a);
  CHECK(max_rel_diff(sys.K, oracle) < 1e-12);
  CHECK(sys.q.sum() == 1.0);
  CHECK(sys.q[m.boundary[0]] == 1.0);
}

TEST_CASE("uniform coefficients match the dense oracle, including the p term") {
  const Mesh m = unit_disk(0.25);
  OpticalProps props;
  UltrasoundConfig us;
  const double theta = 3.75e-7;
  // every node in the IR so a constant p acts as a constant reaction shift
  MeshOptions o;
  o.radius = 1.0;
  o.target_h = 0.25;
  o.ir = IrSpec{{0.0, 0.0}, 1.0, 0.0};
  const Mesh all_ir = build_disk_mesh(o);
  const double pv = 2e-7;
  const auto sys = assemble(all_ir, props, us, ParameterField::constant(all_ir, pv), theta,
                            PointSource{all_ir.boundary[0], 1.0});
  const double reaction = props.mu_a + props.brownian(theta) + us.modulation(theta) * pv;
  CHECK(max_rel_diff(sys.K, dense_operator(all_ir, props.kappa(), reaction)) < 1e-12);
}

TEST_CASE("assembly is linear in p and symmetric") {
  const Mesh m = small_umot_mesh();
  OpticalProps props;
  UltrasoundConfig us;
  const double theta = 2.5e-7;
  const PointSource src{m.boundary[0], 1.0};
  auto p1 = ParameterField::constant(m, 0.0);
  auto p2 = p1;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    p1.values[i] = 1e-7 * (1.0 + 0.1 * static_cast<double>(i % 7));
    p2.values[i] = 3e-7 * (1.0 + 0.05 * static_cast<double>(i % 3));
  }
  auto p12 = p1;
  for (std::size_t i = 0; i < p1.size(); ++i) p12.values[i] += p2.values[i];
  const auto K0 = assemble(m, props, us, ParameterField::constant(m, 0.0), theta, src).K;
  const SparseMatrix K1 = assemble(m, props, us, p1, theta, src).K;
  const SparseMatrix K2 = assemble(m, props, us, p2, theta, src).K;
  const SparseMatrix K12 = assemble(m, props, us, p12, theta, src).K;
  const Eigen::MatrixXd lhs = Eigen::MatrixXd(K12 - K0);
  const Eigen::MatrixXd rhs = Eigen::MatrixXd((K1 - K0) + (K2 - K0));
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12 * Eigen::MatrixXd(K0).cwiseAbs().maxCoeff());
  const Eigen::MatrixXd D = Eigen::MatrixXd(K12);
  CHECK((D - D.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * D.cwiseAbs().maxCoeff());
}

TEST_CASE("assembly rejects non-finite p") {
  const Mesh m = unit_disk(0.5);
  auto p = ParameterField::constant(m, 1e-7);
  p.values[0] = std::nan("");
  CHECK_THROWS_AS(assemble(m, OpticalProps{}, UltrasoundConfig{}, p, 2.5e-7, PointSource{0, 1.0}),
                  AssemblyError);
}

TEST_CASE("manufactured solution converges at second order") {
  const auto s = testing::mms_study();
  CHECK(s.max_residual <= 1e-10);
  for (std::size_t i = 1; i < s.l2_error.size(); ++i) CHECK(s.l2_error[i] < s.l2_error[i - 1]);
  CHECK(s.slope >= 1.6);
  CHECK(s.slope <= 2.4);
}

TEST_CASE("background solve: linearity in source strength and positivity") {
  const Mesh m = small_umot_mesh();
  OpticalProps props;
  UltrasoundConfig us;
  const double theta = 2.5e-7;
  const auto g1 = solve_background(m, props, us, theta, PointSource{m.boundary[0], 1.0});
  const auto g2 = solve_background(m, props, us, theta, PointSource{m.boundary[0], 2.0});
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() <= 1e-12 * g2.cwiseAbs().maxCoeff());
  CHECK(g1.minCoeff() > 0.0);
  const auto sys = assemble(m, props, us, ParameterField::constant(m, 0.0), theta,
                            PointSource{m.boundary[0], 1.0});
  CHECK(relative_residual(sys.K, g1, sys.q) <= 1e-10);
}

TEST_CASE("perturbation solve") {
  const Mesh m = small_umot_mesh();
  OpticalProps props;
  UltrasoundConfig us;
  const PointSource src{m.boundary[0], 1.0};
  const double theta = 2.5e-7;
  const auto G = solve_background(m, props, us, theta, src);

  SUBCASE("p = 0 gives an exactly zero field") {
    const auto gd = solve_perturbation(m, props, us, ParameterField::constant(m, 0.0), theta, G, false);
    CHECK(gd.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("zero delay gives an exactly zero field") {
    const auto G0 = solve_background(m, props, us, 0.0, src);
    const auto gd = solve_perturbation(m, props, us, ParameterField::constant(m, 3e-7), 0.0, G0, false);
    CHECK(gd.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("linearization gap is quadratic in p") {
    // strong amplitude so the gap is well above rounding
    auto gap = [&](double amp) {
      const auto p = ParameterField::constant(m, amp);
      const auto nl = solve_perturbation(m, props, us, p, theta, G, false);
      const auto li = solve_perturbation(m, props, us, p, theta, G, true);
      return (nl - li).norm();
    };
    const double ratio = gap(0.2) / gap(0.1);
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
  }
}

TEST_CASE("trapezoid Fourier weights match brute-force summation") {
  UltrasoundConfig us;
  const auto w = fourier_weights(us);
  REQUIRE(w.size() == 4);
  // f(theta) sampled arbitrarily; prepend f(0) = 0 and integrate panel by panel
  const std::vector<double> f{0.3, -1.2, 0.7, 2.1};
  std::complex<double> brute = 0.0;
  std::vector<double> t{0.0};
  std::vector<std::complex<double>> g{0.0};
  for (std::size_t i = 0; i < 4; ++i) {
    t.push_back(us.theta_samples[i]);
    g.push_back(f[i] * std::exp(std::complex<double>(0.0, -us.omega_a * us.theta_samples[i])));
  }
  for (std::size_t i = 0; i + 1 < t.size(); ++i) brute += 0.5 * (t[i + 1] - t[i]) * (g[i] + g[i + 1]);
  std::complex<double> fast = 0.0;
  for (std::size_t i = 0; i < 4; ++i) fast += w[i] * f[i];
  CHECK(std::abs(fast - brute) <= 1e-12 * std::abs(brute));
}

TEST_CASE("detector geometry") {
  DetectorGeometry g;
  CHECK(g.num_measurements() == 252);
  CHECK(g.detector_angle(0, 10) == doctest::Approx(180.0));
  CHECK(g.detector_angle(1, 10) == doctest::Approx(210.0));
  CHECK(g.detector_angle(0, 0) == doctest::Approx(90.0));
  CHECK(g.required_boundary_multiple() == 120);
}

TEST_CASE("measurement operator") {
  const Mesh m = small_umot_mesh();
  OpticalProps props;
  UltrasoundConfig us;
  DetectorGeometry geo;

  SUBCASE("p = 0 gives exactly zero data of the expected size") {
    const auto ms = measurement_operator(m, props, us, ParameterField::constant(m, 0.0), geo, false);
    CHECK(ms.size() == 252);
    for (double v : ms.values) CHECK(v == 0.0);
  }
  SUBCASE("cached forward model agrees with the reference path") {
    auto p = ParameterField::constant(m, 1e-7);
    for (std::size_t i = 0; i < p.size(); ++i) p.values[i] *= 1.0 + 0.3 * std::sin(0.7 * i);
    for (bool lin : {true, false}) {
      const auto ref = measurement_operator(m, props, us, p, geo, lin);
      const UmotForward fwd(m, props, us, geo, lin);
      const auto fast = fwd(p.values);
      double scale = 0.0;
      for (double v : ref.values) scale = std::max(scale, v);
      REQUIRE(scale > 0.0);
      for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(std::abs(fast[i] - ref.values[i]) <= 1e-9 * scale);
      }
    }
  }
  SUBCASE("deterministic") {
    const auto p = ParameterField::constant(m, 2e-7);
    const auto a = measurement_operator(m, props, us, p, geo, false);
    const auto b = measurement_operator(m, props, us, p, geo, false);
    CHECK(a.values == b.values);
  }
  SUBCASE("unmatched detector angle is a geometry error") {
    DetectorGeometry odd = geo;
    odd.first_source_deg = 1.0;
    CHECK_THROWS_AS(measurement_operator(m, props, us, ParameterField::constant(m, 1e-7), odd, false),
                    GeometryError);
  }
}
