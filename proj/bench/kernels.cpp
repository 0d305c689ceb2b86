// Serial reference vs OpenMP kernels on the UMOT reconstruction problem.
// Arg 0 selects the variant (0 serial, 1 parallel); results are bit-identical.
#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "evobayes/experiment.hpp"
#include "evobayes/gn.hpp"
#include "evobayes/stochastic.hpp"

using namespace evobayes;
namespace st = evobayes::stochastic;

namespace {

struct Fixture {
  umot::ExperimentConfig cfg;
  fem::Mesh mesh;
  std::unique_ptr<umot::Problem> problem;
  Eigen::MatrixXd particles;
  Eigen::MatrixXd H;

  Fixture() : mesh(umot::reconstruction_mesh(cfg)) {
    const auto data = umot::simulate(cfg, umot::data_mesh(cfg));
    problem = std::make_unique<umot::Problem>(cfg, mesh, data);
    const auto n_p = static_cast<Eigen::Index>(problem->model().num_params());
    std::mt19937_64 g(1);
    std::normal_distribution<double> z;
    particles.resize(n_p, 100);
    for (Eigen::Index i = 0; i < particles.size(); ++i) particles.data()[i] = 1.0 + 0.3 * z(g);
    H = st::evaluate_ensemble(problem->model(), particles, st::Exec::serial);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

st::Exec exec_of(const benchmark::State& s) { return s.range(0) ? st::Exec::parallel : st::Exec::serial; }

void BM_EvaluateEnsemble(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(st::evaluate_ensemble(f.problem->model(), f.particles, exec_of(state)));
  }
}

void BM_KsgUpdate(benchmark::State& state) {
  auto& f = fixture();
  st::Ensemble e{f.particles, 1, {}};
  const Eigen::VectorXd dM = f.problem->data();
  for (auto _ : state) benchmark::DoNotOptimize(st::ksg_update(e, f.H, dM, 1.0, 2.0, exec_of(state)));
}

void BM_LsgUpdate(benchmark::State& state) {
  auto& f = fixture();
  st::Ensemble e{f.particles, 1, {}};
  const Eigen::VectorXd M = f.problem->data();
  for (auto _ : state) benchmark::DoNotOptimize(st::lsg_update(e, f.H, M, 0.01, 3.0, exec_of(state)));
}

void BM_GnJacobian(benchmark::State& state) {
  auto& f = fixture();
  const Eigen::VectorXd p = f.particles.col(0);
  const auto ex = state.range(0) ? gn::Exec::parallel : gn::Exec::serial;
  for (auto _ : state) benchmark::DoNotOptimize(gn::jacobian(f.problem->model(), p, ex));
}

}  // namespace

BENCHMARK(BM_EvaluateEnsemble)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KsgUpdate)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LsgUpdate)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GnJacobian)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
