#include <benchmark/benchmark.h>

#include "koopman/dynamics.hpp"
#include "koopman/linalg.hpp"
#include "koopman/objectives.hpp"
#include "koopman/rng.hpp"
#include "koopman/train.hpp"
#include "koopman/uncertainty.hpp"

using namespace koopman;

namespace {

Matrix random_square(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(n, n);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    return m;
}

void BM_Matexp(benchmark::State& state) {
    const Matrix a = random_square(static_cast<std::size_t>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(matexp(a, 2.0));
}
BENCHMARK(BM_Matexp)->Arg(4)->Arg(20)->Arg(50);

void BM_Eigenvalues(benchmark::State& state) {
    const Matrix a = random_square(static_cast<std::size_t>(state.range(0)), 2);
    for (auto _ : state) benchmark::DoNotOptimize(eigenvalues(a));
}
BENCHMARK(BM_Eigenvalues)->Arg(4)->Arg(20)->Arg(50);

void BM_OuCovariance(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    StableKoopman k;
    for (std::size_t i = 0; i < n; ++i) k.sigma.push_back(0.5 + 0.1 * i);
    for (std::size_t i = 0; i + 1 < n; ++i) k.zeta.push_back(0.3);
    const Matrix a = assemble_K(k);
    const Matrix lam = Matrix::identity(n);
    for (auto _ : state) benchmark::DoNotOptimize(ou_covariance(a, lam, 1.5));
}
BENCHMARK(BM_OuCovariance)->Arg(3)->Arg(10);

struct LossFixture {
    KoopmanModel model;
    TrainingSet diff;
    TrainingSet traj;

    LossFixture() {
        TrainConfig c;
        c.layers = parse_widths("2-8-16-16-8-2-8-16-16-8-2");
        const Dataset d = make_diff_dataset(fixed_point_system(), lhs_sample({{-0.5, 0.5}, {-0.5, 0.5}}, 128, 3));
        model = initialize_model(c, d);
        diff = prepare_training_set(c, d, model.normalizer);
        TrainConfig r = c;
        r.form = Form::recurrent;
        r.window_length = 20;
        std::vector<Trajectory> trs;
        for (int i = 0; i < 8; ++i) {
            const double x0[2] = {0.4 - 0.1 * i, -0.4 + 0.05 * i};
            trs.push_back(sample_trajectory(fixed_point_system(), x0, 0.1, 20));
        }
        traj = prepare_training_set(r, Dataset::from_trajectories(trs), model.normalizer);
    }
};

void BM_DiffLoss(benchmark::State& state) {
    static const LossFixture f;
    for (auto _ : state) benchmark::DoNotOptimize(diff_loss(f.model, f.diff.diff));
}
BENCHMARK(BM_DiffLoss);

void BM_RecurrentLoss(benchmark::State& state) {
    static const LossFixture f;
    for (auto _ : state) benchmark::DoNotOptimize(recurrent_loss(f.model, f.traj.traj));
}
BENCHMARK(BM_RecurrentLoss);

}  // namespace

BENCHMARK_MAIN();
