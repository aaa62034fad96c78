#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "generators.hpp"
#include "koopman/config.hpp"
#include "koopman/dataset.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/optim.hpp"
#include "koopman/train.hpp"

using namespace koopman;

TEST(Adam, ZeroGradientLeavesParameters) {
    AdamState s(3, {});
    std::vector<double> p{1.0, -2.0, 3.0};
    const std::vector<double> g(3, 0.0);
    for (int i = 0; i < 5; ++i) adam_step(s, p, g);
    EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepIsSignedLearningRate) {
    AdamState s(3, {0.01});
    std::vector<double> p{0.0, 0.0, 0.0};
    adam_step(s, p, std::vector<double>{3.0, -0.5, 1e-3});
    EXPECT_NEAR(p[0], -0.01, 1e-9);
    EXPECT_NEAR(p[1], 0.01, 1e-9);
    EXPECT_NEAR(p[2], -0.01, 1e-7);
}

TEST(Adam, ConvergesOnQuadratic) {
    AdamState s(1, {1e-2});
    std::vector<double> x{1.0};
    for (int i = 0; i < 2000; ++i) adam_step(s, x, std::vector<double>{2.0 * x[0]});
    EXPECT_LE(std::abs(x[0]), 1e-4);
}

TEST(Adam, RejectsMismatchedSizes) {
    AdamState s(2, {});
    std::vector<double> p{1.0, 2.0};
    EXPECT_THROW(adam_step(s, p, std::vector<double>{1.0}), DimensionError);
}

TEST(Config, ParsesAndRoundTrips) {
    const TrainConfig c = parse_config(R"({"form":"recurrent","mode":"vi","layers":"2-8-3-8-2","epochs":10,
        "learning_rate":0.002,"seed":9,"window_length":5,"loss_weights":{"linear":2,"reconstruction":0.5},
        "vi":{"warm_start_fraction":0.2}})");
    EXPECT_EQ(c.form, Form::recurrent);
    EXPECT_EQ(c.mode, Mode::vi);
    EXPECT_EQ(c.layers, (std::vector<std::size_t>{2, 8, 3, 8, 2}));
    EXPECT_EQ(c.epochs, 10u);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_DOUBLE_EQ(c.loss_weights.linear, 2.0);
    EXPECT_DOUBLE_EQ(c.vi.warm_start_fraction, 0.2);
    const TrainConfig back = parse_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    const TrainConfig arr = parse_config(R"({"layers":[2,4,2,4,2]})");
    EXPECT_EQ(arr.layers, (std::vector<std::size_t>{2, 4, 2, 4, 2}));
}

TEST(Config, RejectsInvalidInput) {
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4-2","bogus":1})"), UsageError);
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4-2","form":"integral"})"), UsageError);
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4"})"), UsageError);
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4-3"})"), UsageError);
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4-2","learning_rate":-1})"), UsageError);
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4-2","batch_size":0})"), UsageError);
    EXPECT_THROW(parse_config(R"({"layers":"2-4-2-4-2","latent_dim":3})"), UsageError);
    EXPECT_THROW(parse_config("{not json"), UsageError);
}

TEST(Dataset, HankelizeWindows) {
    Trajectory tr;
    for (int i = 0; i < 7; ++i) tr.t.push_back(0.5 + 0.1 * i);
    tr.x = Matrix(7, 1);
    for (int i = 0; i < 7; ++i) tr.x(i, 0) = i;
    const auto w = hankelize(tr, 3, 2);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_DOUBLE_EQ(w[1].z(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(w[2].z(2, 0), 6.0);
    EXPECT_DOUBLE_EQ(w[1].t[0], 0.0);
    EXPECT_NEAR(w[1].t[2], 0.2, 1e-12);
    EXPECT_THROW(hankelize(tr, 8, 1), DataError);
    EXPECT_THROW(hankelize(tr, 1, 1), DomainError);
}

TEST(Dataset, CsvRoundTripIsExact) {
    Rng rng(3);
    const Matrix x = testgen::random_matrix(rng, 5, 2);
    const Dataset d = Dataset::derivative(x, testgen::random_matrix(rng, 5, 2));
    std::stringstream ss;
    write_derivative_csv(ss, d);
    const Dataset back = read_dataset_csv(ss, "mem");
    EXPECT_EQ(back.kind, Dataset::Kind::derivative);
    EXPECT_EQ(testgen::to_vec(back.x.values()), testgen::to_vec(d.x.values()));
    EXPECT_EQ(testgen::to_vec(back.xdot.values()), testgen::to_vec(d.xdot.values()));

    Trajectory a{{0.0, 0.1, 0.2}, testgen::random_matrix(rng, 3, 2)};
    Trajectory b{{0.0, 0.1}, testgen::random_matrix(rng, 2, 2)};
    const Dataset t = Dataset::from_trajectories({a, b});
    std::stringstream ts;
    write_trajectory_csv(ts, t);
    const Dataset tb = read_dataset_csv(ts, "mem");
    ASSERT_EQ(tb.trajectories.size(), 2u);
    EXPECT_EQ(testgen::to_vec(tb.trajectories[0].x.values()), testgen::to_vec(a.x.values()));
    EXPECT_EQ(tb.trajectories[1].t, b.t);
}

TEST(Dataset, MalformedCsvIsRejected) {
    std::stringstream bad("x_1,x_2,xdot_1,xdot_2\n1,2,3\n");
    EXPECT_THROW(read_dataset_csv(bad, "mem"), FormatError);
    std::stringstream nan("x_1,xdot_1\n1,nan\n");
    EXPECT_THROW(read_dataset_csv(nan, "mem"), Error);
    std::stringstream header("a,b\n1,2\n");
    EXPECT_THROW(read_dataset_csv(header, "mem"), FormatError);
}

TEST(Training, EpochBatchesPartitionIndices) {
    Rng rng(1);
    const auto batches = epoch_batches(10, 4, rng);
    ASSERT_EQ(batches.size(), 3u);
    std::multiset<std::size_t> seen;
    for (const auto& b : batches) seen.insert(b.begin(), b.end());
    EXPECT_EQ(seen.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(seen.count(i), 1u);
}

namespace {

TrainConfig small_diff_config() {
    TrainConfig c;
    c.layers = parse_widths("2-6-2-6-2");
    c.epochs = 5;
    c.batch_size = 32;
    c.seed = 4;
    return c;
}

Dataset small_fixed_point_data() {
    return make_diff_dataset(fixed_point_system(), lhs_sample({{-0.5, 0.5}, {-0.5, 0.5}}, 100, 2));
}

}  // namespace

TEST(Training, ZeroEpochsReturnsInitialModel) {
    TrainConfig c = small_diff_config();
    c.epochs = 0;
    const Dataset d = small_fixed_point_data();
    const TrainResult r = train_map(c, d);
    EXPECT_TRUE(r.history.empty());
    EXPECT_EQ(flatten(r.model), flatten(initialize_model(c, d)));
}

TEST(Training, ReproducibleUnderSeed) {
    const TrainConfig c = small_diff_config();
    const Dataset d = small_fixed_point_data();
    const TrainResult a = train_map(c, d), b = train_map(c, d);
    EXPECT_EQ(flatten(a.model), flatten(b.model));
    EXPECT_EQ(a.history, b.history);
    TrainConfig other = c;
    other.seed = 5;
    EXPECT_NE(flatten(train_map(other, d).model), flatten(a.model));
}

TEST(Training, LossDecreasesAndStaysStable) {
    TrainConfig c = small_diff_config();
    c.epochs = 60;
    c.learning_rate = 3e-3;
    const Dataset d = small_fixed_point_data();
    std::size_t calls = 0;
    const TrainResult r = train_map(c, d, [&](std::size_t, double, const KoopmanModel& m) {
        ++calls;
        EXPECT_LE(spectral_abscissa(m), 1e-9);
    });
    EXPECT_EQ(calls, 60u);
    ASSERT_EQ(r.history.size(), 60u);
    EXPECT_LT(r.history.back(), r.history.front());
}

TEST(Training, FrozenNetworksStayPut) {
    TrainConfig c = small_diff_config();
    c.freeze_networks = true;
    const Dataset d = small_fixed_point_data();
    const KoopmanModel init = initialize_model(c, d);
    const TrainResult r = train_map(c, d);
    EXPECT_EQ(flatten(r.model.encoder), flatten(init.encoder));
    EXPECT_EQ(flatten(r.model.decoder), flatten(init.decoder));
}

TEST(Training, RecurrentFormTrainsOnTrajectories) {
    TrainConfig c = small_diff_config();
    c.form = Form::recurrent;
    c.window_length = 6;
    c.stride = 3;
    c.batch_size = 4;
    const SystemDef sys = fixed_point_system();
    std::vector<Trajectory> trs;
    const double x0[2][2] = {{0.4, -0.4}, {-0.3, 0.2}};
    for (const auto& x : x0) trs.push_back(sample_trajectory(sys, x, 0.1, 20));
    const Dataset d = Dataset::from_trajectories(trs);
    const TrainingSet set = prepare_training_set(c, d, fit_normalizer(d.snapshots(), c.normalization_mode));
    EXPECT_EQ(set.size(), 2u * 5);  // (20 - 6) / 3 + 1 windows per trajectory
    const TrainResult r = train_map(c, d);
    EXPECT_EQ(r.history.size(), c.epochs);
    for (double v : r.history) EXPECT_TRUE(std::isfinite(v));
}

TEST(Training, MismatchedDatasetIsRejected) {
    TrainConfig c = small_diff_config();
    c.form = Form::recurrent;
    EXPECT_THROW(train_map(c, small_fixed_point_data()), UsageError);
}
