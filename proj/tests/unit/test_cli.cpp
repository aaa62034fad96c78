#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using koopman::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "koopman");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / ("koopman_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
    }
    void TearDown() override { fs::remove_all(root_); }

    std::string path(const std::string& rel) const { return (root_ / rel).string(); }

    void write(const std::string& rel, const std::string& text) const {
        std::ofstream out(root_ / rel, std::ios::binary);
        out << text;
    }

    fs::path root_;
};

}  // namespace

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(koopman::cli::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(koopman::cli::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(CliTest, PipelineIsByteReproducible) {
    write("cfg.json", R"({"form":"diff","mode":"vi","layers":"2-6-2-6-2","epochs":6,"batch_size":32,"seed":4})");
    for (const char* run_dir : {"a", "b"}) {
        const std::string d = path(run_dir);
        ASSERT_EQ(invoke({"--seed", "3", "--out", d, "generate", "--system", "fixed-point", "--n", "64"}).code, 0);
        ASSERT_EQ(invoke({"--config", path("cfg.json"), "--out", d, "train", "--data", d + "/dataset.csv"}).code, 0);
        ASSERT_EQ(invoke({"--seed", "5", "--out", d + "/eig", "eigen", "--checkpoint", d + "/checkpoint.json", "--n-mc", "3"}).code, 0);
        ASSERT_EQ(invoke({"--seed", "5", "--out", d + "/pred", "predict", "--checkpoint", d + "/checkpoint.json", "--x0=0.4,-0.4",
                          "--t-max", "2", "--dt", "0.5", "--n-mc", "4", "--m-mc", "2", "--samples"})
                      .code,
                  0);
    }
    for (const char* f : {"dataset.csv", "checkpoint.json", "history.csv", "warm_start_history.csv", "eig/eigenvalues.csv",
                          "pred/prediction.csv", "pred/samples.csv"}) {
        const std::string a = slurp(root_ / "a" / f), b = slurp(root_ / "b" / f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, b) << f;
    }
    const auto manifest = nlohmann::json::parse(slurp(root_ / "a" / "manifest.json"));
    EXPECT_EQ(manifest.at("command"), "train");
    EXPECT_EQ(manifest.at("seed"), 4);
    EXPECT_EQ(manifest.at("config").at("layers"), "2-6-2-6-2");
    EXPECT_EQ(manifest.at("inputs").size(), 2u);
    EXPECT_EQ(manifest.at("outputs")[0].at("sha256").get<std::string>().size(), 64u);
    EXPECT_EQ(manifest.at("checkpoints")[0], path("a") + "/checkpoint.json");
    const std::string ev = slurp(root_ / "a" / "eig" / "eigenvalues.csv");
    EXPECT_EQ(ev.rfind("source,index,re,im\nmean,1,", 0), 0u);
    EXPECT_NE(ev.find("draw_3,2,"), std::string::npos);
}

TEST_F(CliTest, MapPredictionAndPod) {
    write("cfg.json", R"({"form":"diff","mode":"map","layers":"2-6-2-6-2","epochs":3,"batch_size":32})");
    const std::string d = path("m");
    ASSERT_EQ(invoke({"--out", d, "generate", "--system", "duffing", "--n", "50", "--bounds=-2,2,-2,2"}).code, 0);
    const Result t = invoke({"--config", path("cfg.json"), "--out", d, "train", "--data", d + "/dataset.csv"});
    ASSERT_EQ(t.code, 0) << t.err;
    EXPECT_NE(t.out.find("eigenvalues"), std::string::npos);
    ASSERT_EQ(invoke({"--out", d, "predict", "--checkpoint", d + "/checkpoint.json", "--x0=1.2,1.2", "--t-max", "1", "--dt", "0.25"}).code, 0);
    EXPECT_EQ(slurp(root_ / "m" / "prediction.csv").rfind("time,x_1,x_2\n0,", 0), 0u);

    const std::string s = path("s");
    ASSERT_EQ(invoke({"--out", s, "generate", "--system", "surrogate", "--n", "300"}).code, 0);
    const Result p = invoke({"--seed", "2", "--out", s, "pod", "--input", s + "/snapshots.csv", "--rank", "6", "--first", "200", "--noise", "0.05"});
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_EQ(p.out.rfind("energy_ratio ", 0), 0u);
    const std::string coeffs = slurp(root_ / "s" / "coefficients.csv");
    EXPECT_EQ(coeffs.rfind("traj_id,t,x_1,", 0), 0u);
    EXPECT_NE(coeffs.find("\n0,0.1,"), std::string::npos);  // dt read from the metadata
}

TEST_F(CliTest, TrajectoryGenerationFeedsRecurrentTraining) {
    write("cfg.json", R"({"form":"recurrent","mode":"map","layers":"2-6-2-6-2","epochs":2,"batch_size":8,"window_length":5})");
    const std::string d = path("r");
    ASSERT_EQ(invoke({"--out", d, "generate", "--system", "fixed-point", "--mode", "trajectory", "--n", "3", "--samples", "12"}).code, 0);
    const Result t = invoke({"--config", path("cfg.json"), "--out", d, "train", "--data", d + "/dataset.csv"});
    EXPECT_EQ(t.code, 0) << t.err;
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(invoke({}).code, koopman::cli::kUsage);
    EXPECT_EQ(invoke({"frobnicate"}).code, koopman::cli::kUsage);
    EXPECT_EQ(invoke({"--out", path("x"), "generate", "--system", "lorenz", "--n", "4"}).code, koopman::cli::kUsage);
    EXPECT_EQ(invoke({"--out", path("x"), "generate", "--system", "duffing", "--n", "4", "--bounds=1,0,0,1"}).code, koopman::cli::kUsage);
    EXPECT_EQ(invoke({"--out", path("x"), "generate", "--system", "duffing", "--n", "4", "--param", "gamma=1"}).code, koopman::cli::kUsage);
    EXPECT_EQ(invoke({"--out", path("x"), "eigen", "--checkpoint", path("missing.json")}).code, koopman::cli::kData);
    write("garbage.json", "{\"format_version\": 1}");
    EXPECT_EQ(invoke({"--out", path("x"), "eigen", "--checkpoint", path("garbage.json")}).code, koopman::cli::kData);
    write("bad.csv", "x_1,x_2,xdot_1\n1,2\n");
    write("cfg.json", R"({"layers":"2-4-2-4-2","epochs":1})");
    EXPECT_EQ(invoke({"--config", path("cfg.json"), "--out", path("x"), "train", "--data", path("bad.csv")}).code,
              koopman::cli::kData);
    write("badcfg.json", R"({"layers":"2-4-2-4-2","epochs":1,"nope":2})");
    ASSERT_EQ(invoke({"--out", path("g"), "generate", "--system", "fixed-point", "--n", "20"}).code, 0);
    EXPECT_EQ(invoke({"--config", path("badcfg.json"), "--out", path("x"), "train", "--data", path("g/dataset.csv")}).code,
              koopman::cli::kUsage);
    write("div.json", R"({"layers":"2-4-2-4-2","epochs":5,"learning_rate":1e100})");
    EXPECT_EQ(invoke({"--config", path("div.json"), "--out", path("x"), "train", "--data", path("g/dataset.csv")}).code,
              koopman::cli::kNumeric);
}
