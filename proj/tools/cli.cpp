#include "cli.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "koopman/checkpoint.hpp"
#include "koopman/config.hpp"
#include "koopman/csv.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/train.hpp"
#include "koopman/uncertainty.hpp"
#include "koopman/vi.hpp"

#ifndef KOOPMAN_TOOL_VERSION
#define KOOPMAN_TOOL_VERSION "0.0.0"
#endif

namespace koopman::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 digest failed");
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string file_sha256(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    int threads = 1;
};

// Collects what a command read and wrote; written last as manifest.json.
class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void argument(const std::string& key, json value) { arguments_[key] = std::move(value); }
    void config(json c) { config_ = std::move(c); }
    void seed(std::uint64_t s) { seed_ = s; }
    void input(const std::string& path) { inputs_.push_back({{"path", path}, {"sha256", file_sha256(path)}}); }
    void output(const std::string& path) { outputs_.push_back({{"path", path}, {"sha256", file_sha256(path)}}); }
    void checkpoint(const std::string& path) { checkpoints_.push_back(path); }

    void write(const std::string& dir) const {
        json j;
        j["tool"] = "koopman";
        j["version"] = KOOPMAN_TOOL_VERSION;
        j["command"] = command_;
        j["arguments"] = arguments_;
        j["config"] = config_;
        j["seed"] = seed_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        j["checkpoints"] = checkpoints_;
        std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
        if (!out) throw DataError("cannot write manifest in '" + dir + "'");
        out << j.dump(2) << "\n";
    }

private:
    std::string command_;
    json arguments_ = json::object();
    json config_ = nullptr;
    std::uint64_t seed_ = 0;
    json inputs_ = json::array();
    json outputs_ = json::array();
    std::vector<std::string> checkpoints_;
};

std::string out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

template <typename Writer>
void write_file(const std::string& path, Writer&& writer) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    writer(out);
    if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (std::string_view f : csv::split(text, ',')) {
        double v = 0.0;
        if (!csv::parse(f, v)) throw UsageError(what + ": '" + std::string(f) + "' is not a number");
        out.push_back(v);
    }
    return out;
}

std::vector<std::pair<double, double>> parse_bounds(const std::string& text, std::size_t dim) {
    const auto v = parse_numbers(text, "--bounds");
    if (v.size() != 2 * dim)
        throw UsageError("--bounds needs " + std::to_string(2 * dim) + " numbers (lo,hi per dimension), got " +
                         std::to_string(v.size()));
    std::vector<std::pair<double, double>> b;
    for (std::size_t d = 0; d < dim; ++d) {
        if (!(v[2 * d + 1] > v[2 * d])) throw UsageError("--bounds: upper bound must exceed lower bound");
        b.emplace_back(v[2 * d], v[2 * d + 1]);
    }
    return b;
}

std::vector<std::pair<double, double>> default_bounds(const std::string& system) {
    if (system == "duffing") return {{-2.0, 2.0}, {-2.0, 2.0}};
    if (system == "stuart-landau") return {{-1.0, 1.0}, {-1.0, 1.0}};
    return {{-0.5, 0.5}, {-0.5, 0.5}};
}

SystemDef make_system(const std::string& name, const std::vector<std::string>& params) {
    std::map<std::string, double> p;
    for (const auto& kv : params) {
        const auto eq = kv.find('=');
        double v = 0.0;
        if (eq == std::string::npos || !csv::parse(std::string_view(kv).substr(eq + 1), v))
            throw UsageError("--param expects name=value, got '" + kv + "'");
        p[kv.substr(0, eq)] = v;
    }
    SystemDef base = system_by_name(name);
    std::map<std::string, double> values(base.parameters.begin(), base.parameters.end());
    for (const auto& [k, v] : p) {
        if (!values.count(k)) throw UsageError("system '" + base.name + "' has no parameter '" + k + "'");
        values[k] = v;
    }
    if (base.name == "fixed-point") return fixed_point_system(values["mu"], values["lambda"]);
    if (base.name == "duffing") return duffing_system(values["delta"], values["beta"], values["alpha"]);
    return stuart_landau_system(values["growth"], values["frequency"]);
}

struct GenerateArgs {
    std::string system;
    std::string mode = "lhs-derivative";
    std::size_t n = 0;
    std::string bounds;
    double dt = 0.1;
    std::size_t samples = 100;
    std::size_t substeps = 10;
    std::vector<std::string> params;
    std::size_t full_dim = 50;
    std::size_t degree = 5;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out) {
    const std::uint64_t seed = g.seed.value_or(0);
    Manifest m("generate");
    m.seed(seed);
    m.argument("system", a.system);
    if (a.system == "surrogate") {
        if (!a.params.empty()) throw UsageError("the surrogate takes no --param values");
        SurrogateOptions o;
        o.full_dim = a.full_dim;
        o.degree = a.degree;
        o.dt = a.dt;
        o.snapshots = a.n == 0 ? o.snapshots : a.n;
        o.seed = seed;
        if (!(o.dt > 0.0) || o.full_dim == 0 || o.degree == 0 || o.snapshots < 2)
            throw UsageError("surrogate needs dt > 0, full_dim >= 1, degree >= 1 and at least 2 snapshots");
        const Trajectory tr = generate_surrogate(o);
        const std::string snap = out_path(g, "snapshots.csv");
        write_file(snap, [&](std::ostream& os) {
            for (std::size_t c = 0; c < tr.x.cols(); ++c) os << (c ? "," : "") << "s_" << (c + 1);
            os << '\n';
            for (std::size_t r = 0; r < tr.x.rows(); ++r) {
                for (std::size_t c = 0; c < tr.x.cols(); ++c) os << (c ? "," : "") << csv::format(tr.x(r, c));
                os << '\n';
            }
        });
        const std::string meta = out_path(g, "snapshots.json");
        write_file(meta, [&](std::ostream& os) {
            os << json{{"dt", o.dt}, {"t0", 0.0}, {"t_ref", 1.0}, {"full_dim", o.full_dim},
                       {"snapshots", o.snapshots}, {"degree", o.degree}}
                      .dump(2)
               << "\n";
        });
        m.argument("n", o.snapshots);
        m.argument("dt", o.dt);
        m.argument("full_dim", o.full_dim);
        m.argument("degree", o.degree);
        m.output(snap);
        m.output(meta);
        m.write(g.out_dir);
        out << "wrote " << o.snapshots << " snapshots of width " << o.full_dim << " to " << snap << "\n";
        return kOk;
    }

    const SystemDef sys = make_system(a.system, a.params);
    if (a.n == 0) throw UsageError("--n must be at least 1");
    const auto bounds = a.bounds.empty() ? default_bounds(sys.name) : parse_bounds(a.bounds, sys.dim);
    m.argument("mode", a.mode);
    m.argument("n", a.n);
    json jb = json::array();
    for (const auto& [lo, hi] : bounds) jb.push_back({lo, hi});
    m.argument("bounds", jb);
    json jp = json::object();
    for (const auto& [k, v] : sys.parameters) jp[k] = v;
    m.argument("parameters", jp);

    const std::string path = out_path(g, "dataset.csv");
    if (a.mode == "lhs-derivative") {
        const Dataset d = make_diff_dataset(sys, lhs_sample(bounds, a.n, seed));
        write_file(path, [&](std::ostream& os) { write_derivative_csv(os, d); });
        out << "wrote " << a.n << " derivative samples to " << path << "\n";
    } else if (a.mode == "trajectory") {
        if (!(a.dt > 0.0) || a.samples < 2 || a.substeps == 0)
            throw UsageError("trajectory mode needs --dt > 0, --samples >= 2 and --substeps >= 1");
        const Matrix x0 = lhs_sample(bounds, a.n, seed);
        std::vector<Trajectory> trs;
        for (std::size_t i = 0; i < a.n; ++i) trs.push_back(sample_trajectory(sys, x0.row(i), a.dt, a.samples, a.substeps));
        const Dataset d = Dataset::from_trajectories(std::move(trs));
        write_file(path, [&](std::ostream& os) { write_trajectory_csv(os, d); });
        m.argument("dt", a.dt);
        m.argument("samples", a.samples);
        m.argument("substeps", a.substeps);
        out << "wrote " << a.n << " trajectories of " << a.samples << " samples to " << path << "\n";
    } else {
        throw UsageError("unknown --mode '" + a.mode + "' (expected lhs-derivative or trajectory)");
    }
    m.output(path);
    m.write(g.out_dir);
    return kOk;
}

struct PodArgs {
    std::string input;
    std::size_t rank = 0;
    std::size_t first = 0;
    double noise = 0.0;
    std::string meta;
    double dt = 0.0;
};

int cmd_pod(const Globals& g, const PodArgs& a, std::ostream& out) {
    std::ifstream in(a.input, std::ios::binary);
    if (!in) throw DataError("cannot open snapshot file '" + a.input + "'");
    const Matrix snaps = read_matrix_csv(in, a.input);
    Manifest m("pod");
    m.input(a.input);

    double dt = a.dt;
    std::string meta = a.meta;
    if (meta.empty() && dt == 0.0) {
        fs::path guess = fs::path(a.input).replace_extension(".json");
        if (fs::exists(guess)) meta = guess.string();
    }
    if (!meta.empty()) {
        std::ifstream mi(meta, std::ios::binary);
        if (!mi) throw DataError("cannot open snapshot metadata '" + meta + "'");
        json j;
        try {
            j = json::parse(mi);
        } catch (const json::parse_error& e) {
            throw FormatError("snapshot metadata '" + meta + "' is not valid JSON");
        }
        if (!j.contains("dt") || !j.at("dt").is_number()) throw FormatError("snapshot metadata '" + meta + "': missing field 'dt'");
        if (dt == 0.0) dt = j.at("dt").get<double>();
        m.input(meta);
    }
    if (dt == 0.0) dt = 1.0;
    if (!(dt > 0.0)) throw UsageError("--dt must be positive");

    const std::size_t used = a.first == 0 ? snaps.rows() : a.first;
    if (used > snaps.rows()) throw UsageError("--first exceeds the number of snapshots");
    if (a.rank == 0 || a.rank > std::min(used, snaps.cols()))
        throw UsageError("--rank must lie in [1, " + std::to_string(std::min(used, snaps.cols())) + "]");
    const PodProjection pod = pod_project(snaps.block(0, 0, used, snaps.cols()), a.rank);
    Matrix coeffs = snaps;
    for (std::size_t r = 0; r < coeffs.rows(); ++r)
        for (std::size_t c = 0; c < coeffs.cols(); ++c) coeffs(r, c) -= pod.basis.mean[c];
    coeffs = matmul(coeffs, pod.basis.modes);
    if (a.noise < 0.0) throw UsageError("--noise must be non-negative");
    const std::uint64_t seed = g.seed.value_or(0);
    if (a.noise > 0.0) coeffs = add_noise(coeffs, a.noise, seed);

    const std::string basis_path = out_path(g, "pod_basis.json");
    write_file(basis_path, [&](std::ostream& os) {
        json modes = json::array();
        for (std::size_t r = 0; r < pod.basis.modes.rows(); ++r)
            modes.push_back(std::vector<double>(pod.basis.modes.row(r).begin(), pod.basis.modes.row(r).end()));
        os << json{{"rank", a.rank},
                   {"mean", pod.basis.mean},
                   {"modes", modes},
                   {"singular_values", pod.basis.singular_values},
                   {"energy_ratio", pod.basis.energy_ratio},
                   {"snapshots_used", used}}
                  .dump(1)
           << "\n";
    });
    const std::string coeff_path = out_path(g, "coefficients.csv");
    Trajectory tr;
    tr.x = coeffs;
    for (std::size_t r = 0; r < coeffs.rows(); ++r) tr.t.push_back(static_cast<double>(r) * dt);
    write_file(coeff_path, [&](std::ostream& os) { write_trajectory_csv(os, Dataset::from_trajectories({tr})); });

    m.seed(seed);
    m.argument("rank", a.rank);
    m.argument("first", used);
    m.argument("noise", a.noise);
    m.argument("dt", dt);
    m.output(basis_path);
    m.output(coeff_path);
    m.write(g.out_dir);
    out << "energy_ratio " << csv::format(pod.basis.energy_ratio) << "\n";
    return kOk;
}

void print_spectrum(std::ostream& out, const ComplexSpectrum& s) {
    for (const auto& l : s) out << "  " << csv::format(l.real()) << (l.imag() < 0 ? " - " : " + ") << csv::format(std::abs(l.imag())) << "i\n";
}

struct TrainArgs {
    std::string data;
    std::optional<std::size_t> epochs;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
    if (g.config_path.empty()) throw UsageError("train needs --config PATH");
    TrainConfig config = load_config(g.config_path);
    if (g.seed) config.seed = *g.seed;
    if (a.epochs) config.epochs = *a.epochs;
    if (!fs::exists(a.data)) throw DataError("dataset '" + a.data + "' does not exist");
    const Dataset data = read_dataset_file(a.data);
    if (config.form == Form::diff && data.kind != Dataset::Kind::derivative)
        throw UsageError("form=diff needs a derivative dataset; '" + a.data + "' holds trajectories");
    if (config.form == Form::recurrent && data.kind != Dataset::Kind::trajectory)
        throw UsageError("form=recurrent needs a trajectory dataset; '" + a.data + "' holds derivative pairs");

    Manifest m("train");
    m.config(json::parse(to_json(config)));
    m.seed(config.seed);
    m.input(g.config_path);
    m.input(a.data);

    const std::string ckpt = out_path(g, "checkpoint.json");
    const std::string hist = out_path(g, "history.csv");
    if (config.mode == Mode::map) {
        const TrainResult r = train_map(config, data);
        save_checkpoint(ckpt, map_checkpoint(r.model, config.form));
        write_file(hist, [&](std::ostream& os) {
            os << "epoch,loss\n";
            for (std::size_t i = 0; i < r.history.size(); ++i) os << (i + 1) << ',' << csv::format(r.history[i]) << '\n';
        });
        out << "trained MAP model, final loss " << (r.history.empty() ? std::string("n/a") : csv::format(r.history.back()))
            << "\neigenvalues:\n";
        print_spectrum(out, eigenvalues(r.model.K()));
    } else {
        const ViResult r = train_vi(config, data);
        save_checkpoint(ckpt, posterior_checkpoint(r.posterior, config.form));
        write_file(hist, [&](std::ostream& os) {
            os << "epoch,elbo\n";
            for (std::size_t i = 0; i < r.history.size(); ++i) os << (i + 1) << ',' << csv::format(r.history[i]) << '\n';
        });
        const std::string warm = out_path(g, "warm_start_history.csv");
        write_file(warm, [&](std::ostream& os) {
            os << "epoch,loss\n";
            for (std::size_t i = 0; i < r.warm_start_history.size(); ++i)
                os << (i + 1) << ',' << csv::format(r.warm_start_history[i]) << '\n';
        });
        m.output(warm);
        out << "trained variational posterior, final ELBO "
            << (r.history.empty() ? std::string("n/a") : csv::format(r.history.back())) << "\nmean eigenvalues:\n";
        print_spectrum(out, eigenvalues(r.posterior.base.K()));
    }
    m.output(ckpt);
    m.output(hist);
    m.checkpoint(ckpt);
    m.write(g.out_dir);
    return kOk;
}

struct EigenArgs {
    std::string checkpoint;
    std::size_t n_mc = 100;
};

int cmd_eigen(const Globals& g, const EigenArgs& a, std::ostream& out) {
    const Checkpoint c = load_checkpoint(a.checkpoint);
    const std::uint64_t seed = g.seed.value_or(0);
    Manifest m("eigen");
    m.seed(seed);
    m.input(a.checkpoint);
    const std::string path = out_path(g, "eigenvalues.csv");
    const ComplexSpectrum main = eigenvalues(c.model.K());
    write_file(path, [&](std::ostream& os) {
        os << "source,index,re,im\n";
        auto rows = [&](const std::string& src, const ComplexSpectrum& s) {
            for (std::size_t i = 0; i < s.size(); ++i)
                os << src << ',' << (i + 1) << ',' << csv::format(s[i].real()) << ',' << csv::format(s[i].imag()) << '\n';
        };
        if (c.kind == Checkpoint::Kind::map) {
            rows("map", main);
        } else {
            rows("mean", main);
            if (a.n_mc == 0) throw UsageError("--n-mc must be at least 1");
            const auto draws = sample_posterior(*c.posterior, a.n_mc, seed);
            for (std::size_t i = 0; i < draws.size(); ++i) rows("draw_" + std::to_string(i + 1), eigenvalues(draws[i].model.K()));
        }
    });
    if (c.kind == Checkpoint::Kind::posterior) m.argument("n_mc", a.n_mc);
    m.output(path);
    m.write(g.out_dir);
    out << (c.kind == Checkpoint::Kind::map ? "eigenvalues:\n" : "mean eigenvalues:\n");
    print_spectrum(out, main);
    return kOk;
}

struct PredictArgs {
    std::string checkpoint;
    std::string x0;
    double t_max = 0.0;
    double dt = 0.0;
    std::size_t n_mc = 100;
    std::size_t m_mc = 10;
    std::string noise = "auto";
    bool samples = false;
};

int cmd_predict(const Globals& g, const PredictArgs& a, std::ostream& out) {
    const Checkpoint c = load_checkpoint(a.checkpoint);
    const std::vector<double> x0 = parse_numbers(a.x0, "--x0");
    if (x0.size() != c.model.state_dim())
        throw UsageError("--x0 has " + std::to_string(x0.size()) + " components, the model expects " +
                         std::to_string(c.model.state_dim()));
    if (!(a.dt > 0.0) || !(a.t_max >= 0.0)) throw UsageError("--dt must be positive and --t-max non-negative");
    std::vector<double> times;
    const auto steps = static_cast<std::size_t>(std::floor(a.t_max / a.dt + 1e-9));
    for (std::size_t i = 0; i <= steps; ++i) times.push_back(static_cast<double>(i) * a.dt);
    const std::uint64_t seed = g.seed.value_or(0);

    Manifest m("predict");
    m.seed(seed);
    m.input(a.checkpoint);
    m.argument("x0", x0);
    m.argument("t_max", a.t_max);
    m.argument("dt", a.dt);
    const std::string path = out_path(g, "prediction.csv");
    if (c.kind == Checkpoint::Kind::map) {
        const Matrix x = predict_map(c.model, x0, times);
        write_file(path, [&](std::ostream& os) { write_trajectory_csv(os, times, x); });
        out << "wrote deterministic trajectory with " << times.size() << " times to " << path << "\n";
    } else {
        bool noise = c.form == Form::diff;
        if (a.noise == "on")
            noise = true;
        else if (a.noise == "off")
            noise = false;
        else if (a.noise != "auto")
            throw UsageError("--noise must be auto, on or off");
        if (a.n_mc == 0 || a.m_mc == 0) throw UsageError("--n-mc and --m-mc must be at least 1");
        const PredictiveEnsemble e = c.form == Form::diff
                                         ? predict_posterior_diff(*c.posterior, x0, times, a.n_mc, a.m_mc, seed, noise)
                                         : predict_posterior_recurrent(*c.posterior, x0, times, a.n_mc, seed, noise);
        write_file(path, [&](std::ostream& os) { write_summary_csv(os, summarize(e)); });
        m.argument("n_mc", a.n_mc);
        if (c.form == Form::diff) m.argument("m_mc", a.m_mc);
        m.argument("noise", noise);
        if (a.samples) {
            const std::string sp = out_path(g, "samples.csv");
            write_file(sp, [&](std::ostream& os) { write_samples_csv(os, e); });
            m.output(sp);
        }
        out << "wrote predictive mean/std from " << e.samples.size() << " samples to " << path << "\n";
    }
    m.output(path);
    m.write(g.out_dir);
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Stable Koopman autoencoders: data generation, training, spectra and prediction", "koopman"};
    app.set_version_flag("--version", std::string(KOOPMAN_TOOL_VERSION));
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config_path, "Training configuration (JSON)");
    auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides the config seed)");
    app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    GenerateArgs ga;
    auto* gen = app.add_subcommand("generate", "Sample a benchmark system or the high-dimensional surrogate");
    gen->add_option("--system", ga.system, "fixed-point | duffing | stuart-landau | surrogate")->required();
    gen->add_option("--mode", ga.mode, "lhs-derivative | trajectory")->capture_default_str();
    gen->add_option("--n", ga.n, "Samples, trajectories, or surrogate snapshots");
    gen->add_option("--bounds", ga.bounds, "lo,hi per dimension, e.g. --bounds=-0.5,0.5,-0.5,0.5");
    gen->add_option("--dt", ga.dt, "Sampling interval for trajectories")->capture_default_str();
    gen->add_option("--samples", ga.samples, "Snapshots per trajectory")->capture_default_str();
    gen->add_option("--substeps", ga.substeps, "RK4 steps per sampling interval")->capture_default_str();
    gen->add_option("--param", ga.params, "System parameter override name=value (repeatable)");
    gen->add_option("--full-dim", ga.full_dim, "Surrogate output width")->capture_default_str();
    gen->add_option("--degree", ga.degree, "Surrogate monomial degree")->capture_default_str();

    PodArgs pa;
    auto* pod = app.add_subcommand("pod", "POD-project snapshots and write coefficient trajectories");
    pod->add_option("--input", pa.input, "Snapshot CSV, one snapshot per row")->required();
    pod->add_option("--rank", pa.rank, "Number of POD modes")->required();
    pod->add_option("--first", pa.first, "Build the basis from the first K snapshots only");
    pod->add_option("--noise", pa.noise, "Noise-to-signal ratio added to the coefficients");
    pod->add_option("--meta", pa.meta, "Snapshot metadata JSON (defaults to the input with .json)");
    pod->add_option("--dt", pa.dt, "Snapshot interval (overrides the metadata)");

    TrainArgs ta;
    std::size_t epochs = 0;
    auto* train = app.add_subcommand("train", "Train a MAP model or a variational posterior");
    train->add_option("--data", ta.data, "Dataset CSV")->required();
    auto* epochs_opt = train->add_option("--epochs", epochs, "Override the configured epoch count");

    EigenArgs ea;
    auto* eig = app.add_subcommand("eigen", "Report continuous-time Koopman eigenvalues");
    eig->add_option("--checkpoint", ea.checkpoint, "Checkpoint JSON")->required();
    eig->add_option("--n-mc", ea.n_mc, "Posterior draws to report")->capture_default_str();

    PredictArgs pr;
    auto* pred = app.add_subcommand("predict", "Roll out a trajectory or a predictive distribution");
    pred->add_option("--checkpoint", pr.checkpoint, "Checkpoint JSON")->required();
    pred->add_option("--x0", pr.x0, "Initial state, comma separated (use --x0=-1,2 for negatives)")->required();
    pred->add_option("--t-max", pr.t_max, "Final time")->required();
    pred->add_option("--dt", pr.dt, "Output interval")->required();
    pred->add_option("--n-mc", pr.n_mc, "Posterior parameter draws")->capture_default_str();
    pred->add_option("--m-mc", pr.m_mc, "Process draws per parameter draw (diff form)")->capture_default_str();
    pred->add_option("--noise", pr.noise, "Observation noise: auto | on | off")->capture_default_str();
    pred->add_flag("--samples", pr.samples, "Also write every sample");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }
    if (seed_opt->count()) g.seed = seed;
    if (epochs_opt->count()) ta.epochs = epochs;

    try {
        if (*gen) return cmd_generate(g, ga, out);
        if (*pod) return cmd_pod(g, pa, out);
        if (*train) return cmd_train(g, ta, out);
        if (*eig) return cmd_eigen(g, ea, out);
        if (*pred) return cmd_predict(g, pr, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const DimensionError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kData;
    } catch (const TrainingError& e) {
        err << "training diverged: " << e.what() << "\n";
        return kNumeric;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const ConvergenceError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}

}  // namespace koopman::cli
