#include "koopman/dataset.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "koopman/csv.hpp"
#include "koopman/errors.hpp"

namespace koopman {

Dataset Dataset::derivative(Matrix x, Matrix xdot) {
    Dataset d;
    d.kind = Kind::derivative;
    d.x = std::move(x);
    d.xdot = std::move(xdot);
    d.validate();
    return d;
}

Dataset Dataset::from_trajectories(std::vector<Trajectory> trajectories) {
    Dataset d;
    d.kind = Kind::trajectory;
    d.trajectories = std::move(trajectories);
    d.validate();
    return d;
}

std::size_t Dataset::state_dim() const {
    if (kind == Kind::derivative) return x.cols();
    return trajectories.empty() ? 0 : trajectories.front().x.cols();
}

std::size_t Dataset::sample_count() const {
    if (kind == Kind::derivative) return x.rows();
    std::size_t n = 0;
    for (const auto& tr : trajectories) n += tr.x.rows();
    return n;
}

Matrix Dataset::snapshots() const {
    if (kind == Kind::derivative) return x;
    std::vector<Matrix> parts;
    parts.reserve(trajectories.size());
    for (const auto& tr : trajectories) parts.push_back(tr.x);
    return vstack(parts);
}

void Dataset::validate() const {
    if (kind == Kind::derivative) {
        require_same_shape(x, xdot, "derivative dataset");
        if (x.rows() == 0 || x.cols() == 0) throw DataError("derivative dataset is empty");
        if (!x.all_finite() || !xdot.all_finite()) throw DataError("derivative dataset has non-finite values");
        return;
    }
    if (trajectories.empty()) throw DataError("trajectory dataset is empty");
    const std::size_t n = trajectories.front().x.cols();
    if (n == 0) throw DataError("trajectory dataset has zero state width");
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        const auto& tr = trajectories[k];
        if (tr.x.cols() != n) throw DataError("trajectory " + std::to_string(k) + " has inconsistent state width");
        if (tr.t.size() != tr.x.rows() || tr.t.empty())
            throw DataError("trajectory " + std::to_string(k) + " has mismatched time and state counts");
        for (std::size_t j = 1; j < tr.t.size(); ++j)
            if (!(tr.t[j] > tr.t[j - 1])) throw DataError("trajectory " + std::to_string(k) + " times not increasing");
        if (!tr.x.all_finite()) throw DataError("trajectory " + std::to_string(k) + " has non-finite values");
    }
}

std::vector<Window> hankelize(const Trajectory& trajectory, std::size_t window_length, std::size_t stride) {
    if (window_length < 2) throw DomainError("hankelize: window length must be at least 2");
    if (stride < 1) throw DomainError("hankelize: stride must be at least 1");
    const std::size_t len = trajectory.t.size();
    if (trajectory.x.rows() != len) throw DimensionError("hankelize: time and state counts differ");
    if (len < window_length)
        throw DataError("hankelize: trajectory of length " + std::to_string(len) + " shorter than window " +
                        std::to_string(window_length));
    const std::size_t count = (len - window_length) / stride + 1;
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t s = w * stride;
        Window win;
        win.t.resize(window_length);
        for (std::size_t j = 0; j < window_length; ++j) win.t[j] = trajectory.t[s + j] - trajectory.t[s];
        win.z = trajectory.x.block(s, 0, window_length, trajectory.x.cols());
        out.push_back(std::move(win));
    }
    return out;
}

double uniform_step(const Dataset& data, double rel_tol) {
    if (data.kind != Dataset::Kind::trajectory) throw DataError("uniform sampling step needs trajectory data");
    double dt = 0.0;
    for (const auto& tr : data.trajectories) {
        for (std::size_t j = 1; j < tr.t.size(); ++j) {
            const double h = tr.t[j] - tr.t[j - 1];
            if (dt == 0.0) dt = h;
            if (std::abs(h - dt) > rel_tol * dt) throw DataError("trajectory sampling interval is not uniform");
        }
    }
    if (dt == 0.0) throw DataError("trajectories need at least two snapshots");
    return dt;
}

void write_derivative_csv(std::ostream& os, const Dataset& data) {
    if (data.kind != Dataset::Kind::derivative) throw DataError("not a derivative dataset");
    const std::size_t n = data.x.cols();
    for (std::size_t i = 0; i < n; ++i) os << (i ? "," : "") << "x_" << i + 1;
    for (std::size_t i = 0; i < n; ++i) os << ",xdot_" << i + 1;
    os << '\n';
    for (std::size_t r = 0; r < data.x.rows(); ++r) {
        for (std::size_t i = 0; i < n; ++i) os << (i ? "," : "") << csv::format(data.x(r, i));
        for (std::size_t i = 0; i < n; ++i) os << ',' << csv::format(data.xdot(r, i));
        os << '\n';
    }
}

void write_trajectory_csv(std::ostream& os, const Dataset& data) {
    if (data.kind != Dataset::Kind::trajectory) throw DataError("not a trajectory dataset");
    const std::size_t n = data.state_dim();
    os << "traj_id,t";
    for (std::size_t i = 0; i < n; ++i) os << ",x_" << i + 1;
    os << '\n';
    for (std::size_t k = 0; k < data.trajectories.size(); ++k) {
        const auto& tr = data.trajectories[k];
        for (std::size_t r = 0; r < tr.t.size(); ++r) {
            os << k << ',' << csv::format(tr.t[r]);
            for (std::size_t i = 0; i < n; ++i) os << ',' << csv::format(tr.x(r, i));
            os << '\n';
        }
    }
}

namespace {

std::vector<double> parse_row(std::string_view line, std::size_t expected, const std::string& source,
                              std::size_t line_no) {
    const auto fields = csv::split(line);
    if (fields.size() != expected)
        throw FormatError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(expected) +
                          " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(expected);
    for (std::size_t i = 0; i < expected; ++i)
        if (!csv::parse(fields[i], row[i]))
            throw FormatError(source + ":" + std::to_string(line_no) + ": field " + std::to_string(i + 1) +
                              " is not a finite number");
    return row;
}

bool blank(std::string_view s) { return csv::trim(s).empty(); }

}  // namespace

Dataset read_dataset_csv(std::istream& is, const std::string& source_name) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!blank(line)) break;
    }
    if (blank(line)) throw FormatError(source_name + ": empty file");
    const auto header = csv::split(line);
    std::vector<std::string> names;
    for (auto h : header) names.emplace_back(csv::trim(h));

    if (names.front() == "traj_id") {
        if (names.size() < 3 || names[1] != "t") throw FormatError(source_name + ": trajectory header must start traj_id,t");
        const std::size_t n = names.size() - 2;
        std::map<long long, std::pair<std::vector<double>, std::vector<double>>> groups;
        std::vector<long long> order;
        while (std::getline(is, line)) {
            ++line_no;
            if (blank(line)) continue;
            const auto row = parse_row(line, names.size(), source_name, line_no);
            const double id_value = row[0];
            const auto id = static_cast<long long>(id_value);
            if (static_cast<double>(id) != id_value)
                throw FormatError(source_name + ":" + std::to_string(line_no) + ": traj_id must be an integer");
            auto [it, inserted] = groups.try_emplace(id);
            if (inserted) {
                order.push_back(id);
            } else if (order.back() != id) {
                throw FormatError(source_name + ":" + std::to_string(line_no) + ": rows of trajectory " +
                                  std::to_string(id) + " are not contiguous");
            }
            it->second.first.push_back(row[1]);
            it->second.second.insert(it->second.second.end(), row.begin() + 2, row.end());
        }
        std::vector<Trajectory> trajs;
        for (long long id : order) {
            auto& [t, flat] = groups[id];
            Trajectory tr;
            tr.x = Matrix(t.size(), n);
            std::copy(flat.begin(), flat.end(), tr.x.data());
            tr.t = std::move(t);
            trajs.push_back(std::move(tr));
        }
        try {
            return Dataset::from_trajectories(std::move(trajs));
        } catch (const DataError& e) {
            throw FormatError(source_name + ": " + e.what());
        }
    }

    if (names.size() % 2 != 0) throw FormatError(source_name + ": derivative header needs x_1..x_N,xdot_1..xdot_N");
    const std::size_t n = names.size() / 2;
    for (std::size_t i = 0; i < n; ++i) {
        if (names[i] != "x_" + std::to_string(i + 1) || names[n + i] != "xdot_" + std::to_string(i + 1))
            throw FormatError(source_name + ": unexpected header column '" + names[i] + "'");
    }
    std::vector<double> xs, xds;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto row = parse_row(line, names.size(), source_name, line_no);
        xs.insert(xs.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n));
        xds.insert(xds.end(), row.begin() + static_cast<std::ptrdiff_t>(n), row.end());
        ++rows;
    }
    if (rows == 0) throw FormatError(source_name + ": no data rows");
    Matrix x(rows, n), xd(rows, n);
    std::copy(xs.begin(), xs.end(), x.data());
    std::copy(xds.begin(), xds.end(), xd.data());
    return Dataset::derivative(std::move(x), std::move(xd));
}

Dataset read_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return read_dataset_csv(in, path);
}

Matrix read_matrix_csv(std::istream& is, const std::string& source_name) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> values;
    std::size_t cols = 0, rows = 0;
    bool first = true;
    while (std::getline(is, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto fields = csv::split(line);
        if (first) {
            first = false;
            double probe = 0.0;
            if (!csv::parse(fields.front(), probe)) {
                cols = fields.size();
                continue;  // header row
            }
        }
        if (cols == 0) cols = fields.size();
        const auto row = parse_row(line, cols, source_name, line_no);
        values.insert(values.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw FormatError(source_name + ": no data rows");
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

}  // namespace koopman
