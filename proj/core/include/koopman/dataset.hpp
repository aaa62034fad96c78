#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "koopman/matrix.hpp"

namespace koopman {

// One sampled trajectory: times ascending, one state per row.
struct Trajectory {
    std::vector<double> t;
    Matrix x;
};

// Either derivative pairs (x, xdot) or a set of trajectories.
struct Dataset {
    enum class Kind { derivative, trajectory };

    Kind kind = Kind::derivative;
    Matrix x;     // derivative: M x N states
    Matrix xdot;  // derivative: M x N time derivatives
    std::vector<Trajectory> trajectories;

    static Dataset derivative(Matrix x, Matrix xdot);
    static Dataset from_trajectories(std::vector<Trajectory> trajectories);

    std::size_t state_dim() const;
    std::size_t sample_count() const;  // rows (derivative) or snapshots (trajectory)
    Matrix snapshots() const;          // every state row stacked
    void validate() const;
};

// A window of consecutive snapshots with times re-based to start at 0.
struct Window {
    std::vector<double> t;
    Matrix z;
};

struct TrajBatch {
    std::vector<Window> windows;
};

// Slices a trajectory into windows of T snapshots every `stride` samples.
std::vector<Window> hankelize(const Trajectory& trajectory, std::size_t window_length, std::size_t stride);

// Time step shared by all trajectories, or throws DataError when sampling is
// not uniform to a relative tolerance.
double uniform_step(const Dataset& data, double rel_tol = 1e-6);

// CSV formats:
//   derivative: header x_1..x_N,xdot_1..xdot_N
//   trajectory: header traj_id,t,x_1..x_N, rows grouped by id, t ascending
void write_derivative_csv(std::ostream& os, const Dataset& data);
void write_trajectory_csv(std::ostream& os, const Dataset& data);
Dataset read_dataset_csv(std::istream& is, const std::string& source_name = "<stream>");
Dataset read_dataset_file(const std::string& path);

// Plain numeric CSV with an optional header row of non-numeric names.
Matrix read_matrix_csv(std::istream& is, const std::string& source_name = "<stream>");

}  // namespace koopman
