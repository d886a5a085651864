#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "bufnet/gains.hpp"
#include "bufnet/netmodel.hpp"

namespace bufnet {

/// Piecewise-constant input f(t): level k holds on [breaks[k], breaks[k+1]);
/// the input is zero after the last break (which may be +inf).
class InputSignal {
public:
    InputSignal() = default;
    InputSignal(std::vector<double> breaks, std::vector<Eigen::VectorXd> levels);

    static InputSignal constant(const Eigen::VectorXd& level);
    /// `amplitude` on [0, width).
    static InputSignal pulse(const Eigen::VectorXd& amplitude, double width);

    InputSignal scaled(double k) const;

    Index channels() const { return levels_.empty() ? 0 : levels_.front().size(); }
    std::size_t num_segments() const { return levels_.size(); }
    double segment_start(std::size_t k) const { return breaks_[k]; }
    double segment_end(std::size_t k) const { return breaks_[k + 1]; }
    const Eigen::VectorXd& level(std::size_t k) const { return levels_[k]; }

    Eigen::VectorXd value(double t) const;
    /// Integral of ||f(t)||_1; +inf for a nonzero level held forever.
    double l1_mass() const;
    double sup_norm() const;

private:
    std::vector<double> breaks_;
    std::vector<Eigen::VectorXd> levels_;
};

struct SimulationOptions {
    double horizon = 10.0;
    int trajectories = 1;
    std::uint64_t seed = 0;
    int grid_points = 201;
    /// Number of leading trajectories whose grid paths are stored.
    int record_paths = 1;
    /// Empty means x(0) = 0.
    Eigen::VectorXd initial_state;
    /// Fixed initial mode; by default trajectory k starts in mode k mod N,
    /// which spreads the initial modes uniformly.
    std::optional<Index> initial_mode;
    /// Upper bound on the RK4 step; the step never exceeds 1e-3 times the
    /// fastest time constant 1 / max_i ||A_i||_inf.
    double max_step = 0.0;
    /// Worker threads; results do not depend on this value.
    unsigned threads = 0;
};

struct TrajectoryPath {
    Index initial_mode = 0;
    std::vector<Index> modes;       // mode in effect at each grid time
    Eigen::MatrixXd states;         // grid x n
    Eigen::MatrixXd outputs;        // grid x r
    std::vector<double> jump_times;
    std::vector<Index> jump_modes;  // mode entered at each jump
};

struct TrajectoryBatch {
    Eigen::VectorXd times;
    std::vector<TrajectoryPath> paths;
    std::vector<Index> initial_modes;
    /// Per trajectory: integral of 1^T y over [0, horizon].
    Eigen::VectorXd output_integral;
    /// Mean and mean-square of y over trajectories at each grid time (grid x r).
    Eigen::MatrixXd output_mean;
    Eigen::MatrixXd output_sq_mean;
    /// Smallest state entry over every step end and grid sample.
    double min_state = 0.0;
    double step = 0.0;
    std::uint64_t seed = 0;
    Index num_modes = 1;
    InputSignal input;

    Index trajectories() const { return output_integral.size(); }
};

/// Mode path from exponential holding times (rate -pi_ii) and jumps with
/// probabilities pi_ij / (-pi_ii); state by fixed-step RK4 split exactly at
/// jump instants, input breaks and grid times. Reproducible for a fixed seed;
/// trajectory k draws from its own stream seeded with seed + k.
TrajectoryBatch simulate_mjls(const SwitchedSystem& sys, const InputSignal& input,
                              const SimulationOptions& options);
TrajectoryBatch simulate_mjls(const BufferNetwork& net, const TuningParams& p,
                              const InputSignal& input, const SimulationOptions& options);

struct GainEstimate {
    double value = 0.0;
    /// 95% normal-approximation half-width.
    double half_width = 0.0;
    /// L1 only: estimate per initial mode.
    std::vector<double> per_mode;
    std::vector<double> per_mode_half_width;
};

/// L1: mean of the per-trajectory output integrals over the input's L1 mass,
/// computed per initial mode; the largest is reported (the gain is a
/// supremum over the initial mode). Outputs are nonnegative, so
/// ||E[y]||_1 = E[1^T y].
/// Linf: largest grid value of the mean output over the input's sup norm.
/// Throws ZeroInput when the relevant input norm is zero (or infinite for L1).
GainEstimate empirical_gain(const TrajectoryBatch& batch, GainNorm norm);

/// mode[k] holds on [times[k], times[k+1]), the last one up to `horizon`.
struct ModePath {
    std::vector<double> times;
    std::vector<Index> modes;
    double horizon = 0.0;
};

ModePath sample_mode_path(const Eigen::MatrixXd& rates, Index initial_mode, double horizon,
                          std::mt19937_64& rng);

struct GeneratorEstimate {
    Eigen::MatrixXd rates;
    Eigen::MatrixXd std_error;
    Eigen::VectorXd occupancy;
    Eigen::MatrixXi jumps;
};

/// Jump counts over occupancy times; std_error = sqrt(count) / occupancy.
GeneratorEstimate estimate_generator(const std::vector<ModePath>& paths, Index modes);

struct MonteCarloOptions {
    int trajectories = 10000;
    std::uint64_t seed = 0;
    /// 0 picks 30 / |lifted abscissa|.
    double horizon = 0.0;
    int grid_points = 401;
    /// 0 picks 1e-3 times the fastest time constant.
    double pulse_width = 0.0;
    unsigned threads = 0;
};

/// L1: unit-mass pulse into each input channel, largest estimate over
/// channels. Linf: unit constant input on all channels. Throws Unstable.
GainEstimate monte_carlo_gain(const SwitchedSystem& sys, GainNorm norm, const MonteCarloOptions& options);

/// 1 / max_i ||A_i||_inf
double fastest_time_constant(const SwitchedSystem& sys);

} // namespace bufnet
