#include "bufnet/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace bufnet {

namespace {

constexpr double kStepFraction = 1e-3;
constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

InputSignal::InputSignal(std::vector<double> breaks, std::vector<Eigen::VectorXd> levels)
    : breaks_(std::move(breaks)), levels_(std::move(levels)) {
    if (levels_.empty() || breaks_.size() != levels_.size() + 1) {
        throw Error(Errc::DimensionMismatch, "input needs one more break than levels");
    }
    if (!(breaks_.front() >= 0.0)) {
        throw Error(Errc::InvalidHorizon, "input breaks must start at t >= 0");
    }
    for (std::size_t k = 0; k + 1 < breaks_.size(); ++k) {
        if (!(breaks_[k + 1] > breaks_[k])) {
            throw Error(Errc::InvalidHorizon, "input breaks must be strictly increasing");
        }
    }
    for (const auto& l : levels_) {
        if (l.size() != levels_.front().size() || !l.allFinite()) {
            throw Error(Errc::DimensionMismatch, "input levels must be finite with equal sizes");
        }
    }
}

InputSignal InputSignal::constant(const Eigen::VectorXd& level) { return InputSignal({0.0, kInf}, {level}); }

InputSignal InputSignal::pulse(const Eigen::VectorXd& amplitude, double width) {
    if (!(width > 0.0) || !std::isfinite(width)) {
        throw Error(Errc::InvalidHorizon, "pulse width must be positive and finite");
    }
    return InputSignal({0.0, width}, {amplitude});
}

InputSignal InputSignal::scaled(double k) const {
    InputSignal out = *this;
    for (auto& l : out.levels_) {
        l *= k;
    }
    return out;
}

Eigen::VectorXd InputSignal::value(double t) const {
    for (std::size_t k = 0; k < levels_.size(); ++k) {
        if (t >= breaks_[k] && t < breaks_[k + 1]) {
            return levels_[k];
        }
    }
    return Eigen::VectorXd::Zero(channels());
}

double InputSignal::l1_mass() const {
    double mass = 0.0;
    for (std::size_t k = 0; k < levels_.size(); ++k) {
        const double norm = levels_[k].lpNorm<1>();
        if (norm > 0.0) {
            mass += norm * (breaks_[k + 1] - breaks_[k]);
        }
    }
    return mass;
}

double InputSignal::sup_norm() const {
    double s = 0.0;
    for (const auto& l : levels_) {
        s = std::max(s, l.lpNorm<Eigen::Infinity>());
    }
    return s;
}

double fastest_time_constant(const SwitchedSystem& sys) {
    double rate = 0.0;
    for (const ModeSystem& m : sys.modes) {
        rate = std::max(rate, m.A.cwiseAbs().rowwise().sum().maxCoeff());
    }
    return rate > 0.0 ? 1.0 / rate : 1.0;
}

ModePath sample_mode_path(const Eigen::MatrixXd& rates, Index initial_mode, double horizon,
                          std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ModePath path;
    path.horizon = horizon;
    path.times.push_back(0.0);
    path.modes.push_back(initial_mode);
    Index mode = initial_mode;
    double t = 0.0;
    const Index N = rates.rows();
    while (true) {
        const double exit = -rates(mode, mode);
        if (!(exit > 0.0)) {
            break;
        }
        t += -std::log1p(-unif(rng)) / exit;
        if (t >= horizon) {
            break;
        }
        double u = unif(rng) * exit;
        Index next = -1;
        for (Index j = 0; j < N; ++j) {
            if (j == mode || rates(mode, j) <= 0.0) {
                continue;
            }
            next = j;
            u -= rates(mode, j);
            if (u < 0.0) {
                break;
            }
        }
        mode = next;
        path.times.push_back(t);
        path.modes.push_back(mode);
    }
    return path;
}

GeneratorEstimate estimate_generator(const std::vector<ModePath>& paths, Index modes) {
    GeneratorEstimate est;
    est.occupancy = Eigen::VectorXd::Zero(modes);
    est.jumps = Eigen::MatrixXi::Zero(modes, modes);
    for (const ModePath& p : paths) {
        for (std::size_t k = 0; k < p.modes.size(); ++k) {
            const double end = k + 1 < p.times.size() ? p.times[k + 1] : p.horizon;
            est.occupancy(p.modes[k]) += end - p.times[k];
            if (k + 1 < p.modes.size()) {
                est.jumps(p.modes[k], p.modes[k + 1]) += 1;
            }
        }
    }
    est.rates = Eigen::MatrixXd::Zero(modes, modes);
    est.std_error = Eigen::MatrixXd::Zero(modes, modes);
    for (Index i = 0; i < modes; ++i) {
        if (est.occupancy(i) <= 0.0) {
            continue;
        }
        for (Index j = 0; j < modes; ++j) {
            if (i != j) {
                est.rates(i, j) = est.jumps(i, j) / est.occupancy(i);
                est.std_error(i, j) = std::sqrt(static_cast<double>(est.jumps(i, j))) / est.occupancy(i);
            }
        }
        est.rates(i, i) = -est.rates.row(i).sum();
    }
    return est;
}

namespace {

// Linear dynamics on z = [x; c; 1] where c accumulates 1^T G_out x and the
// constant slot carries the input. RK4 applied to an autonomous linear
// system is z <- M(h) z with M(h) the degree-4 Taylor polynomial of
// exp(h A~); runs of full steps are applied with cached powers M^(2^b).
class Rk4Propagator {
public:
    Rk4Propagator(const SwitchedSystem& sys, const InputSignal& input, double step, double horizon)
        : n_(sys.state_dim()), step_(step) {
        const Index na = n_ + 2;
        const auto kmax = static_cast<double>(std::ceil(horizon / step) + 1.0);
        const int bits = static_cast<int>(std::floor(std::log2(std::max(kmax, 1.0)))) + 1;
        segments_ = input.num_segments();
        for (const ModeSystem& m : sys.modes) {
            for (std::size_t s = 0; s <= segments_; ++s) {
                Eigen::MatrixXd a = Eigen::MatrixXd::Zero(na, na);
                a.topLeftCorner(n_, n_) = m.A;
                a.block(n_, 0, 1, n_) = m.G_out.colwise().sum();
                if (s < segments_) {
                    a.block(0, n_ + 1, n_, 1) = m.G_in * input.level(s);
                }
                const Eigen::MatrixXd ha = step * a;
                const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(na, na);
                Eigen::MatrixXd M = I + ha / 4.0;
                M = I + ha / 3.0 * M;
                M = I + ha / 2.0 * M;
                M = I + ha * M;
                std::vector<Eigen::MatrixXd> pw;
                pw.push_back(M);
                for (int b = 1; b < bits; ++b) {
                    pw.push_back(pw.back() * pw.back());
                }
                generators_.push_back(std::move(a));
                powers_.push_back(std::move(pw));
            }
        }
    }

    Index dim() const { return n_ + 2; }

    void advance(Eigen::VectorXd& z, Index mode, std::size_t segment, double length,
                 Eigen::VectorXd& tmp) const {
        if (!(length > 0.0)) {
            return;
        }
        const std::size_t key = static_cast<std::size_t>(mode) * (segments_ + 1) + std::min(segment, segments_);
        auto k = static_cast<long long>(std::floor(length / step_));
        double rem = length - static_cast<double>(k) * step_;
        if (rem >= step_) {
            ++k;
            rem -= step_;
        }
        if (rem < 0.0) {
            rem = 0.0;
        }
        const auto& pw = powers_[key];
        for (std::size_t b = 0; k != 0; ++b, k >>= 1) {
            if (k & 1LL) {
                tmp.noalias() = pw[b] * z;
                z.swap(tmp);
            }
        }
        if (rem > 1e-14 * step_) {
            rk4_step(generators_[key], rem, z);
        }
    }

private:
    static void rk4_step(const Eigen::MatrixXd& a, double h, Eigen::VectorXd& z) {
        const Eigen::VectorXd k1 = a * z;
        const Eigen::VectorXd k2 = a * (z + 0.5 * h * k1);
        const Eigen::VectorXd k3 = a * (z + 0.5 * h * k2);
        const Eigen::VectorXd k4 = a * (z + h * k3);
        z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    Index n_;
    double step_;
    std::size_t segments_ = 0;
    std::vector<Eigen::MatrixXd> generators_;
    std::vector<std::vector<Eigen::MatrixXd>> powers_;
};

struct ChunkAccumulator {
    Eigen::MatrixXd sum;
    Eigen::MatrixXd sum_sq;
    double min_state = kInf;
};

} // namespace

TrajectoryBatch simulate_mjls(const SwitchedSystem& sys, const InputSignal& input,
                              const SimulationOptions& options) {
    if (!(options.horizon > 0.0) || !std::isfinite(options.horizon)) {
        throw Error(Errc::InvalidHorizon, "horizon must be positive and finite");
    }
    if (options.trajectories < 1 || options.grid_points < 2) {
        throw Error(Errc::InvalidHorizon, "need at least one trajectory and two grid points");
    }
    const Index n = sys.state_dim();
    const Index r = sys.output_dim();
    const Index N = sys.num_modes();
    if (input.channels() != sys.input_dim()) {
        throw Error(Errc::DimensionMismatch, "input channels do not match the system");
    }
    Eigen::VectorXd x0 = options.initial_state.size() == 0 ? Eigen::VectorXd::Zero(n) : options.initial_state;
    if (x0.size() != n) {
        throw Error(Errc::DimensionMismatch, "initial state size does not match the system");
    }
    if (options.initial_mode && (*options.initial_mode < 0 || *options.initial_mode >= N)) {
        throw Error(Errc::ModeMismatch, "initial mode out of range");
    }

    double step = kStepFraction * fastest_time_constant(sys);
    if (options.max_step > 0.0) {
        step = std::min(step, options.max_step);
    }
    const double T = options.horizon;
    const int G = options.grid_points;
    const int ntraj = options.trajectories;

    TrajectoryBatch batch;
    batch.times = Eigen::VectorXd::LinSpaced(G, 0.0, T);
    batch.times(G - 1) = T;
    batch.output_integral = Eigen::VectorXd::Zero(ntraj);
    batch.initial_modes.assign(static_cast<std::size_t>(ntraj), 0);
    batch.paths.resize(static_cast<std::size_t>(std::clamp(options.record_paths, 0, ntraj)));
    batch.step = step;
    batch.seed = options.seed;
    batch.num_modes = N;
    batch.input = input;

    const Rk4Propagator prop(sys, input, step, T);
    const std::size_t nseg = input.num_segments();

    const int nchunks = std::min(ntraj, 64);
    std::vector<ChunkAccumulator> acc(static_cast<std::size_t>(nchunks));

    auto run_trajectory = [&](int k, ChunkAccumulator& a, Eigen::VectorXd& z, Eigen::VectorXd& tmp,
                              Eigen::VectorXd& y) {
        std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(k));
        const Index m0 = options.initial_mode ? *options.initial_mode : static_cast<Index>(k % N);
        const ModePath mp = sample_mode_path(sys.rates, m0, T, rng);
        batch.initial_modes[static_cast<std::size_t>(k)] = m0;

        TrajectoryPath* path = nullptr;
        if (k < static_cast<int>(batch.paths.size())) {
            path = &batch.paths[static_cast<std::size_t>(k)];
            path->initial_mode = m0;
            path->modes.assign(static_cast<std::size_t>(G), 0);
            path->states = Eigen::MatrixXd::Zero(G, n);
            path->outputs = Eigen::MatrixXd::Zero(G, r);
            path->jump_times.assign(mp.times.begin() + 1, mp.times.end());
            path->jump_modes.assign(mp.modes.begin() + 1, mp.modes.end());
        }

        z.setZero();
        z.head(n) = x0;
        z(n + 1) = 1.0;
        std::size_t jump = 1;  // next entry of mp.times
        Index mode = m0;
        // Input segment in effect; nseg means zero input.
        std::size_t seg = nseg;
        std::size_t next_break = 0;  // index into break list
        if (nseg > 0 && input.segment_start(0) <= 0.0) {
            seg = 0;
            next_break = 1;
        }
        int g = 0;
        double t = 0.0;
        while (true) {
            while (g < G && batch.times(g) <= t) {
                const ModeSystem& ms = sys.modes[static_cast<std::size_t>(mode)];
                y.noalias() = ms.G_out * z.head(n);
                a.sum.row(g) += y.transpose();
                a.sum_sq.row(g) += y.cwiseAbs2().transpose();
                if (path) {
                    path->modes[static_cast<std::size_t>(g)] = mode;
                    path->states.row(g) = z.head(n).transpose();
                    path->outputs.row(g) = y.transpose();
                }
                ++g;
            }
            if (t >= T) {
                break;
            }
            const double t_jump = jump < mp.times.size() ? mp.times[jump] : kInf;
            const double t_break = next_break <= nseg && nseg > 0
                                       ? (next_break == 0 ? input.segment_start(0) : input.segment_end(next_break - 1))
                                       : kInf;
            const double t_grid = g < G ? batch.times(g) : kInf;
            const double t_next = std::min({t_jump, t_break, t_grid, T});
            prop.advance(z, mode, seg, t_next - t, tmp);
            t = t_next;
            a.min_state = std::min(a.min_state, z.head(n).minCoeff());
            if (t == t_jump) {
                mode = mp.modes[jump];
                ++jump;
            }
            if (t == t_break) {
                // Entering segment next_break (or the zero tail after the last one).
                seg = next_break < nseg ? next_break : nseg;
                ++next_break;
                if (next_break > nseg) {
                    next_break = nseg + 1;
                }
            }
        }
        batch.output_integral(k) = z(n);
    };

    std::atomic<int> next_chunk{0};
    auto worker = [&]() {
        Eigen::VectorXd z(prop.dim());
        Eigen::VectorXd tmp(prop.dim());
        Eigen::VectorXd y(r);
        while (true) {
            const int c = next_chunk.fetch_add(1);
            if (c >= nchunks) {
                return;
            }
            ChunkAccumulator& a = acc[static_cast<std::size_t>(c)];
            a.sum = Eigen::MatrixXd::Zero(G, r);
            a.sum_sq = Eigen::MatrixXd::Zero(G, r);
            const int begin = static_cast<int>(static_cast<long long>(c) * ntraj / nchunks);
            const int end = static_cast<int>(static_cast<long long>(c + 1) * ntraj / nchunks);
            for (int k = begin; k < end; ++k) {
                run_trajectory(k, a, z, tmp, y);
            }
        }
    };

    unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(nchunks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    batch.output_mean = Eigen::MatrixXd::Zero(G, r);
    batch.output_sq_mean = Eigen::MatrixXd::Zero(G, r);
    batch.min_state = kInf;
    for (const auto& a : acc) {
        batch.output_mean += a.sum;
        batch.output_sq_mean += a.sum_sq;
        batch.min_state = std::min(batch.min_state, a.min_state);
    }
    batch.min_state = std::min(batch.min_state, x0.minCoeff());
    batch.output_mean /= ntraj;
    batch.output_sq_mean /= ntraj;
    return batch;
}

TrajectoryBatch simulate_mjls(const BufferNetwork& net, const TuningParams& p,
                              const InputSignal& input, const SimulationOptions& options) {
    return simulate_mjls(assemble_switched(net, p), input, options);
}

GainEstimate empirical_gain(const TrajectoryBatch& batch, GainNorm norm) {
    GainEstimate est;
    if (norm == GainNorm::L1) {
        const double mass = batch.input.l1_mass();
        if (!(mass > 0.0) || !std::isfinite(mass)) {
            throw Error(Errc::ZeroInput, "L1 estimate needs an input with finite positive L1 mass");
        }
        const Index N = batch.num_modes;
        std::vector<double> sum(static_cast<std::size_t>(N), 0.0);
        std::vector<double> sum_sq(static_cast<std::size_t>(N), 0.0);
        std::vector<int> count(static_cast<std::size_t>(N), 0);
        for (Index k = 0; k < batch.trajectories(); ++k) {
            const auto m = static_cast<std::size_t>(batch.initial_modes[static_cast<std::size_t>(k)]);
            sum[m] += batch.output_integral(k);
            sum_sq[m] += batch.output_integral(k) * batch.output_integral(k);
            ++count[m];
        }
        est.value = -kInf;
        for (std::size_t m = 0; m < sum.size(); ++m) {
            if (count[m] == 0) {
                est.per_mode.push_back(std::numeric_limits<double>::quiet_NaN());
                est.per_mode_half_width.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const double c = count[m];
            const double mean = sum[m] / c;
            const double var = count[m] > 1 ? std::max(0.0, (sum_sq[m] - c * mean * mean) / (c - 1.0)) : 0.0;
            const double hw = 1.96 * std::sqrt(var / c) / mass;
            est.per_mode.push_back(mean / mass);
            est.per_mode_half_width.push_back(hw);
            if (mean / mass > est.value) {
                est.value = mean / mass;
                est.half_width = hw;
            }
        }
        return est;
    }

    const double sup = batch.input.sup_norm();
    if (!(sup > 0.0)) {
        throw Error(Errc::ZeroInput, "Linf estimate needs a nonzero input");
    }
    Index gi = 0;
    Index ci = 0;
    est.value = batch.output_mean.maxCoeff(&gi, &ci) / sup;
    const double c = static_cast<double>(batch.trajectories());
    const double mean = batch.output_mean(gi, ci);
    const double var = c > 1.0 ? std::max(0.0, (batch.output_sq_mean(gi, ci) - mean * mean) * c / (c - 1.0)) : 0.0;
    est.half_width = 1.96 * std::sqrt(var / c) / sup;
    return est;
}

GainEstimate monte_carlo_gain(const SwitchedSystem& sys, GainNorm norm, const MonteCarloOptions& options) {
    const StabilityReport st = stability_check(sys);
    if (!st.stable) {
        throw Error(Errc::Unstable, "Monte Carlo gain needs a mean-stable system");
    }
    SimulationOptions so;
    so.horizon = options.horizon > 0.0 ? options.horizon : 30.0 / std::abs(st.abscissa);
    so.trajectories = options.trajectories;
    so.seed = options.seed;
    so.record_paths = 0;
    so.threads = options.threads;

    const Index s = sys.input_dim();
    if (norm == GainNorm::Linf) {
        so.grid_points = options.grid_points;
        return empirical_gain(simulate_mjls(sys, InputSignal::constant(Eigen::VectorXd::Ones(s)), so), norm);
    }
    so.grid_points = 2;
    const double width =
        options.pulse_width > 0.0 ? options.pulse_width : kStepFraction * fastest_time_constant(sys);
    GainEstimate best;
    best.value = -kInf;
    for (Index k = 0; k < s; ++k) {
        const Eigen::VectorXd amp = Eigen::VectorXd::Unit(s, k) / width;
        GainEstimate e = empirical_gain(simulate_mjls(sys, InputSignal::pulse(amp, width), so), norm);
        if (e.value > best.value) {
            best = std::move(e);
        }
    }
    return best;
}

} // namespace bufnet
