#include "catch_amalgamated.hpp"

#include "bufnet/simulate.hpp"
#include "instances.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace bufnet;
using Catch::Approx;

namespace {

// x(t) for x' = A x + G u with constant u, via the exponential of the
// augmented matrix [[A, G u], [0, 0]].
Eigen::VectorXd expm_state(const ModeSystem& s, const Eigen::VectorXd& u, const Eigen::VectorXd& x0, double t) {
    const Index n = s.A.rows();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + 1, n + 1);
    M.topLeftCorner(n, n) = s.A * t;
    M.topRightCorner(n, 1) = s.G_in * u * t;
    Eigen::MatrixXd E = M.exp();
    Eigen::VectorXd z(n + 1);
    z << x0, 1.0;
    return (E * z).head(n);
}

SwitchedSystem conservative_system(std::uint64_t seed) {
    testing::RandomSpec spec;
    spec.modes = 2;
    spec.nodes = 5;
    BufferNetwork net = testing::random_network(seed, spec);
    TuningParams p = testing::random_params(net, seed);
    SwitchedSystem sys = assemble_switched(net, p);
    for (Index i = 0; i < sys.num_modes(); ++i) {
        DecomposedA d = decompose_A(net, p, i);
        Eigen::MatrixXd& A = sys.modes[static_cast<std::size_t>(i)].A;
        A = d.off;
        A.diagonal() -= d.off.colwise().sum().transpose();
    }
    return sys;
}

} // namespace

TEST_CASE("input signals") {
    InputSignal c = InputSignal::constant(Eigen::Vector2d(1.0, -2.0));
    CHECK(c.sup_norm() == 2.0);
    CHECK(std::isinf(c.l1_mass()));
    CHECK(c.value(123.0)(1) == -2.0);

    InputSignal p = InputSignal::pulse(Eigen::Vector2d(3.0, 1.0), 0.5);
    CHECK(p.l1_mass() == Approx(2.0));
    CHECK(p.value(0.25)(0) == 3.0);
    CHECK(p.value(0.5).isZero(0));
    CHECK(p.scaled(2.0).l1_mass() == Approx(4.0));

    CHECK_THROWS_AS(InputSignal::pulse(Eigen::Vector2d(1.0, 1.0), 0.0), Error);
    CHECK_THROWS_AS(InputSignal({0.0, 1.0, 1.0}, {Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)}), Error);
}

TEST_CASE("single-mode trajectory matches the matrix exponential") {
    BufferNetwork net = testing::e1_network();
    TuningParams p = testing::e1_params(1.3, 0.7);
    ModeSystem s = assemble_system(net, p, 0);
    Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.8);
    Eigen::VectorXd x0 = Eigen::Vector2d(0.5, 2.0);

    SimulationOptions opt;
    opt.horizon = 8.0;
    opt.grid_points = 33;
    opt.initial_state = x0;
    TrajectoryBatch b = simulate_mjls(net, p, InputSignal::constant(u), opt);
    REQUIRE(b.paths.size() == 1);
    const Eigen::MatrixXd& X = b.paths[0].states;
    for (Index k = 0; k < b.times.size(); ++k) {
        Eigen::VectorXd ref = expm_state(s, u, x0, b.times(k));
        CHECK((X.row(k).transpose() - ref).cwiseAbs().maxCoeff() < 1e-6);
    }
    Eigen::VectorXd y = b.paths[0].outputs.row(b.times.size() - 1).transpose();
    CHECK((y - s.G_out * X.row(b.times.size() - 1).transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pulse input switches off inside a step") {
    BufferNetwork net = testing::e1_network();
    TuningParams p = testing::e1_params(1.0, 1.0);
    ModeSystem s = assemble_system(net, p, 0);
    SimulationOptions opt;
    opt.horizon = 4.0;
    opt.grid_points = 5;
    TrajectoryBatch b = simulate_mjls(net, p, InputSignal::pulse(Eigen::VectorXd::Ones(1), 0.37), opt);
    Eigen::VectorXd at = expm_state(s, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(2), 0.37);
    Eigen::VectorXd ref = expm_state(s, Eigen::VectorXd::Zero(1), at, 4.0 - 0.37);
    CHECK((b.paths[0].states.row(4).transpose() - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("states stay nonnegative") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        testing::RandomSpec spec;
        spec.modes = 2;
        spec.rate_max = 20.0;
        BufferNetwork net = testing::random_network(seed, spec);
        SimulationOptions opt;
        opt.horizon = 10.0;
        opt.trajectories = 50;
        opt.seed = seed;
        opt.initial_state = Eigen::VectorXd::Constant(net.num_nodes(), 0.1);
        TrajectoryBatch b = simulate_mjls(net, testing::random_params(net, seed),
                                          InputSignal::pulse(Eigen::VectorXd::Ones(1), 1.0), opt);
        CHECK(b.min_state >= 0.0);
        CHECK((b.output_mean.array() >= 0.0).all());
    }
}

TEST_CASE("total content is conserved without decay or input") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SwitchedSystem sys = conservative_system(seed);
        const Index n = sys.state_dim();
        SimulationOptions opt;
        opt.horizon = 15.0;
        opt.trajectories = 4;
        opt.record_paths = 4;
        opt.seed = seed;
        opt.initial_state = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
        TrajectoryBatch b = simulate_mjls(sys, InputSignal::constant(Eigen::VectorXd::Zero(1)), opt);
        const double total = opt.initial_state.sum();
        for (const TrajectoryPath& path : b.paths) {
            Eigen::VectorXd sums = path.states.rowwise().sum();
            CHECK((sums.array() - total).abs().maxCoeff() < 1e-9);
        }
        CHECK(b.min_state >= 0.0);
    }
}

TEST_CASE("sampled mode paths reproduce the generator") {
    const Eigen::MatrixXd rates = (Eigen::MatrixXd(2, 2) << -1, 1, 1, -1).finished();
    std::mt19937_64 rng(29);
    std::vector<ModePath> paths{sample_mode_path(rates, 0, 1e5, rng)};
    GeneratorEstimate est = estimate_generator(paths, 2);
    CHECK(est.jumps.sum() > 90000);
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) {
            if (i != j) {
                CHECK(std::abs(est.rates(i, j) - rates(i, j)) <= 3.0 * est.std_error(i, j));
            }
        }
    }

    const Eigen::MatrixXd three = (Eigen::MatrixXd(3, 3) << -3, 1, 2, 0.5, -1, 0.5, 2, 2, -4).finished();
    std::vector<ModePath> many;
    for (int k = 0; k < 20; ++k) {
        many.push_back(sample_mode_path(three, k % 3, 5000.0, rng));
    }
    GeneratorEstimate e3 = estimate_generator(many, 3);
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) {
            if (i != j) {
                CHECK(std::abs(e3.rates(i, j) - three(i, j)) <= 3.0 * e3.std_error(i, j));
            }
        }
    }
}

TEST_CASE("mode paths are ordered and end at the horizon") {
    const Eigen::MatrixXd rates = (Eigen::MatrixXd(2, 2) << -2, 2, 1, -1).finished();
    std::mt19937_64 rng(31);
    ModePath p = sample_mode_path(rates, 1, 50.0, rng);
    REQUIRE_FALSE(p.times.empty());
    CHECK(p.times.front() == 0.0);
    CHECK(p.modes.front() == 1);
    CHECK(p.horizon == 50.0);
    for (std::size_t k = 1; k < p.times.size(); ++k) {
        CHECK(p.times[k] > p.times[k - 1]);
        CHECK(p.modes[k] != p.modes[k - 1]);
    }
    CHECK(p.times.back() < 50.0);
}

TEST_CASE("empirical gains of the two-node chain") {
    BufferNetwork net = testing::e1_network();
    TuningParams p = testing::e1_params(1.0, 1.0);
    SimulationOptions opt;
    opt.horizon = 30.0;
    opt.grid_points = 301;
    TrajectoryBatch pulse = simulate_mjls(net, p, InputSignal::pulse(Eigen::VectorXd::Constant(1, 1e3), 1e-3), opt);
    CHECK(empirical_gain(pulse, GainNorm::L1).value == Approx(2.0).epsilon(0.05));
    TrajectoryBatch step = simulate_mjls(net, p, InputSignal::constant(Eigen::VectorXd::Ones(1)), opt);
    CHECK(empirical_gain(step, GainNorm::Linf).value == Approx(1.0).epsilon(0.05));

    TrajectoryBatch none = simulate_mjls(net, p, InputSignal::constant(Eigen::VectorXd::Zero(1)), opt);
    CHECK_THROWS_AS(empirical_gain(none, GainNorm::Linf), Error);
    CHECK_THROWS_AS(empirical_gain(step, GainNorm::L1), Error);
}

TEST_CASE("monte_carlo_gain on the two-node chain") {
    SwitchedSystem sys = assemble_switched(testing::e1_network(), testing::e1_params(1.0, 1.0));
    MonteCarloOptions mc;
    mc.trajectories = 4;
    CHECK(monte_carlo_gain(sys, GainNorm::L1, mc).value == Approx(2.0).epsilon(0.05));
    CHECK(monte_carlo_gain(sys, GainNorm::Linf, mc).value == Approx(1.0).epsilon(0.05));
}

TEST_CASE("simulation is reproducible and thread independent") {
    testing::RandomSpec spec;
    spec.modes = 2;
    BufferNetwork net = testing::random_network(37, spec);
    TuningParams p = testing::random_params(net, 37);
    SimulationOptions opt;
    opt.horizon = 5.0;
    opt.trajectories = 200;
    opt.seed = 99;
    opt.threads = 1;
    InputSignal in = InputSignal::constant(Eigen::VectorXd::Ones(1));
    TrajectoryBatch a = simulate_mjls(net, p, in, opt);
    opt.threads = 4;
    TrajectoryBatch b = simulate_mjls(net, p, in, opt);
    CHECK(a.output_integral == b.output_integral);
    CHECK(a.output_mean == b.output_mean);
    CHECK(a.paths[0].jump_times == b.paths[0].jump_times);
    opt.seed = 100;
    TrajectoryBatch c = simulate_mjls(net, p, in, opt);
    CHECK(a.output_integral != c.output_integral);
}

TEST_CASE("initial modes spread over the chain") {
    SwitchedSystem sys = assemble_switched(testing::e2_network(), testing::e1_params(1.0, 1.0));
    SimulationOptions opt;
    opt.trajectories = 6;
    opt.horizon = 1.0;
    TrajectoryBatch b = simulate_mjls(sys, InputSignal::constant(Eigen::VectorXd::Ones(1)), opt);
    CHECK(b.initial_modes == std::vector<Index>{0, 1, 0, 1, 0, 1});
    opt.initial_mode = 1;
    TrajectoryBatch fixed = simulate_mjls(sys, InputSignal::constant(Eigen::VectorXd::Ones(1)), opt);
    CHECK(fixed.initial_modes == std::vector<Index>(6, 1));
}
