#include "cli.hpp"

#include "CLI11.hpp"
#include "config.hpp"

#include "bufnet/csv.hpp"
#include "bufnet/dcsolve.hpp"
#include "bufnet/gains.hpp"
#include "bufnet/problems.hpp"
#include "bufnet/simulate.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>

namespace bufnet::cli {

namespace fs = std::filesystem;
using csv::fmt;

int exit_code_for(Errc code) noexcept {
    switch (code) {
    case Errc::Unstable: return kExitUnstable;
    case Errc::NoFeasiblePointFound: return kExitInfeasible;
    case Errc::MaxIterations:
    case Errc::NumericalBreakdown:
    case Errc::BoundViolation:
    case Errc::Singular:
    case Errc::LpInfeasible: return kExitNumerical;
    default: return kExitConfig;
    }
}

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<int> max_iter;
    std::optional<double> tol;
    std::optional<int> multistarts;
    std::optional<double> alpha;
    unsigned threads = 0;

    std::string objective = "l1";
    std::optional<double> budget;
    std::optional<double> gamma_bound;
    bool gp = false;

    int trajectories = 1000;
    std::optional<double> horizon;
    std::string input = "constant";
    double level = 1.0;
    std::optional<double> width;
    int export_paths = 1;
    int grid = 201;

    std::vector<double> budgets;
};

struct Loaded {
    config::ConfigData data;
    BufferNetwork net;
};

Loaded load(const Options& o) {
    config::ConfigData data = config::load_config(o.config);
    if (o.alpha) {
        data.network.alpha = *o.alpha;
    }
    BufferNetwork net(data.network);
    return {std::move(data), std::move(net)};
}

std::ofstream open_out(const Options& o, const std::string& name) {
    const fs::path p = fs::path(o.out) / name;
    std::ofstream f(p);
    if (!f) {
        throw Error(Errc::InvalidConfig, "cannot write " + p.string());
    }
    return f;
}

TuningParams fixed_params(const Loaded& l) {
    TuningParams p;
    if (l.data.params) {
        p = *l.data.params;
    } else {
        p = l.net.upper_params();
        if (!p.beta.allFinite() || !p.delta.allFinite()) {
            throw Error(Errc::InvalidConfig, "config needs \"params\" (or finite bounds) for this command");
        }
    }
    check_params(l.net, p);
    return p;
}

SolveOptions solve_options(const Options& o) {
    SolveOptions s;
    s.seed = *o.seed;
    s.threads = o.threads;
    if (o.max_iter) {
        s.max_outer_iters = *o.max_iter;
    }
    if (o.tol) {
        s.tol_stationarity = *o.tol;
        s.tol_feasibility = *o.tol;
    }
    if (o.multistarts) {
        s.multistarts = *o.multistarts;
    }
    return s;
}

CostModel cost_of(const Loaded& l) {
    if (!l.data.cost) {
        throw Error(Errc::InvalidConfig, "config has no \"costs\" section");
    }
    return *l.data.cost;
}

void require_seed(const Options& o, const std::string& cmd) {
    if (!o.seed) {
        throw Error(Errc::InvalidConfig, cmd + " needs --seed");
    }
}

StabilityReport require_stable(const SwitchedSystem& sys, std::ostream& log) {
    StabilityReport st = stability_check(sys);
    if (!st.stable) {
        log << "system is not mean stable: lifted abscissa = " << fmt(st.abscissa) << "\n";
        throw Error(Errc::Unstable, "lifted abscissa " + fmt(st.abscissa) + " is not negative");
    }
    return st;
}

void write_certificates(std::ostream& f, const std::string& name, const GainReport& r) {
    for (std::size_t i = 0; i < r.certificates.size(); ++i) {
        for (Index k = 0; k < r.certificates[i].size(); ++k) {
            csv::write_row(f, {name, std::to_string(i + 1), std::to_string(k + 1), fmt(r.certificates[i](k))});
        }
    }
}

int cmd_analyze(const Options& o, std::ostream& log) {
    const Loaded l = load(o);
    const SwitchedSystem sys = assemble_switched(l.net, fixed_params(l));
    const StabilityReport st = require_stable(sys, log);
    const GainReport g1 = l1_gain(sys);
    const GainReport gi = linf_gain(sys);
    std::ofstream f = open_out(o, "report.csv");
    f << "quantity,mode,node,value\n";
    csv::write_row(f, {"stable", "", "", "1"});
    csv::write_row(f, {"abscissa", "", "", fmt(st.abscissa)});
    csv::write_row(f, {"gamma_l1", "", "", fmt(g1.gamma)});
    csv::write_row(f, {"gamma_linf", "", "", fmt(gi.gamma)});
    write_certificates(f, "l1_certificate", g1);
    write_certificates(f, "linf_certificate", gi);
    log << "stable, abscissa " << fmt(st.abscissa) << ", gamma_l1 " << fmt(g1.gamma) << ", gamma_linf "
        << fmt(gi.gamma) << "\n";
    return kExitOk;
}

GainNorm parse_norm(const std::string& s) { return s == "linf" ? GainNorm::Linf : GainNorm::L1; }

/// Gain of the returned parameters must not exceed what the solver claims.
void revalidate(const OptimizationResult& r, const CostModel& cost, GainNorm norm) {
    constexpr double kRel = 1e-6;
    const double claimed = r.gamma_solver;
    if (!(r.revalidated.gamma <= claimed * (1.0 + kRel) + 1e-12)) {
        throw Error(Errc::NumericalBreakdown, "revalidated gain " + fmt(r.revalidated.gamma) +
                                                  " exceeds the solver's " + fmt(claimed));
    }
    if (norm == GainNorm::L1 && !(r.cost <= *cost.budget * (1.0 + kRel))) {
        throw Error(Errc::NumericalBreakdown, "cost " + fmt(r.cost) + " exceeds the budget " + fmt(*cost.budget));
    }
}

int cmd_optimize(const Options& o, std::ostream& log) {
    require_seed(o, "optimize");
    const Loaded l = load(o);
    CostModel cost = cost_of(l);
    if (o.budget) {
        cost.budget = *o.budget;
    }
    if (o.gamma_bound) {
        cost.gamma_bound = *o.gamma_bound;
    }
    const GainNorm norm = parse_norm(o.objective);
    const OptimizationResult r =
        optimize(l.net, cost, norm, solve_options(o), o.gp ? EdgeSharing::PerNode : EdgeSharing::PerEdge);
    revalidate(r, cost, norm);

    std::ofstream sol = open_out(o, "solution.csv");
    sol << "parameter,name,value\n";
    for (Index d = 0; d < l.net.num_destinations(); ++d) {
        csv::write_row(sol, {"beta", l.net.node_label(l.net.destinations()[static_cast<std::size_t>(d)]),
                             fmt(r.params.beta(d))});
    }
    for (Index e = 0; e < l.net.num_edges(); ++e) {
        csv::write_row(sol, {"delta", l.net.edge_label(e), fmt(r.params.delta(e))});
    }
    std::ofstream trace = open_out(o, "trace.csv");
    write_trace_csv(trace, r.solution.trace);

    std::ofstream sum = open_out(o, "summary.csv");
    sum << "quantity,value\n";
    csv::write_row(sum, {"objective", o.objective});
    csv::write_row(sum, {"program", o.gp ? "gp-baseline" : "dc"});
    if (norm == GainNorm::L1) {
        csv::write_row(sum, {"budget", fmt(*cost.budget)});
    } else {
        csv::write_row(sum, {"gamma_bound", fmt(*cost.gamma_bound)});
    }
    csv::write_row(sum, {"gamma_solver", fmt(r.gamma_solver)});
    csv::write_row(sum, {"gamma_lp", fmt(r.revalidated.gamma)});
    csv::write_row(sum, {"cost", fmt(r.cost)});
    csv::write_row(sum, {"start", std::to_string(r.solution.start)});
    csv::write_row(sum, {"outer_iterations", std::to_string(r.solution.trace.entries.size())});
    csv::write_row(sum, {"status", r.solution.status == SolveStatus::LocalOptimum ? "local-optimum" : "iteration-limit"});
    log << "gamma " << fmt(r.revalidated.gamma) << ", cost " << fmt(r.cost) << " (start " << r.solution.start
        << ", " << r.solution.trace.entries.size() << " outer iterations)\n";
    return kExitOk;
}

std::vector<std::string> output_names(const BufferNetwork& net) {
    std::vector<std::string> names;
    for (Index k = 0; k < net.num_nodes(); ++k) {
        names.push_back("y_" + net.node_label(k));
    }
    for (Index e = 0; e < net.num_edges(); ++e) {
        names.push_back("y_" + net.edge_label(e));
    }
    return names;
}

int cmd_simulate(const Options& o, std::ostream& log) {
    require_seed(o, "simulate");
    const Loaded l = load(o);
    const SwitchedSystem sys = assemble_switched(l.net, fixed_params(l));
    const Index s = sys.input_dim();

    SimulationOptions so;
    so.trajectories = o.trajectories;
    so.seed = *o.seed;
    so.grid_points = o.grid;
    so.record_paths = o.export_paths;
    so.threads = o.threads;
    const StabilityReport st = stability_check(sys);
    if (o.horizon) {
        so.horizon = *o.horizon;
    } else {
        if (!st.stable) {
            throw Error(Errc::Unstable, "lifted abscissa " + fmt(st.abscissa) + " is not negative; give --horizon");
        }
        so.horizon = 30.0 / std::abs(st.abscissa);
    }
    const bool pulse = o.input == "pulse";
    const double width = o.width ? *o.width : 1e-3 * fastest_time_constant(sys);
    const InputSignal input = pulse ? InputSignal::pulse(Eigen::VectorXd::Constant(s, o.level / width), width)
                                    : InputSignal::constant(Eigen::VectorXd::Constant(s, o.level));
    const TrajectoryBatch batch = simulate_mjls(sys, input, so);
    const std::vector<std::string> ynames = output_names(l.net);

    for (std::size_t k = 0; k < batch.paths.size(); ++k) {
        const TrajectoryPath& p = batch.paths[k];
        std::ofstream f = open_out(o, "trajectory_" + std::to_string(k + 1) + ".csv");
        std::vector<std::string> head{"time", "mode"};
        for (Index j = 0; j < l.net.num_nodes(); ++j) {
            head.push_back("x_" + l.net.node_label(j));
        }
        head.insert(head.end(), ynames.begin(), ynames.end());
        csv::write_row(f, head);
        for (Index g = 0; g < batch.times.size(); ++g) {
            std::vector<std::string> row{fmt(batch.times(g)), std::to_string(p.modes[static_cast<std::size_t>(g)] + 1)};
            for (Index j = 0; j < p.states.cols(); ++j) {
                row.push_back(fmt(p.states(g, j)));
            }
            for (Index j = 0; j < p.outputs.cols(); ++j) {
                row.push_back(fmt(p.outputs(g, j)));
            }
            csv::write_row(f, row);
        }
    }
    {
        std::ofstream f = open_out(o, "mean_output.csv");
        std::vector<std::string> head{"time"};
        head.insert(head.end(), ynames.begin(), ynames.end());
        csv::write_row(f, head);
        for (Index g = 0; g < batch.times.size(); ++g) {
            std::vector<std::string> row{fmt(batch.times(g))};
            for (Index j = 0; j < batch.output_mean.cols(); ++j) {
                row.push_back(fmt(batch.output_mean(g, j)));
            }
            csv::write_row(f, row);
        }
    }
    const GainNorm norm = pulse ? GainNorm::L1 : GainNorm::Linf;
    std::ofstream f = open_out(o, "summary.csv");
    f << "quantity,value\n";
    csv::write_row(f, {"trajectories", std::to_string(batch.trajectories())});
    csv::write_row(f, {"horizon", fmt(so.horizon)});
    csv::write_row(f, {"step", fmt(batch.step)});
    csv::write_row(f, {"min_state", fmt(batch.min_state)});
    csv::write_row(f, {"norm", std::string(to_string(norm))});
    const GainEstimate est = empirical_gain(batch, norm);
    csv::write_row(f, {"gain_empirical", fmt(est.value)});
    csv::write_row(f, {"half_width", fmt(est.half_width)});
    if (st.stable) {
        csv::write_row(f, {"gain_lp", fmt(lp_gain(sys, norm).gamma)});
    }
    log << "simulated " << batch.trajectories() << " trajectories to t = " << fmt(so.horizon) << ", empirical "
        << to_string(norm) << " gain " << fmt(est.value) << " +- " << fmt(est.half_width) << "\n";
    return kExitOk;
}

int cmd_compare_gp(const Options& o, std::ostream& log) {
    require_seed(o, "compare-gp");
    const Loaded l = load(o);
    CostModel cost = cost_of(l);
    std::vector<double> budgets = o.budgets;
    if (budgets.empty()) {
        if (!cost.budget) {
            throw Error(Errc::InvalidConfig, "compare-gp needs --budgets or costs.budget");
        }
        budgets = {*cost.budget};
    }
    const SolveOptions so = solve_options(o);
    std::ofstream f = open_out(o, "compare_gp.csv");
    f << "budget,gamma_dc,gamma_gp,ratio\n";
    for (double b : budgets) {
        cost.budget = b;
        const OptimizationResult dc = optimize(l.net, cost, GainNorm::L1, so, EdgeSharing::PerEdge);
        revalidate(dc, cost, GainNorm::L1);
        const OptimizationResult gp = optimize(l.net, cost, GainNorm::L1, so, EdgeSharing::PerNode);
        revalidate(gp, cost, GainNorm::L1);
        const double ratio = dc.gamma_solver / gp.gamma_solver;
        csv::write_row(f, {fmt(b), fmt(dc.gamma_solver), fmt(gp.gamma_solver), fmt(ratio)});
        log << "budget " << fmt(b) << ": dc " << fmt(dc.gamma_solver) << ", gp " << fmt(gp.gamma_solver) << "\n";
    }
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& log) {
    CLI::App app{"Gain analysis and parameter tuning for stochastic buffer networks"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "network/cost JSON file")->required();
    app.add_option("--seed", o.seed, "random seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--max-iter", o.max_iter, "outer iteration limit")->check(CLI::PositiveNumber);
    app.add_option("--tol", o.tol, "stationarity and feasibility tolerance")->check(CLI::PositiveNumber);
    app.add_option("--multistarts", o.multistarts, "number of starts")->check(CLI::PositiveNumber);
    app.add_option("--alpha", o.alpha, "output weight of the edge flows")->check(CLI::NonNegativeNumber);
    app.add_option("--threads", o.threads, "worker threads (0 = all cores)");

    CLI::App* analyze = app.add_subcommand("analyze", "stability and gains at fixed parameters");
    CLI::App* opt = app.add_subcommand("optimize", "tune parameters");
    opt->add_option("--objective", o.objective, "l1 (budgeted gain) or linf (cheapest with a gain bound)")
        ->check(CLI::IsMember({"l1", "linf"}));
    opt->add_option("--budget", o.budget, "cost budget")->check(CLI::PositiveNumber);
    opt->add_option("--gamma-bound", o.gamma_bound, "gain bound");
    opt->add_flag("--gp", o.gp, "share delta across out-edges of each node");
    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo trajectories at fixed parameters");
    sim->add_option("--trajectories", o.trajectories, "number of trajectories")->check(CLI::PositiveNumber);
    sim->add_option("--horizon", o.horizon, "final time (default 30 / |lifted abscissa|)")->check(CLI::PositiveNumber);
    sim->add_option("--input", o.input, "constant or pulse")->check(CLI::IsMember({"constant", "pulse"}));
    sim->add_option("--level", o.level, "input level (pulse: mass per channel)")->check(CLI::NonNegativeNumber);
    sim->add_option("--width", o.width, "pulse width")->check(CLI::PositiveNumber);
    sim->add_option("--export", o.export_paths, "trajectories written to trajectory_k.csv")->check(CLI::NonNegativeNumber);
    sim->add_option("--grid", o.grid, "grid points")->check(CLI::Range(2, 1000000));
    CLI::App* cmp = app.add_subcommand("compare-gp", "gain of the DC program vs the shared-delta baseline");
    cmp->add_option("--budgets", o.budgets, "budget sweep")->delimiter(',');

    std::vector<const char*> argv{"bufnet"};
    for (const std::string& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::Success&) {
        log << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        log << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        std::error_code ec;
        fs::create_directories(o.out, ec);
        if (ec) {
            throw Error(Errc::InvalidConfig, "cannot create output directory " + o.out + ": " + ec.message());
        }
        if (*analyze) {
            return cmd_analyze(o, log);
        }
        if (*opt) {
            return cmd_optimize(o, log);
        }
        if (*sim) {
            return cmd_simulate(o, log);
        }
        if (*cmp) {
            return cmd_compare_gp(o, log);
        }
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    }
    return kExitConfig;
}

} // namespace bufnet::cli
