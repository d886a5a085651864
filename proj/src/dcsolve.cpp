#include "bufnet/dcsolve.hpp"

#include "bufnet/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace bufnet {

using posy::AffineFormd;
using posy::LogPosynomiald;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dc_value(const posy::DCConstraintd& c, const Eigen::VectorXd& w) { return c.value(w); }

double log_objective(const DCProgram& prog, const Eigen::VectorXd& w) {
    double f = LogPosynomiald(prog.objective).value(w);
    if (prog.objective_concave) {
        f -= LogPosynomiald(*prog.objective_concave).value(w);
    }
    return f;
}

double violation_sum(const DCProgram& prog, const Eigen::VectorXd& w) {
    double s = 0.0;
    for (const auto& c : prog.constraints) {
        s += std::max(0.0, dc_value(c, w));
    }
    return s;
}

} // namespace

bool DCProgram::is_convex() const {
    if (objective_concave && !objective_concave->is_monomial()) {
        return false;
    }
    return std::all_of(constraints.begin(), constraints.end(),
                       [](const posy::DCConstraintd& c) { return c.Q.is_monomial(); });
}

double DCProgram::objective_value(const Eigen::VectorXd& w) const { return log_objective(*this, w); }

double DCProgram::max_violation(const Eigen::VectorXd& w) const {
    double v = 0.0;
    for (const auto& c : constraints) {
        v = std::max(v, dc_value(c, w));
    }
    return v;
}

void validate(const DCProgram& prog) {
    const posy::SpaceTag tag = posy::tag_of(prog.space);
    if (prog.lower.size() != prog.dim() || prog.upper.size() != prog.dim()) {
        throw Error(Errc::DimensionMismatch, "box bounds do not match the variable space");
    }
    for (Index k = 0; k < prog.dim(); ++k) {
        if (!std::isfinite(prog.lower(k)) || !std::isfinite(prog.upper(k)) || !(prog.lower(k) < prog.upper(k))) {
            throw Error(Errc::InvalidOptions, "box for " + prog.space.variable_name(k) + " must be finite and nonempty");
        }
    }
    if (prog.objective.empty()) {
        throw Error(Errc::EmptyPosynomial, "program objective is empty");
    }
    if (!(prog.objective.space() == tag)) {
        throw Error(Errc::SpaceMismatch, "objective is not defined over the program's variables");
    }
    if (prog.objective_concave && !(prog.objective_concave->space() == tag)) {
        throw Error(Errc::SpaceMismatch, "objective concave part is not defined over the program's variables");
    }
    for (const auto& c : prog.constraints) {
        if (!(c.P.space() == tag)) {
            throw Error(Errc::SpaceMismatch, "constraint '" + c.label + "' is not defined over the program's variables");
        }
    }
    if (!prog.randomize.empty() && static_cast<Index>(prog.randomize.size()) != prog.dim()) {
        throw Error(Errc::DimensionMismatch, "randomize mask does not match the variable space");
    }
}

void validate(const SolveOptions& o) {
    if (!(o.tol_stationarity > 0.0) || !(o.tol_feasibility > 0.0) || o.max_outer_iters < 1 || !(o.tau0 > 0.0) ||
        !(o.tau_growth > 1.0) || !(o.tau_max >= o.tau0) || o.multistarts < 1) {
        throw Error(Errc::InvalidOptions,
                    "tolerances, tau0 and iteration counts must be positive, tau growth > 1, tau_max >= tau0");
    }
}

void write_trace_csv(std::ostream& os, const SolveTrace& trace) {
    os << "iter,objective,violation,penalty\n";
    for (const TraceEntry& e : trace.entries) {
        csv::write_row(os, {std::to_string(e.iter), csv::fmt(e.objective), csv::fmt(e.violation), csv::fmt(e.penalty)});
    }
}

double ConvexSubproblem::constraint_value(std::size_t j, const Eigen::VectorXd& w) const {
    return convex_parts[j].value(w) - tangents[j](w);
}

ConvexSubproblem convexify(const DCProgram& prog, const Eigen::VectorXd& wk, double penalty) {
    if (wk.size() != prog.dim()) {
        throw Error(Errc::DimensionMismatch, "linearization point does not match the variable space");
    }
    ConvexSubproblem sub{LogPosynomiald(prog.objective), {}, {}, {}, prog.lower, prog.upper, penalty};
    if (prog.objective_concave) {
        sub.objective_tangent = posy::linearize_concave(*prog.objective_concave, wk);
    } else {
        sub.objective_tangent.slope = Eigen::VectorXd::Zero(prog.dim());
    }
    sub.convex_parts.reserve(prog.constraints.size());
    sub.tangents.reserve(prog.constraints.size());
    for (const auto& c : prog.constraints) {
        sub.convex_parts.emplace_back(c.P);
        sub.tangents.push_back(posy::linearize_concave(c.Q, wk));
    }
    return sub;
}

namespace {

// min over s > max(c, 0) of K s - log(s - c) - log s, with s and r = s - c
// written without cancellation.
struct SlackBarrier {
    double s;
    double r;
    double value;
    double d1;
    double d2;
};

SlackBarrier slack_barrier(double c, double K) {
    const double a = K * c;
    const double h = std::hypot(a, 2.0);
    double p;
    double q;
    if (a >= 0.0) {
        p = h + a;
        q = 4.0 / p;
    } else {
        q = h - a;
        p = 4.0 / q;
    }
    SlackBarrier b;
    b.s = (2.0 + p) / (2.0 * K);
    b.r = (2.0 + q) / (2.0 * K);
    b.value = K * b.s - std::log(b.r) - std::log(b.s);
    b.d1 = 1.0 / b.r;
    b.d2 = (q / h) / (2.0 * b.r * b.r);
    return b;
}

// Sparse evaluation of one log-sum-exp term with an affine part subtracted.
class SparseLse {
public:
    SparseLse(const LogPosynomiald& f, const AffineFormd& tangent) : f_(&f), slope_(&tangent.slope), constant_(tangent.constant) {
        for (std::size_t k = 0; k < f.num_terms(); ++k) {
            for (const auto& pw : f.powers(k)) {
                support_.push_back(pw.first);
            }
        }
        for (Index i = 0; i < tangent.slope.size(); ++i) {
            if (tangent.slope(i) != 0.0) {
                support_.push_back(i);
            }
        }
        std::sort(support_.begin(), support_.end());
        support_.erase(std::unique(support_.begin(), support_.end()), support_.end());
        p_.resize(f.num_terms());
    }

    /// F(w) - tangent(w)
    double value(const Eigen::VectorXd& w) {
        double zmax = -kInf;
        for (std::size_t k = 0; k < p_.size(); ++k) {
            double z = f_->log_coeff(k);
            for (const auto& [i, e] : f_->powers(k)) {
                z += e * w(i);
            }
            p_[k] = z;
            zmax = std::max(zmax, z);
        }
        double sum = 0.0;
        for (double& z : p_) {
            z = std::exp(z - zmax);
            sum += z;
        }
        for (double& z : p_) {
            z /= sum;
        }
        double lin = constant_;
        for (Index i : support_) {
            lin += (*slope_)(i) * w(i);
        }
        return zmax + std::log(sum) - lin;
    }

    /// After value(): gradient of F - tangent into g (support entries only)
    /// and the curvature of F scaled by `scale` into H.
    void derivatives(Eigen::VectorXd& g, Eigen::MatrixXd& H, double scale) const {
        for (Index i : support_) {
            g(i) = 0.0;
        }
        for (std::size_t k = 0; k < p_.size(); ++k) {
            for (const auto& [i, ei] : f_->powers(k)) {
                g(i) += p_[k] * ei;
                if (scale != 0.0) {
                    for (const auto& [j, ej] : f_->powers(k)) {
                        H(i, j) += scale * p_[k] * ei * ej;
                    }
                }
            }
        }
        if (scale != 0.0) {
            for (Index i : support_) {
                for (Index j : support_) {
                    H(i, j) -= scale * g(i) * g(j);
                }
            }
        }
        for (Index i : support_) {
            g(i) -= (*slope_)(i);
        }
    }

    const std::vector<Index>& support() const { return support_; }

private:
    const LogPosynomiald* f_;
    const Eigen::VectorXd* slope_;
    double constant_;
    std::vector<Index> support_;
    std::vector<double> p_;
};

class BarrierObjective {
public:
    explicit BarrierObjective(const ConvexSubproblem& sub) : sub_(sub), obj_(sub.objective, sub.objective_tangent) {
        for (std::size_t j = 0; j < sub.num_slacks(); ++j) {
            cons_.emplace_back(sub.convex_parts[j], sub.tangents[j]);
        }
        scratch_ = Eigen::VectorXd::Zero(sub.dim());
    }

    int barrier_terms() const { return static_cast<int>(2 * cons_.size() + 2 * static_cast<std::size_t>(sub_.dim())); }

    bool inside(const Eigen::VectorXd& w) const {
        return ((w - sub_.lower).array() > 0.0).all() && ((sub_.upper - w).array() > 0.0).all();
    }

    double value(const Eigen::VectorXd& w, double t) {
        if (!inside(w)) {
            return kInf;
        }
        double v = t * obj_.value(w);
        const double K = t * sub_.penalty;
        for (auto& c : cons_) {
            v += slack_barrier(c.value(w), K).value;
        }
        v -= ((w - sub_.lower).array().log() + (sub_.upper - w).array().log()).sum();
        return v;
    }

    double derivatives(const Eigen::VectorXd& w, double t, Eigen::VectorXd& g, Eigen::MatrixXd& H) {
        const Index n = w.size();
        g.setZero(n);
        H.setZero(n, n);
        double v = t * obj_.value(w);
        obj_.derivatives(scratch_, H, t);
        for (Index i : obj_.support()) {
            g(i) += t * scratch_(i);
        }
        const double K = t * sub_.penalty;
        for (auto& c : cons_) {
            const SlackBarrier b = slack_barrier(c.value(w), K);
            v += b.value;
            c.derivatives(scratch_, H, b.d1);
            for (Index i : c.support()) {
                g(i) += b.d1 * scratch_(i);
                for (Index j : c.support()) {
                    H(i, j) += b.d2 * scratch_(i) * scratch_(j);
                }
            }
        }
        const Eigen::ArrayXd lo = (w - sub_.lower).array();
        const Eigen::ArrayXd hi = (sub_.upper - w).array();
        v -= (lo.log() + hi.log()).sum();
        g.array() += -1.0 / lo + 1.0 / hi;
        H.diagonal().array() += 1.0 / lo.square() + 1.0 / hi.square();
        return v;
    }

    void slacks(const Eigen::VectorXd& w, double t, Eigen::VectorXd& s, Eigen::VectorXd& lambda) {
        const double K = t * sub_.penalty;
        s.resize(static_cast<Index>(cons_.size()));
        lambda.resize(s.size());
        for (std::size_t j = 0; j < cons_.size(); ++j) {
            const SlackBarrier b = slack_barrier(cons_[j].value(w), K);
            s(static_cast<Index>(j)) = b.s;
            lambda(static_cast<Index>(j)) = b.d1 / t;
        }
    }

    double model_objective(const Eigen::VectorXd& w, const Eigen::VectorXd& s) {
        return obj_.value(w) + sub_.penalty * s.sum();
    }

private:
    const ConvexSubproblem& sub_;
    SparseLse obj_;
    std::vector<SparseLse> cons_;
    Eigen::VectorXd scratch_;
};

} // namespace

SubproblemResult solve_subproblem(const ConvexSubproblem& sub, const Eigen::VectorXd& warm,
                                  const SubproblemOptions& opts) {
    const Index n = sub.dim();
    if (warm.size() != n) {
        throw Error(Errc::DimensionMismatch, "warm start does not match the subproblem");
    }
    constexpr double kInterior = 1e-6;
    constexpr double kTGrowth = 10.0;
    constexpr double kArmijo = 1e-4;
    constexpr double kNewtonTol = 1e-9;
    constexpr double kRoundoff = 1e-13;
    constexpr double kQuadratic = 0.25;
    constexpr double kShrink = 0.5;

    const Eigen::VectorXd margin = kInterior * (sub.upper - sub.lower);
    Eigen::VectorXd w = warm.cwiseMax(sub.lower + margin).cwiseMin(sub.upper - margin);

    BarrierObjective phi(sub);
    SubproblemResult res;
    Eigen::VectorXd g(n);
    Eigen::VectorXd d(n);
    Eigen::VectorXd trial(n);
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd gt(n);
    Eigen::MatrixXd Ht(n, n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt;

    double t = 1.0;
    while (true) {
        const bool last = phi.barrier_terms() / t <= opts.tol;
        bool settled = false;
        for (int it = 0; it < opts.max_newton_per_stage; ++it) {
            const double v = phi.derivatives(w, t, g, H);
            if (!std::isfinite(v) || !g.allFinite() || !H.allFinite()) {
                throw Error(Errc::NumericalBreakdown, "barrier function is not finite");
            }
            ldlt.compute(H);
            d = ldlt.solve(-g);
            double dec = -g.dot(d);
            if (ldlt.info() != Eigen::Success || !d.allFinite() || !(dec > 0.0)) {
                d = -g.array() / H.diagonal().array().max(1e-300);
                dec = -g.dot(d);
            }
            ++res.newton_iterations;
            const bool stationary = !last || g.lpNorm<Eigen::Infinity>() / t <= opts.tol;
            if (dec / 2.0 <= kNewtonTol && stationary) {
                settled = true;
                break;
            }
            // Near the minimizer the barrier values stop resolving the
            // decrease; a full Newton step is then accepted when it at
            // least halves the gradient.
            auto polish = [&] {
                trial = w + d;
                if (!(dec < kQuadratic) || !phi.inside(trial)) {
                    return false;
                }
                phi.derivatives(trial, t, gt, Ht);
                return gt.allFinite() && gt.lpNorm<Eigen::Infinity>() < kShrink * g.lpNorm<Eigen::Infinity>();
            };
            if (dec / 2.0 <= kRoundoff * (1.0 + std::abs(v))) {
                if (polish()) {
                    w = trial;
                    continue;
                }
                settled = true;
                break;
            }
            double step = 1.0;
            double vt = kInf;
            for (int ls = 0; ls < 80; ++ls, step *= 0.5) {
                trial = w + step * d;
                vt = phi.value(trial, t);
                if (vt <= v - kArmijo * step * dec) {
                    break;
                }
            }
            if (!(vt <= v - kArmijo * step * dec) || !(vt < v)) {
                if (polish()) {
                    w = trial;
                    continue;
                }
                settled = true;
                break;
            }
            w = trial;
        }
        if (!settled) {
            std::ostringstream os;
            os << "barrier stage t = " << t << " did not converge in " << opts.max_newton_per_stage
               << " Newton steps";
            throw Error(Errc::MaxIterations, os.str());
        }
        if (last) {
            break;
        }
        t *= kTGrowth;
    }

    phi.derivatives(w, t, g, H);
    phi.slacks(w, t, res.slacks, res.multipliers);
    res.w = w;
    res.objective = phi.model_objective(w, res.slacks);
    res.kkt_residual = g.lpNorm<Eigen::Infinity>() / t;
    return res;
}

std::vector<Eigen::VectorXd> start_points(const DCProgram& prog, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::VectorXd mid = 0.5 * (prog.lower + prog.upper);
    std::vector<Eigen::VectorXd> out;
    for (int k = 0; k < count; ++k) {
        Eigen::VectorXd w = mid;
        if (k > 0) {
            for (Index i = 0; i < prog.dim(); ++i) {
                if (prog.randomize.empty() || prog.randomize[static_cast<std::size_t>(i)]) {
                    w(i) = prog.lower(i) + unif(rng) * (prog.upper(i) - prog.lower(i));
                }
            }
        }
        if (prog.initializer) {
            prog.initializer(w);
        }
        out.push_back(w.cwiseMax(prog.lower).cwiseMin(prog.upper));
    }
    return out;
}

DCSolution solve_dc_from(const DCProgram& prog, const Eigen::VectorXd& w0, const SolveOptions& opts) {
    validate(prog);
    validate(opts);
    if (w0.size() != prog.dim()) {
        throw Error(Errc::DimensionMismatch, "start point does not match the variable space");
    }
    const bool convex = prog.is_convex();
    double tau = convex ? opts.tau_max : opts.tau0;
    Eigen::VectorXd w = w0.cwiseMax(prog.lower).cwiseMin(prog.upper);
    SubproblemOptions sopts;
    sopts.tol = opts.tol_stationarity;

    DCSolution sol;
    sol.status = SolveStatus::IterationLimit;
    bool have_best = false;
    Eigen::VectorXd best = w;
    double best_obj = kInf;

    for (int k = 1; k <= opts.max_outer_iters; ++k) {
        const double merit_before = prog.objective_value(w) + tau * violation_sum(prog, w);
        const ConvexSubproblem sub = convexify(prog, w, tau);
        const SubproblemResult res = solve_subproblem(sub, w, sopts);
        Eigen::VectorXd wn = res.w;
        double merit_after = prog.objective_value(wn) + tau * violation_sum(prog, wn);
        if (merit_after > merit_before) {
            wn = w;
            merit_after = merit_before;
        }
        TraceEntry e;
        e.iter = k;
        e.step = (wn - w).lpNorm<Eigen::Infinity>();
        w = wn;
        e.objective = prog.objective_value(w);
        e.violation = prog.max_violation(w);
        e.penalty = tau;
        e.merit_before = merit_before;
        e.merit_after = merit_after;
        e.newton_iterations = res.newton_iterations;
        sol.trace.entries.push_back(e);

        const bool feasible = e.violation <= opts.tol_feasibility;
        if (feasible && (!have_best || e.objective < best_obj)) {
            have_best = true;
            best = w;
            best_obj = e.objective;
        }
        const bool stalled =
            e.step <= opts.tol_stationarity ||
            std::abs(merit_before - merit_after) <= opts.tol_stationarity * (1.0 + std::abs(merit_before));
        if (convex || (feasible && stalled)) {
            sol.status = SolveStatus::LocalOptimum;
            break;
        }
        tau = std::min(tau * opts.tau_growth, opts.tau_max);
    }
    sol.w = have_best ? best : w;
    sol.objective = prog.objective_value(sol.w);
    sol.violation = prog.max_violation(sol.w);
    return sol;
}

DCSolution solve_dc(const DCProgram& prog, const SolveOptions& opts) {
    validate(prog);
    validate(opts);
    const std::vector<Eigen::VectorXd> starts = start_points(prog, opts.multistarts, opts.seed);
    const std::size_t S = starts.size();
    std::vector<std::optional<DCSolution>> results(S);
    std::vector<std::exception_ptr> errors(S);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= S) {
                return;
            }
            try {
                results[k] = solve_dc_from(prog, starts[k], opts);
            } catch (const Error&) {
                errors[k] = std::current_exception();
            }
        }
    };
    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(S));
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

    std::vector<StartSummary> summary(S);
    std::optional<std::size_t> pick;
    double least_violation = kInf;
    for (std::size_t k = 0; k < S; ++k) {
        if (!results[k]) {
            summary[k].violation = kInf;
            summary[k].objective = kInf;
            continue;
        }
        const DCSolution& r = *results[k];
        summary[k] = {r.objective, r.violation, static_cast<int>(r.trace.entries.size()),
                      r.status == SolveStatus::LocalOptimum, r.violation <= opts.tol_feasibility};
        least_violation = std::min(least_violation, r.violation);
        if (!summary[k].feasible) {
            continue;
        }
        if (!pick) {
            pick = k;
            continue;
        }
        const DCSolution& b = *results[*pick];
        if (r.objective < b.objective || (r.objective == b.objective && r.violation < b.violation)) {
            pick = k;
        }
    }
    if (!pick) {
        const bool any_result = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.has_value(); });
        if (!any_result) {
            std::rethrow_exception(errors.front());
        }
        std::ostringstream os;
        os << "all " << S << " starts ended infeasible; least constraint violation " << least_violation;
        throw Error(Errc::NoFeasiblePointFound, os.str());
    }
    DCSolution out = std::move(*results[*pick]);
    out.start = static_cast<int>(*pick);
    out.starts = std::move(summary);
    return out;
}

} // namespace bufnet
