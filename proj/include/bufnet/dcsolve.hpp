#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bufnet/posylog.hpp"

// Programs of the form
//   minimize   F_P0(w) - F_Q0(w)
//   subject to F_Pj(w) - F_Qj(w) <= 0,  lower <= w <= upper,
// where every F is the log transform of a posynomial, solved by a penalty
// convex-concave procedure.

namespace bufnet {

using Index = Eigen::Index;

struct DCProgram {
    posy::VariableSpace space;
    posy::Posynomiald objective;
    std::optional<posy::Posynomiald> objective_concave;
    std::vector<posy::DCConstraintd> constraints;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    /// Entries drawn at random for multistarts 1, 2, ...; the others keep the
    /// midpoint. Empty means all.
    std::vector<bool> randomize;
    /// Optional completion of a start point (e.g. certificate variables).
    std::function<void(Eigen::VectorXd&)> initializer;

    Index dim() const { return space.dim(); }
    /// True when every concave part is a monomial, i.e. the program is convex.
    bool is_convex() const;
    double objective_value(const Eigen::VectorXd& w) const;
    /// max_j max(0, F_Pj(w) - F_Qj(w)), evaluated exactly.
    double max_violation(const Eigen::VectorXd& w) const;
};

/// Throws SpaceMismatch, DimensionMismatch or InvalidOptions.
void validate(const DCProgram& prog);

struct SolveOptions {
    double tol_stationarity = 1e-8;
    double tol_feasibility = 1e-8;
    int max_outer_iters = 100;
    double tau0 = 1.0;
    double tau_growth = 5.0;
    double tau_max = 1e6;
    int multistarts = 8;
    std::uint64_t seed = 0;
    /// Worker threads for multistarts; results do not depend on this value.
    unsigned threads = 0;
};

/// Throws InvalidOptions.
void validate(const SolveOptions& opts);

struct TraceEntry {
    int iter = 0;
    double objective = 0.0;
    double violation = 0.0;
    double penalty = 0.0;
    double step = 0.0;
    /// objective + penalty * sum of exact violations, before and after the
    /// step, at the same penalty.
    double merit_before = 0.0;
    double merit_after = 0.0;
    int newton_iterations = 0;
};

struct SolveTrace {
    std::vector<TraceEntry> entries;
};

/// Columns iter, objective, violation, penalty.
void write_trace_csv(std::ostream& os, const SolveTrace& trace);

/// Convex model at w_k: each F_Qj (and F_Q0) replaced by its tangent, one
/// slack s_j >= 0 per constraint, penalty * sum s_j added to the objective.
struct ConvexSubproblem {
    posy::LogPosynomiald objective;
    posy::AffineFormd objective_tangent;
    std::vector<posy::LogPosynomiald> convex_parts;
    std::vector<posy::AffineFormd> tangents;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double penalty = 1.0;

    Index dim() const { return lower.size(); }
    std::size_t num_slacks() const { return convex_parts.size(); }
    /// F_Pj(w) - tangent_j(w)
    double constraint_value(std::size_t j, const Eigen::VectorXd& w) const;
};

ConvexSubproblem convexify(const DCProgram& prog, const Eigen::VectorXd& wk, double penalty = 1.0);

struct SubproblemOptions {
    /// Barrier duality-gap target.
    double tol = 1e-9;
    int max_newton_per_stage = 200;
};

struct SubproblemResult {
    Eigen::VectorXd w;
    Eigen::VectorXd slacks;
    Eigen::VectorXd multipliers;
    /// Model objective including the slack penalty.
    double objective = 0.0;
    /// Infinity norm of the Lagrangian gradient.
    double kkt_residual = 0.0;
    int newton_iterations = 0;
};

/// Log-barrier Newton method. The slacks are minimized out in closed form,
/// leaving a smooth convex function of w on the open box. `warm` is moved
/// strictly inside the box first. Throws MaxIterations, NumericalBreakdown.
SubproblemResult solve_subproblem(const ConvexSubproblem& sub, const Eigen::VectorXd& warm,
                                  const SubproblemOptions& opts = {});

enum class SolveStatus { LocalOptimum, IterationLimit };

struct StartSummary {
    double objective = 0.0;
    double violation = 0.0;
    int outer_iterations = 0;
    bool converged = false;
    bool feasible = false;
};

/// Best point over all starts. The procedure is local: no global optimality
/// is claimed even when every start agrees.
struct DCSolution {
    Eigen::VectorXd w;
    double objective = 0.0;
    double violation = 0.0;
    int start = 0;
    SolveStatus status = SolveStatus::LocalOptimum;
    SolveTrace trace;
    std::vector<StartSummary> starts;
};

/// Start points: start 0 is the box midpoint, later starts draw the
/// `randomize` entries uniformly in the box; each is then passed through
/// the program's initializer.
std::vector<Eigen::VectorXd> start_points(const DCProgram& prog, int count, std::uint64_t seed);

/// One CCP run from w0. Convex programs take a single iteration at tau_max.
DCSolution solve_dc_from(const DCProgram& prog, const Eigen::VectorXd& w0, const SolveOptions& opts);

/// Tie-break over starts: lowest objective among feasible results, then
/// lowest violation, then lowest start index. Throws NoFeasiblePointFound.
DCSolution solve_dc(const DCProgram& prog, const SolveOptions& opts = {});

} // namespace bufnet
