#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace bufnet::lp {

/// minimize cost^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
/// Empty A_eq/A_ub (zero rows) are allowed.
struct Problem {
    Eigen::VectorXd cost;
    Eigen::MatrixXd A_ub;
    Eigen::VectorXd b_ub;
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

std::string_view to_string(Status s) noexcept;

struct Options {
    double pivot_tol = 1e-11;
    double feasibility_tol = 1e-9;
    int max_iterations = 100000;
};

struct Solution {
    Status status = Status::Infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    int iterations = 0;
};

/// Dense two-phase tableau simplex with Bland's anti-cycling rule.
Solution solve(const Problem& problem, const Options& options = {});

} // namespace bufnet::lp
