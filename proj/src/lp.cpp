#include "bufnet/lp.hpp"

#include "bufnet/error.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bufnet::lp {

std::string_view to_string(Status s) noexcept {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

namespace {

using Eigen::Index;

class Tableau {
public:
    // rows_: m constraint rows + 1 objective row; last column is the rhs.
    Tableau(Index m, Index cols) : t_(Eigen::MatrixXd::Zero(m + 1, cols + 1)), basis_(static_cast<std::size_t>(m), -1) {}

    Eigen::MatrixXd& t() { return t_; }
    std::vector<Index>& basis() { return basis_; }
    Index rows() const { return t_.rows() - 1; }
    Index cols() const { return t_.cols() - 1; }
    double rhs(Index i) const { return t_(i, cols()); }
    double objective_rhs() const { return t_(rows(), cols()); }

    void pivot(Index r, Index c) {
        t_.row(r) /= t_(r, c);
        for (Index i = 0; i <= rows(); ++i) {
            if (i != r && t_(i, c) != 0.0) {
                t_.row(i) -= t_(i, c) * t_.row(r);
            }
        }
        basis_[static_cast<std::size_t>(r)] = c;
    }

    /// Loads reduced costs for `cost` given the current basis.
    void load_objective(const Eigen::VectorXd& cost) {
        t_.row(rows()).setZero();
        t_.row(rows()).head(cost.size()) = cost.transpose();
        for (Index i = 0; i < rows(); ++i) {
            const Index b = basis_[static_cast<std::size_t>(i)];
            if (b >= 0 && b < cost.size() && cost(b) != 0.0) {
                t_.row(rows()) -= cost(b) * t_.row(i);
            }
        }
    }

    /// Bland's rule: smallest eligible entering index, smallest basic index on
    /// ratio ties.
    Status run(const std::vector<bool>& blocked, const Options& opt, int& iterations) {
        while (true) {
            if (iterations >= opt.max_iterations) {
                return Status::IterationLimit;
            }
            Index enter = -1;
            for (Index j = 0; j < cols(); ++j) {
                if (!blocked[static_cast<std::size_t>(j)] && t_(rows(), j) < -opt.pivot_tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) {
                return Status::Optimal;
            }
            Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < rows(); ++i) {
                const double a = t_(i, enter);
                if (a <= opt.pivot_tol) {
                    continue;
                }
                const double ratio = std::max(0.0, rhs(i)) / a;
                const double eps = 1e-13 * std::max(1.0, std::abs(ratio));
                if (leave < 0 || ratio < best - eps) {
                    best = ratio;
                    leave = i;
                } else if (ratio <= best + eps &&
                           basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) {
                return Status::Unbounded;
            }
            pivot(leave, enter);
            ++iterations;
        }
    }

private:
    Eigen::MatrixXd t_;
    std::vector<Index> basis_;
};

} // namespace

Solution solve(const Problem& problem, const Options& options) {
    const Index n = problem.cost.size();
    const Index mu = problem.A_ub.rows();
    const Index me = problem.A_eq.rows();
    if ((mu > 0 && (problem.A_ub.cols() != n || problem.b_ub.size() != mu)) ||
        (me > 0 && (problem.A_eq.cols() != n || problem.b_eq.size() != me))) {
        throw Error(Errc::DimensionMismatch, "LP data dimensions are inconsistent");
    }
    const Index m = mu + me;

    // Column layout: [x (n) | slack/surplus (mu) | artificial (one per row needing it)]
    std::vector<bool> needs_art(static_cast<std::size_t>(m), false);
    Index n_art = 0;
    for (Index i = 0; i < mu; ++i) {
        if (problem.b_ub(i) < 0.0) {
            needs_art[static_cast<std::size_t>(i)] = true;
            ++n_art;
        }
    }
    for (Index i = 0; i < me; ++i) {
        needs_art[static_cast<std::size_t>(mu + i)] = true;
        ++n_art;
    }
    const Index cols = n + mu + n_art;
    Tableau tab(m, cols);
    auto& t = tab.t();

    Index art = n + mu;
    for (Index i = 0; i < m; ++i) {
        Eigen::RowVectorXd row = i < mu ? Eigen::RowVectorXd(problem.A_ub.row(i))
                                        : Eigen::RowVectorXd(problem.A_eq.row(i - mu));
        double b = i < mu ? problem.b_ub(i) : problem.b_eq(i - mu);
        double scale = row.cwiseAbs().maxCoeff();
        scale = scale > 0.0 ? 1.0 / scale : 1.0;
        row *= scale;
        b *= scale;
        double sign = (b < 0.0) ? -1.0 : 1.0;
        t.row(i).head(n) = sign * row;
        if (i < mu) {
            t(i, n + i) = sign;  // slack (+1) or surplus (-1 after flip)
        }
        t(i, cols) = sign * b;
        if (needs_art[static_cast<std::size_t>(i)]) {
            t(i, art) = 1.0;
            tab.basis()[static_cast<std::size_t>(i)] = art;
            ++art;
        } else {
            tab.basis()[static_cast<std::size_t>(i)] = n + i;
        }
    }

    Solution sol;
    std::vector<bool> blocked(static_cast<std::size_t>(cols), false);

    if (n_art > 0) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
        phase1.tail(n_art).setOnes();
        tab.load_objective(phase1);
        Status s = tab.run(blocked, options, sol.iterations);
        if (s == Status::IterationLimit) {
            sol.status = s;
            return sol;
        }
        const double infeas = -tab.objective_rhs();
        if (infeas > options.feasibility_tol * std::max<double>(1.0, static_cast<double>(m))) {
            sol.status = Status::Infeasible;
            return sol;
        }
        // Drive remaining artificials out of the basis.
        for (Index i = 0; i < m; ++i) {
            if (tab.basis()[static_cast<std::size_t>(i)] >= n + mu) {
                for (Index j = 0; j < n + mu; ++j) {
                    if (std::abs(t(i, j)) > options.pivot_tol) {
                        tab.pivot(i, j);
                        break;
                    }
                }
            }
        }
        for (Index j = n + mu; j < cols; ++j) {
            blocked[static_cast<std::size_t>(j)] = true;
        }
    }

    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
    phase2.head(n) = problem.cost;
    tab.load_objective(phase2);
    sol.status = tab.run(blocked, options, sol.iterations);
    if (sol.status != Status::Optimal) {
        return sol;
    }
    sol.x = Eigen::VectorXd::Zero(n);
    for (Index i = 0; i < m; ++i) {
        const Index b = tab.basis()[static_cast<std::size_t>(i)];
        if (b < n) {
            sol.x(b) = std::max(0.0, tab.rhs(i));
        }
    }
    sol.objective = problem.cost.dot(sol.x);
    return sol;
}

} // namespace bufnet::lp
