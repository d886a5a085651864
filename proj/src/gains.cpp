#include "bufnet/gains.hpp"

#include "bufnet/lp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bufnet {

std::string_view to_string(GainNorm n) noexcept { return n == GainNorm::L1 ? "l1" : "linf"; }

std::string_view to_string(GainMethod m) noexcept {
    switch (m) {
    case GainMethod::Lp: return "lp";
    case GainMethod::Resolvent: return "resolvent";
    case GainMethod::MonteCarlo: return "monte-carlo";
    }
    return "unknown";
}

namespace {

double strict_margin(const SwitchedSystem& sys) {
    double scale = 1.0;
    for (const ModeSystem& m : sys.modes) {
        scale = std::max(scale, m.A.cwiseAbs().maxCoeff());
    }
    return kStrictMargin * scale;
}

std::vector<Eigen::VectorXd> split_blocks(const Eigen::VectorXd& stacked, Index modes, Index n) {
    std::vector<Eigen::VectorXd> out;
    for (Index i = 0; i < modes; ++i) {
        out.emplace_back(stacked.segment(i * n, n));
    }
    return out;
}

void require_stable(const SwitchedSystem& sys) {
    const StabilityReport st = stability_check(sys);
    if (!st.stable) {
        std::ostringstream os;
        os << "lifted matrix abscissa " << st.abscissa << " is not negative";
        throw Error(Errc::Unstable, os.str());
    }
}

} // namespace

Eigen::MatrixXd lifted_matrix(const SwitchedSystem& sys) {
    const Index N = sys.num_modes();
    const Index n = sys.state_dim();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(N * n, N * n);
    for (Index i = 0; i < N; ++i) {
        L.block(i * n, i * n, n, n) = sys.modes[static_cast<std::size_t>(i)].A;
        for (Index j = 0; j < N; ++j) {
            L.block(i * n, j * n, n, n).diagonal().array() += sys.rates(j, i);
        }
    }
    return L;
}

StabilityReport stability_check(const SwitchedSystem& sys) {
    const Eigen::MatrixXd L = lifted_matrix(sys);
    Eigen::EigenSolver<Eigen::MatrixXd> es(L, false);
    StabilityReport r;
    r.abscissa = es.eigenvalues().real().maxCoeff();
    r.stable = r.abscissa < 0.0;
    if (r.stable) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(-L.transpose());
        if (!lu.isInvertible()) {
            r.stable = false;
            return r;
        }
        const Eigen::VectorXd p = lu.solve(Eigen::VectorXd::Ones(L.rows()));
        if ((p.array() <= 0.0).any()) {
            r.stable = false;
            return r;
        }
        r.certificate = split_blocks(p, sys.num_modes(), sys.state_dim());
    }
    return r;
}

StabilityReport stability_check(const BufferNetwork& net, const TuningParams& p) {
    return stability_check(assemble_switched(net, p));
}

GainReport lp_gain(const SwitchedSystem& sys, GainNorm norm) {
    require_stable(sys);
    const Index N = sys.num_modes();
    const Index n = sys.state_dim();
    const Index s = sys.input_dim();
    const Index r = sys.output_dim();
    const Index nv = N * n + 1;
    const Index gamma = N * n;
    const double eps = strict_margin(sys);

    lp::Problem prob;
    prob.cost = Eigen::VectorXd::Zero(nv);
    prob.cost(gamma) = 1.0;
    const Index bound_rows = norm == GainNorm::L1 ? s : r;
    prob.A_ub = Eigen::MatrixXd::Zero(N * n + N * bound_rows, nv);
    prob.b_ub = Eigen::VectorXd::Zero(prob.A_ub.rows());

    Index row = 0;
    for (Index i = 0; i < N; ++i) {
        const ModeSystem& m = sys.modes[static_cast<std::size_t>(i)];
        for (Index k = 0; k < n; ++k, ++row) {
            if (norm == GainNorm::L1) {
                // (v_i^T A_i)_k = sum_j A_i(j, k) v_ij
                prob.A_ub.block(row, i * n, 1, n) = m.A.col(k).transpose();
                prob.b_ub(row) = -m.G_out.col(k).sum() - eps;
            } else {
                prob.A_ub.block(row, i * n, 1, n) = m.A.row(k);
                prob.b_ub(row) = -m.G_in.row(k).sum() - eps;
            }
            for (Index j = 0; j < N; ++j) {
                prob.A_ub(row, j * n + k) += sys.rates(i, j);
            }
        }
    }
    for (Index i = 0; i < N; ++i) {
        const ModeSystem& m = sys.modes[static_cast<std::size_t>(i)];
        for (Index k = 0; k < bound_rows; ++k, ++row) {
            if (norm == GainNorm::L1) {
                prob.A_ub.block(row, i * n, 1, n) = m.G_in.col(k).transpose();
            } else {
                prob.A_ub.block(row, i * n, 1, n) = m.G_out.row(k);
            }
            prob.A_ub(row, gamma) = -1.0;
        }
    }

    const lp::Solution sol = lp::solve(prob);
    if (sol.status != lp::Status::Optimal) {
        throw Error(Errc::LpInfeasible,
                    std::string("gain LP ended with status ") + std::string(lp::to_string(sol.status)));
    }
    GainReport rep;
    rep.gamma = sol.x(gamma);
    rep.norm = norm;
    rep.method = GainMethod::Lp;
    rep.certificates = split_blocks(sol.x.head(N * n), N, n);
    rep.lp_iterations = sol.iterations;
    rep.min_slack = certificate_slack(sys, rep);
    return rep;
}

GainReport l1_gain(const SwitchedSystem& sys) { return lp_gain(sys, GainNorm::L1); }

GainReport l1_gain(const BufferNetwork& net, const TuningParams& p) {
    return l1_gain(assemble_switched(net, p));
}

GainReport linf_gain(const SwitchedSystem& sys) { return lp_gain(sys, GainNorm::Linf); }

GainReport linf_gain(const BufferNetwork& net, const TuningParams& p) {
    return linf_gain(assemble_switched(net, p));
}

double certificate_slack(const SwitchedSystem& sys, const GainReport& report) {
    const Index N = sys.num_modes();
    double slack = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < N; ++i) {
        const ModeSystem& m = sys.modes[static_cast<std::size_t>(i)];
        const Eigen::VectorXd& vi = report.certificates[static_cast<std::size_t>(i)];
        slack = std::min(slack, vi.minCoeff());
        Eigen::VectorXd lhs;
        Eigen::VectorXd bound;
        if (report.norm == GainNorm::L1) {
            lhs = m.A.transpose() * vi + m.G_out.colwise().sum().transpose();
            bound = m.G_in.transpose() * vi;
        } else {
            lhs = m.A * vi + m.G_in.rowwise().sum();
            bound = m.G_out * vi;
        }
        for (Index j = 0; j < N; ++j) {
            lhs += sys.rates(i, j) * report.certificates[static_cast<std::size_t>(j)];
        }
        slack = std::min(slack, (-lhs).minCoeff());
        slack = std::min(slack, (report.gamma - bound.array()).minCoeff());
    }
    return slack;
}

double resolvent_gain(const SwitchedSystem& sys, GainNorm norm) {
    if (sys.num_modes() != 1) {
        throw Error(Errc::MultiMode, "resolvent gain needs a single-mode system");
    }
    const ModeSystem& m = sys.modes.front();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(-m.A);
    if (!lu.isInvertible()) {
        throw Error(Errc::Singular, "state matrix is singular");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(m.A, false);
    if (!(es.eigenvalues().real().maxCoeff() < 0.0)) {
        throw Error(Errc::Unstable, "state matrix is not Hurwitz");
    }
    const Eigen::MatrixXd G = m.G_out * lu.solve(m.G_in);
    if (norm == GainNorm::L1) {
        return G.cwiseAbs().colwise().sum().maxCoeff();
    }
    return G.cwiseAbs().rowwise().sum().maxCoeff();
}

double resolvent_gain(const BufferNetwork& net, const TuningParams& p, GainNorm norm) {
    return resolvent_gain(assemble_switched(net, p), norm);
}

} // namespace bufnet
