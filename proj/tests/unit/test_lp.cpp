#include "catch_amalgamated.hpp"

#include "bufnet/lp.hpp"

#include <limits>
#include <random>

using namespace bufnet;
using Catch::Approx;
using Eigen::Index;

namespace {

// Minimum of c^T x over {A x <= b, x >= 0} by enumerating every vertex.
double vertex_oracle(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const Index n = c.size();
    const Index m = A.rows();
    Eigen::MatrixXd all(m + n, n);
    Eigen::VectorXd rhs(m + n);
    all << A, -Eigen::MatrixXd::Identity(n, n);
    rhs << b, Eigen::VectorXd::Zero(n);
    const Index rows = m + n;
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(static_cast<std::size_t>(rows), false);
    std::fill(pick.end() - n, pick.end(), true);
    do {
        Eigen::MatrixXd M(n, n);
        Eigen::VectorXd r(n);
        Index k = 0;
        for (Index i = 0; i < rows; ++i) {
            if (pick[static_cast<std::size_t>(i)]) {
                M.row(k) = all.row(i);
                r(k++) = rhs(i);
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        if (lu.rank() < n) {
            continue;
        }
        Eigen::VectorXd x = lu.solve(r);
        if (((all * x - rhs).array() <= 1e-9).all()) {
            best = std::min(best, c.dot(x));
        }
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

} // namespace

TEST_CASE("simplex solves a textbook problem") {
    lp::Problem p;
    p.cost = Eigen::Vector2d(-3.0, -5.0);
    p.A_ub = (Eigen::MatrixXd(3, 2) << 1, 0, 0, 2, 3, 2).finished();
    p.b_ub = Eigen::Vector3d(4.0, 12.0, 18.0);
    lp::Solution s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    CHECK(s.objective == Approx(-36.0));
    CHECK(s.x(0) == Approx(2.0));
    CHECK(s.x(1) == Approx(6.0));
}

TEST_CASE("simplex with equality rows") {
    lp::Problem p;
    p.cost = Eigen::Vector3d(1.0, 2.0, 3.0);
    p.A_ub = Eigen::MatrixXd(0, 3);
    p.b_ub = Eigen::VectorXd(0);
    p.A_eq = (Eigen::MatrixXd(1, 3) << 1, 1, 1).finished();
    p.b_eq = Eigen::VectorXd::Constant(1, 2.0);
    lp::Solution s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    CHECK(s.objective == Approx(2.0));
    CHECK(s.x(0) == Approx(2.0));
}

TEST_CASE("simplex reports infeasible and unbounded problems") {
    lp::Problem inf;
    inf.cost = Eigen::VectorXd::Ones(1);
    inf.A_ub = (Eigen::MatrixXd(1, 1) << 1).finished();
    inf.b_ub = Eigen::VectorXd::Constant(1, -1.0);
    CHECK(lp::solve(inf).status == lp::Status::Infeasible);

    lp::Problem unb;
    unb.cost = Eigen::Vector2d(-1.0, 0.0);
    unb.A_ub = (Eigen::MatrixXd(1, 2) << -1, 1).finished();
    unb.b_ub = Eigen::VectorXd::Constant(1, 1.0);
    CHECK(lp::solve(unb).status == lp::Status::Unbounded);
}

TEST_CASE("simplex handles a degenerate vertex") {
    lp::Problem p;
    p.cost = Eigen::Vector2d(-1.0, -1.0);
    p.A_ub = (Eigen::MatrixXd(3, 2) << 1, 1, 1, 0, 0, 1).finished();
    p.b_ub = Eigen::Vector3d(1.0, 1.0, 1.0);
    lp::Solution s = lp::solve(p);
    REQUIRE(s.status == lp::Status::Optimal);
    CHECK(s.objective == Approx(-1.0));
}

TEST_CASE("simplex agrees with vertex enumeration on random small problems") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        const Index n = 2 + k % 2;
        const Index m = 3 + k % 3;
        Eigen::MatrixXd A(m + 1, n);
        Eigen::VectorXd b(m + 1);
        Eigen::VectorXd c(n);
        for (Index i = 0; i < m; ++i) {
            for (Index j = 0; j < n; ++j) {
                A(i, j) = u(rng);
            }
            b(i) = u(rng) + 0.5;
        }
        A.row(m).setOnes();
        b(m) = 10.0;
        for (Index j = 0; j < n; ++j) {
            c(j) = u(rng);
        }
        const double oracle = vertex_oracle(c, A, b);
        lp::Solution s = lp::solve({c, A, b, Eigen::MatrixXd(0, n), Eigen::VectorXd(0)});
        if (std::isinf(oracle)) {
            CHECK(s.status == lp::Status::Infeasible);
        } else {
            REQUIRE(s.status == lp::Status::Optimal);
            CHECK(s.objective == Approx(oracle).margin(1e-9));
            CHECK(((A * s.x - b).array() <= 1e-9).all());
            CHECK((s.x.array() >= -1e-12).all());
        }
    }
}
