#include "catch_amalgamated.hpp"

#include "bufnet/posylog.hpp"

#include <cmath>
#include <random>

using namespace bufnet;
using namespace bufnet::posy;
using Catch::Approx;

namespace {

Posynomiald random_posynomial(const VariableSpace& vs, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nterms(1, 8);
    std::uniform_real_distribution<double> coeff(0.1, 3.0);
    std::uniform_real_distribution<double> expo(-2.0, 2.0);
    std::bernoulli_distribution present(0.6);
    std::vector<Monomiald> terms;
    const int k = nterms(rng);
    for (int t = 0; t < k; ++t) {
        std::vector<Monomiald::Power> p;
        for (Index i = 0; i < vs.dim(); ++i) {
            if (present(rng)) {
                p.emplace_back(i, expo(rng));
            }
        }
        terms.emplace_back(coeff(rng), p);
    }
    return Posynomiald(tag_of(vs), terms);
}

Eigen::VectorXd random_point(Index dim, std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::VectorXd w(dim);
    for (Index i = 0; i < dim; ++i) {
        w(i) = u(rng);
    }
    return w;
}

} // namespace

TEST_CASE("eval_monomial") {
    Monomiald m(2.0, {{0, 0.5}, {1, -1.0}});
    CHECK(eval_monomial(m, Eigen::Vector2d(4.0, 2.0)) == Approx(2.0));
    CHECK(eval_monomial(Monomiald(1.0), Eigen::Vector2d(7.0, 0.3)) == 1.0);
    try {
        eval_monomial(Monomiald::variable(0, 1.0, 3.0), Eigen::VectorXd::Zero(1));
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonpositiveInput);
    }
    CHECK_THROWS_AS(Monomiald(0.0), Error);
    CHECK_THROWS_AS(Monomiald(-1.0), Error);
}

TEST_CASE("eval_posynomial") {
    VariableSpace vs = VariableSpace::anonymous(2);
    Posynomiald f(tag_of(vs), {Monomiald::variable(0), Monomiald(1.0, {{0, 1.0}, {1, 1.0}})});
    CHECK(eval_posynomial(f, Eigen::Vector2d(1.0, 1.0)) == Approx(2.0));

    VariableSpace one = VariableSpace::anonymous(1);
    Posynomiald g(tag_of(one), {Monomiald::variable(0, 1.0, 2.0)});
    CHECK(eval_posynomial(g, Eigen::VectorXd::Constant(1, 3.0)) == Approx(6.0));

    std::mt19937_64 rng(3);
    VariableSpace v4 = VariableSpace::anonymous(4);
    for (int k = 0; k < 50; ++k) {
        Posynomiald h = random_posynomial(v4, rng);
        CHECK(eval_posynomial(h, random_point(4, rng).array().exp().matrix()) > 0.0);
    }
}

TEST_CASE("eval_posynomial is monotone in each coefficient") {
    std::mt19937_64 rng(5);
    VariableSpace vs = VariableSpace::anonymous(3);
    for (int k = 0; k < 30; ++k) {
        Posynomiald f = random_posynomial(vs, rng);
        Eigen::VectorXd v = random_point(3, rng).array().exp().matrix();
        const double base = eval_posynomial(f, v);
        for (std::size_t t = 0; t < f.size(); ++t) {
            std::vector<Monomiald> terms = f.terms();
            terms[t] = Monomiald(terms[t].coeff() * 1.5, terms[t].powers());
            CHECK(eval_posynomial(Posynomiald(f.space(), terms), v) > base);
        }
    }
}

TEST_CASE("posynomial algebra merges like terms") {
    VariableSpace vs = VariableSpace::anonymous(3);
    Posynomiald v1(tag_of(vs), {Monomiald::variable(0)});
    Posynomiald sum = posy_add(v1, v1);
    REQUIRE(sum.size() == 1);
    CHECK(sum.terms()[0].coeff() == 2.0);

    Posynomiald v12(tag_of(vs), {Monomiald::variable(0), Monomiald::variable(1)});
    Posynomiald s3 = posy_scale(v12, 3.0);
    REQUIRE(s3.size() == 2);
    CHECK(s3.terms()[0].coeff() == 3.0);
    CHECK(s3.terms()[1].coeff() == 3.0);
    CHECK_THROWS_AS(posy_scale(v12, 0.0), Error);

    Posynomiald prod = posy_mul_monomial(v12, Monomiald::variable(2, 1.0, 2.0));
    REQUIRE(prod.size() == 2);
    CHECK(prod.terms()[0].coeff() == 2.0);
    CHECK(prod.terms()[0].powers() == std::vector<Monomiald::Power>{{0, 1.0}, {2, 1.0}});
    CHECK(prod.terms()[1].powers() == std::vector<Monomiald::Power>{{1, 1.0}, {2, 1.0}});

    VariableSpace other = VariableSpace::anonymous(3);
    Posynomiald w(tag_of(other), {Monomiald::variable(0)});
    CHECK_THROWS_AS(v1 + w, Error);
}

TEST_CASE("log_transform values") {
    VariableSpace vs = VariableSpace::anonymous(2);
    LogPosynomiald m = log_transform(Posynomiald(tag_of(vs), {Monomiald(2.0, {{0, 1.0}, {1, 1.0}})}));
    CHECK(m.is_affine());
    Eigen::Vector2d w(0.3, -1.7);
    CHECK(m.value(w) == Approx(std::log(2.0) + 0.3 - 1.7));

    LogPosynomiald f = log_transform(Posynomiald(tag_of(vs), {Monomiald::variable(0), Monomiald::variable(1)}));
    CHECK(f.value(Eigen::Vector2d::Zero()) == Approx(std::log(2.0)));
    Eigen::VectorXd g = f.gradient(Eigen::Vector2d::Zero());
    CHECK(g(0) == Approx(0.5));
    CHECK(g(1) == Approx(0.5));

    CHECK(f.value(Eigen::Vector2d(800.0, 800.0)) == Approx(800.0 + std::log(2.0)));
}

TEST_CASE("log_transform of a product is the sum of the affine transforms") {
    VariableSpace vs = VariableSpace::anonymous(3);
    Monomiald a(1.5, {{0, 2.0}, {2, -1.0}});
    Monomiald b(0.2, {{1, 0.5}, {2, 3.0}});
    LogPosynomiald fa = log_transform(Posynomiald(tag_of(vs), {a}));
    LogPosynomiald fb = log_transform(Posynomiald(tag_of(vs), {b}));
    LogPosynomiald fab = log_transform(Posynomiald(tag_of(vs), {a * b}));
    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd w = random_point(3, rng);
        CHECK(fab.value(w) == Approx(fa.value(w) + fb.value(w)).margin(1e-12));
    }
}

TEST_CASE("log-sum-exp gradient and Hessian match finite differences") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dims(1, 6);
    const double h = 1e-6;
    for (int k = 0; k < 200; ++k) {
        VariableSpace vs = VariableSpace::anonymous(dims(rng));
        LogPosynomiald f = log_transform(random_posynomial(vs, rng));
        Eigen::VectorXd w = random_point(vs.dim(), rng);
        Eigen::VectorXd g = f.gradient(w);
        Eigen::MatrixXd H = f.hessian(w);
        for (Index i = 0; i < vs.dim(); ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Unit(vs.dim(), i) * h;
            const double fd = (f.value(w + e) - f.value(w - e)) / (2 * h);
            CHECK(std::abs(fd - g(i)) <= 1e-5 * std::max(1.0, std::abs(g(i))));
            Eigen::VectorXd hd = (f.gradient(w + e) - f.gradient(w - e)) / (2 * h);
            CHECK((hd - H.col(i)).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, H.col(i).cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("log_transform is midpoint convex") {
    std::mt19937_64 rng(13);
    VariableSpace vs = VariableSpace::anonymous(4);
    for (int k = 0; k < 50; ++k) {
        LogPosynomiald f = log_transform(random_posynomial(vs, rng));
        for (int s = 0; s < 20; ++s) {
            Eigen::VectorXd a = random_point(4, rng, 5.0);
            Eigen::VectorXd b = random_point(4, rng, 5.0);
            CHECK(f.value(0.5 * (a + b)) <= 0.5 * (f.value(a) + f.value(b)) + 1e-12);
        }
    }
}

TEST_CASE("linearize_concave") {
    VariableSpace vs = VariableSpace::anonymous(2);
    Posynomiald mono(tag_of(vs), {Monomiald(3.0, {{0, -1.0}, {1, 2.0}})});
    AffineFormd tm = linearize_concave(mono, Eigen::Vector2d(0.4, 0.9));
    std::mt19937_64 rng(17);
    for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd w = random_point(2, rng);
        CHECK(tm(w) == Approx(log_transform(mono).value(w)).margin(1e-12));
    }

    Posynomiald q(tag_of(vs), {Monomiald::variable(0), Monomiald::variable(1)});
    AffineFormd t = linearize_concave(q, Eigen::Vector2d::Zero());
    CHECK(t.constant == Approx(std::log(2.0)));
    CHECK(t.slope(0) == Approx(0.5));
    CHECK(t.slope(1) == Approx(0.5));
}

TEST_CASE("tangent never exceeds the transformed posynomial") {
    std::mt19937_64 rng(19);
    VariableSpace vs = VariableSpace::anonymous(5);
    for (int c = 0; c < 20; ++c) {
        Posynomiald q = random_posynomial(vs, rng);
        LogPosynomiald f = log_transform(q);
        AffineFormd t = linearize_concave(q, random_point(5, rng));
        for (int s = 0; s < 1000; ++s) {
            Eigen::VectorXd w = random_point(5, rng, 4.0);
            CHECK(t(w) <= f.value(w) + 1e-12);
        }
    }
}

TEST_CASE("DC constraints require a shared space and nonempty sides") {
    VariableSpace vs = VariableSpace::anonymous(2);
    VariableSpace other = VariableSpace::anonymous(2);
    Posynomiald p(tag_of(vs), {Monomiald::variable(0)});
    Posynomiald q(tag_of(vs), {Monomiald::variable(1)});
    DCConstraintd c(p, q, "x <= y");
    CHECK(c.value(Eigen::Vector2d(1.0, 3.0)) == Approx(-2.0));
    CHECK_THROWS_AS(DCConstraintd(p, Posynomiald(tag_of(other), {Monomiald::variable(0)})), Error);
    CHECK_THROWS_AS(DCConstraintd(p, Posynomiald(tag_of(vs))), Error);
}

TEST_CASE("variable space names") {
    VariableSpace vs({{"gamma", 1}, {"nu", 3}});
    CHECK(vs.dim() == 4);
    CHECK(vs.variable_name(0) == "gamma");
    CHECK(vs.variable_name(2) == "nu[1]");
    CHECK(VariableSpace::anonymous(1).id() != VariableSpace::anonymous(1).id());
}
