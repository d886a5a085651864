#include "catch_amalgamated.hpp"

#include "bufnet/netmodel.hpp"
#include "instances.hpp"

using namespace bufnet;
using Catch::Matchers::ContainsSubstring;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return Errc::InvalidConfig;
}

GraphSpec chain2() {
    return {2, {{0, 1, 1.0}}, {0}, {1}};
}

NetworkSpec path3(double w12, double w23) {
    NetworkSpec s;
    s.nodes = 3;
    s.edges = {{0, 1, {w12}}, {1, 2, {w23}}};
    s.origins = {0};
    s.destinations = {2};
    return s;
}

} // namespace

TEST_CASE("build_graph accepts the smallest chain and a path") {
    Graph g = build_graph(chain2());
    CHECK(g.num_nodes() == 2);
    CHECK(g.num_edges() == 1);
    CHECK(g.is_origin(0));
    CHECK(g.is_destination(1));

    Graph p = build_graph({3, {{0, 1, 1.0}, {1, 2, 1.0}}, {0}, {2}});
    CHECK_FALSE(p.is_origin(1));
    CHECK_FALSE(p.is_destination(1));
    CHECK(p.find_edge(1, 2).value() == 1);
    CHECK_FALSE(p.find_edge(2, 1).has_value());
}

TEST_CASE("build_graph rejects structural violations") {
    CHECK(code_of([] { build_graph({2, {{0, 1, 1.0}, {1, 0, 1.0}}, {0}, {1}}); }) == Errc::OriginHasInflow);
    CHECK(code_of([] { build_graph({3, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}}, {0}, {2}}); }) ==
          Errc::DestinationHasOutflow);
    CHECK(code_of([] { build_graph({2, {{0, 1, 0.0}}, {0}, {1}}); }) == Errc::NonpositiveWeight);
    CHECK(code_of([] { build_graph({2, {{0, 1, -1.0}}, {0}, {1}}); }) == Errc::NonpositiveWeight);
    CHECK(code_of([] { build_graph({2, {{0, 1, 1.0}, {0, 1, 2.0}}, {0}, {1}}); }) == Errc::DuplicateEdge);
    CHECK(code_of([] { build_graph({3, {{1, 1, 1.0}}, {0}, {2}}); }) == Errc::SelfLoop);
    CHECK(code_of([] { build_graph({2, {{0, 5, 1.0}}, {0}, {1}}); }) == Errc::NodeOutOfRange);
    CHECK(code_of([] { build_graph({2, {}, {}, {1}}); }) == Errc::EmptyOrigins);
    CHECK(code_of([] { build_graph({2, {}, {0}, {}}); }) == Errc::EmptyDestinations);
    CHECK(code_of([] { build_graph({2, {}, {0}, {0, 1}}); }) == Errc::OverlappingTerminals);
}

TEST_CASE("build_graph names the offending node in its message") {
    try {
        build_graph({2, {{0, 1, 1.0}, {1, 0, 1.0}}, {0}, {1}});
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK_THAT(e.what(), ContainsSubstring("1"));
    }
}

TEST_CASE("adjacency stores weight of j->i at (i, j)") {
    Eigen::MatrixXd a = adjacency(build_graph(chain2()));
    CHECK(a == (Eigen::MatrixXd(2, 2) << 0, 0, 1, 0).finished());

    Eigen::MatrixXd empty = adjacency(build_graph({2, {}, {0}, {1}}));
    CHECK(empty.isZero(0));

    Eigen::MatrixXd p = adjacency(build_graph({3, {{0, 1, 2.0}, {1, 2, 3.0}}, {0}, {2}}));
    Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(3, 3);
    expect(1, 0) = 2.0;
    expect(2, 1) = 3.0;
    CHECK(p == expect);
}

TEST_CASE("adjacency has zero destination columns and origin rows") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        BufferNetwork net = testing::random_network(seed);
        const Graph& g = net.graph(0);
        Eigen::MatrixXd a = adjacency(g);
        for (Index d : g.destinations()) {
            CHECK(a.col(d).isZero(0));
        }
        for (Index o : g.origins()) {
            CHECK(a.row(o).isZero(0));
        }
    }
}

TEST_CASE("assemble_system on the two-node chain") {
    BufferNetwork net = testing::e1_network();
    ModeSystem s = assemble_system(net, testing::e1_params(1.0, 1.0), 0);
    CHECK(s.A == (Eigen::MatrixXd(2, 2) << -1, 0, 1, -1).finished());
    CHECK(s.G_in == (Eigen::MatrixXd(2, 1) << 1, 0).finished());
    REQUIRE(s.G_out.rows() == 3);
    CHECK(s.G_out.topRows(2) == Eigen::MatrixXd::Identity(2, 2));
    CHECK(s.G_out.row(2).isZero(0));

    ModeSystem s2 = assemble_system(net, testing::e1_params(1.0, 2.0), 0);
    CHECK(s2.A == (Eigen::MatrixXd(2, 2) << -2, 0, 2, -1).finished());
}

TEST_CASE("edge output rows report the flow delta * w * x_from") {
    BufferNetwork net = testing::e1_network(2.0, 0.5).with_alpha(3.0);
    ModeSystem s = assemble_system(net, testing::e1_params(1.0, 1.5), 0);
    CHECK(s.G_out(2, 0) == Catch::Approx(3.0 * 1.5 * 0.5));
    CHECK(s.G_out(2, 1) == 0.0);
}

TEST_CASE("assemble_system rejects parameters outside the box") {
    BufferNetwork net = testing::e1_network();
    CHECK(code_of([&] { assemble_system(net, testing::e1_params(1.0, 0.0), 0); }) == Errc::ParamOutOfBounds);
    CHECK(code_of([&] { assemble_system(net, testing::e1_params(-1.0, 1.0), 0); }) == Errc::ParamOutOfBounds);
    CHECK(code_of([&] { assemble_system(net, testing::e1_params(2.5, 1.0), 0); }) == Errc::ParamOutOfBounds);
    CHECK_NOTHROW(assemble_system(net, testing::e1_params(2.0, 2.0), 0));
}

TEST_CASE("decompose_A splits into nonnegative parts") {
    BufferNetwork net = testing::e1_network();
    DecomposedA d = decompose_A(net, testing::e1_params(1.0, 1.0), 0);
    CHECK(d.off == (Eigen::MatrixXd(2, 2) << 0, 0, 1, 0).finished());
    CHECK(d.decay == Eigen::MatrixXd::Identity(2, 2));

    BufferNetwork p = BufferNetwork(path3(2.0, 3.0));
    TuningParams tp{Eigen::VectorXd::Constant(1, 0.7), (Eigen::VectorXd(2) << 1.0, 0.5).finished()};
    DecomposedA dp = decompose_A(p, tp, 0);
    CHECK(dp.decay(1, 1) == Catch::Approx(0.5 * 3.0));
    CHECK(dp.decay(2, 2) == Catch::Approx(0.7));
    CHECK(dp.decay(0, 0) == Catch::Approx(2.0));
}

TEST_CASE("structural invariants on random networks") {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        testing::RandomSpec spec;
        spec.modes = 1 + static_cast<Index>(seed % 3);
        BufferNetwork net = testing::random_network(seed, spec);
        TuningParams p = testing::random_params(net, seed + 100);
        for (Index i = 0; i < net.num_modes(); ++i) {
            ModeSystem s = assemble_system(net, p, i);
            DecomposedA d = decompose_A(net, p, i);
            CHECK(s.A == d.off - d.decay);
            CHECK(metzler_check(s.A));
            CHECK((d.off.array() >= 0).all());
            CHECK((d.decay.array() >= 0).all());
            CHECK((s.G_in.array() >= 0).all());
            CHECK((s.G_out.array() >= 0).all());

            Eigen::RowVectorXd cols = s.A.colwise().sum();
            for (Index k = 0; k < net.num_nodes(); ++k) {
                auto slot = net.destination_slot(k);
                const double expect = slot ? -p.beta(*slot) : 0.0;
                CHECK(cols(k) == Catch::Approx(expect).margin(1e-12));
            }
        }
    }
}

TEST_CASE("validate_generator") {
    CHECK(validate_generator((Eigen::MatrixXd(2, 2) << -1, 1, 1, -1).finished()).ok());
    CHECK(validate_generator(Eigen::MatrixXd::Zero(1, 1)).ok());

    GeneratorReport bad = validate_generator((Eigen::MatrixXd(2, 2) << -1, 0.5, 1, -1).finished());
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.violations.front().code == Errc::RowSumNonzero);
    CHECK(bad.violations.front().row == 0);

    GeneratorReport neg = validate_generator((Eigen::MatrixXd(2, 2) << 1, -1, 1, -1).finished());
    REQUIRE_FALSE(neg.ok());
    CHECK(neg.violations.front().code == Errc::NegativeRate);

    GeneratorReport sparse = validate_generator((Eigen::MatrixXd(3, 3) << -1, 1, 0, 0, -1, 1, 1, 0, -1).finished());
    CHECK(sparse.ok());
    CHECK_FALSE(sparse.warnings.empty());

    CHECK(code_of([] { MarkovChain((Eigen::MatrixXd(2, 2) << -1, 0.5, 1, -1).finished()); }) ==
          Errc::RowSumNonzero);
}

TEST_CASE("metzler_check") {
    CHECK(metzler_check((Eigen::MatrixXd(2, 2) << -1, 0, 1, -1).finished()));
    CHECK_FALSE(metzler_check((Eigen::MatrixXd(2, 2) << -1, -0.1, 1, -1).finished()));
    CHECK(metzler_check(Eigen::Matrix3d::Identity()));
}

TEST_CASE("carsharing_params") {
    DynamicPricing d = carsharing_params(10.0, 5.0, 2.0, 0.5);
    CHECK(d.price_offset == Catch::Approx(10.0));
    CHECK(carsharing_params(10.0, 5.0, 1e9, 0.5).price_offset == Catch::Approx(5.0).epsilon(1e-6));
    CHECK(d.flow(3.0) == Catch::Approx(3.0));
    CHECK(d.demand(d.price(3.0)) == Catch::Approx(d.flow(3.0)));
    CHECK(code_of([] { carsharing_params(10.0, 5.0, 0.0, 0.5); }) == Errc::NonpositiveElasticity);
}

TEST_CASE("per-mode weights and missing edges") {
    NetworkSpec s = path3(1.0, 1.0);
    s.edges.push_back({0, 2, {}});
    s.rates = (Eigen::MatrixXd(2, 2) << -1, 1, 1, -1).finished();
    s.edges[0].weights = {1.0, 2.0};
    s.edges[1].weights = {1.0, 1.0};
    s.edges[2].weights = {std::nullopt, 0.5};
    BufferNetwork net(s);
    CHECK(net.num_edges() == 3);
    CHECK(net.weight(2, 0) == 0.0);
    CHECK(net.weight(2, 1) == 0.5);
    CHECK(net.graph(0).num_edges() == 2);
    CHECK(net.graph(1).num_edges() == 3);

    NetworkSpec bad = s;
    bad.edges[0].weights = {1.0};
    CHECK(code_of([&] { BufferNetwork{bad}; }) == Errc::ModeMismatch);
}
