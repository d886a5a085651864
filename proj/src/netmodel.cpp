#include "bufnet/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

namespace bufnet {

namespace {

std::string node_name(Index node) { return "node " + std::to_string(node + 1); }

std::string edge_name(Index from, Index to) {
    return "edge (" + std::to_string(from + 1) + "," + std::to_string(to + 1) + ")";
}

bool contains(const std::vector<Index>& v, Index x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

void check_node(Index node, Index n, const std::string& where) {
    if (node < 0 || node >= n) {
        throw Error(Errc::NodeOutOfRange,
                    where + " references node " + std::to_string(node + 1) + " outside 1.." +
                        std::to_string(n));
    }
}

void check_terminals(Index n, const std::vector<Index>& origins,
                     const std::vector<Index>& destinations) {
    if (origins.empty()) {
        throw Error(Errc::EmptyOrigins, "at least one origin is required");
    }
    if (destinations.empty()) {
        throw Error(Errc::EmptyDestinations, "at least one destination is required");
    }
    for (Index o : origins) {
        check_node(o, n, "origin list");
    }
    for (Index d : destinations) {
        check_node(d, n, "destination list");
        if (contains(origins, d)) {
            throw Error(Errc::OverlappingTerminals, node_name(d) + " is both origin and destination");
        }
    }
    std::set<Index> uo(origins.begin(), origins.end());
    std::set<Index> ud(destinations.begin(), destinations.end());
    if (uo.size() != origins.size() || ud.size() != destinations.size()) {
        throw Error(Errc::OverlappingTerminals, "origin/destination lists contain repeated nodes");
    }
}

} // namespace

bool Graph::is_origin(Index node) const { return contains(origins_, node); }

bool Graph::is_destination(Index node) const { return contains(destinations_, node); }

std::optional<Index> Graph::find_edge(Index from, Index to) const {
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        if (edges_[k].from == from && edges_[k].to == to) {
            return static_cast<Index>(k);
        }
    }
    return std::nullopt;
}

Graph build_graph(const GraphSpec& spec) {
    if (spec.nodes <= 0) {
        throw Error(Errc::NodeOutOfRange, "graph needs at least one node");
    }
    const Index n = spec.nodes;
    check_terminals(n, spec.origins, spec.destinations);

    std::set<std::pair<Index, Index>> seen;
    for (const Edge& e : spec.edges) {
        check_node(e.from, n, edge_name(e.from, e.to));
        check_node(e.to, n, edge_name(e.from, e.to));
        if (e.from == e.to) {
            throw Error(Errc::SelfLoop, edge_name(e.from, e.to) + " is a self-loop");
        }
        if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
            std::ostringstream os;
            os << edge_name(e.from, e.to) << " has weight " << e.weight;
            throw Error(Errc::NonpositiveWeight, os.str());
        }
        if (!seen.emplace(e.from, e.to).second) {
            throw Error(Errc::DuplicateEdge, edge_name(e.from, e.to) + " is listed twice");
        }
    }
    for (const Edge& e : spec.edges) {
        if (contains(spec.origins, e.to)) {
            throw Error(Errc::OriginHasInflow,
                        node_name(e.to) + " is an origin but receives " + edge_name(e.from, e.to));
        }
        if (contains(spec.destinations, e.from)) {
            throw Error(Errc::DestinationHasOutflow, node_name(e.from) +
                                                         " is a destination but emits " +
                                                         edge_name(e.from, e.to));
        }
    }

    Graph g;
    g.nodes_ = n;
    g.edges_ = spec.edges;
    g.origins_ = spec.origins;
    g.destinations_ = spec.destinations;
    return g;
}

Eigen::MatrixXd adjacency(const Graph& g) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.num_nodes(), g.num_nodes());
    for (const Edge& e : g.edges()) {
        a(e.to, e.from) = e.weight;
    }
    return a;
}

GeneratorReport validate_generator(const Eigen::MatrixXd& rates, double tol) {
    GeneratorReport report;
    if (rates.rows() != rates.cols() || rates.rows() == 0) {
        report.violations.push_back({Errc::RowSumNonzero, 0, 0, std::numeric_limits<double>::quiet_NaN()});
        report.warnings.push_back("rate matrix must be square and nonempty");
        return report;
    }
    const Index n = rates.rows();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            if (!(rates(i, j) >= 0.0)) {
                report.violations.push_back({Errc::NegativeRate, i, j, rates(i, j)});
            } else if (rates(i, j) == 0.0) {
                report.warnings.push_back("rate from mode " + std::to_string(i) + " to mode " +
                                          std::to_string(j) + " is zero");
            }
        }
        const double sum = rates.row(i).sum();
        if (!(std::abs(sum) <= tol)) {
            report.violations.push_back({Errc::RowSumNonzero, i, i, sum});
        }
    }
    return report;
}

MarkovChain::MarkovChain(Eigen::MatrixXd rates) : rates_(std::move(rates)) {
    GeneratorReport report = validate_generator(rates_);
    if (!report.ok()) {
        const GeneratorViolation& v = report.violations.front();
        std::ostringstream os;
        if (v.code == Errc::NegativeRate) {
            os << "rate(" << v.row << "," << v.col << ") = " << v.value;
        } else {
            os << "row " << v.row << " sums to " << v.value;
        }
        throw Error(v.code, os.str());
    }
    warnings_ = std::move(report.warnings);
}

BufferNetwork::BufferNetwork(const NetworkSpec& spec) : chain_(spec.rates) {
    nodes_ = spec.nodes;
    alpha_ = spec.alpha;
    origins_ = spec.origins;
    destinations_ = spec.destinations;
    if (!(alpha_ >= 0.0) || !std::isfinite(alpha_)) {
        throw Error(Errc::DimensionMismatch, "alpha must be finite and nonnegative");
    }
    if (nodes_ <= 0) {
        throw Error(Errc::NodeOutOfRange, "network needs at least one node");
    }
    check_terminals(nodes_, origins_, destinations_);

    const Index modes = chain_.num_modes();
    const auto m = static_cast<Index>(spec.edges.size());
    weights_ = Eigen::MatrixXd::Zero(m, modes);
    std::set<std::pair<Index, Index>> seen;
    for (Index k = 0; k < m; ++k) {
        const auto& es = spec.edges[static_cast<std::size_t>(k)];
        if (!seen.emplace(es.from, es.to).second) {
            throw Error(Errc::DuplicateEdge, edge_name(es.from, es.to) + " is listed twice");
        }
        if (static_cast<Index>(es.weights.size()) != modes) {
            throw Error(Errc::ModeMismatch, edge_name(es.from, es.to) + " has " +
                                                std::to_string(es.weights.size()) +
                                                " weights for " + std::to_string(modes) + " modes");
        }
        bool present = false;
        for (Index i = 0; i < modes; ++i) {
            const auto& w = es.weights[static_cast<std::size_t>(i)];
            if (w) {
                if (!(*w > 0.0) || !std::isfinite(*w)) {
                    std::ostringstream os;
                    os << edge_name(es.from, es.to) << " has weight " << *w << " in mode " << i + 1;
                    throw Error(Errc::NonpositiveWeight, os.str());
                }
                weights_(k, i) = *w;
                present = true;
            }
        }
        if (!present) {
            throw Error(Errc::NonpositiveWeight,
                        edge_name(es.from, es.to) + " has no positive weight in any mode");
        }
        edges_.push_back({es.from, es.to, 1.0});
    }

    for (Index i = 0; i < modes; ++i) {
        GraphSpec gs;
        gs.nodes = nodes_;
        gs.origins = origins_;
        gs.destinations = destinations_;
        for (Index k = 0; k < m; ++k) {
            if (weights_(k, i) > 0.0) {
                gs.edges.push_back({edges_[static_cast<std::size_t>(k)].from,
                                    edges_[static_cast<std::size_t>(k)].to, weights_(k, i)});
            }
        }
        graphs_.push_back(build_graph(gs));
    }

    const Index nd = num_destinations();
    const double inf = std::numeric_limits<double>::infinity();
    bounds_ = spec.bounds;
    auto fill = [](Eigen::VectorXd& v, Index size, double value) {
        if (v.size() == 0) {
            v = Eigen::VectorXd::Constant(size, value);
        }
    };
    fill(bounds_.beta_bar, nd, inf);
    fill(bounds_.delta_bar, m, inf);
    if (bounds_.beta_bar.size() != nd || bounds_.delta_bar.size() != m) {
        throw Error(Errc::DimensionMismatch, "bound vectors do not match destination/edge counts");
    }
    if (bounds_.beta_min.size() == 0) {
        bounds_.beta_min = (bounds_.beta_bar.array().isFinite())
                               .select(bounds_.beta_bar * kDefaultMinRatio, 0.0);
    }
    if (bounds_.delta_min.size() == 0) {
        bounds_.delta_min = (bounds_.delta_bar.array().isFinite())
                                .select(bounds_.delta_bar * kDefaultMinRatio, 0.0);
    }
    if (bounds_.beta_min.size() != nd || bounds_.delta_min.size() != m) {
        throw Error(Errc::DimensionMismatch, "bound vectors do not match destination/edge counts");
    }
    for (Index k = 0; k < nd; ++k) {
        if (!(bounds_.beta_bar(k) > 0.0) || bounds_.beta_min(k) < 0.0 ||
            bounds_.beta_min(k) > bounds_.beta_bar(k)) {
            throw Error(Errc::ParamOutOfBounds, "invalid beta limits at " + node_name(destinations_[static_cast<std::size_t>(k)]));
        }
    }
    for (Index k = 0; k < m; ++k) {
        if (!(bounds_.delta_bar(k) > 0.0) || bounds_.delta_min(k) < 0.0 ||
            bounds_.delta_min(k) > bounds_.delta_bar(k)) {
            throw Error(Errc::ParamOutOfBounds, "invalid delta limits at " + edge_label(k));
        }
    }

    const Index s = num_origins();
    Eigen::MatrixXd canonical = Eigen::MatrixXd::Zero(nodes_, s);
    for (Index k = 0; k < s; ++k) {
        canonical(origins_[static_cast<std::size_t>(k)], k) = 1.0;
    }
    if (spec.input_matrices.empty()) {
        inputs_.assign(static_cast<std::size_t>(modes), canonical);
    } else {
        if (static_cast<Index>(spec.input_matrices.size()) != modes) {
            throw Error(Errc::ModeMismatch, "one input matrix per mode is required");
        }
        for (const auto& g : spec.input_matrices) {
            if (g.rows() != nodes_ || g.cols() != s) {
                throw Error(Errc::DimensionMismatch, "input matrix must be nodes x origins");
            }
            if ((g.array() < 0.0).any() || !g.allFinite()) {
                throw Error(Errc::DimensionMismatch, "input matrix must be nonnegative");
            }
        }
        inputs_ = spec.input_matrices;
    }
}

const Eigen::MatrixXd& BufferNetwork::input_matrix(Index mode) const {
    return inputs_.at(static_cast<std::size_t>(mode));
}

std::optional<Index> BufferNetwork::destination_slot(Index node) const {
    auto it = std::find(destinations_.begin(), destinations_.end(), node);
    if (it == destinations_.end()) {
        return std::nullopt;
    }
    return static_cast<Index>(it - destinations_.begin());
}

std::optional<Index> BufferNetwork::find_edge(Index from, Index to) const {
    for (std::size_t k = 0; k < edges_.size(); ++k) {
        if (edges_[k].from == from && edges_[k].to == to) {
            return static_cast<Index>(k);
        }
    }
    return std::nullopt;
}

BufferNetwork BufferNetwork::with_alpha(double alpha) const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw Error(Errc::DimensionMismatch, "alpha must be finite and nonnegative");
    }
    BufferNetwork copy = *this;
    copy.alpha_ = alpha;
    return copy;
}

TuningParams BufferNetwork::upper_params() const { return {bounds_.beta_bar, bounds_.delta_bar}; }

std::string BufferNetwork::edge_label(Index edge) const {
    const Edge& e = edges_.at(static_cast<std::size_t>(edge));
    return std::to_string(e.from + 1) + "_" + std::to_string(e.to + 1);
}

void check_params(const BufferNetwork& net, const TuningParams& p) {
    if (p.beta.size() != net.num_destinations() || p.delta.size() != net.num_edges()) {
        throw Error(Errc::DimensionMismatch, "tuning parameters do not match network size");
    }
    const ParamBounds& b = net.bounds();
    for (Index k = 0; k < p.beta.size(); ++k) {
        if (!(p.beta(k) > 0.0) || !(p.beta(k) <= b.beta_bar(k))) {
            std::ostringstream os;
            os << "beta at " << node_name(net.destinations()[static_cast<std::size_t>(k)]) << " = "
               << p.beta(k) << " outside (0, " << b.beta_bar(k) << "]";
            throw Error(Errc::ParamOutOfBounds, os.str());
        }
    }
    for (Index k = 0; k < p.delta.size(); ++k) {
        if (!(p.delta(k) > 0.0) || !(p.delta(k) <= b.delta_bar(k))) {
            const Edge& e = net.edges()[static_cast<std::size_t>(k)];
            std::ostringstream os;
            os << "delta on " << edge_name(e.from, e.to) << " = " << p.delta(k) << " outside (0, "
               << b.delta_bar(k) << "]";
            throw Error(Errc::ParamOutOfBounds, os.str());
        }
    }
}

DecomposedA decompose_A(const BufferNetwork& net, const TuningParams& p, Index mode) {
    check_params(net, p);
    if (mode < 0 || mode >= net.num_modes()) {
        throw Error(Errc::ModeMismatch, "mode " + std::to_string(mode) + " out of range");
    }
    const Index n = net.num_nodes();
    DecomposedA out{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (Index k = 0; k < net.num_edges(); ++k) {
        const double w = net.weight(k, mode);
        if (w > 0.0) {
            const Edge& e = net.edges()[static_cast<std::size_t>(k)];
            out.off(e.to, e.from) = p.delta(k) * w;
        }
    }
    out.decay.diagonal() = out.off.colwise().sum().transpose();
    for (Index k = 0; k < net.num_destinations(); ++k) {
        const Index d = net.destinations()[static_cast<std::size_t>(k)];
        out.decay(d, d) += p.beta(k);
    }
    return out;
}

ModeSystem assemble_system(const BufferNetwork& net, const TuningParams& p, Index mode) {
    const DecomposedA parts = decompose_A(net, p, mode);
    const Index n = net.num_nodes();
    const Index m = net.num_edges();

    ModeSystem sys;
    sys.alpha = net.alpha();
    sys.A = parts.off - parts.decay;
    sys.G_in = net.input_matrix(mode);
    sys.G_out = Eigen::MatrixXd::Zero(n + m, n);
    sys.G_out.topRows(n).setIdentity();
    for (Index k = 0; k < m; ++k) {
        const double w = net.weight(k, mode);
        if (w > 0.0) {
            sys.G_out(n + k, net.edges()[static_cast<std::size_t>(k)].from) = net.alpha() * p.delta(k) * w;
        }
    }
    return sys;
}

SwitchedSystem assemble_switched(const BufferNetwork& net, const TuningParams& p) {
    SwitchedSystem sys;
    sys.rates = net.chain().rates();
    for (Index i = 0; i < net.num_modes(); ++i) {
        sys.modes.push_back(assemble_system(net, p, i));
    }
    return sys;
}

DynamicPricing carsharing_params(double base_demand, double base_price, double elasticity,
                                 double weight) {
    if (!(elasticity > 0.0)) {
        throw Error(Errc::NonpositiveElasticity,
                    "price elasticity must be positive, got " + std::to_string(elasticity));
    }
    if (!(base_demand > 0.0) || !(base_price > 0.0) || !(weight > 0.0)) {
        throw Error(Errc::NonpositiveInput, "demand, price and weight must be positive");
    }
    DynamicPricing d;
    d.base_demand = base_demand;
    d.base_price = base_price;
    d.elasticity = elasticity;
    d.weight = weight;
    d.price_offset = base_price + base_demand / elasticity;
    return d;
}

} // namespace bufnet
