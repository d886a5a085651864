#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "bufnet/error.hpp"

namespace bufnet {

using Index = Eigen::Index;

/// Directed edge `from -> to` between 0-based node indices.
struct Edge {
    Index from = 0;
    Index to = 0;
    double weight = 1.0;
};

struct GraphSpec {
    Index nodes = 0;
    std::vector<Edge> edges;
    std::vector<Index> origins;
    std::vector<Index> destinations;
};

/// Validated weighted digraph with origin (no inflow) and destination
/// (no outflow) node sets. Only `build_graph` creates one.
class Graph {
public:
    Index num_nodes() const { return nodes_; }
    Index num_edges() const { return static_cast<Index>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Index>& origins() const { return origins_; }
    const std::vector<Index>& destinations() const { return destinations_; }

    bool is_origin(Index node) const;
    bool is_destination(Index node) const;
    std::optional<Index> find_edge(Index from, Index to) const;

private:
    friend Graph build_graph(const GraphSpec& spec);

    Index nodes_ = 0;
    std::vector<Edge> edges_;
    std::vector<Index> origins_;
    std::vector<Index> destinations_;
};

/// Throws Error with OriginHasInflow, DestinationHasOutflow, NonpositiveWeight,
/// DuplicateEdge, SelfLoop, NodeOutOfRange, EmptyOrigins, EmptyDestinations or
/// OverlappingTerminals.
Graph build_graph(const GraphSpec& spec);

/// Entry (i, j) is the weight of edge j -> i; column j holds node j's
/// outgoing weights.
Eigen::MatrixXd adjacency(const Graph& g);

template <typename Derived>
bool metzler_check(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols()) {
        return false;
    }
    for (Index j = 0; j < m.cols(); ++j) {
        for (Index i = 0; i < m.rows(); ++i) {
            if (i != j && !(m(i, j) >= 0)) {
                return false;
            }
        }
    }
    return true;
}

struct GeneratorViolation {
    Errc code = Errc::RowSumNonzero;  // RowSumNonzero or NegativeRate
    Index row = 0;
    Index col = 0;
    double value = 0.0;
};

struct GeneratorReport {
    std::vector<GeneratorViolation> violations;
    std::vector<std::string> warnings;

    bool ok() const { return violations.empty(); }
};

inline constexpr double kGeneratorRowTol = 1e-12;

/// Checks zero row sums (absolute tolerance `tol`) and nonnegative
/// off-diagonal rates. Zero off-diagonal rates are accepted with a warning.
GeneratorReport validate_generator(const Eigen::MatrixXd& rates, double tol = kGeneratorRowTol);

/// Transition-rate matrix of the mode process.
class MarkovChain {
public:
    MarkovChain() : MarkovChain(Eigen::MatrixXd::Zero(1, 1)) {}
    /// Throws the first violation reported by validate_generator.
    explicit MarkovChain(Eigen::MatrixXd rates);

    Index num_modes() const { return rates_.rows(); }
    const Eigen::MatrixXd& rates() const { return rates_; }
    double rate(Index from, Index to) const { return rates_(from, to); }
    double exit_rate(Index mode) const { return -rates_(mode, mode); }
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    Eigen::MatrixXd rates_;
    std::vector<std::string> warnings_;
};

/// Box for the tuning parameters. `*_bar` are the upper limits; `*_min` only
/// bound the optimizer's search box and are not enforced on analysis.
struct ParamBounds {
    Eigen::VectorXd beta_bar;
    Eigen::VectorXd delta_bar;
    Eigen::VectorXd beta_min;
    Eigen::VectorXd delta_min;
};

/// beta is indexed like BufferNetwork::destinations(), delta like
/// BufferNetwork::edges().
struct TuningParams {
    Eigen::VectorXd beta;
    Eigen::VectorXd delta;
};

struct ModeSystem {
    Eigen::MatrixXd A;      // n x n, Metzler
    Eigen::MatrixXd G_in;   // n x s
    Eigen::MatrixXd G_out;  // (n + m) x n
    double alpha = 0.0;
};

struct DecomposedA {
    Eigen::MatrixXd off;    // D o A_G, nonnegative
    Eigen::MatrixXd decay;  // diagonal outflow plus destination decay, nonnegative
};

struct SwitchedSystem {
    std::vector<ModeSystem> modes;
    Eigen::MatrixXd rates;

    Index num_modes() const { return static_cast<Index>(modes.size()); }
    Index state_dim() const { return modes.front().A.rows(); }
    Index input_dim() const { return modes.front().G_in.cols(); }
    Index output_dim() const { return modes.front().G_out.rows(); }
};

struct NetworkSpec {
    struct EdgeSpec {
        Index from = 0;
        Index to = 0;
        /// One entry per mode; nullopt means the edge is absent in that mode.
        std::vector<std::optional<double>> weights;
    };

    Index nodes = 0;
    std::vector<EdgeSpec> edges;
    std::vector<Index> origins;
    std::vector<Index> destinations;
    Eigen::MatrixXd rates = Eigen::MatrixXd::Zero(1, 1);
    double alpha = 0.0;
    /// Empty vectors fall back to defaults: infinite upper limits and
    /// lower search limits of 1e-3 times the upper limit.
    ParamBounds bounds;
    /// Optional per-mode input matrices (n x |origins|); empty means the
    /// canonical injection into each origin.
    std::vector<Eigen::MatrixXd> input_matrices;
};

inline constexpr double kDefaultMinRatio = 1e-3;

/// Network whose per-mode graphs share nodes, origins and destinations. The
/// tuning variables live on the union of the per-mode edge sets.
class BufferNetwork {
public:
    explicit BufferNetwork(const NetworkSpec& spec);

    Index num_nodes() const { return nodes_; }
    Index num_edges() const { return static_cast<Index>(edges_.size()); }
    Index num_modes() const { return chain_.num_modes(); }
    Index num_origins() const { return static_cast<Index>(origins_.size()); }
    Index num_destinations() const { return static_cast<Index>(destinations_.size()); }
    Index num_outputs() const { return nodes_ + num_edges(); }

    /// Union edge list; Edge::weight is unused here, see weight().
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<Index>& origins() const { return origins_; }
    const std::vector<Index>& destinations() const { return destinations_; }
    const Graph& graph(Index mode) const { return graphs_.at(static_cast<std::size_t>(mode)); }
    const MarkovChain& chain() const { return chain_; }
    const ParamBounds& bounds() const { return bounds_; }
    double alpha() const { return alpha_; }

    /// Weight of union edge `edge` in `mode`; 0 when absent.
    double weight(Index edge, Index mode) const { return weights_(edge, mode); }
    const Eigen::MatrixXd& weights() const { return weights_; }
    const Eigen::MatrixXd& input_matrix(Index mode) const;

    std::optional<Index> destination_slot(Index node) const;
    std::optional<Index> find_edge(Index from, Index to) const;

    /// Copy with a different output weight.
    BufferNetwork with_alpha(double alpha) const;

    /// Params at the upper limits of the box.
    TuningParams upper_params() const;

    std::string node_label(Index node) const { return std::to_string(node + 1); }
    std::string edge_label(Index edge) const;

private:
    Index nodes_ = 0;
    std::vector<Edge> edges_;
    Eigen::MatrixXd weights_;
    std::vector<Index> origins_;
    std::vector<Index> destinations_;
    std::vector<Graph> graphs_;
    MarkovChain chain_;
    ParamBounds bounds_;
    double alpha_ = 0.0;
    std::vector<Eigen::MatrixXd> inputs_;
};

/// Throws ParamOutOfBounds unless 0 < beta <= beta_bar and 0 < delta <= delta_bar.
void check_params(const BufferNetwork& net, const TuningParams& p);

/// A = D o A_G - diag(1^T (D o A_G)) - B, G_in, and G_out = [I_n; alpha H(delta)]
/// with H(l, e_l.from) = delta_l * w_l.
ModeSystem assemble_system(const BufferNetwork& net, const TuningParams& p, Index mode);

/// A = off - decay with both parts entrywise nonnegative.
DecomposedA decompose_A(const BufferNetwork& net, const TuningParams& p, Index mode);

SwitchedSystem assemble_switched(const BufferNetwork& net, const TuningParams& p);

/// Affine price/demand model of a car-sharing link with state-dependent
/// pricing p = p_hat - w x. The induced demand is the linear flow delta * w * x.
struct DynamicPricing {
    double base_demand = 0.0;
    double base_price = 0.0;
    double elasticity = 0.0;
    double weight = 0.0;
    double price_offset = 0.0;  // p_hat

    double price(double vehicles) const { return price_offset - weight * vehicles; }
    double demand(double p) const { return base_demand - elasticity * (p - base_price); }
    double flow(double vehicles) const { return elasticity * weight * vehicles; }
};

DynamicPricing carsharing_params(double base_demand, double base_price, double elasticity,
                                 double weight);

} // namespace bufnet
