#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "bufnet/dcsolve.hpp"
#include "bufnet/gains.hpp"
#include "bufnet/netmodel.hpp"

namespace bufnet {

/// c * x^e with c > 0.
struct CostTerm {
    double coeff = 1.0;
    double exponent = 1.0;
};

/// L(beta, delta) = sum_d g_d(beta_d) + sum_e h_e(delta_e), every g_d and h_e
/// a univariate posynomial given by its terms. An empty list costs nothing.
struct CostModel {
    std::vector<std::vector<CostTerm>> g;  // per destination
    std::vector<std::vector<CostTerm>> h;  // per union edge
    std::optional<double> budget;
    std::optional<double> gamma_bound;

    /// g_d(beta) = beta and h_e(delta) = delta.
    static CostModel linear(const BufferNetwork& net);
};

/// Throws NonPosynomialCost (nonpositive or non-finite coefficient,
/// non-finite exponent, wrong list sizes, or no term at all).
void check_cost(const CostModel& cost, const BufferNetwork& net);

double evaluate_cost(const CostModel& cost, const TuningParams& p);

enum class EdgeSharing { PerEdge, PerNode };

/// Slots of the log variables: gamma = exp(g) (L1 programs only),
/// v_i = exp(nu_i), beta = exp(phi), delta = exp(eta).
struct VariableMap {
    Index gamma = -1;
    Index nu_offset = 0;
    Index num_modes = 1;
    Index num_nodes = 0;
    Index phi_offset = 0;
    Index num_phi = 0;
    Index eta_offset = 0;
    Index num_eta = 0;
    /// Union edge -> eta slot (relative to eta_offset).
    std::vector<Index> eta_of_edge;

    Index dim() const { return eta_offset + num_eta; }
    Index nu(Index mode, Index node) const { return nu_offset + mode * num_nodes + node; }
    Index phi(Index dest_slot) const { return phi_offset + dest_slot; }
    Index eta(Index edge) const { return eta_offset + eta_of_edge[static_cast<std::size_t>(edge)]; }
};

struct ProblemInstance {
    DCProgram program;
    VariableMap map;
    GainNorm norm = GainNorm::L1;
    EdgeSharing sharing = EdgeSharing::PerEdge;
};

/// Bounds of the log-certificate and log-gain variables.
inline constexpr double kLogCertificateBound = 40.0;

/// minimize g subject to, for every mode i and node k,
///   log[ sum_{k->l} delta w e^{nu_il} + sum_{j!=i} pi_ij e^{nu_jk} + 1 + alpha sum_{k->l} delta w ]
///     - log[ (sum_{k->l} delta w + beta_k + (-pi_ii)) e^{nu_ik} ] <= 0,
/// log(v_i^T G_in column) - g <= 0, log L <= log budget, phi <= log beta_bar,
/// eta <= log delta_bar. Throws NonPosynomialCost, EmptyDestinations,
/// NoDecay, InvalidConfig (missing budget or unbounded box).
ProblemInstance build_l1_problem(const BufferNetwork& net, const CostModel& cost,
                                 EdgeSharing sharing = EdgeSharing::PerEdge);

/// minimize log L subject to, for every mode i and node k,
///   log[ sum_{l->k} delta w e^{nu_il} + sum_{j!=i} pi_ij e^{nu_jk} + (G_in 1)_k ]
///     - log[ (sum_{k->l} delta w + beta_k + (-pi_ii)) e^{nu_ik} ] <= 0,
/// G_out(delta) v_i <= gamma_bound row by row, and the same box rows.
/// Throws as build_l1_problem plus NonpositiveGammaBound.
ProblemInstance build_linf_problem(const BufferNetwork& net, const CostModel& cost,
                                   EdgeSharing sharing = EdgeSharing::PerEdge);

/// Same program with one delta shared by all out-edges of each node.
ProblemInstance build_gp_baseline(const BufferNetwork& net, const CostModel& cost,
                                  GainNorm norm = GainNorm::L1);

ProblemInstance build_problem(const BufferNetwork& net, const CostModel& cost, GainNorm norm,
                              EdgeSharing sharing = EdgeSharing::PerEdge);

/// beta = exp(phi), delta = exp(eta), clamped into the box when outside by
/// at most 1e-9 relative; further out throws BoundViolation.
TuningParams extract_solution(const Eigen::VectorXd& w, const VariableMap& map, const BufferNetwork& net);

/// Log variables reproducing `p`, with the certificate slots filled from the
/// gain LP at p (or the stability certificate, or zeros) and g = log gamma.
Eigen::VectorXd initial_point(const ProblemInstance& inst, const BufferNetwork& net, const TuningParams& p);

struct OptimizationResult {
    TuningParams params;
    DCSolution solution;
    /// exp(g) for L1 programs, otherwise the gain bound.
    double gamma_solver = 0.0;
    double cost = 0.0;
    /// Gain of the extracted parameters recomputed by the LP.
    GainReport revalidated;
};

/// Builds, solves and revalidates. Throws what the builders and solve_dc
/// throw, and Unstable or LpInfeasible when the extracted parameters do
/// not pass the gain LP.
OptimizationResult optimize(const BufferNetwork& net, const CostModel& cost, GainNorm norm,
                            const SolveOptions& opts, EdgeSharing sharing = EdgeSharing::PerEdge);

} // namespace bufnet
