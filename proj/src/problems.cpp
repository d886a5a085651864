#include "bufnet/problems.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace bufnet {

using posy::Monomiald;
using posy::Posynomiald;

CostModel CostModel::linear(const BufferNetwork& net) {
    CostModel c;
    c.g.assign(static_cast<std::size_t>(net.num_destinations()), {CostTerm{1.0, 1.0}});
    c.h.assign(static_cast<std::size_t>(net.num_edges()), {CostTerm{1.0, 1.0}});
    return c;
}

void check_cost(const CostModel& cost, const BufferNetwork& net) {
    if (static_cast<Index>(cost.g.size()) != net.num_destinations() ||
        static_cast<Index>(cost.h.size()) != net.num_edges()) {
        throw Error(Errc::NonPosynomialCost, "cost lists must match the destination and edge counts");
    }
    std::size_t terms = 0;
    auto check = [&](const std::vector<CostTerm>& list, const std::string& where) {
        for (const CostTerm& t : list) {
            if (!(t.coeff > 0.0) || !std::isfinite(t.coeff) || !std::isfinite(t.exponent)) {
                throw Error(Errc::NonPosynomialCost, "cost term at " + where + " needs a positive coefficient and a finite exponent");
            }
            ++terms;
        }
    };
    for (Index d = 0; d < net.num_destinations(); ++d) {
        check(cost.g[static_cast<std::size_t>(d)], "node " + net.node_label(net.destinations()[static_cast<std::size_t>(d)]));
    }
    for (Index e = 0; e < net.num_edges(); ++e) {
        check(cost.h[static_cast<std::size_t>(e)], "edge " + net.edge_label(e));
    }
    if (terms == 0) {
        throw Error(Errc::NonPosynomialCost, "cost function has no terms");
    }
}

double evaluate_cost(const CostModel& cost, const TuningParams& p) {
    double L = 0.0;
    for (std::size_t d = 0; d < cost.g.size(); ++d) {
        for (const CostTerm& t : cost.g[d]) {
            L += t.coeff * std::pow(p.beta(static_cast<Index>(d)), t.exponent);
        }
    }
    for (std::size_t e = 0; e < cost.h.size(); ++e) {
        for (const CostTerm& t : cost.h[e]) {
            L += t.coeff * std::pow(p.delta(static_cast<Index>(e)), t.exponent);
        }
    }
    return L;
}

namespace {

struct SlotBox {
    double lo = 0.0;
    double hi = 0.0;
};

std::string mode_node(Index mode, Index node) {
    return "mode " + std::to_string(mode + 1) + " node " + std::to_string(node + 1);
}

VariableMap make_map(const BufferNetwork& net, GainNorm norm, EdgeSharing sharing) {
    VariableMap m;
    Index next = 0;
    if (norm == GainNorm::L1) {
        m.gamma = next++;
    }
    m.nu_offset = next;
    m.num_modes = net.num_modes();
    m.num_nodes = net.num_nodes();
    next += m.num_modes * m.num_nodes;
    m.phi_offset = next;
    m.num_phi = net.num_destinations();
    next += m.num_phi;
    m.eta_offset = next;
    m.eta_of_edge.assign(static_cast<std::size_t>(net.num_edges()), 0);
    if (sharing == EdgeSharing::PerEdge) {
        for (Index e = 0; e < net.num_edges(); ++e) {
            m.eta_of_edge[static_cast<std::size_t>(e)] = e;
        }
        m.num_eta = net.num_edges();
    } else {
        std::vector<Index> slot_of_node(static_cast<std::size_t>(net.num_nodes()), -1);
        for (Index e = 0; e < net.num_edges(); ++e) {
            Index& s = slot_of_node[static_cast<std::size_t>(net.edges()[static_cast<std::size_t>(e)].from)];
            if (s < 0) {
                s = m.num_eta++;
            }
            m.eta_of_edge[static_cast<std::size_t>(e)] = s;
        }
    }
    return m;
}

std::vector<SlotBox> eta_boxes(const BufferNetwork& net, const VariableMap& map) {
    std::vector<SlotBox> box(static_cast<std::size_t>(map.num_eta), SlotBox{0.0, std::numeric_limits<double>::infinity()});
    for (Index e = 0; e < net.num_edges(); ++e) {
        SlotBox& b = box[static_cast<std::size_t>(map.eta_of_edge[static_cast<std::size_t>(e)])];
        b.lo = std::max(b.lo, net.bounds().delta_min(e));
        b.hi = std::min(b.hi, net.bounds().delta_bar(e));
    }
    return box;
}

void require_box(double lo, double hi, const std::string& what) {
    if (!std::isfinite(hi) || !(lo > 0.0) || !(lo < hi)) {
        throw Error(Errc::InvalidConfig, what + " needs finite limits with 0 < min < max for optimization");
    }
}

Posynomiald cost_posynomial(const CostModel& cost, const VariableMap& map, posy::SpaceTag tag) {
    Posynomiald L(tag);
    for (std::size_t d = 0; d < cost.g.size(); ++d) {
        for (const CostTerm& t : cost.g[d]) {
            L.add_term(Monomiald(t.coeff, {{map.phi(static_cast<Index>(d)), t.exponent}}));
        }
    }
    for (std::size_t e = 0; e < cost.h.size(); ++e) {
        for (const CostTerm& t : cost.h[e]) {
            L.add_term(Monomiald(t.coeff, {{map.eta(static_cast<Index>(e)), t.exponent}}));
        }
    }
    return L;
}

// (outflow + beta - pi_ii) e^{nu_ik}
Posynomiald decay_side(const BufferNetwork& net, const VariableMap& map, posy::SpaceTag tag, Index i, Index k) {
    Posynomiald Q(tag);
    const Index nu = map.nu(i, k);
    for (Index e = 0; e < net.num_edges(); ++e) {
        const double w = net.weight(e, i);
        if (w > 0.0 && net.edges()[static_cast<std::size_t>(e)].from == k) {
            Q.add_term(Monomiald(w, {{map.eta(e), 1.0}, {nu, 1.0}}));
        }
    }
    if (const auto d = net.destination_slot(k)) {
        Q.add_term(Monomiald(1.0, {{map.phi(*d), 1.0}, {nu, 1.0}}));
    }
    const double leave = -net.chain().rate(i, i);
    if (leave > 0.0) {
        Q.add_term(Monomiald(leave, {{nu, 1.0}}));
    }
    return Q;
}

void add_row(DCProgram& prog, Posynomiald P, Posynomiald Q, Index i, Index k) {
    if (P.empty()) {
        return;
    }
    if (Q.empty()) {
        throw Error(Errc::NoDecay, "node " + std::to_string(k + 1) + " has no outflow, decay or mode exit in mode " +
                                       std::to_string(i + 1));
    }
    prog.constraints.emplace_back(std::move(P), std::move(Q), "row " + mode_node(i, k));
}

void fill_certificates(Eigen::VectorXd& w, const BufferNetwork& net, const VariableMap& map, GainNorm norm) {
    TuningParams p;
    p.beta.resize(map.num_phi);
    p.delta.resize(net.num_edges());
    const ParamBounds& b = net.bounds();
    for (Index d = 0; d < map.num_phi; ++d) {
        p.beta(d) = std::clamp(std::exp(w(map.phi(d))), b.beta_min(d), b.beta_bar(d));
    }
    for (Index e = 0; e < net.num_edges(); ++e) {
        p.delta(e) = std::clamp(std::exp(w(map.eta(e))), b.delta_min(e), b.delta_bar(e));
    }
    const SwitchedSystem sys = assemble_switched(net, p);
    std::vector<Eigen::VectorXd> v;
    double gamma = 1.0;
    try {
        const GainReport rep = lp_gain(sys, norm);
        v = rep.certificates;
        gamma = rep.gamma;
    } catch (const Error&) {
        const StabilityReport st = stability_check(sys);
        if (!st.stable) {
            return;
        }
        v = st.certificate;
    }
    const double floor = std::exp(-kLogCertificateBound);
    for (Index i = 0; i < map.num_modes; ++i) {
        for (Index k = 0; k < map.num_nodes; ++k) {
            const double x = std::max(v[static_cast<std::size_t>(i)](k), floor);
            w(map.nu(i, k)) = std::clamp(std::log(x), -kLogCertificateBound, kLogCertificateBound);
        }
    }
    if (map.gamma >= 0) {
        w(map.gamma) = std::clamp(std::log(std::max(gamma, floor)), -kLogCertificateBound, kLogCertificateBound);
    }
}

} // namespace

ProblemInstance build_problem(const BufferNetwork& net, const CostModel& cost, GainNorm norm, EdgeSharing sharing) {
    if (net.num_destinations() == 0) {
        throw Error(Errc::EmptyDestinations, "network has no destination");
    }
    check_cost(cost, net);
    if (norm == GainNorm::L1) {
        if (!cost.budget || !(*cost.budget > 0.0) || !std::isfinite(*cost.budget)) {
            throw Error(Errc::InvalidConfig, "the L1 program needs a positive finite budget");
        }
    } else {
        if (!cost.gamma_bound) {
            throw Error(Errc::InvalidConfig, "the Linf program needs a gain bound");
        }
        if (!(*cost.gamma_bound > 0.0) || !std::isfinite(*cost.gamma_bound)) {
            throw Error(Errc::NonpositiveGammaBound, "gain bound must be positive and finite");
        }
    }

    ProblemInstance inst;
    inst.norm = norm;
    inst.sharing = sharing;
    inst.map = make_map(net, norm, sharing);
    const VariableMap& map = inst.map;

    std::vector<std::pair<std::string, Index>> blocks;
    if (norm == GainNorm::L1) {
        blocks.emplace_back("g", 1);
    }
    blocks.emplace_back("nu", map.num_modes * map.num_nodes);
    blocks.emplace_back("phi", map.num_phi);
    blocks.emplace_back("eta", map.num_eta);

    DCProgram& prog = inst.program;
    prog.space = posy::VariableSpace(blocks);
    const posy::SpaceTag tag = posy::tag_of(prog.space);
    const Index dim = map.dim();
    prog.lower = Eigen::VectorXd::Constant(dim, -kLogCertificateBound);
    prog.upper = Eigen::VectorXd::Constant(dim, kLogCertificateBound);
    prog.randomize.assign(static_cast<std::size_t>(dim), false);

    const ParamBounds& b = net.bounds();
    for (Index d = 0; d < map.num_phi; ++d) {
        const std::string name = "beta at node " + net.node_label(net.destinations()[static_cast<std::size_t>(d)]);
        require_box(b.beta_min(d), b.beta_bar(d), name);
        prog.lower(map.phi(d)) = std::log(b.beta_min(d));
        prog.upper(map.phi(d)) = std::log(b.beta_bar(d));
        prog.randomize[static_cast<std::size_t>(map.phi(d))] = true;
    }
    const std::vector<SlotBox> eboxes = eta_boxes(net, map);
    for (Index s = 0; s < map.num_eta; ++s) {
        require_box(eboxes[static_cast<std::size_t>(s)].lo, eboxes[static_cast<std::size_t>(s)].hi,
                    "delta slot " + std::to_string(s + 1));
        prog.lower(map.eta_offset + s) = std::log(eboxes[static_cast<std::size_t>(s)].lo);
        prog.upper(map.eta_offset + s) = std::log(eboxes[static_cast<std::size_t>(s)].hi);
        prog.randomize[static_cast<std::size_t>(map.eta_offset + s)] = true;
    }

    const Index N = net.num_modes();
    const Index n = net.num_nodes();
    const double alpha = net.alpha();

    if (norm == GainNorm::L1) {
        prog.objective = Posynomiald(tag, {Monomiald::variable(map.gamma)});
        for (Index i = 0; i < N; ++i) {
            for (Index k = 0; k < n; ++k) {
                Posynomiald P(tag);
                for (Index e = 0; e < net.num_edges(); ++e) {
                    const Edge& ed = net.edges()[static_cast<std::size_t>(e)];
                    const double w = net.weight(e, i);
                    if (w > 0.0 && ed.from == k) {
                        P.add_term(Monomiald(w, {{map.eta(e), 1.0}, {map.nu(i, ed.to), 1.0}}));
                        if (alpha > 0.0) {
                            P.add_term(Monomiald(alpha * w, {{map.eta(e), 1.0}}));
                        }
                    }
                }
                for (Index j = 0; j < N; ++j) {
                    if (j != i && net.chain().rate(i, j) > 0.0) {
                        P.add_term(Monomiald(net.chain().rate(i, j), {{map.nu(j, k), 1.0}}));
                    }
                }
                P.add_term(Monomiald(1.0));
                add_row(prog, std::move(P), decay_side(net, map, tag, i, k), i, k);
            }
        }
        for (Index i = 0; i < N; ++i) {
            const Eigen::MatrixXd& Gin = net.input_matrix(i);
            for (Index c = 0; c < Gin.cols(); ++c) {
                Posynomiald P(tag);
                for (Index k = 0; k < n; ++k) {
                    if (Gin(k, c) > 0.0) {
                        P.add_term(Monomiald(Gin(k, c), {{map.nu(i, k), 1.0}}));
                    }
                }
                if (!P.empty()) {
                    prog.constraints.emplace_back(std::move(P), Posynomiald(tag, {Monomiald::variable(map.gamma)}),
                                                  "input mode " + std::to_string(i + 1) + " column " + std::to_string(c + 1));
                }
            }
        }
        prog.constraints.emplace_back(cost_posynomial(cost, map, tag), Posynomiald(tag, {Monomiald(*cost.budget)}),
                                      "budget");
    } else {
        prog.objective = cost_posynomial(cost, map, tag);
        const double gbar = *cost.gamma_bound;
        for (Index i = 0; i < N; ++i) {
            const Eigen::VectorXd inflow = net.input_matrix(i).rowwise().sum();
            for (Index k = 0; k < n; ++k) {
                Posynomiald P(tag);
                for (Index e = 0; e < net.num_edges(); ++e) {
                    const Edge& ed = net.edges()[static_cast<std::size_t>(e)];
                    const double w = net.weight(e, i);
                    if (w > 0.0 && ed.to == k) {
                        P.add_term(Monomiald(w, {{map.eta(e), 1.0}, {map.nu(i, ed.from), 1.0}}));
                    }
                }
                for (Index j = 0; j < N; ++j) {
                    if (j != i && net.chain().rate(i, j) > 0.0) {
                        P.add_term(Monomiald(net.chain().rate(i, j), {{map.nu(j, k), 1.0}}));
                    }
                }
                if (inflow(k) > 0.0) {
                    P.add_term(Monomiald(inflow(k)));
                }
                add_row(prog, std::move(P), decay_side(net, map, tag, i, k), i, k);
            }
        }
        for (Index i = 0; i < N; ++i) {
            for (Index k = 0; k < n; ++k) {
                prog.constraints.emplace_back(Posynomiald(tag, {Monomiald::variable(map.nu(i, k))}),
                                              Posynomiald(tag, {Monomiald(gbar)}), "output " + mode_node(i, k));
            }
            if (alpha > 0.0) {
                for (Index e = 0; e < net.num_edges(); ++e) {
                    const double w = net.weight(e, i);
                    if (w > 0.0) {
                        const Edge& ed = net.edges()[static_cast<std::size_t>(e)];
                        prog.constraints.emplace_back(
                            Posynomiald(tag, {Monomiald(alpha * w, {{map.eta(e), 1.0}, {map.nu(i, ed.from), 1.0}})}),
                            Posynomiald(tag, {Monomiald(gbar)}),
                            "output mode " + std::to_string(i + 1) + " edge " + net.edge_label(e));
                    }
                }
            }
        }
    }

    for (Index d = 0; d < map.num_phi; ++d) {
        prog.constraints.emplace_back(Posynomiald(tag, {Monomiald::variable(map.phi(d))}),
                                      Posynomiald(tag, {Monomiald(b.beta_bar(d))}),
                                      "beta limit node " + net.node_label(net.destinations()[static_cast<std::size_t>(d)]));
    }
    for (Index s = 0; s < map.num_eta; ++s) {
        prog.constraints.emplace_back(Posynomiald(tag, {Monomiald::variable(map.eta_offset + s)}),
                                      Posynomiald(tag, {Monomiald(eboxes[static_cast<std::size_t>(s)].hi)}),
                                      "delta limit slot " + std::to_string(s + 1));
    }

    prog.initializer = [net, map, norm](Eigen::VectorXd& w) { fill_certificates(w, net, map, norm); };
    return inst;
}

ProblemInstance build_l1_problem(const BufferNetwork& net, const CostModel& cost, EdgeSharing sharing) {
    return build_problem(net, cost, GainNorm::L1, sharing);
}

ProblemInstance build_linf_problem(const BufferNetwork& net, const CostModel& cost, EdgeSharing sharing) {
    return build_problem(net, cost, GainNorm::Linf, sharing);
}

ProblemInstance build_gp_baseline(const BufferNetwork& net, const CostModel& cost, GainNorm norm) {
    return build_problem(net, cost, norm, EdgeSharing::PerNode);
}

TuningParams extract_solution(const Eigen::VectorXd& w, const VariableMap& map, const BufferNetwork& net) {
    if (w.size() != map.dim()) {
        throw Error(Errc::DimensionMismatch, "solution vector does not match the variable map");
    }
    constexpr double kRel = 1e-9;
    auto take = [](double x, double lo, double hi, const std::string& what) {
        if (x > hi * (1.0 + kRel) || x < lo * (1.0 - kRel)) {
            std::ostringstream os;
            os << what << " = " << x << " lies outside [" << lo << ", " << hi << "]";
            throw Error(Errc::BoundViolation, os.str());
        }
        return std::clamp(x, lo, hi);
    };
    const ParamBounds& b = net.bounds();
    TuningParams p;
    p.beta.resize(map.num_phi);
    p.delta.resize(net.num_edges());
    for (Index d = 0; d < map.num_phi; ++d) {
        p.beta(d) = take(std::exp(w(map.phi(d))), b.beta_min(d), b.beta_bar(d),
                         "beta at node " + net.node_label(net.destinations()[static_cast<std::size_t>(d)]));
    }
    for (Index e = 0; e < net.num_edges(); ++e) {
        p.delta(e) = take(std::exp(w(map.eta(e))), b.delta_min(e), b.delta_bar(e), "delta at edge " + net.edge_label(e));
    }
    return p;
}

Eigen::VectorXd initial_point(const ProblemInstance& inst, const BufferNetwork& net, const TuningParams& p) {
    const VariableMap& map = inst.map;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(map.dim());
    for (Index d = 0; d < map.num_phi; ++d) {
        w(map.phi(d)) = std::log(p.beta(d));
    }
    for (Index e = net.num_edges() - 1; e >= 0; --e) {
        w(map.eta(e)) = std::log(p.delta(e));
    }
    fill_certificates(w, net, map, inst.norm);
    return w.cwiseMax(inst.program.lower).cwiseMin(inst.program.upper);
}

OptimizationResult optimize(const BufferNetwork& net, const CostModel& cost, GainNorm norm,
                            const SolveOptions& opts, EdgeSharing sharing) {
    const ProblemInstance inst = build_problem(net, cost, norm, sharing);
    OptimizationResult r;
    r.solution = solve_dc(inst.program, opts);
    r.params = extract_solution(r.solution.w, inst.map, net);
    r.cost = evaluate_cost(cost, r.params);
    r.gamma_solver = norm == GainNorm::L1 ? std::exp(r.solution.w(inst.map.gamma)) : *cost.gamma_bound;
    r.revalidated = lp_gain(assemble_switched(net, r.params), norm);
    return r;
}

} // namespace bufnet
