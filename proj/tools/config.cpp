#include "config.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bufnet::config {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error(Errc::InvalidConfig, where + ": " + what);
}

void allow_keys(const json& obj, const std::string& where, const std::set<std::string>& keys) {
    if (!obj.is_object()) {
        fail(where, "expected an object");
    }
    for (const auto& [k, v] : obj.items()) {
        if (!keys.count(k)) {
            fail(where, "unknown key '" + k + "'");
        }
    }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) {
        fail(where, "missing key '" + key + "'");
    }
    return obj.at(key);
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) {
        fail(where, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        fail(where, "expected a finite number");
    }
    return x;
}

Index node_index(const json& v, Index nodes, const std::string& where) {
    if (!v.is_number_integer()) {
        fail(where, "expected a node number");
    }
    const auto k = v.get<long long>();
    if (k < 1 || k > nodes) {
        fail(where, "node " + std::to_string(k) + " is outside 1.." + std::to_string(nodes));
    }
    return static_cast<Index>(k - 1);
}

std::vector<Index> node_list(const json& v, Index nodes, const std::string& where) {
    if (!v.is_array()) {
        fail(where, "expected an array of node numbers");
    }
    std::vector<Index> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        out.push_back(node_index(v[k], nodes, where + "[" + std::to_string(k) + "]"));
    }
    return out;
}

Eigen::VectorXd vector_or_scalar(const json& v, Index size, const std::string& where) {
    if (v.is_number()) {
        return Eigen::VectorXd::Constant(size, number(v, where));
    }
    if (!v.is_array() || static_cast<Index>(v.size()) != size) {
        fail(where, "expected a number or an array of " + std::to_string(size) + " numbers");
    }
    Eigen::VectorXd out(size);
    for (Index k = 0; k < size; ++k) {
        out(k) = number(v[static_cast<std::size_t>(k)], where + "[" + std::to_string(k) + "]");
    }
    return out;
}

Eigen::MatrixXd matrix(const json& v, Index rows, Index cols, const std::string& where) {
    if (!v.is_array() || static_cast<Index>(v.size()) != rows) {
        fail(where, "expected " + std::to_string(rows) + " rows");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const json& row = v[static_cast<std::size_t>(i)];
        const std::string rw = where + "[" + std::to_string(i) + "]";
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            fail(rw, "expected " + std::to_string(cols) + " entries");
        }
        for (Index j = 0; j < cols; ++j) {
            m(i, j) = number(row[static_cast<std::size_t>(j)], rw + "[" + std::to_string(j) + "]");
        }
    }
    return m;
}

std::vector<CostTerm> term_list(const json& v, const std::string& where) {
    std::vector<CostTerm> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string tw = where + "[" + std::to_string(k) + "]";
        allow_keys(v[k], tw, {"c", "exponent"});
        out.push_back({number(require(v[k], "c", tw), tw + ".c"), number(require(v[k], "exponent", tw), tw + ".exponent")});
    }
    return out;
}

std::vector<std::vector<CostTerm>> cost_lists(const json& v, Index size, const std::string& where) {
    if (v.is_string()) {
        if (v.get<std::string>() != "linear") {
            fail(where, "the only named cost is \"linear\"");
        }
        return std::vector<std::vector<CostTerm>>(static_cast<std::size_t>(size), {CostTerm{1.0, 1.0}});
    }
    if (!v.is_array()) {
        fail(where, "expected \"linear\", a list of terms or a list of term lists");
    }
    if (v.empty() || v[0].is_object()) {
        return std::vector<std::vector<CostTerm>>(static_cast<std::size_t>(size), term_list(v, where));
    }
    if (static_cast<Index>(v.size()) != size) {
        fail(where, "expected " + std::to_string(size) + " term lists");
    }
    std::vector<std::vector<CostTerm>> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string lw = where + "[" + std::to_string(k) + "]";
        if (!v[k].is_array()) {
            fail(lw, "expected a list of terms");
        }
        out.push_back(term_list(v[k], lw));
    }
    return out;
}

std::string position(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

} // namespace

ConfigData parse_config(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        const auto colon = msg.find(": ");
        if (colon != std::string::npos) {
            msg = msg.substr(colon + 2);
        }
        throw Error(Errc::InvalidConfig, source + ":" + position(text, e.byte) + ": malformed JSON: " + msg);
    }

    allow_keys(root, source, {"nodes", "edges", "origins", "destinations", "markov", "alpha", "bounds", "params",
                              "input_matrices", "costs"});
    ConfigData out;
    NetworkSpec& net = out.network;

    const json& jn = require(root, "nodes", source);
    if (!jn.is_number_integer() || jn.get<long long>() < 1) {
        fail("nodes", "expected a positive integer");
    }
    net.nodes = static_cast<Index>(jn.get<long long>());
    net.origins = node_list(require(root, "origins", source), net.nodes, "origins");
    net.destinations = node_list(require(root, "destinations", source), net.nodes, "destinations");

    if (root.contains("markov")) {
        allow_keys(root["markov"], "markov", {"rates"});
        const json& r = require(root["markov"], "rates", "markov");
        if (!r.is_array() || r.empty()) {
            fail("markov.rates", "expected a square matrix");
        }
        net.rates = matrix(r, static_cast<Index>(r.size()), static_cast<Index>(r.size()), "markov.rates");
    }
    const Index modes = net.rates.rows();

    const json& je = require(root, "edges", source);
    if (!je.is_array()) {
        fail("edges", "expected an array");
    }
    for (std::size_t k = 0; k < je.size(); ++k) {
        const std::string ew = "edges[" + std::to_string(k) + "]";
        allow_keys(je[k], ew, {"from", "to", "weight"});
        NetworkSpec::EdgeSpec e;
        e.from = node_index(require(je[k], "from", ew), net.nodes, ew + ".from");
        e.to = node_index(require(je[k], "to", ew), net.nodes, ew + ".to");
        const json& w = require(je[k], "weight", ew);
        if (w.is_number()) {
            e.weights.assign(static_cast<std::size_t>(modes), number(w, ew + ".weight"));
        } else if (w.is_array() && static_cast<Index>(w.size()) == modes) {
            for (std::size_t m = 0; m < w.size(); ++m) {
                if (w[m].is_null()) {
                    e.weights.emplace_back(std::nullopt);
                } else {
                    e.weights.emplace_back(number(w[m], ew + ".weight[" + std::to_string(m) + "]"));
                }
            }
        } else {
            fail(ew + ".weight", "expected a number or one entry (number or null) per mode");
        }
        net.edges.push_back(std::move(e));
    }
    const auto nd = static_cast<Index>(net.destinations.size());
    const auto ne = static_cast<Index>(net.edges.size());

    if (root.contains("alpha")) {
        net.alpha = number(root["alpha"], "alpha");
    }
    if (root.contains("bounds")) {
        const json& b = root["bounds"];
        allow_keys(b, "bounds", {"beta_bar", "delta_bar", "beta_min", "delta_min"});
        if (b.contains("beta_bar")) {
            net.bounds.beta_bar = vector_or_scalar(b["beta_bar"], nd, "bounds.beta_bar");
        }
        if (b.contains("delta_bar")) {
            net.bounds.delta_bar = vector_or_scalar(b["delta_bar"], ne, "bounds.delta_bar");
        }
        if (b.contains("beta_min")) {
            net.bounds.beta_min = vector_or_scalar(b["beta_min"], nd, "bounds.beta_min");
        }
        if (b.contains("delta_min")) {
            net.bounds.delta_min = vector_or_scalar(b["delta_min"], ne, "bounds.delta_min");
        }
    }
    if (root.contains("params")) {
        const json& p = root["params"];
        allow_keys(p, "params", {"beta", "delta"});
        out.params = TuningParams{vector_or_scalar(require(p, "beta", "params"), nd, "params.beta"),
                                  vector_or_scalar(require(p, "delta", "params"), ne, "params.delta")};
    }
    if (root.contains("input_matrices")) {
        const json& g = root["input_matrices"];
        if (!g.is_array() || static_cast<Index>(g.size()) != modes) {
            fail("input_matrices", "expected one matrix per mode");
        }
        for (std::size_t m = 0; m < g.size(); ++m) {
            net.input_matrices.push_back(matrix(g[m], net.nodes, static_cast<Index>(net.origins.size()),
                                                "input_matrices[" + std::to_string(m) + "]"));
        }
    }
    if (root.contains("costs")) {
        const json& c = root["costs"];
        allow_keys(c, "costs", {"g", "h", "budget", "gamma_bound"});
        CostModel cost;
        cost.g = c.contains("g") ? cost_lists(c["g"], nd, "costs.g")
                                 : std::vector<std::vector<CostTerm>>(static_cast<std::size_t>(nd));
        cost.h = c.contains("h") ? cost_lists(c["h"], ne, "costs.h")
                                 : std::vector<std::vector<CostTerm>>(static_cast<std::size_t>(ne));
        if (c.contains("budget")) {
            cost.budget = number(c["budget"], "costs.budget");
        }
        if (c.contains("gamma_bound")) {
            cost.gamma_bound = number(c["gamma_bound"], "costs.gamma_bound");
        }
        out.cost = std::move(cost);
    }
    return out;
}

ConfigData load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::InvalidConfig, "cannot open config file " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace bufnet::config
