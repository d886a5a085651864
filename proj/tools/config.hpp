#pragma once

#include <optional>
#include <string>

#include "bufnet/netmodel.hpp"
#include "bufnet/problems.hpp"

// JSON network/cost configuration. Node numbers are 1-based. Every object
// rejects keys it does not know.
//
// {
//   "nodes": 2,
//   "edges": [{"from": 1, "to": 2, "weight": 1.0}],   // or "weight": [w_mode1, null, ...]
//   "origins": [1],
//   "destinations": [2],
//   "markov": {"rates": [[-1, 1], [1, -1]]},          // optional, default one mode
//   "alpha": 0.0,                                     // optional
//   "bounds": {"beta_bar": 2, "delta_bar": [2, ...], "beta_min": ..., "delta_min": ...},
//   "params": {"beta": 1, "delta": [1, ...]},         // optional
//   "input_matrices": [[[1], [0]], ...],              // optional, one n x |origins| per mode
//   "costs": {"g": "linear", "h": [{"c": 1, "exponent": 1}], "budget": 3, "gamma_bound": 1}
// }
//
// Scalars given for a per-destination or per-edge vector apply to every
// entry. A cost list of terms applies to every destination (edge); a list
// of lists gives one posynomial per destination (edge, in config order).

namespace bufnet::config {

struct ConfigData {
    NetworkSpec network;
    std::optional<TuningParams> params;
    std::optional<CostModel> cost;
};

/// Throws Error(InvalidConfig) naming "source:line:column" for malformed
/// JSON and the key path for schema violations.
ConfigData parse_config(const std::string& text, const std::string& source = "<config>");
ConfigData load_config(const std::string& path);

} // namespace bufnet::config
