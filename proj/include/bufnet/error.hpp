#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bufnet {

enum class Errc {
    // netmodel
    OriginHasInflow,
    DestinationHasOutflow,
    NonpositiveWeight,
    DuplicateEdge,
    SelfLoop,
    NodeOutOfRange,
    EmptyOrigins,
    EmptyDestinations,
    OverlappingTerminals,
    ModeMismatch,
    ParamOutOfBounds,
    RowSumNonzero,
    NegativeRate,
    NonpositiveElasticity,
    DimensionMismatch,
    // posylog
    NonpositiveInput,
    NonpositiveCoefficient,
    ScaleNonpositive,
    SpaceMismatch,
    EmptyPosynomial,
    // gains
    Unstable,
    LpInfeasible,
    MultiMode,
    Singular,
    InvalidHorizon,
    ZeroInput,
    // dcsolve
    MaxIterations,
    NumericalBreakdown,
    NoFeasiblePointFound,
    InvalidOptions,
    // problems
    NonPosynomialCost,
    NonpositiveGammaBound,
    BoundViolation,
    NoDecay,
    // configuration files
    InvalidConfig,
};

std::string_view to_string(Errc code) noexcept;

/// Library-wide exception. `code()` identifies the failure class; the message
/// names the offending node, edge, mode or constraint where one exists.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace bufnet
