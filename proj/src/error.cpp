#include "bufnet/error.hpp"

namespace bufnet {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::OriginHasInflow: return "OriginHasInflow";
    case Errc::DestinationHasOutflow: return "DestinationHasOutflow";
    case Errc::NonpositiveWeight: return "NonpositiveWeight";
    case Errc::DuplicateEdge: return "DuplicateEdge";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::NodeOutOfRange: return "NodeOutOfRange";
    case Errc::EmptyOrigins: return "EmptyOrigins";
    case Errc::EmptyDestinations: return "EmptyDestinations";
    case Errc::OverlappingTerminals: return "OverlappingTerminals";
    case Errc::ModeMismatch: return "ModeMismatch";
    case Errc::ParamOutOfBounds: return "ParamOutOfBounds";
    case Errc::RowSumNonzero: return "RowSumNonzero";
    case Errc::NegativeRate: return "NegativeRate";
    case Errc::NonpositiveElasticity: return "NonpositiveElasticity";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NonpositiveInput: return "NonpositiveInput";
    case Errc::NonpositiveCoefficient: return "NonpositiveCoefficient";
    case Errc::ScaleNonpositive: return "ScaleNonpositive";
    case Errc::SpaceMismatch: return "SpaceMismatch";
    case Errc::EmptyPosynomial: return "EmptyPosynomial";
    case Errc::Unstable: return "Unstable";
    case Errc::LpInfeasible: return "LpInfeasible";
    case Errc::MultiMode: return "MultiMode";
    case Errc::Singular: return "Singular";
    case Errc::InvalidHorizon: return "InvalidHorizon";
    case Errc::ZeroInput: return "ZeroInput";
    case Errc::MaxIterations: return "MaxIterations";
    case Errc::NumericalBreakdown: return "NumericalBreakdown";
    case Errc::NoFeasiblePointFound: return "NoFeasiblePointFound";
    case Errc::InvalidOptions: return "InvalidOptions";
    case Errc::NonPosynomialCost: return "NonPosynomialCost";
    case Errc::NonpositiveGammaBound: return "NonpositiveGammaBound";
    case Errc::BoundViolation: return "BoundViolation";
    case Errc::NoDecay: return "NoDecay";
    case Errc::InvalidConfig: return "InvalidConfig";
    }
    return "Unknown";
}

} // namespace bufnet
