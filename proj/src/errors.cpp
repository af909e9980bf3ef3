// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/errors.hpp"

namespace selfsim {

const char* errc_name(errc c) {
    switch (c) {
    case errc::bad_spec: return "BadSpec";
    case errc::fixed_point_violation: return "FixedPointViolation";
    case errc::boundary_collision: return "BoundaryCollision";
    case errc::disconnected: return "Disconnected";
    case errc::non_injective_map: return "NonInjectiveMap";
    case errc::word_too_long: return "WordTooLong";
    case errc::negative_coefficient: return "NegativeCoefficient";
    case errc::reducible_form: return "ReducibleForm";
    case errc::bad_exponent: return "BadExponent";
    case errc::ratio_divergence: return "RatioDivergence";
    case errc::solver_divergence: return "SolverDivergence";
    case errc::tolerance_unreached: return "ToleranceUnreached";
    case errc::monotonicity_violation: return "MonotonicityViolation";
    case errc::missing_a2_metadata: return "MissingA2Metadata";
    case errc::no_convergence: return "NoConvergence";
    case errc::conservation_drift: return "ConservationDrift";
    case errc::insufficient_depth: return "InsufficientDepth";
    case errc::hypothesis_violation: return "HypothesisViolation";
    case errc::bad_config: return "BadConfig";
    }
    return "UnknownError";
}

int exit_code_for(errc c) {
    switch (c) {
    case errc::bad_spec:
    case errc::fixed_point_violation:
    case errc::boundary_collision:
    case errc::disconnected:
    case errc::non_injective_map:
    case errc::word_too_long:
    case errc::negative_coefficient:
    case errc::reducible_form:
    case errc::bad_exponent:
    case errc::ratio_divergence:
    case errc::insufficient_depth:
    case errc::bad_config:
        return 1;
    case errc::solver_divergence:
    case errc::tolerance_unreached:
    case errc::monotonicity_violation:
    case errc::no_convergence:
    case errc::conservation_drift:
        return 2;
    case errc::missing_a2_metadata:
    case errc::hypothesis_violation:
        return 3;
    }
    return 1;
}

} // namespace selfsim
