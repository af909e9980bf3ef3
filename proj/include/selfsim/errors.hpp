// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_ERRORS_HPP
#define SELFSIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace selfsim {

enum class errc {
    bad_spec,
    fixed_point_violation,
    boundary_collision,
    disconnected,
    non_injective_map,
    word_too_long,
    negative_coefficient,
    reducible_form,
    bad_exponent,
    ratio_divergence,
    solver_divergence,
    tolerance_unreached,
    monotonicity_violation,
    missing_a2_metadata,
    no_convergence,
    conservation_drift,
    insufficient_depth,
    hypothesis_violation,
    bad_config,
};

const char* errc_name(errc c);

// Process exit codes: 0 ok, 1 validation error, 2 solver failure,
// 3 hypothesis violation.
int exit_code_for(errc c);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    errc code() const { return code_; }
    int exit_code() const { return exit_code_for(code_); }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) {
    throw Error(code, what);
}

} // namespace selfsim

#endif
