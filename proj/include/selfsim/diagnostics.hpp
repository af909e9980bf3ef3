// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_DIAGNOSTICS_HPP
#define SELFSIM_DIAGNOSTICS_HPP

#include "selfsim/cascade.hpp"
#include "selfsim/energy.hpp"
#include "selfsim/fractal.hpp"
#include "selfsim/renorm.hpp"

#include <cstdint>
#include <vector>

namespace selfsim {

// Empirical contraction ratio over sampled (u, theta) with Osc(u) and theta
// in [a, b]: max over cells of Osc(v o psi_i) / Osc(u) at the solved
// minimizer. The lemma asserts a constant below 1; this reports a seeded
// supremum, never a proven bound.
struct AlphaEstimate {
    double window_a = 0.0, window_b = 0.0;
    double worst_ratio = 0.0;
    std::vector<double> witness_u;
    double witness_theta = 0.0;
    int witness_cell = 0;
    int samples = 0;
};
AlphaEstimate estimate_alpha(const ValidatedFractal& f, const EnergyModel& E, double a, double b,
                             int budget, uint64_t seed, const SolverConfig& cfg = {});

// Small-oscillation decay probe for the reference-form energies: per probed
// oscillation scale, the worst per-cell reference-energy ratio at the H'
// minimizer and the certified per-sample constant from the contraction
// argument (sigma E(u) S(Et)(v) / theta^p Et(u) S(E)(v)), which the
// amplitude-level comparisons quote.
struct DecayRow {
    double osc = 0.0;
    double worst_cell_ratio = 0.0; // max_i Et(v o psi_i) / Et(u)
    double lemma_bound = 0.0;      // the certified constant at this scale
};
struct SmallOscDecay {
    std::vector<DecayRow> rows;
    double alpha_bar_hat = 0.0; // max lemma bound over all probed scales
    double delta_bar = 0.0;     // largest scale with every ratio below 1 so far
    bool rho_warning = false;   // metadata rho >= 1: outside the lemma scope
};
SmallOscDecay estimate_small_osc_decay(const ValidatedFractal& f, const EnergyModel& E,
                                       double sigma, const std::vector<double>& osc_schedule,
                                       int per_scale, uint64_t seed, const SolverConfig& cfg = {});

// Max over all recorded (level, word) of the scaled-trace oscillation
// theta_bar_{,w}(v) * Osc(v o psi_w | V0).
double cascade_bound(const ExtensionTrace& trace);

// Geometric fit of the max cell oscillation against the level; a rate below
// 1 certifies the uniform-continuity criterion at the observed depths.
struct RateFit {
    double rate = 0.0;
    double r2 = 1.0;
    int points = 0;
};
RateFit convergence_certificate(const ExtensionTrace& trace);

} // namespace selfsim

#endif
