// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_CASCADE_HPP
#define SELFSIM_CASCADE_HPP

#include "selfsim/energy.hpp"
#include "selfsim/fractal.hpp"
#include "selfsim/renorm.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace selfsim {

// Per-word scaling factors theta_bar_{,i1..im}(v) for all words up to a
// depth, built by the front recursion.
struct ThetaCascade {
    int depth = 0;
    std::vector<std::vector<double>> factors; // factors[m] has k^m entries
};

// Visits every (level, word) node of the cascade in lexicographic order:
// the visited function is the scaled trace theta_bar_{,w}(v) * (v o psi_w).
using CascadeVisitor =
    std::function<void(int level, int64_t word, double factor, const LevelFunction& scaled)>;
void cascade_walk(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                  const LevelFunction& v, int depth, const SolverConfig& cfg,
                  const ThetaCache* cache, const CascadeVisitor& visit);

ThetaCascade build_cascade(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                           const LevelFunction& v, int depth, const SolverConfig& cfg = {},
                           const ThetaCache* cache = nullptr);

// E_tilde_{n,sigma,E}(v) = sigma^-n sum_{|w|=n} E(theta_bar_{,w}(v) v o psi_w).
double energy_at_level(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                       const LevelFunction& v, int n, const SolverConfig& cfg = {},
                       const ThetaCache* cache = nullptr);

struct MonotoneCheck {
    double lower = 0.0; // E_tilde_n
    double upper = 0.0; // E_tilde_{n+1}
    bool pass = false;
};
MonotoneCheck monotone_energy_check(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                                    const LevelFunction& v, double tol = 1e-9,
                                    const SolverConfig& cfg = {}, const ThetaCache* cache = nullptr);

// |E_tilde_{n+1}(v) - (1/sigma) sum_i E_tilde_n(theta_bar(v|V0) v o psi_i)|;
// an algebraic identity, so the result measures implementation error only.
double self_similarity_residual(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                                const LevelFunction& v, const SolverConfig& cfg = {},
                                const ThetaCache* cache = nullptr);

struct CellRecord {
    int level = 0;
    int64_t word = 0;
    double osc = 0.0;           // Osc of the raw cell trace on V^(0)
    double factor = 0.0;        // theta_bar_{,w}(v_level)
    double scaled_energy = 0.0; // E(factor * raw trace)
    long solver_iterations = 0;
    double solver_residual = 0.0;
};

struct LevelRecord {
    int level = 0;
    double energy = 0.0; // E_tilde_{level}(v_level)
    double max_cell_osc = 0.0;
};

struct ExtensionTrace {
    double sigma = 1.0;
    double boundary_energy = 0.0; // E(u)
    std::vector<LevelFunction> levels;
    std::vector<LevelRecord> level_records;
    std::vector<CellRecord> cell_records;

    const LevelFunction& final_level() const { return levels.back(); }
};

struct ExtensionOptions {
    double sigma = 1.0;
    int depth = 3;
    SolverConfig solver{};
    bool allow_unsafe_sigma = false; // lifts the sigma <= 1 hypothesis check only
    // |E_tilde_m - E(u)| / max(E(u),1) must stay under 100x this per level
    double conservation_budget_factor = 10.0;
};

// The levelwise energy-preserving minimal extension: each cell of v_m is
// refined by the clamped minimizer of its scaled trace, then rescaled back.
ExtensionTrace minimal_extension(const ValidatedFractal& f, const EnergyModel& E,
                                 std::span<const double> u, const ExtensionOptions& opt);

} // namespace selfsim

#endif
