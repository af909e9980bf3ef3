// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/cascade.hpp"

#include "selfsim/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>

namespace selfsim {

namespace {

void walk_node(const ValidatedFractal& f, const EnergyModel& E, double sigma,
               const LevelFunction& g, int level, int64_t word, double factor, int depth,
               const SolverConfig& cfg, const ThetaCache* cache, const CascadeVisitor& visit) {
    visit(level, word, factor, g);
    if (level == depth) return;
    std::vector<double> u0 = boundary_values(f, g);
    double th = theta_bar(f, E, sigma, u0, cfg, cache).theta_bar;
    for (int i = 0; i < f.map_count(); ++i) {
        LevelFunction child = cell_trace(f, g, Word{i});
        for (auto& x : child.values) x *= th;
        walk_node(f, E, sigma, child, level + 1, word * f.map_count() + i, factor * th, depth, cfg,
                  cache, visit);
    }
}

} // namespace

void cascade_walk(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                  const LevelFunction& v, int depth, const SolverConfig& cfg,
                  const ThetaCache* cache, const CascadeVisitor& visit) {
    if (!(sigma > 0.0)) raise(errc::hypothesis_violation, "sigma must be positive");
    if (depth < 0 || depth > v.level)
        raise(errc::word_too_long, "cascade depth exceeds the function level");
    walk_node(f, E, sigma, v, 0, 0, 1.0, depth, cfg, cache, visit);
}

ThetaCascade build_cascade(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                           const LevelFunction& v, int depth, const SolverConfig& cfg,
                           const ThetaCache* cache) {
    ThetaCascade c;
    c.depth = depth;
    c.factors.resize(static_cast<size_t>(depth) + 1);
    int64_t count = 1;
    for (int m = 0; m <= depth; ++m) {
        c.factors[static_cast<size_t>(m)].assign(static_cast<size_t>(count), 0.0);
        count *= f.map_count();
    }
    cascade_walk(f, E, sigma, v, depth, cfg, cache,
                 [&](int level, int64_t word, double factor, const LevelFunction&) {
                     c.factors[static_cast<size_t>(level)][static_cast<size_t>(word)] = factor;
                 });
    return c;
}

double energy_at_level(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                       const LevelFunction& v, int n, const SolverConfig& cfg,
                       const ThetaCache* cache) {
    if (n > v.level) raise(errc::word_too_long, "energy level exceeds the function level");
    double sum = 0.0;
    cascade_walk(f, E, sigma, v, n, cfg, cache,
                 [&](int level, int64_t, double, const LevelFunction& scaled) {
                     if (level == n) sum += E(boundary_values(f, scaled));
                 });
    return sum / std::pow(sigma, n);
}

MonotoneCheck monotone_energy_check(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                                    const LevelFunction& v, double tol, const SolverConfig& cfg,
                                    const ThetaCache* cache) {
    if (v.level < 1) raise(errc::insufficient_depth, "monotone check needs level >= 1");
    MonotoneCheck out;
    out.lower = energy_at_level(f, E, sigma, v, v.level - 1, cfg, cache);
    out.upper = energy_at_level(f, E, sigma, v, v.level, cfg, cache);
    out.pass = out.upper >= out.lower - tol * (std::fabs(out.lower) + 1.0);
    return out;
}

double self_similarity_residual(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                                const LevelFunction& v, const SolverConfig& cfg,
                                const ThetaCache* cache) {
    if (v.level < 1) raise(errc::insufficient_depth, "self-similarity check needs level >= 1");
    const int n = v.level - 1;
    double lhs = energy_at_level(f, E, sigma, v, n + 1, cfg, cache);
    std::vector<double> u0 = boundary_values(f, v);
    double th = theta_bar(f, E, sigma, u0, cfg, cache).theta_bar;
    double rhs = 0.0;
    for (int i = 0; i < f.map_count(); ++i) {
        LevelFunction child = cell_trace(f, v, Word{i});
        for (auto& x : child.values) x *= th;
        rhs += energy_at_level(f, E, sigma, child, n, cfg, cache);
    }
    rhs /= sigma;
    return std::fabs(lhs - rhs);
}

ExtensionTrace minimal_extension(const ValidatedFractal& f, const EnergyModel& E,
                                 std::span<const double> u, const ExtensionOptions& opt) {
    if (static_cast<int>(u.size()) != f.boundary_size())
        raise(errc::bad_spec, "boundary function has wrong size");
    if (!(opt.sigma > 0.0)) raise(errc::hypothesis_violation, "sigma must be positive");
    if (opt.sigma > 1.0 && !opt.allow_unsafe_sigma)
        raise(errc::hypothesis_violation,
              "the extension theorems assume sigma in (0,1]; pass the unsafe-sigma override to "
              "experiment outside that range");
    if (opt.depth < 0) raise(errc::bad_spec, "depth must be nonnegative");

    const int k = f.map_count();
    const int n = f.boundary_size();
    ThetaCache cache;

    // boundary position of each level-1 id, -1 for interior points
    std::vector<int> bnd_of(static_cast<size_t>(f.level1_size()), -1);
    for (int j = 0; j < n; ++j) bnd_of[static_cast<size_t>(f.level1_boundary()[static_cast<size_t>(j)])] = j;

    ExtensionTrace trace;
    trace.sigma = opt.sigma;
    trace.boundary_energy = E(u);
    trace.levels.push_back(level0_function(f, u));

    // raw cell traces on V^(0) and cascade factors for the current level
    std::vector<std::vector<double>> raw{std::vector<double>(u.begin(), u.end())};
    std::vector<double> factors{1.0};

    auto record_level = [&](int m) {
        const auto& lvl_raw = raw;
        double energy_sum = 0.0, max_osc = 0.0;
        std::vector<double> scaled(static_cast<size_t>(n));
        for (size_t w = 0; w < lvl_raw.size(); ++w) {
            for (int j = 0; j < n; ++j) scaled[static_cast<size_t>(j)] = factors[w] * lvl_raw[w][static_cast<size_t>(j)];
            double cell_energy = E(scaled);
            double osc = oscillation(std::span<const double>(lvl_raw[w]));
            energy_sum += cell_energy;
            max_osc = std::max(max_osc, osc);
            CellRecord rec;
            rec.level = m;
            rec.word = static_cast<int64_t>(w);
            rec.osc = osc;
            rec.factor = factors[w];
            rec.scaled_energy = cell_energy;
            trace.cell_records.push_back(rec);
        }
        LevelRecord lr;
        lr.level = m;
        lr.energy = energy_sum / std::pow(opt.sigma, m);
        lr.max_cell_osc = max_osc;
        trace.level_records.push_back(lr);

        double budget = 100.0 * opt.conservation_budget_factor * opt.solver.tol_coord *
                        std::max(m, 1);
        double drift = std::fabs(lr.energy - trace.boundary_energy) /
                       std::max(trace.boundary_energy, 1.0);
        if (drift > budget)
            raise(errc::conservation_drift,
                  "level " + std::to_string(m) + " energy drifted beyond the tolerance budget");
    };
    record_level(0);

    for (int m = 0; m < opt.depth; ++m) {
        const int64_t words = static_cast<int64_t>(raw.size());
        struct CellSolve {
            double theta = 1.0;
            LevelFunction w; // clamped minimizer of the scaled trace
            long iterations = 0;
            double residual = 0.0;
        };
        std::vector<CellSolve> solves(static_cast<size_t>(words));
        parallel_for(words, opt.solver.threads, [&](int64_t w) {
            std::vector<double> scaled(static_cast<size_t>(n));
            for (int j = 0; j < n; ++j)
                scaled[static_cast<size_t>(j)] = factors[static_cast<size_t>(w)] * raw[static_cast<size_t>(w)][static_cast<size_t>(j)];
            HPrimeSolve hp = solve_h_prime(f, E, opt.sigma, scaled, opt.solver, &cache);
            solves[static_cast<size_t>(w)] = {hp.theta.theta_bar, std::move(hp.renorm.clamped),
                                              hp.renorm.iterations, hp.renorm.residual};
        });

        // fill in the solver fields on this level's cell records
        size_t rec_base = trace.cell_records.size() - static_cast<size_t>(words);
        for (int64_t w = 0; w < words; ++w) {
            trace.cell_records[rec_base + static_cast<size_t>(w)].solver_iterations =
                solves[static_cast<size_t>(w)].iterations;
            trace.cell_records[rec_base + static_cast<size_t>(w)].solver_residual =
                solves[static_cast<size_t>(w)].residual;
        }

        const LevelVertexSet& next_lvs = f.level(m + 1);
        LevelFunction next;
        next.level = m + 1;
        next.values.assign(static_cast<size_t>(next_lvs.vertex_count), 0.0);

        std::vector<std::vector<double>> next_raw(static_cast<size_t>(words * k),
                                                  std::vector<double>(static_cast<size_t>(n)));
        std::vector<double> next_factors(static_cast<size_t>(words * k));

        for (int64_t w = 0; w < words; ++w) {
            const CellSolve& cs = solves[static_cast<size_t>(w)];
            const std::vector<double>& rw = raw[static_cast<size_t>(w)];
            double lo = rw[0], hi = rw[0];
            for (double x : rw) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            for (int i = 0; i < k; ++i) {
                int64_t cw = w * k + i;
                next_factors[static_cast<size_t>(cw)] = cs.theta * factors[static_cast<size_t>(w)];
                for (int j = 0; j < n; ++j) {
                    int32_t q = f.image(i, j);
                    int b = bnd_of[static_cast<size_t>(q)];
                    double val;
                    if (b >= 0) {
                        val = rw[static_cast<size_t>(b)]; // old vertex: copy exactly
                    } else {
                        val = cs.w[q] / factors[static_cast<size_t>(w)];
                        val = std::max(std::min(val, hi), lo); // maximum principle, exactly
                    }
                    next[next_lvs.at(cw, j)] = val;
                    next_raw[static_cast<size_t>(cw)][static_cast<size_t>(j)] = val;
                }
            }
        }

        raw = std::move(next_raw);
        factors = std::move(next_factors);
        trace.levels.push_back(std::move(next));
        record_level(m + 1);
    }
    return trace;
}

} // namespace selfsim
