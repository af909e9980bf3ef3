// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/diagnostics.hpp"

#include "selfsim/errors.hpp"
#include "selfsim/rng.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>

namespace selfsim {

namespace {

// u uniform on the sphere {u(P1)=0, |u|=1}, rescaled to the target
// oscillation; the slice used in the coercivity argument.
std::vector<double> sphere_sample(Rng& rng, int n, double target_osc) {
    for (;;) {
        std::vector<double> u = rng.normal_vector(n);
        u[0] = 0.0;
        double osc = oscillation(std::span<const double>(u));
        if (osc < 1e-12) continue;
        for (auto& x : u) x *= target_osc / osc;
        return u;
    }
}

std::vector<std::vector<double>> corner_probes(int n, double target_osc) {
    std::vector<std::vector<double>> out;
    for (int j = 0; j < n; ++j) {
        std::vector<double> u(static_cast<size_t>(n), 0.0);
        u[static_cast<size_t>(j)] = target_osc;
        out.push_back(std::move(u));
    }
    return out;
}

double max_cell_osc_ratio(const ValidatedFractal& f, const LevelFunction& v, double osc_u,
                          int* worst_cell) {
    const int n = f.boundary_size();
    double worst = 0.0;
    for (int i = 0; i < f.map_count(); ++i) {
        double lo = v[f.image(i, 0)], hi = lo;
        for (int j = 1; j < n; ++j) {
            double x = v[f.image(i, j)];
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        double r = (hi - lo) / osc_u;
        if (r > worst) {
            worst = r;
            if (worst_cell) *worst_cell = i;
        }
    }
    return worst;
}

} // namespace

AlphaEstimate estimate_alpha(const ValidatedFractal& f, const EnergyModel& E, double a, double b,
                             int budget, uint64_t seed, const SolverConfig& cfg) {
    if (!(a > 0.0) || !(b >= a)) raise(errc::bad_config, "window must satisfy 0 < a <= b");
    const int n = f.boundary_size();
    AlphaEstimate out;
    out.window_a = a;
    out.window_b = b;

    struct Probe {
        std::vector<double> u;
        double theta;
    };
    std::vector<Probe> probes;
    for (double osc : {a, 0.5 * (a + b), b})
        for (double th : {a, 0.5 * (a + b), b})
            for (auto& u : corner_probes(n, osc)) probes.push_back({u, th});
    Rng rng(seed);
    for (int s = 0; s < budget; ++s)
        probes.push_back({sphere_sample(rng, n, rng.uniform(a, b)), rng.uniform(a, b)});

    std::vector<double> ratios(probes.size());
    std::vector<int> cells(probes.size());
    parallel_for(static_cast<int64_t>(probes.size()), cfg.threads, [&](int64_t s) {
        RenormResult res = lambda_theta(f, E, probes[static_cast<size_t>(s)].theta,
                                        probes[static_cast<size_t>(s)].u, cfg);
        int cell = 0;
        ratios[static_cast<size_t>(s)] = max_cell_osc_ratio(
            f, res.clamped, oscillation(std::span<const double>(probes[static_cast<size_t>(s)].u)),
            &cell);
        cells[static_cast<size_t>(s)] = cell;
    });
    for (size_t s = 0; s < probes.size(); ++s) {
        if (ratios[s] > out.worst_ratio) {
            out.worst_ratio = ratios[s];
            out.witness_u = probes[s].u;
            out.witness_theta = probes[s].theta;
            out.witness_cell = cells[s];
        }
    }
    out.samples = static_cast<int>(probes.size());
    return out;
}

SmallOscDecay estimate_small_osc_decay(const ValidatedFractal& f, const EnergyModel& E,
                                       double sigma, const std::vector<double>& osc_schedule,
                                       int per_scale, uint64_t seed, const SolverConfig& cfg) {
    if (!E.a2()) raise(errc::missing_a2_metadata, "decay probe needs reference-form metadata");
    const A2Metadata& meta = *E.a2();
    const EnergyModel& ref = E.a2_reference();
    const int n = f.boundary_size();

    SmallOscDecay out;
    out.rho_warning = !(meta.rho < 1.0);
    Rng rng(seed);
    std::vector<double> cell(static_cast<size_t>(n));

    for (double scale : osc_schedule) {
        std::vector<std::vector<double>> samples = corner_probes(n, scale);
        for (int s = 0; s < per_scale; ++s) samples.push_back(sphere_sample(rng, n, scale));

        DecayRow row;
        row.osc = scale;
        for (const auto& u : samples) {
            HPrimeSolve hp = solve_h_prime(f, E, sigma, u, cfg);
            const LevelFunction& v = hp.renorm.clamped;
            double ref_u = ref(u);
            if (ref_u <= 0.0) continue;
            double worst_cell = 0.0, s_ref = 0.0, s_e = 0.0;
            for (int i = 0; i < f.map_count(); ++i) {
                for (int j = 0; j < n; ++j) cell[static_cast<size_t>(j)] = v[f.image(i, j)];
                worst_cell = std::max(worst_cell, ref(cell) / ref_u);
                for (int j = 0; j < n; ++j) cell[static_cast<size_t>(j)] *= hp.theta.theta_bar;
                s_ref += ref(cell);
                s_e += E(cell);
            }
            row.worst_cell_ratio = std::max(row.worst_cell_ratio, worst_cell);
            double bound = sigma * E(u) * s_ref /
                           (std::pow(hp.theta.theta_bar, meta.p) * ref_u * s_e);
            row.lemma_bound = std::max(row.lemma_bound, bound);
        }
        out.rows.push_back(row);
    }

    for (const auto& row : out.rows) out.alpha_bar_hat = std::max(out.alpha_bar_hat, row.lemma_bound);
    // largest probed scale below which every cell ratio stays under 1
    std::vector<DecayRow> sorted = out.rows;
    std::sort(sorted.begin(), sorted.end(),
              [](const DecayRow& x, const DecayRow& y) { return x.osc < y.osc; });
    out.delta_bar = 0.0;
    for (const auto& row : sorted) {
        if (row.worst_cell_ratio < 1.0)
            out.delta_bar = row.osc;
        else
            break;
    }
    return out;
}

double cascade_bound(const ExtensionTrace& trace) {
    double h = 0.0;
    for (const auto& rec : trace.cell_records) h = std::max(h, rec.factor * rec.osc);
    return h;
}

RateFit convergence_certificate(const ExtensionTrace& trace) {
    const int depth = static_cast<int>(trace.level_records.size()) - 1;
    if (depth < 3) raise(errc::insufficient_depth, "rate fit needs trace depth >= 3");
    std::vector<double> xs, ys;
    for (const auto& lr : trace.level_records) {
        if (lr.max_cell_osc > 0.0) {
            xs.push_back(static_cast<double>(lr.level));
            ys.push_back(std::log(lr.max_cell_osc));
        }
    }
    RateFit fit;
    fit.points = static_cast<int>(xs.size());
    if (fit.points < 3) {
        // constant trace: every oscillation is already zero
        fit.rate = 0.0;
        fit.r2 = 1.0;
        return fit;
    }
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    double slope = sxy / sxx;
    fit.rate = std::exp(slope);
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

} // namespace selfsim
