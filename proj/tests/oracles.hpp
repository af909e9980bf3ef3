// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

// Test-only reference implementations, kept independent of the library's
// production code paths.

#ifndef SELFSIM_TESTS_ORACLES_HPP
#define SELFSIM_TESTS_ORACLES_HPP

#include "selfsim/energy.hpp"
#include "selfsim/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace selfsim::oracles {

// Address equality by direct recursion on the level-1 label table: two
// addresses name the same point iff forced by iterated identifications.
inline int boundary_position(const ValidatedFractal& f, int32_t v1_id) {
    for (int j = 0; j < f.boundary_size(); ++j)
        if (f.level1_boundary()[static_cast<size_t>(j)] == v1_id) return j;
    return -1;
}

inline bool same_point(const ValidatedFractal& f, const Word& w, int j, const Word& w2, int j2) {
    if (w.empty()) return j == j2;
    int32_t q = f.image(w.back(), j);
    int32_t q2 = f.image(w2.back(), j2);
    Word p(w.begin(), w.end() - 1), p2(w2.begin(), w2.end() - 1);
    if (p == p2) return q == q2;
    int b = boundary_position(f, q), b2 = boundary_position(f, q2);
    if (b < 0 || b2 < 0) return false;
    return same_point(f, p, b, p2, b2);
}

inline std::vector<Word> all_words(int k, int length) {
    std::vector<Word> out;
    int64_t count = 1;
    for (int i = 0; i < length; ++i) count *= k;
    for (int64_t idx = 0; idx < count; ++idx) out.push_back(word_from_index(idx, length, k));
    return out;
}

// Counts distinct points among all level-n addresses by pairwise comparison.
inline int brute_force_vertex_count(const ValidatedFractal& f, int n) {
    struct Addr {
        Word w;
        int j;
    };
    std::vector<Addr> addrs;
    for (const auto& w : all_words(f.map_count(), n))
        for (int j = 0; j < f.boundary_size(); ++j) addrs.push_back({w, j});
    std::vector<int> cls(addrs.size(), -1);
    int count = 0;
    for (size_t a = 0; a < addrs.size(); ++a) {
        if (cls[a] >= 0) continue;
        cls[a] = count;
        for (size_t b = a + 1; b < addrs.size(); ++b)
            if (cls[b] < 0 && same_point(f, addrs[a].w, addrs[a].j, addrs[b].w, addrs[b].j))
                cls[b] = count;
        ++count;
    }
    return count;
}

// S_(theta)(E) evaluated directly from the level-1 table.
inline double s_theta_direct(const ValidatedFractal& f, const EnergyModel& E, double theta,
                             const std::vector<double>& v) {
    const int n = f.boundary_size();
    std::vector<double> cell(static_cast<size_t>(n));
    double s = 0.0;
    for (int i = 0; i < f.map_count(); ++i) {
        for (int j = 0; j < n; ++j) cell[static_cast<size_t>(j)] = theta * v[static_cast<size_t>(f.image(i, j))];
        s += E(cell);
    }
    return s;
}

// Dense-grid minimization over the interior values with local refinement:
// repeatedly lays a uniform grid over a shrinking box centred at the best
// point, until the step is below final_step.
inline double grid_lambda(const ValidatedFractal& f, const EnergyModel& E, double theta,
                          std::span<const double> u, double final_step, int points_per_dim = 21) {
    const LevelVertexSet& l1 = f.level(1);
    const int n = f.boundary_size();
    std::vector<int32_t> free_ids;
    for (int32_t q = 0; q < l1.vertex_count; ++q)
        if (!l1.is_boundary[static_cast<size_t>(q)]) free_ids.push_back(q);
    const int nf = static_cast<int>(free_ids.size());

    std::vector<double> v(static_cast<size_t>(l1.vertex_count), 0.0);
    for (int j = 0; j < n; ++j) v[static_cast<size_t>(l1.boundary_ids[static_cast<size_t>(j)])] = u[static_cast<size_t>(j)];

    double lo = *std::min_element(u.begin(), u.end());
    double hi = *std::max_element(u.begin(), u.end());
    std::vector<double> center(static_cast<size_t>(nf), 0.5 * (lo + hi));
    double radius = 0.5 * (hi - lo);
    if (radius <= 0) radius = 1.0;

    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_x = center;
    while (true) {
        double step = 2.0 * radius / (points_per_dim - 1);
        std::vector<int> idx(static_cast<size_t>(nf), 0);
        for (;;) {
            for (int d = 0; d < nf; ++d) {
                double x = center[static_cast<size_t>(d)] - radius + step * idx[static_cast<size_t>(d)];
                v[static_cast<size_t>(free_ids[static_cast<size_t>(d)])] = x;
            }
            double val = s_theta_direct(f, E, theta, v);
            if (val < best) {
                best = val;
                for (int d = 0; d < nf; ++d)
                    best_x[static_cast<size_t>(d)] = v[static_cast<size_t>(free_ids[static_cast<size_t>(d)])];
            }
            int d = 0;
            while (d < nf && ++idx[static_cast<size_t>(d)] == points_per_dim) {
                idx[static_cast<size_t>(d)] = 0;
                ++d;
            }
            if (d == nf) break;
        }
        if (step <= final_step) break;
        center = best_x;
        radius = 2.0 * step; // keep a few coarse cells around the incumbent
    }
    return best;
}

} // namespace selfsim::oracles

#endif
