// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_FRACTAL_HPP
#define SELFSIM_FRACTAL_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace selfsim {

// A word of map indices (0-based), addressing one n-cell. The empty word
// addresses the whole level-0 set.
using Word = std::vector<int>;

int64_t word_index(const Word& w, int map_count);
Word word_from_index(int64_t index, int length, int map_count);
std::string word_to_string(const Word& w); // 1-based, dot separated, "" for empty

// Combinatorial self-similar fractal input: N boundary points P_1..P_N and
// k >= N injective maps given by the labels of psi_i(P_j) inside V^(1).
// Labels are "P<j>" for boundary points or fresh names for interior points.
struct FractalSpec {
    int boundary_size = 0;
    std::vector<std::vector<std::string>> maps; // maps[i][j] = label of psi_i(P_j)
    std::string name;                           // optional, for reports

    static FractalSpec interval();
    static FractalSpec gasket();
    static FractalSpec vicsek();
    static FractalSpec builtin(const std::string& name); // throws BadSpec on unknown name
    static FractalSpec from_json_file(const std::string& path);
    static FractalSpec from_json_text(const std::string& text);
};

// Identified vertex set V^(n) with cell addressing. Vertex ids are canonical:
// id order equals lexicographic order of each vertex's smallest address.
struct LevelVertexSet {
    int level = 0;
    int64_t word_count = 1; // k^level
    int vertex_count = 0;
    // cell_vertex[word * N + j] = id of psi_word(P_j)
    std::vector<int32_t> cell_vertex;
    std::vector<int32_t> boundary_ids; // ids of P_1..P_N at this level
    // embedding of level n-1 ids into level n ids (empty at level 0)
    std::vector<int32_t> embed_prev;
    std::vector<uint8_t> is_boundary; // lies in V^(0)
    std::vector<uint8_t> in_prev;     // lies in V^(n-1)
    // first (lexicographically smallest) pair decomposition id = (cell, prev id)
    std::vector<int32_t> rep_cell, rep_prev;

    int32_t at(int64_t word, int j) const {
        return cell_vertex[static_cast<size_t>(word) * boundary_ids.size() + static_cast<size_t>(j)];
    }
};

// A real-valued function on V^(n), indexed by canonical vertex id.
struct LevelFunction {
    int level = 0;
    std::vector<double> values;

    double& operator[](int32_t id) { return values[static_cast<size_t>(id)]; }
    double operator[](int32_t id) const { return values[static_cast<size_t>(id)]; }
};

class ValidatedFractal {
public:
    int boundary_size() const { return n_; }
    int map_count() const { return k_; }
    int level1_size() const { return level1_count_; }

    // V^(1) id of psi_cell(P_j); label ids coincide with canonical level-1 ids
    int32_t image(int cell, int j) const { return image_[static_cast<size_t>(cell) * n_ + j]; }

    // V^(1) ids of P_1..P_N
    const std::vector<int32_t>& level1_boundary() const { return boundary_l1_; }

    int chain_constant() const { return chain_constant_; }

    // BFS cover of the cell-overlap graph: pairs (cell, earlier overlapping
    // cell), first entry has predecessor -1.
    const std::vector<std::array<int, 2>>& overlap_certificate() const { return certificate_; }

    // Level cache; thread-safe, levels are immutable once built.
    const LevelVertexSet& level(int n) const;

    const FractalSpec& spec() const { return spec_; }
    const std::vector<std::string>& level1_labels() const { return level1_labels_; }

    friend ValidatedFractal validate_spec(const FractalSpec& raw);

private:
    ValidatedFractal() = default;
    const LevelVertexSet& build_next_locked() const;

    FractalSpec spec_;
    int n_ = 0, k_ = 0;
    int level1_count_ = 0;
    std::vector<int32_t> image_;
    std::vector<int32_t> boundary_l1_;
    std::vector<std::string> level1_labels_;
    int chain_constant_ = 0;
    std::vector<std::array<int, 2>> certificate_;

    mutable std::unique_ptr<std::mutex> levels_mutex_ = std::make_unique<std::mutex>();
    mutable std::vector<std::unique_ptr<LevelVertexSet>> levels_;
};

// Checks (2.2)-(2.3): fixed points, boundary separation, injectivity,
// connectivity of the cell-intersection graph. Also computes the chain
// constant (longest shortest overlap path, counted in cells).
ValidatedFractal validate_spec(const FractalSpec& raw);

// v o psi_w as a function on V^(n-|w|).
LevelFunction cell_trace(const ValidatedFractal& f, const LevelFunction& v, const Word& w);

// Values of v on P_1..P_N.
std::vector<double> boundary_values(const ValidatedFractal& f, const LevelFunction& v);

// Restriction of v to V^(m), m <= v.level.
LevelFunction restrict_to_level(const ValidatedFractal& f, const LevelFunction& v, int m);

// max - min over the whole level, over one cell, or over a plain vector.
double oscillation(const LevelFunction& v);
double oscillation(std::span<const double> u);
double oscillation(const ValidatedFractal& f, const LevelFunction& v, const Word& scope);

// Lifts a boundary function to a level-0 LevelFunction.
LevelFunction level0_function(const ValidatedFractal& f, std::span<const double> u);

} // namespace selfsim

#endif
