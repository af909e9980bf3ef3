// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/fractal.hpp"

#include "selfsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace selfsim {

int64_t word_index(const Word& w, int map_count) {
    int64_t idx = 0;
    for (int i : w) idx = idx * map_count + i;
    return idx;
}

Word word_from_index(int64_t index, int length, int map_count) {
    Word w(static_cast<size_t>(length));
    for (int pos = length - 1; pos >= 0; --pos) {
        w[static_cast<size_t>(pos)] = static_cast<int>(index % map_count);
        index /= map_count;
    }
    return w;
}

std::string word_to_string(const Word& w) {
    std::string s;
    for (size_t i = 0; i < w.size(); ++i) {
        if (i) s += '.';
        s += std::to_string(w[i] + 1);
    }
    return s;
}

FractalSpec FractalSpec::interval() {
    FractalSpec s;
    s.name = "interval";
    s.boundary_size = 2;
    s.maps = {{"P1", "M"}, {"M", "P2"}};
    return s;
}

FractalSpec FractalSpec::gasket() {
    FractalSpec s;
    s.name = "gasket";
    s.boundary_size = 3;
    s.maps = {{"P1", "M12", "M13"}, {"M12", "P2", "M23"}, {"M13", "M23", "P3"}};
    return s;
}

FractalSpec FractalSpec::vicsek() {
    // Square with corner cells 1..4 and central cell 5; each corner cell
    // touches the central cell at one point C<i>.
    FractalSpec s;
    s.name = "vicsek";
    s.boundary_size = 4;
    s.maps = {
        {"P1", "A12", "C1", "A14"},
        {"A21", "P2", "A23", "C2"},
        {"C3", "A32", "P3", "A34"},
        {"A41", "C4", "A43", "P4"},
        {"C1", "C2", "C3", "C4"},
    };
    return s;
}

FractalSpec FractalSpec::builtin(const std::string& name) {
    if (name == "interval") return interval();
    if (name == "gasket") return gasket();
    if (name == "vicsek") return vicsek();
    raise(errc::bad_spec, "unknown built-in fractal '" + name + "'");
}

FractalSpec FractalSpec::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        raise(errc::bad_spec, std::string("spec parse failure: ") + e.what());
    }
    FractalSpec s;
    if (!j.contains("boundary_size") || !j.contains("maps"))
        raise(errc::bad_spec, "spec needs 'boundary_size' and 'maps'");
    s.boundary_size = j.at("boundary_size").get<int>();
    for (const auto& row : j.at("maps")) {
        std::vector<std::string> labels;
        for (const auto& cell : row) labels.push_back(cell.get<std::string>());
        s.maps.push_back(std::move(labels));
    }
    if (j.contains("name")) s.name = j.at("name").get<std::string>();
    return s;
}

FractalSpec FractalSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(errc::bad_spec, "cannot open spec file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

namespace {

// "P<j>" labels are the boundary points; everything else is a fresh
// interior point of V^(1).
int parse_boundary_label(const std::string& label, int n) {
    if (label.size() < 2 || label[0] != 'P') return -1;
    for (size_t i = 1; i < label.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(label[i]))) return -1;
    int j = std::stoi(label.substr(1));
    if (j < 1 || j > n) raise(errc::bad_spec, "boundary label '" + label + "' out of range");
    return j - 1;
}

} // namespace

ValidatedFractal validate_spec(const FractalSpec& raw) {
    const int n = raw.boundary_size;
    const int k = static_cast<int>(raw.maps.size());
    if (n < 2) raise(errc::bad_spec, "boundary_size must be at least 2");
    if (k < n) raise(errc::bad_spec, "need at least as many maps as boundary points");
    for (const auto& row : raw.maps)
        if (static_cast<int>(row.size()) != n)
            raise(errc::bad_spec, "every map must list exactly boundary_size images");

    ValidatedFractal f;
    f.spec_ = raw;
    f.n_ = n;
    f.k_ = k;

    // (2.2) first part: psi_j(P_j) = P_j, checked on the labels.
    for (int j = 0; j < n; ++j) {
        const std::string& lbl = raw.maps[static_cast<size_t>(j)][static_cast<size_t>(j)];
        if (parse_boundary_label(lbl, n) != j)
            raise(errc::fixed_point_violation,
                  "psi_" + std::to_string(j + 1) + "(P" + std::to_string(j + 1) + ") = " + lbl);
    }
    // (2.2) second part: P_j appears in no other slot of the table.
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) {
            int b = parse_boundary_label(raw.maps[static_cast<size_t>(i)][static_cast<size_t>(j)], n);
            if (b >= 0 && !(i == b && j == b))
                raise(errc::boundary_collision, "P" + std::to_string(b + 1) + " lies in cell " +
                                                    std::to_string(i + 1) + " as psi(P" +
                                                    std::to_string(j + 1) + ")");
        }

    // Resolve labels to V^(1) ids by first appearance in address order, so
    // label ids coincide with the canonical level-1 vertex ids.
    std::unordered_map<std::string, int32_t> label_id;
    f.level1_labels_.clear();
    f.image_.assign(static_cast<size_t>(k) * n, -1);
    f.boundary_l1_.assign(static_cast<size_t>(n), -1);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::string& lbl = raw.maps[static_cast<size_t>(i)][static_cast<size_t>(j)];
            int32_t id;
            auto it = label_id.find(lbl);
            if (it == label_id.end()) {
                id = static_cast<int32_t>(f.level1_labels_.size());
                label_id.emplace(lbl, id);
                f.level1_labels_.push_back(lbl);
            } else {
                id = it->second;
            }
            f.image_[static_cast<size_t>(i) * n + j] = id;
        }
    }
    for (int j = 0; j < n; ++j) f.boundary_l1_[static_cast<size_t>(j)] = f.image(j, j);
    f.level1_count_ = static_cast<int>(f.level1_labels_.size());

    // Injectivity of each psi_i on V^(0).
    for (int i = 0; i < k; ++i) {
        std::vector<int32_t> ids;
        for (int j = 0; j < n; ++j) ids.push_back(f.image(i, j));
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
            raise(errc::non_injective_map, "map " + std::to_string(i + 1) + " repeats an image point");
    }

    // (2.3): connectivity of the cell-intersection graph, by BFS. The BFS
    // order doubles as the spanning certificate.
    std::vector<std::vector<int>> touching(static_cast<size_t>(f.level1_count_));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < n; ++j) touching[static_cast<size_t>(f.image(i, j))].push_back(i);
    std::vector<std::vector<uint8_t>> overlap(static_cast<size_t>(k), std::vector<uint8_t>(static_cast<size_t>(k), 0));
    for (const auto& cells : touching)
        for (int a : cells)
            for (int b : cells)
                overlap[static_cast<size_t>(a)][static_cast<size_t>(b)] = 1;

    std::vector<int> pred(static_cast<size_t>(k), -2);
    std::deque<int> queue;
    queue.push_back(0);
    pred[0] = -1;
    f.certificate_.clear();
    while (!queue.empty()) {
        int c = queue.front();
        queue.pop_front();
        f.certificate_.push_back({c, pred[static_cast<size_t>(c)]});
        for (int d = 0; d < k; ++d)
            if (d != c && overlap[static_cast<size_t>(c)][static_cast<size_t>(d)] && pred[static_cast<size_t>(d)] == -2) {
                pred[static_cast<size_t>(d)] = c;
                queue.push_back(d);
            }
    }
    if (static_cast<int>(f.certificate_.size()) != k)
        raise(errc::disconnected, "cell-intersection graph is not connected");

    // Chain constant of (3.1): every pair of V^(1) points is joined by a
    // chain of pairwise overlapping cells; take the longest shortest such
    // chain, counted in cells. All-pairs shortest paths on k <= small.
    std::vector<std::vector<int>> dist(static_cast<size_t>(k), std::vector<int>(static_cast<size_t>(k), -1));
    for (int s = 0; s < k; ++s) {
        dist[static_cast<size_t>(s)][static_cast<size_t>(s)] = 0;
        std::deque<int> q{s};
        while (!q.empty()) {
            int c = q.front();
            q.pop_front();
            for (int d = 0; d < k; ++d)
                if (overlap[static_cast<size_t>(c)][static_cast<size_t>(d)] &&
                    dist[static_cast<size_t>(s)][static_cast<size_t>(d)] < 0) {
                    dist[static_cast<size_t>(s)][static_cast<size_t>(d)] = dist[static_cast<size_t>(s)][static_cast<size_t>(c)] + 1;
                    q.push_back(d);
                }
        }
    }
    // For points Q, Q': minimize over cells containing them, then maximize.
    int chain = 1;
    for (int q1 = 0; q1 < f.level1_count_; ++q1)
        for (int q2 = 0; q2 < f.level1_count_; ++q2) {
            int best = std::numeric_limits<int>::max();
            for (int a : touching[static_cast<size_t>(q1)])
                for (int b : touching[static_cast<size_t>(q2)])
                    best = std::min(best, dist[static_cast<size_t>(a)][static_cast<size_t>(b)] + 1);
            chain = std::max(chain, best);
        }
    f.chain_constant_ = chain;

    // Seed the level cache with V^(0) and V^(1).
    auto level0 = std::make_unique<LevelVertexSet>();
    level0->level = 0;
    level0->word_count = 1;
    level0->vertex_count = n;
    level0->cell_vertex.resize(static_cast<size_t>(n));
    level0->boundary_ids.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        level0->cell_vertex[static_cast<size_t>(j)] = j;
        level0->boundary_ids[static_cast<size_t>(j)] = j;
    }
    level0->is_boundary.assign(static_cast<size_t>(n), 1);
    level0->in_prev.assign(static_cast<size_t>(n), 0);
    f.levels_.push_back(std::move(level0));
    return f;
}

// Builds V^(n) from V^(n-1) by recursive gluing: pairs (cell i, prev id x)
// are identified exactly when x and x' are boundary points of V^(n-1) whose
// level-1 images under psi_i, psi_i' coincide (property P4).
const LevelVertexSet& ValidatedFractal::build_next_locked() const {
    const LevelVertexSet& prev = *levels_.back();
    const int n = n_, k = k_;
    auto next = std::make_unique<LevelVertexSet>();
    next->level = prev.level + 1;
    next->word_count = prev.word_count * k;
    if (next->word_count * n > (int64_t(1) << 31))
        raise(errc::bad_spec, "level too deep: address table would exceed resource limits");

    // Which prev ids are boundary points, and which boundary index.
    std::vector<int32_t> bnd_index(static_cast<size_t>(prev.vertex_count), -1);
    for (int j = 0; j < n; ++j) bnd_index[static_cast<size_t>(prev.boundary_ids[static_cast<size_t>(j)])] = j;

    // Assign ids to pairs (i, x) in lexicographic scan order; glued classes
    // are keyed by the V^(1) point they sit over.
    std::vector<int32_t> pair_id(static_cast<size_t>(k) * prev.vertex_count, -1);
    std::vector<int32_t> glue_class(static_cast<size_t>(level1_count_), -1);
    next->rep_cell.clear();
    next->rep_prev.clear();
    int32_t count = 0;
    for (int i = 0; i < k; ++i) {
        for (int32_t x = 0; x < prev.vertex_count; ++x) {
            int32_t id;
            int j = bnd_index[static_cast<size_t>(x)];
            if (j >= 0) {
                int32_t q = image_[static_cast<size_t>(i) * n + j];
                if (glue_class[static_cast<size_t>(q)] < 0) {
                    id = count++;
                    glue_class[static_cast<size_t>(q)] = id;
                    next->rep_cell.push_back(i);
                    next->rep_prev.push_back(x);
                } else {
                    id = glue_class[static_cast<size_t>(q)];
                }
            } else {
                id = count++;
                next->rep_cell.push_back(i);
                next->rep_prev.push_back(x);
            }
            pair_id[static_cast<size_t>(i) * prev.vertex_count + x] = id;
        }
    }
    next->vertex_count = count;

    next->cell_vertex.assign(static_cast<size_t>(next->word_count) * n, -1);
    for (int i = 0; i < k; ++i)
        for (int64_t w = 0; w < prev.word_count; ++w)
            for (int j = 0; j < n; ++j) {
                int32_t x = prev.cell_vertex[static_cast<size_t>(w) * n + j];
                next->cell_vertex[static_cast<size_t>(i * prev.word_count + w) * n + j] =
                    pair_id[static_cast<size_t>(i) * prev.vertex_count + x];
            }

    next->boundary_ids.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        next->boundary_ids[static_cast<size_t>(j)] =
            pair_id[static_cast<size_t>(j) * prev.vertex_count + prev.boundary_ids[static_cast<size_t>(j)]];

    next->is_boundary.assign(static_cast<size_t>(count), 0);
    for (int j = 0; j < n; ++j) next->is_boundary[static_cast<size_t>(next->boundary_ids[static_cast<size_t>(j)])] = 1;

    // Embedding of V^(n-1): a prev point with first pair (i, x) maps to the
    // next-level pair (i, embed(x)); at level 1 the decomposition is P_j = psi_j(P_j).
    next->embed_prev.resize(static_cast<size_t>(prev.vertex_count));
    if (prev.level == 0) {
        for (int j = 0; j < n; ++j)
            next->embed_prev[static_cast<size_t>(j)] = pair_id[static_cast<size_t>(j) * prev.vertex_count + j];
    } else {
        for (int32_t y = 0; y < prev.vertex_count; ++y) {
            int32_t i = prev.rep_cell[static_cast<size_t>(y)];
            int32_t x = prev.rep_prev[static_cast<size_t>(y)];
            int32_t xe = prev.embed_prev[static_cast<size_t>(x)];
            next->embed_prev[static_cast<size_t>(y)] = pair_id[static_cast<size_t>(i) * prev.vertex_count + xe];
        }
    }
    next->in_prev.assign(static_cast<size_t>(count), 0);
    for (int32_t y = 0; y < prev.vertex_count; ++y)
        next->in_prev[static_cast<size_t>(next->embed_prev[static_cast<size_t>(y)])] = 1;

    levels_.push_back(std::move(next));
    return *levels_.back();
}

const LevelVertexSet& ValidatedFractal::level(int n) const {
    if (n < 0) raise(errc::bad_spec, "level must be nonnegative");
    std::lock_guard<std::mutex> lock(*levels_mutex_);
    while (static_cast<int>(levels_.size()) <= n) build_next_locked();
    return *levels_[static_cast<size_t>(n)];
}

LevelFunction cell_trace(const ValidatedFractal& f, const LevelFunction& v, const Word& w) {
    const int m = static_cast<int>(w.size());
    if (m > v.level) raise(errc::word_too_long, "word length exceeds function level");
    for (int i : w)
        if (i < 0 || i >= f.map_count()) raise(errc::bad_spec, "word index out of range");
    const LevelVertexSet& full = f.level(v.level);
    const LevelVertexSet& sub = f.level(v.level - m);
    const int n = f.boundary_size();
    int64_t prefix = word_index(w, f.map_count());

    LevelFunction out;
    out.level = v.level - m;
    out.values.assign(static_cast<size_t>(sub.vertex_count), 0.0);
    for (int64_t u = 0; u < sub.word_count; ++u) {
        int64_t full_word = prefix * sub.word_count + u;
        for (int j = 0; j < n; ++j)
            out[sub.at(u, j)] = v[full.at(full_word, j)];
    }
    return out;
}

std::vector<double> boundary_values(const ValidatedFractal& f, const LevelFunction& v) {
    const LevelVertexSet& lvs = f.level(v.level);
    std::vector<double> u(static_cast<size_t>(f.boundary_size()));
    for (int j = 0; j < f.boundary_size(); ++j) u[static_cast<size_t>(j)] = v[lvs.boundary_ids[static_cast<size_t>(j)]];
    return u;
}

LevelFunction restrict_to_level(const ValidatedFractal& f, const LevelFunction& v, int m) {
    if (m > v.level) raise(errc::bad_spec, "cannot restrict upward");
    LevelFunction cur = v;
    for (int lev = v.level; lev > m; --lev) {
        const LevelVertexSet& lvs = f.level(lev);
        const LevelVertexSet& down = f.level(lev - 1);
        LevelFunction lower;
        lower.level = lev - 1;
        lower.values.resize(static_cast<size_t>(down.vertex_count));
        for (int32_t y = 0; y < down.vertex_count; ++y)
            lower[y] = cur[lvs.embed_prev[static_cast<size_t>(y)]];
        cur = std::move(lower);
    }
    return cur;
}

double oscillation(std::span<const double> u) {
    if (u.empty()) return 0.0;
    double lo = u[0], hi = u[0];
    for (double x : u) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    return hi - lo;
}

double oscillation(const LevelFunction& v) { return oscillation(std::span<const double>(v.values)); }

double oscillation(const ValidatedFractal& f, const LevelFunction& v, const Word& scope) {
    if (scope.empty()) return oscillation(v);
    LevelFunction t = cell_trace(f, v, scope);
    return oscillation(t);
}

LevelFunction level0_function(const ValidatedFractal& f, std::span<const double> u) {
    if (static_cast<int>(u.size()) != f.boundary_size())
        raise(errc::bad_spec, "boundary function has wrong size");
    for (double x : u)
        if (!std::isfinite(x)) raise(errc::bad_spec, "boundary function must be finite");
    LevelFunction v;
    v.level = 0;
    v.values.assign(u.begin(), u.end());
    return v;
}

} // namespace selfsim
