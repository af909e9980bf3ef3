// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_RENORM_HPP
#define SELFSIM_RENORM_HPP

#include "selfsim/energy.hpp"
#include "selfsim/fractal.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace selfsim {

struct SolverConfig {
    double tol_coord = 1e-10;        // sweep stop: max coordinate move
    double tol_theta = 1e-8;         // relative residual of the theta root
    double theta_bracket_width = 1e-12;
    long max_coordinate_updates = 1'000'000;
    double bracket_growth = 2.0;
    int threads = 1;
};

// S_(theta)(E)(v) = sum_i E(theta * v o psi_i) for v on V^(1).
double s_theta(const ValidatedFractal& f, const EnergyModel& E, double theta,
               const LevelFunction& v);

struct RenormResult {
    double value = 0.0;       // Lambda_(theta)(E)(u)
    LevelFunction minimizer;  // member of L(u)
    LevelFunction clamped;    // member of L'(u)
    double clamped_value = 0.0;
    long iterations = 0;      // coordinate updates (0 on the exact path)
    double residual = 0.0;    // last sweep's max coordinate move
    bool exact = false;
};

// Minimizes S_(theta)(E) over L(u). Dirichlet forms go through the exact
// interior solve; general convex models run cyclic coordinate descent with
// one-dimensional convex minimization per free vertex.
RenormResult lambda_theta(const ValidatedFractal& f, const EnergyModel& E, double theta,
                          std::span<const double> u, const SolverConfig& cfg = {});

// Root of a strictly increasing scalar map: g(root) = target. Brackets from
// `start` by geometric growth, then bisects; non-monotone behaviour along the
// way raises MonotonicityViolation.
struct BisectResult {
    double root = 0.0;
    double value = 0.0;
    double residual_rel = 0.0;
    std::vector<std::array<double, 2>> history; // evaluated (theta, g)
};
BisectResult bisect_increasing(const std::function<double(double)>& g, double target,
                               double start, double rel_tol, double width_tol, double growth,
                               double scale);

// Memo for scaling roots of exactly homogeneous models, keyed by the
// affinely normalized boundary data. Thread-safe.
class ThetaCache {
public:
    std::optional<std::pair<double, double>> find(const std::string& key) const;
    void store(const std::string& key, double theta, double residual) const;
    static std::string key_for(std::span<const double> u, double sigma);

private:
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::pair<double, double>> map_;
};

struct ThetaSolve {
    double sigma = 0.0;
    double theta_bar = 0.0;
    double residual_rel = 0.0;
    std::vector<std::array<double, 2>> bracket_history;
    bool constant_input = false;
};

// Unique theta with Lambda_(theta)(E)(u) = sigma E(u); constant u uses the
// (sigma/rho)^(1/p) extension and requires A2 metadata.
ThetaSolve theta_bar(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                     std::span<const double> u, const SolverConfig& cfg = {},
                     const ThetaCache* cache = nullptr);

// Deterministic representative of H'_{sigma,E}(u): the clamped minimizer at
// theta_bar, from the boundary-mean start with fixed coordinate order.
LevelFunction choose_h_prime(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                             std::span<const double> u, const SolverConfig& cfg = {},
                             const ThetaCache* cache = nullptr);

struct HPrimeSolve {
    ThetaSolve theta;
    RenormResult renorm; // solved at theta_bar
};
HPrimeSolve solve_h_prime(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                          std::span<const double> u, const SolverConfig& cfg = {},
                          const ThetaCache* cache = nullptr);

// Lambda_(1) of a Dirichlet form, exactly, as a Dirichlet form again
// (Schur complement of the level-1 Laplacian onto the boundary block).
DirichletForm trace_form(const ValidatedFractal& f, const DirichletForm& D);

struct EigenResult {
    double rho = 0.0;
    DirichletForm trace;       // Lambda_(1) of the input form
    bool proportional = false; // input was already an eigenform
    DirichletForm fixed_form;  // normalized fixed point of D -> Lambda(D)/|Lambda(D)|
    int iterations = 0;
    double residual = 0.0;     // max |Lambda(D*) - rho D*| coefficient-wise
};

EigenResult quadratic_eigen(const ValidatedFractal& f, const DirichletForm& D,
                            int max_iterations = 20000, double tol = 1e-15);

struct A2AuditReport {
    bool homogeneity_ok = true;
    double worst_homogeneity_dev = 0.0;
    bool eigen_ok = true;
    double eigen_residual = 0.0; // sup |Lambda_1(Et)(u) - rho Et(u)| / Et(u)
    bool ratio_ok = true;
    double worst_ratio_dev = 0.0; // |E/Et - 1| at the smallest probed scale
    bool all_pass() const { return homogeneity_ok && eigen_ok && ratio_ok; }
};

A2AuditReport audit_a2(const ValidatedFractal& f, const EnergyModel& E, int budget,
                       uint64_t seed, const SolverConfig& cfg = {});

} // namespace selfsim

#endif
