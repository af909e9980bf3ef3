// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_ENERGY_HPP
#define SELFSIM_ENERGY_HPP

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace selfsim {

class EnergyModel;
using EnergyPtr = std::shared_ptr<const EnergyModel>;

// Reference-form metadata for the A2 class: a p-homogeneous eigenform
// Etilde with eigenvalue rho that E approximates near 0.
struct A2Metadata {
    EnergyPtr reference;            // null means the model itself
    double p = 2.0;                 // homogeneity degree of the reference
    double rho = 0.0;               // eigenvalue of the reference for Lambda_(1)
    double small_osc_radius = 1e-3; // where the E/Etilde ratio test applies
};

// Quadratic form in boundary differences with nonnegative coefficients,
// one per unordered pair {j1, j2}.
struct DirichletForm {
    int n = 0;
    std::vector<double> coeff; // size n*(n-1)/2, pair_index order

    static int pair_count(int n) { return n * (n - 1) / 2; }
    static int pair_index(int n, int j1, int j2); // j1 < j2
    static std::pair<int, int> pair_from_index(int n, int idx);
    static DirichletForm unit(int n); // all coefficients 1

    double value(std::span<const double> u) const;
    void add_gradient(std::span<const double> u, std::span<double> g) const;
    bool irreducible() const; // positive-coefficient graph connected
    double max_abs_coeff() const;
};

// Convex boundary energy contract. Evaluators are pure functions of u and
// must be re-entrant.
class EnergyModel {
public:
    virtual ~EnergyModel() = default;

    virtual int boundary_size() const = 0;
    virtual double operator()(std::span<const double> u) const = 0;

    virtual bool has_gradient() const { return false; }
    virtual void gradient(std::span<const double> /*u*/, std::span<double> /*g*/) const;

    // Exact homogeneity degree when E(t u) = t^p E(u) holds identically.
    virtual std::optional<double> homogeneity() const { return std::nullopt; }

    // Non-null for plain Dirichlet forms; unlocks the exact solver path.
    virtual const DirichletForm* as_dirichlet() const { return nullptr; }

    virtual std::string describe() const = 0;

    const std::optional<A2Metadata>& a2() const { return a2_; }
    void set_a2(A2Metadata meta) { a2_ = std::move(meta); }
    const EnergyModel& a2_reference() const;

private:
    std::optional<A2Metadata> a2_;
};

std::shared_ptr<EnergyModel> make_dirichlet(DirichletForm form, bool require_irreducible = true);
// E(u) = sum c_{j1 j2} |u_j1 - u_j2|^p, p > 1.
std::shared_ptr<EnergyModel> make_p_edge(int boundary_size, double p,
                                         std::vector<double> coeff = {});
// Even convex edge bump sum c |u_j1 - u_j2|^q, used to perturb eigenforms.
std::shared_ptr<EnergyModel> make_edge_power_bump(int boundary_size, double q, double scale = 1.0);
// E = base + bump with A2 metadata pointing at base. The sampled ratio
// E/base must approach 1 towards 0; otherwise RatioDivergence.
std::shared_ptr<EnergyModel> make_perturbed(EnergyPtr base, EnergyPtr bump);
// Arbitrary evaluator, mainly for audits and fault-injection tests.
std::shared_ptr<EnergyModel> make_custom(int boundary_size, std::string description,
                                         std::function<double(std::span<const double>)> eval);

// ---- axiom audits -------------------------------------------------------

struct AxiomFinding {
    std::string axiom;
    bool pass = true;
    std::string note;
    std::vector<double> witness_u, witness_w;
    double detail = 0.0;
};

struct AxiomReport {
    bool q1 = true, q2 = true, q3 = true, q4 = true;
    bool superadditive = true;          // Lemma 3.2 samples
    double empirical_coercivity = 0.0;  // min E on {u(P1)=0, Osc(u)=1}
    std::vector<AxiomFinding> findings; // failures with witnesses
    bool all_pass() const { return q1 && q2 && q3 && q4 && superadditive; }
};

AxiomReport audit_axioms(const EnergyModel& E, int budget, uint64_t seed);

struct Q5Report {
    bool pass = true;
    double worst_derivative = 0.0; // most positive one-sided derivative seen
    std::vector<double> witness_u, witness_v;
    int checked = 0;
    int vacuous = 0; // samples with no admissible direction
};

Q5Report audit_q5(const EnergyModel& E, int budget, uint64_t seed);

// d+/dt E(u + t v) at t = 0, by forward differences at shrinking steps.
double one_sided_derivative(const EnergyModel& E, std::span<const double> u,
                            std::span<const double> v);

} // namespace selfsim

#endif
