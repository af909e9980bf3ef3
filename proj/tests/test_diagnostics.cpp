// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/cascade.hpp"
#include "selfsim/diagnostics.hpp"
#include "selfsim/energy.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/fractal.hpp"

#include <doctest.h>

#include <cmath>

using namespace selfsim;

namespace {

ValidatedFractal interval_f() { return validate_spec(FractalSpec::interval()); }
ValidatedFractal gasket_f() { return validate_spec(FractalSpec::gasket()); }

EnergyPtr gasket_unit() {
    auto E = make_dirichlet(DirichletForm::unit(3));
    E->set_a2(A2Metadata{nullptr, 2.0, 0.6, 1e-3});
    return E;
}

EnergyPtr interval_unit() {
    auto E = make_dirichlet(DirichletForm::unit(2));
    E->set_a2(A2Metadata{nullptr, 2.0, 0.5, 1e-3});
    return E;
}

} // namespace

TEST_CASE("alpha estimate finds the exact harmonic ratios") {
    ValidatedFractal g = gasket_f();
    EnergyPtr E = gasket_unit();
    AlphaEstimate a = estimate_alpha(g, *E, 1.0, 1.0, 32, 17);
    // worst case is the corner probe (1,0,0): cell 1 spans [2/5, 1]
    CHECK(a.worst_ratio == doctest::Approx(0.6).epsilon(1e-10));
    CHECK(a.worst_ratio < 1.0);

    ValidatedFractal f = interval_f();
    EnergyPtr Ei = interval_unit();
    AlphaEstimate ai = estimate_alpha(f, *Ei, 0.5, 2.0, 32, 17);
    CHECK(ai.worst_ratio == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("alpha estimate stays below 1 for the p=4 gasket form") {
    ValidatedFractal g = gasket_f();
    EnergyPtr E = make_p_edge(3, 4.0);
    AlphaEstimate a = estimate_alpha(g, *E, 0.5, 2.0, 24, 5);
    CHECK(a.worst_ratio < 1.0);
    CHECK(a.worst_ratio > 0.0);
    CHECK_FALSE(a.witness_u.empty());

    // scale invariance of the ratio for homogeneous forms: rescaling the
    // window rescales the witnesses but not the ratio
    AlphaEstimate b = estimate_alpha(g, *E, 1.0, 1.0, 16, 5);
    AlphaEstimate c = estimate_alpha(g, *E, 2.0, 2.0, 16, 5);
    CHECK(b.worst_ratio == doctest::Approx(c.worst_ratio).epsilon(1e-6));
}

TEST_CASE("alpha estimates are reproducible bit-identically") {
    ValidatedFractal g = gasket_f();
    EnergyPtr E = make_p_edge(3, 4.0);
    AlphaEstimate a = estimate_alpha(g, *E, 0.5, 2.0, 16, 99);
    AlphaEstimate b = estimate_alpha(g, *E, 0.5, 2.0, 16, 99);
    CHECK(a.worst_ratio == b.worst_ratio);
    CHECK(a.witness_u == b.witness_u);
    CHECK(a.witness_theta == b.witness_theta);
}

TEST_CASE("small-oscillation decay reads the gasket eigen structure") {
    ValidatedFractal g = gasket_f();
    EnergyPtr E = gasket_unit();
    SolverConfig tight;
    tight.tol_theta = 1e-13;
    tight.theta_bracket_width = 1e-13;
    SmallOscDecay d = estimate_small_osc_decay(g, *E, 1.0, {1e-1, 1e-2, 1e-3}, 8, 7, tight);
    // sigma / theta^p = rho = 3/5 at every scale for the eigenform itself
    for (const auto& row : d.rows) {
        CHECK(row.lemma_bound == doctest::Approx(0.6).epsilon(1e-6));
        CHECK(row.worst_cell_ratio < 1.0);
        // the actual worst cell energy ratio is rho^2 = 9/25
        CHECK(row.worst_cell_ratio == doctest::Approx(0.36).epsilon(1e-6));
    }
    CHECK(d.alpha_bar_hat == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(d.delta_bar == doctest::Approx(1e-1));
    CHECK_FALSE(d.rho_warning);

    // agreement with the oscillation estimator on the quadratic eigenform
    AlphaEstimate a = estimate_alpha(g, *E, 1.0, 1.0, 16, 7, tight);
    CHECK(std::fabs(a.worst_ratio - d.alpha_bar_hat) <= 1e-9);
}

TEST_CASE("perturbed forms approach the eigen decay at small scales") {
    ValidatedFractal g = gasket_f();
    EnergyPtr base = gasket_unit();
    EnergyPtr E = make_perturbed(base, make_edge_power_bump(3, 4.0));
    SmallOscDecay d = estimate_small_osc_decay(g, *E, 1.0, {1e-3}, 6, 11);
    CHECK(d.rows[0].lemma_bound == doctest::Approx(0.6).epsilon(1e-2));

    EnergyPtr no_meta = make_p_edge(3, 4.0);
    CHECK_THROWS_WITH_AS(estimate_small_osc_decay(g, *no_meta, 1.0, {1e-2}, 4, 1),
                         doctest::Contains("MissingA2Metadata"), Error);
}

TEST_CASE("cascade bound reads the scaled-trace oscillations") {
    ValidatedFractal f = interval_f();
    EnergyPtr E = interval_unit();
    ExtensionTrace tr = minimal_extension(f, *E, std::vector<double>{0.0, 1.0},
                                          ExtensionOptions{1.0, 4, {}, false, 10.0});
    // factors are sqrt(2)^m against oscillation 2^-m: the bound is osc(u)
    CHECK(cascade_bound(tr) == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& rec : tr.cell_records)
        CHECK(rec.factor * rec.osc ==
              doctest::Approx(std::pow(std::sqrt(0.5), rec.level)).epsilon(1e-6));

    ExtensionTrace cz = minimal_extension(f, *E, std::vector<double>{2.0, 2.0},
                                          ExtensionOptions{1.0, 3, {}, false, 10.0});
    CHECK(cascade_bound(cz) == 0.0);

    ValidatedFractal g = gasket_f();
    EnergyPtr Eg = gasket_unit();
    ExtensionTrace tg = minimal_extension(g, *Eg, std::vector<double>{1.0, 0.0, 0.0},
                                          ExtensionOptions{1.0, 3, {}, false, 10.0});
    CHECK(std::isfinite(cascade_bound(tg)));
    CHECK(cascade_bound(tg) > 0.0);
}

TEST_CASE("convergence certificates fit the classical rates") {
    ValidatedFractal f = interval_f();
    EnergyPtr E = interval_unit();
    ExtensionTrace tr = minimal_extension(f, *E, std::vector<double>{0.0, 1.0},
                                          ExtensionOptions{1.0, 5, {}, false, 10.0});
    RateFit fit = convergence_certificate(tr);
    CHECK(fit.rate == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(fit.r2 > 1.0 - 1e-9);

    ValidatedFractal g = gasket_f();
    EnergyPtr Eg = gasket_unit();
    ExtensionTrace tg = minimal_extension(g, *Eg, std::vector<double>{1.0, 0.0, 0.0},
                                          ExtensionOptions{1.0, 4, {}, false, 10.0});
    RateFit fg = convergence_certificate(tg);
    CHECK(fg.rate == doctest::Approx(0.6).epsilon(0.02 / 0.6));
    CHECK(fg.rate < 1.0);

    ExtensionTrace shallow = minimal_extension(f, *E, std::vector<double>{0.0, 1.0},
                                               ExtensionOptions{1.0, 2, {}, false, 10.0});
    CHECK_THROWS_WITH_AS(convergence_certificate(shallow), doctest::Contains("InsufficientDepth"),
                         Error);
}
