// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/energy.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/fractal.hpp"
#include "selfsim/renorm.hpp"
#include "selfsim/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace selfsim;

namespace {

ValidatedFractal interval_f() { return validate_spec(FractalSpec::interval()); }
ValidatedFractal gasket_f() { return validate_spec(FractalSpec::gasket()); }

} // namespace

TEST_CASE("s_theta sums the cell traces") {
    ValidatedFractal f = interval_f();
    auto E = make_dirichlet(DirichletForm::unit(2));
    LevelFunction v;
    v.level = 1;
    v.values = {0.0, 0.5, 1.0};
    CHECK(s_theta(f, *E, 1.0, v) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s_theta(f, *E, 2.0, v) == doctest::Approx(2.0).epsilon(1e-15));

    ValidatedFractal g = gasket_f();
    auto Eg = make_dirichlet(DirichletForm::unit(3));
    LevelFunction h;
    h.level = 1;
    h.values = {1.0, 0.4, 0.4, 0.0, 0.2, 0.0};
    CHECK(s_theta(g, *Eg, 1.0, h) == doctest::Approx(1.2).epsilon(1e-14));
}

TEST_CASE("lambda_theta solves the interval and gasket exactly") {
    ValidatedFractal f = interval_f();
    auto E = make_dirichlet(DirichletForm::unit(2));
    RenormResult res = lambda_theta(f, *E, 1.0, std::vector<double>{0.0, 1.0});
    CHECK(res.exact);
    CHECK(res.value == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(res.minimizer[1] == doctest::Approx(0.5).epsilon(1e-15));

    ValidatedFractal g = gasket_f();
    auto Eg = make_dirichlet(DirichletForm::unit(3));
    RenormResult rg = lambda_theta(g, *Eg, 1.0, std::vector<double>{1.0, 0.0, 0.0});
    CHECK(rg.value == doctest::Approx(1.2).epsilon(1e-13));
    CHECK(rg.minimizer[1] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(rg.minimizer[2] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(rg.minimizer[4] == doctest::Approx(0.2).epsilon(1e-12));

    // independent dense-grid check
    double brute = oracles::grid_lambda(g, *Eg, 1.0, std::vector<double>{1.0, 0.0, 0.0}, 2e-4);
    CHECK(rg.value == doctest::Approx(brute).epsilon(1e-6));

    RenormResult rc = lambda_theta(g, *Eg, 1.0, std::vector<double>{2.0, 2.0, 2.0});
    CHECK(rc.value == doctest::Approx(0.0));
    CHECK(oscillation(rc.minimizer) == doctest::Approx(0.0));
}

TEST_CASE("coordinate descent matches the grid oracle on a p=4 form") {
    ValidatedFractal g = gasket_f();
    auto E = make_p_edge(3, 4.0);
    std::vector<double> u{1.0, 0.0, 0.0};
    RenormResult res = lambda_theta(g, *E, 1.0, u);
    CHECK_FALSE(res.exact);
    double brute = oracles::grid_lambda(g, *E, 1.0, u, 1e-4);
    CHECK(res.value == doctest::Approx(brute).epsilon(1e-6));
    CHECK(res.clamped_value <= res.value + 1e-12);
    // clamped minimizer stays inside [min u, max u]
    for (double x : res.clamped.values) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }
}

TEST_CASE("theta_bar reproduces the interval scaling") {
    ValidatedFractal f = interval_f();
    auto E = make_dirichlet(DirichletForm::unit(2));
    ThetaSolve t2 = theta_bar(f, *E, 2.0, std::vector<double>{0.0, 1.0});
    CHECK(t2.theta_bar == doctest::Approx(2.0).epsilon(1e-8));
    ThetaSolve t1 = theta_bar(f, *E, 1.0, std::vector<double>{0.0, 1.0});
    CHECK(t1.theta_bar == doctest::Approx(std::sqrt(2.0)).epsilon(1e-8));
    CHECK(t1.residual_rel <= 1e-8);
    // scale invariance for homogeneous forms
    ThetaSolve ts = theta_bar(f, *E, 1.0, std::vector<double>{0.3, 0.8});
    CHECK(ts.theta_bar == doctest::Approx(std::sqrt(2.0)).epsilon(1e-8));
}

TEST_CASE("theta_bar at a constant needs and uses the eigen metadata") {
    ValidatedFractal g = gasket_f();
    auto E = make_dirichlet(DirichletForm::unit(3));
    CHECK_THROWS_WITH_AS(theta_bar(g, *E, 1.0, std::vector<double>{2.0, 2.0, 2.0}),
                         doctest::Contains("MissingA2Metadata"), Error);
    A2Metadata meta;
    meta.p = 2.0;
    meta.rho = 0.6;
    E->set_a2(meta);
    ThetaSolve ts = theta_bar(g, *E, 1.0, std::vector<double>{2.0, 2.0, 2.0});
    CHECK(ts.constant_input);
    CHECK(ts.theta_bar == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));

    // the nonconstant root approaches the constant-limit value
    ThetaSolve tiny = theta_bar(g, *E, 1.0, std::vector<double>{1e-6, 0.0, 0.0});
    CHECK(tiny.theta_bar == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-7));
}

TEST_CASE("bisection flags non-monotone maps") {
    auto fake = [](double th) { return th + 0.8 * std::sin(3.0 * th); };
    CHECK_THROWS_WITH_AS(bisect_increasing(fake, 4.0, 1.0, 1e-10, 1e-12, 2.0, 4.0),
                         doctest::Contains("MonotonicityViolation"), Error);
    // a genuinely increasing map is fine
    auto good = [](double th) { return th * th; };
    BisectResult r = bisect_increasing(good, 2.0, 1.0, 1e-12, 1e-14, 2.0, 2.0);
    CHECK(r.root == doctest::Approx(std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("lambda monotone in theta and invariant under constants") {
    ValidatedFractal g = gasket_f();
    auto E = make_p_edge(3, 4.0);
    std::vector<double> u{0.9, -0.3, 0.1};
    double prev = 0.0;
    for (double th : {0.5, 0.8, 1.0, 1.3, 2.0}) {
        double val = lambda_theta(g, *E, th, u).value;
        CHECK(val > prev);
        prev = val;
    }
    std::vector<double> shifted{0.9 + 5.0, -0.3 + 5.0, 0.1 + 5.0};
    CHECK(lambda_theta(g, *E, 1.0, shifted).value ==
          doctest::Approx(lambda_theta(g, *E, 1.0, u).value).epsilon(1e-8));
}

TEST_CASE("minimizers are interior for Q5 energies") {
    ValidatedFractal g = gasket_f();
    std::vector<double> u{1.0, 0.0, 0.0};
    for (auto& E : {make_dirichlet(DirichletForm::unit(3)), make_p_edge(3, 4.0)}) {
        RenormResult res = lambda_theta(g, *E, 1.0, u);
        for (int i = 0; i < 3; ++i) {
            LevelFunction t = cell_trace(g, res.clamped, Word{i});
            CHECK(oscillation(t) < oscillation(std::span<const double>(u)));
        }
    }
}

TEST_CASE("the lower-bound identity pins the minimizer") {
    // (1/sigma) S_(theta_bar(u))(E)(v) >= E(u) with equality at the minimizer
    ValidatedFractal g = gasket_f();
    auto E = make_dirichlet(DirichletForm::unit(3));
    std::vector<double> u{1.0, 0.2, -0.4};
    double sigma = 0.7;
    ThetaSolve ts = theta_bar(g, *E, sigma, u);
    RenormResult res = lambda_theta(g, *E, ts.theta_bar, u);
    CHECK(res.value / sigma == doctest::Approx((*E)(u)).epsilon(1e-7));

    Rng rng(99);
    const LevelVertexSet& l1 = g.level(1);
    for (int s = 0; s < 40; ++s) {
        LevelFunction v = res.minimizer;
        for (int32_t q = 0; q < l1.vertex_count; ++q)
            if (!l1.is_boundary[static_cast<size_t>(q)]) v[q] += rng.uniform(-0.5, 0.5);
        CHECK(s_theta(g, *E, ts.theta_bar, v) / sigma >= (*E)(u) - 1e-9);
    }
}

TEST_CASE("quadratic eigen solves the classical decimations") {
    ValidatedFractal f = interval_f();
    EigenResult ei = quadratic_eigen(f, DirichletForm::unit(2));
    CHECK(ei.proportional);
    CHECK(ei.rho == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(ei.trace.coeff[0] == doctest::Approx(0.5).epsilon(1e-14));

    ValidatedFractal g = gasket_f();
    EigenResult eg = quadratic_eigen(g, DirichletForm::unit(3));
    CHECK(eg.proportional);
    CHECK(std::fabs(eg.rho - 0.6) <= 1e-12);
    for (double c : eg.trace.coeff) CHECK(std::fabs(c - 0.6) <= 1e-12);
}

TEST_CASE("vicsek eigenform comes out of the fixed-point machinery") {
    ValidatedFractal v = validate_spec(FractalSpec::vicsek());
    // the unit corner form is itself an eigenform with the classical 1/3
    EigenResult ev = quadratic_eigen(v, DirichletForm::unit(4));
    CHECK(ev.proportional);
    CHECK(ev.rho == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    CHECK(ev.residual <= 1e-10);

    // an asymmetric start exercises the normalized iteration and lands on
    // the symmetric fixed point
    DirichletForm asym = DirichletForm::unit(4);
    asym.coeff = {2.0, 1.0, 1.0, 1.0, 1.0, 0.5};
    EigenResult ei = quadratic_eigen(v, asym);
    CHECK_FALSE(ei.proportional);
    CHECK(ei.iterations > 0);
    CHECK(ei.residual <= 1e-10);
    CHECK(ei.rho == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // eigen residual against random data, through the exact solver
    auto Efix = make_dirichlet(ei.fixed_form, false);
    Rng rng(5);
    for (int s = 0; s < 50; ++s) {
        std::vector<double> u = rng.normal_vector(4);
        double e = (*Efix)(u);
        if (e < 1e-12) continue;
        double lam = lambda_theta(v, *Efix, 1.0, u).value;
        CHECK(std::fabs(lam - ei.rho * e) / e <= 1e-10);
    }
}

TEST_CASE("choose_h_prime is deterministic and respects bounds") {
    ValidatedFractal g = gasket_f();
    auto E = make_p_edge(3, 4.0);
    std::vector<double> u{1.0, 0.0, 0.25};
    LevelFunction a = choose_h_prime(g, *E, 1.0, u);
    LevelFunction b = choose_h_prime(g, *E, 1.0, u);
    CHECK(a.values == b.values); // bit-identical rerun
    for (double x : a.values) {
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
    }

    auto Eq = make_dirichlet(DirichletForm::unit(3));
    LevelFunction h = choose_h_prime(g, *Eq, 1.0, std::vector<double>{1.0, 0.0, 0.0});
    CHECK(h[1] == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(h[2] == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(h[4] == doctest::Approx(0.2).epsilon(1e-10));

    Eq->set_a2(A2Metadata{nullptr, 2.0, 0.6, 1e-3});
    LevelFunction c = choose_h_prime(g, *Eq, 1.0, std::vector<double>{3.0, 3.0, 3.0});
    for (double x : c.values) CHECK(x == 3.0);
}

TEST_CASE("a2 audit certifies the gasket eigenform metadata") {
    ValidatedFractal g = gasket_f();
    auto E = make_dirichlet(DirichletForm::unit(3));
    E->set_a2(A2Metadata{nullptr, 2.0, 0.6, 1e-3});
    A2AuditReport rep = audit_a2(g, *E, 100, 17);
    CHECK(rep.all_pass());
    CHECK(rep.eigen_residual <= 1e-8);

    auto wrong = make_dirichlet(DirichletForm::unit(3));
    wrong->set_a2(A2Metadata{nullptr, 2.0, 0.5, 1e-3}); // wrong eigenvalue
    A2AuditReport bad = audit_a2(g, *wrong, 50, 17);
    CHECK_FALSE(bad.eigen_ok);
}
