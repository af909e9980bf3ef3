// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/config.hpp"
#include "selfsim/errors.hpp"

#include <doctest.h>

using namespace selfsim;

TEST_CASE("energy descriptions build the right families") {
    ExperimentConfig cfg;
    cfg.fractal = "gasket";
    ValidatedFractal g = build_fractal(cfg);

    cfg.energy = "dirichlet";
    EnergyPtr d = build_energy(cfg, g);
    CHECK((*d)(std::vector<double>{1.0, 0.0, 0.0}) == 2.0);
    REQUIRE(d->a2().has_value()); // the unit form is the gasket eigenform
    CHECK(d->a2()->rho == doctest::Approx(0.6).epsilon(1e-12));

    cfg.energy = "p_edge p=4";
    EnergyPtr p = build_energy(cfg, g);
    CHECK((*p)(std::vector<double>{0.0, 2.0, 2.0}) == 32.0);
    CHECK_FALSE(p->a2().has_value());

    cfg.energy = "perturbed q=4";
    EnergyPtr pert = build_energy(cfg, g);
    CHECK((*pert)(std::vector<double>{1.0, 0.0, 0.0}) == doctest::Approx(4.0));
    REQUIRE(pert->a2().has_value());

    cfg.energy = "dirichlet c=1,2,3";
    EnergyPtr w = build_energy(cfg, g);
    CHECK((*w)(std::vector<double>{1.0, 0.0, 0.0}) == doctest::Approx(3.0));

    cfg.energy = "dirichlet c=1,2";
    CHECK_THROWS_AS(build_energy(cfg, g), Error);
    cfg.energy = "unknown_family";
    CHECK_THROWS_WITH_AS(build_energy(cfg, g), doctest::Contains("BadConfig"), Error);
}

TEST_CASE("config json round-trips and merges") {
    ExperimentConfig cfg;
    cfg.merge_json_text(R"({
        "fractal": "interval",
        "energy": {"family": "p_edge", "p": 4},
        "sigma": 0.5,
        "depth": 4,
        "seed": 42,
        "solver": {"tol_theta": 1e-10, "threads": 2}
    })");
    CHECK(cfg.fractal == "interval");
    CHECK(cfg.energy == "p_edge p=4");
    CHECK(cfg.sigma == 0.5);
    CHECK(cfg.depth == 4);
    CHECK(cfg.seed == 42);
    CHECK(cfg.solver.tol_theta == 1e-10);
    CHECK(cfg.solver.threads == 2);

    std::string dumped = cfg.to_json();
    CHECK(dumped.find("\"sigma\":0.5") != std::string::npos);
    CHECK(dumped.find("tol_theta") != std::string::npos);

    CHECK_THROWS_WITH_AS(cfg.merge_json_text("{broken"), doctest::Contains("BadConfig"), Error);
}

TEST_CASE("number lists parse strictly") {
    CHECK(parse_number_list("1,0,0") == std::vector<double>{1.0, 0.0, 0.0});
    CHECK(parse_number_list("1e-2,2.5") == std::vector<double>{0.01, 2.5});
    CHECK_THROWS_AS(parse_number_list("1,x"), Error);
}

TEST_CASE("default boundary data is the first corner") {
    ExperimentConfig cfg;
    cfg.fractal = "vicsek";
    ValidatedFractal v = build_fractal(cfg);
    CHECK(default_boundary_u(v) == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}
