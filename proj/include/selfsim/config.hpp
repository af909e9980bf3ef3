// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_CONFIG_HPP
#define SELFSIM_CONFIG_HPP

#include "selfsim/energy.hpp"
#include "selfsim/fractal.hpp"
#include "selfsim/renorm.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace selfsim {

struct ExperimentConfig {
    std::string fractal = "gasket"; // built-in name
    std::string spec_path;          // spec file, overrides `fractal` when set
    // family plus key=value options, e.g. "dirichlet", "p_edge p=4",
    // "perturbed q=4 bscale=1", optionally "c=..." pair coefficients
    std::string energy = "dirichlet";
    double sigma = 1.0;
    int depth = 3;
    uint64_t seed = 1;
    bool unsafe_sigma = false;
    std::string out_dir;
    std::vector<double> u;      // boundary data; defaults to the first corner
    std::vector<double> scales; // extra scales for theta tables
    double window_a = 1.0, window_b = 1.0;
    int budget = 64;
    SolverConfig solver;

    std::string to_json() const; // resolved config, embedded in every output
    static ExperimentConfig from_json_file(const std::string& path);
    void merge_json_text(const std::string& text); // config file under flags
};

ValidatedFractal build_fractal(const ExperimentConfig& cfg);

// Builds the energy named by the config. Dirichlet eigenforms get their
// reference metadata (p = 2 and the exact eigenvalue) attached on the spot.
EnergyPtr build_energy(const ExperimentConfig& cfg, const ValidatedFractal& f);

// The coefficient table named by a dirichlet/perturbed energy description.
DirichletForm build_dirichlet_form(const ExperimentConfig& cfg, const ValidatedFractal& f);

std::vector<double> default_boundary_u(const ValidatedFractal& f);
std::vector<double> parse_number_list(const std::string& text);

// "%.17g" rendering used by every CSV body so reruns are byte-identical.
std::string fmt_double(double x);

} // namespace selfsim

#endif
