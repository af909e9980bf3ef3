// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/cascade.hpp"
#include "selfsim/config.hpp"
#include "selfsim/diagnostics.hpp"
#include "selfsim/energy.hpp"
#include "selfsim/errors.hpp"
#include "selfsim/fractal.hpp"
#include "selfsim/renorm.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace selfsim;

namespace {

std::string now_iso() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// CSV bodies must be byte-identical across reruns; anything time-dependent
// stays in the '#' header.
void write_output(const std::string& dir, const std::string& name, const std::string& command,
                  const std::string& cfg_json, const std::string& body) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/" + name, std::ios::binary);
    if (!out) raise(errc::bad_config, "cannot write to '" + dir + "/" + name + "'");
    out << "# selfsim " << command << "\n";
    out << "# generated_at: " << now_iso() << "\n";
    out << "# config: " << cfg_json << "\n";
    out << body;
}

int cmd_validate(const ExperimentConfig& cfg) {
    ValidatedFractal f = build_fractal(cfg);
    std::cout << "OK fractal=" << (cfg.spec_path.empty() ? cfg.fractal : cfg.spec_path)
              << " N=" << f.boundary_size() << " k=" << f.map_count()
              << " |V1|=" << f.level1_size() << " chain_constant=" << f.chain_constant() << "\n";
    std::cout << "overlap certificate:";
    for (const auto& [cell, prev] : f.overlap_certificate()) {
        std::cout << " " << (cell + 1);
        if (prev >= 0) std::cout << "<-" << (prev + 1);
    }
    std::cout << "\n";
    return 0;
}

int cmd_eigen(const ExperimentConfig& cfg) {
    ValidatedFractal f = build_fractal(cfg);
    DirichletForm form = build_dirichlet_form(cfg, f);
    EigenResult eig = quadratic_eigen(f, form);
    std::cout << "rho=" << fmt_double(eig.rho)
              << " proportional=" << (eig.proportional ? "yes" : "no")
              << " iterations=" << eig.iterations << " residual=" << fmt_double(eig.residual)
              << "\n";
    std::string body = "j1,j2,input_coeff,trace_coeff,fixed_coeff\n";
    for (int idx = 0; idx < DirichletForm::pair_count(form.n); ++idx) {
        auto [j1, j2] = DirichletForm::pair_from_index(form.n, idx);
        body += std::to_string(j1 + 1) + "," + std::to_string(j2 + 1) + "," +
                fmt_double(form.coeff[static_cast<size_t>(idx)]) + "," +
                fmt_double(eig.trace.coeff[static_cast<size_t>(idx)]) + "," +
                fmt_double(eig.fixed_form.coeff[static_cast<size_t>(idx)]) + "\n";
        std::cout << "  c{" << (j1 + 1) << "," << (j2 + 1)
                  << "}: " << fmt_double(form.coeff[static_cast<size_t>(idx)]) << " -> "
                  << fmt_double(eig.trace.coeff[static_cast<size_t>(idx)]) << "\n";
    }
    write_output(cfg.out_dir, "eigen.csv", "eigen", cfg.to_json(), body);
    return 0;
}

int cmd_axioms(const ExperimentConfig& cfg) {
    ValidatedFractal f = build_fractal(cfg);
    EnergyPtr E = build_energy(cfg, f);
    AxiomReport rep = audit_axioms(*E, cfg.budget, cfg.seed);
    Q5Report q5 = audit_q5(*E, cfg.budget, cfg.seed + 1);

    auto line = [](const std::string& name, bool pass) {
        std::cout << name << (pass ? " PASS" : " FAIL") << "\n";
    };
    line("Q1 convexity          ", rep.q1);
    line("Q2 constant invariance", rep.q2);
    line("Q3 zero on constants  ", rep.q3);
    line("Q4 markov clamping    ", rep.q4);
    line("L3.2 superadditivity  ", rep.superadditive);
    std::cout << "L3.3 coercivity c=" << fmt_double(rep.empirical_coercivity) << "\n";
    std::cout << "Q5 one-sided derivative " << (q5.pass ? "PASS" : "FAIL")
              << " worst=" << fmt_double(q5.worst_derivative) << " checked=" << q5.checked
              << " vacuous=" << q5.vacuous << "\n";
    bool a2_pass = true;
    if (E->a2()) {
        A2AuditReport a2 = audit_a2(f, *E, cfg.budget, cfg.seed + 2, cfg.solver);
        a2_pass = a2.all_pass();
        std::cout << "A2 reference form " << (a2_pass ? "PASS" : "FAIL")
                  << " eigen_residual=" << fmt_double(a2.eigen_residual)
                  << " ratio_dev=" << fmt_double(a2.worst_ratio_dev) << "\n";
    }
    for (const auto& fnd : rep.findings) {
        std::cout << "witness " << fnd.axiom << ": " << fnd.note << " detail="
                  << fmt_double(fnd.detail) << " u=";
        for (double x : fnd.witness_u) std::cout << fmt_double(x) << " ";
        std::cout << "\n";
    }

    std::string body = "check,pass,detail\n";
    body += "Q1," + std::string(rep.q1 ? "1" : "0") + ",\n";
    body += "Q2," + std::string(rep.q2 ? "1" : "0") + ",\n";
    body += "Q3," + std::string(rep.q3 ? "1" : "0") + ",\n";
    body += "Q4," + std::string(rep.q4 ? "1" : "0") + ",\n";
    body += "L3.2," + std::string(rep.superadditive ? "1" : "0") + ",\n";
    body += "L3.3,," + fmt_double(rep.empirical_coercivity) + "\n";
    body += "Q5," + std::string(q5.pass ? "1" : "0") + "," + fmt_double(q5.worst_derivative) + "\n";
    write_output(cfg.out_dir, "axioms.csv", "axioms", cfg.to_json(), body);

    return (rep.all_pass() && q5.pass && a2_pass) ? 0 : 1;
}

int cmd_theta(const ExperimentConfig& cfg) {
    ValidatedFractal f = build_fractal(cfg);
    EnergyPtr E = build_energy(cfg, f);
    std::vector<double> u = cfg.u.empty() ? default_boundary_u(f) : cfg.u;
    std::vector<double> scales = cfg.scales.empty() ? std::vector<double>{1.0} : cfg.scales;

    ThetaCache cache;
    std::string body = "scale,theta_bar,residual_rel\n";
    std::cout << "scale          theta_bar            residual\n";
    for (double t : scales) {
        std::vector<double> tu(u.size());
        for (size_t i = 0; i < u.size(); ++i) tu[i] = t * u[i];
        ThetaSolve ts = theta_bar(f, *E, cfg.sigma, tu, cfg.solver, &cache);
        body += fmt_double(t) + "," + fmt_double(ts.theta_bar) + "," +
                fmt_double(ts.residual_rel) + "\n";
        std::printf("%-14g %-20.12f %g\n", t, ts.theta_bar, ts.residual_rel);
    }
    write_output(cfg.out_dir, "theta.csv", "theta", cfg.to_json(), body);
    return 0;
}

int cmd_extend(const ExperimentConfig& cfg) {
    ValidatedFractal f = build_fractal(cfg);
    EnergyPtr E = build_energy(cfg, f);
    std::vector<double> u = cfg.u.empty() ? default_boundary_u(f) : cfg.u;

    ExtensionOptions opt;
    opt.sigma = cfg.sigma;
    opt.depth = cfg.depth;
    opt.solver = cfg.solver;
    opt.allow_unsafe_sigma = cfg.unsafe_sigma;
    ExtensionTrace trace = minimal_extension(f, *E, u, opt);

    std::string cells = "level,word,oscillation,theta_factor,cell_energy,solver_iterations,"
                        "solver_residual\n";
    for (const auto& rec : trace.cell_records) {
        Word w = word_from_index(rec.word, rec.level, f.map_count());
        cells += std::to_string(rec.level) + "," + word_to_string(w) + "," + fmt_double(rec.osc) +
                 "," + fmt_double(rec.factor) + "," + fmt_double(rec.scaled_energy) + "," +
                 std::to_string(rec.solver_iterations) + "," + fmt_double(rec.solver_residual) +
                 "\n";
    }
    std::string levels = "level,energy,max_oscillation\n";
    for (const auto& lr : trace.level_records)
        levels += std::to_string(lr.level) + "," + fmt_double(lr.energy) + "," +
                  fmt_double(lr.max_cell_osc) + "\n";

    std::ostringstream summary;
    summary << "fractal: " << (cfg.spec_path.empty() ? cfg.fractal : cfg.spec_path) << "\n"
            << "energy: " << E->describe() << "\n"
            << "sigma: " << fmt_double(cfg.sigma) << "\n"
            << "depth: " << cfg.depth << "\n"
            << "E(u): " << fmt_double(trace.boundary_energy) << "\n"
            << "final_energy: " << fmt_double(trace.level_records.back().energy) << "\n"
            << "final_max_oscillation: " << fmt_double(trace.level_records.back().max_cell_osc)
            << "\n"
            << "vertices: " << trace.final_level().values.size() << "\n"
            << "cascade_bound: " << fmt_double(cascade_bound(trace)) << "\n";
    if (cfg.depth >= 3) {
        RateFit fit = convergence_certificate(trace);
        summary << "fitted_rate: " << fmt_double(fit.rate) << "\n"
                << "fit_r2: " << fmt_double(fit.r2) << "\n";
    }
    std::cout << summary.str();

    write_output(cfg.out_dir, "cells.csv", "extend", cfg.to_json(), cells);
    write_output(cfg.out_dir, "levels.csv", "extend", cfg.to_json(), levels);
    write_output(cfg.out_dir, "summary.txt", "extend", cfg.to_json(), summary.str());
    return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
    ValidatedFractal f = build_fractal(cfg);
    EnergyPtr E = build_energy(cfg, f);
    std::vector<double> u = cfg.u.empty() ? default_boundary_u(f) : cfg.u;

    AlphaEstimate alpha =
        estimate_alpha(f, *E, cfg.window_a, cfg.window_b, cfg.budget, cfg.seed, cfg.solver);

    std::ostringstream summary;
    std::string body = "metric,value\n";
    summary << "alpha_hat [" << fmt_double(cfg.window_a) << "," << fmt_double(cfg.window_b)
            << "]: " << fmt_double(alpha.worst_ratio) << "\n";
    body += "alpha_hat," + fmt_double(alpha.worst_ratio) + "\n";

    if (E->a2()) {
        SmallOscDecay decay = estimate_small_osc_decay(
            f, *E, cfg.sigma, {1e-1, 1e-2, 1e-3, 1e-4}, std::max(cfg.budget / 8, 4), cfg.seed,
            cfg.solver);
        summary << "alpha_bar_hat: " << fmt_double(decay.alpha_bar_hat) << "\n"
                << "delta_bar_probe: " << fmt_double(decay.delta_bar) << "\n";
        if (decay.rho_warning)
            summary << "warning: reference eigenvalue is not below 1; decay lemma out of scope\n";
        body += "alpha_bar_hat," + fmt_double(decay.alpha_bar_hat) + "\n";
        body += "delta_bar," + fmt_double(decay.delta_bar) + "\n";
        for (const auto& row : decay.rows)
            body += "decay_ratio_at_" + fmt_double(row.osc) + "," +
                    fmt_double(row.worst_cell_ratio) + "\n";
    }

    ExtensionOptions opt;
    opt.sigma = cfg.sigma;
    opt.depth = std::max(cfg.depth, 3);
    opt.solver = cfg.solver;
    opt.allow_unsafe_sigma = cfg.unsafe_sigma;
    ExtensionTrace trace = minimal_extension(f, *E, u, opt);
    RateFit fit = convergence_certificate(trace);
    double hv = cascade_bound(trace);
    summary << "H_v: " << fmt_double(hv) << "\n";
    summary << "rate " << fmt_double(fit.rate) << " (r2=" << fmt_double(fit.r2) << ")\n";
    body += "H_v," + fmt_double(hv) + "\n";
    body += "rate," + fmt_double(fit.rate) + "\n";
    body += "rate_r2," + fmt_double(fit.r2) + "\n";

    std::cout << summary.str();
    write_output(cfg.out_dir, "diagnostics.csv", "diagnose", cfg.to_json(), body);
    write_output(cfg.out_dir, "summary.txt", "diagnose", cfg.to_json(), summary.str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    ExperimentConfig cfg;

    // a config file provides the base layer; explicit flags override it
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                cfg = ExperimentConfig::from_json_file(argv[i + 1]);
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return e.exit_code();
            }
        }
    }

    CLI::App app{"self-similar convex energies on finitely ramified fractals"};
    app.require_subcommand(1);

    std::string u_text, scales_text, window_text, config_path;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags override)");
        cmd->add_option("--fractal", cfg.fractal, "built-in fractal: interval|gasket|vicsek");
        cmd->add_option("--spec", cfg.spec_path, "fractal spec file (JSON)");
        cmd->add_option("--energy", cfg.energy,
                        "energy description: dirichlet | p_edge p=4 | perturbed q=4 [c=...]");
        cmd->add_option("--sigma", cfg.sigma, "renormalization weight");
        cmd->add_option("--depth", cfg.depth, "extension depth");
        cmd->add_option("--seed", cfg.seed, "sampling seed");
        cmd->add_option("--tol-coord", cfg.solver.tol_coord, "coordinate-descent move tolerance");
        cmd->add_option("--tol-theta", cfg.solver.tol_theta, "theta-root relative residual");
        cmd->add_option("--threads", cfg.solver.threads, "worker threads");
        cmd->add_option("--out", cfg.out_dir, "output directory");
        cmd->add_flag("--unsafe-sigma", cfg.unsafe_sigma,
                      "lift the sigma <= 1 hypothesis check (experimental)");
        cmd->add_option("--u", u_text, "comma-separated boundary values");
        cmd->add_option("--scales", scales_text, "comma-separated scales for theta tables");
        cmd->add_option("--window", window_text, "oscillation/theta window a,b");
        cmd->add_option("--budget", cfg.budget, "sample budget");
    };

    CLI::App* validate = app.add_subcommand("validate", "check a fractal spec");
    CLI::App* eigen = app.add_subcommand("eigen", "eigenvalue and trace of a Dirichlet form");
    CLI::App* axioms = app.add_subcommand("axioms", "audit the energy axioms");
    CLI::App* theta = app.add_subcommand("theta", "scaling roots for boundary data");
    CLI::App* extend = app.add_subcommand("extend", "build the minimal extension");
    CLI::App* diagnose = app.add_subcommand("diagnose", "contraction and convergence estimates");
    for (CLI::App* cmd : {validate, eigen, axioms, theta, extend, diagnose}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!u_text.empty()) cfg.u = parse_number_list(u_text);
        if (!scales_text.empty()) cfg.scales = parse_number_list(scales_text);
        if (!window_text.empty()) {
            std::vector<double> w = parse_number_list(window_text);
            if (w.size() != 2) raise(errc::bad_config, "--window expects a,b");
            cfg.window_a = w[0];
            cfg.window_b = w[1];
        }
        if (app.got_subcommand(validate)) return cmd_validate(cfg);
        if (app.got_subcommand(eigen)) return cmd_eigen(cfg);
        if (app.got_subcommand(axioms)) return cmd_axioms(cfg);
        if (app.got_subcommand(theta)) return cmd_theta(cfg);
        if (app.got_subcommand(extend)) return cmd_extend(cfg);
        if (app.got_subcommand(diagnose)) return cmd_diagnose(cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
