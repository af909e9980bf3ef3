// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/config.hpp"

#include "selfsim/errors.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace selfsim {

using nlohmann::json;

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::stringstream ss(text);
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        try {
            size_t pos = 0;
            out.push_back(std::stod(token, &pos));
            if (pos != token.size()) raise(errc::bad_config, "bad number '" + token + "'");
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            raise(errc::bad_config, "bad number '" + token + "'");
        }
    }
    return out;
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["fractal"] = spec_path.empty() ? fractal : spec_path;
    j["energy"] = energy;
    j["sigma"] = sigma;
    j["depth"] = depth;
    j["seed"] = seed;
    j["unsafe_sigma"] = unsafe_sigma;
    if (!u.empty()) j["u"] = u;
    if (!scales.empty()) j["scales"] = scales;
    j["window"] = {window_a, window_b};
    j["budget"] = budget;
    j["solver"] = {{"tol_coord", solver.tol_coord},
                   {"tol_theta", solver.tol_theta},
                   {"theta_bracket_width", solver.theta_bracket_width},
                   {"max_iters", solver.max_coordinate_updates},
                   {"bracket_growth", solver.bracket_growth},
                   {"threads", solver.threads}};
    return j.dump();
}

void ExperimentConfig::merge_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        raise(errc::bad_config, std::string("config parse failure: ") + e.what());
    }
    if (j.contains("fractal")) fractal = j["fractal"].get<std::string>();
    if (j.contains("spec")) spec_path = j["spec"].get<std::string>();
    if (j.contains("energy")) {
        if (j["energy"].is_object()) {
            // {family, coeffs, p, bump, ...} assembled into the flag syntax
            const auto& e = j["energy"];
            std::string s = e.value("family", "dirichlet");
            if (e.contains("p")) s += " p=" + fmt_double(e["p"].get<double>());
            if (e.contains("coeffs")) {
                s += " c=";
                bool first = true;
                for (const auto& c : e["coeffs"]) {
                    if (!first) s += ",";
                    s += fmt_double(c.get<double>());
                    first = false;
                }
            }
            if (e.contains("bump")) s += " bump=" + e["bump"].get<std::string>();
            if (e.contains("q")) s += " q=" + fmt_double(e["q"].get<double>());
            if (e.contains("bscale")) s += " bscale=" + fmt_double(e["bscale"].get<double>());
            energy = s;
        } else {
            energy = j["energy"].get<std::string>();
        }
    }
    if (j.contains("sigma")) sigma = j["sigma"].get<double>();
    if (j.contains("depth")) depth = j["depth"].get<int>();
    if (j.contains("seed")) seed = j["seed"].get<uint64_t>();
    if (j.contains("unsafe_sigma")) unsafe_sigma = j["unsafe_sigma"].get<bool>();
    if (j.contains("out")) out_dir = j["out"].get<std::string>();
    if (j.contains("u")) u = j["u"].get<std::vector<double>>();
    if (j.contains("scales")) scales = j["scales"].get<std::vector<double>>();
    if (j.contains("window")) {
        window_a = j["window"][0].get<double>();
        window_b = j["window"][1].get<double>();
    }
    if (j.contains("budget")) budget = j["budget"].get<int>();
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        if (s.contains("tol_coord")) solver.tol_coord = s["tol_coord"].get<double>();
        if (s.contains("tol_theta")) solver.tol_theta = s["tol_theta"].get<double>();
        if (s.contains("theta_bracket_width"))
            solver.theta_bracket_width = s["theta_bracket_width"].get<double>();
        if (s.contains("max_iters")) solver.max_coordinate_updates = s["max_iters"].get<long>();
        if (s.contains("bracket_growth")) solver.bracket_growth = s["bracket_growth"].get<double>();
        if (s.contains("threads")) solver.threads = s["threads"].get<int>();
    }
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(errc::bad_config, "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig cfg;
    cfg.merge_json_text(ss.str());
    return cfg;
}

ValidatedFractal build_fractal(const ExperimentConfig& cfg) {
    FractalSpec spec = cfg.spec_path.empty() ? FractalSpec::builtin(cfg.fractal)
                                             : FractalSpec::from_json_file(cfg.spec_path);
    return validate_spec(spec);
}

namespace {

struct EnergyTokens {
    std::string family;
    std::map<std::string, std::string> kv;
};

EnergyTokens tokenize_energy(const std::string& text) {
    EnergyTokens t;
    std::stringstream ss(text);
    std::string tok;
    while (ss >> tok) {
        if (t.family.empty() && tok.find('=') == std::string::npos) {
            t.family = tok;
            continue;
        }
        auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            raise(errc::bad_config, "energy option '" + tok + "' is not key=value");
        t.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    if (t.family.empty()) raise(errc::bad_config, "empty energy description");
    return t;
}

double kv_double(const EnergyTokens& t, const std::string& key, double fallback) {
    auto it = t.kv.find(key);
    if (it == t.kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        raise(errc::bad_config, "bad numeric value for '" + key + "'");
    }
}

DirichletForm form_from_tokens(const EnergyTokens& t, int n) {
    DirichletForm form;
    form.n = n;
    auto it = t.kv.find("c");
    if (it == t.kv.end()) {
        form.coeff.assign(static_cast<size_t>(DirichletForm::pair_count(n)), 1.0);
    } else {
        form.coeff = parse_number_list(it->second);
        if (static_cast<int>(form.coeff.size()) != DirichletForm::pair_count(n))
            raise(errc::bad_config, "expected " + std::to_string(DirichletForm::pair_count(n)) +
                                        " pair coefficients");
    }
    return form;
}

EnergyPtr eigen_dirichlet(const ValidatedFractal& f, DirichletForm form) {
    std::shared_ptr<EnergyModel> model = make_dirichlet(form);
    EigenResult eig = quadratic_eigen(f, form);
    if (eig.proportional) {
        A2Metadata meta;
        meta.reference = nullptr; // the model is its own reference form
        meta.p = 2.0;
        meta.rho = eig.rho;
        model->set_a2(std::move(meta));
    }
    return model;
}

} // namespace

DirichletForm build_dirichlet_form(const ExperimentConfig& cfg, const ValidatedFractal& f) {
    EnergyTokens t = tokenize_energy(cfg.energy);
    if (t.family != "dirichlet" && t.family != "perturbed")
        raise(errc::bad_config, "energy family '" + t.family + "' has no coefficient table");
    return form_from_tokens(t, f.boundary_size());
}

EnergyPtr build_energy(const ExperimentConfig& cfg, const ValidatedFractal& f) {
    const int n = f.boundary_size();
    EnergyTokens t = tokenize_energy(cfg.energy);
    if (t.family == "dirichlet") {
        return eigen_dirichlet(f, form_from_tokens(t, n));
    }
    if (t.family == "p_edge") {
        double p = kv_double(t, "p", 4.0);
        DirichletForm form = form_from_tokens(t, n);
        return make_p_edge(n, p, form.coeff);
    }
    if (t.family == "perturbed") {
        EnergyPtr base = eigen_dirichlet(f, form_from_tokens(t, n));
        if (!base->a2())
            raise(errc::bad_config,
                  "perturbed base form is not an eigenform on this fractal; no reference "
                  "metadata available");
        double q = kv_double(t, "q", 4.0);
        double bscale = kv_double(t, "bscale", 1.0);
        return make_perturbed(base, make_edge_power_bump(n, q, bscale));
    }
    raise(errc::bad_config, "unknown energy family '" + t.family + "'");
}

std::vector<double> default_boundary_u(const ValidatedFractal& f) {
    std::vector<double> u(static_cast<size_t>(f.boundary_size()), 0.0);
    u[0] = 1.0;
    return u;
}

} // namespace selfsim
