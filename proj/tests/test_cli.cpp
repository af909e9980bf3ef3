// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    fs::path tmp = fs::temp_directory_path() / "selfsim_cli_out.txt";
    std::string cmd = std::string(SELFSIM_BIN) + " " + args + " > " + tmp.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    std::ifstream in(tmp);
    std::stringstream ss;
    ss << in.rdbuf();
    int code = -1;
#ifdef WEXITSTATUS
    if (rc != -1) code = WEXITSTATUS(rc);
#else
    code = rc;
#endif
    return {code, ss.str()};
}

std::string strip_header(const std::string& path) {
    std::ifstream in(path);
    std::string line, body;
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') body += line + "\n";
    return body;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("validate reports the built-ins and rejects bad specs") {
    RunResult ok = run_cli("validate --fractal gasket");
    CHECK(ok.exit_code == 0);
    CHECK(ok.out.find("OK") != std::string::npos);
    CHECK(ok.out.find("chain_constant=2") != std::string::npos);

    RunResult iv = run_cli("validate --fractal interval");
    CHECK(iv.exit_code == 0);
    CHECK(iv.out.find("chain_constant=2") != std::string::npos);

    fs::path dir = fresh_dir("selfsim_spec");
    std::ofstream spec(dir / "bad.spec");
    spec << R"({"boundary_size":3,"maps":[["P2","M12","M13"],["M12","P2","M23"],["M13","M23","P3"]]})";
    spec.close();
    RunResult bad = run_cli("validate --spec " + (dir / "bad.spec").string());
    CHECK(bad.exit_code == 1);
    CHECK(bad.out.find("FixedPointViolation") != std::string::npos);
}

TEST_CASE("eigen prints the exact gasket eigenvalue") {
    RunResult r = run_cli("eigen --fractal gasket");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("rho=0.6") != std::string::npos);
    CHECK(r.out.find("proportional=yes") != std::string::npos);
}

TEST_CASE("axioms audits pass for the built-in families") {
    RunResult r = run_cli("axioms --energy \"p_edge p=4\" --budget 60");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("Q1 convexity           PASS") != std::string::npos);
    CHECK(r.out.find("Q4 markov clamping     PASS") != std::string::npos);
}

TEST_CASE("theta tables hit the paper scalings") {
    RunResult r = run_cli("theta --fractal interval --energy dirichlet --sigma 2 --u 0,1");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("2.0000000000") != std::string::npos);

    RunResult c = run_cli(
        "theta --fractal gasket --energy dirichlet --sigma 1 --u 1,0,0 --scales 1,1e-2,1e-4");
    CHECK(c.exit_code == 0);
    // homogeneous form: the theta column is constant sqrt(5/3)
    size_t first = c.out.find("1.2909944487");
    CHECK(first != std::string::npos);
    size_t second = c.out.find("1.2909944487", first + 1);
    CHECK(second != std::string::npos);
    size_t third = c.out.find("1.2909944487", second + 1);
    CHECK(third != std::string::npos);
}

TEST_CASE("extend writes conservation summaries and honors the sigma gate") {
    fs::path dir = fresh_dir("selfsim_extend");
    RunResult r = run_cli("extend --fractal gasket --energy dirichlet --sigma 1 --depth 4 "
                          "--u 1,0,0 --out " +
                          dir.string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("E(u): 2") != std::string::npos);
    CHECK(fs::exists(dir / "cells.csv"));
    CHECK(fs::exists(dir / "levels.csv"));
    CHECK(fs::exists(dir / "summary.txt"));

    RunResult gate = run_cli("extend --fractal gasket --energy dirichlet --sigma 1.5 --u 1,0,0");
    CHECK(gate.exit_code == 3);
    CHECK(gate.out.find("HypothesisViolation") != std::string::npos);

    RunResult lifted = run_cli(
        "extend --fractal interval --energy dirichlet --sigma 2 --depth 2 --u 0,1 --unsafe-sigma");
    CHECK(lifted.exit_code == 0);
}

TEST_CASE("csv bodies are byte-identical across reruns") {
    fs::path a = fresh_dir("selfsim_rerun_a");
    fs::path b = fresh_dir("selfsim_rerun_b");
    std::string args = "diagnose --fractal gasket --energy \"p_edge p=4\" --budget 8 --seed 5 "
                       "--depth 3 --out ";
    CHECK(run_cli(args + a.string()).exit_code == 0);
    CHECK(run_cli(args + b.string()).exit_code == 0);
    CHECK(strip_header((a / "diagnostics.csv").string()) ==
          strip_header((b / "diagnostics.csv").string()));
    CHECK_FALSE(strip_header((a / "diagnostics.csv").string()).empty());

    // the header embeds the resolved config
    std::ifstream in(a / "diagnostics.csv");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line.find("generated_at") != std::string::npos);
    std::getline(in, line);
    CHECK(line.find("\"seed\":5") != std::string::npos);
}

TEST_CASE("diagnose reports the interval halving rate") {
    RunResult r = run_cli("diagnose --fractal interval --energy dirichlet --budget 8 --depth 4");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("rate 0.5") != std::string::npos);
}
