// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#include "selfsim/renorm.hpp"

#include "selfsim/errors.hpp"
#include "selfsim/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace selfsim {

double s_theta(const ValidatedFractal& f, const EnergyModel& E, double theta,
               const LevelFunction& v) {
    if (!(theta > 0.0)) raise(errc::bad_spec, "theta must be positive");
    if (v.level != 1) raise(errc::bad_spec, "s_theta expects a level-1 function");
    const int n = f.boundary_size();
    std::vector<double> cell(static_cast<size_t>(n));
    double s = 0.0;
    for (int i = 0; i < f.map_count(); ++i) {
        for (int j = 0; j < n; ++j) cell[static_cast<size_t>(j)] = theta * v[f.image(i, j)];
        s += E(cell);
    }
    return s;
}

namespace {

// level-1 graph Laplacian of a Dirichlet form, summed over cell copies
Eigen::MatrixXd level1_laplacian(const ValidatedFractal& f, const DirichletForm& D) {
    const int n = f.boundary_size();
    const int m = f.level1_size();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < f.map_count(); ++i) {
        int idx = 0;
        for (int j1 = 0; j1 < n; ++j1)
            for (int j2 = j1 + 1; j2 < n; ++j2, ++idx) {
                double c = D.coeff[static_cast<size_t>(idx)];
                if (c == 0.0) continue;
                int q1 = f.image(i, j1), q2 = f.image(i, j2);
                L(q1, q1) += c;
                L(q2, q2) += c;
                L(q1, q2) -= c;
                L(q2, q1) -= c;
            }
    }
    return L;
}

std::vector<int32_t> interior_ids(const ValidatedFractal& f) {
    const LevelVertexSet& l1 = f.level(1);
    std::vector<int32_t> ids;
    for (int32_t q = 0; q < l1.vertex_count; ++q)
        if (!l1.is_boundary[static_cast<size_t>(q)]) ids.push_back(q);
    return ids;
}

// harmonic extension of u through a Dirichlet form: exact interior solve
LevelFunction dirichlet_extension(const ValidatedFractal& f, const DirichletForm& D,
                                  std::span<const double> u) {
    const LevelVertexSet& l1 = f.level(1);
    const int n = f.boundary_size();
    Eigen::MatrixXd L = level1_laplacian(f, D);
    std::vector<int32_t> free_ids = interior_ids(f);
    const int nf = static_cast<int>(free_ids.size());

    LevelFunction v;
    v.level = 1;
    v.values.assign(static_cast<size_t>(l1.vertex_count), 0.0);
    for (int j = 0; j < n; ++j) v[l1.boundary_ids[static_cast<size_t>(j)]] = u[static_cast<size_t>(j)];
    if (nf == 0) return v;

    Eigen::MatrixXd A(nf, nf);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nf);
    for (int a = 0; a < nf; ++a) {
        for (int c = 0; c < nf; ++c) A(a, c) = L(free_ids[static_cast<size_t>(a)], free_ids[static_cast<size_t>(c)]);
        for (int j = 0; j < n; ++j)
            b(a) -= L(free_ids[static_cast<size_t>(a)], l1.boundary_ids[static_cast<size_t>(j)]) * u[static_cast<size_t>(j)];
    }
    Eigen::VectorXd x = A.ldlt().solve(b);
    for (int a = 0; a < nf; ++a) v[free_ids[static_cast<size_t>(a)]] = x(a);
    return v;
}

LevelFunction clamp_to_range(const ValidatedFractal& f, const LevelFunction& v,
                             std::span<const double> u) {
    double lo = u[0], hi = u[0];
    for (double x : u) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    LevelFunction out = v;
    for (auto& x : out.values) x = std::max(std::min(x, hi), lo);
    (void)f;
    return out;
}

struct CoordinateProblem {
    const ValidatedFractal& f;
    const EnergyModel& E;
    double theta;
    // incidences of one free vertex: (cell, slot)
    std::vector<std::vector<std::pair<int, int>>> touch;
    std::vector<int32_t> free_ids;
};

// objective restricted to the cells meeting free vertex `a`, as a function
// of that vertex's value
double local_value(const CoordinateProblem& P, const LevelFunction& v, int a, double t) {
    const int n = P.f.boundary_size();
    std::vector<double> cell(static_cast<size_t>(n));
    double s = 0.0;
    for (auto [i, slot] : P.touch[static_cast<size_t>(a)]) {
        for (int j = 0; j < n; ++j) cell[static_cast<size_t>(j)] = P.theta * v[P.f.image(i, j)];
        cell[static_cast<size_t>(slot)] = P.theta * t;
        s += P.E(cell);
    }
    return s;
}

double local_derivative(const CoordinateProblem& P, const LevelFunction& v, int a, double t) {
    const int n = P.f.boundary_size();
    std::vector<double> cell(static_cast<size_t>(n)), grad(static_cast<size_t>(n));
    double g = 0.0;
    for (auto [i, slot] : P.touch[static_cast<size_t>(a)]) {
        for (int j = 0; j < n; ++j) cell[static_cast<size_t>(j)] = P.theta * v[P.f.image(i, j)];
        cell[static_cast<size_t>(slot)] = P.theta * t;
        P.E.gradient(cell, grad);
        g += P.theta * grad[static_cast<size_t>(slot)];
    }
    return g;
}

// one-dimensional convex minimization on an adaptively grown bracket
double minimize_coordinate(const CoordinateProblem& P, const LevelFunction& v, int a, double cur,
                           double lo, double hi, double width_tol, bool use_gradient) {
    double span0 = hi - lo;
    if (span0 <= 0) span0 = 1.0;
    if (use_gradient) {
        // derivative is increasing; expand until it brackets zero
        double glo = local_derivative(P, v, a, lo);
        double ghi = local_derivative(P, v, a, hi);
        int guard = 0;
        while (glo > 0.0 && guard++ < 64) {
            lo -= span0;
            span0 *= 2.0;
            glo = local_derivative(P, v, a, lo);
        }
        guard = 0;
        while (ghi < 0.0 && guard++ < 64) {
            hi += span0;
            span0 *= 2.0;
            ghi = local_derivative(P, v, a, hi);
        }
        if (glo > 0.0 || ghi < 0.0) return cur; // flat or broken; keep position
        while (hi - lo > width_tol) {
            double mid = 0.5 * (lo + hi);
            if (local_derivative(P, v, a, mid) < 0.0)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }
    // golden-section; expand while the minimum sits on the edge
    const double inv_phi = 0.6180339887498948482;
    int guard = 0;
    for (;;) {
        double flo = local_value(P, v, a, lo);
        double fhi = local_value(P, v, a, hi);
        double m1 = hi - inv_phi * (hi - lo);
        double fm1 = local_value(P, v, a, m1);
        if (fm1 <= flo && fm1 <= fhi) break;
        if (guard++ >= 64) break;
        if (flo < fhi) {
            lo -= span0;
        } else {
            hi += span0;
        }
        span0 *= 2.0;
    }
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = local_value(P, v, a, x1);
    double f2 = local_value(P, v, a, x2);
    while (hi - lo > width_tol) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = local_value(P, v, a, x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = local_value(P, v, a, x2);
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

RenormResult lambda_theta(const ValidatedFractal& f, const EnergyModel& E, double theta,
                          std::span<const double> u, const SolverConfig& cfg) {
    if (!(theta > 0.0)) raise(errc::bad_spec, "theta must be positive");
    if (static_cast<int>(u.size()) != f.boundary_size())
        raise(errc::bad_spec, "boundary function has wrong size");

    RenormResult res;
    if (const DirichletForm* D = E.as_dirichlet()) {
        res.minimizer = dirichlet_extension(f, *D, u);
        res.value = s_theta(f, E, theta, res.minimizer);
        res.clamped = clamp_to_range(f, res.minimizer, u);
        res.clamped_value = s_theta(f, E, theta, res.clamped);
        res.exact = true;
        return res;
    }

    const LevelVertexSet& l1 = f.level(1);
    const int n = f.boundary_size();
    double lo = u[0], hi = u[0];
    for (double x : u) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    double mean = 0.0;
    for (double x : u) mean += x;
    mean /= static_cast<double>(n);

    CoordinateProblem P{f, E, theta, {}, interior_ids(f)};
    P.touch.resize(P.free_ids.size());
    for (size_t a = 0; a < P.free_ids.size(); ++a)
        for (int i = 0; i < f.map_count(); ++i)
            for (int j = 0; j < n; ++j)
                if (f.image(i, j) == P.free_ids[a]) P.touch[a].push_back({i, j});

    // every free vertex starts at the boundary mean
    LevelFunction v;
    v.level = 1;
    v.values.assign(static_cast<size_t>(l1.vertex_count), mean);
    for (int j = 0; j < n; ++j) v[l1.boundary_ids[static_cast<size_t>(j)]] = u[static_cast<size_t>(j)];

    const bool use_gradient = E.has_gradient();
    const double width_tol = std::max(cfg.tol_coord * 1e-3, 1e-14);
    double prev_value = s_theta(f, E, theta, v);
    long updates = 0;
    double last_sweep_move = 0.0;
    for (;;) {
        double max_move = 0.0;
        for (size_t a = 0; a < P.free_ids.size(); ++a) {
            double cur = v[P.free_ids[a]];
            double next = minimize_coordinate(P, v, static_cast<int>(a), cur, lo, hi, width_tol,
                                              use_gradient);
            v[P.free_ids[a]] = next;
            max_move = std::max(max_move, std::fabs(next - cur));
            if (++updates > cfg.max_coordinate_updates)
                raise(errc::tolerance_unreached, "coordinate descent hit the update cap");
        }
        double value = s_theta(f, E, theta, v);
        if (value > prev_value + 1e-9 * (std::fabs(prev_value) + 1.0))
            raise(errc::solver_divergence, "objective increased during a sweep");
        prev_value = value;
        last_sweep_move = max_move;
        if (max_move < cfg.tol_coord) break;
    }

    res.minimizer = v;
    res.value = prev_value;
    res.clamped = clamp_to_range(f, v, u);
    res.clamped_value = s_theta(f, E, theta, res.clamped);
    res.iterations = updates;
    res.residual = last_sweep_move;
    if (res.clamped_value < res.value) { // Q4: never worse, sometimes better
        res.value = res.clamped_value;
        res.minimizer = res.clamped;
    }
    return res;
}

BisectResult bisect_increasing(const std::function<double(double)>& g, double target, double start,
                               double rel_tol, double width_tol, double growth, double scale) {
    if (!(growth > 1.0)) raise(errc::bad_config, "bracket growth must exceed 1");
    BisectResult out;
    const double slack = 1e-9 * (std::fabs(target) + std::fabs(scale)) + 1e-300;
    auto eval = [&](double th) {
        double val = g(th);
        out.history.push_back({th, val});
        return val;
    };
    auto done = [&](double val) { return std::fabs(val - target) <= rel_tol * std::fabs(scale); };

    double t1 = start, v1 = eval(t1);
    if (done(v1)) {
        out.root = t1;
        out.value = v1;
        out.residual_rel = std::fabs(v1 - target) / std::fabs(scale);
        return out;
    }
    double lo, hi, vlo, vhi;
    if (v1 < target) {
        lo = t1;
        vlo = v1;
        hi = t1;
        vhi = v1;
        int guard = 0;
        while (vhi < target) {
            if (++guard > 200) raise(errc::tolerance_unreached, "bracket growth failed to cross target");
            double prev = vhi;
            hi *= growth;
            vhi = eval(hi);
            if (vhi < prev - slack)
                raise(errc::monotonicity_violation, "map decreased along the growing bracket");
            if (vhi >= target) break;
            lo = hi;
            vlo = vhi;
        }
    } else {
        hi = t1;
        vhi = v1;
        lo = t1;
        vlo = v1;
        int guard = 0;
        while (vlo > target) {
            if (++guard > 200) raise(errc::tolerance_unreached, "bracket growth failed to cross target");
            double prev = vlo;
            lo /= growth;
            vlo = eval(lo);
            if (vlo > prev + slack)
                raise(errc::monotonicity_violation, "map increased along the shrinking bracket");
            if (vlo <= target) break;
            hi = lo;
            vhi = vlo;
        }
    }

    double mid = 0.5 * (lo + hi), vmid = 0.5 * (vlo + vhi);
    while (hi - lo > width_tol) {
        mid = 0.5 * (lo + hi);
        vmid = eval(mid);
        if (vmid < vlo - slack || vmid > vhi + slack)
            raise(errc::monotonicity_violation, "midpoint value escapes the bracket values");
        if (done(vmid)) break;
        if (vmid < target) {
            lo = mid;
            vlo = vmid;
        } else {
            hi = mid;
            vhi = vmid;
        }
    }
    if (hi - lo <= width_tol && !done(vmid)) {
        mid = 0.5 * (lo + hi);
        vmid = eval(mid);
    }
    out.root = mid;
    out.value = vmid;
    out.residual_rel = std::fabs(vmid - target) / std::fabs(scale);
    return out;
}

std::optional<std::pair<double, double>> ThetaCache::find(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = map_.find(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
}

void ThetaCache::store(const std::string& key, double theta, double residual) const {
    std::lock_guard<std::mutex> lock(mutex_);
    map_.emplace(key, std::make_pair(theta, residual));
}

std::string ThetaCache::key_for(std::span<const double> u, double sigma) {
    double lo = u[0], hi = u[0];
    for (double x : u) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    double osc = hi - lo;
    std::string key;
    key.resize((u.size() + 1) * sizeof(double));
    char* p = key.data();
    std::memcpy(p, &sigma, sizeof(double));
    p += sizeof(double);
    for (double x : u) {
        double z = (x - lo) / osc;
        std::memcpy(p, &z, sizeof(double));
        p += sizeof(double);
    }
    return key;
}

ThetaSolve theta_bar(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                     std::span<const double> u, const SolverConfig& cfg, const ThetaCache* cache) {
    if (!(sigma > 0.0)) raise(errc::hypothesis_violation, "sigma must be positive");
    ThetaSolve out;
    out.sigma = sigma;
    if (oscillation(u) == 0.0) {
        if (!E.a2())
            raise(errc::missing_a2_metadata,
                  "theta_bar at a constant function needs eigenform metadata (rho, p)");
        const A2Metadata& meta = *E.a2();
        out.theta_bar = std::pow(sigma / meta.rho, 1.0 / meta.p);
        out.constant_input = true;
        return out;
    }

    std::string key;
    if (cache && E.homogeneity()) {
        key = ThetaCache::key_for(u, sigma);
        if (auto hit = cache->find(key)) {
            out.theta_bar = hit->first;
            out.residual_rel = hit->second;
            return out;
        }
    }

    const double target = sigma * E(u);
    auto g = [&](double th) { return lambda_theta(f, E, th, u, cfg).value; };
    BisectResult bis = bisect_increasing(g, target, 1.0, cfg.tol_theta, cfg.theta_bracket_width,
                                         cfg.bracket_growth, target);
    out.theta_bar = bis.root;
    out.residual_rel = bis.residual_rel;
    out.bracket_history = std::move(bis.history);
    if (!key.empty()) cache->store(key, out.theta_bar, out.residual_rel);
    return out;
}

HPrimeSolve solve_h_prime(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                          std::span<const double> u, const SolverConfig& cfg,
                          const ThetaCache* cache) {
    HPrimeSolve out;
    out.theta = theta_bar(f, E, sigma, u, cfg, cache);
    if (out.theta.constant_input || oscillation(u) == 0.0) {
        const LevelVertexSet& l1 = f.level(1);
        LevelFunction v;
        v.level = 1;
        v.values.assign(static_cast<size_t>(l1.vertex_count), u[0]);
        out.renorm.minimizer = v;
        out.renorm.clamped = v;
        out.renorm.exact = true;
        return out;
    }
    out.renorm = lambda_theta(f, E, out.theta.theta_bar, u, cfg);
    return out;
}

LevelFunction choose_h_prime(const ValidatedFractal& f, const EnergyModel& E, double sigma,
                             std::span<const double> u, const SolverConfig& cfg,
                             const ThetaCache* cache) {
    return solve_h_prime(f, E, sigma, u, cfg, cache).renorm.clamped;
}

DirichletForm trace_form(const ValidatedFractal& f, const DirichletForm& D) {
    const LevelVertexSet& l1 = f.level(1);
    const int n = f.boundary_size();
    Eigen::MatrixXd L = level1_laplacian(f, D);
    std::vector<int32_t> free_ids = interior_ids(f);
    const int nf = static_cast<int>(free_ids.size());

    Eigen::MatrixXd S(n, n);
    if (nf == 0) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                S(a, b) = L(l1.boundary_ids[static_cast<size_t>(a)], l1.boundary_ids[static_cast<size_t>(b)]);
    } else {
        Eigen::MatrixXd A(nf, nf), B(nf, n), Lbb(n, n);
        for (int a = 0; a < nf; ++a) {
            for (int c = 0; c < nf; ++c) A(a, c) = L(free_ids[static_cast<size_t>(a)], free_ids[static_cast<size_t>(c)]);
            for (int j = 0; j < n; ++j) B(a, j) = L(free_ids[static_cast<size_t>(a)], l1.boundary_ids[static_cast<size_t>(j)]);
        }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                Lbb(a, b) = L(l1.boundary_ids[static_cast<size_t>(a)], l1.boundary_ids[static_cast<size_t>(b)]);
        S = Lbb - B.transpose() * A.ldlt().solve(B);
    }

    DirichletForm T;
    T.n = n;
    T.coeff.resize(static_cast<size_t>(DirichletForm::pair_count(n)));
    int idx = 0;
    for (int j1 = 0; j1 < n; ++j1)
        for (int j2 = j1 + 1; j2 < n; ++j2, ++idx) {
            double c = -S(j1, j2);
            if (c < 0.0 && c > -1e-12 * (D.max_abs_coeff() + 1.0)) c = 0.0; // Schur round-off
            T.coeff[static_cast<size_t>(idx)] = c;
        }
    return T;
}

EigenResult quadratic_eigen(const ValidatedFractal& f, const DirichletForm& D, int max_iterations,
                            double tol) {
    if (!D.irreducible()) raise(errc::reducible_form, "eigen computation needs an irreducible form");
    EigenResult out;
    out.trace = trace_form(f, D);

    auto norm2 = [](const DirichletForm& X) {
        double s = 0.0;
        for (double c : X.coeff) s += c * c;
        return std::sqrt(s);
    };

    // proportionality of the one-step trace to the input
    {
        int ref = 0;
        for (size_t i = 0; i < D.coeff.size(); ++i)
            if (D.coeff[i] > D.coeff[static_cast<size_t>(ref)]) ref = static_cast<int>(i);
        double rho = out.trace.coeff[static_cast<size_t>(ref)] / D.coeff[static_cast<size_t>(ref)];
        double dev = 0.0;
        for (size_t i = 0; i < D.coeff.size(); ++i)
            dev = std::max(dev, std::fabs(out.trace.coeff[i] - rho * D.coeff[i]));
        if (dev <= 1e-12 * D.max_abs_coeff()) {
            out.rho = rho;
            out.proportional = true;
            out.fixed_form = D;
            out.residual = dev;
            return out;
        }
    }

    // normalized fixed-point iteration D -> Lambda(D)/|Lambda(D)|
    DirichletForm cur = D;
    double nrm = norm2(cur);
    for (auto& c : cur.coeff) c /= nrm;
    double rho = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        DirichletForm next = trace_form(f, cur);
        rho = norm2(next);
        if (rho <= 0.0) raise(errc::no_convergence, "trace form collapsed to zero");
        double change = 0.0;
        for (size_t i = 0; i < next.coeff.size(); ++i) {
            next.coeff[i] /= rho;
            change = std::max(change, std::fabs(next.coeff[i] - cur.coeff[i]));
        }
        cur = std::move(next);
        out.iterations = it + 1;
        if (change <= tol) {
            DirichletForm check = trace_form(f, cur);
            double resid = 0.0;
            for (size_t i = 0; i < check.coeff.size(); ++i)
                resid = std::max(resid, std::fabs(check.coeff[i] - rho * cur.coeff[i]));
            out.rho = rho;
            out.fixed_form = cur;
            out.residual = resid;
            return out;
        }
    }
    raise(errc::no_convergence, "eigenform iteration did not settle within the cap");
}

A2AuditReport audit_a2(const ValidatedFractal& f, const EnergyModel& E, int budget, uint64_t seed,
                       const SolverConfig& cfg) {
    if (!E.a2()) raise(errc::missing_a2_metadata, "audit_a2 needs A2 metadata");
    const A2Metadata& meta = *E.a2();
    const EnergyModel& ref = E.a2_reference();
    const int n = E.boundary_size();
    A2AuditReport rep;
    Rng rng(seed);

    for (int s = 0; s < budget; ++s) {
        std::vector<double> u = rng.normal_vector(n);
        if (oscillation(std::span<const double>(u)) < 1e-9) continue;
        double t = rng.uniform(0.25, 4.0);
        std::vector<double> tu(u.size());
        for (size_t i = 0; i < u.size(); ++i) tu[i] = t * u[i];
        double lhs = ref(tu), rhs = std::pow(t, meta.p) * ref(u);
        double dev = std::fabs(lhs - rhs) / (std::fabs(rhs) + 1e-300);
        rep.worst_homogeneity_dev = std::max(rep.worst_homogeneity_dev, dev);
    }
    rep.homogeneity_ok = rep.worst_homogeneity_dev <= 1e-9;

    for (int s = 0; s < budget; ++s) {
        std::vector<double> u = rng.normal_vector(n);
        if (oscillation(std::span<const double>(u)) < 1e-6) continue;
        double e = ref(u);
        double lam = lambda_theta(f, ref, 1.0, u, cfg).value;
        rep.eigen_residual = std::max(rep.eigen_residual, std::fabs(lam - meta.rho * e) / e);
    }
    rep.eigen_ok = rep.eigen_residual <= 1e-8;

    const double radius = meta.small_osc_radius;
    double prev = -1.0;
    for (double scale : {radius, radius * 1e-1, radius * 1e-2}) {
        double worst = 0.0;
        for (int s = 0; s < std::max(budget / 4, 8); ++s) {
            std::vector<double> u = rng.normal_vector(n);
            double osc = oscillation(std::span<const double>(u));
            if (osc < 1e-9) continue;
            for (auto& x : u) x *= scale / osc;
            double denom = ref(u);
            if (denom <= 0.0) continue;
            worst = std::max(worst, std::fabs(E(u) / denom - 1.0));
        }
        if (prev >= 0.0 && worst > prev * 2.0 + 1e-12) rep.ratio_ok = false;
        prev = worst;
        rep.worst_ratio_dev = worst;
    }
    if (rep.worst_ratio_dev > 0.05) rep.ratio_ok = false;
    return rep;
}

} // namespace selfsim
