#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"
#include "carnot/heat.hpp"
#include "carnot/lift.hpp"
#include "carnot/metrics.hpp"
#include "carnot/snapshot.hpp"
#include "cli.hpp"

namespace carnot::cli {

namespace {

Eigen::MatrixXd coefficient_matrix(const Config& cfg, int n) {
    if (!cfg.has("kernel", "A")) return Eigen::MatrixXd::Identity(n, n);
    const auto v = cfg.get_list("kernel", "A");
    if (static_cast<int>(v.size()) != n * n)
        throw Error(ErrorKind::ConfigParseError, "[kernel] A needs " + std::to_string(n * n) + " entries");
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = v[i * n + j];
    return A;
}

// Largest |mass - 1| over saves inside the trusted window.
double mass_drift(const heat::KernelField& k) {
    double d = 0.0;
    for (std::size_t s = 0; s < k.times.size(); ++s)
        if (k.times[s] <= k.trusted_until) d = std::max(d, std::abs(k.mass[s] - 1.0));
    return d;
}

// Box resolving the kernel up to time T: a standard deviations on the first layer, the larger of
// the eps-weighted and commutator spreads on the others.
BoxGrid kernel_box(const CarnotGroup& g, double eps, double T, double a, int cells) {
    std::vector<double> hw;
    for (int i = 0; i < g.dim(); ++i)
        hw.push_back(g.degree(i) == 1 ? a * std::sqrt(2.0 * T) : std::max(a * eps * std::sqrt(2.0 * T), 2.0 * a * T));
    return BoxGrid::centered(hw, std::vector<int>(g.dim(), cells));
}

}  // namespace

int kernel_run(const Options& o) {
    const Config cfg = load_config(o, "kernel.eps");
    const CarnotGroup g(load_group(cfg));
    const BoxGrid grid = load_domain(cfg, g.dim());
    const double eps = cfg.get_list("kernel", "eps", {1.0}).front();
    const bool horizontal = cfg.get("kernel", "horizontal_only", "false") == "true";
    const auto op = heat::make_operator(g, coefficient_matrix(cfg, g.dim()), eps, horizontal);
    Run run("kernel run", cfg, o, g.id());
    heat::HeatOptions ho;
    ho.save_times = cfg.get_list("kernel", "saves", {0.1});
    ho.mass_tolerance = tolerance(cfg, "mass", 1e-3);
    ho.cfl_safety = cfg.get_double("kernel", "cfl_safety", 0.4);
    const auto k = heat::solve_heat(op, grid, ho);
    CsvWriter w(run.artifact("mass.csv"), {"t", "mass"});
    for (std::size_t s = 0; s < k.times.size(); ++s) {
        w.row(std::vector<double>{k.times[s], k.mass[s]});
        Snapshot snap{grid, k.values[s], k.times[s], eps, op.A};
        write_snapshot((run.dir() / ("kernel_" + std::to_string(s))).string(), snap);
        run.artifact("kernel_" + std::to_string(s) + ".bin");
        run.artifact("kernel_" + std::to_string(s) + ".hdr");
    }
    run.note("trusted_until", k.trusted_until);
    run.note("dt", k.dt);
    run.note("steps", k.steps);
    const double tol = tolerance(cfg, "mass", 1e-3);
    run.check("mass_drift_trusted", k.trusted_until > 0.0 && mass_drift(k) <= tol, mass_drift(k), tol);
    return run.finish();
}

int kernel_verify(const Options& o) {
    const Config cfg = load_config(o, "kernel.eps");
    const CarnotGroup g(load_group(cfg));
    const auto eps_list = cfg.get_list("kernel", "eps", {1.0, 0.5, 0.2});
    const double T = cfg.get_double("kernel", "horizon", 0.1);
    const double a = cfg.get_double("kernel", "box_scale", 3.5);
    const int cells = cfg.get_int("kernel", "cells", 16);
    const auto saves = cfg.get_list("kernel", "saves", {T / 2, 3 * T / 4, T});
    metrics::BallSampler bs;
    bs.samples = static_cast<std::size_t>(cfg.get_int("kernel", "volume_samples", 20000));
    bs.seed = o.seed;
    const Eigen::MatrixXd A = coefficient_matrix(cfg, g.dim());
    Run run("kernel verify", cfg, o, g.id());

    CsvWriter w(run.artifact("envelope.csv"), {"eps", "C", "C_upper", "C_lower", "points", "trusted_until", "mass_drift"});
    CsvWriter wp(run.artifact("envelope_points.csv"), {"eps", "t", "q", "gamma", "scaled", "c_needed"});
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    const double mtol = tolerance(cfg, "mass", 1e-3);
    for (double eps : eps_list) {
        const BoxGrid grid = kernel_box(g, eps, T, a, cells);
        heat::HeatOptions ho;
        ho.save_times = saves;
        ho.mass_tolerance = mtol;
        const auto k = heat::solve_heat(heat::make_operator(g, A, eps), grid, ho);
        const int n = g.dim();
        heat::EnvelopeMetric m{[&](const double* x) { return metrics::n_eps(g, Point(std::vector<double>(x, x + n)), eps); },
                               [&](double r) { return metrics::ball_volume(g, Point(n), r, eps, bs).volume; }};
        heat::EnvelopeOptions eo;
        eo.t_min = cfg.get_double("kernel", "fit_t_min", saves.front());
        eo.q_max = cfg.get_double("kernel", "fit_q_max", eo.q_max);
        const auto fit = heat::envelope_fit(k, m, eo);
        w.row(std::vector<double>{eps, fit.C, fit.C_upper, fit.C_lower, double(fit.points.size()), k.trusted_until,
                                  mass_drift(k)});
        for (const auto& p : fit.points) wp.row(std::vector<double>{eps, p.t, p.q, p.gamma, p.scaled, p.c_needed});
        lo = std::min(lo, fit.C);
        hi = std::max(hi, fit.C);
        run.check("mass_drift_eps_" + fmt(eps), mass_drift(k) <= mtol, mass_drift(k), mtol);
    }
    const double ratio_tol = tolerance(cfg, "envelope_ratio", 2.0);
    run.check("envelope_constant_ratio", hi / lo <= ratio_tol, hi / lo, ratio_tol);
    return run.finish();
}

int kernel_lift(const Options& o) {
    const Config cfg = load_config(o, "lift.eps");
    const CarnotGroup g(load_group(cfg));
    const lift::ProductLift L(g);
    const auto eps_list = cfg.get_list("lift", "eps", {1.0, 0.5, 0.1});
    const auto pairs = static_cast<std::size_t>(cfg.get_int("lift", "pairs", 5000));
    const double box = cfg.get_double("lift", "box", 1.0);
    const std::string conv_name = cfg.get("lift", "distance", "unit");
    if (conv_name != "unit" && conv_name != "min-root")
        throw Error(ErrorKind::ConfigParseError, "[lift] distance must be unit or min-root");
    const auto conv = conv_name == "unit" ? lift::DistanceConvention::UnitHorizontal : lift::DistanceConvention::MinRoot;
    Run run("kernel lift", cfg, o, g.id());

    const auto rep = lift::lift_and_verify(L, eps_list, pairs, o.seed, box, conv);
    CsvWriter w(run.artifact("lift_distances.csv"), {"eps", "identity_residual", "c0", "jacobian_error", "pairs"});
    const double itol = tolerance(cfg, "distance_identity", 1e-10);
    double worst = 0.0;
    for (const auto& d : rep.distances) {
        w.row(std::vector<double>{d.eps, d.identity_residual, d.c0, d.jacobian_error, double(d.pairs)});
        worst = std::max(worst, d.identity_residual);
    }
    run.check("distance_identity", worst <= itol, worst, itol);
    const double spread = tolerance(cfg, "c0_spread", 0.5);
    run.check("c0_stability", rep.c0_spread <= 1.0 + spread, rep.c0_spread, 1.0 + spread);

    if (cfg.has("lift", "marginal_cells")) {
        const int n = g.dim();
        const int cells = cfg.get_int("lift", "marginal_cells", 6);
        const auto hw = expand(cfg.get_list("lift", "marginal_half_width", {1.2}), n, "[lift] marginal_half_width");
        const double t = cfg.get_double("lift", "marginal_time", 0.045);
        const double eps = eps_list.front();
        const BoxGrid base = BoxGrid::centered(hw, std::vector<int>(n, cells));
        const BoxGrid pg = lift::product_grid(base);
        const Eigen::MatrixXd A = coefficient_matrix(cfg, n);
        heat::HeatOptions ho;
        ho.save_times = {t};
        ho.store = false;
        std::vector<double> marg;
        ho.on_save = [&](double, const std::vector<double>& u) { marg = lift::marginalize_values(pg, u, n); };
        lift::solve_lift(L, lift::LiftFrame::Coupled, eps, A, pg, ho);
        heat::HeatOptions hd;
        hd.save_times = {t};
        const auto direct = heat::solve_heat(heat::make_operator(g, A, eps), base, hd);
        double num = 0.0, den = 0.0;
        CsvWriter wm(run.artifact("lift_marginal.csv"), {"node", "marginal", "direct"});
        for (std::size_t i = 0; i < marg.size(); ++i) {
            num += std::abs(marg[i] - direct.values[0][i]);
            den += std::abs(direct.values[0][i]);
            wm.row(std::vector<double>{double(i), marg[i], direct.values[0][i]});
        }
        const double mtol = tolerance(cfg, "marginal_l1", 0.15);
        run.check("marginal_relative_l1", num / den <= mtol, num / den, mtol);
    }
    return run.finish();
}

}  // namespace carnot::cli
