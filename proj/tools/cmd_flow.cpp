#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"
#include "carnot/flow.hpp"
#include "carnot/snapshot.hpp"
#include "cli.hpp"

namespace carnot::cli {

using namespace carnot::flow;

namespace {

struct FlowSetup {
    std::unique_ptr<CarnotGroup> group;
    FlowProblem problem;
    RunOptions run;
};

FlowSetup flow_setup(const Config& cfg) {
    FlowSetup s;
    s.group = std::make_unique<CarnotGroup>(load_group(cfg));
    const int n = s.group->dim();
    FlowProblem& p = s.problem;
    p.group = s.group.get();
    p.grid = load_domain(cfg, n);
    p.eps = cfg.get_list("flow", "eps", {1.0}).front();
    p.phi = Expression::parse(cfg.get("flow", "phi"), n);
    p.horizon = cfg.get_double("flow", "horizon", 0.1);
    p.save_times = cfg.get_list("flow", "saves", {p.horizon});
    const std::string mode = cfg.get("flow", "mode", "tv");
    if (mode == "tv") p.mode = Mode::TvFlow;
    else if (mode == "mcf") p.mode = Mode::MeanCurvatureFlow;
    else throw Error(ErrorKind::ConfigParseError, "[flow] mode must be tv or mcf");
    const std::string form = cfg.get("flow", "form", "divergence");
    if (form == "divergence") p.form = Form::Divergence;
    else if (form == "nondivergence") p.form = Form::NonDivergence;
    else throw Error(ErrorKind::ConfigParseError, "[flow] form must be divergence or nondivergence");
    const std::string fill = cfg.get("flow", "fill", "phi");
    if (fill != "phi" && fill != "zero") throw Error(ErrorKind::ConfigParseError, "[flow] fill must be phi or zero");
    p.zero_fill = fill == "zero";
    s.run.cfl_safety = cfg.get_double("flow", "cfl_safety", 0.4);
    if (cfg.has("flow", "upper_phi")) s.run.upper_phi = Expression::parse(cfg.get("flow", "upper_phi"), n);
    s.run.energy_tolerance = tolerance(cfg, "energy_increase", 1e-13);
    validate(p);
    return s;
}

void write_gradients(const std::string& path, const FlowRun& r) {
    CsvWriter w(path, {"t", "interior_grad_1", "boundary_bound", "ratio"});
    for (std::size_t k = 0; k < r.times.size(); ++k)
        w.row(std::vector<double>{r.times[k], r.interior_grad[k], r.boundary_bound[k],
                                  r.boundary_bound[k] > 0 ? r.interior_grad[k] / r.boundary_bound[k] : 0.0});
}

void flow_checks(Run& run, const Config& cfg, const FlowProblem& p, const FlowRun& r, bool has_upper) {
    if (p.mode == Mode::TvFlow) run.check("energy_monotone", r.energy_monotone, r.max_energy_increase, tolerance(cfg, "energy_increase", 1e-13));
    const double slack = tolerance(cfg, "gradient_slack", 0.05);
    run.check("interior_gradient_bound", r.gradient_bound_ratio <= 1.0 + slack, r.gradient_bound_ratio, 1.0 + slack);
    if (has_upper) {
        const double tol = tolerance(cfg, "comparison", 1e-8);
        run.check("comparison", r.max_comparison_violation <= tol, r.max_comparison_violation, tol);
    }
    if (!p.zero_fill) {
        const double tol = tolerance(cfg, "max_principle", 1e-10);
        run.check("max_principle", r.max_principle_excess <= tol, r.max_principle_excess, tol);
    }
}

}  // namespace

int flow_run(const Options& o) {
    const Config cfg = load_config(o, "flow.eps");
    FlowSetup s = flow_setup(cfg);
    const FlowProblem& p = s.problem;
    Run run("flow run", cfg, o, s.group->id());
    const FlowRun r = run_flow(p, s.run);
    write_monitor_csv(run.artifact("monitor.csv"), r.monitors);
    write_gradients(run.artifact("gradients.csv"), r);
    {
        CsvWriter w(run.artifact("energy.csv"), {"step", "tv_energy"});
        for (std::size_t k = 0; k < r.energy_trace.size(); ++k) w.row(std::vector<double>{double(k), r.energy_trace[k]});
    }
    if (cfg.get("monitors", "trajectory", "true") == "true") {
        write_trajectory((run.dir() / "traj").string(), p, r);
        for (std::size_t k = 0; k < r.saves.size(); ++k) {
            run.artifact("traj_" + std::to_string(k) + ".bin");
            run.artifact("traj_" + std::to_string(k) + ".hdr");
        }
    }
    run.note("dt", r.dt);
    run.note("dt_bound", r.dt_bound);
    run.note("steps", r.steps);
    flow_checks(run, cfg, p, r, s.run.upper_phi.has_value());

    if (cfg.sections().count("steady")) {
        FlowProblem q = p;
        if (cfg.has("steady", "phi")) q.phi = Expression::parse(cfg.get("steady", "phi"), s.group->dim());
        const double tol = tolerance(cfg, "steady_residual", 1e-6);
        SteadyOptions so;
        so.max_iterations = static_cast<std::size_t>(cfg.get_int("steady", "max_iterations", 200));
        CsvWriter w(run.artifact("steady.csv"), {"fill", "iteration", "residual", "energy"});
        std::vector<std::vector<double>> sols;
        for (bool zero : {false, true}) {
            q.zero_fill = zero;
            try {
                const SteadyResult sr = steady_state(q, tol, so);
                for (std::size_t k = 0; k < sr.residual_trace.size(); ++k)
                    w.row(std::vector<double>{zero ? 1.0 : 0.0, double(k), sr.residual_trace[k], sr.energy_trace[k]});
                run.check(zero ? "steady_residual_zero_fill" : "steady_residual", true, sr.residual, tol);
                sols.push_back(sr.u);
                if (!zero) {
                    Snapshot snap;
                    snap.grid = q.grid;
                    snap.values = sr.u;
                    snap.epsilon = q.eps;
                    write_snapshot((run.dir() / "steady").string(), snap);
                    run.artifact("steady.bin");
                    run.artifact("steady.hdr");
                }
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::BudgetExhausted) throw;
                run.check(zero ? "steady_residual_zero_fill" : "steady_residual", false, NAN, tol);
            }
        }
        if (sols.size() == 2) {
            double d = 0.0;
            for (std::size_t i = 0; i < sols[0].size(); ++i) d = std::max(d, std::abs(sols[0][i] - sols[1][i]));
            const double t = tolerance(cfg, "fill_independence", 1e-5);
            run.check("steady_fill_independence", d <= t, d, t);
        }
    }
    return run.finish();
}

int flow_sweep(const Options& o) {
    const Config cfg = load_config(o, "sweep.eps");
    FlowSetup s = flow_setup(cfg);
    const auto eps = cfg.get_list("sweep", "eps", {1.0, 0.5, 0.25, 0.125, 0.0});
    Run run("flow sweep", cfg, o, s.group->id());
    SweepOptions so;
    so.run = s.run;
    so.run.upper_phi.reset();
    so.window_fraction = cfg.get_double("sweep", "window_fraction", 0.5);
    so.jobs = o.jobs;
    const SweepReport rep = eps_sweep(s.problem, eps, so);
    {
        CsvWriter w(run.artifact("sweep.csv"), {"eps", "sup_grad_1", "grad_constant"});
        for (std::size_t k = 0; k < eps.size(); ++k) w.row(std::vector<double>{eps[k], rep.sup_grad_1[k], rep.grad_constant[k]});
    }
    {
        CsvWriter w(run.artifact("sweep_diff.csv"), {"eps_a", "eps_b", "sup_window_diff"});
        for (std::size_t k = 0; k < rep.consecutive_diff.size(); ++k)
            w.row(std::vector<double>{eps[k], eps[k + 1], rep.consecutive_diff[k]});
    }
    run.note("data_lipschitz", rep.data_lipschitz);
    run.check("sweep_monotone", rep.monotone, rep.consecutive_diff.empty() ? 0.0 : rep.consecutive_diff.back(), 0.0);
    const double spread = tolerance(cfg, "constant_spread", 0.2);
    run.check("gradient_constant_spread", rep.constant_spread <= 1.0 + spread, rep.constant_spread, 1.0 + spread);
    return run.finish();
}

int flow_barrier(const Options& o) {
    const Config cfg = load_config(o, "flow.eps");
    FlowSetup s = flow_setup(cfg);
    const int n = s.group->dim();
    Run run("flow barrier", cfg, o, s.group->id());
    s.run.upper_phi.reset();
    const FlowRun r = run_flow(s.problem, s.run);

    std::vector<std::vector<double>> points;
    std::stringstream ss(cfg.get("barrier", "points"));
    for (std::string item; std::getline(ss, item, ';');) {
        const auto x = parse_number_list(item);
        if (x.empty()) continue;
        if (static_cast<int>(x.size()) != n)
            throw Error(ErrorKind::ConfigParseError, "[barrier] points need " + std::to_string(n) + " coordinates each");
        points.push_back(x);
    }
    if (points.empty()) throw Error(ErrorKind::ConfigParseError, "[barrier] points is empty");
    BarrierOptions bo;
    bo.radius = cfg.get_double("barrier", "radius", bo.radius);
    bo.shrink = cfg.get("barrier", "shrink", "true") != "false";
    bo.sign_tolerance = tolerance(cfg, "barrier_excess", bo.sign_tolerance);
    const double hess_tol = tolerance(cfg, "plane_hessian", 1e-12);

    CsvWriter w(run.artifact("barrier.csv"),
                {"point", "radius", "k", "nu", "plane_hessian_residual", "barrier_excess_max", "q_max", "lateral_margin", "comparison_margin",
                 "quotient_w", "quotient_v", "ode_residual", "nodes"});
    for (std::size_t k = 0; k < points.size(); ++k) {
        const std::string tag = "point" + std::to_string(k);
        try {
            const BarrierReport b = barrier_verify(s.problem, r, points[k], bo);
            w.row(std::vector<double>{double(k), b.radius, b.barrier.k, b.barrier.nu, b.plane_hessian_residual, b.barrier_excess_max, b.q_max,
                                      b.lateral_margin, b.comparison_margin, b.quotient_w, b.quotient_v, b.ode_residual,
                                      double(b.neighbourhood_nodes)});
            if (b.step_two) run.check(tag + "_plane_hessian", b.plane_hessian_residual <= hess_tol, b.plane_hessian_residual, hess_tol);
            run.check(tag + "_barrier_found", true, b.barrier_excess_max, bo.sign_tolerance);
            run.check(tag + "_quotient_finite", std::isfinite(b.quotient_w), b.quotient_w, 0.0);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::BarrierSearchFailed) throw;
            std::fprintf(stderr, "%s: %s\n", tag.c_str(), e.what());
            run.check(tag + "_barrier_found", false, NAN, bo.sign_tolerance);
        }
    }
    return run.finish();
}

}  // namespace carnot::cli
