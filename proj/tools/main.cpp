#include <CLI11.hpp>
#include <cstdio>

#include "carnot/error.hpp"
#include "cli.hpp"

using namespace carnot;

namespace {

// Failures of a computation rather than of its inputs.
bool is_check_failure(ErrorKind k) {
    switch (k) {
        case ErrorKind::CFLViolation:
        case ErrorKind::Divergence:
        case ErrorKind::BudgetExhausted:
        case ErrorKind::BarrierSearchFailed:
        case ErrorKind::EmptyFitRegion:
        case ErrorKind::CoercivityMismatch:
            return true;
        default:
            return false;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Carnot group geometry, heat kernel and graph flow harness"};
    app.require_subcommand(1);
    app.fallthrough();
    cli::Options o;
    app.add_option("--config", o.config, "run config file");
    app.add_option("--out", o.out, "parent directory for run directories (default $CARNOT_FLOW_OUT or ./runs)");
    app.add_option("--jobs", o.jobs, "independent runs solved concurrently")->check(CLI::PositiveNumber);
    app.add_option("--seed", o.seed, "random seed");
    app.add_option("--eps", o.eps, "eps list, replacing the one in the config");
    app.add_option("--tol", o.tols, "tolerance override NAME=VAL (repeatable)");

    int (*action)(const cli::Options&) = nullptr;
    auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help,
                    int (*fn)(const cli::Options&)) {
        auto* sub = parent->add_subcommand(name, help);
        sub->add_option("inputs", o.inputs, "config file (spec file for group commands, run directories for report)");
        sub->callback([&action, fn] { action = fn; });
    };
    auto* group = app.add_subcommand("group", "group specifications")->require_subcommand(1);
    leaf(group, "validate", "check a spec file and print its bracket table", cli::group_validate);
    leaf(group, "info", "print layers, degrees and frames of a spec", cli::group_info);
    auto* flow = app.add_subcommand("flow", "graph flow runs")->require_subcommand(1);
    leaf(flow, "run", "trajectory and monitors (and optional steady state)", cli::flow_run);
    leaf(flow, "sweep", "eps sweep with gradient constants", cli::flow_sweep);
    leaf(flow, "barrier", "boundary barrier search", cli::flow_barrier);
    auto* kernel = app.add_subcommand("kernel", "heat kernel studies")->require_subcommand(1);
    leaf(kernel, "run", "heat kernel snapshots and mass", cli::kernel_run);
    leaf(kernel, "verify", "Gaussian envelope constants across eps", cli::kernel_verify);
    leaf(kernel, "lift", "product lift distance and marginal checks", cli::kernel_lift);
    auto* geo = app.add_subcommand("geo", "metric geometry")->require_subcommand(1);
    leaf(geo, "verify", "ball volumes and doubling", cli::geo_verify);
    leaf(&app, "report", "collect the checks of run directories", cli::report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    try {
        return action(o);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return is_check_failure(e.kind()) ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
