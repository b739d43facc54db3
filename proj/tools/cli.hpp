#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "carnot/config.hpp"
#include "carnot/grid.hpp"
#include "carnot/group.hpp"

namespace carnot::cli {

struct Options {
    std::vector<std::string> inputs;  // positional arguments
    std::string config;
    std::string out;
    int jobs = 1;
    std::uint64_t seed = 0;
    std::string eps;                // replaces the command's eps list
    std::vector<std::string> tols;  // NAME=VAL, stored under [tolerances]
};

/// The config named by --config or the first positional argument, with --tol and --eps applied.
/// `eps_key` is "section.key" receiving --eps.
Config load_config(const Options& o, const std::string& eps_key);

/// [group] builtin = NAME or [group] spec = PATH (relative to the config file).
CarnotGroupSpec load_group(const Config& cfg);
CarnotGroupSpec builtin_group(const std::string& name);

/// [domain] lower, upper (lists or scalars) and nodes (per axis, list or scalar).
BoxGrid load_domain(const Config& cfg, int dim);

/// [tolerances] NAME, or the default.
double tolerance(const Config& cfg, const std::string& name, double fallback);

std::vector<double> expand(const std::vector<double>& v, int n, const std::string& what);

std::uint64_t fnv1a(const std::string& text);

/// One run directory <out>/<command>-<hash>, hash over the canonical config and the seed.
/// Collects artifacts and checks and writes manifest.json.
class Run {
public:
    Run(const std::string& command, const Config& cfg, const Options& o, const std::string& group_id);

    const std::filesystem::path& dir() const { return dir_; }
    /// Path of an artifact inside the run directory; registers it in the manifest.
    std::string artifact(const std::string& name);
    void check(const std::string& name, bool pass, double value, double tolerance);
    void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

    /// Writes the manifest and prints the check table. 0 when every check passed, 2 otherwise.
    int finish();

private:
    std::string command_;
    std::filesystem::path dir_;
    nlohmann::json manifest_;
    nlohmann::json checks_ = nlohmann::json::array();
    nlohmann::json artifacts_ = nlohmann::json::array();
    nlohmann::json extra_ = nlohmann::json::object();
    bool ok_ = true;
    std::chrono::steady_clock::time_point start_;
};

int group_validate(const Options& o);
int group_info(const Options& o);
int flow_run(const Options& o);
int flow_sweep(const Options& o);
int flow_barrier(const Options& o);
int kernel_run(const Options& o);
int kernel_verify(const Options& o);
int kernel_lift(const Options& o);
int geo_verify(const Options& o);
int report(const Options& o);

}  // namespace carnot::cli
