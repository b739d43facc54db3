#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"
#include "carnot/group_io.hpp"
#include "cli.hpp"

namespace carnot::cli {

namespace fs = std::filesystem;

Config load_config(const Options& o, const std::string& eps_key) {
    std::string path = o.config;
    if (path.empty() && !o.inputs.empty()) path = o.inputs.front();
    if (path.empty()) throw Error(ErrorKind::UsageError, "no config file given");
    Config cfg = Config::load(path);
    cfg.set("", "config_dir", fs::absolute(path).parent_path().string());
    for (const auto& t : o.tols) {
        const auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0)
            throw Error(ErrorKind::UsageError, "--tol expects NAME=VAL, got '" + t + "'");
        const std::string value = t.substr(eq + 1);
        parse_number_list(value);
        cfg.set("tolerances", t.substr(0, eq), value);
    }
    if (!o.eps.empty()) {
        const auto dot = eps_key.find('.');
        if (parse_number_list(o.eps).empty()) throw Error(ErrorKind::UsageError, "--eps list is empty");
        cfg.set(eps_key.substr(0, dot), eps_key.substr(dot + 1), o.eps);
    }
    return cfg;
}

CarnotGroupSpec builtin_group(const std::string& name) {
    if (name == "abelian1") return abelian_spec(1);
    if (name == "abelian2") return abelian_spec(2);
    if (name == "heisenberg1") return heisenberg_spec(1);
    if (name == "heisenberg2") return heisenberg_spec(2);
    if (name == "free_step2_3") return free_step2_spec(3);
    if (name == "engel") return engel_spec();
    throw Error(ErrorKind::ConfigParseError, "unknown builtin group '" + name + "'");
}

CarnotGroupSpec load_group(const Config& cfg) {
    if (cfg.has("group", "builtin")) return builtin_group(cfg.get("group", "builtin"));
    fs::path p = cfg.get("group", "spec");
    if (p.is_relative()) {
        const fs::path near = fs::path(cfg.get("", "config_dir", ".")) / p;
        if (fs::exists(near)) p = near;
    }
    return load_group_spec(p.string());
}

std::vector<double> expand(const std::vector<double>& v, int n, const std::string& what) {
    if (v.size() == 1) return std::vector<double>(n, v.front());
    if (static_cast<int>(v.size()) != n)
        throw Error(ErrorKind::ConfigParseError, what + " needs 1 or " + std::to_string(n) + " values");
    return v;
}

BoxGrid load_domain(const Config& cfg, int dim) {
    const auto lower = expand(cfg.get_list("domain", "lower", {-1.0}), dim, "[domain] lower");
    const auto upper = expand(cfg.get_list("domain", "upper", {1.0}), dim, "[domain] upper");
    const auto nodes = expand(cfg.get_list("domain", "nodes"), dim, "[domain] nodes");
    std::vector<int> shape;
    for (double v : nodes) {
        if (v != static_cast<int>(v) || v < 2) throw Error(ErrorKind::ConfigParseError, "[domain] nodes must be integers >= 2");
        shape.push_back(static_cast<int>(v));
    }
    for (int a = 0; a < dim; ++a)
        if (!(upper[a] > lower[a])) throw Error(ErrorKind::ConfigParseError, "[domain] upper must exceed lower");
    return BoxGrid::from_bounds(lower, upper, shape);
}

double tolerance(const Config& cfg, const std::string& name, double fallback) {
    return cfg.get_double("tolerances", name, fallback);
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

// The config directory only locates relative spec paths; it does not enter the hash.
std::string hashed_text(const Config& cfg) {
    Config out;
    for (const auto& [sec, kv] : cfg.sections())
        for (const auto& [k, v] : kv)
            if (!(sec.empty() && k == "config_dir")) out.set(sec, k, v);
    return out.canonical();
}

}  // namespace

Run::Run(const std::string& command, const Config& cfg, const Options& o, const std::string& group_id)
    : command_(command), start_(std::chrono::steady_clock::now()) {
    const std::string text = hashed_text(cfg);
    const std::string hash = hex(fnv1a(command + "\n" + text + "seed=" + std::to_string(o.seed) + "\n"));
    std::string base = o.out;
    if (base.empty()) {
        const char* env = std::getenv("CARNOT_FLOW_OUT");
        base = env && *env ? env : "runs";
    }
    std::string name = command;
    for (char& c : name)
        if (c == ' ') c = '-';
    dir_ = fs::path(base) / (name + "-" + hash.substr(0, 12));
    fs::create_directories(dir_);
    manifest_["command"] = command;
    manifest_["config_hash"] = hash;
    manifest_["config"] = text;
    manifest_["group"] = group_id;
    manifest_["seed"] = o.seed;
    manifest_["tool_version"] = CARNOT_VERSION;
}

std::string Run::artifact(const std::string& name) {
    artifacts_.push_back(name);
    return (dir_ / name).string();
}

void Run::check(const std::string& name, bool pass, double value, double tol) {
    ok_ = ok_ && pass;
    nlohmann::json c;
    c["name"] = name;
    c["pass"] = pass;
    c["value"] = std::isfinite(value) ? nlohmann::json(value) : nlohmann::json(fmt(value));
    c["tolerance"] = tol;
    checks_.push_back(c);
}

int Run::finish() {
    manifest_["checks"] = checks_;
    manifest_["artifacts"] = artifacts_;
    manifest_["measured"] = extra_;
    manifest_["status"] = ok_ ? "pass" : "fail";
    manifest_["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream(dir_ / "manifest.json") << manifest_.dump(2) << "\n";
    for (const auto& c : checks_)
        std::printf("%-4s %-32s %-14s tol %s\n", c["pass"].get<bool>() ? "PASS" : "FAIL", c["name"].get<std::string>().c_str(),
                    c["value"].dump().c_str(), c["tolerance"].dump().c_str());
    std::printf("%s: %s\n", command_.c_str(), dir_.string().c_str());
    return ok_ ? 0 : 2;
}

}  // namespace carnot::cli
