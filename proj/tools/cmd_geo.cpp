#include <cmath>
#include <filesystem>
#include <fstream>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"
#include "carnot/metrics.hpp"
#include "cli.hpp"

namespace carnot::cli {

int geo_verify(const Options& o) {
    const Config cfg = load_config(o, "geo.eps");
    const CarnotGroup g(load_group(cfg));
    const auto eps_list = cfg.get_list("geo", "eps", {1.0, 0.5, 0.1});
    const auto radii = cfg.get_list("geo", "radii", {0.25, 0.5, 1.0});
    metrics::BallSampler bs;
    bs.samples = static_cast<std::size_t>(cfg.get_int("geo", "samples", 100000));
    bs.seed = o.seed;
    const std::string member = cfg.get("geo", "membership", "pseudo");
    if (member == "lattice") bs.membership = metrics::BallSampler::Membership::Lattice;
    else if (member != "pseudo") throw Error(ErrorKind::ConfigParseError, "[geo] membership must be pseudo or lattice");
    Run run("geo verify", cfg, o, g.id());

    int Q = 0;
    for (int d : g.degrees()) Q += d;
    const double band = tolerance(cfg, "doubling_band", 2.0);
    std::vector<metrics::VolumeRow> rows;
    for (double eps : eps_list) {
        std::vector<double> vol;
        for (double r : radii) {
            const auto v = metrics::ball_volume(g, Point(g.dim()), r, eps, bs);
            rows.push_back({eps, r, v.volume, v.stderr_});
            vol.push_back(v.volume);
        }
        // Doubling against the homogeneous rate 2^Q, for radius pairs r and 2r.
        for (std::size_t i = 0; i < radii.size(); ++i)
            for (std::size_t j = 0; j < radii.size(); ++j)
                if (std::abs(radii[j] - 2.0 * radii[i]) <= 1e-12 * radii[j]) {
                    const double ratio = vol[j] / vol[i] / std::pow(2.0, Q);
                    run.check("doubling_eps_" + fmt(eps) + "_r_" + fmt(radii[i]), ratio <= band && ratio >= 1.0 / band,
                              ratio, band);
                }
    }
    metrics::write_volume_csv(run.artifact("volume.csv"), rows);
    return run.finish();
}

int report(const Options& o) {
    if (o.inputs.empty()) throw Error(ErrorKind::UsageError, "report expects run directories");
    Config cfg;
    std::vector<nlohmann::json> manifests;
    for (std::size_t i = 0; i < o.inputs.size(); ++i) {
        const auto path = std::filesystem::path(o.inputs[i]) / "manifest.json";
        std::ifstream f(path);
        if (!f) throw Error(ErrorKind::UsageError, "no manifest in " + o.inputs[i]);
        try {
            manifests.push_back(nlohmann::json::parse(f));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ConfigParseError, path.string() + ": " + e.what());
        }
        cfg.set("runs", std::to_string(i), manifests.back().value("config_hash", ""));
    }
    Run run("report", cfg, o, "");
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        const auto& m = manifests[i];
        nlohmann::json entry;
        entry["run"] = o.inputs[i];
        entry["command"] = m.value("command", "");
        entry["config_hash"] = m.value("config_hash", "");
        entry["status"] = m.value("status", "");
        entry["checks"] = m.value("checks", nlohmann::json::array());
        out.push_back(entry);
        for (const auto& c : entry["checks"]) {
            const double v = c["value"].is_number() ? c["value"].get<double>() : NAN;
            run.check(m.value("command", "") + ":" + c.value("name", ""), c.value("pass", false), v,
                      c.value("tolerance", 0.0));
        }
    }
    std::ofstream(run.artifact("report.json")) << out.dump(2) << "\n";
    return run.finish();
}

}  // namespace carnot::cli
