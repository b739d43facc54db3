#include <cstdio>

#include "carnot/error.hpp"
#include "carnot/group_io.hpp"
#include "cli.hpp"

namespace carnot::cli {

namespace {

CarnotGroupSpec spec_argument(const Options& o) {
    if (o.inputs.size() != 1) throw Error(ErrorKind::UsageError, "expected one spec file");
    return load_group_spec(o.inputs.front());
}

void print_layers(const CarnotGroupSpec& s) {
    std::printf("id      %s\nlayers ", s.id.c_str());
    for (int d : s.layer_dims) std::printf(" %d", d);
    std::printf("\ndim     %d\nstep    %d\n", s.dim(), s.step());
}

}  // namespace

int group_validate(const Options& o) {
    const auto spec = spec_argument(o);
    print_layers(spec);
    const int n = spec.dim();
    const auto b = dense_structure_constants(spec);
    std::printf("brackets\n");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            std::string rhs;
            for (int k = 0; k < n; ++k) {
                const double v = b[(i * n + j) * n + k];
                if (v == 0.0) continue;
                char term[64];
                std::snprintf(term, sizeof term, "%s%g X%d", rhs.empty() ? "" : " + ", v, k + 1);
                rhs += term;
            }
            if (!rhs.empty()) std::printf("  [X%d, X%d] = %s\n", i + 1, j + 1, rhs.c_str());
        }
    const auto rep = validate_spec(spec);
    if (rep.ok()) {
        std::printf("valid\n");
        return 0;
    }
    std::printf("%s", rep.summary().c_str());
    return 2;
}

int group_info(const Options& o) {
    const CarnotGroup g(spec_argument(o));
    print_layers(g.spec());
    int Q = 0;
    std::printf("degrees");
    for (int d : g.degrees()) {
        std::printf(" %d", d);
        Q += d;
    }
    std::printf("\nhomogeneous dimension %d\n", Q);
    for (Side side : {Side::Left, Side::Right}) {
        std::printf("%s frame\n", side == Side::Left ? "left" : "right");
        const Frame f = g.build_frames(side, 1.0);
        for (const auto& field : f.fields) {
            std::printf("  X%d =", field.base_index + 1);
            bool first = true;
            for (int j = 0; j < g.dim(); ++j) {
                const std::string c = field.coeff_polys[j].to_string();
                if (c == "0") continue;
                std::printf("%s(%s) d%d", first ? " " : " + ", c.c_str(), j + 1);
                first = false;
            }
            std::printf("\n");
        }
    }
    return 0;
}

}  // namespace carnot::cli
