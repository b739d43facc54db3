#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "carnot/error.hpp"
#include "carnot/group_io.hpp"
#include "carnot/heat.hpp"
#include "carnot/snapshot.hpp"

using namespace carnot;
using namespace carnot::heat;

namespace {

double gauss1(double x, double t, double a = 1.0) {
    return std::exp(-x * x / (4.0 * a * t)) / std::sqrt(4.0 * M_PI * a * t);
}

std::size_t origin_node(const BoxGrid& g) {
    std::vector<double> z(g.dim(), 0.0);
    std::size_t i = 0;
    g.nearest(z.data(), i);
    return i;
}

// H1 box sized for the kernel at time T: horizontal axes ~4 standard deviations, vertical axis
// covering both the eps-Riemannian and the commutator spread.
BoxGrid h1_box(double eps, double T, int cells, double a = 3.5) {
    const double hx = a * std::sqrt(2.0 * T);
    const double hz = std::max(a * eps * std::sqrt(2.0 * T), 2.0 * a * T);
    return BoxGrid::centered({hx, hx, hz}, {cells, cells, cells});
}

}  // namespace

TEST_CASE("abelian R1 kernel matches the closed form at t = 0.1, h = 1/128") {
    CarnotGroup g(abelian_spec(1));
    const auto op = make_operator(g, Eigen::MatrixXd::Identity(1, 1), 1.0);
    const BoxGrid grid = BoxGrid::centered({3.0}, {384});
    CHECK(grid.spacing()[0] == doctest::Approx(1.0 / 128).epsilon(1e-12));
    HeatOptions o;
    o.save_times = {0.05, 0.1};
    const auto k = solve_heat(op, grid, o);
    const double exact = 1.0 / std::sqrt(4.0 * M_PI * 0.1);
    CHECK(std::abs(k.values[1][origin_node(grid)] / exact - 1.0) <= 0.02);
    for (double m : k.mass) CHECK(std::abs(m - 1.0) <= 1e-3);
    CHECK(k.trusted_until == 0.1);
    // whole profile
    double err = 0.0;
    std::vector<double> x(1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x.data());
        err = std::max(err, std::abs(k.values[1][i] - gauss1(x[0], 0.1)));
    }
    CHECK(err / exact <= 0.02);
}

TEST_CASE("H1 kernel conserves mass and is symmetric under inversion") {
    CarnotGroup g(heisenberg_spec(1));
    const auto op = make_operator(g, Eigen::MatrixXd::Identity(3, 3), 1.0);
    const BoxGrid grid = h1_box(1.0, 0.1, 16);
    HeatOptions o;
    o.save_times = {0.025, 0.05, 0.075, 0.1};
    const auto k = solve_heat(op, grid, o);
    REQUIRE(k.trusted_until >= 0.05);
    for (std::size_t s = 0; s < k.times.size(); ++s)
        if (k.times[s] <= k.trusted_until) CHECK(std::abs(k.mass[s] - 1.0) <= 1e-3);
    // (x1, x2, x3) -> (-x1, x2, -x3) preserves the operator exactly, on the grid as well
    const auto& u = k.values.back();
    const int n = grid.shape()[0];
    double umax = 0.0, refl = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        int m[3];
        grid.unravel(i, m);
        const int mr[3] = {n - 1 - m[0], m[1], grid.shape()[2] - 1 - m[2]};
        umax = std::max(umax, u[i]);
        refl = std::max(refl, std::abs(u[i] - u[grid.index(mr)]));
        CHECK(u[i] >= -1e-12);
    }
    CHECK(refl <= 1e-12 * umax);
}

TEST_CASE("H1 kernel is symmetric under inversion up to discretization error") {
    CarnotGroup g(heisenberg_spec(1));
    const auto op = make_operator(g, Eigen::MatrixXd::Identity(3, 3), 1.0);
    // exponential coordinates: x^{-1} = -x, the mirrored node
    auto asym = [&](int cells) {
        const BoxGrid grid = h1_box(1.0, 0.1, cells);
        HeatOptions o;
        o.save_times = {0.05};
        const auto k = solve_heat(op, grid, o);
        const auto& u = k.values.back();
        double umax = 0.0, diff = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            umax = std::max(umax, u[i]);
            diff = std::max(diff, std::abs(u[i] - u[grid.size() - 1 - i]));
        }
        return diff / umax;
    };
    const double coarse = asym(8), fine = asym(16);
    CHECK(fine <= 1e-2);
    CHECK(fine < 0.5 * coarse);
}

TEST_CASE("discrete operator converges at second order on a smooth function") {
    CarnotGroup g(heisenberg_spec(1));
    Eigen::MatrixXd A(3, 3);
    A << 1.2, 0.3, 0.1, 0.3, 0.9, -0.2, 0.1, -0.2, 1.5;
    const auto op = make_operator(g, A, 0.5);
    const auto d = diffusion_operator(op);
    const Frame frame = g.build_frames(Side::Left, 0.5);
    // u = sin(x1) cos(x2) exp(x3/2); exact L u evaluated with the frame
    auto u_of = [](const double* x) { return std::sin(x[0]) * std::cos(x[1]) * std::exp(0.5 * x[2]); };
    auto exact_L = [&](const double* x) {
        const double hs = 1e-4;
        // sum a_kl X_k X_l u via nested central differences along frame directions
        auto Xu = [&](int k, const double* y) {
            std::vector<double> v = frame.fields[k].vector_at({y, 3});
            double yp[3], ym[3];
            for (int a = 0; a < 3; ++a) yp[a] = y[a] + hs * v[a], ym[a] = y[a] - hs * v[a];
            return (u_of(yp) - u_of(ym)) / (2 * hs);
        };
        double s = 0.0;
        for (int k = 0; k < 3; ++k) {
            std::vector<double> v = frame.fields[k].vector_at({x, 3});
            double xp[3], xm[3];
            for (int a = 0; a < 3; ++a) xp[a] = x[a] + hs * v[a], xm[a] = x[a] - hs * v[a];
            for (int l = 0; l < 3; ++l) s += A(k, l) * (Xu(l, xp) - Xu(l, xm)) / (2 * hs);
        }
        return s;
    };
    double errs[2];
    for (int level = 0; level < 2; ++level) {
        const int cells = 8 << level;
        const BoxGrid grid = BoxGrid::centered({1.0, 1.0, 1.0}, {cells, cells, cells});
        std::vector<double> u(grid.size());
        std::vector<double> x(3);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            grid.point(i, x.data());
            u[i] = u_of(x.data());
        }
        const auto Lu = apply_operator(d, grid, u);
        double e = 0.0;
        const double probe[3] = {0.25, -0.5, 0.5};
        std::size_t idx;
        REQUIRE(grid.nearest(probe, idx));
        grid.point(idx, x.data());
        e = std::abs(Lu[idx] - exact_L(x.data()));
        errs[level] = e;
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("time step guards and degenerate eps") {
    CarnotGroup g(heisenberg_spec(1));
    const BoxGrid grid = BoxGrid::centered({1.0, 1.0, 1.0}, {6, 6, 6});
    const auto op = make_operator(g, Eigen::MatrixXd::Identity(3, 3), 1.0);
    HeatOptions o;
    o.save_times = {0.01};
    const double bound = 2.0 / operator_norm_bound(diffusion_operator(op), grid);
    o.dt = 1.01 * bound;
    try {
        solve_heat(op, grid, o);
        FAIL("expected CFLViolation");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CFLViolation);
    }
    o.dt = 0.99 * bound;
    CHECK_NOTHROW(solve_heat(op, grid, o));

    try {
        diffusion_operator(make_operator(g, Eigen::MatrixXd::Identity(3, 3), 0.0));
        FAIL("expected DegenerateEpsilonRequiresLift");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateEpsilonRequiresLift);
    }
    CHECK_NOTHROW(diffusion_operator(make_operator(g, Eigen::MatrixXd::Identity(3, 3), 0.0, true)));

    o.cell_budget = 100;
    o.dt = 0.0;
    try {
        solve_heat(op, grid, o);
        FAIL("expected ResolutionTooCoarse");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ResolutionTooCoarse);
    }
}

TEST_CASE("coercivity class membership") {
    CarnotGroup g(heisenberg_spec(1));
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    CHECK(in_coercivity_class(g, I, 1.0, 1.0, 1.0));
    Eigen::MatrixXd bad = I;
    bad(0, 0) = -0.5;
    CHECK_FALSE(in_coercivity_class(g, bad, 10.0, 0.1, 10.0));
    Eigen::MatrixXd A(3, 3);
    A << 2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.7;
    const auto op = make_operator(g, A, 1.0);
    CHECK(in_coercivity_class(g, A, op.Lambda, op.C1, op.C2));
    CHECK_FALSE(in_coercivity_class(g, A, 1.0, op.C1, op.C2));
    try {
        make_operator(g, bad, 1.0);
        FAIL("expected NotPositiveDefinite");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
    }
}

TEST_CASE("envelope constant of single points") {
    double cu, cl;
    CHECK(envelope_constant(0.0, 1.0, &cu, &cl) == doctest::Approx(1.0));
    CHECK(cu == doctest::Approx(1.0));
    CHECK(cl == doctest::Approx(1.0).epsilon(1e-9));
    // C e^{-q/C} = g and C^{-1} e^{-C q} = g at the returned constants
    envelope_constant(1.5, 0.3, &cu, &cl);
    CHECK(cu * std::exp(-1.5 / cu) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(std::exp(-1.5 * cl) / cl == doctest::Approx(0.3).epsilon(1e-9));
    envelope_constant(1.0, 0.0, &cu, &cl);
    CHECK(std::isinf(cl));
}

TEST_CASE("abelian envelope constant is at most 2") {
    CarnotGroup g(abelian_spec(1));
    const auto op = make_operator(g, Eigen::MatrixXd::Identity(1, 1), 1.0);
    const BoxGrid grid = BoxGrid::centered({3.0}, {384});
    HeatOptions o;
    o.save_times = {0.025, 0.05, 0.1};
    const auto k = solve_heat(op, grid, o);
    EnvelopeMetric m{[](const double* x) { return std::abs(x[0]); }, [](double r) { return 2.0 * r; }};
    const auto fit = envelope_fit(k, m, EnvelopeOptions{});
    CHECK(fit.C <= 2.0);
    // exact Gaussian: C_upper at q = 0 is 2 / sqrt(4 pi) ~ 0.564 at least; lower constant ~ 1.77
    CHECK(fit.C_upper >= 2.0 / std::sqrt(4.0 * M_PI) * 0.98);
    CHECK(fit.C_lower == doctest::Approx(1.77).epsilon(0.03));
    CHECK_FALSE(fit.points.empty());
}

TEST_CASE("zero kernel has an empty fit region") {
    KernelField k;
    k.grid = BoxGrid::centered({1.0}, {10});
    k.times = {0.1};
    k.values = {std::vector<double>(k.grid.size(), 0.0)};
    k.mass = {0.0};
    k.trusted_until = 0.1;
    EnvelopeMetric m{[](const double* x) { return std::abs(x[0]); }, [](double r) { return 2.0 * r; }};
    try {
        envelope_fit(k, m, EnvelopeOptions{});
        FAIL("expected EmptyFitRegion");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyFitRegion);
    }
}

TEST_CASE("A-Lipschitz: identical, abelian closed form, H1 halving") {
    {
        CarnotGroup g(heisenberg_spec(1));
        const auto op = make_operator(g, Eigen::MatrixXd::Identity(3, 3), 1.0);
        HeatOptions o;
        o.save_times = {0.02};
        const auto rep = kernel_A_lipschitz(op, op, BoxGrid::centered({1.0, 1.0, 1.0}, {8, 8, 8}), o);
        CHECK(rep.norm_diff == 0.0);
        CHECK(rep.levels[0].sup_diff == 0.0);
    }
    {
        CarnotGroup g(abelian_spec(1));
        const BoxGrid grid = BoxGrid::centered({3.0}, {192});
        const double a1 = 1.0, a2 = 1.05, t = 0.1;
        HeatOptions o;
        o.save_times = {t};
        const auto rep = kernel_A_lipschitz(make_operator(g, Eigen::MatrixXd::Constant(1, 1, a1), 1.0),
                                            make_operator(g, Eigen::MatrixXd::Constant(1, 1, a2), 1.0), grid, o);
        // oracle: sup_x |G_{a1} - G_{a2}| / |a1 - a2| from the closed form, bump age included
        const double te = t + 2.0 * grid.spacing()[0] * grid.spacing()[0];
        double sup = 0.0;
        for (double x = -3.0; x <= 3.0; x += 1e-3)
            sup = std::max(sup, std::abs(gauss1(x, te, a1) - gauss1(x, te, a2)));
        CHECK(rep.levels[0].ratio == doctest::Approx(sup / (a2 - a1)).epsilon(0.05));
    }
    {
        CarnotGroup g(heisenberg_spec(1));
        const BoxGrid grid = h1_box(1.0, 0.1, 12);
        const Eigen::MatrixXd A1 = Eigen::MatrixXd::Identity(3, 3);
        Eigen::MatrixXd E11 = Eigen::MatrixXd::Zero(3, 3);
        E11(0, 0) = 1.0;
        HeatOptions o;
        o.save_times = {0.05, 0.1};
        const auto op1 = make_operator(g, A1, 1.0);
        const auto full = kernel_A_lipschitz(op1, make_operator(g, A1 + 0.05 * E11, 1.0), grid, o);
        const auto half = kernel_A_lipschitz(op1, make_operator(g, A1 + 0.025 * E11, 1.0), grid, o);
        for (std::size_t s = 0; s < full.levels.size(); ++s) {
            CHECK(std::isfinite(full.levels[s].ratio));
            CHECK(full.levels[s].ratio > 0.0);
            CHECK(std::abs(half.levels[s].ratio / full.levels[s].ratio - 1.0) <= 0.3);
        }
    }
}

TEST_CASE("eps convergence toward the horizontal kernel") {
    {
        CarnotGroup g(abelian_spec(2));
        HeatOptions o;
        o.save_times = {0.05};
        const auto rep = eps_convergence(g, Eigen::MatrixXd::Identity(2, 2), {1.0, 0.5},
                                         BoxGrid::centered({1.5, 1.5}, {16, 16}), o, {1.0, 1.0});
        for (const auto& r : rep.rows) CHECK(r.sup_diff == 0.0);
    }
    {
        CarnotGroup g(heisenberg_spec(1));
        HeatOptions o;
        o.save_times = {0.1};
        const BoxGrid grid = h1_box(0.25, 0.1, 14);
        const auto rep = eps_convergence(g, Eigen::MatrixXd::Identity(3, 3), {1.0, 0.5, 0.25, 0.125}, grid, o,
                                         {0.5, 0.5, 0.2});
        CHECK(rep.monotone);
        CHECK(rep.rows.back().sup_diff < rep.rows.front().sup_diff);
        // repeated eps is deterministic
        const auto again = eps_convergence(g, Eigen::MatrixXd::Identity(3, 3), {0.5, 0.5}, grid, o, {0.5, 0.5, 0.2});
        CHECK(again.rows[0].sup_diff == again.rows[1].sup_diff);
    }
}

TEST_CASE("semigroup property through group convolution") {
    auto check = [](const CarnotGroup& g, const BoxGrid& grid, double t, double s, double eps) {
        const double h2 = grid.spacing()[0] * grid.spacing()[0];
        const double t0 = 2.0 * h2;  // age of the initial bump
        HeatOptions o;
        o.save_times = {t, s, t + s + t0};
        const auto k = solve_heat(make_operator(g, Eigen::MatrixXd::Identity(g.dim(), g.dim()), eps), grid, o);
        std::vector<std::size_t> at;
        for (std::size_t i = 0; i < grid.size(); i += 37) at.push_back(i);
        const auto conv = group_convolution(g, grid, k.values[0], k.values[1], at);
        double num = 0.0, den = 0.0;
        for (std::size_t q = 0; q < at.size(); ++q) {
            num += std::abs(conv[q] - k.values[2][at[q]]);
            den += std::abs(k.values[2][at[q]]);
        }
        return num / den;
    };
    CHECK(check(CarnotGroup(abelian_spec(1)), BoxGrid::centered({3.0}, {96}), 0.05, 0.05, 1.0) <= 0.02);
    CarnotGroup h1(heisenberg_spec(1));
    CHECK(check(h1, h1_box(1.0, 0.1, 14, 4.5), 0.05, 0.05, 1.0) <= 0.02);
}

TEST_CASE("frame derivative envelope is finite") {
    CarnotGroup g(heisenberg_spec(1));
    const auto op = make_operator(g, Eigen::MatrixXd::Identity(3, 3), 1.0);
    const BoxGrid grid = h1_box(1.0, 0.1, 12, 4.5);
    HeatOptions o;
    o.save_times = {0.05, 0.1};
    const auto k = solve_heat(op, grid, o);
    REQUIRE(k.trusted_until >= 0.05);
    EnvelopeMetric m{[](const double* x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + std::abs(x[2])); },
                     [](double r) { return M_PI * r * r * r * r; }};
    EnvelopeOptions eo;
    eo.t_min = 0.05;
    const auto b = derivative_envelope(k, g.build_frames(Side::Left, 1.0), m, 4.0, eo);
    CHECK(std::isfinite(b.first));
    CHECK(std::isfinite(b.second));
    CHECK(b.first > 0.0);
    CHECK(b.second > 0.0);
}

TEST_CASE("snapshot round trip") {
    const BoxGrid grid({3, 4}, {-1.0, 0.5}, {0.25, 0.125});
    Snapshot s;
    s.grid = grid;
    for (std::size_t i = 0; i < grid.size(); ++i) s.values.push_back(0.1 * static_cast<double>(i) - 0.3);
    s.time = 0.125;
    s.epsilon = 0.5;
    s.A = Eigen::MatrixXd::Identity(2, 2);
    s.A(0, 1) = s.A(1, 0) = 0.1;
    const auto dir = std::filesystem::temp_directory_path() / "carnot_snapshot_test";
    std::filesystem::create_directories(dir);
    const std::string base = (dir / "kernel").string();
    write_snapshot(base, s);
    CHECK(std::filesystem::file_size(base + ".bin") == grid.size() * 8);
    const Snapshot r = read_snapshot(base);
    CHECK(r.grid.shape() == grid.shape());
    CHECK(r.grid.lower() == grid.lower());
    CHECK(r.grid.spacing() == grid.spacing());
    CHECK(r.values == s.values);
    CHECK(r.time == s.time);
    CHECK(r.epsilon == s.epsilon);
    CHECK(r.A == s.A);
    std::filesystem::remove_all(dir);
}
