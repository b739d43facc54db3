#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"
#include "carnot/group_io.hpp"
#include "carnot/metrics.hpp"

using namespace carnot;
using namespace carnot::metrics;

namespace {

Point random_point(std::mt19937_64& rng, int n, double scale) {
    std::uniform_real_distribution<double> U(-scale, scale);
    Point p(n);
    for (int i = 0; i < n; ++i) p[i] = U(rng);
    return p;
}

}  // namespace

TEST_CASE("gauge norm") {
    CarnotGroup h(heisenberg_spec(1));
    CHECK(gauge_norm(h, {1, 0, 0}) == doctest::Approx(1.0));
    CHECK(gauge_norm(h, {0, 0, 1}) == doctest::Approx(1.0));
    CHECK(gauge_norm(h, {0, 0, 0}) == 0.0);
    // (1 + 1 + 2^2)^(1/4)
    CHECK(gauge_norm(h, {1, 1, 2}) == doctest::Approx(std::pow(6.0, 0.25)));
    std::mt19937_64 rng(1);
    for (const auto& spec : {heisenberg_spec(1), engel_spec(), free_step2_spec(3)}) {
        CarnotGroup g(spec);
        for (int t = 0; t < 50; ++t) {
            Point x = random_point(rng, g.dim(), 2.0), y = random_point(rng, g.dim(), 2.0);
            double s = std::exp(std::uniform_real_distribution<double>(-2, 2)(rng));
            CHECK(std::abs(gauge_norm(g, g.dilate(x, s)) - s * gauge_norm(g, x)) <= 1e-12 * s * gauge_norm(g, x) + 1e-15);
            CHECK(std::abs(gauge_distance(g, x, y) - gauge_distance(g, y, x)) <= 1e-12);
        }
    }
}

TEST_CASE("N_eps") {
    CarnotGroup h(heisenberg_spec(1));
    CHECK(n_eps(h, {0, 0, 1}, 1.0) == doctest::Approx(1.0));
    CHECK(n_eps(h, {0, 0, 0.01}, 1.0) == doctest::Approx(0.01));
    CHECK(n_eps(h, {0, 0, 0}, 0.3) == 0.0);
    // sub-Riemannian branch for large points
    CHECK(n_eps(h, {0, 0, 100}, 1.0) == doctest::Approx(10.0));
    CHECK_THROWS_AS(n_eps(h, {0, 0, 1}, 0.0), Error);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        Point x = random_point(rng, 3, 3.0);
        CHECK(n_eps(h, x, 1.0) <= n_eps(h, x, 0.5) + 1e-15);
        CHECK(n_eps(h, x, 0.5) <= n_eps(h, x, 0.1) + 1e-15);
    }
}

TEST_CASE("lattice distance on the plane") {
    CarnotGroup g(abelian_spec(2));
    LatticeGeodesy geo(g, 1.0, BoxGrid::centered({1, 1}, {64, 64}), 2);
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int t = 0; t < 40; ++t) {
        Point x = random_point(rng, 2, 1.0), y = random_point(rng, 2, 1.0);
        std::size_t a, b;
        geo.grid().nearest(x.data(), a);
        geo.grid().nearest(y.data(), b);
        auto xa = geo.grid().point(a), yb = geo.grid().point(b);
        double e = std::hypot(xa[0] - yb[0], xa[1] - yb[1]);
        if (e > 0) worst = std::max(worst, std::abs(d_eps_lattice(x, y, geo) / e - 1.0));
    }
    CHECK(worst <= 0.05);
    CHECK(d_eps_lattice({0.3, 0.3}, {0.3, 0.3}, geo) == 0.0);
    try {
        d_eps_lattice({2.0, 0.0}, {0.0, 0.0}, geo);
        FAIL("expected OutOfDomain");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::OutOfDomain);
    }
}

TEST_CASE("lattice distance satisfies the triangle inequality") {
    CarnotGroup h(heisenberg_spec(1));
    BoxGrid grid = BoxGrid::centered({1, 1, 0.5}, {8, 8, 8});
    LatticeGeodesy geo(h, 0.5, grid, 1);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    for (int t = 0; t < 5; ++t) {
        std::size_t a = pick(rng), b = pick(rng);
        auto da = geo.distance_field(a), db = geo.distance_field(b);
        for (std::size_t c = 0; c < grid.size(); ++c) CHECK(da[c] <= da[b] + db[c] + 1e-12);
    }
    for (std::size_t u = 0; u < grid.size(); u += 37)
        for (std::size_t mv = 0; mv < geo.num_moves(); ++mv) {
            double w = geo.edge_cost(u, mv);
            if (std::isfinite(w)) CHECK(w > 0.0);
        }
}

TEST_CASE("ball-box band for the Heisenberg lattice distance") {
    CarnotGroup h(heisenberg_spec(1));
    BoxGrid grid = BoxGrid::centered({1.2, 1.2, 0.8}, {16, 16, 24});
    double lo = 1e300, hi = 0.0;
    for (double eps : {1.0, 0.5, 0.1}) {
        LatticeGeodesy geo(h, eps, grid, 2);
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> U(-0.4, 0.4);
        for (int t = 0; t < 50; ++t) {
            Point x{U(rng), U(rng), 0.5 * U(rng)}, y{U(rng), U(rng), 0.5 * U(rng)};
            std::size_t a, b;
            grid.nearest(x.data(), a);
            grid.nearest(y.data(), b);
            if (a == b) continue;
            double dl = d_eps_lattice(x, y, geo);
            double dg = d_g_eps(h, Point(grid.point(a)), Point(grid.point(b)), eps);
            lo = std::min(lo, dl / dg);
            hi = std::max(hi, dl / dg);
        }
    }
    double A = std::max(hi, 1.0 / lo);
    MESSAGE("ball-box constant " << A);
    CHECK(A <= 10.0);
}

TEST_CASE("ball volumes and doubling") {
    CarnotGroup g(abelian_spec(2));
    BallSampler s;
    auto v1 = ball_volume(g, Point(2), 0.5, 1.0, s);
    auto v2 = ball_volume(g, Point(2), 1.0, 1.0, s);
    CHECK(v2.volume / v1.volume == doctest::Approx(4.0).epsilon(0.10));
    CHECK(v1.volume == doctest::Approx(M_PI * 0.25).epsilon(0.02));
    CHECK(v1.stderr_ > 0.0);
    CHECK(ball_volume(g, Point(2), 0.0, 1.0, s).volume == 0.0);

    CarnotGroup h(heisenberg_spec(1));
    s.membership = BallSampler::Membership::Lattice;
    s.samples = 40000;
    s.lattice_cells = 16;
    double lo = 1e300, hi = 0.0;
    for (double eps : {1.0, 0.3, 0.1})
        for (double r : {0.25, 0.5}) {
            double ratio = ball_volume(h, Point(3), 2 * r, eps, s).volume / ball_volume(h, Point(3), r, eps, s).volume;
            CHECK(std::isfinite(ratio));
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
    MESSAGE("doubling ratios in [" << lo << ", " << hi << "]");
    CHECK(hi / lo <= 2.0);
}

TEST_CASE("discrete Hoelder norm") {
    SpaceTimeField u;
    u.grid = BoxGrid::centered({1, 1}, {16, 16});
    for (int k = 0; k <= 8; ++k) u.times.push_back(k / 32.0);
    auto euclid = [](const double* x, const double* y) { return std::hypot(x[0] - y[0], x[1] - y[1]); };

    for (std::size_t k = 0; k < u.times.size(); ++k) u.values.emplace_back(u.grid.size(), -2.5);
    auto c = holder_norm(u, 0.5, euclid, {});
    CHECK(c.quotient_sup == 0.0);
    CHECK(c.norm == 2.5);

    const double alpha = 0.5;
    for (std::size_t k = 0; k < u.times.size(); ++k)
        for (std::size_t i = 0; i < u.grid.size(); ++i) {
            auto x = u.grid.point(i);
            u.values[k][i] = std::pow(std::max(std::hypot(x[0], x[1]), std::sqrt(u.times[k])), alpha);
        }
    auto r = holder_norm(u, alpha, euclid, {});
    CHECK(r.quotient_sup == doctest::Approx(1.0).epsilon(0.25));
    CHECK(r.quotient_sup <= 1.0 + 1e-12);
    CHECK_THROWS_AS(holder_norm(u, 1.0, euclid, {}), Error);
    CHECK_THROWS_AS(holder_norm(u, 0.0, euclid, {}), Error);
}

TEST_CASE("metric csv headers") {
    auto dir = std::filesystem::temp_directory_path() / "carnot_metrics_csv";
    std::filesystem::create_directories(dir);
    write_volume_csv((dir / "v.csv").string(), {{1.0, 0.5, 0.25, 0.001}});
    write_holder_csv((dir / "h.csv").string(), {{0.5, 1.25, 3}});
    auto v = read_csv((dir / "v.csv").string());
    CHECK(v.header == std::vector<std::string>{"epsilon", "radius", "volume", "stderr"});
    CHECK(v.rows.at(0).at(2) == 0.25);
    auto h = read_csv((dir / "h.csv").string());
    CHECK(h.header == std::vector<std::string>{"alpha", "holder_norm", "region_id"});
    CHECK(h.rows.at(0).at(2) == 3.0);
}
