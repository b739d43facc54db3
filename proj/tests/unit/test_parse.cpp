#include <doctest.h>

#include <cmath>

#include "carnot/config.hpp"
#include "carnot/error.hpp"
#include "carnot/expression.hpp"

using namespace carnot;

TEST_CASE("expression evaluates with the usual precedence") {
    const double x[3] = {2.0, -1.0, 0.5};
    CHECK(Expression::parse("1 + 2*3", 3)(x) == 7.0);
    CHECK(Expression::parse("-x1^2", 3)(x) == -4.0);
    CHECK(Expression::parse("2^3^2", 3)(x) == 512.0);
    CHECK(Expression::parse("(x1 - x2) / x3", 3)(x) == doctest::Approx(6.0));
    CHECK(Expression::parse("sin(pi/2) + exp(0) + sqrt(abs(x2)*4)", 3)(x) == doctest::Approx(4.0));
    CHECK(Expression::parse("log(exp(x1*x3))", 3)(x) == doctest::Approx(1.0));
    CHECK(Expression::parse("3.5e-1", 1).is_constant());
}

TEST_CASE("expression rejects malformed input") {
    for (const char* bad : {"", "x1 +", "(x1", "x4", "x0", "foo(x1)", "1 2", "x1 ** 2"}) {
        CAPTURE(bad);
        try {
            Expression::parse(bad, 3);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ParseError);
        }
    }
}

TEST_CASE("symbolic derivatives match central differences") {
    const auto f = Expression::parse("sin(x1)*x2^2 + exp(x1*x3) / (1 + x2^2) + sqrt(2 + cos(x3))", 3);
    DifferentiatedExpression d(f, 3);
    const double x[3] = {0.3, -0.7, 1.1};
    double g[3], H[9];
    d.gradient(x, g);
    d.hessian(x, H);
    const double h = 1e-5;
    for (int a = 0; a < 3; ++a) {
        double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
        xp[a] += h;
        xm[a] -= h;
        CHECK(g[a] == doctest::Approx((f(xp) - f(xm)) / (2 * h)).epsilon(1e-8));
        double gp[3], gm[3];
        d.gradient(xp, gp);
        d.gradient(xm, gm);
        for (int b = 0; b < 3; ++b) CHECK(H[3 * b + a] == doctest::Approx((gp[b] - gm[b]) / (2 * h)).epsilon(1e-7));
    }
    CHECK(Expression::parse("x1*x2", 2).derivative(0).derivative(0).is_constant());
}

TEST_CASE("config sections, comments and lists") {
    const auto c = Config::parse(R"(
top = 1
# comment
[flow]
eps = 0.5   # trailing
saves = 0.1, 0.2 0.3
name = x1^2
)");
    CHECK(c.get("", "top") == "1");
    CHECK(c.get_double("flow", "eps") == 0.5);
    CHECK(c.get_list("flow", "saves") == std::vector<double>{0.1, 0.2, 0.3});
    CHECK(c.get("flow", "name") == "x1^2");
    CHECK(c.get_int("flow", "cells", 7) == 7);
    CHECK(c.get_double("flow", "missing", 2.0) == 2.0);
    CHECK_THROWS_AS(c.get("flow", "missing"), Error);
    CHECK_THROWS_AS(c.get_int("flow", "eps", 0), Error);
    CHECK_THROWS_AS(c.get_double("flow", "name"), Error);

    auto d = Config::parse("[flow]\nname = x1^2\nsaves=0.1 0.2 0.3\neps=0.5\n[]\ntop=1\n");
    d.set("flow", "saves", "0.1, 0.2 0.3");
    CHECK(d.canonical() == c.canonical());
}

TEST_CASE("config parse errors") {
    for (const char* bad : {"[flow\n", "just words\n", " = 3\n"}) {
        CAPTURE(bad);
        try {
            Config::parse(bad);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::ConfigParseError);
        }
    }
    CHECK_THROWS_AS(Config::load("/nonexistent/file.cfg"), Error);
}
