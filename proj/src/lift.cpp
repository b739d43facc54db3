#include "carnot/lift.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>

#include "carnot/error.hpp"

namespace carnot::lift {

ProductLift::ProductLift(const CarnotGroup& base) : g_(&base), n_(base.dim()), m_(base.horizontal_dim()) {}

namespace {

Point half(const Point& p, int n, int which) {
    return Point(std::vector<double>(p.begin() + which * n, p.begin() + (which + 1) * n));
}

Point join(const Point& x, const Point& y) {
    std::vector<double> v(x.begin(), x.end());
    v.insert(v.end(), y.begin(), y.end());
    return Point(std::move(v));
}

}  // namespace

Point ProductLift::multiply(const Point& a, const Point& b) const {
    return join(g_->multiply(half(a, n_, 0), half(b, n_, 0)), g_->multiply(half(a, n_, 1), half(b, n_, 1)));
}

Point ProductLift::inverse(const Point& a) const {
    return join(g_->inverse(half(a, n_, 0)), g_->inverse(half(a, n_, 1)));
}

Eigen::MatrixXd ProductLift::basis(LiftFrame frame, double eps) const {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * n_, 2 * n_);
    int col = 0;
    for (int i = 0; i < m_; ++i) B(i, col++) = 1.0;
    for (int i = 0; i < n_; ++i) {
        B(n_ + i, col) = 1.0;
        if (frame == LiftFrame::Coupled && i >= m_) B(i, col) = eps;
        ++col;
    }
    for (int i = m_; i < n_; ++i) B(i, col++) = 1.0;
    return B;
}

LiftCoords ProductLift::canonical(LiftFrame frame, double eps, const Point& x, const Point& x0) const {
    const Point xi = multiply(inverse(x0), x);
    LiftCoords c;
    c.v.assign(xi.begin(), xi.begin() + n_);
    c.w.assign(xi.begin() + n_, xi.end());
    if (frame == LiftFrame::Coupled)
        for (int i = m_; i < n_; ++i) c.v[i] -= eps * c.w[i];
    return c;
}

Point ProductLift::from_canonical(LiftFrame frame, double eps, const LiftCoords& c, const Point& x0) const {
    std::vector<double> xi(2 * n_);
    for (int i = 0; i < n_; ++i) {
        xi[i] = c.v[i] + (frame == LiftFrame::Coupled && i >= m_ ? eps * c.w[i] : 0.0);
        xi[n_ + i] = c.w[i];
    }
    return multiply(x0, Point(std::move(xi)));
}

Point ProductLift::change_of_variables(double eps, const Point& x) const {
    Point out = x;
    for (int i = m_; i < n_; ++i) out[i] -= eps * x[n_ + i];
    return out;
}

Point ProductLift::change_of_variables(double eps, const Point& x, const Point& x0) const {
    return multiply(x0, change_of_variables(eps, multiply(inverse(x0), x)));
}

double ProductLift::distance(LiftFrame frame, double eps, const Point& x, const Point& x0,
                             DistanceConvention conv) const {
    const LiftCoords c = canonical(frame, eps, x, x0);
    double d = 0.0;
    for (int i = 0; i < n_; ++i) {
        const double inv = 1.0 / g_->degree(i);
        const double av = std::abs(c.v[i]), aw = std::abs(c.w[i]);
        if (i < m_) {
            d += av + aw;
            continue;
        }
        d += std::pow(av, inv);
        if (conv == DistanceConvention::UnitHorizontal)
            d += aw;
        else if (frame == LiftFrame::Coupled)
            d += std::min(aw, std::pow(aw, inv));
        else
            d += std::pow(aw, inv);
    }
    return d;
}

heat::DiffusionOperator ProductLift::heat_operator(LiftFrame frame, double eps, const Eigen::MatrixXd& A) const {
    if (A.rows() != n_ || A.cols() != n_) throw Error(ErrorKind::InvalidArgument, "A must be n x n");
    if (frame == LiftFrame::Coupled && !(eps >= 0.0)) throw Error(ErrorKind::NonpositiveEpsilon, "eps must be >= 0");
    const Frame base = g_->build_frames(Side::Left, 1.0);
    const int N = 2 * n_;
    auto X = [&](int i, double w) {
        std::vector<Polynomial> f(N, Polynomial(N));
        for (int a = 0; a < n_; ++a) f[a] = base.fields[i].coeff_polys[a].embed(N, 0) * w;
        return f;
    };
    auto Y = [&](int i) {
        std::vector<Polynomial> f(N, Polynomial(N));
        for (int a = 0; a < n_; ++a) f[n_ + a] = base.fields[i].coeff_polys[a].embed(N, n_);
        return f;
    };
    heat::DiffusionOperator op;
    op.dim = N;
    const Eigen::MatrixXd Ahh = A.topLeftCorner(m_, m_);
    if (frame == LiftFrame::Decoupled) {
        for (int i = 0; i < m_; ++i) op.fields.push_back(X(i, 1.0));
        for (int i = 0; i < n_; ++i) op.fields.push_back(Y(i));
        op.B = Eigen::MatrixXd::Zero(m_ + n_, m_ + n_);
        op.B.topLeftCorner(m_, m_) = Ahh;
        op.B.bottomRightCorner(n_, n_) = A;
        return op;
    }
    for (int i = 0; i < m_; ++i) op.fields.push_back(X(i, 1.0));
    for (int i = 0; i < m_; ++i) op.fields.push_back(Y(i));
    for (int i = 0; i < n_; ++i) {
        auto u = X(i, i < m_ ? 1.0 : eps);
        const auto y = Y(i);
        for (int a = 0; a < N; ++a) u[a] += y[a];
        op.fields.push_back(std::move(u));
    }
    const int F = 2 * m_ + n_;
    op.B = Eigen::MatrixXd::Zero(F, F);
    op.B.topLeftCorner(m_, m_) = Ahh;
    op.B.block(m_, m_, m_, m_) = Ahh;
    Eigen::MatrixXd rest = A;
    rest.topLeftCorner(m_, m_).setZero();
    op.B.bottomRightCorner(n_, n_) = rest;
    return op;
}

BoxGrid product_grid(const BoxGrid& base) {
    auto shape = base.shape();
    auto lower = base.lower();
    auto spacing = base.spacing();
    shape.insert(shape.end(), base.shape().begin(), base.shape().end());
    lower.insert(lower.end(), base.lower().begin(), base.lower().end());
    spacing.insert(spacing.end(), base.spacing().begin(), base.spacing().end());
    return BoxGrid(shape, lower, spacing);
}

DistanceCheck distance_check(const ProductLift& lift, double eps, std::size_t pairs, std::uint64_t seed, double box,
                             DistanceConvention conv) {
    if (!(eps > 0.0)) throw Error(ErrorKind::NonpositiveEpsilon, "distance check needs eps > 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-box, box);
    const int N = lift.dim();
    auto draw = [&] {
        Point p(N);
        for (int i = 0; i < N; ++i) p[i] = U(rng);
        return p;
    };
    DistanceCheck out;
    out.eps = eps;
    out.pairs = pairs;
    for (std::size_t k = 0; k < pairs; ++k) {
        const Point x = draw(), x0 = draw();
        const double de = lift.distance(LiftFrame::Coupled, eps, x, x0, conv);
        const double d0 = lift.distance(LiftFrame::Decoupled, eps, x, x0, conv);
        const Point fx = lift.change_of_variables(eps, x, x0);
        const Point fx0 = lift.change_of_variables(eps, x0, x0);
        const double d0f = lift.distance(LiftFrame::Decoupled, eps, fx, fx0, conv);
        out.identity_residual = std::max(out.identity_residual, std::abs(de - d0f));
        out.c0 = std::max(out.c0, std::abs(de - d0));
        // Jacobian of the centred map by central differences (exact for affine maps up to rounding)
        if (k < 64) {
            const double h = 1e-3;
            Eigen::MatrixXd J(N, N);
            for (int j = 0; j < N; ++j) {
                Point xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                const Point fp = lift.change_of_variables(eps, xp, x0), fm = lift.change_of_variables(eps, xm, x0);
                for (int i = 0; i < N; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
            }
            out.jacobian_error = std::max(out.jacobian_error, std::abs(J.determinant() - 1.0));
        }
    }
    return out;
}

BoxGrid marginal_grid(const BoxGrid& product, int base_dim) {
    return BoxGrid(std::vector<int>(product.shape().begin(), product.shape().begin() + base_dim),
                   std::vector<double>(product.lower().begin(), product.lower().begin() + base_dim),
                   std::vector<double>(product.spacing().begin(), product.spacing().begin() + base_dim));
}

std::vector<double> marginalize_values(const BoxGrid& product, const std::vector<double>& u, int base_dim) {
    std::size_t inner = 1;
    double dy = 1.0;
    for (int a = base_dim; a < product.dim(); ++a) {
        inner *= static_cast<std::size_t>(product.shape()[a]);
        dy *= product.spacing()[a];
    }
    const std::size_t outer = product.size() / inner;
    std::vector<double> out(outer, 0.0);
    for (std::size_t i = 0; i < outer; ++i) {
        double s = 0.0;
        const double* p = u.data() + i * inner;
        for (std::size_t j = 0; j < inner; ++j) s += p[j];
        out[i] = s * dy;
    }
    return out;
}

heat::KernelField marginalize(const heat::KernelField& lifted, int base_dim) {
    heat::KernelField k;
    k.grid = marginal_grid(lifted.grid, base_dim);
    k.times = lifted.times;
    k.mass = lifted.mass;
    k.trusted_until = lifted.trusted_until;
    k.dt = lifted.dt;
    k.dt_bound = lifted.dt_bound;
    k.steps = lifted.steps;
    k.eps = lifted.eps;
    k.A = lifted.A;
    for (const auto& v : lifted.values) k.values.push_back(marginalize_values(lifted.grid, v, base_dim));
    return k;
}

heat::KernelField solve_lift(const ProductLift& lift, LiftFrame frame, double eps, const Eigen::MatrixXd& A,
                             const BoxGrid& grid, const heat::HeatOptions& opts) {
    if (grid.dim() != lift.dim()) throw Error(ErrorKind::InvalidArgument, "grid must live on the product group");
    if (static_cast<double>(grid.size()) > opts.cell_budget)
        throw Error(ErrorKind::ResolutionTooCoarse,
                    "product grid of " + std::to_string(grid.size()) + " nodes exceeds the cell budget of " +
                        std::to_string(static_cast<long long>(opts.cell_budget)));
    auto k = heat::solve_heat(lift.heat_operator(frame, eps, A), grid, opts);
    k.eps = frame == LiftFrame::Decoupled ? 0.0 : eps;
    k.A = A;
    return k;
}

namespace {

bool in_margin(const BoxGrid& grid, std::size_t idx, int margin) {
    int m[32];
    grid.unravel(idx, m);
    for (int a = 0; a < grid.dim(); ++a)
        if (m[a] < margin || m[a] > grid.shape()[a] - 1 - margin) return false;
    return true;
}

}  // namespace

double kernel_identity_residual(const ProductLift& lift, double eps, const BoxGrid& grid,
                                const std::vector<double>& g_eps, const std::vector<double>& g_0, int margin) {
    double top = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!in_margin(grid, i, margin)) continue;
        const Point x(grid.point(i));
        const Point fx = lift.change_of_variables(eps, x);
        double v = 0.0;
        grid.interpolate(g_0, fx.data(), v);
        top = std::max(top, std::abs(g_eps[i]));
        diff = std::max(diff, std::abs(g_eps[i] - v));
    }
    return top > 0.0 ? diff / top : 0.0;
}

double abelian_change_of_variables_residual(const ProductLift& lift, const Eigen::MatrixXd& A, const BoxGrid& grid,
                                            double t, const heat::HeatOptions& opts, int margin) {
    if (lift.base().step() != 1)
        throw Error(ErrorKind::NotExtendable, "the linear change of variables needs an abelian base");
    const int n = lift.base_dim(), N = lift.dim();
    Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(N, N);
    Abar.topLeftCorner(n, n) = A;
    Abar.bottomRightCorner(n, n) = A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Abar);
    if (es.eigenvalues().minCoeff() <= 0.0) throw Error(ErrorKind::NotPositiveDefinite, "A is not positive definite");
    const Eigen::MatrixXd M = es.operatorInverseSqrt();
    const double det = std::abs(M.determinant());

    // identity-coefficient solve from the bump; the A solve starts from its pushforward so that both
    // sides carry the same initial data
    heat::HeatOptions oi = opts;
    oi.save_times = {t};
    oi.initial = nullptr;
    const auto gi = solve_lift(lift, LiftFrame::Decoupled, 0.0, Eigen::MatrixXd::Identity(n, n), grid, oi);

    heat::HeatOptions oa = oi;
    const double width = opts.mollifier_width;
    std::vector<double> bump_scale(N);
    double norm = 0.0;
    {
        // discrete normalization of the identity bump
        std::vector<double> x(N);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid.on_boundary(i)) continue;
            grid.point(i, x.data());
            double e = 0.0;
            for (int a = 0; a < N; ++a) {
                const double s = width * grid.spacing()[a];
                e += x[a] * x[a] / (2.0 * s * s);
            }
            norm += std::exp(-e);
        }
        norm *= grid.cell_volume();
    }
    oa.initial = [&](const double* x) {
        Eigen::Map<const Eigen::VectorXd> xv(x, N);
        const Eigen::VectorXd z = M * xv;
        double e = 0.0;
        for (int a = 0; a < N; ++a) {
            const double s = width * grid.spacing()[a];
            e += z[a] * z[a] / (2.0 * s * s);
        }
        return det * std::exp(-e) / norm;
    };
    const auto ga = solve_lift(lift, LiftFrame::Decoupled, 0.0, A, grid, oa);

    double top = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!in_margin(grid, i, margin)) continue;
        const Point x(grid.point(i));
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), N);
        const Eigen::VectorXd z = M * xv;
        double v = 0.0;
        grid.interpolate(gi.values[0], z.data(), v);
        top = std::max(top, ga.values[0][i]);
        diff = std::max(diff, std::abs(ga.values[0][i] - det * v));
    }
    return top > 0.0 ? diff / top : 0.0;
}

LiftReport lift_and_verify(const ProductLift& lift, const std::vector<double>& eps_list, std::size_t pairs,
                           std::uint64_t seed, double box, DistanceConvention conv) {
    LiftReport rep;
    double lo = 0.0, hi = 0.0;
    for (double e : eps_list) {
        rep.distances.push_back(distance_check(lift, e, pairs, seed, box, conv));
        const double c = rep.distances.back().c0;
        lo = rep.distances.size() == 1 ? c : std::min(lo, c);
        hi = std::max(hi, c);
    }
    rep.c0_spread = lo > 0.0 ? hi / lo : (hi > 0.0 ? INFINITY : 1.0);
    return rep;
}

}  // namespace carnot::lift
