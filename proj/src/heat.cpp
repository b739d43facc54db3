#include "carnot/heat.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "carnot/error.hpp"
#include "carnot/grid_calculus.hpp"

namespace carnot::heat {

namespace {

std::pair<double, double> eig_range(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

void check_symmetric(const Eigen::MatrixXd& A, int n) {
    if (A.rows() != n || A.cols() != n)
        throw Error(ErrorKind::InvalidArgument, "matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
        throw Error(ErrorKind::NotPositiveDefinite, "matrix is not symmetric");
}

// Conservative second-order stencil for sum_ab d_a (K_ab d_b u), coefficients tabulated on the
// subgrid of the variables K depends on.
struct Stencil {
    const BoxGrid* grid = nullptr;
    std::vector<std::size_t> sub_stride;  // 0 on axes K does not depend on
    struct Term {
        int a, b;
        std::vector<double> K;
    };
    std::vector<Term> diag, cross;
};

Stencil build_stencil(const DiffusionOperator& op, const BoxGrid& grid) {
    const int N = grid.dim();
    if (op.dim != N) throw Error(ErrorKind::InvalidArgument, "operator and grid dimensions differ");
    for (int a = 0; a < N; ++a)
        if (grid.shape()[a] < 3) throw Error(ErrorKind::ResolutionTooCoarse, "each axis needs at least 3 nodes");
    const auto K = op.diffusion_matrix();
    std::set<std::size_t> deps;
    for (int a = 0; a < N; ++a)
        for (int b = a; b < N; ++b)
            for (auto v : K[a][b].variables()) deps.insert(v);

    Stencil st;
    st.grid = &grid;
    st.sub_stride.assign(N, 0);
    std::vector<int> dep_axes(deps.rbegin(), deps.rend());
    std::size_t sub_size = 1;
    for (int ax : dep_axes) {  // last axis fastest, as in the full grid
        st.sub_stride[ax] = sub_size;
        sub_size *= static_cast<std::size_t>(grid.shape()[ax]);
    }

    auto tabulate = [&](const Polynomial& p) {
        std::vector<double> out(sub_size);
        CompiledPolynomial cp(p);
        std::vector<double> x(N, 0.0);
        std::vector<int> m(N, 0);
        for (std::size_t s = 0; s < sub_size; ++s) {
            std::size_t rem = s;
            for (int ax : dep_axes) {
                const int n = grid.shape()[ax];
                m[ax] = static_cast<int>(rem % n);
                rem /= n;
                x[ax] = grid.lower()[ax] + grid.spacing()[ax] * m[ax];
            }
            out[s] = cp(x.data());
        }
        return out;
    };
    for (int a = 0; a < N; ++a)
        for (int b = a; b < N; ++b) {
            if (K[a][b].is_zero()) continue;
            (a == b ? st.diag : st.cross).push_back({a, b, tabulate(K[a][b])});
        }
    return st;
}

// Visits interior nodes as (idx, sub) pairs, rows along the last axis.
template <class F>
void for_interior(const Stencil& st, F&& f) {
    const BoxGrid& g = *st.grid;
    const int N = g.dim();
    const int nl = g.shape()[N - 1];
    const std::size_t sl = st.sub_stride[N - 1];
    std::vector<int> m(N, 1);
    m[N - 1] = 0;
    while (true) {
        std::size_t base = 0, sub = 0;
        for (int a = 0; a < N; ++a) {
            base += static_cast<std::size_t>(m[a]) * g.strides()[a];
            sub += static_cast<std::size_t>(m[a]) * st.sub_stride[a];
        }
        for (int i = 1; i < nl - 1; ++i) f(base + i, sub + i * sl);
        int a = N - 2;
        while (a >= 0) {
            if (++m[a] < g.shape()[a] - 1) break;
            m[a] = 1;
            --a;
        }
        if (a < 0) break;
    }
}

void apply_stencil(const Stencil& st, const double* u, double* out) {
    const BoxGrid& g = *st.grid;
    struct D {
        const double* K;
        std::ptrdiff_t s, ks;
        double ih2;
    };
    struct C {
        const double* K;
        std::ptrdiff_t sa, sb, ka, kb;
        double coef;
    };
    std::vector<D> ds;
    std::vector<C> cs;
    for (const auto& t : st.diag)
        ds.push_back({t.K.data(), static_cast<std::ptrdiff_t>(g.strides()[t.a]),
                      static_cast<std::ptrdiff_t>(st.sub_stride[t.a]), 1.0 / (g.spacing()[t.a] * g.spacing()[t.a])});
    for (const auto& t : st.cross)
        cs.push_back({t.K.data(), static_cast<std::ptrdiff_t>(g.strides()[t.a]),
                      static_cast<std::ptrdiff_t>(g.strides()[t.b]), static_cast<std::ptrdiff_t>(st.sub_stride[t.a]),
                      static_cast<std::ptrdiff_t>(st.sub_stride[t.b]), 0.25 / (g.spacing()[t.a] * g.spacing()[t.b])});
    for_interior(st, [&](std::size_t idx, std::size_t sub) {
        const double* p = u + idx;
        double acc = 0.0;
        for (const auto& d : ds) {
            const double k0 = d.K[sub];
            const double kp = 0.5 * (k0 + d.K[sub + d.ks]);
            const double km = 0.5 * (k0 + d.K[sub - d.ks]);
            acc += d.ih2 * (kp * (p[d.s] - p[0]) - km * (p[0] - p[-d.s]));
        }
        for (const auto& c : cs) {
            const double kpa = c.K[sub + c.ka], kma = c.K[sub - c.ka];
            const double kpb = c.K[sub + c.kb], kmb = c.K[sub - c.kb];
            acc += c.coef * (kpa * (p[c.sa + c.sb] - p[c.sa - c.sb]) - kma * (p[-c.sa + c.sb] - p[-c.sa - c.sb]) +
                             kpb * (p[c.sb + c.sa] - p[c.sb - c.sa]) - kmb * (p[-c.sb + c.sa] - p[-c.sb - c.sa]));
        }
        out[idx] = acc;
    });
}

double stencil_norm_bound(const Stencil& st) {
    const BoxGrid& g = *st.grid;
    double L = 0.0;
    for_interior(st, [&](std::size_t, std::size_t sub) {
        double centre = 0.0, off = 0.0;
        for (const auto& t : st.diag) {
            const double ih2 = 1.0 / (g.spacing()[t.a] * g.spacing()[t.a]);
            const std::size_t ks = st.sub_stride[t.a];
            const double kp = 0.5 * (t.K[sub] + t.K[sub + ks]);
            const double km = 0.5 * (t.K[sub] + t.K[sub - ks]);
            centre -= ih2 * (kp + km);
            off += ih2 * (std::abs(kp) + std::abs(km));
        }
        for (const auto& t : st.cross) {
            const double coef = 0.25 / (g.spacing()[t.a] * g.spacing()[t.b]);
            const double kpa = t.K[sub + st.sub_stride[t.a]], kma = t.K[sub - st.sub_stride[t.a]];
            const double kpb = t.K[sub + st.sub_stride[t.b]], kmb = t.K[sub - st.sub_stride[t.b]];
            off += coef * (std::abs(kpa + kpb) + std::abs(kpa + kmb) + std::abs(kma + kpb) + std::abs(kma + kmb));
        }
        L = std::max(L, std::abs(centre) + off);
    });
    return L;
}

std::vector<double> gaussian_bump(const BoxGrid& grid, double width) {
    const int N = grid.dim();
    std::vector<double> u(grid.size(), 0.0);
    std::vector<double> x(N);
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.on_boundary(i)) continue;
        grid.point(i, x.data());
        double e = 0.0;
        for (int a = 0; a < N; ++a) {
            const double s = width * grid.spacing()[a];
            e += x[a] * x[a] / (2.0 * s * s);
        }
        u[i] = std::exp(-e);
        sum += u[i];
    }
    if (!(sum > 0.0)) throw Error(ErrorKind::ResolutionTooCoarse, "grid has no interior nodes near the origin");
    const double scale = 1.0 / (sum * grid.cell_volume());
    for (double& v : u) v *= scale;
    return u;
}

double mass_of(const BoxGrid& grid, const std::vector<double>& u) {
    double s = 0.0;
    for (double v : u) s += v;
    return s * grid.cell_volume();
}

bool in_window(const BoxGrid& grid, std::size_t idx, int margin) {
    int m[16];
    grid.unravel(idx, m);
    for (int a = 0; a < grid.dim(); ++a)
        if (m[a] < margin || m[a] > grid.shape()[a] - 1 - margin) return false;
    return true;
}

}  // namespace

FrozenOperator make_operator(const CarnotGroup& g, const Eigen::MatrixXd& A, double eps, bool horizontal_only) {
    FrozenOperator op;
    op.group = &g;
    op.eps = eps;
    op.horizontal_only = horizontal_only;
    const int n = (horizontal_only && A.rows() == g.horizontal_dim()) ? g.horizontal_dim() : g.dim();
    check_symmetric(A, n);
    op.A = A;
    auto [lo, hi] = eig_range(A);
    if (!(lo > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "coefficient matrix is not positive definite");
    op.Lambda = std::max(hi, 1.0 / lo);
    op.C1 = lo;
    op.C2 = hi;
    return op;
}

bool in_coercivity_class(const CarnotGroup& g, const Eigen::MatrixXd& A, double Lambda, double C1, double C2) {
    const int n = g.dim(), m = g.horizontal_dim();
    if (A.rows() != n || A.cols() != n) return false;
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
    Eigen::VectorXd lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
        lo[i] = i < m ? 1.0 / Lambda : C1;
        hi[i] = i < m ? Lambda : C2;
    }
    const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff());
    Eigen::MatrixXd below = A;
    below.diagonal() -= lo;
    Eigen::MatrixXd above = -A;
    above.diagonal() += hi;
    return eig_range(below).first >= -tol && eig_range(above).first >= -tol;
}

std::vector<std::vector<Polynomial>> DiffusionOperator::diffusion_matrix() const {
    const int F = static_cast<int>(fields.size());
    std::vector<std::vector<Polynomial>> K(dim, std::vector<Polynomial>(dim, Polynomial(dim)));
    for (int a = 0; a < dim; ++a)
        for (int b = a; b < dim; ++b) {
            Polynomial s(dim);
            for (int k = 0; k < F; ++k) {
                if (fields[k][a].is_zero()) continue;
                Polynomial row(dim);
                for (int l = 0; l < F; ++l)
                    if (B(k, l) != 0.0 && !fields[l][b].is_zero()) row += fields[l][b] * B(k, l);
                if (!row.is_zero()) s += fields[k][a] * row;
            }
            s.prune(1e-15);
            K[a][b] = s;
            K[b][a] = s;
        }
    return K;
}

DiffusionOperator diffusion_operator(const FrozenOperator& op) {
    if (!op.group) throw Error(ErrorKind::InvalidArgument, "operator has no group");
    const CarnotGroup& g = *op.group;
    if (op.eps < 0.0) throw Error(ErrorKind::NonpositiveEpsilon, "eps must be >= 0");
    if (op.eps == 0.0 && !op.horizontal_only)
        throw Error(ErrorKind::DegenerateEpsilonRequiresLift,
                    "eps = 0 is degenerate; use the horizontal-only operator or the product lift");
    const Frame frame = g.build_frames(Side::Left, op.horizontal_only ? 0.0 : op.eps);
    DiffusionOperator d;
    d.dim = g.dim();
    for (const auto& f : frame.fields) {
        std::vector<Polynomial> v;
        for (const auto& p : f.coeff_polys) v.push_back(p * f.eps_weight);
        d.fields.push_back(std::move(v));
    }
    const int F = static_cast<int>(d.fields.size());
    d.B = op.A.topLeftCorner(F, F);
    return d;
}

double operator_norm_bound(const DiffusionOperator& op, const BoxGrid& grid) {
    return stencil_norm_bound(build_stencil(op, grid));
}

std::vector<double> apply_operator(const DiffusionOperator& op, const BoxGrid& grid, const std::vector<double>& u) {
    const Stencil st = build_stencil(op, grid);
    std::vector<double> out(grid.size(), 0.0);
    apply_stencil(st, u.data(), out.data());
    return out;
}

KernelField solve_heat(const DiffusionOperator& op, const BoxGrid& grid, const HeatOptions& opts) {
    if (static_cast<double>(grid.size()) > opts.cell_budget)
        throw Error(ErrorKind::ResolutionTooCoarse, "grid of " + std::to_string(grid.size()) +
                                                        " nodes exceeds the cell budget");
    const Stencil st = build_stencil(op, grid);
    KernelField k;
    k.grid = grid;
    k.A = op.B;
    const double L = stencil_norm_bound(st);
    k.dt_bound = L > 0.0 ? 2.0 / L : std::numeric_limits<double>::infinity();
    double dt = opts.dt;
    if (dt > 0.0) {
        if (dt > k.dt_bound)
            throw Error(ErrorKind::CFLViolation, "dt = " + std::to_string(dt) + " exceeds the stability bound " +
                                                     std::to_string(k.dt_bound));
    } else {
        dt = opts.cfl_safety * k.dt_bound;
    }
    k.dt = dt;

    std::vector<double> saves = opts.save_times;
    std::sort(saves.begin(), saves.end());
    if (!saves.empty() && saves.front() < 0.0) throw Error(ErrorKind::InvalidArgument, "negative save time");

    std::vector<double> u, Lu(grid.size(), 0.0);
    if (opts.initial) {
        u.assign(grid.size(), 0.0);
        std::vector<double> x(grid.dim());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            if (grid.on_boundary(i)) continue;
            grid.point(i, x.data());
            u[i] = opts.initial(x.data());
        }
    } else {
        u = gaussian_bump(grid, opts.mollifier_width);
    }
    double t = 0.0;
    bool trusted = true;
    for (double T : saves) {
        const double span = T - t;
        if (span > 0.0) {
            const std::size_t n = static_cast<std::size_t>(std::ceil(span / dt - 1e-9));
            const double h = span / static_cast<double>(n);
            for (std::size_t s = 0; s < n; ++s) {
                apply_stencil(st, u.data(), Lu.data());
                for (std::size_t i = 0; i < u.size(); ++i) u[i] += h * Lu[i];
            }
            k.steps += n;
            t = T;
        }
        const double m = mass_of(grid, u);
        if (!std::isfinite(m)) throw Error(ErrorKind::Divergence, "kernel blew up before t = " + std::to_string(T));
        k.times.push_back(T);
        k.mass.push_back(m);
        if (trusted && std::abs(m - 1.0) <= opts.mass_tolerance)
            k.trusted_until = T;
        else
            trusted = false;
        if (opts.on_save) opts.on_save(T, u);
        if (opts.store) k.values.push_back(u);
    }
    return k;
}

KernelField solve_heat(const FrozenOperator& op, const BoxGrid& grid, const HeatOptions& opts) {
    KernelField k = solve_heat(diffusion_operator(op), grid, opts);
    k.eps = op.eps;
    k.A = op.A;
    return k;
}

double envelope_constant(double q, double scaled, double* c_upper, double* c_lower) {
    double cu, cl;
    if (!(scaled > 0.0)) {
        cu = 0.0;
        cl = std::numeric_limits<double>::infinity();
    } else {
        const double lg = std::log(scaled);
        // upper: C e^{-q/C} >= g  <=>  y - q e^{-y} >= ln g, increasing in y = ln C
        auto bisect = [](auto f) {
            double lo = -60.0, hi = 60.0;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                (f(mid) >= 0.0 ? hi : lo) = mid;
            }
            return std::exp(hi);
        };
        cu = q == 0.0 ? scaled : bisect([&](double y) { return y - q * std::exp(-y) - lg; });
        // lower: C^{-1} e^{-C q} <= g  <=>  y + q e^{y} + ln g >= 0
        cl = bisect([&](double y) { return y + q * std::exp(y) + lg; });
    }
    if (c_upper) *c_upper = cu;
    if (c_lower) *c_lower = cl;
    return std::max(cu, cl);
}

namespace {

template <class F>
void for_fit_points(const KernelField& k, const EnvelopeMetric& metric, const EnvelopeOptions& opts, F&& f) {
    const BoxGrid& g = k.grid;
    std::vector<double> d(g.size(), -1.0);
    std::vector<double> x(g.dim());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!in_window(g, i, opts.boundary_margin)) continue;
        g.point(i, x.data());
        d[i] = metric.dist(x.data());
    }
    for (std::size_t s = 0; s < k.times.size() && s < k.values.size(); ++s) {
        const double t = k.times[s];
        if (!(t > 0.0) || t < opts.t_min || t > k.trusted_until) continue;
        const double te = t + opts.time_offset;
        const double vol = metric.ball_volume(std::sqrt(te));
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (d[i] < 0.0) continue;
            const double q = d[i] * d[i] / te;
            if (q > opts.q_max) continue;
            f(s, i, te, q, vol);
        }
    }
}

}  // namespace

EnvelopeFit envelope_fit(const KernelField& k, const EnvelopeMetric& metric, const EnvelopeOptions& opts) {
    EnvelopeFit fit;
    bool any_positive = false;
    for_fit_points(k, metric, opts, [&](std::size_t s, std::size_t i, double te, double q, double vol) {
        const double gamma = k.values[s][i];
        const double scaled = gamma * vol;
        double cu, cl;
        const double c = envelope_constant(q, scaled, &cu, &cl);
        if (gamma > 0.0) any_positive = true;
        fit.C_upper = std::max(fit.C_upper, cu);
        fit.C_lower = std::max(fit.C_lower, cl);
        fit.points.push_back({te, q, gamma, scaled, c});
    });
    if (!any_positive) throw Error(ErrorKind::EmptyFitRegion, "no positive kernel values in the fit region");
    fit.C = std::max(fit.C_upper, fit.C_lower);
    return fit;
}

LipschitzReport kernel_A_lipschitz(const FrozenOperator& op1, const FrozenOperator& op2, const BoxGrid& grid,
                                   const HeatOptions& opts, int window_margin) {
    if (op1.group != op2.group || op1.eps != op2.eps || op1.horizontal_only != op2.horizontal_only)
        throw Error(ErrorKind::CoercivityMismatch, "operators live on different groups or eps levels");
    if (!op1.horizontal_only) {
        const double Lambda = std::max(op1.Lambda, op2.Lambda);
        const double C1 = std::min(op1.C1, op2.C1), C2 = std::max(op1.C2, op2.C2);
        if (!in_coercivity_class(*op1.group, op1.A, Lambda, C1, C2) ||
            !in_coercivity_class(*op1.group, op2.A, Lambda, C1, C2))
            throw Error(ErrorKind::CoercivityMismatch, "matrices are not in a shared coercivity class");
    }
    const auto d1 = diffusion_operator(op1);
    const auto d2 = diffusion_operator(op2);
    HeatOptions o = opts;
    o.store = true;
    o.on_save = nullptr;
    if (o.dt <= 0.0)
        o.dt = opts.cfl_safety * 2.0 / std::max(operator_norm_bound(d1, grid), operator_norm_bound(d2, grid));
    const KernelField k1 = solve_heat(d1, grid, o);
    const KernelField k2 = solve_heat(d2, grid, o);
    LipschitzReport rep;
    rep.norm_diff = (op1.A - op2.A).norm();
    for (std::size_t s = 0; s < k1.times.size(); ++s) {
        double sup = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (in_window(grid, i, window_margin)) sup = std::max(sup, std::abs(k1.values[s][i] - k2.values[s][i]));
        rep.levels.push_back({k1.times[s], sup, rep.norm_diff > 0.0 ? sup / rep.norm_diff : 0.0});
    }
    return rep;
}

ConvergenceReport eps_convergence(const CarnotGroup& g, const Eigen::MatrixXd& A, const std::vector<double>& eps_list,
                                  const BoxGrid& grid, const HeatOptions& opts, const std::vector<double>& window) {
    std::vector<DiffusionOperator> ops;
    for (double e : eps_list) ops.push_back(diffusion_operator(make_operator(g, A, e)));
    const DiffusionOperator ref = diffusion_operator(make_operator(g, A, 0.0, true));
    HeatOptions o = opts;
    o.store = false;
    if (o.dt <= 0.0) {
        double L = operator_norm_bound(ref, grid);
        for (const auto& op : ops) L = std::max(L, operator_norm_bound(op, grid));
        o.dt = opts.cfl_safety * 2.0 / L;
    }
    std::vector<double> last;
    o.on_save = [&](double, const std::vector<double>& u) { last = u; };
    solve_heat(ref, grid, o);
    const std::vector<double> g0 = last;

    std::vector<double> x(grid.dim());
    std::vector<char> inside(grid.size(), 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x.data());
        bool in = true;
        for (int a = 0; a < grid.dim() && a < static_cast<int>(window.size()); ++a)
            if (std::abs(x[a]) > window[a] + 1e-12) in = false;
        inside[i] = in;
    }
    ConvergenceReport rep;
    for (std::size_t e = 0; e < ops.size(); ++e) {
        solve_heat(ops[e], grid, o);
        double sup = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (inside[i]) sup = std::max(sup, std::abs(last[i] - g0[i]));
        if (!rep.rows.empty() && sup > rep.rows.back().sup_diff) rep.monotone = false;
        rep.rows.push_back({eps_list[e], sup});
    }
    return rep;
}

std::vector<double> group_convolution(const CarnotGroup& g, const BoxGrid& grid, const std::vector<double>& f,
                                      const std::vector<double>& h, const std::vector<std::size_t>& at) {
    const double dv = grid.cell_volume();
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (f[i] != 0.0) support.push_back(i);
    std::vector<Point> yinv(support.size());
    for (std::size_t s = 0; s < support.size(); ++s) yinv[s] = g.inverse(Point(grid.point(support[s])));
    std::vector<double> out(at.size(), 0.0);
    for (std::size_t k = 0; k < at.size(); ++k) {
        const Point x(grid.point(at[k]));
        double acc = 0.0;
        for (std::size_t s = 0; s < support.size(); ++s) {
            const Point z = g.multiply(yinv[s], x);
            double v;
            if (grid.interpolate(h, z.data(), v)) acc += f[support[s]] * v;
        }
        out[k] = acc * dv;
    }
    return out;
}

DerivativeBounds derivative_envelope(const KernelField& k, const Frame& frame, const EnvelopeMetric& metric, double C,
                                     const EnvelopeOptions& opts) {
    const FrameCalculus calc(frame);
    const int F = calc.num_fields();
    std::vector<double> d1(F), d2(F * F);
    DerivativeBounds b;
    for_fit_points(k, metric, opts, [&](std::size_t s, std::size_t i, double te, double q, double vol) {
        calc.second(k.grid, k.values[s], i, d2.data(), d1.data());
        const double env = std::exp(-q / C);
        double m1 = 0.0, m2 = 0.0;
        for (double v : d1) m1 = std::max(m1, std::abs(v));
        for (double v : d2) m2 = std::max(m2, std::abs(v));
        b.first = std::max(b.first, m1 * std::sqrt(te) * vol / env);
        b.second = std::max(b.second, m2 * te * vol / env);
    });
    return b;
}

}  // namespace carnot::heat
