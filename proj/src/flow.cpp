#include "carnot/flow.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"
#include "carnot/metrics.hpp"
#include "carnot/snapshot.hpp"

namespace carnot::flow {

namespace {

constexpr int kMaxCorners = 64;  // cells of dimension <= 6

// Gauss-Legendre rule with q points on [0, 1].
void gauss_rule(int q, std::vector<double>& pts, std::vector<double>& wts) {
    static const double x2[] = {0.5773502691896257645};
    static const double w2[] = {1.0};
    static const double x3[] = {0.0, 0.7745966692414833770};
    static const double w3[] = {0.8888888888888888889, 0.5555555555555555556};
    static const double x4[] = {0.3399810435848562648, 0.8611363115940525752};
    static const double w4[] = {0.6521451548625461427, 0.3478548451374538573};
    static const double x5[] = {0.0, 0.5384693101056830910, 0.9061798459386639928};
    static const double w5[] = {0.5688888888888888889, 0.4786286704993664680, 0.2369268850561890875};
    const double *xs, *ws;
    int m;  // stored nonnegative nodes
    switch (q) {
        case 2: xs = x2; ws = w2; m = 1; break;
        case 3: xs = x3; ws = w3; m = 2; break;
        case 4: xs = x4; ws = w4; m = 2; break;
        case 5: xs = x5; ws = w5; m = 3; break;
        default: throw Error(ErrorKind::InvalidArgument, "quadrature order must be 2..5");
    }
    pts.clear();
    wts.clear();
    for (int i = m - 1; i >= 0; --i) {
        if (xs[i] == 0.0) continue;
        pts.push_back(0.5 - 0.5 * xs[i]);
        wts.push_back(0.5 * ws[i]);
    }
    for (int i = 0; i < m; ++i) {
        pts.push_back(0.5 + 0.5 * xs[i]);
        wts.push_back(0.5 * ws[i]);
    }
}

// a_ij(xi) = (delta_ij - xi_i xi_j / W^2) / W
void coefficients(const double* xi, int F, double* a, double* W_out = nullptr) {
    double s = 0.0;
    for (int i = 0; i < F; ++i) s += xi[i] * xi[i];
    const double W2 = 1.0 + s, W = std::sqrt(W2);
    for (int i = 0; i < F; ++i)
        for (int j = 0; j < F; ++j) a[i * F + j] = ((i == j ? 1.0 : 0.0) - xi[i] * xi[j] / W2) / W;
    if (W_out) *W_out = W;
}

double contract_sym(const double* a, const double* M, int F) {
    double s = 0.0;
    for (int k = 0; k < F * F; ++k) s += a[k] * M[k];
    return s;
}

double norm(const double* v, int F) {
    double s = 0.0;
    for (int i = 0; i < F; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

// Distance to the grid boundary in nodes.
int node_depth(const BoxGrid& grid, std::size_t idx) {
    int multi[16];
    grid.unravel(idx, multi);
    int d = std::numeric_limits<int>::max();
    for (int a = 0; a < grid.dim(); ++a) d = std::min({d, multi[a], grid.shape()[a] - 1 - multi[a]});
    return d;
}

// Nodes in the central `fraction` of every axis.
std::vector<std::size_t> window_nodes(const BoxGrid& grid, double fraction) {
    std::vector<std::size_t> out;
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x.data());
        bool in = true;
        for (int a = 0; a < grid.dim() && in; ++a) {
            const double c = 0.5 * (grid.lower()[a] + grid.upper(a));
            const double hw = 0.5 * (grid.upper(a) - grid.lower()[a]);
            in = std::abs(x[a] - c) <= fraction * hw + 1e-12;
        }
        if (in && !grid.on_boundary(i)) out.push_back(i);
    }
    return out;
}

}  // namespace

void validate(const FlowProblem& p) {
    if (!p.group) throw Error(ErrorKind::InvalidArgument, "flow problem without a group");
    if (!(p.eps >= 0.0 && p.eps <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eps must lie in [0, 1]");
    if (p.grid.dim() != p.group->dim()) throw Error(ErrorKind::InvalidArgument, "grid and group dimensions differ");
    if (p.grid.dim() > 6) throw Error(ErrorKind::InvalidArgument, "flow grids support at most 6 dimensions");
    for (int a = 0; a < p.grid.dim(); ++a)
        if (p.grid.shape()[a] < 4) throw Error(ErrorKind::InvalidArgument, "each axis needs at least 4 nodes");
    if (!(p.horizon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be nonnegative");
    double prev = 0.0;
    for (double t : p.save_times) {
        if (!(t > prev) || t > p.horizon + 1e-12)
            throw Error(ErrorKind::InvalidArgument, "save times must increase within (0, horizon]");
        prev = t;
    }
    std::vector<double> x(p.grid.dim());
    for (std::size_t i = 0; i < p.grid.size(); ++i) {
        p.grid.point(i, x.data());
        if (!std::isfinite(p.phi(x.data()))) throw Error(ErrorKind::InvalidArgument, "phi is not finite on the box");
    }
}

FlowOperator::FlowOperator(const CarnotGroup& g, double eps, const BoxGrid& grid, int quadrature)
    : g_(&g), eps_(eps), grid_(grid), frame_(g.build_frames(Side::Left, eps)), calc_(frame_),
      full_(g.build_frames(Side::Left, 1.0)) {
    n_ = grid_.dim();
    if (n_ != g.dim()) throw Error(ErrorKind::InvalidArgument, "grid and group dimensions differ");
    if (n_ > 6) throw Error(ErrorKind::InvalidArgument, "flow grids support at most 6 dimensions");
    F_ = static_cast<int>(frame_.fields.size());
    NK_ = 1 << n_;

    std::vector<char> is_dep(n_, 0);
    for (int a : calc_.evaluator().dependencies()) is_dep[a] = 1;
    if (quadrature == 0) quadrature = calc_.evaluator().dependencies().size() <= 2 ? 3 : 5;

    // Two Gauss points suffice on axes the frame does not depend on.
    std::vector<std::vector<double>> pts(n_), wts(n_);
    Q_ = 1;
    for (int a = 0; a < n_; ++a) {
        gauss_rule(is_dep[a] ? quadrature : 2, pts[a], wts[a]);
        Q_ *= static_cast<int>(pts[a].size());
    }
    std::vector<double> ref(static_cast<std::size_t>(Q_) * n_);
    qw_.assign(Q_, 1.0);
    for (int q = 0; q < Q_; ++q) {
        int rem = q;
        for (int a = n_ - 1; a >= 0; --a) {
            const int np = static_cast<int>(pts[a].size());
            const int j = rem % np;
            rem /= np;
            ref[q * n_ + a] = pts[a][j];
            qw_[q] *= wts[a][j];
        }
    }
    G_.assign(static_cast<std::size_t>(Q_) * NK_ * n_, 0.0);
    for (int q = 0; q < Q_; ++q)
        for (int k = 0; k < NK_; ++k)
            for (int a = 0; a < n_; ++a) {
                double v = 1.0;
                for (int b = 0; b < n_; ++b) {
                    const bool bit = (k >> (n_ - 1 - b)) & 1;
                    const double xb = ref[q * n_ + b];
                    if (b == a) v *= bit ? 1.0 : -1.0;
                    else v *= bit ? xb : 1.0 - xb;
                }
                G_[(static_cast<std::size_t>(q) * NK_ + k) * n_ + a] = v / grid_.spacing()[a];
            }

    corner_off_.assign(NK_, 0);
    for (int k = 0; k < NK_; ++k)
        for (int a = 0; a < n_; ++a)
            if ((k >> (n_ - 1 - a)) & 1) corner_off_[k] += static_cast<long long>(grid_.strides()[a]);

    ncells_ = 1;
    vol_ = 1.0;
    for (int a = 0; a < n_; ++a) {
        ncells_ *= static_cast<std::size_t>(grid_.shape()[a] - 1);
        vol_ *= grid_.spacing()[a];
    }

    // Frame matrices at the Gauss points, tabulated over the cells of the dependency axes.
    dep_stride_.assign(n_, 0);
    std::size_t ndep = 1;
    for (int a = n_ - 1; a >= 0; --a) {
        if (!is_dep[a]) continue;
        dep_axes_.insert(dep_axes_.begin(), a);
        dep_stride_[a] = ndep;
        ndep *= static_cast<std::size_t>(grid_.shape()[a] - 1);
    }
    const std::size_t block = static_cast<std::size_t>(F_) * n_;
    Pcache_.assign(ndep * Q_ * block, 0.0);
    std::vector<double> x(n_, 0.0);
    for (std::size_t c = 0; c < ndep; ++c) {
        std::vector<int> cell(n_, 0);
        for (int a : dep_axes_) cell[a] = static_cast<int>((c / dep_stride_[a]) % (grid_.shape()[a] - 1));
        for (int q = 0; q < Q_; ++q) {
            for (int a = 0; a < n_; ++a)
                x[a] = grid_.lower()[a] + grid_.spacing()[a] * (cell[a] + ref[q * n_ + a]);
            calc_.evaluator().matrix_at(x.data(), &Pcache_[(c * Q_ + q) * block]);
        }
    }

    mass_.assign(grid_.size(), 0.0);
    for_each_cell([&](std::size_t base, std::size_t) {
        for (int k = 0; k < NK_; ++k) mass_[base + corner_off_[k]] += vol_ / NK_;
    });
    interior_.assign(grid_.size(), 0);
    for (std::size_t i = 0; i < grid_.size(); ++i) interior_[i] = grid_.on_boundary(i) ? 0 : 1;
}

template <class Body>
void FlowOperator::for_each_cell(Body&& body) const {
    std::vector<int> c(n_, 0);
    const auto& st = grid_.strides();
    for (std::size_t cell = 0; cell < ncells_; ++cell) {
        std::size_t base = 0, key = 0;
        for (int a = 0; a < n_; ++a) {
            base += static_cast<std::size_t>(c[a]) * st[a];
            key += static_cast<std::size_t>(c[a]) * dep_stride_[a];
        }
        body(base, key);
        for (int a = n_ - 1; a >= 0; --a) {
            if (++c[a] < grid_.shape()[a] - 1) break;
            c[a] = 0;
        }
    }
}

double FlowOperator::energy_gradient(const std::vector<double>& u, std::vector<double>& grad) const {
    grad.assign(grid_.size(), 0.0);
    double E = 0.0;
    const std::size_t block = static_cast<std::size_t>(F_) * n_;
    double uk[kMaxCorners], gk[kMaxCorners], D[8], xi[16], flux[8];
    for_each_cell([&](std::size_t base, std::size_t key) {
        for (int k = 0; k < NK_; ++k) {
            uk[k] = u[base + corner_off_[k]];
            gk[k] = 0.0;
        }
        const double* Pc = &Pcache_[key * Q_ * block];
        for (int q = 0; q < Q_; ++q) {
            const double* Gq = &G_[static_cast<std::size_t>(q) * NK_ * n_];
            for (int a = 0; a < n_; ++a) D[a] = 0.0;
            for (int k = 0; k < NK_; ++k)
                for (int a = 0; a < n_; ++a) D[a] += uk[k] * Gq[k * n_ + a];
            const double* P = Pc + q * block;
            double s = 0.0;
            for (int i = 0; i < F_; ++i) {
                double v = 0.0;
                for (int a = 0; a < n_; ++a) v += P[i * n_ + a] * D[a];
                xi[i] = v;
                s += v * v;
            }
            const double W = std::sqrt(1.0 + s);
            const double wv = qw_[q] * vol_;
            E += wv * W;
            const double c = wv / W;
            for (int a = 0; a < n_; ++a) {
                double f = 0.0;
                for (int i = 0; i < F_; ++i) f += P[i * n_ + a] * xi[i];
                flux[a] = c * f;
            }
            for (int k = 0; k < NK_; ++k) {
                double v = 0.0;
                for (int a = 0; a < n_; ++a) v += flux[a] * Gq[k * n_ + a];
                gk[k] += v;
            }
        }
        for (int k = 0; k < NK_; ++k) grad[base + corner_off_[k]] += gk[k];
    });
    return E;
}

double FlowOperator::energy(const std::vector<double>& u) const {
    std::vector<double> g;
    return energy_gradient(u, g);
}

std::vector<double> FlowOperator::rhs_divergence(const std::vector<double>& u, double* energy) const {
    std::vector<double> g;
    const double E = energy_gradient(u, g);
    if (energy) *energy = E;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = interior_[i] ? -g[i] / mass_[i] : 0.0;
    return g;
}

std::vector<double> FlowOperator::rhs_nondivergence(const std::vector<double>& u) const {
    std::vector<double> r(grid_.size(), 0.0);
    double XX[256], xi[16], a[256];
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        if (!interior_[i]) continue;
        calc_.second(grid_, u, i, XX, xi);
        coefficients(xi, F_, a);
        r[i] = contract_sym(a, XX, F_);
    }
    return r;
}

std::vector<double> FlowOperator::rhs(const std::vector<double>& u, Mode mode, Form form, double* energy) const {
    std::vector<double> r;
    if (form == Form::Divergence) {
        r = rhs_divergence(u, energy);
    } else {
        r = rhs_nondivergence(u);
        if (energy) *energy = this->energy(u);
    }
    if (mode == Mode::MeanCurvatureFlow) {
        double xi[16];
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!interior_[i]) continue;
            calc_.first(grid_, u, i, xi);
            const double nrm = norm(xi, F_);
            r[i] *= std::sqrt(1.0 + nrm * nrm);
        }
    }
    return r;
}

double FlowOperator::stiffness_bound() const {
    if (bound_ >= 0.0) return bound_;
    std::vector<double> rowabs(grid_.size(), 0.0);
    const std::size_t block = static_cast<std::size_t>(F_) * n_;
    std::vector<double> PG(static_cast<std::size_t>(NK_) * F_), K(static_cast<std::size_t>(NK_) * NK_);
    for_each_cell([&](std::size_t base, std::size_t key) {
        std::fill(K.begin(), K.end(), 0.0);
        const double* Pc = &Pcache_[key * Q_ * block];
        for (int q = 0; q < Q_; ++q) {
            const double* Gq = &G_[static_cast<std::size_t>(q) * NK_ * n_];
            const double* P = Pc + q * block;
            for (int k = 0; k < NK_; ++k)
                for (int i = 0; i < F_; ++i) {
                    double v = 0.0;
                    for (int a = 0; a < n_; ++a) v += P[i * n_ + a] * Gq[k * n_ + a];
                    PG[k * F_ + i] = v;
                }
            const double wv = qw_[q] * vol_;
            for (int k = 0; k < NK_; ++k)
                for (int l = k; l < NK_; ++l) {
                    double v = 0.0;
                    for (int i = 0; i < F_; ++i) v += PG[k * F_ + i] * PG[l * F_ + i];
                    K[k * NK_ + l] += wv * v;
                }
        }
        for (int k = 0; k < NK_; ++k) {
            double s = 0.0;
            for (int l = 0; l < NK_; ++l) s += std::abs(l >= k ? K[k * NK_ + l] : K[l * NK_ + k]);
            rowabs[base + corner_off_[k]] += s;
        }
    });
    double L = 0.0;
    for (std::size_t i = 0; i < rowabs.size(); ++i)
        if (interior_[i]) L = std::max(L, rowabs[i] / mass_[i]);
    if (L <= 0.0) L = 1.0;  // no interior nodes: nothing evolves
    bound_ = L;
    return L;
}

Eigen::SparseMatrix<double> FlowOperator::weighted_stiffness(const std::vector<double>& u) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(ncells_ * NK_ * NK_);
    const std::size_t block = static_cast<std::size_t>(F_) * n_;
    std::vector<double> PG(static_cast<std::size_t>(NK_) * F_), K(static_cast<std::size_t>(NK_) * NK_);
    double D[8];
    for_each_cell([&](std::size_t base, std::size_t key) {
        std::fill(K.begin(), K.end(), 0.0);
        const double* Pc = &Pcache_[key * Q_ * block];
        for (int q = 0; q < Q_; ++q) {
            const double* Gq = &G_[static_cast<std::size_t>(q) * NK_ * n_];
            const double* P = Pc + q * block;
            for (int a = 0; a < n_; ++a) D[a] = 0.0;
            for (int k = 0; k < NK_; ++k)
                for (int a = 0; a < n_; ++a) D[a] += u[base + corner_off_[k]] * Gq[k * n_ + a];
            double s = 0.0;
            for (int i = 0; i < F_; ++i) {
                double v = 0.0;
                for (int a = 0; a < n_; ++a) v += P[i * n_ + a] * D[a];
                s += v * v;
            }
            const double wv = qw_[q] * vol_ / std::sqrt(1.0 + s);
            for (int k = 0; k < NK_; ++k)
                for (int i = 0; i < F_; ++i) {
                    double v = 0.0;
                    for (int a = 0; a < n_; ++a) v += P[i * n_ + a] * Gq[k * n_ + a];
                    PG[k * F_ + i] = v;
                }
            for (int k = 0; k < NK_; ++k)
                for (int l = 0; l < NK_; ++l) {
                    double v = 0.0;
                    for (int i = 0; i < F_; ++i) v += PG[k * F_ + i] * PG[l * F_ + i];
                    K[k * NK_ + l] += wv * v;
                }
        }
        for (int k = 0; k < NK_; ++k)
            for (int l = 0; l < NK_; ++l)
                trip.emplace_back(static_cast<int>(base + corner_off_[k]), static_cast<int>(base + corner_off_[l]),
                                  K[k * NK_ + l]);
    });
    const int N = static_cast<int>(grid_.size());
    Eigen::SparseMatrix<double> M(N, N);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

std::vector<double> FlowOperator::node_gradient(const std::vector<double>& u) const {
    std::vector<double> out(grid_.size() * F_);
    for (std::size_t i = 0; i < grid_.size(); ++i) calc_.first(grid_, u, i, &out[i * F_]);
    return out;
}

double FlowOperator::sup_grad_eps(const std::vector<double>& u) const {
    double xi[16], m = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        calc_.first(grid_, u, i, xi);
        m = std::max(m, norm(xi, F_));
    }
    return m;
}

std::vector<double> FlowOperator::grad_1_norm(const std::vector<double>& u) const {
    std::vector<double> out(grid_.size());
    double xi[16];
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        full_.first(grid_, u, i, xi);
        out[i] = norm(xi, full_.num_fields());
    }
    return out;
}

double FlowOperator::sup_grad_1(const std::vector<double>& u) const {
    const auto g = grad_1_norm(u);
    return *std::max_element(g.begin(), g.end());
}

std::vector<double> FlowOperator::sample(const Expression& f) const {
    std::vector<double> out(grid_.size());
    std::vector<double> x(n_);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        grid_.point(i, x.data());
        out[i] = f(x.data());
    }
    return out;
}

FlowState initial_state(const FlowProblem& p, const FlowOperator& op) {
    FlowState s;
    s.u = op.sample(p.phi);
    if (p.zero_fill)
        for (std::size_t i = 0; i < s.u.size(); ++i)
            if (op.interior(i)) s.u[i] = 0.0;
    return s;
}

double step(const FlowOperator& op, const FlowProblem& p, FlowState& s, double dt) {
    const double bound = op.stable_dt();
    if (dt > bound * (1.0 + 1e-12))
        throw Error(ErrorKind::CFLViolation,
                    "dt = " + fmt(dt) + " exceeds the stability bound " + fmt(bound));
    double E = 0.0;
    const auto r = op.rhs(s.u, p.mode, p.form, &E);
    for (std::size_t i = 0; i < r.size(); ++i) s.u[i] += dt * r[i];
    s.t += dt;
    return E;
}

FlowRun run_flow(const FlowProblem& p, const RunOptions& opts) {
    validate(p);
    FlowOperator op(*p.group, p.eps, p.grid);
    const auto saves = p.save_times.empty() ? std::vector<double>{p.horizon} : p.save_times;

    FlowRun run;
    run.dt_bound = op.stable_dt();
    double target = opts.dt > 0.0 ? opts.dt : opts.cfl_safety * run.dt_bound;
    if (target > run.dt_bound * (1.0 + 1e-12))
        throw Error(ErrorKind::CFLViolation, "dt = " + fmt(target) + " exceeds the stability bound " + fmt(run.dt_bound));
    run.dt = target;

    FlowState s = initial_state(p, op);
    std::optional<FlowState> su;
    FlowProblem pu = p;
    if (opts.upper_phi) {
        pu.phi = *opts.upper_phi;
        su = initial_state(pu, op);
    }
    const double u0_max = *std::max_element(s.u.begin(), s.u.end());
    const double u0_min = *std::min_element(s.u.begin(), s.u.end());
    const double scale = 1.0 + std::max(std::abs(u0_max), std::abs(u0_min));

    std::vector<int> depth(p.grid.size());
    for (std::size_t i = 0; i < depth.size(); ++i) depth[i] = node_depth(p.grid, i);

    auto monitor = [&](const std::vector<double>& u, const std::vector<double>* upper, double* energy,
                       std::vector<double>* rate) {
        MonitorRow row;
        row.t = s.t;
        auto r = op.rhs(u, p.mode, p.form, &row.tv_energy);
        for (double v : r) row.dt_norm = std::max(row.dt_norm, std::abs(v));
        row.sup_grad_eps = op.sup_grad_eps(u);
        row.sup_grad_1 = op.sup_grad_1(u);
        if (upper)
            for (std::size_t i = 0; i < u.size(); ++i)
                row.comparison_violation = std::max(row.comparison_violation, u[i] - (*upper)[i]);
        if (energy) *energy = row.tv_energy;
        if (rate) *rate = std::move(r);
        return row;
    };

    // Parabolic boundary: the whole initial slice with its time derivative, then the lateral nodes.
    std::vector<double> rate0;
    run.monitors.push_back(monitor(s.u, su ? &su->u : nullptr, nullptr, &rate0));
    const auto g0 = op.grad_1_norm(s.u);
    double pb = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) pb = std::max(pb, g0[i] + std::abs(rate0[i]));

    double prevE = std::numeric_limits<double>::quiet_NaN();
    for (double ts : saves) {
        const double span = ts - s.t;
        const std::size_t nsteps =
            span > 0.0 ? static_cast<std::size_t>(std::max(1.0, std::ceil(span / target - 1e-9))) : 0;
        const double dt = nsteps ? span / nsteps : 0.0;
        for (std::size_t k = 0; k < nsteps; ++k) {
            const double E = step(op, p, s, dt);
            if (su) step(op, pu, *su, dt);
            run.energy_trace.push_back(E);
            if (!std::isnan(prevE) && prevE > 0.0) {
                const double inc = (E - prevE) / prevE;
                run.max_energy_increase = std::max(run.max_energy_increase, inc);
                if (inc > opts.energy_tolerance) run.energy_monotone = false;
            }
            prevE = E;
            ++run.steps;
        }
        s.t = ts;
        for (double v : s.u)
            if (!std::isfinite(v) || std::abs(v) > opts.blowup * scale)
                throw Error(ErrorKind::Divergence, "solution left the finite range at t = " + fmt(ts));

        double Ecur = 0.0;
        run.monitors.push_back(monitor(s.u, su ? &su->u : nullptr, &Ecur, nullptr));
        if (!std::isnan(prevE) && prevE > 0.0) {
            const double inc = (Ecur - prevE) / prevE;
            run.max_energy_increase = std::max(run.max_energy_increase, inc);
            if (inc > opts.energy_tolerance) run.energy_monotone = false;
        }
        run.max_comparison_violation = std::max(run.max_comparison_violation, run.monitors.back().comparison_violation);

        const auto g1 = op.grad_1_norm(s.u);
        double interior = 0.0;
        for (std::size_t i = 0; i < g1.size(); ++i) {
            if (depth[i] == 0) pb = std::max(pb, g1[i]);  // du/dt = 0 on the lateral boundary
            else if (depth[i] >= opts.interior_margin) interior = std::max(interior, g1[i]);
        }
        run.interior_grad.push_back(interior);
        run.boundary_bound.push_back(pb);
        run.gradient_bound_ratio = std::max(run.gradient_bound_ratio, pb > 0.0 ? interior / pb : 0.0);

        const auto [mn, mx] = std::minmax_element(s.u.begin(), s.u.end());
        run.max_principle_excess = std::max({run.max_principle_excess, *mx - u0_max, u0_min - *mn});

        run.times.push_back(ts);
        if (opts.store) {
            run.saves.push_back(s.u);
            if (su) run.upper_saves.push_back(su->u);
        }
    }
    run.final_u = s.u;
    return run;
}

void write_monitor_csv(const std::string& path, const std::vector<MonitorRow>& rows) {
    CsvWriter w(path, {"t", "sup_grad_eps", "sup_grad_1", "tv_energy", "dt_norm", "comparison_violation"});
    for (const auto& r : rows)
        w.row(std::vector<double>{r.t, r.sup_grad_eps, r.sup_grad_1, r.tv_energy, r.dt_norm, r.comparison_violation});
}

void write_trajectory(const std::string& prefix, const FlowProblem& p, const FlowRun& run) {
    for (std::size_t k = 0; k < run.saves.size(); ++k) {
        Snapshot snap;
        snap.grid = p.grid;
        snap.values = run.saves[k];
        snap.time = run.times[k];
        snap.epsilon = p.eps;
        write_snapshot(prefix + "_" + std::to_string(k), snap);
    }
}

SteadyResult steady_state(const FlowProblem& p, double tol, const SteadyOptions& opts) {
    validate(p);
    FlowOperator op(*p.group, p.eps, p.grid);
    SteadyResult res;
    res.u = initial_state(p, op).u;

    const std::size_t N = p.grid.size();
    std::vector<int> map(N, -1);
    int NI = 0;
    for (std::size_t i = 0; i < N; ++i)
        if (op.interior(i)) map[i] = NI++;
    std::vector<Eigen::Triplet<double>> sel;
    for (std::size_t i = 0; i < N; ++i)
        if (map[i] >= 0) sel.emplace_back(static_cast<int>(i), map[i], 1.0);
    Eigen::SparseMatrix<double> S(static_cast<int>(N), NI);
    S.setFromTriplets(sel.begin(), sel.end());

    auto residual = [&](const std::vector<double>& u, double& E) {
        const auto r = op.rhs_divergence(u, &E);
        double m = 0.0;
        for (double v : r) m = std::max(m, std::abs(v));
        return m;
    };
    double E = 0.0;
    res.residual = residual(res.u, E);
    res.residual_trace.push_back(res.residual);
    res.energy_trace.push_back(E);
    if (tol > 0.0 && res.residual <= tol) return res;

    Eigen::VectorXd x(NI);
    for (std::size_t i = 0; i < N; ++i)
        if (map[i] >= 0) x[map[i]] = res.u[i];
    for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
        const Eigen::SparseMatrix<double> K = op.weighted_stiffness(res.u);
        Eigen::VectorXd ub = Eigen::Map<const Eigen::VectorXd>(res.u.data(), static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < N; ++i)
            if (map[i] >= 0) ub[static_cast<Eigen::Index>(i)] = 0.0;
        const Eigen::VectorXd b = -(S.transpose() * (K * ub));
        const Eigen::SparseMatrix<double> KII = S.transpose() * K * S;
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(opts.cg_tolerance);
        cg.compute(KII);
        x = cg.solveWithGuess(b, x);
        for (std::size_t i = 0; i < N; ++i)
            if (map[i] >= 0) res.u[i] = x[map[i]];
        res.iterations = it;
        res.residual = residual(res.u, E);
        res.residual_trace.push_back(res.residual);
        res.energy_trace.push_back(E);
        if (!std::isfinite(res.residual)) throw Error(ErrorKind::Divergence, "steady-state iteration diverged");
        if (tol > 0.0 && res.residual <= tol) return res;
    }
    throw Error(ErrorKind::BudgetExhausted, "residual " + fmt(res.residual) + " after " +
                                                std::to_string(res.iterations) + " iterations (tol " + fmt(tol) + ")");
}

SweepReport eps_sweep(const FlowProblem& tmpl, const std::vector<double>& eps_list, const SweepOptions& opts) {
    validate(tmpl);
    SweepReport rep;
    rep.eps = eps_list;
    RunOptions ro = opts.run;
    ro.store = false;
    rep.sup_grad_1.assign(eps_list.size(), 0.0);
    rep.final_u.assign(eps_list.size(), {});
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t k; (k = next++) < eps_list.size();) {
            try {
                FlowProblem q = tmpl;
                q.eps = eps_list[k];
                FlowRun run = run_flow(q, ro);
                for (const auto& m : run.monitors) rep.sup_grad_1[k] = std::max(rep.sup_grad_1[k], m.sup_grad_1);
                rep.final_u[k] = std::move(run.final_u);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int jobs = std::clamp<int>(opts.jobs, 1, static_cast<int>(std::max<std::size_t>(eps_list.size(), 1)));
    std::vector<std::thread> pool;
    for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    const auto win = window_nodes(tmpl.grid, opts.window_fraction);
    for (std::size_t k = 0; k + 1 < eps_list.size(); ++k) {
        double d = 0.0;
        for (std::size_t i : win) d = std::max(d, std::abs(rep.final_u[k][i] - rep.final_u[k + 1][i]));
        rep.consecutive_diff.push_back(d);
    }
    rep.monotone = true;
    for (std::size_t k = 0; k + 1 < rep.consecutive_diff.size(); ++k)
        if (!(rep.consecutive_diff[k + 1] < rep.consecutive_diff[k])) rep.monotone = false;

    // Lipschitz bound of the data in the unit-weight frame, from exact derivatives.
    const int n = tmpl.grid.dim();
    DifferentiatedExpression dphi(tmpl.phi, n);
    FrameEvaluator full(tmpl.group->build_frames(Side::Left, 1.0));
    std::vector<double> x(n), D(n), P(static_cast<std::size_t>(n) * n);
    for (std::size_t i = 0; i < tmpl.grid.size(); ++i) {
        tmpl.grid.point(i, x.data());
        dphi.gradient(x.data(), D.data());
        full.matrix_at(x.data(), P.data());
        double s = 0.0;
        for (int f = 0; f < full.num_fields(); ++f) {
            double v = 0.0;
            for (int a = 0; a < n; ++a) v += P[f * n + a] * D[a];
            s += v * v;
        }
        rep.data_lipschitz = std::max(rep.data_lipschitz, std::sqrt(s));
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double g : rep.sup_grad_1) {
        const double c = rep.data_lipschitz > 0.0 ? g / rep.data_lipschitz : 0.0;
        rep.grad_constant.push_back(c);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    rep.constant_spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    return rep;
}

double Barrier::plane(const double* x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * (x[i] - x0[i]);
    return s;
}

double Barrier::value(const double* x) const { return std::log1p(k * plane(x)) / nu; }
double Barrier::dphi(double s) const { return k / (nu * (1.0 + k * s)); }
double Barrier::d2phi(double s) const { return -k * k / (nu * (1.0 + k * s) * (1.0 + k * s)); }
double Barrier::ode_residual(double s) const {
    const double d1 = dphi(s);
    return d2phi(s) + nu * d1 * d1;
}

std::vector<double> supporting_plane(const CarnotGroup& g, const BoxGrid& grid, const std::vector<double>& x0) {
    const int n = grid.dim();
    if (static_cast<int>(x0.size()) != n) throw Error(ErrorKind::InvalidArgument, "x0 has the wrong dimension");
    std::vector<double> a(n, 0.0);
    bool on_face = false;
    for (int i = 0; i < n; ++i) {
        const double lo = grid.lower()[i], hi = grid.upper(i);
        const double tol = 1e-12 * std::max(1.0, hi - lo);
        if (x0[i] < lo - tol || x0[i] > hi + tol)
            throw Error(ErrorKind::NotSupportingPlane, "x0 lies outside the box");
        if (std::abs(x0[i] - lo) <= tol) {
            a[i] += 1.0;
            on_face = true;
        } else if (std::abs(x0[i] - hi) <= tol) {
            a[i] -= 1.0;
            on_face = true;
        }
    }
    if (!on_face) throw Error(ErrorKind::NotSupportingPlane, "x0 is not on the boundary of the box");
    double s = 0.0;
    for (int i = 0; i < n; ++i)
        if (g.degree(i) <= 2) s += a[i] * a[i];
    if (s == 0.0)
        for (int i = 0; i < n; ++i) s += a[i] * a[i];
    for (double& v : a) v /= std::sqrt(s);
    check_supporting_plane(grid, x0, a);
    return a;
}

void check_supporting_plane(const BoxGrid& grid, const std::vector<double>& x0, const std::vector<double>& a) {
    Barrier b;
    b.x0 = x0;
    b.a = a;
    double amax = 0.0;
    for (double v : a) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) throw Error(ErrorKind::NotSupportingPlane, "zero plane coefficients");
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x.data());
        if (b.plane(x.data()) < -1e-12 * amax)
            throw Error(ErrorKind::NotSupportingPlane, "plane is negative inside the domain");
    }
}

namespace {

BarrierReport barrier_at_radius(const FlowProblem& p, const FlowRun& run, const std::vector<double>& x0,
                                const BarrierOptions& opts, double radius) {
    if (run.saves.empty()) throw Error(ErrorKind::InvalidArgument, "barrier check needs stored saves");
    const CarnotGroup& g = *p.group;
    const BoxGrid& grid = p.grid;
    const int n = grid.dim();
    const std::vector<double> a = opts.plane ? *opts.plane : supporting_plane(g, grid, x0);
    check_supporting_plane(grid, x0, a);
    {
        Barrier b0;
        b0.x0 = x0;
        b0.a = a;
        if (std::abs(b0.plane(x0.data())) > 1e-12) throw Error(ErrorKind::NotSupportingPlane, "Pi(x0) != 0");
    }

    const FrameCalculus calc(g.build_frames(Side::Left, p.eps));
    const int F = calc.num_fields();
    DifferentiatedExpression dphi(p.phi, n);

    // Neighbourhood nodes and the sub-box that holds them.
    struct NodeData {
        std::size_t idx;
        bool lateral;
        double Pi;
        std::vector<double> gPi, XXPi, gphi, XXphi;
    };
    std::vector<NodeData> nodes;
    double hmin = *std::min_element(grid.spacing().begin(), grid.spacing().end());
    std::vector<double> x(n), D(n), H(static_cast<std::size_t>(n) * n, 0.0), zeroH(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> sub_lo(n, std::numeric_limits<double>::infinity()), sub_hi(n, -std::numeric_limits<double>::infinity());
    Barrier probe;
    probe.x0 = x0;
    probe.a = a;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid.point(i, x.data());
        double dinf = 0.0;
        for (int c = 0; c < n; ++c) dinf = std::max(dinf, std::abs(x[c] - x0[c]));
        if (dinf > radius + 1e-12) continue;
        NodeData nd;
        nd.idx = i;
        nd.lateral = dinf > radius - 0.5 * hmin;
        nd.Pi = probe.plane(x.data());
        nd.gPi.resize(F);
        nd.XXPi.resize(static_cast<std::size_t>(F) * F);
        calc.contract(x.data(), a.data(), zeroH.data(), nd.XXPi.data(), nd.gPi.data());
        nd.gphi.resize(F);
        nd.XXphi.resize(static_cast<std::size_t>(F) * F);
        dphi.gradient(x.data(), D.data());
        dphi.hessian(x.data(), H.data());
        calc.contract(x.data(), D.data(), H.data(), nd.XXphi.data(), nd.gphi.data());
        nodes.push_back(std::move(nd));
        for (int c = 0; c < n; ++c) {
            sub_lo[c] = std::min(sub_lo[c], x[c]);
            sub_hi[c] = std::max(sub_hi[c], x[c]);
        }
    }
    if (nodes.empty()) throw Error(ErrorKind::InvalidArgument, "empty barrier neighbourhood");

    // v = u - phi at every save on the neighbourhood.
    std::vector<std::vector<double>> v(run.saves.size(), std::vector<double>(nodes.size()));
    for (std::size_t s = 0; s < run.saves.size(); ++s)
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            grid.point(nodes[j].idx, x.data());
            v[s][j] = run.saves[s][nodes[j].idx] - p.phi(x.data());
        }

    // sigma_1 distance to x0 on the sub-box.
    std::vector<int> sub_shape(n);
    for (int c = 0; c < n; ++c)
        sub_shape[c] = static_cast<int>(std::lround((sub_hi[c] - sub_lo[c]) / grid.spacing()[c])) + 1;
    BoxGrid sub(sub_shape, sub_lo, grid.spacing());
    metrics::LatticeGeodesy geo(g, 1.0, sub);
    std::size_t src = 0;
    sub.nearest(x0.data(), src);
    const auto dist = geo.distance_field(src);
    std::vector<double> dnode(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        grid.point(nodes[j].idx, x.data());
        std::size_t si = 0;
        sub.nearest(x.data(), si);
        dnode[j] = dist[si];
    }

    std::vector<double> ks = opts.k_values, nus = opts.nu_values;
    if (ks.empty())
        for (int e = 0; e <= 10; ++e) ks.push_back(std::ldexp(1.0, e));
    if (nus.empty())
        for (int e = -8; e <= 8; ++e) nus.push_back(std::pow(10.0, 0.25 * e));

    auto evaluate = [&](double k, double nu) {
        BarrierReport r;
        r.barrier.x0 = x0;
        r.barrier.a = a;
        r.barrier.k = k;
        r.barrier.nu = nu;
        r.step_two = g.step() <= 2;
        r.neighbourhood_nodes = nodes.size();
        r.radius = radius;
        r.barrier_excess_max = r.q_max = -std::numeric_limits<double>::infinity();
        r.lateral_margin = r.comparison_margin = std::numeric_limits<double>::infinity();
        std::vector<double> gw(F), gu(F), A(static_cast<std::size_t>(F) * F);
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            const auto& nd = nodes[j];
            const double p1 = r.barrier.dphi(nd.Pi), p2 = r.barrier.d2phi(nd.Pi);
            for (int i = 0; i < F; ++i) {
                gw[i] = p1 * nd.gPi[i];
                gu[i] = gw[i] + nd.gphi[i];
            }
            coefficients(gu.data(), F, A.data());
            const double c1 = contract_sym(A.data(), nd.XXPi.data(), F);
            double Fq = 0.0;
            for (int i = 0; i < F; ++i)
                for (int l = 0; l < F; ++l) Fq += A[i * F + l] * gw[i] * gw[l];
            const double b = contract_sym(A.data(), nd.XXphi.data(), F);
            const double c2 = p2 / (p1 * p1) * Fq + b;
            r.plane_hessian_residual = std::max(r.plane_hessian_residual, std::abs(c1));
            r.barrier_excess_max = std::max(r.barrier_excess_max, c2);
            r.q_max = std::max(r.q_max, p1 * c1 + c2);
            r.ode_residual = std::max(r.ode_residual, std::abs(r.barrier.ode_residual(nd.Pi)));
            const double w = std::log1p(k * nd.Pi) / nu;
            for (std::size_t s = 0; s < v.size(); ++s) {
                r.comparison_margin = std::min(r.comparison_margin, w - v[s][j]);
                if (nd.lateral) r.lateral_margin = std::min(r.lateral_margin, w - v[s][j]);
                if (dnode[j] > 0.0) r.quotient_v = std::max(r.quotient_v, v[s][j] / dnode[j]);
            }
            if (dnode[j] > 0.0) r.quotient_w = std::max(r.quotient_w, w / dnode[j]);
        }
        return r;
    };

    int tried = 0;
    BarrierReport last;
    for (double k : ks)
        for (double nu : nus) {
            ++tried;
            last = evaluate(k, nu);
            last.pairs_tried = tried;
            if (last.barrier_excess_max <= opts.sign_tolerance && last.lateral_margin >= -opts.sign_tolerance) return last;
        }
    throw Error(ErrorKind::BarrierSearchFailed,
                "no (nu, k) in the search grid satisfies both conditions at radius " + fmt(radius) +
                    "; last barrier excess " + fmt(last.barrier_excess_max) + ", lateral margin " + fmt(last.lateral_margin));
}

}  // namespace

BarrierReport barrier_verify(const FlowProblem& p, const FlowRun& run, const std::vector<double>& x0,
                             const BarrierOptions& opts) {
    validate(p);
    if (!(opts.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "barrier radius must be positive");
    const double hmin = *std::min_element(p.grid.spacing().begin(), p.grid.spacing().end());
    // Any neighbourhood will do, so shrink it until a pair works or it drops below one cell.
    double radius = opts.radius;
    int tried = 0;
    while (true) {
        try {
            BarrierReport r = barrier_at_radius(p, run, x0, opts, radius);
            r.pairs_tried += tried;
            return r;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::BarrierSearchFailed || !opts.shrink || radius * 0.5 < hmin * (1.0 - 1e-9)) throw;
        }
        tried += static_cast<int>(opts.k_values.empty() ? 11 : opts.k_values.size()) *
                 static_cast<int>(opts.nu_values.empty() ? 17 : opts.nu_values.size());
        radius *= 0.5;
    }
}

namespace {

// d a_ij / d xi_k for a_ij = (delta_ij - xi_i xi_j / W^2) / W.
void coefficient_derivatives(const double* xi, int F, double* out) {
    double s = 0.0;
    for (int i = 0; i < F; ++i) s += xi[i] * xi[i];
    const double W2 = 1.0 + s, W = std::sqrt(W2);
    for (int k = 0; k < F; ++k)
        for (int i = 0; i < F; ++i)
            for (int j = 0; j < F; ++j) {
                const double dij = i == j ? 1.0 : 0.0;
                const double dik = i == k ? 1.0 : 0.0;
                const double djk = j == k ? 1.0 : 0.0;
                out[(k * F + i) * F + j] = -xi[k] / (W2 * W) * (dij - xi[i] * xi[j] / W2) +
                                           (-(dik * xi[j] + xi[i] * djk) / W2 + 2.0 * xi[i] * xi[j] * xi[k] / (W2 * W2)) / W;
            }
}

}  // namespace

DerivativeResidual derivative_residual(const FlowOperator& op, const std::vector<std::vector<double>>& saves,
                                       double delta, const DerivativeOptions& opts) {
    const BoxGrid& grid = op.grid();
    const std::size_t N = grid.size();
    const bool time_field = opts.field == 0;
    if (saves.size() < (time_field ? 3u : 2u))
        throw Error(ErrorKind::InvalidArgument, "derivative residual needs consecutive saves");
    if (!(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be positive");

    std::vector<double> v0(N), v1(N);
    if (time_field) {
        for (std::size_t i = 0; i < N; ++i) {
            v0[i] = (saves[1][i] - saves[0][i]) / delta;
            v1[i] = (saves[2][i] - saves[1][i]) / delta;
        }
    } else {
        const FrameCalculus frame(op.group().build_frames(opts.side, 1.0));
        const int h = opts.field - 1;
        if (h < 0 || h >= frame.num_fields()) throw Error(ErrorKind::InvalidArgument, "field index out of range");
        double xi[16];
        for (std::size_t i = 0; i < N; ++i) {
            frame.first(grid, saves[0], i, xi);
            v0[i] = xi[h];
            frame.first(grid, saves[1], i, xi);
            v1[i] = xi[h];
        }
    }

    const FrameCalculus& calc = op.calculus();
    const int F = calc.num_fields();
    double XXu[256], gu[16], XXv[256], gv[16], A[256], dA[4096];
    DerivativeResidual res;
    double sum = 0.0;
    for (std::size_t i : window_nodes(grid, opts.window_fraction)) {
        calc.second(grid, saves[0], i, XXu, gu);
        calc.second(grid, v0, i, XXv, gv);
        coefficients(gu, F, A);
        coefficient_derivatives(gu, F, dA);
        double rhs = contract_sym(A, XXv, F);
        for (int k = 0; k < F; ++k) rhs += contract_sym(dA + k * F * F, XXu, F) * gv[k];
        const double r = (v1[i] - v0[i]) / delta - rhs;
        sum += r * r;
        res.linf = std::max(res.linf, std::abs(r));
        ++res.nodes;
    }
    res.l2 = std::sqrt(sum * grid.cell_volume());
    return res;
}

}  // namespace carnot::flow
