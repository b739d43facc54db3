#include "carnot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "carnot/csv.hpp"
#include "carnot/error.hpp"

namespace carnot::metrics {

double gauge_norm(const CarnotGroup& g, const Point& x) {
    double p = 2.0;
    for (int k = 2; k <= g.step(); ++k) p *= k;
    // scale out the largest homogeneous component to keep the powers finite
    double scale = 0.0;
    for (int i = 0; i < g.dim(); ++i) scale = std::max(scale, std::pow(std::abs(x[i]), 1.0 / g.degree(i)));
    if (scale == 0.0) return 0.0;
    double s = 0.0;
    for (int i = 0; i < g.dim(); ++i) {
        double y = std::pow(std::abs(x[i]), 1.0 / g.degree(i)) / scale;
        s += std::pow(y, p);
    }
    return scale * std::pow(s, 1.0 / p);
}

double gauge_distance(const CarnotGroup& g, const Point& x, const Point& y) {
    return gauge_norm(g, g.multiply(g.inverse(y), x));
}

double n_eps(const CarnotGroup& g, const Point& x, double eps) {
    if (!(eps > 0.0)) throw Error(ErrorKind::NonpositiveEpsilon, "N_eps needs eps > 0");
    double horiz = 0.0, upper = 0.0;
    std::vector<double> layer(g.step() + 1, 0.0);
    for (int i = 0; i < g.dim(); ++i) {
        if (g.degree(i) == 1) {
            horiz += x[i] * x[i];
        } else {
            layer[g.degree(i)] += x[i] * x[i];
            upper += x[i] * x[i];
        }
    }
    double graded = 0.0;
    for (int k = 2; k <= g.step(); ++k) graded += std::pow(layer[k], 1.0 / k);
    return std::sqrt(horiz + std::min(graded, upper / (eps * eps)));
}

double d_g_eps(const CarnotGroup& g, const Point& x, const Point& y, double eps) {
    return n_eps(g, g.multiply(g.inverse(y), x), eps);
}

std::vector<double> reachable_half_widths(const CarnotGroup& g, double eps, double r) {
    const int n = g.dim();
    Frame f = g.build_frames(Side::Left, 1.0);
    // integrate |z_j|' <= w_j + sum_i w_i |p_i^j(z)| with coordinate bounds plugged into |coefficients|
    const int steps = 2000;
    const double ds = r / steps;
    std::vector<double> b(n, 0.0);
    auto bound_poly = [&](const Polynomial& p, const std::vector<double>& z) {
        double s = 0.0;
        for (const auto& [e, c] : p.terms()) {
            double t = std::abs(c);
            for (int v = 0; v < n; ++v)
                for (int k = 0; k < e[v]; ++k) t *= z[v];
            s += t;
        }
        return s;
    };
    auto rate = [&](const std::vector<double>& z, int j) {
        double wj = g.degree(j) == 1 ? 1.0 : eps;
        double s = wj;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const auto& p = f.fields[i].coeff_polys[j];
            if (p.is_zero()) continue;
            double wi = g.degree(i) == 1 ? 1.0 : eps;
            s += wi * bound_poly(p, z);
        }
        return s;
    };
    std::vector<double> pred(n);
    for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < n; ++j) pred[j] = b[j] + ds * rate(b, j);
        for (int j = 0; j < n; ++j) b[j] += ds * rate(pred, j);  // rates are nondecreasing in z
    }
    for (auto& v : b) v *= 1.02;
    return b;
}

std::vector<double> pseudo_ball_half_widths(const CarnotGroup& g, double eps, double r) {
    std::vector<double> w(g.dim());
    for (int i = 0; i < g.dim(); ++i) {
        const int d = g.degree(i);
        w[i] = d == 1 ? r : std::max(std::pow(r, d), eps * r);
    }
    return w;
}

LatticeGeodesy::LatticeGeodesy(const CarnotGroup& g, double eps, BoxGrid grid, int stencil_radius)
    : g_(&g), eps_(eps), grid_(std::move(grid)) {
    if (!(eps > 0.0)) throw Error(ErrorKind::NonpositiveEpsilon, "lattice distance needs eps > 0");
    const int n = g.dim();
    if (grid_.dim() != n) throw Error(ErrorKind::InvalidArgument, "lattice grid dimension mismatch");
    const int K = std::max(1, stencil_radius);
    std::vector<int> o(n, -K);
    while (true) {
        int gcd = 0;
        bool nonzero = false;
        for (int v : o) {
            gcd = std::gcd(gcd, std::abs(v));
            nonzero = nonzero || v != 0;
        }
        if (nonzero && gcd == 1) moves_.push_back(o);
        int a = n - 1;
        while (a >= 0 && o[a] == K) o[a--] = -K;
        if (a < 0) break;
        ++o[a];
    }
    for (const auto& mv : moves_) {
        long long s = 0;
        for (int a = 0; a < n; ++a) s += static_cast<long long>(mv[a]) * static_cast<long long>(grid_.strides()[a]);
        move_shift_.push_back(s);
    }
    Frame f = g.build_frames(Side::Left, 1.0);
    couplings_.resize(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (i == j || f.fields[i].coeff_polys[j].is_zero()) continue;
            couplings_[j].push_back({i, CompiledPolynomial(f.fields[i].coeff_polys[j])});
        }
    inv_weight_.resize(n);
    for (int j = 0; j < n; ++j) inv_weight_[j] = g.degree(j) == 1 ? 1.0 : 1.0 / eps;
}

double LatticeGeodesy::edge_cost(std::size_t from, std::size_t move) const {
    const int n = grid_.dim();
    int multi[16];
    grid_.unravel(from, multi);
    double mid[16], delta[16], c[16];
    const auto& mv = moves_[move];
    for (int a = 0; a < n; ++a) {
        int t = multi[a] + mv[a];
        if (t < 0 || t >= grid_.shape()[a]) return std::numeric_limits<double>::infinity();
        delta[a] = mv[a] * grid_.spacing()[a];
        mid[a] = grid_.lower()[a] + grid_.spacing()[a] * (multi[a] + 0.5 * mv[a]);
    }
    double len2 = 0.0;
    for (int j = 0; j < n; ++j) {
        double cj = delta[j];
        for (const auto& cp : couplings_[j]) cj -= cp.p(mid) * c[cp.i];
        c[j] = cj;
        double s = cj * inv_weight_[j];
        len2 += s * s;
    }
    return std::sqrt(len2);
}

std::vector<double> LatticeGeodesy::distance_field(std::size_t source, std::size_t target) const {
    const std::size_t N = grid_.size();
    std::vector<double> dist(N, std::numeric_limits<double>::infinity());
    std::vector<char> done(N, 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[source] = 0.0;
    pq.push({0.0, source});
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (done[u]) continue;
        done[u] = 1;
        if (u == target) break;
        for (std::size_t mv = 0; mv < moves_.size(); ++mv) {
            double w = edge_cost(u, mv);
            if (!std::isfinite(w)) continue;
            std::size_t v = static_cast<std::size_t>(static_cast<long long>(u) + move_shift_[mv]);
            if (done[v]) continue;
            double nd = d + w;
            if (nd < dist[v]) {
                dist[v] = nd;
                pq.push({nd, v});
            }
        }
    }
    return dist;
}

std::size_t LatticeGeodesy::snap(const Point& x) const {
    std::size_t idx = 0;
    if (x.size() != static_cast<std::size_t>(grid_.dim()) || !grid_.nearest(x.data(), idx)) {
        throw Error(ErrorKind::OutOfDomain, "point outside the lattice box");
    }
    return idx;
}

double LatticeGeodesy::distance(const Point& x, const Point& y) const {
    std::size_t a = snap(x), b = snap(y);
    if (a == b) return 0.0;
    return distance_field(a, b)[b];
}

double d_eps_lattice(const Point& x, const Point& y, const LatticeGeodesy& geo) {
    return geo.distance(x, y);
}

VolumeEstimate ball_volume(const CarnotGroup& g, const Point& x, double r, double eps, const BallSampler& sampler) {
    (void)x;
    VolumeEstimate est;
    if (r <= 0.0) return est;
    if (!(eps > 0.0)) throw Error(ErrorKind::NonpositiveEpsilon, "ball volume needs eps > 0");
    const int n = g.dim();
    const bool lattice = sampler.membership == BallSampler::Membership::Lattice;
    std::vector<double> hw = lattice ? reachable_half_widths(g, eps, r) : pseudo_ball_half_widths(g, eps, r);
    est.box_volume = 1.0;
    for (double w : hw) est.box_volume *= 2.0 * w;

    std::vector<double> field;
    BoxGrid grid;
    if (lattice) {
        std::vector<int> cells(n, sampler.lattice_cells);
        grid = BoxGrid::centered(hw, cells);
        LatticeGeodesy geo(g, eps, grid, sampler.stencil_radius);
        std::vector<int> mid(n);
        for (int a = 0; a < n; ++a) mid[a] = sampler.lattice_cells;
        field = geo.distance_field(grid.index(mid.data()));
    }
    std::mt19937_64 rng(sampler.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Point z(n);
    for (std::size_t s = 0; s < sampler.samples; ++s) {
        for (int a = 0; a < n; ++a) z[a] = hw[a] * U(rng);
        bool inside;
        if (lattice) {
            double d;
            inside = grid.interpolate(field, z.data(), d) && d < r;
        } else {
            inside = n_eps(g, z, eps) < r;
        }
        est.hits += inside ? 1 : 0;
    }
    est.samples = sampler.samples;
    double p = static_cast<double>(est.hits) / static_cast<double>(est.samples);
    est.volume = est.box_volume * p;
    est.stderr_ = est.box_volume * std::sqrt(p * (1.0 - p) / static_cast<double>(est.samples));
    return est;
}

HolderResult holder_norm(const SpaceTimeField& u, double alpha, const SpatialDistance& dist, const HolderOptions& opts) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::AlphaOutOfRange, "alpha must lie in (0,1)");
    const int n = u.grid.dim();
    std::vector<std::pair<std::uint32_t, std::size_t>> cells;
    std::vector<double> x(n), y(n);
    HolderResult res;
    for (std::size_t k = 0; k < u.times.size(); ++k) {
        for (std::size_t i = 0; i < u.grid.size(); ++i) {
            u.grid.point(i, x.data());
            if (opts.region && !opts.region(x.data(), u.times[k])) continue;
            cells.emplace_back(static_cast<std::uint32_t>(k), i);
            res.sup_abs = std::max(res.sup_abs, std::abs(u.values[k][i]));
        }
    }
    if (cells.size() >= 2) {
        std::mt19937_64 rng(opts.seed);
        std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
        for (std::size_t p = 0; p < opts.max_pairs; ++p) {
            const auto& a = cells[pick(rng)];
            const auto& b = cells[pick(rng)];
            if (a == b) continue;
            u.grid.point(a.second, x.data());
            u.grid.point(b.second, y.data());
            double d = std::max(dist(x.data(), y.data()), std::sqrt(std::abs(u.times[a.first] - u.times[b.first])));
            if (d <= 0.0) continue;
            double q = std::abs(u.values[a.first][a.second] - u.values[b.first][b.second]) / std::pow(d, alpha);
            res.quotient_sup = std::max(res.quotient_sup, q);
            ++res.pairs;
        }
    }
    res.norm = res.sup_abs + res.quotient_sup;
    return res;
}

void write_volume_csv(const std::string& path, const std::vector<VolumeRow>& rows) {
    CsvWriter w(path, {"epsilon", "radius", "volume", "stderr"});
    for (const auto& r : rows) w.row(std::vector<double>{r.epsilon, r.radius, r.volume, r.stderr_});
}

void write_holder_csv(const std::string& path, const std::vector<HolderRow>& rows) {
    CsvWriter w(path, {"alpha", "holder_norm", "region_id"});
    for (const auto& r : rows) w.row(std::vector<std::string>{fmt(r.alpha), fmt(r.holder_norm), std::to_string(r.region_id)});
}

}  // namespace carnot::metrics
