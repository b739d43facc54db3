#include "carnot/grid_calculus.hpp"

namespace carnot {

namespace {

// Three-point first-derivative stencil along one axis: offsets and weights (per unit spacing).
int d1_stencil(int i, int n, int* off, double* w) {
    if (i > 0 && i < n - 1) {
        off[0] = -1; w[0] = -0.5;
        off[1] = 1;  w[1] = 0.5;
        return 2;
    }
    if (i == 0) {
        off[0] = 0; w[0] = -1.5;
        off[1] = 1; w[1] = 2.0;
        off[2] = 2; w[2] = -0.5;
        return 3;
    }
    off[0] = 0;  w[0] = 1.5;
    off[1] = -1; w[1] = -2.0;
    off[2] = -2; w[2] = 0.5;
    return 3;
}

}  // namespace

double grid_d1(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, const int* multi, int a) {
    int off[3];
    double w[3];
    int k = d1_stencil(multi[a], grid.shape()[a], off, w);
    const long long s = static_cast<long long>(grid.strides()[a]);
    double sum = 0.0;
    for (int q = 0; q < k; ++q) sum += w[q] * u[static_cast<std::size_t>(static_cast<long long>(idx) + off[q] * s)];
    return sum / grid.spacing()[a];
}

double grid_d2(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, const int* multi, int a, int b) {
    const long long sa = static_cast<long long>(grid.strides()[a]);
    const long long I = static_cast<long long>(idx);
    if (a == b) {
        const int i = multi[a], n = grid.shape()[a];
        const double h2 = grid.spacing()[a] * grid.spacing()[a];
        if (i > 0 && i < n - 1) return (u[I + sa] - 2.0 * u[I] + u[I - sa]) / h2;
        const long long d = i == 0 ? sa : -sa;
        return (2.0 * u[I] - 5.0 * u[I + d] + 4.0 * u[I + 2 * d] - u[I + 3 * d]) / h2;
    }
    const long long sb = static_cast<long long>(grid.strides()[b]);
    int oa[3], ob[3];
    double wa[3], wb[3];
    int ka = d1_stencil(multi[a], grid.shape()[a], oa, wa);
    int kb = d1_stencil(multi[b], grid.shape()[b], ob, wb);
    double sum = 0.0;
    for (int p = 0; p < ka; ++p)
        for (int q = 0; q < kb; ++q) sum += wa[p] * wb[q] * u[I + oa[p] * sa + ob[q] * sb];
    return sum / (grid.spacing()[a] * grid.spacing()[b]);
}

FrameCalculus::FrameCalculus(const Frame& frame) : eval_(frame) {
    F_ = static_cast<int>(frame.fields.size());
    n_ = eval_.dim();
    for (int i = 0; i < F_; ++i)
        for (int j = 0; j < F_; ++j) {
            const double w = frame.fields[i].eps_weight * frame.fields[j].eps_weight;
            if (w == 0.0) continue;
            for (int b = 0; b < n_; ++b) {
                Polynomial d(n_);
                for (int a = 0; a < n_; ++a) {
                    const auto& pia = frame.fields[i].coeff_polys[a];
                    if (pia.is_zero()) continue;
                    d += pia * frame.fields[j].coeff_polys[b].derivative(a);
                }
                if (d.is_zero()) continue;
                drift_.push_back({i, j, b, CompiledPolynomial(d * w)});
            }
        }
}

void FrameCalculus::first(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, double* out) const {
    int multi[16];
    double x[16], P[256], D[16];
    grid.unravel(idx, multi);
    grid.point(idx, x);
    eval_.matrix_at(x, P);
    for (int a = 0; a < n_; ++a) D[a] = grid_d1(grid, u, idx, multi, a);
    for (int i = 0; i < F_; ++i) {
        double s = 0.0;
        for (int a = 0; a < n_; ++a) s += P[i * n_ + a] * D[a];
        out[i] = s;
    }
}

void FrameCalculus::second(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, double* out,
                           double* grad) const {
    int multi[16];
    double x[16], D[16], H[256];
    grid.unravel(idx, multi);
    grid.point(idx, x);
    for (int a = 0; a < n_; ++a) D[a] = grid_d1(grid, u, idx, multi, a);
    for (int a = 0; a < n_; ++a)
        for (int b = a; b < n_; ++b) H[a * n_ + b] = H[b * n_ + a] = grid_d2(grid, u, idx, multi, a, b);
    contract(x, D, H, out, grad);
}

void FrameCalculus::contract(const double* x, const double* D, const double* H, double* out, double* grad) const {
    double P[256];
    eval_.matrix_at(x, P);
    // T[i][b] = sum_a P[i][a] H[a][b]
    double T[256];
    for (int i = 0; i < F_; ++i)
        for (int b = 0; b < n_; ++b) {
            double s = 0.0;
            for (int a = 0; a < n_; ++a) s += P[i * n_ + a] * H[a * n_ + b];
            T[i * n_ + b] = s;
        }
    for (int i = 0; i < F_; ++i)
        for (int j = 0; j < F_; ++j) {
            double s = 0.0;
            for (int b = 0; b < n_; ++b) s += T[i * n_ + b] * P[j * n_ + b];
            out[i * F_ + j] = s;
        }
    for (const auto& d : drift_) out[d.i * F_ + d.j] += d.p(x) * D[d.b];
    if (grad) {
        for (int i = 0; i < F_; ++i) {
            double s = 0.0;
            for (int a = 0; a < n_; ++a) s += P[i * n_ + a] * D[a];
            grad[i] = s;
        }
    }
}

}  // namespace carnot
