#include "carnot/grid.hpp"

#include <algorithm>
#include <cmath>

#include "carnot/error.hpp"

namespace carnot {

BoxGrid::BoxGrid(std::vector<int> shape, std::vector<double> lower, std::vector<double> spacing)
    : shape_(std::move(shape)), lower_(std::move(lower)), spacing_(std::move(spacing)) {
    const int d = dim();
    if (static_cast<int>(lower_.size()) != d || static_cast<int>(spacing_.size()) != d) {
        throw Error(ErrorKind::InvalidArgument, "grid: inconsistent axis counts");
    }
    strides_.assign(d, 1);
    size_ = 1;
    for (int a = d - 1; a >= 0; --a) {
        if (shape_[a] < 1 || !(spacing_[a] > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid: bad axis");
        strides_[a] = size_;
        size_ *= static_cast<std::size_t>(shape_[a]);
    }
}

BoxGrid BoxGrid::from_bounds(const std::vector<double>& lower, const std::vector<double>& upper,
                             const std::vector<int>& shape) {
    std::vector<double> h(lower.size());
    for (std::size_t a = 0; a < lower.size(); ++a) h[a] = (upper[a] - lower[a]) / (shape[a] - 1);
    return BoxGrid(shape, lower, h);
}

BoxGrid BoxGrid::centered(const std::vector<double>& half_width, const std::vector<int>& cells) {
    std::vector<int> shape(half_width.size());
    std::vector<double> lower(half_width.size()), h(half_width.size());
    for (std::size_t a = 0; a < half_width.size(); ++a) {
        shape[a] = 2 * cells[a] + 1;
        h[a] = half_width[a] / cells[a];
        lower[a] = -half_width[a];
    }
    return BoxGrid(shape, lower, h);
}

double BoxGrid::cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) v *= h;
    return v;
}

std::size_t BoxGrid::index(const int* multi) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim(); ++a) idx += static_cast<std::size_t>(multi[a]) * strides_[a];
    return idx;
}

void BoxGrid::unravel(std::size_t idx, int* multi) const {
    for (int a = 0; a < dim(); ++a) {
        multi[a] = static_cast<int>(idx / strides_[a]);
        idx %= strides_[a];
    }
}

void BoxGrid::point(std::size_t idx, double* x) const {
    for (int a = 0; a < dim(); ++a) {
        int i = static_cast<int>(idx / strides_[a]);
        idx %= strides_[a];
        x[a] = lower_[a] + spacing_[a] * i;
    }
}

std::vector<double> BoxGrid::point(std::size_t idx) const {
    std::vector<double> x(dim());
    point(idx, x.data());
    return x;
}

bool BoxGrid::on_boundary(std::size_t idx) const {
    for (int a = 0; a < dim(); ++a) {
        int i = static_cast<int>(idx / strides_[a]);
        idx %= strides_[a];
        if (i == 0 || i == shape_[a] - 1) return true;
    }
    return false;
}

bool BoxGrid::nearest(const double* x, std::size_t& idx) const {
    idx = 0;
    for (int a = 0; a < dim(); ++a) {
        double s = (x[a] - lower_[a]) / spacing_[a];
        long i = std::lround(s);
        if (s < -0.5 - 1e-9 || s > shape_[a] - 0.5 + 1e-9) return false;
        i = std::clamp<long>(i, 0, shape_[a] - 1);
        idx += static_cast<std::size_t>(i) * strides_[a];
    }
    return true;
}

bool BoxGrid::interpolate(const std::vector<double>& field, const double* x, double& value) const {
    const int d = dim();
    std::size_t base = 0;
    double frac[16];
    for (int a = 0; a < d; ++a) {
        double s = (x[a] - lower_[a]) / spacing_[a];
        if (s < -1e-12 || s > shape_[a] - 1 + 1e-12) {
            value = 0.0;
            return false;
        }
        int i = static_cast<int>(std::floor(s));
        i = std::clamp(i, 0, std::max(0, shape_[a] - 2));
        frac[a] = shape_[a] == 1 ? 0.0 : std::clamp(s - i, 0.0, 1.0);
        base += static_cast<std::size_t>(i) * strides_[a];
    }
    double sum = 0.0;
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
        double w = 1.0;
        std::size_t idx = base;
        for (int a = 0; a < d; ++a) {
            if (corner & (1u << a)) {
                w *= frac[a];
                if (shape_[a] > 1) idx += strides_[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if (w != 0.0) sum += w * field[idx];
    }
    value = sum;
    return true;
}

}  // namespace carnot
