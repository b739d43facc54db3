#pragma once

#include <cstddef>
#include <vector>

namespace carnot {

/// Uniform tensor-product node grid; row-major storage with the last axis fastest.
class BoxGrid {
public:
    BoxGrid() = default;
    BoxGrid(std::vector<int> shape, std::vector<double> lower, std::vector<double> spacing);

    /// Grid over [lower, upper] with the given node counts per axis.
    static BoxGrid from_bounds(const std::vector<double>& lower, const std::vector<double>& upper,
                               const std::vector<int>& shape);
    /// Symmetric grid [-half_width, half_width] with 2*cells+1 nodes per axis.
    static BoxGrid centered(const std::vector<double>& half_width, const std::vector<int>& cells);

    int dim() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return size_; }
    const std::vector<int>& shape() const { return shape_; }
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& spacing() const { return spacing_; }
    const std::vector<std::size_t>& strides() const { return strides_; }
    double upper(int axis) const { return lower_[axis] + spacing_[axis] * (shape_[axis] - 1); }
    double cell_volume() const;

    std::size_t index(const int* multi) const;
    void unravel(std::size_t idx, int* multi) const;
    void point(std::size_t idx, double* x) const;
    std::vector<double> point(std::size_t idx) const;
    bool on_boundary(std::size_t idx) const;

    /// Nearest node; returns false when x lies outside the box by more than half a cell.
    bool nearest(const double* x, std::size_t& idx) const;

    /// Multilinear interpolation; returns false (and 0) outside the box.
    bool interpolate(const std::vector<double>& field, const double* x, double& value) const;

private:
    std::vector<int> shape_;
    std::vector<double> lower_, spacing_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

}  // namespace carnot
