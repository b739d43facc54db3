#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "carnot/polynomial.hpp"

namespace carnot {

/// A point in exponential coordinates.
class Point {
public:
    Point() = default;
    explicit Point(std::size_t n, double value = 0.0) : x_(n, value) {}
    Point(std::initializer_list<double> values) : x_(values) {}
    explicit Point(std::vector<double> values) : x_(std::move(values)) {}

    std::size_t size() const { return x_.size(); }
    double& operator[](std::size_t i) { return x_[i]; }
    double operator[](std::size_t i) const { return x_[i]; }
    const double* data() const { return x_.data(); }
    double* data() { return x_.data(); }
    std::span<const double> span() const { return x_; }
    const std::vector<double>& values() const { return x_; }
    auto begin() const { return x_.begin(); }
    auto end() const { return x_.end(); }

    bool operator==(const Point&) const = default;

private:
    std::vector<double> x_;
};

double max_abs_diff(const Point& a, const Point& b);

struct BracketEntry {
    int i = 0;  // 0-based
    int j = 0;
    int k = 0;
    double value = 0.0;
};

/// Raw stratified Lie algebra data: layer sizes and structure constants b_ij^k.
struct CarnotGroupSpec {
    std::string id;
    std::vector<int> layer_dims;
    std::vector<BracketEntry> brackets;  // explicit entries; missing partners are filled antisymmetrically

    int dim() const;
    int step() const { return static_cast<int>(layer_dims.size()); }
    int horizontal_dim() const { return layer_dims.empty() ? 0 : layer_dims.front(); }
    std::vector<int> degrees() const;
};

struct SpecViolation {
    std::string kind;  // AntisymmetryViolation, JacobiViolation, ...
    int i = -1, j = -1, k = -1;  // 0-based indices of the offending entry or triple
    double residual = 0.0;
    std::string message;
};

struct ValidationReport {
    std::vector<SpecViolation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

/// Dense b[i][j][k] built from the entry list (antisymmetric completion of unpaired entries).
std::vector<double> dense_structure_constants(const CarnotGroupSpec& spec);

ValidationReport validate_spec(const CarnotGroupSpec& spec, double tol = 1e-12);

enum class Side { Left, Right };

/// First-order operator sum_j weight * p^j(x) d/dx_j with polynomial coefficients.
struct FrameField {
    int base_index = 0;
    std::vector<Polynomial> coeff_polys;
    double eps_weight = 1.0;

    /// weight * p(x)
    std::vector<double> vector_at(std::span<const double> x) const;
    Polynomial apply(const Polynomial& f) const;
};

struct Frame {
    Side side = Side::Left;
    double eps = 1.0;
    std::vector<FrameField> fields;
};

/// Validated, immutable Carnot group with a precomputed symbolic group law.
class CarnotGroup {
public:
    explicit CarnotGroup(CarnotGroupSpec spec);

    const CarnotGroupSpec& spec() const { return spec_; }
    const std::string& id() const { return spec_.id; }
    int dim() const { return n_; }
    int horizontal_dim() const { return m_; }
    int step() const { return r_; }
    int degree(int i) const { return degrees_[i]; }
    const std::vector<int>& degrees() const { return degrees_; }

    /// b_ij^k, 0-based.
    double structure_constant(int i, int j, int k) const { return b_[(i * n_ + j) * n_ + k]; }
    std::vector<double> bracket(std::span<const double> a, std::span<const double> b) const;

    Point multiply(const Point& x, const Point& y) const;
    Point inverse(const Point& x) const;
    Point dilate(const Point& x, double s) const;

    /// Components of the product law as polynomials in (x_1..x_n, y_1..y_n).
    const std::vector<Polynomial>& product_law() const { return law_; }

    /// Unit-weight invariant frame; ε scales fields of degree >= 2, ε = 0 keeps the horizontal fields.
    Frame build_frames(Side side, double eps = 1.0) const;

    /// c_ij^h: coefficient of x_j in the frame polynomial p_i^h (left frame).
    double frame_constant(int i, int j, int h) const;

private:
    void build_law();

    CarnotGroupSpec spec_;
    int n_ = 0, m_ = 0, r_ = 0;
    std::vector<int> degrees_;
    std::vector<double> b_;
    std::vector<Polynomial> law_;
    std::vector<CompiledPolynomial> law_compiled_;
    std::vector<std::vector<Polynomial>> left_;   // left_[i][j] = p_i^j
    std::vector<std::vector<Polynomial>> right_;
};

/// Numeric evaluation of a weighted frame: row i holds weight_i * p_i(x).
class FrameEvaluator {
public:
    FrameEvaluator() = default;
    explicit FrameEvaluator(const Frame& frame);

    int num_fields() const { return num_fields_; }
    int dim() const { return dim_; }
    void matrix_at(const double* x, double* out) const;  // num_fields x dim, row-major
    /// Variables that any coefficient depends on.
    const std::vector<int>& dependencies() const { return deps_; }
    double weight(int f) const { return weights_[f]; }

private:
    int num_fields_ = 0, dim_ = 0;
    std::vector<double> weights_;
    struct Entry {
        int field, comp;
        bool constant;
        double value;
        CompiledPolynomial poly;
    };
    std::vector<Entry> entries_;
    std::vector<int> deps_;
};

}  // namespace carnot
