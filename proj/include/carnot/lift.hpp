#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "carnot/group.hpp"
#include "carnot/heat.hpp"

namespace carnot::lift {

/// Decoupled: X_1..X_m, Y_1..Y_n horizontal. Coupled: X_1..X_m, Y_1..Y_m, eps X_i + Y_i (i > m) horizontal.
/// Both are completed to a basis by X_{m+1}..X_n.
enum class LiftFrame { Decoupled, Coupled };

/// UnitHorizontal: unit weight on every horizontal coordinate and |v_i|^{1/d(i)} on the completing
/// fields, the same functional in both frames. MinRoot: min(|w|, |w|^{1/d}) on the vertical w
/// coordinates of the coupled frame and |.|^{1/d} on every vertical coordinate of the decoupled frame.
enum class DistanceConvention { UnitHorizontal, MinRoot };

/// Coordinates of x = x0 * exp(sum v_i X_i + sum w_i (horizontal partner of Y_i)).
struct LiftCoords {
    std::vector<double> v, w;  // n entries each
};

/// The product group G x G with points (x, y), the copy Y_i of X_i acting on y.
class ProductLift {
public:
    explicit ProductLift(const CarnotGroup& base);

    const CarnotGroup& base() const { return *g_; }
    int base_dim() const { return n_; }
    int dim() const { return 2 * n_; }

    Point multiply(const Point& a, const Point& b) const;
    Point inverse(const Point& a) const;

    /// Columns are the frame fields at the identity: horizontal fields first, then X_{m+1}..X_n.
    Eigen::MatrixXd basis(LiftFrame frame, double eps) const;

    LiftCoords canonical(LiftFrame frame, double eps, const Point& x, const Point& x0) const;
    Point from_canonical(LiftFrame frame, double eps, const LiftCoords& c, const Point& x0) const;

    /// exp(T^{-1} log x), T sending decoupled-frame fields to coupled-frame fields: coupled-frame coordinates of x at the
    /// identity become decoupled-frame coordinates of the image. Linear with unit determinant.
    Point change_of_variables(double eps, const Point& x) const;
    /// The same map centred at x0: x0 * F(x0^{-1} x).
    Point change_of_variables(double eps, const Point& x, const Point& x0) const;

    double distance(LiftFrame frame, double eps, const Point& x, const Point& x0, DistanceConvention conv) const;

    /// Decoupled heat operator (eps unused) with block coefficients diag(A_HH, A), or the coupled-frame operator
    /// sum_HH a X X + sum_HH a Y Y + sum_{i>m or j>m} a (X^eps_i + Y_i)(X^eps_j + Y_j).
    heat::DiffusionOperator heat_operator(LiftFrame frame, double eps, const Eigen::MatrixXd& A) const;

private:
    const CarnotGroup* g_;
    int n_ = 0, m_ = 0;
};

/// Box grid on G x G from a base grid (x axes first).
BoxGrid product_grid(const BoxGrid& base);

struct DistanceCheck {
    double eps = 0.0;
    double identity_residual = 0.0;  // max |d_eps(x, x0) - d_0(F x, F x0)|
    double c0 = 0.0;                 // max |d_eps(x, x0) - d_0(x, x0)|
    double jacobian_error = 0.0;     // max |det DF - 1|
    std::size_t pairs = 0;
};

/// Pairs drawn uniformly from [-box, box]^{2n}.
DistanceCheck distance_check(const ProductLift& lift, double eps, std::size_t pairs, std::uint64_t seed,
                             double box = 1.0, DistanceConvention conv = DistanceConvention::UnitHorizontal);

/// Integrates the trailing axes out of a product-grid function.
std::vector<double> marginalize_values(const BoxGrid& product, const std::vector<double>& u, int base_dim);
BoxGrid marginal_grid(const BoxGrid& product, int base_dim);
heat::KernelField marginalize(const heat::KernelField& lifted, int base_dim);

/// Lift heat kernel; refuses with ResolutionTooCoarse beyond opts.cell_budget nodes.
heat::KernelField solve_lift(const ProductLift& lift, LiftFrame frame, double eps, const Eigen::MatrixXd& A,
                             const BoxGrid& grid, const heat::HeatOptions& opts);

/// max over window nodes of |G_eps(x) - G_0(F x)| relative to max G_eps (G_0 interpolated).
double kernel_identity_residual(const ProductLift& lift, double eps, const BoxGrid& grid,
                                const std::vector<double>& g_eps, const std::vector<double>& g_0, int margin = 2);

/// Abelian base only: max |G_A(x) - |det Abar^{-1/2}| G_I(Abar^{-1/2} x)| / max G_A for the decoupled-frame
/// kernels, Abar = diag(A_HH, A).
double abelian_change_of_variables_residual(const ProductLift& lift, const Eigen::MatrixXd& A, const BoxGrid& grid,
                                            double t, const heat::HeatOptions& opts, int margin = 2);

struct LiftReport {
    std::vector<DistanceCheck> distances;
    double c0_spread = 0.0;  // max c0 / min c0 across eps
};

LiftReport lift_and_verify(const ProductLift& lift, const std::vector<double>& eps_list, std::size_t pairs,
                           std::uint64_t seed, double box = 1.0,
                           DistanceConvention conv = DistanceConvention::UnitHorizontal);

}  // namespace carnot::lift
