#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "carnot/grid.hpp"
#include "carnot/group.hpp"

namespace carnot::heat {

/// Constant-coefficient operator sum a_ij X_i^eps X_j^eps with coercivity constants.
struct FrozenOperator {
    const CarnotGroup* group = nullptr;
    Eigen::MatrixXd A;
    double eps = 1.0;
    double Lambda = 1.0, C1 = 1.0, C2 = 1.0;
    /// Use only the horizontal fields (the eps = 0 operator); A is then read on its first-layer block.
    bool horizontal_only = false;
};

/// Lambda = max(lambda_max, 1/lambda_min), C1 = lambda_min, C2 = lambda_max.
FrozenOperator make_operator(const CarnotGroup& g, const Eigen::MatrixXd& A, double eps, bool horizontal_only = false);

/// Lambda^-1 |xi_H|^2 + C1 |xi_V|^2 <= xi^T A xi <= Lambda |xi_H|^2 + C2 |xi_V|^2.
bool in_coercivity_class(const CarnotGroup& g, const Eigen::MatrixXd& A, double Lambda, double C1, double C2);

/// sum_{k,l} B_kl V_k V_l with divergence-free polynomial fields V_k on R^N.
struct DiffusionOperator {
    int dim = 0;
    std::vector<std::vector<Polynomial>> fields;
    Eigen::MatrixXd B;

    /// Coordinate diffusion matrix K_ab(x) = sum B_kl V_k^a V_l^b.
    std::vector<std::vector<Polynomial>> diffusion_matrix() const;
};

/// Throws DegenerateEpsilonRequiresLift for eps = 0 unless horizontal_only is set.
DiffusionOperator diffusion_operator(const FrozenOperator& op);

struct HeatOptions {
    std::vector<double> save_times;
    double cfl_safety = 0.4;
    double dt = 0.0;                 // 0: derived from the CFL bound and the safety factor
    double mollifier_width = 2.0;    // bump standard deviation in grid spacings
    /// Replaces the bump when set; evaluated at interior nodes, boundary nodes stay zero.
    std::function<double(const double* x)> initial;
    double mass_tolerance = 1e-3;
    double cell_budget = 3e7;
    bool store = true;
    std::function<void(double t, const std::vector<double>& u)> on_save;
};

struct KernelField {
    BoxGrid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    std::vector<double> mass;
    double trusted_until = 0.0;  // last save time whose mass stays within tolerance
    double dt = 0.0;
    double dt_bound = 0.0;
    std::size_t steps = 0;
    double eps = 1.0;
    Eigen::MatrixXd A;
};

/// Upper bound on the spectral radius of the discrete operator (max absolute row sum).
double operator_norm_bound(const DiffusionOperator& op, const BoxGrid& grid);

/// Explicit Euler from a normalized Gaussian bump at the origin, Dirichlet-zero boundary.
KernelField solve_heat(const DiffusionOperator& op, const BoxGrid& grid, const HeatOptions& opts);
KernelField solve_heat(const FrozenOperator& op, const BoxGrid& grid, const HeatOptions& opts);

/// One application of the discrete operator (boundary rows left at zero).
std::vector<double> apply_operator(const DiffusionOperator& op, const BoxGrid& grid, const std::vector<double>& u);

struct EnvelopeMetric {
    std::function<double(const double* x)> dist;       // distance to the origin
    std::function<double(double radius)> ball_volume;  // |B(0, radius)|
};

struct EnvelopeOptions {
    double q_max = 4.0;           // fit region d^2/t <= q_max
    double t_min = 0.0;           // only saved times in [t_min, trusted_until]
    int boundary_margin = 2;      // skip nodes this close to the boundary
    double time_offset = 0.0;     // added to saved times (mollifier age)
};

struct EnvelopePoint {
    double t, q, gamma, scaled, c_needed;
};

struct EnvelopeFit {
    double C = 0.0;
    double C_upper = 0.0;  // smallest C for the upper bound alone
    double C_lower = 0.0;  // smallest C for the lower bound alone
    std::vector<EnvelopePoint> points;
};

/// Smallest C with C^-1 e^{-C q} <= Gamma |B(sqrt t)| <= C e^{-q/C} on the fit region.
EnvelopeFit envelope_fit(const KernelField& k, const EnvelopeMetric& metric, const EnvelopeOptions& opts);

/// Smallest C for a single point (scaled = Gamma |B(sqrt t)|).
double envelope_constant(double q, double scaled, double* c_upper = nullptr, double* c_lower = nullptr);

struct LipschitzLevel {
    double t, sup_diff, ratio;
};
struct LipschitzReport {
    double norm_diff = 0.0;  // Frobenius norm of A1 - A2
    std::vector<LipschitzLevel> levels;
};

/// Solves both kernels with a common time step and reports sup|G1 - G2| / |A1 - A2| per level.
LipschitzReport kernel_A_lipschitz(const FrozenOperator& op1, const FrozenOperator& op2, const BoxGrid& grid,
                                   const HeatOptions& opts, int window_margin = 2);

struct ConvergenceRow {
    double eps;
    double sup_diff;  // sup over the window of |G_eps - G_0| at the final saved time
};
struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    bool monotone = true;
};

/// Compares G_eps for each eps against the horizontal-operator kernel on a shared grid and time step.
ConvergenceReport eps_convergence(const CarnotGroup& g, const Eigen::MatrixXd& A, const std::vector<double>& eps_list,
                                  const BoxGrid& grid, const HeatOptions& opts, const std::vector<double>& window);

/// (f * h)(x) = sum_y f(y) h(y^{-1} x) dV over grid nodes, h interpolated; evaluated at the given nodes.
std::vector<double> group_convolution(const CarnotGroup& g, const BoxGrid& grid, const std::vector<double>& f,
                                      const std::vector<double>& h, const std::vector<std::size_t>& at);

/// Frame derivative constants: sup of |X_i G| sqrt(t) |B| / e^{-q/C} and |X_i X_j G| t |B| / e^{-q/C}.
struct DerivativeBounds {
    double first = 0.0, second = 0.0;
};
DerivativeBounds derivative_envelope(const KernelField& k, const Frame& frame, const EnvelopeMetric& metric,
                                     double C, const EnvelopeOptions& opts);

}  // namespace carnot::heat
