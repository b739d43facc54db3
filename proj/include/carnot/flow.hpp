#pragma once

#include <Eigen/Sparse>
#include <optional>
#include <string>
#include <vector>

#include "carnot/expression.hpp"
#include "carnot/grid.hpp"
#include "carnot/grid_calculus.hpp"
#include "carnot/group.hpp"

namespace carnot::flow {

enum class Mode { TvFlow, MeanCurvatureFlow };
enum class Form { Divergence, NonDivergence };

struct FlowProblem {
    const CarnotGroup* group = nullptr;
    double eps = 1.0;  // 0 selects the horizontal-only equation
    BoxGrid grid;
    Expression phi;  // boundary and initial datum
    double horizon = 0.1;
    Mode mode = Mode::TvFlow;
    Form form = Form::Divergence;
    std::vector<double> save_times;  // defaults to {horizon}
    bool zero_fill = false;          // interior starts at 0 instead of phi
};

/// Throws InvalidArgument on a missing group, eps outside [0, 1], dimension mismatch, a grid axis
/// with fewer than 4 nodes, non-finite phi or unsorted save times.
void validate(const FlowProblem& p);

/// Spatial discretization of the graph flow on a box.
///
/// The divergence form is the lumped-mass gradient of the discrete energy
/// E(u) = sum over cells and Gauss points of w |cell| sqrt(1 + |P(x) grad u_h|^2), u_h the
/// multilinear interpolant and P the weighted frame matrix. The non-divergence form contracts
/// a_ij(grad_eps u) with second frame derivatives from centred differences.
class FlowOperator {
public:
    /// `quadrature` Gauss points (2..5) per cell on the axes the frame coefficients depend on; 0 picks
    /// 3 when at most two axes are involved and 5 otherwise. The other axes use 2.
    FlowOperator(const CarnotGroup& g, double eps, const BoxGrid& grid, int quadrature = 0);

    const CarnotGroup& group() const { return *g_; }
    const BoxGrid& grid() const { return grid_; }
    double eps() const { return eps_; }
    int num_fields() const { return F_; }
    int num_quadrature_points() const { return Q_; }
    const FrameCalculus& calculus() const { return calc_; }        // eps frame
    const FrameCalculus& full_calculus() const { return full_; }   // unit-weight frame, all fields
    const std::vector<double>& lumped_mass() const { return mass_; }
    bool interior(std::size_t idx) const { return interior_[idx] != 0; }

    double energy(const std::vector<double>& u) const;
    /// dE/du at every node; returns E(u).
    double energy_gradient(const std::vector<double>& u, std::vector<double>& grad) const;

    /// -M^-1 dE/du on interior nodes, 0 on the boundary.
    std::vector<double> rhs_divergence(const std::vector<double>& u, double* energy = nullptr) const;
    /// sum a_ij(grad_eps u) X_i X_j u on interior nodes, 0 on the boundary.
    std::vector<double> rhs_nondivergence(const std::vector<double>& u) const;
    /// Right-hand side of the evolution for the given mode and form.
    std::vector<double> rhs(const std::vector<double>& u, Mode mode, Form form, double* energy = nullptr) const;

    /// Gershgorin bound on the spectral radius of M^-1 K over interior rows, K the stiffness of
    /// (1/2) sum |P grad u_h|^2. Explicit steps are stable for dt < 2 / bound.
    double stiffness_bound() const;
    double stable_dt() const { return 2.0 / stiffness_bound(); }

    /// Stiffness with Gauss-point weights 1/W(u): the linearization used by the lagged-diffusivity
    /// iteration. Full N x N matrix.
    Eigen::SparseMatrix<double> weighted_stiffness(const std::vector<double>& u) const;

    /// grad_eps u at every node (num_fields values per node).
    std::vector<double> node_gradient(const std::vector<double>& u) const;
    /// max over nodes of |grad_eps u| and |grad_1 u|.
    double sup_grad_eps(const std::vector<double>& u) const;
    double sup_grad_1(const std::vector<double>& u) const;
    /// |grad_1 u| at every node.
    std::vector<double> grad_1_norm(const std::vector<double>& u) const;

    std::vector<double> sample(const Expression& f) const;

private:
    template <class Body>
    void for_each_cell(Body&& body) const;

    const CarnotGroup* g_;
    double eps_;
    BoxGrid grid_;
    Frame frame_;
    FrameCalculus calc_, full_;
    int F_ = 0, n_ = 0, NK_ = 0, Q_ = 0;
    std::size_t ncells_ = 0;
    double vol_ = 0.0;
    std::vector<long long> corner_off_;  // node offsets of the cell corners
    std::vector<double> qw_;             // Gauss weights (products, unit cell)
    std::vector<double> G_;              // [q][k][a] basis gradients scaled by 1/h_a
    std::vector<int> dep_axes_;
    std::vector<std::size_t> dep_stride_;
    std::vector<double> Pcache_;  // [dep cell][q][F][n]
    std::vector<double> mass_;
    std::vector<char> interior_;
    mutable double bound_ = -1.0;
};

struct FlowState {
    std::vector<double> u;
    double t = 0.0;
};

FlowState initial_state(const FlowProblem& p, const FlowOperator& op);

/// One explicit Euler step; boundary nodes keep their values. Throws CFLViolation when dt exceeds
/// 2 / stiffness_bound(). Returns the energy of the state before the step.
double step(const FlowOperator& op, const FlowProblem& p, FlowState& s, double dt);

struct MonitorRow {
    double t = 0.0;
    double sup_grad_eps = 0.0;
    double sup_grad_1 = 0.0;
    double tv_energy = 0.0;
    double dt_norm = 0.0;  // max |du/dt|
    double comparison_violation = 0.0;
};

struct RunOptions {
    double cfl_safety = 0.4;
    double dt = 0.0;  // 0: cfl_safety * stable_dt
    bool store = true;
    /// Companion run with this datum; comparison_violation = max(u - u_upper, 0).
    std::optional<Expression> upper_phi;
    double energy_tolerance = 1e-13;  // relative rounding allowance in the monotonicity check
    double blowup = 1e8;
    int interior_margin = 1;  // nodes this close to the boundary are excluded from the interior set
};

struct FlowRun {
    std::vector<double> times;
    std::vector<std::vector<double>> saves;        // empty unless store
    std::vector<std::vector<double>> upper_saves;  // companion run
    std::vector<MonitorRow> monitors;              // row 0 is t = 0, then one per save
    double dt = 0.0, dt_bound = 0.0;
    std::size_t steps = 0;
    std::vector<double> energy_trace;  // every step
    bool energy_monotone = true;
    double max_energy_increase = 0.0;  // relative
    /// sup over interior nodes of |grad_1 u| and sup over the parabolic boundary up to the save of
    /// |grad_1 u| + |du/dt|, per save.
    std::vector<double> interior_grad, boundary_bound;
    double gradient_bound_ratio = 0.0;  // max interior_grad / boundary_bound
    double max_comparison_violation = 0.0;
    double max_principle_excess = 0.0;  // how far u leaves [min u0, max u0]
    std::vector<double> final_u;
};

/// Explicit integration to the horizon with saves at the requested times. Throws Divergence on
/// non-finite values or growth beyond opts.blowup.
FlowRun run_flow(const FlowProblem& p, const RunOptions& opts = {});

void write_monitor_csv(const std::string& path, const std::vector<MonitorRow>& rows);
/// One snapshot per save: <prefix>_<k>.bin/.hdr.
void write_trajectory(const std::string& prefix, const FlowProblem& p, const FlowRun& run);

struct SteadyOptions {
    std::size_t max_iterations = 200;
    double cg_tolerance = 1e-12;
};

struct SteadyResult {
    std::vector<double> u;
    double residual = 0.0;  // max |h_eps(u)| on interior nodes (divergence form)
    std::size_t iterations = 0;
    std::vector<double> residual_trace;
    std::vector<double> energy_trace;
};

/// Minimal graph with boundary values phi, by lagged-diffusivity iteration on the discrete energy.
/// Throws BudgetExhausted when the residual does not reach tol (always for tol <= 0).
SteadyResult steady_state(const FlowProblem& p, double tol, const SteadyOptions& opts = {});

struct SweepOptions {
    RunOptions run;
    double window_fraction = 0.5;  // central part of each axis used for the sup differences
    int jobs = 1;                  // eps values solved concurrently
};

struct SweepReport {
    std::vector<double> eps;
    std::vector<double> consecutive_diff;  // sup over the window of |u_k - u_{k+1}| at the horizon
    bool monotone = false;                 // consecutive_diff strictly decreasing
    double data_lipschitz = 0.0;           // sup |grad_1 phi|
    std::vector<double> sup_grad_1;        // sup over saves and nodes, per eps
    std::vector<double> grad_constant;     // sup_grad_1 / data_lipschitz
    double constant_spread = 0.0;          // max / min of grad_constant
    std::vector<std::vector<double>> final_u;
};

SweepReport eps_sweep(const FlowProblem& tmpl, const std::vector<double>& eps_list, const SweepOptions& opts = {});

/// w = Phi(Pi), Pi(x) = sum a_i (x_i - x0_i), Phi(s) = log(1 + k s) / nu.
struct Barrier {
    std::vector<double> x0;
    std::vector<double> a;
    double nu = 1.0, k = 1.0;

    double plane(const double* x) const;
    double value(const double* x) const;
    double dphi(double s) const;
    double d2phi(double s) const;
    /// Phi'' + nu Phi'^2 at s.
    double ode_residual(double s) const;
};

/// Inward normal plane of the box at a boundary point: the normalized sum of the inward normals of
/// the faces containing x0, scaled so that the first two layers have unit length.
/// Throws NotSupportingPlane when x0 is not on the boundary.
std::vector<double> supporting_plane(const CarnotGroup& g, const BoxGrid& grid, const std::vector<double>& x0);
/// Throws NotSupportingPlane unless Pi(x0) = 0 and Pi >= 0 on every node.
void check_supporting_plane(const BoxGrid& grid, const std::vector<double>& x0, const std::vector<double>& a);

struct BarrierOptions {
    double radius = 0.25;  // neighbourhood: nodes with max_i |x_i - x0_i| <= radius
    bool shrink = true;    // on failure halve the radius, down to one grid spacing
    std::vector<double> k_values;   // default 2^0 .. 2^10
    std::vector<double> nu_values;  // default 10^-2 .. 10^2 in quarter decades
    double sign_tolerance = 1e-12;
    std::optional<std::vector<double>> plane;  // default supporting_plane()
};

struct BarrierReport {
    Barrier barrier;
    bool step_two = true;
    double plane_hessian_residual = 0.0;     // max |a_ij X_i X_j Pi|
    double barrier_excess_max = 0.0;          // max of Phi''/Phi'^2 F + b
    double q_max = 0.0;               // max Q(w)
    double lateral_margin = 0.0;      // min (w - v) on the lateral part of the neighbourhood boundary
    double comparison_margin = 0.0;   // min (w - v) over the whole neighbourhood
    double quotient_w = 0.0;          // sup w / dist_1(x, x0)
    double quotient_v = 0.0;          // sup v / dist_1(x, x0)
    double ode_residual = 0.0;        // max |Phi'' + nu Phi'^2| over the neighbourhood
    double radius = 0.0;              // neighbourhood radius that succeeded
    std::size_t neighbourhood_nodes = 0;
    int pairs_tried = 0;
};

/// Checks the barrier inequalities on the neighbourhood of x0 against the saved states of a run
/// (v = u - phi). Q(w) = a_ij(grad(w + phi)) X_i X_j (w + phi) is evaluated analytically.
/// Throws NotSupportingPlane or BarrierSearchFailed.
BarrierReport barrier_verify(const FlowProblem& p, const FlowRun& run, const std::vector<double>& x0,
                             const BarrierOptions& opts = {});

struct DerivativeResidual {
    double l2 = 0.0;
    double linf = 0.0;
    std::size_t nodes = 0;
};

struct DerivativeOptions {
    int field = 1;              // 0: v = du/dt; h >= 1: v = X_h u (1-based)
    Side side = Side::Right;    // frame of X_h
    double window_fraction = 0.5;
};

/// Residual of dv/dt = a_ij X_i X_j v + d_k a_ij(grad u) X_i X_j u X_k v for v a derivative of the
/// flow, from saves at t, t + delta (and t + 2 delta for field 0). Time derivatives are forward
/// differences, so the residual is first order in delta.
DerivativeResidual derivative_residual(const FlowOperator& op, const std::vector<std::vector<double>>& saves,
                                       double delta, const DerivativeOptions& opts = {});

}  // namespace carnot::flow
