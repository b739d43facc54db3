#pragma once

#include <vector>

#include "carnot/grid.hpp"
#include "carnot/group.hpp"

namespace carnot {

/// Coordinate derivatives of grid functions: centred in the interior, one-sided second order on the
/// boundary. Exact on quadratics (axes need at least 4 nodes).
double grid_d1(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, const int* multi, int a);
double grid_d2(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, const int* multi, int a, int b);

/// Frame derivatives X_i u and X_i X_j u of grid functions through the frame polynomials.
class FrameCalculus {
public:
    FrameCalculus() = default;
    explicit FrameCalculus(const Frame& frame);

    int num_fields() const { return F_; }
    int dim() const { return n_; }
    const FrameEvaluator& evaluator() const { return eval_; }

    /// out[i] = X_i u at node idx.
    void first(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, double* out) const;
    /// out[i*F + j] = X_i X_j u at node idx (also fills grad with X_i u when non-null).
    void second(const BoxGrid& grid, const std::vector<double>& u, std::size_t idx, double* out,
                double* grad = nullptr) const;
    /// Same contraction from coordinate gradient D and Hessian H (n x n) at the point x.
    void contract(const double* x, const double* D, const double* H, double* out, double* grad = nullptr) const;

private:
    int F_ = 0, n_ = 0;
    FrameEvaluator eval_;
    struct Drift {
        int i, j, b;
        CompiledPolynomial p;  // w_i w_j X_i(p_j^b) (unit-weight derivative)
    };
    std::vector<Drift> drift_;
};

}  // namespace carnot
