#include "carnot/automorphism.hpp"

#include <cmath>

#include "carnot/error.hpp"

namespace carnot {

std::vector<double> LayeredAutomorphism::apply_algebra(std::span<const double> v) const {
    const auto n = full.rows();
    std::vector<double> out(n, 0.0);
    for (Eigen::Index l = 0; l < n; ++l) {
        if (v[l] == 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) out[j] += v[l] * full(l, j);
    }
    return out;
}

Point LayeredAutomorphism::apply(const Point& x) const {
    return Point(apply_algebra(x.span()));
}

LayeredAutomorphism extend_automorphism(const CarnotGroup& g, const Eigen::MatrixXd& A, double tol) {
    const int n = g.dim(), m = g.horizontal_dim(), r = g.step();
    if (A.rows() != m || A.cols() != m) throw Error(ErrorKind::InvalidArgument, "A must be m x m");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::NotPositiveDefinite, "A is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "A is not positive definite");

    std::vector<int> start(r + 1, 0);
    for (int s = 0; s < r; ++s) start[s + 1] = start[s] + g.spec().layer_dims[s];

    LayeredAutomorphism T;
    T.source = A;
    T.full = Eigen::MatrixXd::Zero(n, n);
    T.full.topLeftCorner(m, m) = A;

    std::vector<double> ei(n), ep(n);
    for (int s = 1; s < r; ++s) {
        // express each X_l of layer s+1 through brackets [X_i, X_p], d(i) = 1, d(p) = s
        const int rows = g.spec().layer_dims[s];
        std::vector<std::pair<int, int>> pairs;
        for (int i = start[0]; i < start[1]; ++i)
            for (int p = start[s - 1]; p < start[s]; ++p) pairs.emplace_back(i, p);
        Eigen::MatrixXd M(rows, static_cast<Eigen::Index>(pairs.size()));
        for (std::size_t c = 0; c < pairs.size(); ++c) {
            for (int k = 0; k < rows; ++k) M(k, c) = g.structure_constant(pairs[c].first, pairs[c].second, start[s] + k);
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
        for (int k = 0; k < rows; ++k) {
            Eigen::VectorXd rhs = Eigen::VectorXd::Unit(rows, k);
            Eigen::VectorXd coef = cod.solve(rhs);
            Eigen::VectorXd image = Eigen::VectorXd::Zero(n);
            for (std::size_t c = 0; c < pairs.size(); ++c) {
                if (std::abs(coef[c]) < 1e-15) continue;
                for (int a = 0; a < n; ++a) {
                    ei[a] = T.full(pairs[c].first, a);
                    ep[a] = T.full(pairs[c].second, a);
                }
                auto br = g.bracket(ei, ep);
                for (int a = 0; a < n; ++a) image[a] += coef[c] * br[a];
            }
            T.full.row(start[s] + k) = image.transpose();
        }
    }
    for (int s = 0; s < r; ++s) {
        const int d = g.spec().layer_dims[s];
        T.blocks.push_back(T.full.block(start[s], start[s], d, d));
    }
    double res = bracket_preservation_residual(g, T);
    if (res > tol) {
        throw Error(ErrorKind::NotExtendable,
                    "the first-layer map does not extend to a Lie algebra morphism (residual " + std::to_string(res) + ")");
    }
    return T;
}

double bracket_preservation_residual(const CarnotGroup& g, const LayeredAutomorphism& T) {
    const int n = g.dim();
    double worst = 0.0;
    std::vector<double> ea(n), eb(n), ta(n), tb(n);
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            std::fill(ea.begin(), ea.end(), 0.0);
            std::fill(eb.begin(), eb.end(), 0.0);
            ea[a] = 1.0;
            eb[b] = 1.0;
            auto lhs = T.apply_algebra(g.bracket(ea, eb));
            for (int c = 0; c < n; ++c) {
                ta[c] = T.full(a, c);
                tb[c] = T.full(b, c);
            }
            auto rhs = g.bracket(ta, tb);
            for (int c = 0; c < n; ++c) worst = std::max(worst, std::abs(lhs[c] - rhs[c]));
        }
    return worst;
}

Eigen::MatrixXd frame_basis(const Frame& frame, int dim) {
    Eigen::MatrixXd B(dim, static_cast<Eigen::Index>(frame.fields.size()));
    std::vector<double> zero(dim, 0.0);
    for (std::size_t f = 0; f < frame.fields.size(); ++f) {
        auto v = frame.fields[f].vector_at(zero);
        for (int a = 0; a < dim; ++a) B(a, static_cast<Eigen::Index>(f)) = v[a];
    }
    return B;
}

std::vector<double> canonical_coords(const CarnotGroup& g, const Point& x, const Point& x0, const Eigen::MatrixXd& basis) {
    const int n = g.dim();
    if (basis.rows() != n || basis.cols() != n) throw Error(ErrorKind::FrameNotSpanning, "frame has fewer than n fields");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
    if (!lu.isInvertible()) throw Error(ErrorKind::FrameNotSpanning, "frame does not span the tangent space");
    Point rel = g.multiply(g.inverse(x0), x);
    Eigen::VectorXd rhs(n);
    for (int a = 0; a < n; ++a) rhs[a] = rel[a];
    Eigen::VectorXd v = lu.solve(rhs);
    return std::vector<double>(v.data(), v.data() + n);
}

std::vector<double> canonical_coords(const CarnotGroup& g, const Point& x, const Point& x0, const Frame& frame) {
    return canonical_coords(g, x, x0, frame_basis(frame, g.dim()));
}

Point exp_from(const CarnotGroup& g, const Point& x0, std::span<const double> v, const Eigen::MatrixXd& basis) {
    const int n = g.dim();
    Point step(n);
    for (int a = 0; a < n; ++a) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < basis.cols(); ++c) s += basis(a, c) * v[c];
        step[a] = s;
    }
    return g.multiply(x0, step);
}

}  // namespace carnot
