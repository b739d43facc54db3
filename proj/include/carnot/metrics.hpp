#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "carnot/group.hpp"
#include "carnot/grid.hpp"

namespace carnot::metrics {

/// Homogeneous gauge |x| = (sum |x_i|^{p/d(i)})^{1/p}, p = 2 r!.
double gauge_norm(const CarnotGroup& g, const Point& x);
/// d_0(x, y) = |y^{-1} x|.
double gauge_distance(const CarnotGroup& g, const Point& x, const Point& y);

/// N_eps(x)^2 = sum_{d=1} x_i^2 + min(sum_{k>=2} (sum_{d=k} x_i^2)^{1/k}, eps^{-2} sum_{d>=2} x_i^2).
double n_eps(const CarnotGroup& g, const Point& x, double eps);
/// d_{G,eps}(x, y) = N_eps(y^{-1} x).
double d_g_eps(const CarnotGroup& g, const Point& x, const Point& y, double eps);

/// Per-axis half widths of a box containing every point at sigma_eps distance < r from the origin.
std::vector<double> reachable_half_widths(const CarnotGroup& g, double eps, double r);
/// Per-axis half widths of a box containing the N_eps ball of radius r.
std::vector<double> pseudo_ball_half_widths(const CarnotGroup& g, double eps, double r);

/// Shortest paths on a box lattice approximating the eps-Riemannian distance.
/// Moves are the primitive integer offsets with entries in [-radius, radius]; each move costs the
/// sigma_eps length of the straight coordinate segment, evaluated through the frame at its midpoint.
class LatticeGeodesy {
public:
    LatticeGeodesy(const CarnotGroup& g, double eps, BoxGrid grid, int stencil_radius = 2);

    const BoxGrid& grid() const { return grid_; }
    double eps() const { return eps_; }
    std::size_t num_moves() const { return moves_.size(); }

    /// Cost of the move from node `from` by offset number `move` (infinite if it leaves the box).
    double edge_cost(std::size_t from, std::size_t move) const;

    /// Dijkstra from a node; stops early once `target` is settled (if given).
    std::vector<double> distance_field(std::size_t source, std::size_t target = static_cast<std::size_t>(-1)) const;

    /// Distance between the nodes nearest to x and y. Throws OutOfDomain outside the box.
    double distance(const Point& x, const Point& y) const;

private:
    std::size_t snap(const Point& x) const;

    const CarnotGroup* g_;
    double eps_;
    BoxGrid grid_;
    std::vector<std::vector<int>> moves_;
    std::vector<long long> move_shift_;
    struct Coupling {
        int i;
        CompiledPolynomial p;
    };
    std::vector<std::vector<Coupling>> couplings_;  // per target coordinate j: (i, p_i^j), i != j
    std::vector<double> inv_weight_;
};

double d_eps_lattice(const Point& x, const Point& y, const LatticeGeodesy& geo);

struct BallSampler {
    enum class Membership { Pseudo, Lattice };
    Membership membership = Membership::Pseudo;
    std::size_t samples = 100000;
    std::uint64_t seed = 12345;
    int lattice_cells = 24;     // nodes per half width (lattice membership)
    int stencil_radius = 2;
};

struct VolumeEstimate {
    double volume = 0.0;
    double stderr_ = 0.0;
    double box_volume = 0.0;
    std::size_t hits = 0;
    std::size_t samples = 0;
};

/// Monte Carlo volume of B_eps(x, r). Lebesgue measure is the Haar measure, so the estimate does
/// not depend on the centre; sampling is done around the identity.
VolumeEstimate ball_volume(const CarnotGroup& g, const Point& x, double r, double eps, const BallSampler& sampler);

/// Values sampled on a space-time grid: values[k] is the grid function at times[k].
struct SpaceTimeField {
    BoxGrid grid;
    std::vector<double> times;
    std::vector<std::vector<double>> values;
};

using SpatialDistance = std::function<double(const double* x, const double* y)>;

struct HolderOptions {
    std::size_t max_pairs = 100000;
    std::uint64_t seed = 1;
    /// Optional region filter; all nodes are used when empty.
    std::function<bool(const double* x, double t)> region;
};

struct HolderResult {
    double quotient_sup = 0.0;
    double sup_abs = 0.0;
    double norm = 0.0;
    std::size_t pairs = 0;
};

/// sup |u| + sup |u(x,t) - u(y,s)| / max(d(x,y), sqrt|t-s|)^alpha over sampled pairs.
HolderResult holder_norm(const SpaceTimeField& u, double alpha, const SpatialDistance& dist, const HolderOptions& opts);

struct VolumeRow {
    double epsilon, radius, volume, stderr_;
};
struct HolderRow {
    double alpha, holder_norm;
    int region_id;
};
void write_volume_csv(const std::string& path, const std::vector<VolumeRow>& rows);
void write_holder_csv(const std::string& path, const std::vector<HolderRow>& rows);

}  // namespace carnot::metrics
