#include "carnot/group.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "carnot/error.hpp"

namespace carnot {

double max_abs_diff(const Point& a, const Point& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

int CarnotGroupSpec::dim() const {
    int n = 0;
    for (int d : layer_dims) n += d;
    return n;
}

std::vector<int> CarnotGroupSpec::degrees() const {
    std::vector<int> deg;
    for (std::size_t s = 0; s < layer_dims.size(); ++s) {
        for (int k = 0; k < layer_dims[s]; ++k) deg.push_back(static_cast<int>(s) + 1);
    }
    return deg;
}

std::string ValidationReport::summary() const {
    if (violations.empty()) return "valid";
    std::ostringstream os;
    for (const auto& v : violations) {
        os << v.kind;
        if (v.i >= 0) {
            os << " (" << v.i + 1;
            if (v.j >= 0) os << "," << v.j + 1;
            if (v.k >= 0) os << "," << v.k + 1;
            os << ")";
        }
        if (!v.message.empty()) os << ": " << v.message;
        os << "\n";
    }
    return os.str();
}

std::vector<double> dense_structure_constants(const CarnotGroupSpec& spec) {
    const int n = spec.dim();
    std::vector<double> b(static_cast<std::size_t>(n) * n * n, 0.0);
    std::set<std::tuple<int, int, int>> given;
    for (const auto& e : spec.brackets) {
        if (e.i < 0 || e.j < 0 || e.k < 0 || e.i >= n || e.j >= n || e.k >= n) continue;
        given.insert({e.i, e.j, e.k});
    }
    for (const auto& e : spec.brackets) {
        if (e.i < 0 || e.j < 0 || e.k < 0 || e.i >= n || e.j >= n || e.k >= n) continue;
        b[(e.i * n + e.j) * n + e.k] = e.value;
        if (!given.count({e.j, e.i, e.k}) && e.i != e.j) b[(e.j * n + e.i) * n + e.k] = -e.value;
    }
    return b;
}

ValidationReport validate_spec(const CarnotGroupSpec& spec, double tol) {
    ValidationReport report;
    if (spec.layer_dims.empty()) {
        report.violations.push_back({"StratificationViolation", -1, -1, -1, 0.0, "no layers"});
        return report;
    }
    for (int d : spec.layer_dims) {
        if (d <= 0) {
            report.violations.push_back({"StratificationViolation", -1, -1, -1, 0.0, "empty layer"});
            return report;
        }
    }
    const int n = spec.dim();
    for (const auto& e : spec.brackets) {
        if (e.i < 0 || e.j < 0 || e.k < 0 || e.i >= n || e.j >= n || e.k >= n) {
            report.violations.push_back({"StratificationViolation", e.i, e.j, e.k, 0.0, "index out of range"});
        }
    }
    if (!report.ok()) return report;

    const auto b = dense_structure_constants(spec);
    auto at = [&](int i, int j, int k) { return b[(i * n + j) * n + k]; };
    const auto deg = spec.degrees();
    const int r = spec.step();

    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                double res = at(i, j, k) + at(j, i, k);
                if (std::abs(res) > tol) {
                    report.violations.push_back({"AntisymmetryViolation", i, j, k, res, "b_ij^k + b_ji^k != 0"});
                }
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                if (at(i, j, k) != 0.0 && deg[k] != deg[i] + deg[j]) {
                    report.violations.push_back(
                        {"StratificationViolation", i, j, k, at(i, j, k), "bracket lands outside layer d(i)+d(j)"});
                }
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int l = j + 1; l < n; ++l) {
                double worst = 0.0;
                for (int k = 0; k < n; ++k) {
                    double s = 0.0;
                    for (int p = 0; p < n; ++p) {
                        s += at(j, l, p) * at(i, p, k) + at(l, i, p) * at(j, p, k) + at(i, j, p) * at(l, p, k);
                    }
                    worst = std::max(worst, std::abs(s));
                }
                if (worst > tol) report.violations.push_back({"JacobiViolation", i, j, l, worst, "Jacobi sum nonzero"});
            }
        }
    }
    // generation: [V^1, V^s] spans V^{s+1}
    int offset = 0;
    std::vector<int> start(r + 1, 0);
    for (int s = 0; s < r; ++s) {
        start[s] = offset;
        offset += spec.layer_dims[s];
    }
    start[r] = offset;
    for (int s = 1; s < r; ++s) {
        const int target = s;  // 0-based layer index s holds degree s+1
        const int rows = spec.layer_dims[target];
        std::vector<Eigen::VectorXd> cols;
        for (int i = start[0]; i < start[1]; ++i) {
            for (int l = start[s - 1]; l < start[s]; ++l) {
                Eigen::VectorXd v(rows);
                for (int k = 0; k < rows; ++k) v[k] = at(i, l, start[target] + k);
                cols.push_back(v);
            }
        }
        Eigen::MatrixXd M(rows, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) M.col(static_cast<Eigen::Index>(c)) = cols[c];
        Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
        lu.setThreshold(1e-10);
        if (lu.rank() != rows) {
            std::ostringstream os;
            os << "layer " << s + 1 << " has rank " << lu.rank() << " < " << rows;
            report.violations.push_back({"GenerationFailure", -1, -1, -1, 0.0, os.str()});
        }
    }
    return report;
}

std::vector<double> FrameField::vector_at(std::span<const double> x) const {
    std::vector<double> v(coeff_polys.size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = eps_weight * coeff_polys[j].evaluate(x);
    return v;
}

Polynomial FrameField::apply(const Polynomial& f) const {
    Polynomial out(f.num_vars());
    for (std::size_t j = 0; j < coeff_polys.size(); ++j) {
        if (coeff_polys[j].is_zero()) continue;
        out += coeff_polys[j] * f.derivative(j);
    }
    out *= eps_weight;
    return out;
}

namespace {

ErrorKind kind_from_name(const std::string& name) {
    if (name == "AntisymmetryViolation") return ErrorKind::AntisymmetryViolation;
    if (name == "JacobiViolation") return ErrorKind::JacobiViolation;
    if (name == "GenerationFailure") return ErrorKind::GenerationFailure;
    return ErrorKind::StratificationViolation;
}

using PolyVec = std::vector<Polynomial>;

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace

CarnotGroup::CarnotGroup(CarnotGroupSpec spec) : spec_(std::move(spec)) {
    auto report = validate_spec(spec_);
    if (!report.ok()) throw Error(kind_from_name(report.violations.front().kind), report.summary());
    n_ = spec_.dim();
    m_ = spec_.horizontal_dim();
    r_ = spec_.step();
    degrees_ = spec_.degrees();
    b_ = dense_structure_constants(spec_);
    build_law();
}

std::vector<double> CarnotGroup::bracket(std::span<const double> a, std::span<const double> b) const {
    std::vector<double> out(n_, 0.0);
    for (int i = 0; i < n_; ++i) {
        if (a[i] == 0.0) continue;
        for (int j = 0; j < n_; ++j) {
            if (b[j] == 0.0) continue;
            for (int k = 0; k < n_; ++k) out[k] += structure_constant(i, j, k) * a[i] * b[j];
        }
    }
    return out;
}

void CarnotGroup::build_law() {
    const std::size_t nv = 2 * static_cast<std::size_t>(n_);
    struct Nz {
        int i, j, k;
        double b;
    };
    std::vector<Nz> nz;
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            for (int k = 0; k < n_; ++k)
                if (structure_constant(i, j, k) != 0.0) nz.push_back({i, j, k, structure_constant(i, j, k)});

    auto lie = [&](const PolyVec& p, const PolyVec& q) {
        PolyVec out(n_, Polynomial(nv));
        for (const auto& e : nz) {
            if (p[e.i].is_zero() || q[e.j].is_zero()) continue;
            out[e.k] += (p[e.i] * q[e.j]) * e.b;
        }
        return out;
    };

    PolyVec X(n_, Polynomial(nv)), Y(n_, Polynomial(nv));
    for (int i = 0; i < n_; ++i) {
        X[i] = Polynomial::variable(nv, i);
        Y[i] = Polynomial::variable(nv, n_ + i);
    }

    // Dynkin form of the Baker-Campbell-Hausdorff series, words of length <= r.
    std::map<std::string, double> words;
    std::function<void(int, int, std::string, double)> expand = [&](int k, int total, std::string word, double denom) {
        if (k > 0) {
            double sign = (k % 2 == 1) ? 1.0 : -1.0;
            words[word] += sign / (k * total * denom);
        }
        for (int len = 1; total + len <= r_; ++len) {
            for (int rx = 0; rx <= len; ++rx) {
                int sy = len - rx;
                std::string w = word + std::string(rx, 'X') + std::string(sy, 'Y');
                expand(k + 1, total + len, w, denom * factorial(rx) * factorial(sy));
            }
        }
    };
    expand(0, 0, "", 1.0);

    law_.assign(n_, Polynomial(nv));
    for (const auto& [word, coef] : words) {
        if (std::abs(coef) < 1e-15) continue;
        const std::size_t L = word.size();
        if (L >= 2 && word[L - 1] == word[L - 2]) continue;
        PolyVec acc = word.back() == 'X' ? X : Y;
        for (std::size_t p = L - 1; p-- > 0;) acc = lie(word[p] == 'X' ? X : Y, acc);
        for (int k = 0; k < n_; ++k) law_[k] += acc[k] * coef;
    }
    for (auto& p : law_) p.prune(1e-14);
    law_compiled_.clear();
    for (const auto& p : law_) law_compiled_.emplace_back(p);

    left_.assign(n_, std::vector<Polynomial>(n_, Polynomial(n_)));
    right_.assign(n_, std::vector<Polynomial>(n_, Polynomial(n_)));
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            left_[i][j] = law_[j].derivative(n_ + i).zero_vars(n_, n_).slice_vars(0, n_);
            right_[i][j] = law_[j].derivative(i).zero_vars(0, n_).slice_vars(n_, n_);
        }
    }
}

Point CarnotGroup::multiply(const Point& x, const Point& y) const {
    std::vector<double> z(2 * n_);
    std::copy(x.begin(), x.end(), z.begin());
    std::copy(y.begin(), y.end(), z.begin() + n_);
    Point out(n_);
    for (int k = 0; k < n_; ++k) out[k] = law_compiled_[k](z.data());
    return out;
}

Point CarnotGroup::inverse(const Point& x) const {
    Point out(n_);
    for (int k = 0; k < n_; ++k) out[k] = -x[k];
    return out;
}

Point CarnotGroup::dilate(const Point& x, double s) const {
    if (!(s > 0.0)) throw Error(ErrorKind::NonpositiveScale, "dilation factor must be positive");
    Point out(n_);
    for (int k = 0; k < n_; ++k) out[k] = std::pow(s, degrees_[k]) * x[k];
    return out;
}

Frame CarnotGroup::build_frames(Side side, double eps) const {
    if (eps < 0.0) throw Error(ErrorKind::NonpositiveEpsilon, "frame weight must be >= 0");
    Frame frame;
    frame.side = side;
    frame.eps = eps;
    const auto& src = side == Side::Left ? left_ : right_;
    const int count = eps > 0.0 ? n_ : m_;
    for (int i = 0; i < count; ++i) {
        FrameField f;
        f.base_index = i;
        f.coeff_polys = src[i];
        f.eps_weight = degrees_[i] == 1 ? 1.0 : eps;
        frame.fields.push_back(std::move(f));
    }
    return frame;
}

double CarnotGroup::frame_constant(int i, int j, int h) const {
    Polynomial::Exponents e(n_, 0);
    e[j] = 1;
    const auto& terms = left_[i][h].terms();
    auto it = terms.find(e);
    return it == terms.end() ? 0.0 : it->second;
}

FrameEvaluator::FrameEvaluator(const Frame& frame) {
    num_fields_ = static_cast<int>(frame.fields.size());
    dim_ = num_fields_ ? static_cast<int>(frame.fields.front().coeff_polys.size()) : 0;
    std::set<int> deps;
    for (int f = 0; f < num_fields_; ++f) {
        const auto& field = frame.fields[f];
        weights_.push_back(field.eps_weight);
        if (field.eps_weight == 0.0) continue;
        for (int a = 0; a < dim_; ++a) {
            const auto& p = field.coeff_polys[a];
            if (p.is_zero()) continue;
            Entry e{f, a, false, 0.0, CompiledPolynomial(p)};
            e.constant = e.poly.is_constant();
            if (e.constant) e.value = field.eps_weight * p.terms().begin()->second;
            for (auto v : p.variables()) deps.insert(static_cast<int>(v));
            entries_.push_back(std::move(e));
        }
    }
    deps_.assign(deps.begin(), deps.end());
}

void FrameEvaluator::matrix_at(const double* x, double* out) const {
    std::fill(out, out + static_cast<std::size_t>(num_fields_) * dim_, 0.0);
    for (const auto& e : entries_) {
        out[e.field * dim_ + e.comp] = e.constant ? e.value : weights_[e.field] * e.poly(x);
    }
}

}  // namespace carnot
