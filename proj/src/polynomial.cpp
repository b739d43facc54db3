#include "carnot/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace carnot {

Polynomial Polynomial::constant(std::size_t num_vars, double c) {
    Polynomial p(num_vars);
    p.add_term(Exponents(num_vars, 0), c);
    return p;
}

Polynomial Polynomial::variable(std::size_t num_vars, std::size_t var) {
    Polynomial p(num_vars);
    Exponents e(num_vars, 0);
    e.at(var) = 1;
    p.add_term(e, 1.0);
    return p;
}

Polynomial Polynomial::monomial(const Exponents& exps, double c) {
    Polynomial p(exps.size());
    p.add_term(exps, c);
    return p;
}

void Polynomial::add_term(const Exponents& exps, double c) {
    if (exps.size() != num_vars_) throw std::invalid_argument("polynomial: exponent length mismatch");
    if (c == 0.0) return;
    auto it = terms_.find(exps);
    if (it == terms_.end()) {
        terms_.emplace(exps, c);
        return;
    }
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    if (other.num_vars_ != num_vars_) throw std::invalid_argument("polynomial: ring mismatch");
    for (const auto& [e, c] : other.terms_) add_term(e, c);
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
    if (other.num_vars_ != num_vars_) throw std::invalid_argument("polynomial: ring mismatch");
    for (const auto& [e, c] : other.terms_) add_term(e, -c);
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.num_vars_ != b.num_vars_) throw std::invalid_argument("polynomial: ring mismatch");
    Polynomial out(a.num_vars_);
    Polynomial::Exponents e(a.num_vars_);
    for (const auto& [ea, ca] : a.terms_) {
        for (const auto& [eb, cb] : b.terms_) {
            for (std::size_t v = 0; v < e.size(); ++v) e[v] = static_cast<std::uint8_t>(ea[v] + eb[v]);
            out.add_term(e, ca * cb);
        }
    }
    return out;
}

Polynomial Polynomial::derivative(std::size_t var) const {
    Polynomial out(num_vars_);
    for (const auto& [e, c] : terms_) {
        if (e[var] == 0) continue;
        Exponents d = e;
        d[var] -= 1;
        out.add_term(d, c * e[var]);
    }
    return out;
}

Polynomial Polynomial::zero_vars(std::size_t first, std::size_t count) const {
    Polynomial out(num_vars_);
    for (const auto& [e, c] : terms_) {
        bool keep = true;
        for (std::size_t v = first; v < first + count; ++v) keep = keep && e[v] == 0;
        if (keep) out.add_term(e, c);
    }
    return out;
}

Polynomial Polynomial::slice_vars(std::size_t first, std::size_t count) const {
    Polynomial out(count);
    for (const auto& [e, c] : terms_) {
        Exponents s(count);
        for (std::size_t v = 0; v < num_vars_; ++v) {
            if (v >= first && v < first + count) {
                s[v - first] = e[v];
            } else if (e[v] != 0) {
                throw std::invalid_argument("polynomial: slice drops a live variable");
            }
        }
        out.add_term(s, c);
    }
    return out;
}

Polynomial Polynomial::embed(std::size_t new_num_vars, std::size_t offset) const {
    if (offset + num_vars_ > new_num_vars) throw std::invalid_argument("polynomial: embedding too small");
    Polynomial out(new_num_vars);
    for (const auto& [e, c] : terms_) {
        Exponents s(new_num_vars, 0);
        for (std::size_t v = 0; v < num_vars_; ++v) s[v + offset] = e[v];
        out.add_term(s, c);
    }
    return out;
}

double Polynomial::evaluate(std::span<const double> x) const {
    if (x.size() < num_vars_) throw std::invalid_argument("polynomial: too few coordinates");
    double sum = 0.0;
    for (const auto& [e, c] : terms_) {
        double t = c;
        for (std::size_t v = 0; v < num_vars_; ++v) {
            for (int k = 0; k < e[v]; ++k) t *= x[v];
        }
        sum += t;
    }
    return sum;
}

void Polynomial::prune(double tol) {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) <= tol) {
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
}

double Polynomial::max_abs_coefficient() const {
    double m = 0.0;
    for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
    return m;
}

int Polynomial::weighted_degree(std::span<const int> weights) const {
    int best = -1;
    for (const auto& [e, c] : terms_) {
        int d = 0;
        for (std::size_t v = 0; v < num_vars_; ++v) d += weights[v] * e[v];
        best = std::max(best, d);
    }
    return best;
}

bool Polynomial::is_weighted_homogeneous(std::span<const int> weights, int degree) const {
    for (const auto& [e, c] : terms_) {
        int d = 0;
        for (std::size_t v = 0; v < num_vars_; ++v) d += weights[v] * e[v];
        if (d != degree) return false;
    }
    return true;
}

std::set<std::size_t> Polynomial::variables() const {
    std::set<std::size_t> vars;
    for (const auto& [e, c] : terms_) {
        for (std::size_t v = 0; v < num_vars_; ++v) {
            if (e[v] != 0) vars.insert(v);
        }
    }
    return vars;
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        if (first) {
            if (c < 0) os << "-";
        } else {
            os << (c < 0 ? " - " : " + ");
        }
        first = false;
        std::vector<std::string> factors;
        double a = std::abs(c);
        bool any_var = false;
        for (auto x : e) any_var = any_var || x != 0;
        if (!any_var || a != 1.0) {
            std::ostringstream num;
            num << a;
            factors.push_back(num.str());
        }
        for (std::size_t v = 0; v < num_vars_; ++v) {
            if (e[v] == 0) continue;
            std::string f = "x" + std::to_string(v + 1);
            if (e[v] > 1) f += "^" + std::to_string(int(e[v]));
            factors.push_back(f);
        }
        for (std::size_t k = 0; k < factors.size(); ++k) os << (k ? "*" : "") << factors[k];
    }
    return os.str();
}

CompiledPolynomial::CompiledPolynomial(const Polynomial& p) : num_vars_(p.num_vars()) {
    for (const auto& [e, c] : p.terms()) {
        coefs_.push_back(c);
        exps_.insert(exps_.end(), e.begin(), e.end());
        for (auto x : e) constant_ = constant_ && x == 0;
    }
}

double CompiledPolynomial::operator()(const double* x) const {
    double sum = 0.0;
    const std::uint8_t* e = exps_.data();
    for (double c : coefs_) {
        double t = c;
        for (std::size_t v = 0; v < num_vars_; ++v) {
            switch (e[v]) {
                case 0: break;
                case 1: t *= x[v]; break;
                case 2: t *= x[v] * x[v]; break;
                default:
                    for (int k = 0; k < e[v]; ++k) t *= x[v];
            }
        }
        sum += t;
        e += num_vars_;
    }
    return sum;
}

}  // namespace carnot
