#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace carnot {

/// Sparse multivariate polynomial with real coefficients.
class Polynomial {
public:
    using Exponents = std::vector<std::uint8_t>;

    explicit Polynomial(std::size_t num_vars = 0) : num_vars_(num_vars) {}

    static Polynomial constant(std::size_t num_vars, double c);
    static Polynomial variable(std::size_t num_vars, std::size_t var);
    static Polynomial monomial(const Exponents& exps, double c = 1.0);

    std::size_t num_vars() const { return num_vars_; }
    const std::map<Exponents, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    void add_term(const Exponents& exps, double c);

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator-=(const Polynomial& other);
    Polynomial& operator*=(double s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

    Polynomial derivative(std::size_t var) const;

    /// Sets variables [first, first+count) to zero.
    Polynomial zero_vars(std::size_t first, std::size_t count) const;

    /// Keeps variables [first, first+count) renumbered from 0; every other variable must be absent.
    Polynomial slice_vars(std::size_t first, std::size_t count) const;

    /// Re-embeds into a ring with new_num_vars variables, variable i becoming i + offset.
    Polynomial embed(std::size_t new_num_vars, std::size_t offset) const;

    double evaluate(std::span<const double> x) const;

    /// Drops terms with |coefficient| <= tol.
    void prune(double tol);

    double max_abs_coefficient() const;

    /// Largest weighted degree over all terms (-1 for the zero polynomial).
    int weighted_degree(std::span<const int> weights) const;
    bool is_weighted_homogeneous(std::span<const int> weights, int degree) const;

    std::set<std::size_t> variables() const;

    std::string to_string() const;

private:
    std::size_t num_vars_;
    std::map<Exponents, double> terms_;
};

/// Flattened polynomial for repeated numeric evaluation.
class CompiledPolynomial {
public:
    CompiledPolynomial() = default;
    explicit CompiledPolynomial(const Polynomial& p);

    double operator()(const double* x) const;
    bool is_zero() const { return coefs_.empty(); }
    bool is_constant() const { return constant_; }

private:
    std::size_t num_vars_ = 0;
    bool constant_ = true;
    std::vector<double> coefs_;
    std::vector<std::uint8_t> exps_;
};

}  // namespace carnot
