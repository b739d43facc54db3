#pragma once

#include <memory>
#include <string>
#include <vector>

namespace carnot {

/// Scalar expression in the coordinates x1..xn with symbolic differentiation.
///
/// Grammar: numbers, x1..xn, pi, + - * / ^, parentheses and the functions
/// sin cos tan exp log sqrt abs. '^' is right associative and binds tighter than unary minus.
class Expression {
public:
    Expression();  // the constant 0
    static Expression parse(const std::string& text, int num_vars);
    static Expression constant(double c);
    static Expression variable(int var);  // 0-based

    double operator()(const double* x) const;
    Expression derivative(int var) const;  // 0-based
    std::string to_string() const;
    const std::string& source() const { return source_; }
    bool is_constant() const;

    struct Node;

private:
    explicit Expression(std::shared_ptr<const Node> root, std::string source = "");
    std::shared_ptr<const Node> root_;
    std::string source_;
};

/// phi with its first and second coordinate derivatives, differentiated once up front.
class DifferentiatedExpression {
public:
    DifferentiatedExpression() = default;
    DifferentiatedExpression(const Expression& f, int num_vars);

    const Expression& function() const { return f_; }
    double value(const double* x) const { return f_(x); }
    void gradient(const double* x, double* out) const;
    void hessian(const double* x, double* out) const;  // n x n row-major

private:
    int n_ = 0;
    Expression f_;
    std::vector<Expression> d1_;
    std::vector<Expression> d2_;  // upper triangle, row-major
};

}  // namespace carnot
