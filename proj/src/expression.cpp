#include "carnot/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "carnot/error.hpp"

namespace carnot {

enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Abs };

struct Expression::Node {
    Op op = Op::Const;
    double value = 0.0;
    int var = 0;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_const(double v) {
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::Const;
    n->value = v;
    return n;
}

NodePtr make_var(int var) {
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::Var;
    n->var = var;
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double apply_unary(Op op, double x) {
    switch (op) {
        case Op::Neg: return -x;
        case Op::Sin: return std::sin(x);
        case Op::Cos: return std::cos(x);
        case Op::Tan: return std::tan(x);
        case Op::Exp: return std::exp(x);
        case Op::Log: return std::log(x);
        case Op::Sqrt: return std::sqrt(x);
        case Op::Abs: return std::abs(x);
        default: return 0.0;
    }
}

double apply_binary(Op op, double x, double y) {
    switch (op) {
        case Op::Add: return x + y;
        case Op::Sub: return x - y;
        case Op::Mul: return x * y;
        case Op::Div: return x / y;
        case Op::Pow: return std::pow(x, y);
        default: return 0.0;
    }
}

NodePtr make_unary(Op op, NodePtr a) {
    if (a->op == Op::Const) return make_const(apply_unary(op, a->value));
    if (op == Op::Neg && a->op == Op::Neg) return a->a;
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->a = std::move(a);
    return n;
}

NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(apply_binary(op, a->value, b->value));
    switch (op) {
        case Op::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case Op::Sub:
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return make_unary(Op::Neg, b);
            break;
        case Op::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Div:
            if (is_const(a, 0.0)) return make_const(0.0);
            if (is_const(b, 1.0)) return a;
            break;
        case Op::Pow:
            if (is_const(b, 0.0)) return make_const(1.0);
            if (is_const(b, 1.0)) return a;
            break;
        default: break;
    }
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

double eval(const Expression::Node& n, const double* x) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return x[n.var];
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return apply_binary(n.op, eval(*n.a, x), eval(*n.b, x));
        case Op::Pow: {
            const double base = eval(*n.a, x);
            if (n.b->op == Op::Const) {
                const double e = n.b->value;
                if (e == 2.0) return base * base;
                if (e == 3.0) return base * base * base;
            }
            return std::pow(base, eval(*n.b, x));
        }
        default: return apply_unary(n.op, eval(*n.a, x));
    }
}

bool depends_on(const NodePtr& n, int var) {
    if (!n) return false;
    if (n->op == Op::Var) return n->var == var;
    return depends_on(n->a, var) || depends_on(n->b, var);
}

NodePtr diff(const NodePtr& n, int var) {
    if (!depends_on(n, var)) return make_const(0.0);
    const NodePtr& a = n->a;
    const NodePtr& b = n->b;
    switch (n->op) {
        case Op::Var: return make_const(1.0);
        case Op::Add: return make_binary(Op::Add, diff(a, var), diff(b, var));
        case Op::Sub: return make_binary(Op::Sub, diff(a, var), diff(b, var));
        case Op::Mul:
            return make_binary(Op::Add, make_binary(Op::Mul, diff(a, var), b), make_binary(Op::Mul, a, diff(b, var)));
        case Op::Div: {
            auto num = make_binary(Op::Sub, make_binary(Op::Mul, diff(a, var), b), make_binary(Op::Mul, a, diff(b, var)));
            return make_binary(Op::Div, num, make_binary(Op::Pow, b, make_const(2.0)));
        }
        case Op::Pow: {
            if (!depends_on(b, var)) {
                // c * a^(c-1) * a'
                auto lowered = make_binary(Op::Pow, a, make_binary(Op::Sub, b, make_const(1.0)));
                return make_binary(Op::Mul, make_binary(Op::Mul, b, lowered), diff(a, var));
            }
            // a^b (b' log a + b a'/a)
            auto t1 = make_binary(Op::Mul, diff(b, var), make_unary(Op::Log, a));
            auto t2 = make_binary(Op::Div, make_binary(Op::Mul, b, diff(a, var)), a);
            return make_binary(Op::Mul, n, make_binary(Op::Add, t1, t2));
        }
        case Op::Neg: return make_unary(Op::Neg, diff(a, var));
        case Op::Sin: return make_binary(Op::Mul, make_unary(Op::Cos, a), diff(a, var));
        case Op::Cos: return make_unary(Op::Neg, make_binary(Op::Mul, make_unary(Op::Sin, a), diff(a, var)));
        case Op::Tan: {
            auto c = make_unary(Op::Cos, a);
            return make_binary(Op::Div, diff(a, var), make_binary(Op::Pow, c, make_const(2.0)));
        }
        case Op::Exp: return make_binary(Op::Mul, n, diff(a, var));
        case Op::Log: return make_binary(Op::Div, diff(a, var), a);
        case Op::Sqrt: return make_binary(Op::Div, diff(a, var), make_binary(Op::Mul, make_const(2.0), n));
        case Op::Abs: {
            // sign(a) a' written as a a' / |a|
            return make_binary(Op::Div, make_binary(Op::Mul, a, diff(a, var)), n);
        }
        default: return make_const(0.0);
    }
}

const char* func_name(Op op) {
    switch (op) {
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Tan: return "tan";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Abs: return "abs";
        default: return "?";
    }
}

std::string print(const NodePtr& n) {
    switch (n->op) {
        case Op::Const: {
            char buf[64];
            auto r = std::to_chars(buf, buf + sizeof buf, n->value);
            return std::string(buf, r.ptr);
        }
        case Op::Var: return "x" + std::to_string(n->var + 1);
        case Op::Add: return "(" + print(n->a) + " + " + print(n->b) + ")";
        case Op::Sub: return "(" + print(n->a) + " - " + print(n->b) + ")";
        case Op::Mul: return "(" + print(n->a) + " * " + print(n->b) + ")";
        case Op::Div: return "(" + print(n->a) + " / " + print(n->b) + ")";
        case Op::Pow: return "(" + print(n->a) + " ^ " + print(n->b) + ")";
        case Op::Neg: return "(-" + print(n->a) + ")";
        default: return std::string(func_name(n->op)) + "(" + print(n->a) + ")";
    }
}

class Parser {
public:
    Parser(const std::string& text, int num_vars) : s_(text), n_(num_vars) {}

    NodePtr parse() {
        auto e = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorKind::ParseError, "expression '" + s_ + "' at " + std::to_string(pos_) + ": " + what);
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (eat('+')) lhs = make_binary(Op::Add, lhs, term());
            else if (eat('-')) lhs = make_binary(Op::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        auto lhs = unary();
        for (;;) {
            if (eat('*')) lhs = make_binary(Op::Mul, lhs, unary());
            else if (eat('/')) lhs = make_binary(Op::Div, lhs, unary());
            else return lhs;
        }
    }

    NodePtr unary() {
        if (eat('-')) return make_unary(Op::Neg, unary());
        if (eat('+')) return unary();
        return power();
    }

    NodePtr power() {
        auto base = primary();
        if (eat('^')) return make_binary(Op::Pow, base, unary());
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            auto r = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
            if (r.ec != std::errc()) fail("bad number");
            pos_ = static_cast<std::size_t>(r.ptr - s_.data());
            return make_const(v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string word = s_.substr(start, pos_ - start);
            if (word == "pi") return make_const(std::numbers::pi);
            if (word.size() > 1 && word[0] == 'x') {
                int idx = 0;
                auto r = std::from_chars(word.data() + 1, word.data() + word.size(), idx);
                if (r.ec == std::errc() && r.ptr == word.data() + word.size()) {
                    if (idx < 1 || idx > n_) fail("variable " + word + " out of range");
                    return make_var(idx - 1);
                }
            }
            static const std::pair<const char*, Op> funcs[] = {{"sin", Op::Sin},   {"cos", Op::Cos}, {"tan", Op::Tan},
                                                               {"exp", Op::Exp},   {"log", Op::Log},
                                                               {"sqrt", Op::Sqrt}, {"abs", Op::Abs}};
            for (const auto& [name, op] : funcs) {
                if (word == name) {
                    if (!eat('(')) fail("expected '(' after " + word);
                    auto arg = expr();
                    if (!eat(')')) fail("expected ')'");
                    return make_unary(op, arg);
                }
            }
            fail("unknown identifier '" + word + "'");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    const std::string& s_;
    int n_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : root_(make_const(0.0)) {}

Expression::Expression(std::shared_ptr<const Node> root, std::string source)
    : root_(std::move(root)), source_(std::move(source)) {
    if (source_.empty()) source_ = print(root_);
}

Expression Expression::parse(const std::string& text, int num_vars) {
    return Expression(Parser(text, num_vars).parse(), text);
}

Expression Expression::constant(double c) { return Expression(make_const(c)); }
Expression Expression::variable(int var) { return Expression(make_var(var)); }

double Expression::operator()(const double* x) const { return eval(*root_, x); }

Expression Expression::derivative(int var) const { return Expression(diff(root_, var)); }

std::string Expression::to_string() const { return print(root_); }

bool Expression::is_constant() const { return root_->op == Op::Const; }

DifferentiatedExpression::DifferentiatedExpression(const Expression& f, int num_vars) : n_(num_vars), f_(f) {
    for (int a = 0; a < n_; ++a) d1_.push_back(f.derivative(a));
    for (int a = 0; a < n_; ++a)
        for (int b = a; b < n_; ++b) d2_.push_back(d1_[a].derivative(b));
}

void DifferentiatedExpression::gradient(const double* x, double* out) const {
    for (int a = 0; a < n_; ++a) out[a] = d1_[a](x);
}

void DifferentiatedExpression::hessian(const double* x, double* out) const {
    int k = 0;
    for (int a = 0; a < n_; ++a)
        for (int b = a; b < n_; ++b) out[a * n_ + b] = out[b * n_ + a] = d2_[k++](x);
}

}  // namespace carnot
