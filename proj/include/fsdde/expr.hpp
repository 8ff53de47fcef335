#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace fsdde {

// One-variable expression trees over: real literals, x, + - * /, unary minus,
// and the functions sin, cos, tanh, exp. The grammar is deliberately tiny so
// that symbolic differentiation is total.

namespace ast {

enum class Kind { Literal, Variable, Neg, Add, Sub, Mul, Div, Sin, Cos, Tanh, Exp };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Kind kind;
    double value = 0.0; // Literal only
    NodePtr lhs;        // unary operand or left child
    NodePtr rhs;        // right child of binary nodes
};

inline NodePtr lit(double v) { return std::make_shared<Node>(Node{Kind::Literal, v, nullptr, nullptr}); }
inline NodePtr var() { return std::make_shared<Node>(Node{Kind::Variable, 0.0, nullptr, nullptr}); }
inline NodePtr unary(Kind k, NodePtr a) { return std::make_shared<Node>(Node{k, 0.0, std::move(a), nullptr}); }
inline NodePtr binary(Kind k, NodePtr a, NodePtr b) {
    return std::make_shared<Node>(Node{k, 0.0, std::move(a), std::move(b)});
}

inline bool is_literal(const NodePtr& n, double v) { return n->kind == Kind::Literal && n->value == v; }

// Smart constructors folding the 0/1 identities; keeps derivative trees small.
inline NodePtr add(NodePtr a, NodePtr b) {
    if (is_literal(a, 0.0)) return b;
    if (is_literal(b, 0.0)) return a;
    return binary(Kind::Add, std::move(a), std::move(b));
}
inline NodePtr sub(NodePtr a, NodePtr b) {
    if (is_literal(b, 0.0)) return a;
    return binary(Kind::Sub, std::move(a), std::move(b));
}
inline NodePtr mul(NodePtr a, NodePtr b) {
    if (is_literal(a, 0.0) || is_literal(b, 0.0)) return lit(0.0);
    if (is_literal(a, 1.0)) return b;
    if (is_literal(b, 1.0)) return a;
    return binary(Kind::Mul, std::move(a), std::move(b));
}
inline NodePtr div(NodePtr a, NodePtr b) {
    if (is_literal(b, 1.0)) return a;
    return binary(Kind::Div, std::move(a), std::move(b));
}
inline NodePtr neg(NodePtr a) {
    if (is_literal(a, 0.0)) return a;
    return unary(Kind::Neg, std::move(a));
}

inline double eval(const Node& n, double x) {
    switch (n.kind) {
        case Kind::Literal: return n.value;
        case Kind::Variable: return x;
        case Kind::Neg: return -eval(*n.lhs, x);
        case Kind::Add: return eval(*n.lhs, x) + eval(*n.rhs, x);
        case Kind::Sub: return eval(*n.lhs, x) - eval(*n.rhs, x);
        case Kind::Mul: return eval(*n.lhs, x) * eval(*n.rhs, x);
        case Kind::Div: {
            const double denom = eval(*n.rhs, x);
            if (denom == 0.0) throw EvalError("division by zero");
            return eval(*n.lhs, x) / denom;
        }
        case Kind::Sin: return std::sin(eval(*n.lhs, x));
        case Kind::Cos: return std::cos(eval(*n.lhs, x));
        case Kind::Tanh: return std::tanh(eval(*n.lhs, x));
        case Kind::Exp: return std::exp(eval(*n.lhs, x));
    }
    throw EvalError("corrupt expression node");
}

inline NodePtr diff(const NodePtr& n) {
    switch (n->kind) {
        case Kind::Literal: return lit(0.0);
        case Kind::Variable: return lit(1.0);
        case Kind::Neg: return neg(diff(n->lhs));
        case Kind::Add: return add(diff(n->lhs), diff(n->rhs));
        case Kind::Sub: return sub(diff(n->lhs), diff(n->rhs));
        case Kind::Mul:
            return add(mul(diff(n->lhs), n->rhs), mul(n->lhs, diff(n->rhs)));
        case Kind::Div:
            // (u/v)' = (u'v - uv') / v^2
            return div(sub(mul(diff(n->lhs), n->rhs), mul(n->lhs, diff(n->rhs))),
                       mul(n->rhs, n->rhs));
        case Kind::Sin: return mul(unary(Kind::Cos, n->lhs), diff(n->lhs));
        case Kind::Cos: return neg(mul(unary(Kind::Sin, n->lhs), diff(n->lhs)));
        case Kind::Tanh:
            // tanh' = 1 - tanh^2
            return mul(sub(lit(1.0), mul(unary(Kind::Tanh, n->lhs), unary(Kind::Tanh, n->lhs))),
                       diff(n->lhs));
        case Kind::Exp: return mul(unary(Kind::Exp, n->lhs), diff(n->lhs));
    }
    throw EvalError("corrupt expression node");
}

inline bool equal(const Node& a, const Node& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Kind::Literal: return a.value == b.value;
        case Kind::Variable: return true;
        case Kind::Neg:
        case Kind::Sin:
        case Kind::Cos:
        case Kind::Tanh:
        case Kind::Exp: return equal(*a.lhs, *b.lhs);
        default: return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
    }
}

// precedence levels used by the printer: additive 1, multiplicative 2, unary 3
inline int precedence(Kind k) {
    switch (k) {
        case Kind::Add:
        case Kind::Sub: return 1;
        case Kind::Mul:
        case Kind::Div: return 2;
        case Kind::Neg: return 3;
        default: return 4;
    }
}

inline void print(const Node& n, std::string& out) {
    const auto child = [&out](const Node& c, int min_prec) {
        const bool parens = precedence(c.kind) < min_prec;
        if (parens) out += '(';
        print(c, out);
        if (parens) out += ')';
    };
    switch (n.kind) {
        case Kind::Literal: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", n.value);
            out += buf;
            return;
        }
        case Kind::Variable: out += 'x'; return;
        case Kind::Neg:
            out += '-';
            child(*n.lhs, 4); // operand of unary minus always parenthesised unless atomic
            return;
        case Kind::Add:
            child(*n.lhs, 1); out += '+'; child(*n.rhs, 2);
            return;
        case Kind::Sub:
            child(*n.lhs, 1); out += '-'; child(*n.rhs, 2);
            return;
        case Kind::Mul:
            child(*n.lhs, 2); out += '*'; child(*n.rhs, 3);
            return;
        case Kind::Div:
            child(*n.lhs, 2); out += '/'; child(*n.rhs, 3);
            return;
        case Kind::Sin: out += "sin("; print(*n.lhs, out); out += ')'; return;
        case Kind::Cos: out += "cos("; print(*n.lhs, out); out += ')'; return;
        case Kind::Tanh: out += "tanh("; print(*n.lhs, out); out += ')'; return;
        case Kind::Exp: out += "exp("; print(*n.lhs, out); out += ')'; return;
    }
}

} // namespace ast

/// Immutable expression handle. Evaluation is reentrant; sharing across
/// workers is safe.
class Expression {
public:
    Expression() = default;
    explicit Expression(ast::NodePtr root) : root_(std::move(root)) {}

    bool valid() const { return root_ != nullptr; }
    const ast::NodePtr& root() const { return root_; }

    double operator()(double x) const { return ast::eval(*root_, x); }

    bool operator==(const Expression& other) const {
        return root_ && other.root_ && ast::equal(*root_, *other.root_);
    }

private:
    ast::NodePtr root_;
};

inline double eval(const Expression& e, double x) { return e(x); }

/// Exact symbolic derivative d/dx.
inline Expression differentiate(const Expression& e) { return Expression(ast::diff(e.root())); }

inline std::string to_string(const Expression& e) {
    std::string out;
    ast::print(*e.root(), out);
    return out;
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    ast::NodePtr run() {
        auto node = expression();
        skip_space();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return node;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_space();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    ast::NodePtr expression() {
        auto node = term();
        for (;;) {
            if (consume('+')) node = ast::binary(ast::Kind::Add, node, term());
            else if (consume('-')) node = ast::binary(ast::Kind::Sub, node, term());
            else return node;
        }
    }

    ast::NodePtr term() {
        auto node = unary();
        for (;;) {
            if (consume('*')) node = ast::binary(ast::Kind::Mul, node, unary());
            else if (consume('/')) node = ast::binary(ast::Kind::Div, node, unary());
            else return node;
        }
    }

    ast::NodePtr unary() {
        if (consume('-')) return ast::unary(ast::Kind::Neg, unary());
        return primary();
    }

    ast::NodePtr primary() {
        skip_space();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto node = expression();
            if (!consume(')')) fail("expected ')'");
            return node;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    ast::NodePtr number() {
        double value = 0.0;
        const char* begin = src_.data() + pos_;
        const char* end = src_.data() + src_.size();
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc()) fail("malformed number");
        pos_ = static_cast<std::size_t>(ptr - src_.data());
        return ast::lit(value);
    }

    ast::NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "x") return ast::var();
        ast::Kind kind;
        if (name == "sin") kind = ast::Kind::Sin;
        else if (name == "cos") kind = ast::Kind::Cos;
        else if (name == "tanh") kind = ast::Kind::Tanh;
        else if (name == "exp") kind = ast::Kind::Exp;
        else {
            pos_ = start;
            fail("unknown identifier '" + std::string(name) + "'");
        }
        if (!consume('(')) fail("expected '(' after function name");
        auto arg = expression();
        if (!consume(')')) fail("expected ')'");
        return ast::unary(kind, arg);
    }
};

} // namespace detail

/// Parses the documented grammar. Operator precedence is the standard one
/// (unary minus above * and /, which sit above + and -); function application
/// requires parentheses and therefore binds tightest.
inline Expression parse(std::string_view source) {
    return Expression(detail::Parser(source).run());
}

} // namespace fsdde
