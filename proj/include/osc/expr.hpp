#pragma once

// Small arithmetic expression language for specifying test functions at
// run time, plus a catalog of named builtins. Grammar is published in
// docs/grammar.md; notable choices: `^` is right-associative, unary minus
// binds tighter than the left operand of `^` (so -x^2 means (-x)^2), no
// implicit multiplication, natural log.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "osc/grid.hpp"

namespace osc {

class ExprError : public ConfigError {
public:
    ExprError(const std::string& msg, std::size_t offset)
        : ConfigError(msg + " at byte " + std::to_string(offset)), offset(offset) {}
    std::size_t offset;
};

struct EvalResult {
    double value = 0.0;
    bool ok = false;  // false: non-finite or domain error, value keeps the IEEE result's sign
};

class Expr {
public:
    enum class Op : std::uint8_t {
        constant, variable, neg, add, sub, mul, div, pow,
        fn_abs, fn_log, fn_exp, fn_sqrt, fn_min, fn_max,
    };

    struct Node {
        Op op;
        double value = 0.0;  // constant
        int var = -1;        // variable index (0-based)
        int a = -1, b = -1;  // children
    };

    static Expr parse(const std::string& src);

    /// Smallest grid dimension this expression can be sampled on.
    int arity() const { return arity_; }

    EvalResult eval(const double* pt, int dim) const {
        std::array<double, 160> local;
        std::vector<double> heap;
        double* v = local.data();
        if (nodes_.size() > local.size()) {
            heap.resize(nodes_.size());
            v = heap.data();
        }
        bool ok = true;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            switch (n.op) {
                case Op::constant: v[i] = n.value; break;
                case Op::variable:
                    if (n.var >= dim) return {0.0, false};
                    v[i] = pt[n.var];
                    break;
                case Op::neg: v[i] = -v[n.a]; break;
                case Op::add: v[i] = v[n.a] + v[n.b]; break;
                case Op::sub: v[i] = v[n.a] - v[n.b]; break;
                case Op::mul: v[i] = v[n.a] * v[n.b]; break;
                case Op::div:
                    ok &= v[n.b] != 0.0;
                    v[i] = v[n.a] / v[n.b];
                    break;
                case Op::pow:
                    v[i] = std::pow(v[n.a], v[n.b]);
                    ok &= std::isfinite(v[i]);
                    break;
                case Op::fn_abs: v[i] = std::abs(v[n.a]); break;
                case Op::fn_log:
                    ok &= v[n.a] > 0.0;
                    v[i] = std::log(v[n.a]);
                    break;
                case Op::fn_exp:
                    v[i] = std::exp(v[n.a]);
                    ok &= std::isfinite(v[i]);
                    break;
                case Op::fn_sqrt:
                    ok &= v[n.a] >= 0.0;
                    v[i] = std::sqrt(v[n.a]);
                    break;
                case Op::fn_min: v[i] = std::min(v[n.a], v[n.b]); break;
                case Op::fn_max: v[i] = std::max(v[n.a], v[n.b]); break;
            }
        }
        double r = v[nodes_.size() - 1];
        return {r, ok && std::isfinite(r)};
    }

    EvalResult eval(const AxisReals& pt, int dim) const { return eval(pt.data(), dim); }

    std::string pretty() const { return print(static_cast<int>(nodes_.size()) - 1); }

    const std::vector<Node>& nodes() const { return nodes_; }

    bool same_structure(const Expr& other) const {
        if (nodes_.size() != other.nodes_.size()) return false;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& x = nodes_[i];
            const Node& y = other.nodes_[i];
            if (x.op != y.op || x.var != y.var || x.a != y.a || x.b != y.b || x.value != y.value)
                return false;
        }
        return true;
    }

private:
    // Printing precedence: high enough context forces parentheses.
    // add/sub 2, mul/div 4, pow 6, neg 7, atoms 8.
    int node_prec(int i) const {
        switch (nodes_[i].op) {
            case Op::add: case Op::sub: return 2;
            case Op::mul: case Op::div: return 4;
            case Op::pow: return 6;
            case Op::neg: return 7;
            default: return 8;
        }
    }

    std::string print(int i, int context = 0) const {
        const Node& n = nodes_[i];
        std::string s;
        switch (n.op) {
            case Op::constant: {
                char buf[40];
                std::snprintf(buf, sizeof(buf), "%.17g", n.value);
                s = buf;
                break;
            }
            case Op::variable: s = "x" + std::to_string(n.var + 1); break;
            case Op::neg: s = "-" + print(n.a, 7); break;
            case Op::add: s = print(n.a, 2) + "+" + print(n.b, 3); break;
            case Op::sub: s = print(n.a, 2) + "-" + print(n.b, 3); break;
            case Op::mul: s = print(n.a, 4) + "*" + print(n.b, 5); break;
            case Op::div: s = print(n.a, 4) + "/" + print(n.b, 5); break;
            case Op::pow: s = print(n.a, 7) + "^" + print(n.b, 6); break;
            case Op::fn_abs: s = "abs(" + print(n.a) + ")"; break;
            case Op::fn_log: s = "log(" + print(n.a) + ")"; break;
            case Op::fn_exp: s = "exp(" + print(n.a) + ")"; break;
            case Op::fn_sqrt: s = "sqrt(" + print(n.a) + ")"; break;
            case Op::fn_min: s = "min(" + print(n.a) + "," + print(n.b) + ")"; break;
            case Op::fn_max: s = "max(" + print(n.a) + "," + print(n.b) + ")"; break;
        }
        if (node_prec(i) < context) s = "(" + s + ")";
        return s;
    }

    int push(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    friend class ExprParser;
    std::vector<Node> nodes_;
    int arity_ = 0;
};

class ExprParser {
public:
    explicit ExprParser(const std::string& src) : src_(src) {}

    Expr run() {
        int root = parse_expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        (void)root;
        for (const auto& n : out_.nodes_)
            if (n.op == Expr::Op::variable) out_.arity_ = std::max(out_.arity_, n.var + 1);
        return std::move(out_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ExprError("parse error: " + msg, pos_); }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (eat('+'))
                lhs = out_.push({Expr::Op::add, 0, -1, lhs, parse_term()});
            else if (eat('-'))
                lhs = out_.push({Expr::Op::sub, 0, -1, lhs, parse_term()});
            else
                return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_factor();
        for (;;) {
            if (eat('*'))
                lhs = out_.push({Expr::Op::mul, 0, -1, lhs, parse_factor()});
            else if (eat('/'))
                lhs = out_.push({Expr::Op::div, 0, -1, lhs, parse_factor()});
            else
                return lhs;
        }
    }

    // factor = unary ["^" factor]; right-associative, and the unary on the
    // left means -x^2 parses as (-x)^2.
    int parse_factor() {
        int base = parse_unary();
        if (eat('^')) return out_.push({Expr::Op::pow, 0, -1, base, parse_factor()});
        return base;
    }

    int parse_unary() {
        if (eat('-')) return out_.push({Expr::Op::neg, 0, -1, parse_unary(), -1});
        return parse_atom();
    }

    int parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("expected operand");
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        if (eat('(')) {
            int e = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    int parse_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        try {
            std::size_t used = 0;
            double v = std::stod(src_.substr(start, pos_ - start), &used);
            if (used != pos_ - start) throw std::invalid_argument("partial");
            return out_.push({Expr::Op::constant, v, -1, -1, -1});
        } catch (const std::exception&) {
            pos_ = start;
            fail("malformed number literal");
        }
    }

    int parse_name() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name = src_.substr(start, pos_ - start);
        if (peek() == '(') return parse_call(name, start);

        if (name == "pi") return out_.push({Expr::Op::constant, 3.14159265358979323846, -1, -1, -1});
        if (name == "e") return out_.push({Expr::Op::constant, 2.71828182845904523536, -1, -1, -1});
        int var = variable_index(name);
        if (var < 0) {
            pos_ = start;
            fail("unknown identifier '" + name + "'");
        }
        return out_.push({Expr::Op::variable, 0, var, -1, -1});
    }

    static int variable_index(const std::string& name) {
        if (name == "x") return 0;
        if (name == "y") return 1;
        if (name == "z") return 2;
        if (name.size() >= 2 && name[0] == 'x') {
            for (std::size_t i = 1; i < name.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(name[i]))) return -1;
            int k = std::stoi(name.substr(1));
            if (k >= 1 && k <= kMaxDim) return k - 1;
        }
        return -1;
    }

    int parse_call(const std::string& name, std::size_t name_start) {
        struct Fn {
            const char* name;
            Expr::Op op;
            int arity;
        };
        static constexpr Fn fns[] = {
            {"abs", Expr::Op::fn_abs, 1},  {"log", Expr::Op::fn_log, 1},
            {"exp", Expr::Op::fn_exp, 1},  {"sqrt", Expr::Op::fn_sqrt, 1},
            {"min", Expr::Op::fn_min, 2},  {"max", Expr::Op::fn_max, 2},
        };
        const Fn* fn = nullptr;
        for (const Fn& f : fns)
            if (name == f.name) fn = &f;
        if (!fn) {
            pos_ = name_start;
            fail("unknown function '" + name + "'");
        }
        eat('(');
        std::vector<int> args;
        if (peek() != ')') {
            args.push_back(parse_expr());
            while (eat(',')) args.push_back(parse_expr());
        }
        if (!eat(')')) fail("expected ')'");
        if (static_cast<int>(args.size()) != fn->arity) {
            pos_ = name_start;
            fail("'" + name + "' takes " + std::to_string(fn->arity) + " argument(s), got " +
                 std::to_string(args.size()));
        }
        return out_.push({fn->op, 0, -1, args[0], fn->arity == 2 ? args[1] : -1});
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    Expr out_;
};

inline Expr Expr::parse(const std::string& src) { return ExprParser(src).run(); }

/// Named builtin functions. Some are dimension-dependent (norms), so the
/// lookup takes the grid dimension.
inline const std::vector<std::string>& catalog_names() {
    static const std::vector<std::string> names = {
        "neg_log_abs_diff", "abs_diff", "max_xy", "diff",
        "neg_log_norm", "log_norm", "indicator_halfspace",
    };
    return names;
}

inline std::string catalog_source(const std::string& name, int dim) {
    auto norm = [&](int d) -> std::string {
        if (d == 1) return "abs(x)";
        std::string s = "sqrt(x^2";
        if (d >= 2) s += "+y^2";
        if (d >= 3) s += "+z^2";
        for (int a = 4; a <= d; ++a) s += "+x" + std::to_string(a) + "^2";
        return s + ")";
    };
    if (name == "neg_log_abs_diff") return "-log(abs(x-y))";
    if (name == "abs_diff") return "abs(x-y)";
    if (name == "max_xy") return "max(x,y)";
    if (name == "diff") return "x-y";
    if (name == "neg_log_norm") return "-log(" + norm(dim) + ")";
    if (name == "log_norm") return "log(" + norm(dim) + ")";
    if (name == "indicator_halfspace") return "(x/abs(x)+1)/2";
    throw ConfigError("unknown catalog function '" + name + "'");
}

inline Expr catalog_expr(const std::string& name, int dim) {
    return Expr::parse(catalog_source(name, dim));
}

/// Samples an expression at every cell center of the shell.
/// Non-finite samples follow the grid policy; under reject the offending
/// cell is named.
inline GridFunction sample(const Expr& e, const GridShell& shell,
                           const SamplePolicy& policy = SamplePolicy::rejecting()) {
    if (e.arity() > shell.dim)
        throw ConfigError("expression uses " + std::to_string(e.arity()) +
                          " variables but the grid has dimension " + std::to_string(shell.dim));
    GridFunction g(shell);
    AxisInts idx{};
    AxisReals pt{};
    for (std::int64_t k = 0; k < g.size(); ++k) {
        shell.unpack(k, idx);
        for (int a = 0; a < shell.dim; ++a) pt[a] = shell.center(a, idx[a]);
        EvalResult r = e.eval(pt, shell.dim);
        if (r.ok && std::abs(r.value) <= policy.clip_threshold) {
            g[k] = r.value;
        } else if (policy.on_bad == SamplePolicy::OnBad::clip && !std::isnan(r.value)) {
            g[k] = r.value > 0 ? policy.clip_threshold : -policy.clip_threshold;
        } else {
            throw Error("sample: non-finite value at cell " + g.cell_name(k));
        }
    }
    return g;
}

inline GridFunction sample(const std::string& src, const GridShell& shell,
                           const SamplePolicy& policy = SamplePolicy::rejecting()) {
    return sample(Expr::parse(src), shell, policy);
}

}  // namespace osc
