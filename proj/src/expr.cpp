#include "flatfront/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <sstream>

#include "flatfront/poly.hpp"

namespace flatfront {

namespace {

bool finite_c(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

bool exact_zero(cplx v) { return v.real() == 0.0 && v.imag() == 0.0; }

Expr make(NodeKind k, cplx value, cplx expo, int ip, Expr a, Expr b) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->value = value;
    n->expo = expo;
    n->ip = ip;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

cplx int_power(cplx base, int n) {
    if (n == 0) return cplx{1.0};
    bool inv = n < 0;
    unsigned long long e = inv ? -(long long)n : (long long)n;
    cplx acc{1.0}, p = base;
    while (e) {
        if (e & 1ull) acc *= p;
        p *= p;
        e >>= 1;
    }
    if (inv) {
        if (exact_zero(acc)) throw Error("pole-at-point", "zero raised to a negative power");
        return cplx{1.0} / acc;
    }
    return acc;
}

}  // namespace

Expr constant(cplx v) { return make(NodeKind::Constant, v, {}, 0, nullptr, nullptr); }
Expr constant(double v) { return constant(cplx(v, 0.0)); }

Expr var_z() {
    static const Expr z = make(NodeKind::Var, {}, {}, 0, nullptr, nullptr);
    return z;
}

bool is_constant(const Expr& e, cplx* out) {
    if (!e || e->kind != NodeKind::Constant) return false;
    if (out) *out = e->value;
    return true;
}

Expr add(Expr x, Expr y) {
    cplx cx, cy;
    bool kx = is_constant(x, &cx), ky = is_constant(y, &cy);
    if (kx && ky) return constant(cx + cy);
    if (kx && exact_zero(cx)) return y;
    if (ky && exact_zero(cy)) return x;
    return make(NodeKind::Add, {}, {}, 0, std::move(x), std::move(y));
}

Expr sub(Expr x, Expr y) {
    cplx cx, cy;
    bool kx = is_constant(x, &cx), ky = is_constant(y, &cy);
    if (kx && ky) return constant(cx - cy);
    if (ky && exact_zero(cy)) return x;
    return make(NodeKind::Sub, {}, {}, 0, std::move(x), std::move(y));
}

Expr mul(Expr x, Expr y) {
    cplx cx, cy;
    bool kx = is_constant(x, &cx), ky = is_constant(y, &cy);
    if (kx && ky) return constant(cx * cy);
    if (kx) {
        if (exact_zero(cx)) return constant(0.0);
        if (cx == cplx{1.0}) return y;
        // keep constants in front and merged, so print/parse round-trips
        if (y->kind == NodeKind::Mul && is_constant(y->a, &cy))
            return mul(constant(cx * cy), y->b);
        return make(NodeKind::Mul, {}, {}, 0, std::move(x), std::move(y));
    }
    if (ky) return mul(std::move(y), std::move(x));
    return make(NodeKind::Mul, {}, {}, 0, std::move(x), std::move(y));
}

Expr divide(Expr x, Expr y) {
    cplx cx, cy;
    bool kx = is_constant(x, &cx), ky = is_constant(y, &cy);
    if (ky && exact_zero(cy)) throw Error("invalid-spec", "division by zero constant");
    if (kx && ky) return constant(cx / cy);
    if (kx && exact_zero(cx)) return constant(0.0);
    if (ky && cy == cplx{1.0}) return x;
    return make(NodeKind::Div, {}, {}, 0, std::move(x), std::move(y));
}

Expr neg(Expr x) { return mul(constant(-1.0), std::move(x)); }

Expr ipow(Expr x, int n) {
    cplx cx;
    if (n == 0) return constant(1.0);
    if (n == 1) return x;
    if (is_constant(x, &cx)) return constant(int_power(cx, n));
    return make(NodeKind::IntPow, {}, {}, n, std::move(x), nullptr);
}

Expr cpow(Expr x, cplx exponent) {
    double rn = std::round(exponent.real());
    if (exponent.imag() == 0.0 && std::abs(exponent.real() - rn) < 1e-12 &&
        std::abs(rn) <= 64.0)
        return ipow(std::move(x), (int)rn);
    cplx cx;
    if (is_constant(x, &cx)) {
        if (exact_zero(cx)) {
            if (exponent.real() > 0.0) return constant(0.0);
            throw Error("branch-point-at-point", "zero raised to a non-positive power");
        }
        return constant(std::exp(exponent * std::log(cx)));
    }
    return make(NodeKind::Pow, {}, exponent, 0, std::move(x), nullptr);
}

Expr expe(Expr x) {
    cplx cx;
    if (is_constant(x, &cx)) return constant(std::exp(cx));
    return make(NodeKind::Exp, {}, {}, 0, std::move(x), nullptr);
}

Expr loge(Expr x) {
    cplx cx;
    if (is_constant(x, &cx)) {
        if (exact_zero(cx)) throw Error("branch-point-at-point", "log of zero constant");
        return constant(std::log(cx));
    }
    return make(NodeKind::Log, {}, {}, 0, std::move(x), nullptr);
}

Expr sqrte(Expr x) {
    cplx cx;
    if (is_constant(x, &cx)) return constant(std::sqrt(cx));
    return make(NodeKind::Sqrt, {}, {}, 0, std::move(x), nullptr);
}

Expr antideriv(Expr integrand, cplx basepoint) {
    return make(NodeKind::Antideriv, basepoint, {}, 0, std::move(integrand), nullptr);
}

bool expr_equal(const Expr& x, const Expr& y) {
    if (x.get() == y.get()) return true;
    if (!x || !y) return false;
    if (x->kind != y->kind) return false;
    switch (x->kind) {
        case NodeKind::Constant: return x->value == y->value;
        case NodeKind::Var: return true;
        case NodeKind::IntPow:
            return x->ip == y->ip && expr_equal(x->a, y->a);
        case NodeKind::Pow:
            return x->expo == y->expo && expr_equal(x->a, y->a);
        case NodeKind::Antideriv:
            return x->value == y->value && expr_equal(x->a, y->a);
        default:
            return expr_equal(x->a, y->a) &&
                   (x->b == nullptr ? y->b == nullptr : expr_equal(x->b, y->b));
    }
}

bool contains_multivalued(const Expr& e) {
    if (!e) return false;
    if (e->kind == NodeKind::Log || e->kind == NodeKind::Sqrt ||
        e->kind == NodeKind::Pow)
        return true;
    return contains_multivalued(e->a) || contains_multivalued(e->b);
}

// ---------------------------------------------------------------------------
// printing

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_const(cplx v) {
    double re = v.real(), im = v.imag();
    if (im == 0.0) {
        if (re >= 0.0) return fmt_double(re);
        return "(" + fmt_double(re) + ")";
    }
    std::string imabs = fmt_double(std::abs(im)) + "*i";
    if (re == 0.0)
        return im > 0 ? "(" + imabs + ")" : "(-" + imabs + ")";
    std::string s = "(" + fmt_double(re);
    s += im > 0 ? "+" : "-";
    s += imabs + ")";
    return s;
}

int prec_of(const Expr& e) {
    switch (e->kind) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::IntPow: return 3;
        default: return 4;
    }
}

void print_rec(const Expr& e, std::string& out, int parent_prec) {
    int p = prec_of(e);
    bool paren = p < parent_prec;
    if (paren) out += '(';
    switch (e->kind) {
        case NodeKind::Constant: out += fmt_const(e->value); break;
        case NodeKind::Var: out += 'z'; break;
        case NodeKind::Add:
            print_rec(e->a, out, 1);
            out += '+';
            print_rec(e->b, out, 2);
            break;
        case NodeKind::Sub:
            print_rec(e->a, out, 1);
            out += '-';
            print_rec(e->b, out, 2);
            break;
        case NodeKind::Mul:
            print_rec(e->a, out, 2);
            out += '*';
            print_rec(e->b, out, 3);
            break;
        case NodeKind::Div:
            print_rec(e->a, out, 2);
            out += '/';
            print_rec(e->b, out, 3);
            break;
        case NodeKind::IntPow:
            print_rec(e->a, out, 4);
            out += '^';
            if (e->ip < 0)
                out += "(" + std::to_string(e->ip) + ")";
            else
                out += std::to_string(e->ip);
            break;
        case NodeKind::Pow:
            out += "pow(";
            print_rec(e->a, out, 0);
            out += ",";
            out += fmt_const(e->expo);
            out += ')';
            break;
        case NodeKind::Exp:
            out += "exp(";
            print_rec(e->a, out, 0);
            out += ')';
            break;
        case NodeKind::Log:
            out += "log(";
            print_rec(e->a, out, 0);
            out += ')';
            break;
        case NodeKind::Sqrt:
            out += "sqrt(";
            print_rec(e->a, out, 0);
            out += ')';
            break;
        case NodeKind::Antideriv:
            out += "antideriv(";
            print_rec(e->a, out, 0);
            out += ",";
            out += fmt_const(e->value);
            out += ')';
            break;
    }
    if (paren) out += ')';
}

}  // namespace

std::string to_string(const Expr& e) {
    std::string out;
    print_rec(e, out, 0);
    return out;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Parser {
    const std::string& src;
    const std::map<std::string, cplx>& params;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw Error("syntax-error",
                    msg + " at position " + std::to_string(pos));
    }

    void skip_ws() {
        while (pos < src.size() && std::isspace((unsigned char)src[pos])) ++pos;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos < src.size() && src[pos] == c;
    }

    bool accept(char c) {
        if (peek_is(c)) {
            ++pos;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Expr expression() {
        Expr e = term();
        for (;;) {
            if (accept('+'))
                e = add(e, term());
            else if (accept('-'))
                e = sub(e, term());
            else
                return e;
        }
    }

    Expr term() {
        Expr e = unary();
        for (;;) {
            if (accept('*'))
                e = mul(e, unary());
            else if (accept('/'))
                e = divide(e, unary());
            else
                return e;
        }
    }

    Expr unary() {
        if (accept('-')) return neg(unary());
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (!accept('^')) return base;
        Expr ex = accept('-') ? neg(power_operand()) : power_operand();
        cplx c;
        if (!is_constant(ex, &c)) fail("exponent must be constant");
        return cpow(base, c);
    }

    Expr power_operand() { return power(); }

    Expr primary() {
        skip_ws();
        if (pos >= src.size()) fail("unexpected end of input");
        char c = src[pos];
        if (c == '(') {
            ++pos;
            Expr e = expression();
            expect(')');
            return e;
        }
        if (std::isdigit((unsigned char)c) || c == '.') return number();
        if (std::isalpha((unsigned char)c) || c == '_') return identifier();
        fail("unexpected character");
    }

    Expr number() {
        const char* begin = src.c_str() + pos;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos += (std::size_t)(end - begin);
        return constant(v);
    }

    Expr identifier() {
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum((unsigned char)src[pos]) || src[pos] == '_'))
            ++pos;
        std::string name = src.substr(start, pos - start);
        if (name == "z") return var_z();
        if (name == "i") return constant(cplx(0.0, 1.0));
        if (name == "exp" || name == "log" || name == "sqrt") {
            expect('(');
            Expr arg = expression();
            expect(')');
            if (name == "exp") return expe(arg);
            if (name == "log") return loge(arg);
            return sqrte(arg);
        }
        if (name == "pow") {
            expect('(');
            Expr base = expression();
            expect(',');
            Expr ex = expression();
            expect(')');
            cplx c;
            if (!is_constant(ex, &c)) fail("pow exponent must be constant");
            return cpow(base, c);
        }
        if (name == "antideriv") {
            expect('(');
            Expr integrand = expression();
            expect(',');
            Expr bp = expression();
            expect(')');
            cplx c;
            if (!is_constant(bp, &c)) fail("antideriv basepoint must be constant");
            return antideriv(integrand, c);
        }
        auto it = params.find(name);
        if (it == params.end()) {
            pos = start;
            throw Error("unknown-identifier",
                        "unknown identifier '" + name + "' at position " +
                            std::to_string(start));
        }
        return constant(it->second);
    }
};

}  // namespace

Expr parse_expr(const std::string& source, const std::map<std::string, cplx>& params) {
    Parser p{source, params};
    Expr e = p.expression();
    p.skip_ws();
    if (p.pos != source.size()) p.fail("trailing input");
    return e;
}

// ---------------------------------------------------------------------------
// differentiation

Expr differentiate(const Expr& e) {
    switch (e->kind) {
        case NodeKind::Constant: return constant(0.0);
        case NodeKind::Var: return constant(1.0);
        case NodeKind::Add: return add(differentiate(e->a), differentiate(e->b));
        case NodeKind::Sub: return sub(differentiate(e->a), differentiate(e->b));
        case NodeKind::Mul:
            return add(mul(differentiate(e->a), e->b), mul(e->a, differentiate(e->b)));
        case NodeKind::Div:
            return divide(sub(mul(differentiate(e->a), e->b), mul(e->a, differentiate(e->b))),
                          ipow(e->b, 2));
        case NodeKind::IntPow:
            return mul(mul(constant((double)e->ip), ipow(e->a, e->ip - 1)),
                       differentiate(e->a));
        case NodeKind::Pow:
            // mu * x^mu * x' / x keeps the branch tied to this node
            return divide(mul(constant(e->expo), mul(e, differentiate(e->a))), e->a);
        case NodeKind::Exp: return mul(e, differentiate(e->a));
        case NodeKind::Log: return divide(differentiate(e->a), e->a);
        case NodeKind::Sqrt:
            return divide(differentiate(e->a), mul(constant(2.0), e));
        case NodeKind::Antideriv: return e->a;
    }
    throw Error("invalid-spec", "unreachable node kind");
}

// ---------------------------------------------------------------------------
// paths

Path Path::line(cplx a, cplx b) { return Path{{a, b}, false}; }

Path Path::polyline(std::vector<cplx> v) { return Path{std::move(v), false}; }

Path Path::circle(cplx center, double radius, int n, bool ccw) {
    Path p;
    p.closed = true;
    p.pts.reserve((std::size_t)n);
    for (int k = 0; k < n; ++k) {
        double t = 2.0 * M_PI * k / n;
        if (!ccw) t = -t;
        p.pts.push_back(center + std::polar(radius, t));
    }
    return p;
}

void Path::validate() const {
    std::size_t need = closed ? 3 : 2;
    if (pts.size() < need)
        throw Error("invalid-spec", "path has too few vertices");
    for (std::size_t k = 1; k < pts.size(); ++k)
        if (pts[k] == pts[k - 1])
            throw Error("invalid-spec", "path has repeated consecutive vertices");
}

double Path::diameter() const {
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (cplx p : pts) {
        xlo = std::min(xlo, p.real());
        xhi = std::max(xhi, p.real());
        ylo = std::min(ylo, p.imag());
        yhi = std::max(yhi, p.imag());
    }
    return std::hypot(xhi - xlo, yhi - ylo);
}

std::vector<std::pair<cplx, cplx>> Path::segments() const {
    std::vector<std::pair<cplx, cplx>> s;
    for (std::size_t k = 1; k < pts.size(); ++k) s.push_back({pts[k - 1], pts[k]});
    if (closed && !pts.empty()) s.push_back({pts.back(), pts.front()});
    return s;
}

Path Path::reversed() const {
    Path r = *this;
    std::reverse(r.pts.begin(), r.pts.end());
    return r;
}

// ---------------------------------------------------------------------------
// evaluation and continuation

namespace {

struct Plan {
    std::vector<const ExprNode*> topo;  // children before parents
    std::unordered_map<const ExprNode*, int> index;
    std::vector<int> ia, ib;
    std::vector<Expr> roots;  // keep-alive
    std::vector<int> root_idx;
};

void plan_visit(Plan& pl, const Expr& e) {
    if (!e) return;
    if (pl.index.count(e.get())) return;
    plan_visit(pl, e->a);
    plan_visit(pl, e->b);
    pl.index.emplace(e.get(), (int)pl.topo.size());
    pl.topo.push_back(e.get());
    pl.ia.push_back(e->a ? pl.index.at(e->a.get()) : -1);
    pl.ib.push_back(e->b ? pl.index.at(e->b.get()) : -1);
}

Plan make_plan(const std::vector<Expr>& roots) {
    Plan pl;
    pl.roots = roots;
    for (const Expr& r : roots) plan_visit(pl, r);
    for (const Expr& r : roots) pl.root_idx.push_back(pl.index.at(r.get()));
    return pl;
}

bool is_multivalued(NodeKind k) {
    return k == NodeKind::Log || k == NodeKind::Sqrt || k == NodeKind::Pow;
}

struct WalkState {
    cplx z{};
    std::vector<cplx> val;
    std::vector<cplx> warg, wlog;  // multivalued nodes only
    std::vector<cplx> integ;       // antideriv nodes only
};

cplx branch_value(const ExprNode* n, cplx L) {
    switch (n->kind) {
        case NodeKind::Log: return L;
        case NodeKind::Sqrt: return std::exp(0.5 * L);
        case NodeKind::Pow: return std::exp(n->expo * L);
        default: throw Error("invalid-spec", "not a branch node");
    }
}

struct NeedSmallerStep {};

// Fixed 15-point Gauss–Kronrod rule with the embedded 7-point Gauss rule.
constexpr double kGKNode[8] = {
    0.0,
    0.2077849550078985,
    0.4058451513773972,
    0.5860872354676911,
    0.7415311855993945,
    0.8648644233597691,
    0.9491079123427585,
    0.9914553711208126,
};
constexpr double kKWeight[8] = {
    0.2094821410847278,
    0.2044329400752989,
    0.1903505780647854,
    0.1690047266392679,
    0.1406532597155259,
    0.1047900103222502,
    0.06309209262997855,
    0.02293532201052922,
};
// Gauss weights attach to nodes 0, 2, 4, 6 of the table above.
constexpr double kGWeight[4] = {
    0.4179591836734694,
    0.3818300505051189,
    0.2797053914892767,
    0.1294849661688697,
};

class Walker {
  public:
    Walker(Plan plan, cplx at, const BranchState* bs)
        : plan_(std::move(plan)) {
        init(at, bs);
    }

    const Plan& plan() const { return plan_; }
    cplx at() const { return ws_.z; }
    cplx value_of(int root) const { return ws_.val[(std::size_t)plan_.root_idx[(std::size_t)root]]; }

    void restore(const BranchState& bs) { init(bs.at, &bs); }

    BranchState snapshot() const {
        BranchState bs;
        bs.at = ws_.z;
        for (std::size_t i = 0; i < plan_.topo.size(); ++i) {
            const ExprNode* n = plan_.topo[i];
            if (is_multivalued(n->kind))
                bs.branch[n] = {ws_.warg[i], ws_.wlog[i]};
            else if (n->kind == NodeKind::Antideriv)
                bs.integrals[n] = ws_.integ[i];
        }
        return bs;
    }

    // Continue along the path; when integrand_root >= 0, also accumulate
    // ∫ integrand dz with the given absolute tolerance.
    cplx walk(const Path& path, int integrand_root, const QuadratureOptions& qopt,
              const ContinuationOptions& copt) {
        path.validate();
        auto segs = path.segments();
        double total_len = 0.0;
        for (auto& s : segs) total_len += std::abs(s.second - s.first);
        cplx acc{};
        evals_ = 0;
        for (auto& s : segs) {
            double share = std::abs(s.second - s.first) / total_len;
            acc += walk_segment(s.first, s.second, integrand_root,
                                qopt.abs_tol * share, qopt, copt, 0);
        }
        return acc;
    }

  private:
    Plan plan_;
    WalkState ws_;
    std::size_t evals_ = 0;

    void init(cplx at, const BranchState* bs) {
        std::size_t n = plan_.topo.size();
        ws_.z = at;
        ws_.val.assign(n, cplx{});
        ws_.warg.assign(n, cplx{});
        ws_.wlog.assign(n, cplx{});
        ws_.integ.assign(n, cplx{});
        for (std::size_t i = 0; i < n; ++i) {
            const ExprNode* nd = plan_.topo[i];
            if (is_multivalued(nd->kind)) {
                cplx w = ws_.val[(std::size_t)plan_.ia[i]];
                if (bs) {
                    auto it = bs->branch.find(nd);
                    if (it != bs->branch.end()) {
                        ws_.warg[i] = it->second.first;
                        ws_.wlog[i] = it->second.second;
                        ws_.val[i] = branch_value(nd, ws_.wlog[i]);
                        continue;
                    }
                }
                if (exact_zero(w))
                    throw Error("branch-point-at-point",
                                "branch point at the state anchor");
                ws_.warg[i] = w;
                ws_.wlog[i] = std::log(w);
                ws_.val[i] = branch_value(nd, ws_.wlog[i]);
            } else if (nd->kind == NodeKind::Antideriv) {
                if (bs) {
                    auto it = bs->integrals.find(nd);
                    if (it != bs->integrals.end()) {
                        ws_.integ[i] = it->second;
                        ws_.val[i] = it->second;
                        continue;
                    }
                }
                cplx v{};
                if (at != nd->value)
                    v = path_integral(nd->a, Path::line(nd->value, at));
                ws_.integ[i] = v;
                ws_.val[i] = v;
            } else {
                ws_.val[i] = plain_value(i, at, ws_.val);
            }
        }
    }

    cplx plain_value(std::size_t i, cplx z, const std::vector<cplx>& vals) const {
        const ExprNode* n = plan_.topo[i];
        auto child = [&](int idx) { return vals[(std::size_t)idx]; };
        switch (n->kind) {
            case NodeKind::Constant: return n->value;
            case NodeKind::Var: return z;
            case NodeKind::Add: return child(plan_.ia[i]) + child(plan_.ib[i]);
            case NodeKind::Sub: return child(plan_.ia[i]) - child(plan_.ib[i]);
            case NodeKind::Mul: return child(plan_.ia[i]) * child(plan_.ib[i]);
            case NodeKind::Div: {
                cplx den = child(plan_.ib[i]);
                if (exact_zero(den))
                    throw Error("pole-at-point", "division by zero along path");
                return child(plan_.ia[i]) / den;
            }
            case NodeKind::IntPow: return int_power(child(plan_.ia[i]), n->ip);
            case NodeKind::Exp: return std::exp(child(plan_.ia[i]));
            default:
                throw Error("invalid-spec", "plain_value on branch node");
        }
    }

    // Value of node i at a probe point near the current anchor, using the
    // anchored branch data plus a principal-log correction. Valid while the
    // argument of every branch node stays within half a turn of its anchor
    // value.
    cplx eval_near(std::size_t i, cplx zq, std::vector<char>& have,
                   std::vector<cplx>& memo, int adepth) const {
        if (have[i]) return memo[i];
        const ExprNode* n = plan_.topo[i];
        cplx v;
        if (is_multivalued(n->kind)) {
            cplx wq = eval_near((std::size_t)plan_.ia[i], zq, have, memo, adepth);
            cplx r = wq / ws_.warg[i];
            if (!finite_c(r) || std::abs(r - cplx{1.0}) > 0.9) throw NeedSmallerStep{};
            v = branch_value(n, ws_.wlog[i] + std::log(r));
        } else if (n->kind == NodeKind::Antideriv) {
            if (adepth > 3)
                throw Error("invalid-spec", "antiderivative nesting too deep");
            v = ws_.integ[i] + gk_fixed((std::size_t)plan_.ia[i], ws_.z, zq,
                                        nullptr, adepth + 1);
        } else {
            if (plan_.ia[i] >= 0) eval_near((std::size_t)plan_.ia[i], zq, have, memo, adepth);
            if (plan_.ib[i] >= 0) eval_near((std::size_t)plan_.ib[i], zq, have, memo, adepth);
            v = plain_value_memo(i, zq, memo);
        }
        have[i] = 1;
        memo[i] = v;
        return v;
    }

    cplx plain_value_memo(std::size_t i, cplx z, const std::vector<cplx>& memo) const {
        const ExprNode* n = plan_.topo[i];
        auto child = [&](int idx) { return memo[(std::size_t)idx]; };
        switch (n->kind) {
            case NodeKind::Constant: return n->value;
            case NodeKind::Var: return z;
            case NodeKind::Add: return child(plan_.ia[i]) + child(plan_.ib[i]);
            case NodeKind::Sub: return child(plan_.ia[i]) - child(plan_.ib[i]);
            case NodeKind::Mul: return child(plan_.ia[i]) * child(plan_.ib[i]);
            case NodeKind::Div: {
                cplx den = child(plan_.ib[i]);
                if (exact_zero(den))
                    throw Error("pole-at-point", "division by zero along path");
                return child(plan_.ia[i]) / den;
            }
            case NodeKind::IntPow: return int_power(child(plan_.ia[i]), n->ip);
            case NodeKind::Exp: return std::exp(child(plan_.ia[i]));
            default:
                throw Error("invalid-spec", "plain_value_memo on branch node");
        }
    }

    // One GK15 application for node `func` over the straight segment
    // [za, zb], evaluated near the current anchor. Error estimate written
    // to *err when requested.
    cplx gk_fixed(std::size_t func, cplx za, cplx zb, double* err, int adepth) const {
        cplx mid = 0.5 * (za + zb), half = 0.5 * (zb - za);
        cplx k{}, g{};
        std::vector<char> have(plan_.topo.size(), 0);
        std::vector<cplx> memo(plan_.topo.size());
        for (int s = 0; s < 8; ++s) {
            for (int sign = (s == 0 ? 1 : -1); sign <= 1; sign += 2) {
                cplx zq = mid + half * (sign * kGKNode[s]);
                std::fill(have.begin(), have.end(), 0);
                cplx f = eval_near(func, zq, have, memo, adepth);
                if (!finite_c(f)) throw NeedSmallerStep{};
                k += kKWeight[s] * f;
                if (s % 2 == 0) g += kGWeight[s / 2] * f;
                if (s == 0) break;
            }
        }
        k *= half;
        g *= half;
        if (err) *err = std::abs(k - g);
        return k;
    }

    // Attempt one step of continuation to z1 (plus quadrature of the
    // integrand when requested). Returns false when a smaller step is
    // needed.
    bool try_step(cplx z1, int integrand_root, double tol, cplx* contribution) {
        std::size_t n = plan_.topo.size();
        std::vector<cplx> nval(n), nwarg(n), nwlog(n), ninteg(n);
        try {
            for (std::size_t i = 0; i < n; ++i) {
                const ExprNode* nd = plan_.topo[i];
                if (is_multivalued(nd->kind)) {
                    cplx w1 = nval[(std::size_t)plan_.ia[i]];
                    cplx r = w1 / ws_.warg[i];
                    if (!finite_c(r) || std::abs(r - cplx{1.0}) > 0.45) return false;
                    nwarg[i] = w1;
                    nwlog[i] = ws_.wlog[i] + std::log(r);
                    nval[i] = branch_value(nd, nwlog[i]);
                } else if (nd->kind == NodeKind::Antideriv) {
                    double aerr = 0.0;
                    cplx inc = gk_fixed((std::size_t)plan_.ia[i], ws_.z, z1, &aerr, 1);
                    evals_ += 15;
                    if (aerr > 1e-12 * (1.0 + std::abs(inc))) return false;
                    ninteg[i] = ws_.integ[i] + inc;
                    nval[i] = ninteg[i];
                } else {
                    nval[i] = plain_value_memo(i, z1, nval);
                }
                if (!finite_c(nval[i])) return false;
            }
            if (integrand_root >= 0) {
                double qerr = 0.0;
                cplx inc = gk_fixed((std::size_t)plan_.root_idx[(std::size_t)integrand_root],
                                    ws_.z, z1, &qerr, 0);
                evals_ += 15;
                if (qerr > std::max(tol, 1e-16 * (1.0 + std::abs(inc)))) return false;
                *contribution = inc;
            }
        } catch (const NeedSmallerStep&) {
            return false;
        } catch (const Error& e) {
            if (e.code == "pole-at-point") return false;
            throw;
        }
        ws_.z = z1;
        ws_.val.swap(nval);
        ws_.warg.swap(nwarg);
        ws_.wlog.swap(nwlog);
        ws_.integ.swap(ninteg);
        return true;
    }

    cplx walk_segment(cplx za, cplx zb, int integrand_root, double tol,
                      const QuadratureOptions& qopt, const ContinuationOptions& copt,
                      int depth) {
        if (evals_ > qopt.max_evals)
            throw Error("quadrature-failed", "evaluation budget exhausted");
        cplx contribution{};
        if (try_step(zb, integrand_root, tol, &contribution)) return contribution;
        if (depth >= copt.max_depth)
            throw Error(integrand_root >= 0 ? "quadrature-failed"
                                            : "path-too-close-to-singularity",
                        "step size underflow near " + std::to_string(zb.real()) +
                            (zb.imag() < 0 ? "-" : "+") +
                            std::to_string(std::abs(zb.imag())) + "i");
        cplx mid = 0.5 * (za + zb);
        cplx left = walk_segment(za, mid, integrand_root, tol * 0.5, qopt, copt, depth + 1);
        cplx right = walk_segment(mid, zb, integrand_root, tol * 0.5, qopt, copt, depth + 1);
        return left + right;
    }
};

}  // namespace

cplx eval(const Expr& e, cplx z) {
    BranchState none;
    none.at = z;
    return eval(e, z, none);
}

cplx eval(const Expr& e, cplx z, const BranchState& state) {
    std::unordered_map<const ExprNode*, cplx> memo;
    struct Ev {
        cplx z;
        const BranchState& st;
        std::unordered_map<const ExprNode*, cplx>& memo;
        cplx run(const Expr& n) {
            auto it = memo.find(n.get());
            if (it != memo.end()) return it->second;
            cplx v;
            switch (n->kind) {
                case NodeKind::Constant: v = n->value; break;
                case NodeKind::Var: v = z; break;
                case NodeKind::Add: v = run(n->a) + run(n->b); break;
                case NodeKind::Sub: v = run(n->a) - run(n->b); break;
                case NodeKind::Mul: v = run(n->a) * run(n->b); break;
                case NodeKind::Div: {
                    cplx den = run(n->b);
                    if (exact_zero(den))
                        throw Error("pole-at-point", "pole at evaluation point");
                    v = run(n->a) / den;
                    break;
                }
                case NodeKind::IntPow: v = int_power(run(n->a), n->ip); break;
                case NodeKind::Exp: v = std::exp(run(n->a)); break;
                case NodeKind::Log:
                case NodeKind::Sqrt:
                case NodeKind::Pow: {
                    auto bit = st.branch.find(n.get());
                    if (bit != st.branch.end()) {
                        v = branch_value(n.get(), bit->second.second);
                        break;
                    }
                    cplx w = run(n->a);
                    if (exact_zero(w))
                        throw Error("branch-point-at-point",
                                    "branch point at evaluation point");
                    cplx L = std::log(w);
                    v = branch_value(n.get(), L);
                    break;
                }
                case NodeKind::Antideriv: {
                    auto ait = st.integrals.find(n.get());
                    if (ait != st.integrals.end()) {
                        v = ait->second;
                        break;
                    }
                    v = (z == n->value)
                            ? cplx{}
                            : path_integral(n->a, Path::line(n->value, z));
                    break;
                }
            }
            if (!finite_c(v)) throw Error("pole-at-point", "nonfinite value");
            memo.emplace(n.get(), v);
            return v;
        }
    } ev{z, state, memo};
    return ev.run(e);
}

BranchState seed_state(const std::vector<Expr>& roots, cplx at) {
    Walker w(make_plan(roots), at, nullptr);
    return w.snapshot();
}

BranchState continue_state(const std::vector<Expr>& roots, const Path& path,
                           const BranchState& start, const ContinuationOptions& opt) {
    Walker w(make_plan(roots), path.pts.front(), &start);
    QuadratureOptions q;
    w.walk(path, -1, q, opt);
    return w.snapshot();
}

std::pair<cplx, BranchState> continue_along(const Expr& e, const Path& path,
                                            const BranchState& start,
                                            const ContinuationOptions& opt) {
    Walker w(make_plan({e}), path.pts.front(), &start);
    QuadratureOptions q;
    w.walk(path, -1, q, opt);
    return {w.value_of(0), w.snapshot()};
}

std::pair<cplx, BranchState> continue_along(const Expr& e, const Path& path,
                                            const ContinuationOptions& opt) {
    BranchState seed = seed_state({e}, path.pts.front());
    return continue_along(e, path, seed, opt);
}

cplx path_integral(const Expr& e, const Path& path, const QuadratureOptions& opt) {
    BranchState seed = seed_state({e}, path.pts.front());
    return path_integral(e, path, seed, opt);
}

cplx path_integral(const Expr& e, const Path& path, const BranchState& start,
                   const QuadratureOptions& opt) {
    Walker w(make_plan({e}), path.pts.front(), &start);
    ContinuationOptions copt;
    return w.walk(path, 0, opt, copt);
}

cplx loop_period(const Expr& form, const Path& loop, const QuadratureOptions& opt) {
    if (!loop.closed) throw Error("invalid-spec", "loop_period requires a closed path");
    return path_integral(form, loop, opt);
}

int local_exponent(const Expr& e, cplx p) {
    auto rat = expr_to_rational(e);
    if (!rat) throw Error("not-rational", "expression is not in the rational subclass");
    return rational_local_order(*rat, p);
}

int pole_order(const Expr& e, cplx p) {
    int ord = local_exponent(e, p);
    return ord < 0 ? -ord : 0;
}

}  // namespace flatfront
