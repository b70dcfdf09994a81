#include "flatfront/poly.hpp"

#include <algorithm>
#include <cmath>

namespace flatfront {

namespace {
constexpr double kTrimEps = 0.0;  // exact zeros only
}

Poly Poly::constant(cplx v) {
    Poly p;
    if (v != cplx{}) p.c = {v};
    return p;
}

Poly Poly::variable() {
    Poly p;
    p.c = {cplx{}, cplx{1.0}};
    return p;
}

void Poly::trim() {
    while (!c.empty() && std::abs(c.back()) <= kTrimEps) c.pop_back();
}

int Poly::degree() const { return (int)c.size() - 1; }

cplx Poly::eval(cplx z) const {
    cplx acc{};
    for (std::size_t k = c.size(); k-- > 0;) acc = acc * z + c[k];
    return acc;
}

Poly Poly::derivative() const {
    Poly d;
    for (std::size_t k = 1; k < c.size(); ++k) d.c.push_back((double)k * c[k]);
    d.trim();
    return d;
}

Poly Poly::integral() const {
    Poly p;
    p.c.assign(c.size() + 1, cplx{});
    for (std::size_t k = 0; k < c.size(); ++k) p.c[k + 1] = c[k] / (double)(k + 1);
    p.trim();
    return p;
}

double Poly::coeff_scale() const {
    double s = 0.0;
    for (cplx v : c) s = std::max(s, std::abs(v));
    return s;
}

Poly operator+(const Poly& p, const Poly& q) {
    Poly r;
    r.c.assign(std::max(p.c.size(), q.c.size()), cplx{});
    for (std::size_t k = 0; k < p.c.size(); ++k) r.c[k] += p.c[k];
    for (std::size_t k = 0; k < q.c.size(); ++k) r.c[k] += q.c[k];
    r.trim();
    return r;
}

Poly operator-(const Poly& p, const Poly& q) {
    Poly r;
    r.c.assign(std::max(p.c.size(), q.c.size()), cplx{});
    for (std::size_t k = 0; k < p.c.size(); ++k) r.c[k] += p.c[k];
    for (std::size_t k = 0; k < q.c.size(); ++k) r.c[k] -= q.c[k];
    r.trim();
    return r;
}

Poly operator*(const Poly& p, const Poly& q) {
    if (p.is_zero() || q.is_zero()) return Poly{};
    Poly r;
    r.c.assign(p.c.size() + q.c.size() - 1, cplx{});
    for (std::size_t a = 0; a < p.c.size(); ++a)
        for (std::size_t b = 0; b < q.c.size(); ++b) r.c[a + b] += p.c[a] * q.c[b];
    r.trim();
    return r;
}

Poly operator*(cplx s, const Poly& p) {
    Poly r = p;
    for (cplx& v : r.c) v *= s;
    r.trim();
    return r;
}

void poly_divmod(const Poly& p, const Poly& q, Poly* quot, Poly* rem) {
    if (q.is_zero()) throw Error("invalid-spec", "polynomial division by zero");
    Poly r = p, qt;
    int dq = q.degree();
    if (r.degree() >= dq) qt.c.assign((std::size_t)(r.degree() - dq + 1), cplx{});
    while (r.degree() >= dq) {
        int k = r.degree() - dq;
        cplx f = r.c.back() / q.c.back();
        qt.c[(std::size_t)k] = f;
        for (std::size_t j = 0; j < q.c.size(); ++j)
            r.c[(std::size_t)k + j] -= f * q.c[j];
        r.c.pop_back();
        r.trim();
    }
    qt.trim();
    if (quot) *quot = qt;
    if (rem) *rem = r;
}

std::vector<cplx> poly_roots(const Poly& p) {
    if (p.degree() <= 0) return {};
    // strip roots at the origin, then Durand–Kerner with Newton polish
    std::vector<cplx> roots;
    Poly q = p;
    while (!q.c.empty() && q.c.front() == cplx{}) {
        roots.push_back(cplx{});
        q.c.erase(q.c.begin());
    }
    int n = q.degree();
    if (n >= 1) {
        std::vector<cplx> w((std::size_t)n);
        double radius = 0.0;
        for (int k = 0; k < n; ++k)
            radius = std::max(radius, std::abs(q.c[(std::size_t)k] / q.c.back()));
        radius = 1.0 + radius;
        for (int k = 0; k < n; ++k)
            w[(std::size_t)k] = std::polar(radius, 2.0 * M_PI * k / n + 0.4);
        for (int iter = 0; iter < 600; ++iter) {
            double worst = 0.0;
            for (int k = 0; k < n; ++k) {
                cplx denom = q.c.back();
                for (int j = 0; j < n; ++j)
                    if (j != k) denom *= (w[(std::size_t)k] - w[(std::size_t)j]);
                if (denom == cplx{}) continue;
                cplx delta = q.eval(w[(std::size_t)k]) / denom;
                w[(std::size_t)k] -= delta;
                worst = std::max(worst, std::abs(delta));
            }
            if (worst < 1e-14 * (1.0 + radius)) break;
        }
        Poly dq = q.derivative();
        for (cplx& r : w)
            for (int it = 0; it < 3; ++it) {
                cplx d = dq.eval(r);
                if (std::abs(d) < 1e-30) break;
                r -= q.eval(r) / d;
            }
        roots.insert(roots.end(), w.begin(), w.end());
    }
    std::sort(roots.begin(), roots.end(), [](cplx x, cplx y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
    return roots;
}

std::vector<RootCluster> clustered_roots(const Poly& p, double tol) {
    std::vector<RootCluster> out;
    for (cplx r : poly_roots(p)) {
        bool merged = false;
        for (RootCluster& c : out)
            if (std::abs(c.location - r) <= tol) {
                c.location =
                    (c.location * (double)c.multiplicity + r) / (double)(c.multiplicity + 1);
                c.multiplicity += 1;
                merged = true;
                break;
            }
        if (!merged) out.push_back({r, 1});
    }
    return out;
}

cplx RationalFn::eval(cplx z) const {
    cplx d = den.eval(z);
    if (d == cplx{}) throw Error("pole-at-point", "rational function pole");
    return num.eval(z) / d;
}

namespace {

std::optional<RationalFn> normalize(RationalFn f, int max_degree) {
    if (f.den.is_zero()) return std::nullopt;
    if (f.num.degree() > max_degree || f.den.degree() > max_degree)
        return std::nullopt;
    cplx lead = f.den.c.back();
    f.num = (cplx{1.0} / lead) * f.num;
    f.den = (cplx{1.0} / lead) * f.den;
    return f;
}

std::optional<RationalFn> to_rational_rec(const Expr& e, int max_degree) {
    auto rec = [&](const Expr& x) { return to_rational_rec(x, max_degree); };
    switch (e->kind) {
        case NodeKind::Constant:
            return RationalFn{Poly::constant(e->value), Poly::constant(1.0)};
        case NodeKind::Var:
            return RationalFn{Poly::variable(), Poly::constant(1.0)};
        case NodeKind::Add: {
            auto p = rec(e->a), q = rec(e->b);
            if (!p || !q) return std::nullopt;
            return normalize({p->num * q->den + q->num * p->den, p->den * q->den},
                             max_degree);
        }
        case NodeKind::Sub: {
            auto p = rec(e->a), q = rec(e->b);
            if (!p || !q) return std::nullopt;
            return normalize({p->num * q->den - q->num * p->den, p->den * q->den},
                             max_degree);
        }
        case NodeKind::Mul: {
            auto p = rec(e->a), q = rec(e->b);
            if (!p || !q) return std::nullopt;
            return normalize({p->num * q->num, p->den * q->den}, max_degree);
        }
        case NodeKind::Div: {
            auto p = rec(e->a), q = rec(e->b);
            if (!p || !q) return std::nullopt;
            if (q->num.is_zero()) return std::nullopt;
            return normalize({p->num * q->den, p->den * q->num}, max_degree);
        }
        case NodeKind::IntPow: {
            auto p = rec(e->a);
            if (!p) return std::nullopt;
            int n = e->ip;
            RationalFn r{Poly::constant(1.0), Poly::constant(1.0)};
            RationalFn base = n >= 0 ? *p : RationalFn{p->den, p->num};
            if (n < 0 && base.den.is_zero()) return std::nullopt;
            for (int k = 0; k < std::abs(n); ++k) {
                auto nx = normalize({r.num * base.num, r.den * base.den}, max_degree);
                if (!nx) return std::nullopt;
                r = *nx;
            }
            return r;
        }
        default:
            return std::nullopt;
    }
}

// Order of vanishing of p at x0, by synthetic deflation.
int vanish_order(Poly p, cplx x0) {
    int order = 0;
    while (!p.is_zero()) {
        double scale = 0.0, xp = 1.0;
        for (std::size_t k = 0; k < p.c.size(); ++k) {
            scale += std::abs(p.c[k]) * xp;
            xp *= std::max(1.0, std::abs(x0));
        }
        if (std::abs(p.eval(x0)) > 1e-9 * (scale + 1e-300)) break;
        // p(z) / (z - x0) by synthetic division
        std::vector<cplx> q(p.c.size() > 1 ? p.c.size() - 1 : 0);
        cplx carry{};
        for (std::size_t k = p.c.size(); k-- > 1;) {
            carry = p.c[k] + carry * x0;
            q[k - 1] = carry;
        }
        p = Poly{std::move(q)};
        ++order;
        if (order > 128) break;
    }
    return order;
}

}  // namespace

std::optional<RationalFn> expr_to_rational(const Expr& e, int max_degree) {
    return to_rational_rec(e, max_degree);
}

int rational_local_order(const RationalFn& f, cplx p) {
    if (f.num.is_zero()) return 0;
    return vanish_order(f.num, p) - vanish_order(f.den, p);
}

RationalFn form_at_infinity(const RationalFn& f) {
    // z = 1/u: f(z) dz = -f(1/u)/u^2 du. With n = num, d = den:
    // f(1/u) = u^(deg d - deg n) * rev(n)(u) / rev(d)(u).
    Poly rn = f.num, rd = f.den;
    std::reverse(rn.c.begin(), rn.c.end());
    rn.trim();
    std::reverse(rd.c.begin(), rd.c.end());
    rd.trim();
    int shift = f.den.degree() - f.num.degree() - 2;
    RationalFn out;
    out.num = cplx{-1.0} * rn;
    out.den = rd;
    while (shift > 0) {
        out.num = out.num * Poly::variable();
        --shift;
    }
    while (shift < 0) {
        out.den = out.den * Poly::variable();
        ++shift;
    }
    return out;
}

std::optional<RationalAntiderivative> rational_antiderivative(const RationalFn& f) {
    Poly quot, rem;
    poly_divmod(f.num, f.den, &quot, &rem);
    RationalAntiderivative out;
    out.poly_part = quot.integral();
    if (rem.is_zero()) return out;
    Poly dden = f.den.derivative();
    for (const RootCluster& rc : clustered_roots(f.den)) {
        if (rc.multiplicity != 1) return std::nullopt;
        cplx dv = dden.eval(rc.location);
        if (dv == cplx{}) return std::nullopt;
        out.logs.push_back({rc.location, rem.eval(rc.location) / dv});
    }
    return out;
}

Expr poly_to_expr(const Poly& p) {
    if (p.is_zero()) return constant(0.0);
    // Horner form
    Expr acc = constant(p.c.back());
    for (std::size_t k = p.c.size() - 1; k-- > 0;)
        acc = add(mul(acc, var_z()), constant(p.c[k]));
    return acc;
}

}  // namespace flatfront
