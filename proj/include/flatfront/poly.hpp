#pragma once

#include <optional>
#include <vector>

#include "flatfront/expr.hpp"

// Univariate polynomials and rational functions over the complex numbers.
// Support for pole analysis and for the closed-form antiderivatives used
// when materializing path-integral factors symbolically.

namespace flatfront {

struct Poly {
    std::vector<cplx> c;  // c[k] is the coefficient of z^k

    Poly() = default;
    explicit Poly(std::vector<cplx> coeffs) : c(std::move(coeffs)) { trim(); }
    static Poly constant(cplx v);
    static Poly variable();

    int degree() const;  // -1 for the zero polynomial
    bool is_zero() const { return degree() < 0; }
    cplx eval(cplx z) const;
    Poly derivative() const;
    Poly integral() const;  // antiderivative with zero constant term
    void trim();
    double coeff_scale() const;
};

Poly operator+(const Poly& p, const Poly& q);
Poly operator-(const Poly& p, const Poly& q);
Poly operator*(const Poly& p, const Poly& q);
Poly operator*(cplx s, const Poly& p);
// Division with remainder: p = q * quot + rem.
void poly_divmod(const Poly& p, const Poly& q, Poly* quot, Poly* rem);

// All complex roots, lexicographically sorted by (re, im).
std::vector<cplx> poly_roots(const Poly& p);

// Roots grouped into clusters within `tol`, with multiplicities.
struct RootCluster {
    cplx location;
    int multiplicity;
};
std::vector<RootCluster> clustered_roots(const Poly& p, double tol = 1e-6);

struct RationalFn {
    Poly num, den;
    cplx eval(cplx z) const;
};

// Conversion from the rational expression subclass (no exp/log/sqrt or
// non-integer powers). Returns nullopt outside the subclass or past the
// degree cap.
std::optional<RationalFn> expr_to_rational(const Expr& e, int max_degree = 64);

// Signed order at p: > 0 zero of that order, < 0 pole of order |.|.
int rational_local_order(const RationalFn& f, cplx p);

// Pullback of the 1-form f(z) dz under z = 1/u, i.e. -f(1/u)/u^2 as a
// rational function of u; its order at u = 0 is the form's order at z = ∞.
RationalFn form_at_infinity(const RationalFn& f);

// Antiderivative of a rational function whose finite poles are all
// simple: H = P(z) + sum r_i log(z - p_i). Returns nullopt when a finite
// pole has order >= 2.
struct LogTerm {
    cplx location;
    cplx residue;
};
struct RationalAntiderivative {
    Poly poly_part;  // antiderivative of the polynomial part
    std::vector<LogTerm> logs;
};
std::optional<RationalAntiderivative> rational_antiderivative(const RationalFn& f);

Expr poly_to_expr(const Poly& p);

}  // namespace flatfront
