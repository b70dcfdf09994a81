#pragma once

#include <complex>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

// Meromorphic expressions of one complex variable z: construction,
// parsing, exact symbolic differentiation, evaluation, analytic
// continuation along paths, and path/loop integration.
//
// Grammar accepted by parse_expr (UTF-8 text):
//   numbers        decimal and scientific (1.5, 2e-3, .25)
//   i              the imaginary unit
//   z              the variable
//   identifiers    parameters bound at parse time
//   operators      + - * / ^   (^ right-associative, tighter than unary -)
//   functions      exp(e), log(e), sqrt(e), pow(base, const-exponent),
//                  antideriv(e, basepoint)
//   parentheses

namespace flatfront {

using cplx = std::complex<double>;

struct Error : std::runtime_error {
    std::string code;
    Error(std::string c, const std::string& what_arg)
        : std::runtime_error(what_arg), code(std::move(c)) {}
};

enum class NodeKind {
    Constant, Var, Add, Sub, Mul, Div, IntPow, Pow, Exp, Log, Sqrt, Antideriv
};

struct ExprNode;
using Expr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    NodeKind kind{};
    cplx value{};   // Constant: value; Antideriv: basepoint
    cplx expo{};    // Pow: exponent
    int ip = 0;     // IntPow: exponent
    Expr a, b;
};

// Builders. Constant subtrees fold locally; no other rewriting happens.
Expr constant(cplx v);
Expr constant(double v);
Expr var_z();
Expr add(Expr x, Expr y);
Expr sub(Expr x, Expr y);
Expr mul(Expr x, Expr y);
Expr divide(Expr x, Expr y);
Expr neg(Expr x);
Expr ipow(Expr x, int n);
Expr cpow(Expr x, cplx exponent);
Expr expe(Expr x);
Expr loge(Expr x);
Expr sqrte(Expr x);
Expr antideriv(Expr integrand, cplx basepoint);

inline Expr operator+(Expr x, Expr y) { return add(std::move(x), std::move(y)); }
inline Expr operator-(Expr x, Expr y) { return sub(std::move(x), std::move(y)); }
inline Expr operator*(Expr x, Expr y) { return mul(std::move(x), std::move(y)); }
inline Expr operator/(Expr x, Expr y) { return divide(std::move(x), std::move(y)); }
inline Expr operator-(Expr x) { return neg(std::move(x)); }

bool is_constant(const Expr& e, cplx* out = nullptr);
bool expr_equal(const Expr& x, const Expr& y);
bool contains_multivalued(const Expr& e);

std::string to_string(const Expr& e);
Expr parse_expr(const std::string& source,
                const std::map<std::string, cplx>& params = {});

// Exact symbolic derivative with respect to z. Derivatives of sqrt, pow
// and exp reuse the original node so branch assignments carry over to
// derived expressions.
Expr differentiate(const Expr& e);

// Polyline path in the plane. A closed path repeats no endpoint; the
// segment from the last vertex back to the first is implied.
struct Path {
    std::vector<cplx> pts;
    bool closed = false;

    static Path line(cplx a, cplx b);
    static Path polyline(std::vector<cplx> v);
    static Path circle(cplx center, double radius, int n = 64, bool ccw = true);

    void validate() const;
    double diameter() const;
    std::vector<std::pair<cplx, cplx>> segments() const;
    Path reversed() const;
};

// Branch data for the multivalued subterms (log, sqrt, non-integer
// powers) of one or more expressions, anchored at a point. For each such
// node we keep the argument value and a continued logarithm of it; for
// antiderivative nodes the accumulated integral.
struct BranchState {
    cplx at{};
    std::unordered_map<const ExprNode*, std::pair<cplx, cplx>> branch;
    std::unordered_map<const ExprNode*, cplx> integrals;
    bool empty() const { return branch.empty() && integrals.empty(); }
};

// Principal-branch evaluation. Throws Error("pole-at-point") or
// Error("branch-point-at-point") when z is singular for e.
cplx eval(const Expr& e, cplx z);
// Evaluation honoring a branch state anchored at z.
cplx eval(const Expr& e, cplx z, const BranchState& state);

struct ContinuationOptions {
    double clearance_frac = 1e-3;  // of the path bounding-box diameter
    int max_depth = 48;
};

BranchState seed_state(const std::vector<Expr>& roots, cplx at);

// Analytic continuation of every multivalued subterm of `roots` along
// `path`, starting from `start` (which must be anchored at the first
// path vertex). Throws Error("path-too-close-to-singularity") when the
// required step size underflows.
BranchState continue_state(const std::vector<Expr>& roots, const Path& path,
                           const BranchState& start,
                           const ContinuationOptions& opt = {});

std::pair<cplx, BranchState> continue_along(const Expr& e, const Path& path,
                                            const BranchState& start,
                                            const ContinuationOptions& opt = {});
std::pair<cplx, BranchState> continue_along(const Expr& e, const Path& path,
                                            const ContinuationOptions& opt = {});

struct QuadratureOptions {
    double abs_tol = 1e-10;
    std::size_t max_evals = 1000000;
};

// ∫ e(z) dz along the path, with branch continuation of e from `start`
// (principal branches at the first vertex if no state is given).
cplx path_integral(const Expr& e, const Path& path,
                   const QuadratureOptions& opt = {});
cplx path_integral(const Expr& e, const Path& path, const BranchState& start,
                   const QuadratureOptions& opt = {});

// ∮ form dz over a closed loop.
cplx loop_period(const Expr& form, const Path& loop,
                 const QuadratureOptions& opt = {});

// Pole order of a rational expression at a finite point: 0 if regular
// (including zeros), k >= 1 for a pole of order k. Throws
// Error("not-rational") outside the rational subclass.
int pole_order(const Expr& e, cplx p);
// Signed local order: > 0 a zero of that order, < 0 a pole, 0 regular.
int local_exponent(const Expr& e, cplx p);

}  // namespace flatfront
