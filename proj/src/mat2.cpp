#include "flatfront/mat2.hpp"

#include <cmath>

namespace flatfront {

double Mat2C::frobenius() const {
    return std::sqrt(std::norm(a) + std::norm(b) + std::norm(c) + std::norm(d));
}

bool Mat2C::finite() const {
    auto ok = [](cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); };
    return ok(a) && ok(b) && ok(c) && ok(d);
}

Mat2C operator*(const Mat2C& x, const Mat2C& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
            x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Mat2C operator*(cplx s, const Mat2C& x) { return {s * x.a, s * x.b, s * x.c, s * x.d}; }

Mat2C operator+(const Mat2C& x, const Mat2C& y) {
    return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d};
}

Mat2C operator-(const Mat2C& x, const Mat2C& y) {
    return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d};
}

CP1 moebius_apply(const Mat2C& m, CP1 w) {
    if (w.inf) {
        if (m.c == cplx{}) return CP1::infinity();
        return CP1::of(m.a / m.c);
    }
    cplx den = m.c * w.v + m.d;
    if (den == cplx{}) return CP1::infinity();
    return CP1::of((m.a * w.v + m.b) / den);
}

double psl_distance(const Mat2C& x, const Mat2C& y) {
    return std::min((x - y).frobenius(), (x + y).frobenius());
}

bool is_unitary(const Mat2C& m, double tol) {
    Mat2C r = m * m.adjoint() - Mat2C::identity();
    return r.frobenius() < tol;
}

Mat2C random_unimodular(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        Mat2C m{{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}};
        cplx det = m.det();
        if (std::abs(det) < 0.05) continue;
        cplx s = std::sqrt(det);
        return (cplx{1.0} / s) * m;
    }
}

Mat2C random_unitary_unimodular(std::mt19937_64& rng) {
    // SU(2): [[a, b], [-conj(b), conj(a)]] with |a|^2 + |b|^2 = 1
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        cplx a{u(rng), u(rng)}, b{u(rng), u(rng)};
        double n = std::sqrt(std::norm(a) + std::norm(b));
        if (n < 0.1 || n > 1.0) continue;
        a /= n;
        b /= n;
        return {a, b, -std::conj(b), std::conj(a)};
    }
}

}  // namespace flatfront
