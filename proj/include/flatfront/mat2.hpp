#pragma once

#include <complex>
#include <random>

namespace flatfront {

using cplx = std::complex<double>;

// Numeric 2x2 complex matrix, row-major entries a b / c d.
struct Mat2C {
    cplx a{}, b{}, c{}, d{};

    static Mat2C identity() { return {1.0, 0.0, 0.0, 1.0}; }

    cplx det() const { return a * d - b * c; }
    cplx trace() const { return a + d; }
    Mat2C adjoint() const {  // conjugate transpose
        return {std::conj(a), std::conj(c), std::conj(b), std::conj(d)};
    }
    Mat2C inverse_unimodular() const { return {d, -b, -c, a}; }
    double frobenius() const;
    bool finite() const;
};

Mat2C operator*(const Mat2C& x, const Mat2C& y);
Mat2C operator*(cplx s, const Mat2C& x);
Mat2C operator+(const Mat2C& x, const Mat2C& y);
Mat2C operator-(const Mat2C& x, const Mat2C& y);

// A point of the Riemann sphere C ∪ {∞}.
struct CP1 {
    cplx v{};
    bool inf = false;

    static CP1 infinity() { return {cplx{}, true}; }
    static CP1 of(cplx w) { return {w, false}; }
};

// Möbius action of a unimodular matrix on C ∪ {∞}; total in projective
// arithmetic.
CP1 moebius_apply(const Mat2C& m, CP1 w);

// Distance in PSL(2,C): min(|A-B|_F, |A+B|_F).
double psl_distance(const Mat2C& x, const Mat2C& y);

bool is_unitary(const Mat2C& m, double tol = 1e-8);

Mat2C random_unimodular(std::mt19937_64& rng);
Mat2C random_unitary_unimodular(std::mt19937_64& rng);

}  // namespace flatfront
