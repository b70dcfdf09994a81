#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "flatfront/mat2.hpp"

using namespace flatfront;

namespace {
bool cnear(cplx a, cplx b, double tol) { return std::abs(a - b) <= tol; }
}

TEST_CASE("moebius examples") {
    Mat2C id = Mat2C::identity();
    CP1 w = moebius_apply(id, CP1::of(cplx{7.0}));
    CHECK(!w.inf);
    CHECK(cnear(w.v, cplx{7.0}, 1e-15));

    Mat2C j{cplx{}, cplx{-1.0}, cplx{1.0}, cplx{}};
    CP1 wi = moebius_apply(j, CP1::of(cplx(0.0, 1.0)));
    CHECK(cnear(wi.v, cplx(0.0, 1.0), 1e-15));  // -1/i = i

    Mat2C t{cplx{1.0}, cplx{1.0}, cplx{}, cplx{1.0}};
    CHECK(moebius_apply(t, CP1::infinity()).inf);
}

TEST_CASE("moebius action and inverse round-trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        Mat2C a = random_unimodular(rng);
        Mat2C b = random_unimodular(rng);
        cplx w{u(rng), u(rng)};
        CP1 back = moebius_apply(a, moebius_apply(a.inverse_unimodular(), CP1::of(w)));
        REQUIRE(!back.inf);
        CHECK(std::abs(back.v - w) < 1e-10 * (1.0 + std::abs(w)));

        CP1 lhs = moebius_apply(a * b, CP1::of(w));
        CP1 rhs = moebius_apply(a, moebius_apply(b, CP1::of(w)));
        REQUIRE(lhs.inf == rhs.inf);
        if (!lhs.inf)
            CHECK(std::abs(lhs.v - rhs.v) < 1e-9 * (1.0 + std::abs(lhs.v)));
    }
}

TEST_CASE("psl distance") {
    std::mt19937_64 rng(5);
    Mat2C a = random_unimodular(rng);
    CHECK(psl_distance(a, a) == 0.0);
    CHECK(psl_distance(a, cplx{-1.0} * a) == 0.0);

    Mat2C d{cplx{2.0}, cplx{}, cplx{}, cplx{0.5}};
    CHECK(std::abs(psl_distance(Mat2C::identity(), d) - std::sqrt(1.25)) < 1e-12);

    Mat2C b = random_unimodular(rng);
    CHECK(psl_distance(a, b) == doctest::Approx(psl_distance(b, a)));
    CHECK(psl_distance(a, b) > 0.0);
}

TEST_CASE("unitarity") {
    Mat2C m1{cplx(0.0, -1.0), cplx{}, cplx{}, cplx(0.0, 1.0)};
    CHECK(is_unitary(m1, 1e-8));

    cplx zeta = std::polar(1.0, 2.0 * M_PI / 3.0);
    Mat2C m2{cplx{1.0} / zeta, cplx{}, cplx{}, zeta};
    CHECK(is_unitary(m2, 1e-8));

    Mat2C m3{cplx{2.0}, cplx{}, cplx{}, cplx{0.5}};
    CHECK(!is_unitary(m3, 1e-8));

    std::mt19937_64 rng(9);
    for (int k = 0; k < 20; ++k)
        CHECK(is_unitary(random_unitary_unimodular(rng), 1e-12));
}
