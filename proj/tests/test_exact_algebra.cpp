#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "generators.hpp"
#include "mxw/exact_algebra.hpp"

using namespace mxw;

namespace {

bool is_diagonal_chain(const IntMatrix& d, std::size_t rank)
{
    for (std::size_t i = 0; i < d.rows(); ++i)
        for (std::size_t j = 0; j < d.cols(); ++j)
            if (i != j && d(i, j) != 0)
                return false;
    for (std::size_t i = 0; i < rank; ++i) {
        if (d(i, i) <= 0)
            return false;
        if (i + 1 < rank && d(i + 1, i + 1) % d(i, i) != 0)
            return false;
    }
    for (std::size_t i = rank; i < std::min(d.rows(), d.cols()); ++i)
        if (d(i, i) != 0)
            return false;
    return true;
}

Int gcd_entries(const IntMatrix& m)
{
    Int g = 0;
    for (auto& x : m.data()) {
        Int r;
        mpz_gcd(r.get_mpz_t(), g.get_mpz_t(), x.get_mpz_t());
        g = r;
    }
    return g;
}

}  // namespace

TEST_CASE("smith form of identity and zero")
{
    auto s = smith_normal_form(IntMatrix::identity(2));
    CHECK(s.D == IntMatrix::identity(2));
    auto z = smith_normal_form(IntMatrix{{0}});
    CHECK(z.D == IntMatrix{{0}});
    CHECK(z.rank == 0);
}

TEST_CASE("smith form of 2x2 via gcd and determinant")
{
    IntMatrix m{{2, 4}, {6, 8}};
    // d1 is the gcd of the entries, d1*d2 = |det|
    Int d1 = gcd_entries(m);
    Int det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    Int d2 = abs(det) / d1;
    auto s = smith_normal_form(m);
    CHECK(s.D(0, 0) == d1);
    CHECK(s.D(1, 1) == d2);
    CHECK(s.D == IntMatrix{{2, 0}, {0, 4}});
}

TEST_CASE("cokernel examples")
{
    CHECK(cokernel(IntMatrix{{2}}).str() == "ℤ/2");
    auto g = cokernel(IntMatrix(2, 1));
    CHECK(g.free_rank == 2);
    CHECK(g.torsion.empty());
}

TEST_CASE("integer kernel examples")
{
    auto k = integer_kernel_basis(IntMatrix{{1, 1}});
    REQUIRE(k.cols() == 1);
    CHECK(((k(0, 0) == 1 && k(1, 0) == -1) || (k(0, 0) == -1 && k(1, 0) == 1)));
    CHECK(integer_kernel_basis(IntMatrix::identity(3)).cols() == 0);
    // 2x + 4y = 0 and x + 2y = 0 over Z: primitive solution (2, -1)
    auto k2 = integer_kernel_basis(IntMatrix{{2, 4}, {1, 2}});
    REQUIRE(k2.cols() == 1);
    CHECK(abs(k2(0, 0)) == 2);
    CHECK(k2(0, 0) == -2 * k2(1, 0));
}

TEST_CASE("pseudoinverse examples")
{
    CHECK(rational_pseudoinverse(RatMatrix::identity(3)) == RatMatrix::identity(3));
    auto z = rational_pseudoinverse(RatMatrix(2, 3));
    CHECK(z.rows() == 3);
    CHECK(z.cols() == 2);
    CHECK(z.is_zero());
    CHECK(rational_pseudoinverse(RatMatrix{{Rat(2)}}) == RatMatrix{{Rat(1, 2)}});
}

TEST_CASE("smith form properties on random matrices")
{
    std::mt19937 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t r = gen::uniform(rng, 1, 6), c = gen::uniform(rng, 1, 6);
        IntMatrix m = trial % 2 ? gen::int_matrix(rng, r, c) : gen::sparse_int_matrix(rng, r, c);
        auto s = smith_normal_form(m);
        CHECK(s.U * m * s.V == s.D);
        CHECK(abs(determinant(s.U)) == 1);
        CHECK(abs(determinant(s.V)) == 1);
        CHECK(s.U * s.Uinv == IntMatrix::identity(r));
        CHECK(s.V * s.Vinv == IntMatrix::identity(c));
        CHECK(is_diagonal_chain(s.D, s.rank));
        CHECK(s.rank == rank(m));

        auto g = cokernel(m);
        CHECK(g.free_rank == r - s.rank);
        std::vector<Int> nonunit;
        for (std::size_t i = 0; i < s.rank; ++i)
            if (s.D(i, i) != 1)
                nonunit.push_back(s.D(i, i));
        CHECK(g.torsion == nonunit);

        auto k = integer_kernel_basis(m);
        CHECK(k.cols() == c - s.rank);
        CHECK((m * k).is_zero());
        if (k.cols() > 0) {
            // saturated: all invariant factors of the basis are 1
            auto sk = smith_normal_form(k);
            CHECK(sk.rank == k.cols());
            for (std::size_t i = 0; i < sk.rank; ++i)
                CHECK(sk.D(i, i) == 1);
        }
    }
}

TEST_CASE("pseudoinverse identities on random rational matrices")
{
    std::mt19937 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t r = gen::uniform(rng, 1, 5), c = gen::uniform(rng, 1, 5);
        RatMatrix m = gen::rat_matrix(rng, r, c);
        RatMatrix g = rational_pseudoinverse(m);
        CHECK(m * g * m == m);
        CHECK(g * m * g == g);
        // Moore-Penrose symmetry conditions
        CHECK((m * g).transpose() == m * g);
        CHECK((g * m).transpose() == g * m);
    }
}

TEST_CASE("integer solve and lattice helpers")
{
    std::mt19937 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t r = gen::uniform(rng, 1, 5), c = gen::uniform(rng, 1, 5);
        IntMatrix a = gen::int_matrix(rng, r, c, -5, 5);
        IntMatrix x = gen::int_matrix(rng, c, 2, -3, 3);
        IntMatrix b = a * x;
        auto sol = solve_integer(a, b);
        REQUIRE(sol);
        CHECK(a * *sol == b);
    }
    CHECK_FALSE(solve_integer(IntMatrix{{2}}, IntMatrix{{1}}));
    RatMatrix basis{{Rat(1, 2)}};
    CHECK(lattice_coordinates(basis, RatMatrix{{Rat(3, 2)}}).value() == IntMatrix{{3}});
    CHECK_FALSE(lattice_coordinates(basis, RatMatrix{{Rat(1, 3)}}));
    auto lb = lattice_basis(RatMatrix{{Rat(2, 3), Rat(1, 2)}});
    REQUIRE(lb.cols() == 1);
    CHECK(abs(lb(0, 0)) == Rat(1, 6));
}

TEST_CASE("hermite form is canonical for the lattice")
{
    std::mt19937 rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = gen::uniform(rng, 1, 4);
        IntMatrix m;
        do {
            m = gen::int_matrix(rng, n + 1, n, -5, 5);
        } while (rank(m) < n);
        IntMatrix h1 = column_hermite_form(m);
        IntMatrix h2 = column_hermite_form(m * gen::unimodular(rng, n));
        CHECK(h1 == h2);
        CHECK(lattice_coordinates(to_rat(m), to_rat(h1)).has_value());
        CHECK(lattice_coordinates(to_rat(h1), to_rat(m)).has_value());
    }
}

TEST_CASE("group homomorphism reduces mod torsion and detects injectivity")
{
    FgAbGroup z{1, {}};
    FgAbGroup z2 = make_group(0, {Int(2)});
    GroupHom red(z, z2, IntMatrix{{3}});
    CHECK(red.matrix == IntMatrix{{1}});
    CHECK_FALSE(red.is_injective());
    GroupHom dbl(z, z, IntMatrix{{2}});
    CHECK(dbl.is_injective());
    GroupHom inc(z2, make_group(0, {Int(4)}), IntMatrix{{2}});
    CHECK(inc.is_injective());
    CHECK(make_group(0, {Int(2), Int(3)}).torsion == std::vector<Int>{6});
}
