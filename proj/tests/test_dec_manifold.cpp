#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "generators.hpp"
#include "mxw/dec_manifold.hpp"

#include <cmath>

using namespace mxw;

namespace {

std::vector<FgAbGroup> groups(std::initializer_list<FgAbGroup> g) { return g; }

FgAbGroup Z(std::size_t r = 1) { return make_group(r, {}); }
FgAbGroup T(Int d) { return make_group(0, {d}); }

Int binom(int n, int k)
{
    Int r = 1;
    for (int i = 0; i < k; ++i)
        r = r * (n - i) / (i + 1);
    return r;
}

std::vector<DecManifold> closed_builtins()
{
    return {build_point(),         build_circle(5),      build_torus({3, 4}), build_torus({2, 2, 3}),
            build_surface(2),      build_surface(0),     build_sphere2(),     build_rp3(),
            build_torus({2, 2, 2, 2})};
}

}  // namespace

TEST_CASE("integer cohomology of built-ins")
{
    CHECK(integer_cohomology(build_circle(4)) == groups({Z(), Z()}));
    CHECK(integer_cohomology(build_rp3()) == groups({Z(), Z(0), T(2), Z()}));
    CHECK(integer_cohomology(product(build_circle(3), build_circle(4))) == groups({Z(), Z(2), Z()}));
    CHECK(integer_cohomology(build_surface(2)) == groups({Z(), Z(4), Z()}));
    CHECK(integer_cohomology(build_point()) == groups({Z()}));
    CHECK(integer_cohomology(build_sphere2()) == groups({Z(), Z(0), Z()}));
    auto rp3 = build_rp3();
    CHECK(rp3.cells == std::vector<std::size_t>{4, 12, 16, 8});
    CHECK(cokernel(rp3.d[1]).torsion == std::vector<Int>{2});
    for (int n = 1; n <= 4; ++n) {
        auto t = build_torus(std::vector<int>(n, n == 4 ? 2 : 3));
        auto h = integer_cohomology(t);
        for (int k = 0; k <= n; ++k) {
            CHECK(h[k].torsion.empty());
            CHECK(Int(h[k].free_rank) == binom(n, k));
        }
    }
}

TEST_CASE("invalid parameters")
{
    CHECK_THROWS_AS(build_circle(2), InvalidParameter);
    CHECK_THROWS_AS(build_surface(-1), InvalidParameter);
    CHECK_THROWS_AS(build_torus({}), InvalidParameter);
    CHECK_THROWS_AS(builtin_space("klein"), InvalidParameter);
    CHECK_THROWS_AS(builtin_space("torus2", {{"dims", "3x3x3"}}), InvalidParameter);
    // a non-orientable model (projective plane) fails the orientation check
    IntMatrix d0(1, 1), d1(1, 1);
    d1(0, 0) = 2;
    CHECK_THROWS_AS(make_dec("rp2", 2, {1, 1, 1}, {d0, d1},
                             {RatMatrix::identity(1), RatMatrix::identity(1), RatMatrix::identity(1)}),
                    InvalidParameter);
    RatMatrix bad = RatMatrix::identity(5);
    bad(2, 2) = -1;
    auto c = build_circle(5);
    CHECK_THROWS_AS(make_dec("bad", 1, c.cells, c.d, {bad, c.star[1]}), MetricNotSPD);
}

TEST_CASE("duality and Poincare duality")
{
    for (auto& m : closed_builtins()) {
        INFO(m.name);
        auto md = m.dual();
        CHECK(md.is_dual);
        CHECK(integer_cohomology(md) == integer_cohomology(m));
        auto b = betti_numbers(m);
        for (int k = 0; k <= m.n; ++k)
            CHECK(b[k] == b[m.n - k]);
        auto mdd = md.dual();
        CHECK(mdd.d == m.d);
        CHECK(mdd.star == m.star);
        CHECK(mdd.name == m.name);
        CHECK_FALSE(mdd.is_dual);
        star_sign_audit(md);
    }
}

TEST_CASE("star sign audit")
{
    auto a4 = star_sign_audit(build_torus({2, 2, 2, 2}));
    CHECK(a4.found[2] == 1);
    auto a2 = star_sign_audit(build_torus({3, 3}));
    CHECK(a2.found[1] == -1);
    CHECK(a2.ok);

    // random SPD perturbation of the diagonal star on T^3
    std::mt19937 rng(3);
    auto t3 = build_torus({2, 2, 3});
    std::vector<RatMatrix> star;
    for (int k = 0; k <= 3; ++k) {
        RatMatrix s = t3.star[k];
        const std::size_t n = s.rows();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (gen::uniform(rng, 0, 3) == 0) {
                    Rat e(gen::uniform(rng, -1, 1), 10 * Int(n));
                    e.canonicalize();
                    s(i, j) += e;
                    s(j, i) += e;
                }
        star.push_back(s);
    }
    auto pert = make_dec("t3pert", 3, t3.cells, t3.d, star);
    CHECK(star_sign_audit(pert).ok);
    CHECK(star_sign_audit(pert.dual()).ok);

    auto broken = build_torus({3, 3});
    broken.dual_star[1] = RatMatrix(broken.dual_star[1] * Rat(-1));
    CHECK_THROWS_AS(star_sign_audit(broken), SignViolation);
    CHECK_FALSE(star_sign_audit(broken, false).ok);
}

TEST_CASE("product metric and cell structure")
{
    auto a = build_circle(3), b = build_circle(4);
    auto p = product(a, b);
    CHECK(p.cells == std::vector<std::size_t>{12, 24, 12});
    auto t = build_torus({3, 4});
    CHECK(t.d == p.d);
    CHECK(t.star == p.star);
    CHECK(p.star[1] == block_diag(kron(a.star[0], b.star[1]), kron(a.star[1], b.star[0])));
    auto cube = build_cube(3);
    CHECK_FALSE(cube.closed);
    CHECK(cube.cells == std::vector<std::size_t>{8, 12, 6, 1});
    auto hc = integer_cohomology(cube);
    CHECK(hc[0] == Z());
    for (int k = 1; k <= 3; ++k)
        CHECK(hc[k].trivial());
}

TEST_CASE("Hodge decomposition, exact backend")
{
    for (auto& m : closed_builtins()) {
        INFO(m.name);
        auto h = hodge_decomposition<Rat>(m);
        CHECK(h.residual(m) == 0);
        auto b = betti_numbers(m);
        for (int k = 0; k <= m.n; ++k) {
            CHECK(h.harmonic[k].cols() == b[k]);
            // harmonic forms are closed and coclosed, so d⋆d annihilates them
            CHECK((to_rat(m.dz(k)) * h.harmonic[k]).is_zero());
            if (k > 0)
                CHECK((h.codiff[k - 1] * h.harmonic[k]).is_zero());
            CHECK((h.eta[k] * h.harmonic[k]).is_zero());
            RatMatrix g = h.harmonic[k].transpose() * h.metric[k] * h.harmonic[k];
            CHECK(is_spd(g));
            // Hodge decomposition dimensions: harmonic + exact + coexact
            const std::size_t ex = k > 0 ? rank(to_rat(m.dz(k - 1))) : 0;
            CHECK(h.harmonic[k].cols() + ex + h.coclosed[k].cols() == m.ncells(k));
        }
        auto hd = hodge_decomposition<Rat>(m.dual());
        CHECK(hd.residual(m.dual()) == 0);
    }
}

TEST_CASE("Hodge decomposition, float backend")
{
    for (auto& m : closed_builtins()) {
        INFO(m.name);
        auto h = hodge_decomposition<double>(m);
        CHECK(h.residual(m) < 1e-10);
        for (int k = 0; k <= m.n; ++k) {
            RealMatrix g = h.harmonic[k].transpose() * h.metric[k] * h.harmonic[k];
            CHECK(max_abs(RealMatrix(g - RealMatrix::identity(g.rows()))) < 1e-10);
        }
    }
}

TEST_CASE("Green homotopy on the circle is the Laplacian pseudoinverse")
{
    for (int m : {3, 5, 8}) {
        auto c = build_circle(m);
        auto h = hodge_decomposition<Rat>(c);
        RatMatrix d = to_rat(c.d[0]);
        // uniform metric: the Laplacian is a scalar multiple of d^T d
        RatMatrix lap = RatMatrix(d.transpose() * d) * Rat(m * m);
        CHECK(h.green[0] == rational_pseudoinverse(lap));
        std::mt19937 rng(m);
        for (int it = 0; it < 5; ++it) {
            RatMatrix x = gen::rat_matrix(rng, m, 1);
            RatMatrix lhs = x - h.harmonic[0] * (h.pi[0] * x);
            RatMatrix rhs = RatMatrix(h.eta[1] * (d * x)) * Rat(-1);
            CHECK(lhs == rhs);
            RatMatrix y = gen::rat_matrix(rng, m, 1);
            CHECK(RatMatrix(y - h.harmonic[1] * (h.pi[1] * y)) == RatMatrix(d * (h.eta[1] * y) * Rat(-1)));
        }
    }
}

TEST_CASE("comparison map")
{
    auto t2 = build_torus({4, 4});
    auto h = hodge_decomposition<Rat>(t2);
    auto e1 = comparison_map(t2, h, 1);
    CHECK(max_abs(RealMatrix(e1.E - RealMatrix::identity(2))) < 1e-12);
    auto e0 = comparison_map(t2, h, 0);
    CHECK(max_abs(RealMatrix(e0.E - RealMatrix::identity(1))) < 1e-12);
    auto rp3 = build_rp3();
    auto hr = hodge_decomposition<Rat>(rp3);
    auto e2 = comparison_map(rp3, hr, 2);
    CHECK(e2.E.rows() == 0);
    CHECK(e2.generators.cols() == 0);
    for (auto& m : closed_builtins()) {
        auto hm = hodge_decomposition<Rat>(m);
        for (int k = 0; k <= m.n; ++k) {
            auto e = comparison_map(m, hm, k);
            INFO(m.name << " degree " << k);
            REQUIRE(e.E.rows() == e.E.cols());
            for (std::size_t i = 0; i < e.E.rows(); ++i)
                CHECK(e.E(i, i) > 0);
            // the generators are cohomologous to their harmonic projections
            auto x = solve(to_rat(m.dz(k - 1)), RatMatrix(to_rat(e.generators) - e.harmonic_reps));
            CHECK(x.has_value());
        }
    }
}

TEST_CASE("mesh JSON round trip")
{
    std::vector<DecManifold> ms = closed_builtins();
    ms.push_back(build_torus({3, 2}, {Rat(1, 3), Rat(7, 5)}));
    ms.push_back(build_cube(2));
    for (auto& m : ms) {
        INFO(m.name);
        auto s = to_json(m);
        auto back = dec_from_json(s);
        CHECK(back.d == m.d);
        CHECK(back.star == m.star);
        CHECK(back.cells == m.cells);
        CHECK(back.closed == m.closed);
        CHECK(to_json(back) == s);
    }
    CHECK_THROWS_AS(dec_from_json("{"), InvalidParameter);
    CHECK_THROWS_AS(dec_from_json(R"({"dims": 1, "cells": [2, 2], "coboundary": [], "star": []})"),
                    InvalidParameter);
    auto m = dec_from_json(R"({"dims": 1, "cells": [3, 3],
        "coboundary": [[[0,0,-1],[0,1,1],[1,1,-1],[1,2,1],[2,2,-1],[2,0,1]]],
        "star": [{"diagonal": ["1/3", "1/3", 0.5]}, {"dense": [[3,0,0],[0,3,0],[0,0,3]]}]})");
    CHECK(m.star[0](2, 2) == Rat(1, 2));
    CHECK(integer_cohomology(m) == groups({Z(), Z()}));
}

TEST_CASE("builtin registry")
{
    for (auto& n : builtin_names()) {
        auto m = builtin_space(n);
        CHECK(m.n >= 0);
    }
    CHECK(builtin_space("torus2").cells[0] == 64);
    CHECK(builtin_space("surface", {{"genus", "3"}}).cells[1] == 6);
}
