#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mixed_gen.hpp"
#include "mxw/maxwell_models.hpp"

using namespace mxw;

namespace {

StructuredAbGroup grp(std::size_t real, std::size_t torus, std::size_t free, std::vector<Int> tors = {})
{
    StructuredAbGroup g;
    g.real_dim = real;
    g.torus_dim = torus;
    g.free_rank = free;
    g.torsion = std::move(tors);
    return g;
}

TheoryParams params(int p, int n, Rat kappa = 1, Rat e = 1)
{
    TheoryParams t;
    t.p = p;
    t.n = n;
    t.kappa = kappa;
    t.e = e;
    return t;
}

bool same_cohomology(const MixedComplex& a, const MixedComplex& b)
{
    const int lo = std::min(a.lo, b.lo), hi = std::max(a.hi, b.hi);
    for (int k = lo; k <= hi; ++k)
        if (!cohomology(a, k).same_group(cohomology(b, k)))
            return false;
    return true;
}

std::vector<DecManifold> surfaces_and_up()
{
    return {build_torus({3, 3}), build_sphere2(), build_surface(2), build_torus({2, 2, 3}), build_rp3()};
}

}  // namespace

TEST_CASE("theory parameter validation")
{
    CHECK_THROWS_AS(params(1, 2).validate(), InvalidParameter);
    CHECK_THROWS_AS(params(-1, 3).validate(), InvalidParameter);
    CHECK_THROWS_AS(params(0, 2, 0).validate(), ZeroCoupling);
    CHECK_THROWS_AS(params(0, 2, 1, 0).validate(), ZeroCoupling);
    CHECK_THROWS_AS(build_T(build_torus({3, 3}), 0, 1, 1, 0, 1), ZeroCoupling);
    RatMatrix sing(2, 2);
    sing(0, 0) = 1;
    CHECK_THROWS_AS(build_higher_rank(build_torus({3, 3}), 0, sing, RatMatrix::identity(2)), SingularMatrix);
    CHECK_THROWS_AS(build_maxwell(build_torus({3, 3}), params(0, 3)), InvalidParameter);
    CHECK_NOTHROW(params(0, 2).validate());
}

TEST_CASE("Bun with connection")
{
    auto c = build_circle(5);
    auto h = cohomology(build_bun_nabla(c, 0), 0);
    CHECK(h.same_group(grp(4, 1, 1)));
    CHECK(h.standin_dim == 4);
    CHECK(h.str(true) == "ℝ/ℤ ⊕ ℤ");

    // positive degrees see integral cohomology shifted by p+1
    for (auto& m : surfaces_and_up()) {
        auto hz = integer_cohomology(m);
        for (int p = 0; p <= m.n; ++p) {
            auto b = build_bun_nabla(m, p);
            INFO(m.name << " p=" << p);
            for (int k = 1; k + p + 1 <= m.n; ++k) {
                auto g = cohomology(b, k);
                CHECK(g.real_dim == 0);
                CHECK(g.torus_dim == 0);
                CHECK(g.free_rank == hz[k + p + 1].free_rank);
                CHECK(g.torsion == hz[k + p + 1].torsion);
            }
            // degree -p: constant gauge parameters modulo integers
            if (p > 0)
                CHECK(cohomology(b, -p).same_group(grp(0, 1, 0)));
            else
                CHECK(cohomology(b, 0).torus_dim == 1);
        }
    }
    auto rp = cohomology(build_bun_nabla(build_rp3(), 1), 0);
    CHECK(rp.torsion == std::vector<Int>{2});
}

TEST_CASE("flat model on a genus two surface is a four-torus")
{
    auto h = cohomology(build_flat(build_surface(2), 1), 0);
    CHECK(h.same_group(grp(0, 4, 0)));
}

TEST_CASE("compact boson on T^2")
{
    auto t2 = build_torus({4, 4});
    for (Rat kappa : {Rat(1, 3), Rat(1), Rat(5)}) {
        auto m = build_maxwell(t2, params(0, 2, kappa));
        CHECK(cohomology(m, 0).same_group(grp(0, 1, 2)));
        CHECK(cohomology(m, 1).same_group(grp(1, 0, 1)));
        CHECK(cohomology(m, -1).trivial());
    }
}

TEST_CASE("p-form theory on T^3: gauge circle and flux sectors")
{
    auto t3 = build_torus({2, 2, 2});
    auto m = build_maxwell(t3, params(1, 3));
    CHECK(cohomology(m, -1).same_group(grp(0, 1, 0)));
    CHECK(cohomology(m, 0).same_group(grp(0, 3, 3)));
}

TEST_CASE("coupling independence of the structured cohomology")
{
    for (auto& m : surfaces_and_up())
        for (int p = 0; p <= m.n - 2; ++p) {
            INFO(m.name << " p=" << p);
            CHECK(same_cohomology(build_maxwell(m, params(p, m.n, 1)), build_maxwell(m, params(p, m.n, Rat(7, 3)))));
            CHECK(cohomology(build_maxwell(m, params(p, m.n)), -p).torus_dim >= 1);
        }
}

TEST_CASE("lifting solver")
{
    SUBCASE("zero partial map lifts to zero")
    {
        auto s = std::make_shared<const MixedComplex>(build_bun_nabla(build_torus({3, 3}), 0));
        ComplexBuilder<Rat> b;
        b.add_r("x", 0, 4);
        b.add_r("y", 1, 2);
        auto t = std::make_shared<const MixedComplex>(b.build());
        auto f = lift_or_throw(zero_map(s, t));
        for (auto& [k, m] : f.fzr)
            CHECK(m.is_zero());
    }

    // κ δ⋆d from Bun_p into the closed dual forms, with no starting guess for the integral blocks
    auto partial = [](const DecManifold& m, int p, const RatMatrix& extra) {
        auto s = std::make_shared<const MixedComplex>(build_bun_nabla(m, p));
        const int n = m.n;
        ComplexBuilder<Rat> b;
        for (int k = n - p; k <= n; ++k)
            b.add_r("D" + std::to_string(k), k - n + p, m.ndual(k));
        for (int k = n - p; k < n; ++k)
            b.rr("D" + std::to_string(k), "D" + std::to_string(k + 1), RatMatrix(-to_rat(m.dual_dz(k))));
        auto t = std::make_shared<const MixedComplex>(b.build());
        ChainMapBuilder<Rat> f(s, t);
        RatMatrix q = to_rat(m.dual_dz(n - p - 1)) * m.star_at(p + 1) * to_rat(m.dz(p));
        if (extra.rows())
            q += extra;
        f.rr("top.W" + std::to_string(p), "D" + std::to_string(n - p), q);
        return f.build();
    };

    SUBCASE("the obstruction vanishes on closed oriented built-ins")
    {
        for (auto& m : surfaces_and_up())
            for (int p = 0; p <= m.n - 2; ++p) {
                INFO(m.name << " p=" << p);
                auto r = lift_chain_map(partial(m, p, {}));
                REQUIRE(std::holds_alternative<ChainMap>(r));
                CHECK(std::get<ChainMap>(r).verify());
                // without the metric-weighted inverse the lift differs but the cone has the same groups
                CHECK(same_cohomology(fiber(std::get<ChainMap>(r)), build_maxwell(m, params(p, m.n))));
            }
    }

    SUBCASE("a corrupted star still lifts since it only enters through d")
    {
        auto t2 = build_torus({3, 3});
        auto bad = t2;
        bad.star[1](0, 0) = -5;
        CHECK(std::holds_alternative<ChainMap>(lift_chain_map(partial(bad, 0, {}))));
    }

    SUBCASE("a real block that does not factor through d is obstructed")
    {
        auto t2 = build_torus({3, 3});
        RatMatrix e(t2.ndual(2), t2.ncells(0));
        e(0, 0) = 1;
        auto r = lift_chain_map(partial(t2, 0, e));
        REQUIRE(std::holds_alternative<Obstruction>(r));
        auto& o = std::get<Obstruction>(r);
        CHECK(o.degree == -1);
        CHECK_FALSE(o.cls.is_zero());
        CHECK_THROWS_AS(lift_or_throw(partial(t2, 0, e)), Obstructed);
    }
}

TEST_CASE("comparison Mxw̃ -> Mxw is a quasi-isomorphism")
{
    for (auto& m : surfaces_and_up())
        for (int p = 0; p <= m.n - 2; ++p) {
            INFO(m.name << " p=" << p);
            auto t = params(p, m.n, Rat(3, 2));
            auto a = std::make_shared<const MixedComplex>(build_maxwell_tilde(m, t));
            auto b = std::make_shared<const MixedComplex>(build_maxwell(m, t));
            auto f = tilde_to_maxwell(m, t, a, b);
            std::string why;
            CHECK_MESSAGE(f.verify(&why), why);
            CHECK(is_quasi_iso(f));
        }
}

TEST_CASE("T-complexes and the charge-discretized model")
{
    auto t2 = build_torus({3, 3});
    auto t = params(0, 2, Rat(2, 3), Rat(5));
    auto circ = build_maxwell_circ(t2, t);
    auto tt = build_T(t2, 0, 1, Rat(5), 1, Rat(2, 3));
    CHECK(circ.zz == tt.zz);
    CHECK(circ.zr == tt.zr);
    CHECK(circ.rr == tt.rr);

    std::mt19937 rng(11);
    for (int i = 0; i < 4; ++i) {
        auto m = build_torus({2, 2, 2});
        int p = gen::uniform(rng, 0, 1);
        CHECK_NOTHROW(build_T(m, p, gen::nonzero_rat(rng), gen::nonzero_rat(rng), gen::nonzero_rat(rng),
                              gen::nonzero_rat(rng)));
    }

    // Mxw° sits inside Mxw̃ through e on the bottom integral row
    auto a = std::make_shared<const MixedComplex>(circ);
    auto b = std::make_shared<const MixedComplex>(build_maxwell_tilde(t2, t));
    auto f = circ_to_tilde(t2, t, a, b);
    CHECK(f.verify());
}

TEST_CASE("quotient of Mxw̃ by Mxw°")
{
    auto t = params(0, 2, 1, Rat(3));
    auto quotient = [&](const DecManifold& m) {
        auto a = std::make_shared<const MixedComplex>(build_maxwell_circ(m, t));
        auto b = std::make_shared<const MixedComplex>(build_maxwell_tilde(m, t));
        auto f = circ_to_tilde(m, t, a, b);
        REQUIRE(f.verify());
        return cone(f).complex;
    };
    // closed T^2: cochains of the dual cells with R/eZ coefficients, shifted by n-p-1
    auto c = quotient(build_torus({3, 3}));
    CHECK(cohomology(*c, -1).same_group(grp(0, 1, 0)));
    CHECK(cohomology(*c, 0).same_group(grp(0, 2, 0)));
    CHECK(cohomology(*c, 1).same_group(grp(0, 1, 0)));

    // a single square: one circle factor; dual cells of a bounded cell see relative cohomology,
    // so it sits in the top degree
    auto d = quotient(build_cube(2));
    std::size_t tori = 0;
    for (int k = d->lo; k <= d->hi; ++k) {
        auto g = cohomology(*d, k);
        CHECK(g.real_dim == 0);
        CHECK(g.free_rank == 0);
        tori += g.torus_dim;
    }
    CHECK(tori == 1);
}

TEST_CASE("augmented de Rham row on a contractible cell is acyclic")
{
    for (int n : {1, 2, 3}) {
        auto c = build_cube(n);
        ComplexBuilder<Rat> b;
        b.add_r("R", -1, 1);
        for (int j = 0; j <= n; ++j)
            b.add_r("W" + std::to_string(j), j, c.ncells(j));
        RatMatrix ones(c.ncells(0), 1);
        for (std::size_t i = 0; i < ones.rows(); ++i)
            ones(i, 0) = 1;
        b.rr("R", "W0", ones);
        for (int j = 0; j < n; ++j)
            b.rr("W" + std::to_string(j), "W" + std::to_string(j + 1), to_rat(c.d[j]));
        auto x = b.build();
        for (int k = x.lo; k <= x.hi; ++k)
            CHECK(cohomology(x, k).trivial());
    }
}

TEST_CASE("discrete Cauchy-Riemann relations on T^2")
{
    // degree-0 real solutions (u, v) of ⋆du = κ δv on the torus are the constant pairs
    auto t2 = build_torus({4, 4});
    auto t = params(0, 2, Rat(2));
    auto c = build_maxwell_tilde(t2, t);
    auto u = c.rpiece(0, "top.W0"), v = c.rpiece(0, "bot.W0");
    REQUIRE(u);
    REQUIRE(v);
    RatMatrix blk(c.term(1).r_dim, u->size + v->size);
    RatMatrix rr = c.d_rr(0);
    blk.set_block(0, 0, rr.cols_range(u->offset, u->size));
    blk.set_block(0, u->size, rr.cols_range(v->offset, v->size));
    CHECK(kernel_basis(blk).cols() == 2);
}

TEST_CASE("MxwBF against Mxw̃ of the dual degree")
{
    auto t3 = build_torus({2, 2, 2});
    auto bf = build_mxwbf(t3, params(0, 3));
    auto tilde = build_maxwell_tilde(t3.dual(), params(1, 3));
    CHECK(same_cohomology(bf, tilde));

    // the middle rows with the corner reproduce Mxw̃_{0,3} blockwise
    auto mid = build_maxwell_tilde(t3, params(0, 3));
    for (int k = mid.lo; k <= mid.hi; ++k)
        for (auto& a : mid.zpieces[k - mid.lo])
            for (auto& b : mid.zpieces.size() > std::size_t(k + 1 - mid.lo) ? mid.zpieces[k + 1 - mid.lo]
                                                                          : std::vector<Piece>{}) {
                auto a2 = bf.zpiece(k, a.name), b2 = bf.zpiece(k + 1, b.name);
                REQUIRE(a2);
                REQUIRE(b2);
                CHECK(bf.d_zz(k).block(b2->offset, a2->offset, b2->size, a2->size) ==
                      mid.d_zz(k).block(b.offset, a.offset, b.size, a.size));
            }
    for (int k = mid.lo; k <= mid.hi; ++k) {
        if (!mid.in_range(k + 1))
            continue;
        for (auto& b : mid.rpieces[k + 1 - mid.lo]) {
            auto b2 = bf.rpiece(k + 1, b.name);
            REQUIRE(b2);
            for (auto& a : mid.rpieces[k - mid.lo]) {
                auto a2 = bf.rpiece(k, a.name);
                REQUIRE(a2);
                CHECK(bf.d_rr(k).block(b2->offset, a2->offset, b2->size, a2->size) ==
                      mid.d_rr(k).block(b.offset, a.offset, b.size, a.size));
            }
            for (auto& a : mid.zpieces[k - mid.lo]) {
                auto a2 = bf.zpiece(k, a.name);
                CHECK(bf.d_zr(k).block(b2->offset, a2->offset, b2->size, a2->size) ==
                      mid.d_zr(k).block(b.offset, a.offset, b.size, a.size));
            }
        }
    }
}

TEST_CASE("higher rank theories")
{
    auto t2 = build_torus({3, 3});
    auto scalar = build_maxwell_circ(t2, params(0, 2, Rat(2), Rat(3)));
    RatMatrix k1(1, 1), e1(1, 1);
    k1(0, 0) = 2;
    e1(0, 0) = 3;
    auto r1 = build_higher_rank(t2, 0, k1, e1);
    CHECK(r1.zz == scalar.zz);
    CHECK(r1.rr == scalar.rr);
    CHECK(r1.zr == scalar.zr);

    RatMatrix k2 = RatMatrix(RatMatrix::identity(2) * Rat(2)), e2 = RatMatrix(RatMatrix::identity(2) * Rat(3));
    auto r2 = build_higher_rank(t2, 0, k2, e2);
    auto tens = tensor_with_group(scalar, make_group(2, {}));
    CHECK(same_cohomology(r2, tens));

    RatMatrix k3{{Rat(1), Rat(2)}, {Rat(0), Rat(3)}}, e3{{Rat(2), Rat(0)}, {Rat(1), Rat(1)}};
    auto r3 = build_higher_rank(build_torus({2, 2, 2}), 0, k3, e3);
    CHECK(r3.term(0).z_rank == 2 * (24 + 24));
}

TEST_CASE("charges")
{
    auto t4 = build_torus({2, 2, 2, 2});
    auto t = params(1, 4);
    auto model = build_maxwell_circ(t4, t);
    auto zero = FieldConfiguration::zero(model, 0);
    auto ch0 = charges(t4, t, model, zero);
    CHECK(ch0.magnetic.is_zero());
    CHECK(ch0.electric.is_zero());
    CHECK(ch0.magnetic.group.free_rank == 6);
    CHECK(ch0.electric.group.free_rank == 6);

    auto zc = std::make_shared<const MixedComplex>(integer_cochains(t4));
    Cohomology hz(zc);
    const IntMatrix gens = hz.z(2).free_gens;
    REQUIRE(gens.cols() == 6);
    for (std::size_t j = 0; j < gens.cols(); ++j) {
        IntMatrix g = gens.cols_range(j, 1);
        auto sec = magnetic_sector(t4, t, model, g);
        REQUIRE(sec.is_cocycle(model));
        auto ch = charges(t4, t, model, sec);
        auto want = hz.coordinates(2, g, RatMatrix(0, 1)).discrete;
        CHECK(ch.magnetic.coords == want);

        // gauge invariance: add the coboundary of a random degree -1 element
        std::mt19937 rng(j);
        auto x = FieldConfiguration::zero(model, -1);
        x.z = gen::int_matrix(rng, x.z.rows(), 1, -2, 2);
        x.r = gen::rat_matrix(rng, x.r.rows(), 1);
        auto moved = sec.plus_coboundary(model, x);
        REQUIRE(moved.is_cocycle(model));
        auto ch2 = charges(t4, t, model, moved);
        CHECK(ch2.magnetic.coords == ch.magnetic.coords);
        CHECK(ch2.electric.coords == ch.electric.coords);

        // a 2-cycle pairing to one with the generator
        IntMatrix cyc = integer_kernel_basis(IntMatrix(t4.d[1].transpose()));
        IntMatrix row = g.transpose() * cyc;
        auto y = solve_integer(row, IntMatrix{{Int(1)}});
        REQUIRE(y);
        IntMatrix N = cyc * *y;
        CHECK(symmetry_pairing(t4, t, model, N, Rat(1, 3), sec) == Rat(1, 3));
        CHECK(symmetry_pairing(t4, t, model, N, Rat(0), sec) == 0);
        CHECK(symmetry_pairing(t4, t, model, N, Rat(2, 5), zero) == 0);
    }
    auto bad = zero;
    bad.z(0, 0) = 1;
    if (!bad.is_cocycle(model))
        CHECK_THROWS_AS(charges(t4, t, model, bad), NotCocycle);
    CHECK_THROWS_AS(symmetry_pairing(t4, t, model, IntMatrix(3, 1), Rat(1, 2), zero), DegreeMismatch);
}

TEST_CASE("charge sequence")
{
    auto t2 = build_torus({3, 3});
    auto t = params(0, 2, Rat(1), Rat(2));
    auto s = charge_sequence(t2, t);
    CHECK(s.incl.verify());
    CHECK(s.proj.verify());
    auto les = les_of_ses(s.sub, s.total, s.quot, s.incl, s.proj);
    CHECK(les.exact);
    // the quotient carries H^{p+1}(M,Z) ⊕ H^{n-p-1}(M*,Z) in degree 0
    CHECK(cohomology(*s.quot, 0).same_group(grp(0, 0, 4)));
}

TEST_CASE("BV action and pairing")
{
    std::mt19937 rng(5);
    auto t2 = build_torus({3, 4});
    auto t = params(0, 2, Rat(7, 2));
    auto pert = build_maxwell_pert(t2, t);
    for (int it = 0; it < 5; ++it) {
        auto a = FieldConfiguration::zero(pert, 0);
        a.r = gen::rat_matrix(rng, a.r.rows(), 1);
        RatMatrix d = to_rat(t2.d[0]);
        RatMatrix direct = a.r.transpose() * d.transpose() * t2.star[1] * d * a.r * t.kappa;
        CHECK(bv_action(t2, t, pert, {a}) == direct(0, 0));
    }
    CHECK(bv_action(t2, t, pert, {FieldConfiguration::zero(pert, 0)}) == 0);

    auto t3 = build_torus({2, 2, 3});
    auto t1 = params(1, 3, Rat(3));
    auto p3 = build_maxwell_pert(t3, t1);
    auto phi = FieldConfiguration::zero(p3, -1);
    phi.r = gen::rat_matrix(rng, phi.r.rows(), 1);
    FieldConfiguration gauge{0, IntMatrix(0, 1), RatMatrix(p3.d_rr(-1) * phi.r)};
    CHECK(bv_action(t3, t1, p3, {gauge}) == 0);
    for (int k = p3.lo; k <= p3.hi; ++k) {
        auto P = bv_pairing_matrix(t3, t1, p3, k);
        REQUIRE(P.rows() == P.cols());
        CHECK(rank(P) == P.rows());
        CHECK(bv_pairing_matrix(t3, t1, p3, 1 - k) == RatMatrix(P.transpose() * Rat(-1)));
    }
}

TEST_CASE("basis invariance of model cohomology")
{
    std::mt19937 rng(17);
    auto t2 = build_torus({3, 3});
    std::vector<MixedComplex> models = {build_maxwell(t2, params(0, 2)), build_maxwell_circ(t2, params(0, 2, 2, 3)),
                                        build_bun_nabla(build_rp3(), 1)};
    for (auto& m : models) {
        auto a = gen::random_auto(rng, m);
        CHECK(same_cohomology(m, gen::transport(m, a)));
    }
}
