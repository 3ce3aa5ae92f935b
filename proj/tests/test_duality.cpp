#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "generators.hpp"
#include "mxw/duality.hpp"

using namespace mxw;

namespace {

TheoryParams params(int p, int n, Rat kappa = 1, Rat e = 1)
{
    TheoryParams t;
    t.p = p;
    t.n = n;
    t.kappa = kappa;
    t.e = e;
    return t;
}

TheoryParams tparams(int p, int n, Rat m, Rat e, Rat lambda, Rat kappa)
{
    TheoryParams t = params(p, n, kappa, e);
    t.m = m;
    t.lambda = lambda;
    return t;
}

bool same_maps(const ChainMap& a, const ChainMap& b)
{
    for (int k = a.src->lo; k <= a.src->hi; ++k)
        if (a.zz(k) != b.zz(k) || a.zr(k) != b.zr(k) || a.rr(k) != b.rr(k))
            return false;
    return true;
}

// T⟨from⟩ -> T⟨to⟩ written down directly: a on top forms, b on bottom forms, c on the corner
ChainMap direct_scaling(ComplexPtr src, ComplexPtr tgt, const TheoryParams& from, const TheoryParams& to)
{
    const Rat a = to.m / from.m, b = to.e / from.e, c = to.lambda * to.m / (from.lambda * from.m);
    ChainMap f;
    f.src = src;
    f.tgt = tgt;
    for (int k = src->lo; k <= src->hi; ++k) {
        f.fzz[k] = IntMatrix::identity(src->term(k).z_rank);
        f.fzr[k] = RatMatrix(src->term(k).r_dim, src->term(k).z_rank);
        RatMatrix r(src->term(k).r_dim, src->term(k).r_dim);
        for (auto& p : src->rpieces[k - src->lo]) {
            Rat s = 1;
            if (p.name == "corner")
                s = c;
            else if (p.name.rfind("top.W", 0) == 0)
                s = a;
            else if (p.name.rfind("bot.W", 0) == 0)
                s = b;
            r.set_block(p.offset, p.offset, RatMatrix(RatMatrix::identity(p.size) * s));
        }
        f.frr[k] = r;
    }
    return f;
}

DecManifold flat_torus(int n) { return build_torus(std::vector<int>(n, n == 2 ? 3 : 2)); }

}  // namespace

TEST_CASE("identity iso")
{
    auto c = std::make_shared<const MixedComplex>(build_maxwell_circ(build_torus({3, 3}), params(0, 2)));
    ComplexIso id{identity_map(c), identity_map(c), {}};
    auto rep = verify_iso(id);
    CHECK(rep.chain_map);
    CHECK(rep.composites_identity);
    CHECK(rep.cohomology_iso);
    CHECK(rep.failures.empty());
}

TEST_CASE("scaling isomorphisms")
{
    auto t2 = build_torus({3, 3});
    SUBCASE("to itself")
    {
        auto t = tparams(0, 2, 2, 3, 5, 7);
        auto f = scaling_iso(t2, t, t);
        CHECK(verify_iso(f).ok());
        CHECK(same_maps(f.fwd, identity_map(f.fwd.src)));
    }
    SUBCASE("normal form")
    {
        for (auto& m : {t2, build_torus({2, 2, 2})}) {
            const int p = m.n - 2;
            auto from = tparams(p, m.n, 2, 3, 5, 7);
            auto to = tparams(p, m.n, 1, 1, 1, Rat(21, 10));
            CHECK(scaling_invariant(from) == Rat(21, 10));
            auto f = scaling_iso(m, from, to);
            CHECK(verify_iso(f).ok());
            CHECK(same_maps(f.fwd, direct_scaling(f.fwd.src, f.fwd.tgt, from, to)));
        }
    }
    SUBCASE("electric coupling absorbed into κ")
    {
        for (Rat e : {Rat(2), Rat(-1, 3)}) {
            auto from = tparams(0, 2, 1, e, 1, Rat(3, 2));
            auto to = tparams(0, 2, 1, 1, 1, e * Rat(3, 2));
            auto f = scaling_iso(t2, from, to);
            CHECK(verify_iso(f).ok());
            CHECK(same_maps(f.fwd, direct_scaling(f.fwd.src, f.fwd.tgt, from, to)));
        }
    }
    SUBCASE("general pairs with equal invariant")
    {
        std::mt19937 rng(11);
        for (int it = 0; it < 4; ++it) {
            auto from = tparams(0, 2, gen::nonzero_rat(rng), gen::nonzero_rat(rng), gen::nonzero_rat(rng),
                                gen::nonzero_rat(rng));
            auto to = tparams(0, 2, gen::nonzero_rat(rng), gen::nonzero_rat(rng), gen::nonzero_rat(rng), 1);
            to.kappa = scaling_invariant(from) * to.m * to.lambda / to.e;
            auto f = scaling_iso(t2, from, to);
            CHECK(verify_iso(f).ok());
            CHECK(same_maps(f.fwd, direct_scaling(f.fwd.src, f.fwd.tgt, from, to)));
        }
    }
    CHECK_THROWS_AS(scaling_iso(t2, tparams(0, 2, 1, 2, 1, 1), tparams(0, 2, 1, 1, 1, 1)), InvariantMismatch);
}

TEST_CASE("scaling generators commute")
{
    auto t2 = build_torus({3, 3});
    auto t = tparams(0, 2, 2, 3, 5, 7);
    const std::vector<ScalingMove> moves{ScalingMove::TopForms, ScalingMove::BottomForms, ScalingMove::Corner};
    auto scalar = [&](ScalingMove g) {
        return g == ScalingMove::TopForms ? 1 / t.m : (g == ScalingMove::BottomForms ? 1 / t.e : 1 / t.lambda);
    };
    for (auto g : moves)
        for (auto h : moves) {
            if (g == h)
                continue;
            auto sg = scalar(g), sh = scalar(h);
            auto a1 = scaling_move(t2, t, g, sg);
            auto a2 = scaling_move(t2, scaling_move_target(t, g, sg), h, sh);
            auto b1 = scaling_move(t2, t, h, sh);
            auto b2 = scaling_move(t2, scaling_move_target(t, h, sh), g, sg);
            auto ta = scaling_move_target(scaling_move_target(t, g, sg), h, sh);
            auto tb = scaling_move_target(scaling_move_target(t, h, sh), g, sg);
            CHECK(ta.m == tb.m);
            CHECK(ta.e == tb.e);
            CHECK(ta.lambda == tb.lambda);
            CHECK(ta.kappa == tb.kappa);
            CHECK(same_maps(compose(a2.fwd, a1.fwd), compose(b2.fwd, b1.fwd)));
        }
}

TEST_CASE("duality on flat tori")
{
    const std::vector<std::pair<int, int>> pn{{0, 2}, {0, 3}, {1, 3}, {0, 4}, {1, 4}, {2, 4}};
    const std::vector<Rat> cs{Rat(1, 2), Rat(-1, 2), Rat(1), Rat(-1), Rat(3)};
    std::mt19937 rng(5);
    for (auto [p, n] : pn) {
        auto m = flat_torus(n);
        for (int it = 0; it < 2; ++it) {
            const Rat kappa = cs[gen::uniform(rng, 0, 4)], e = cs[gen::uniform(rng, 0, 4)];
            INFO("p=" << p << " n=" << n << " κ=" << kappa << " e=" << e);
            auto d = duality_iso(m, params(p, n, kappa, e));
            CHECK(d.target.p == n - p - 2);
            CHECK(d.target.kappa == 1 / kappa);
            CHECK(d.target.e == 1 / e);
            auto rep = verify_iso(d.iso);
            CHECK(rep.chain_map);
            CHECK(rep.composites_identity);
            CHECK(rep.cohomology_iso);
            // sign table: the top row carries (-1)^{(p+1)(n-p-1)} relative to the bottom one, the corner the opposite
            CHECK(d.iso.signs.at("top.Z0") * d.iso.signs.at("bot.Z0") == m.parity(p + 1));
            CHECK(d.iso.signs.at("corner") == -d.iso.signs.at("bot.Z0"));
        }
    }
}

TEST_CASE("duality examples")
{
    SUBCASE("self-dual 1-form theory in four dimensions")
    {
        auto d = duality_iso(flat_torus(4), params(1, 4));
        CHECK(d.self_dual);
        CHECK(verify_iso(d.iso).ok());
    }
    SUBCASE("T-duality of the compact boson")
    {
        for (Rat R : {Rat(1, 2), Rat(1), Rat(2)}) {
            auto d = duality_iso(build_torus({3, 3}), params(0, 2, 1, R));
            CHECK(d.target.p == 0);
            CHECK(d.target.e == 1 / R);
            CHECK(d.target.kappa == 1);
            CHECK(d.self_dual == (R == 1));
            CHECK(verify_iso(d.iso).ok());
        }
    }
    SUBCASE("Maxwell in three dimensions is dual to a 0-form theory")
    {
        auto d = duality_iso(flat_torus(3), params(1, 3));
        CHECK(d.target.p == 0);
        CHECK_FALSE(d.self_dual);
        CHECK(verify_iso(d.iso).ok());
    }
    CHECK_THROWS_AS(duality_iso(build_torus({3, 3}), tparams(0, 2, 2, 1, 1, 1)), InvalidParameter);
}

TEST_CASE("duality on built-ins")
{
    std::mt19937 rng(17);
    for (auto& m : {build_sphere2(), build_surface(2), build_surface(0), build_rp3(), build_torus({2, 2, 3})}) {
        for (int p = 0; p <= m.n - 2; ++p) {
            auto t = params(p, m.n, gen::nonzero_rat(rng), gen::nonzero_rat(rng));
            INFO(m.name << " p=" << p << " " << t.str());
            auto d = duality_iso(m, t);
            CHECK(verify_iso(d.iso).ok());
            auto& a = *d.iso.fwd.src;
            auto& b = *d.iso.fwd.tgt;
            for (int k = std::min(a.lo, b.lo); k <= std::max(a.hi, b.hi); ++k)
                CHECK(cohomology(a, k).same_group(cohomology(b, k)));
        }
    }
}

TEST_CASE("dualizing twice")
{
    for (auto [p, n] : std::vector<std::pair<int, int>>{{0, 2}, {1, 4}, {0, 3}, {1, 3}}) {
        auto m = flat_torus(n);
        auto t = params(p, n, Rat(-1, 2), Rat(3));
        auto rep = involution_check(m, t);
        INFO("p=" << p << " n=" << n);
        CHECK(rep.target_matches_source);
        CHECK(rep.composite.ok());
        CHECK(rep.blockwise_scalar);
        CHECK(rep.signs_only);
        CHECK(rep.global_sign);
        CHECK(rep.sign == m.parity(p + 1));
    }
    // a single square
    auto sq = involution_check(build_cube(2), params(0, 2));
    CHECK(sq.composite.ok());
    CHECK(sq.global_sign);
}

TEST_CASE("corrupted sign is detected")
{
    auto d = duality_iso(build_torus({3, 3}), params(0, 2, 1, 2));
    for (std::string piece : {"top.W0", "bot.Z1", "corner"}) {
        auto bad = flip_piece_sign(d.iso, piece);
        auto rep = verify_iso(bad);
        CHECK_FALSE(rep.chain_map);
        CHECK_FALSE(rep.ok());
        bool located = false;
        for (auto& f : rep.failures)
            located = located || f.find(piece) != std::string::npos;
        CHECK(located);
    }
}

TEST_CASE("sign solver")
{
    // a consistent choice exists exactly when the blocks agree up to sign
    auto m = build_torus({3, 3});
    auto c = std::make_shared<const MixedComplex>(build_maxwell_circ(m, params(0, 2)));
    std::vector<PieceMap> maps;
    for (int k = c->lo; k <= c->hi; ++k) {
        for (auto& p : c->zpieces[k - c->lo])
            maps.push_back({p.name, p.name, RatMatrix::identity(p.size)});
        for (auto& p : c->rpieces[k - c->lo])
            maps.push_back({p.name, p.name, RatMatrix::identity(p.size)});
    }
    auto s = solve_piece_signs(c, c, maps);
    auto f = assemble_piece_map(c, c, maps, s);
    CHECK(f.verify());
    int first = s.begin()->second;
    for (auto& [name, v] : s)
        CHECK(v == first);
    for (auto& pm : maps)
        if (pm.from == "corner")
            pm.block = RatMatrix(pm.block * Rat(2));
    CHECK_THROWS_AS(solve_piece_signs(c, c, maps), SignSolveFailure);
}

TEST_CASE("duality exchanges electric and magnetic charges")
{
    for (auto [p, n] : std::vector<std::pair<int, int>>{{0, 3}, {1, 3}, {1, 4}}) {
        auto m = flat_torus(n);
        // sectors with magnetic flux need ⋆F in κe times the integral lattice; unit flat tori have ⋆ = 1
        auto t = params(p, n, Rat(2), Rat(-1, 2));
        auto d = duality_iso(m, t);
        const MixedComplex& a = *d.iso.fwd.src;
        const MixedComplex& b = *d.iso.fwd.tgt;
        const int q = n - p - 2;
        const int s_top = d.iso.signs.at("top.Z" + std::to_string(p + 1));
        const int s_bot = d.iso.signs.at("bot.Z" + std::to_string(q + 1));
        INFO("p=" << p << " n=" << n);

        auto check_forward = [&](const FieldConfiguration& c) {
            auto [z, r] = d.iso.fwd.apply(0, c.z, c.r);
            FieldConfiguration img{0, z, r};
            REQUIRE(img.is_cocycle(b));
            auto ca = charges(m, t, a, c);
            auto cb = charges(d.target_space, d.target, b, img);
            CHECK(cb.electric.coords == IntMatrix(ca.magnetic.coords * Int(s_top)));
            CHECK(cb.magnetic.coords == IntMatrix(ca.electric.coords * Int(s_bot)));
            CHECK(cb.electric.group == ca.magnetic.group);
            CHECK(cb.magnetic.group == ca.electric.group);
        };

        auto zc = std::make_shared<const MixedComplex>(integer_cochains(m));
        Cohomology hz(zc);
        const IntMatrix g = hz.z(p + 1).free_gens;
        for (std::size_t j = 0; j < g.cols(); ++j)
            check_forward(magnetic_sector(m, t, a, g.cols_range(j, 1)));

        // an electric sector on the source is a magnetic one on the dual side
        auto zd = std::make_shared<const MixedComplex>(integer_cochains(d.target_space));
        Cohomology hd(zd);
        const IntMatrix h = hd.z(q + 1).free_gens;
        for (std::size_t j = 0; j < h.cols(); ++j) {
            auto sec = magnetic_sector(d.target_space, d.target, b, h.cols_range(j, 1));
            auto [z, r] = d.iso.inv.apply(0, sec.z, sec.r);
            FieldConfiguration back{0, z, r};
            REQUIRE(back.is_cocycle(a));
            CHECK_FALSE(charges(m, t, a, back).electric.is_zero());
            check_forward(back);
        }
    }
}

TEST_CASE("higher rank duality")
{
    auto t3 = build_torus({2, 2, 2});
    std::mt19937 rng(23);
    auto invertible = [&](std::size_t r) {
        for (;;) {
            RatMatrix a = gen::rat_matrix(rng, r, r);
            if (rank(a) == r)
                return a;
        }
    };
    for (int p : {0, 1}) {
        TheoryParams t;
        t.p = p;
        t.n = 3;
        t.K = invertible(2);
        t.E = invertible(2);
        auto d = duality_iso(t3, t);
        INFO("p=" << p);
        CHECK(verify_iso(d.iso).ok());
        CHECK(d.target.E == inverse(t.E));
        CHECK(RatMatrix(d.target.K * d.target.E) == inverse(RatMatrix(t.K * t.E)));
        CHECK(involution_check(t3, t).global_sign);
    }
    // commuting couplings: the dual couplings are the plain inverses
    TheoryParams t;
    t.p = 0;
    t.n = 3;
    t.K = RatMatrix{{Rat(2), Rat(0)}, {Rat(0), Rat(1, 3)}};
    t.E = RatMatrix{{Rat(1), Rat(0)}, {Rat(0), Rat(5)}};
    auto d = duality_iso(t3, t);
    CHECK(d.target.K == inverse(t.K));
    CHECK(verify_iso(d.iso).ok());
}
