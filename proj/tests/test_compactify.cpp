#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "generators.hpp"
#include "json.hpp"
#include "mxw/compactify.hpp"

#include <algorithm>

using namespace mxw;

namespace {

DecManifold fiber(int y)
{
    if (y == 0)
        return build_point();
    if (y == 1)
        return build_circle(3);
    if (y == 2)
        return build_torus({2, 2});
    return build_torus({2, 2, 2});
}

using XY = std::vector<std::pair<int, int>>;

XY degree_zero(const std::vector<Summand>& s)
{
    XY out;
    for (auto& sl : degree_zero_slots(s))
        out.push_back({sl.xdeg, sl.ydeg});
    std::sort(out.begin(), out.end());
    return out;
}

XY sorted(XY v)
{
    std::sort(v.begin(), v.end());
    return v;
}

const Summand* find_family(const DecompositionReport& r, FamilyKind k, int ell, const std::string& row = "")
{
    for (auto& s : r.summands)
        if (s.kind == k && s.ell == ell && (row.empty() || s.row == row))
            return &s;
    return nullptr;
}

std::size_t count_kind(const DecompositionReport& r, FamilyKind k)
{
    return std::count_if(r.summands.begin(), r.summands.end(), [&](const Summand& s) { return s.kind == k; });
}

RatMatrix one(const Rat& q) { return RatMatrix{{q}}; }

}  // namespace

TEST_CASE("operator words on the base reduce by d∘d = 0 and ⋆⋆ = ±1")
{
    SymbolicBase b{3};
    CHECK(b.reduce(0, "dd").sign == 0);
    CHECK(b.reduce(3, "d").sign == 0);
    auto r = b.reduce(1, "ss");
    CHECK(r.sign == 1);
    CHECK(r.word.empty());
    SymbolicBase b4{4};
    CHECK(b4.reduce(1, "ss").sign == -1);
    CHECK(b4.reduce(2, "ss").sign == 1);
    auto w = b.reduce(0, "dsd");
    CHECK(w.sign == 1);
    CHECK(w.word == "dsd");
    CHECK(w.target == 3);
    CHECK(b.reduce(1, "dssd").sign == 0);
    // constants: d kills them, ⋆ lands in the top degree
    CHECK(b.reduce(-1, "d").sign == 0);
    CHECK(b.reduce(-1, "s").target == 3);
    CHECK(b.reduce(-1, "").target == -1);
    CHECK(word_label("ds") == "⋆d");
    CHECK(word_label("") == "1");
    CHECK_THROWS_AS(b.reduce(0, "x"), std::invalid_argument);
}

TEST_CASE("example tables list the degree-zero slots of each case")
{
    // (form degree on X, degree on Y) of each degree-zero summand, as printed under each table
    CHECK(degree_zero(example_tables(0, 1)) == sorted({{0, 0}, {1, 1}, {2, 0}}));
    CHECK(degree_zero(example_tables(0, 2)) == sorted({{0, 0}, {0, 2}, {2, 0}, {1, 1}}));
    CHECK(degree_zero(example_tables(0, 3)) == sorted({{0, 0}, {1, 1}, {0, 2}}));
    CHECK(degree_zero(example_tables(1, 1)) == sorted({{1, 0}, {0, 1}, {0, 1}, {1, 0}}));
    CHECK(degree_zero(example_tables(1, 2)) == sorted({{1, 0}, {0, 1}, {0, 1}, {1, 0}}));
    CHECK(degree_zero(example_tables(1, 3)) == sorted({{1, 0}, {0, 1}, {0, 1}, {1, 0}}));

    auto t03 = example_tables(0, 3);
    CHECK(std::count_if(t03.begin(), t03.end(), [](auto& s) { return s.kind == FamilyKind::Torsion; }) == 2);
    CHECK_THROWS_AS(example_tables(2, 1), UnsupportedCase);
    CHECK_THROWS_AS(example_tables(0, 4), UnsupportedCase);
}

TEST_CASE("full pushforward reproduces the six tables")
{
    const Rat kappa(3), e(1, 2);
    for (int p = 0; p <= 1; ++p)
        for (int y = 1; y <= 3; ++y) {
            CAPTURE(p);
            CAPTURE(y);
            auto r = pushforward_full(SymbolicBase{4 - y}, fiber(y), p, kappa, e);
            auto diff = diff_tables(r, example_tables(p, y));
            for (auto& s : diff)
                MESSAGE(s);
            CHECK(diff.empty());
            CHECK(r.off_family == 0);
            CHECK(r.ranks_transferred == r.ranks_summands);
            CHECK(r.residual.acyclic);
            for (auto& s : r.summands)
                if (s.kind == FamilyKind::Maxwell) {
                    CHECK(s.K == RatMatrix(kappa * RatMatrix::identity(s.rank)));
                    CHECK(s.E.rows() == s.rank);
                }
        }
}

TEST_CASE("real projective space fiber: torsion families at both shifts")
{
    const DecManifold Y = build_rp3();
    for (int p = 0; p <= 1; ++p) {
        CAPTURE(p);
        auto r = pushforward_full(SymbolicBase{1}, Y, p, 1, 1);
        CHECK(count_kind(r, FamilyKind::Torsion) == 2);
        auto top = find_family(r, FamilyKind::Torsion, 2, "top");
        auto bot = find_family(r, FamilyKind::Torsion, 2, "bot");
        REQUIRE(top);
        REQUIRE(bot);
        CHECK(top->group == make_group(0, {2}));
        CHECK(bot->group == make_group(0, {2}));
        CHECK(top->shift == p + 1);
        CHECK(bot->shift == 4 - p - 1);
        CHECK(diff_tables(r, example_tables(p, 3)).empty());
    }
}

TEST_CASE("point fiber gives back the theory on the base")
{
    auto r = pushforward_full(SymbolicBase{3}, build_point(), 1, 2, 1);
    REQUIRE(r.summands.size() == 1);
    const Summand& s = r.summands[0];
    CHECK(s.kind == FamilyKind::Maxwell);
    CHECK(s.form_degree == 1);
    CHECK(s.K == one(2));
    CHECK(s.E == one(1));
    // Ω^0 → Ω^1 on top, Ω^0 → Ω^1 below, and the two lattices
    CHECK(s.slots.size() == 6);
    CHECK(r.residual.blocks.empty());

    auto pert = pushforward_pert(SymbolicBase{3}, build_point(), 1, 2);
    REQUIRE(pert.summands.size() == 1);
    CHECK(pert.summands[0].slots.size() == 4);
}

TEST_CASE("perturbative pushforward: family lists")
{
    auto em = pushforward_pert(SymbolicBase{3}, build_circle(3), 1, 1);
    REQUIRE(em.summands.size() == 2);
    auto m0 = find_family(em, FamilyKind::Maxwell, 0), m1 = find_family(em, FamilyKind::Maxwell, 1);
    REQUIRE(m0);
    REQUIRE(m1);
    CHECK(m0->form_degree == 1);
    CHECK(m1->form_degree == 0);

    auto t3 = pushforward_pert(SymbolicBase{1}, build_torus({2, 2, 2}), 0, 1);
    CHECK(count_kind(t3, FamilyKind::Maxwell) == 1);
    CHECK(count_kind(t3, FamilyKind::DeRham) == 3);
    for (int k = 0; k <= 2; ++k)
        CHECK(find_family(t3, FamilyKind::DeRham, k, "bot"));
    CHECK(t3.ranks_transferred == t3.ranks_summands);
    // ranks follow the Betti numbers 1, 3, 3, 1 of the three-torus
    CHECK(find_family(t3, FamilyKind::DeRham, 1, "bot")->rank == 3);
}

TEST_CASE("circle fiber: couplings κ·Id and e·E_ℓ depend on the circumference")
{
    // a circle of circumference L carries harmonic representatives 1 (degree 0) and 1/L per unit length
    // (degree 1); in the ⋆-basis of the bottom row the electric lattices are E*_0 = L and E*_1 = 1/L
    const Rat L(2), kappa(5, 3), e(3);
    auto r = pushforward_full(SymbolicBase{3}, build_circle(3, L / 3), 1, kappa, e);
    auto m0 = find_family(r, FamilyKind::Maxwell, 0), m1 = find_family(r, FamilyKind::Maxwell, 1);
    REQUIRE(m0);
    REQUIRE(m1);
    CHECK(m0->rank == 1);
    CHECK(m1->rank == 1);
    CHECK(m0->K == one(kappa));
    CHECK(m1->K == one(kappa));
    CHECK(m0->E == one(e / L));
    CHECK(m1->E == one(e * L));
    CHECK(m0->top_lattice == one(1));
}

TEST_CASE("property: random round tori keep the family skeleton")
{
    std::mt19937 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const Rat a(gen::uniform(rng, 1, 7), gen::uniform(rng, 1, 5));
        const Rat b(gen::uniform(rng, 1, 7), gen::uniform(rng, 1, 5));
        const Rat kappa = gen::nonzero_rat(rng), e = gen::nonzero_rat(rng);
        const int p = gen::uniform(rng, 0, 1);
        auto Y = build_torus({2, 2}, {a / 2, b / 2});
        auto r = pushforward_full(SymbolicBase{2}, Y, p, kappa, e);
        CHECK(diff_tables(r, example_tables(p, 2)).empty());
        CHECK(r.ranks_transferred == r.ranks_summands);
        for (auto& s : r.summands)
            if (s.kind == FamilyKind::Maxwell)
                CHECK(s.K == RatMatrix(kappa * RatMatrix::identity(s.rank)));
    }
}

TEST_CASE("K residual certificates")
{
    for (int y = 2; y <= 3; ++y)
        for (int p = 0; p <= 1; ++p) {
            CAPTURE(y);
            CAPTURE(p);
            const DecManifold Y = fiber(y);
            const int x = 4 - y;
            auto c = verify_tk_bk_acyclic(Y, p, x);
            CHECK(c.acyclic);
            CHECK(c.regime == "p < y");
            CHECK(c.min_singular > 1e-8);
            CHECK(!c.blocks.empty());
            // the transferred residual carries the same singular values
            auto r = pushforward_pert(SymbolicBase{x}, Y, p, Rat(2));
            REQUIRE(r.residual.blocks.size() == c.blocks.size());
            for (std::size_t i = 0; i < c.blocks.size(); ++i) {
                CHECK(r.residual.blocks[i].dim == c.blocks[i].dim);
                CHECK(r.residual.blocks[i].min_singular == doctest::Approx(c.blocks[i].min_singular).epsilon(1e-9));
            }
            CHECK(std::find(r.residual.words.begin(), r.residual.words.end(), "⋆") != r.residual.words.end());
        }
    auto c = verify_tk_bk_acyclic(build_circle(3), 1, 3);
    CHECK(c.regime == "y <= p");
    CHECK(c.acyclic);
}

TEST_CASE("zero metric is rejected before any pushforward")
{
    const DecManifold c = build_circle(3);
    std::vector<RatMatrix> zero{RatMatrix(3, 3), RatMatrix(3, 3)};
    CHECK_THROWS_AS(make_dec("bad", 1, c.cells, c.d, zero), MetricNotSPD);
}

TEST_CASE("invalid pushforward parameters")
{
    CHECK_THROWS_AS(pushforward_full(SymbolicBase{1}, build_circle(3), 1, 1, 1), InvalidParameter);
    CHECK_THROWS_AS(pushforward_full(SymbolicBase{2}, build_circle(3), 0, 0, 1), ZeroCoupling);
    CHECK_THROWS_AS(pushforward_full(SymbolicBase{2}, build_circle(3), 0, 1, 0), ZeroCoupling);
    CHECK_THROWS_AS(pushforward_pert(SymbolicBase{2}, build_interval(), 0, 1), UnsupportedCase);
}

TEST_CASE("empty family ranges are flagged")
{
    auto r = pushforward_full(SymbolicBase{3}, build_circle(3), 1, 1, 1);
    auto has = [&](const std::string& needle) {
        return std::any_of(r.notes.begin(), r.notes.end(), [&](auto& n) { return n.find(needle) != std::string::npos; });
    };
    CHECK(has("top de Rham range"));
    CHECK(has("bottom de Rham range"));
}

TEST_CASE("dual theory pushes forward to matching families")
{
    const Rat kappa(2), e(3, 5);
    for (int y = 1; y <= 3; ++y) {
        const int x = y == 1 ? 2 : (y == 2 ? 2 : 1);
        const int n = x + y;
        for (int p = 0; p <= n - 2; ++p) {
            CAPTURE(y);
            CAPTURE(p);
            const DecManifold Y = fiber(y);
            auto a = pushforward_full(SymbolicBase{x}, Y, p, kappa, e);
            auto b = pushforward_full(SymbolicBase{x}, Y.dual(), n - p - 2, 1 / kappa, 1 / e);
            auto fails = duality_correspondence(a, b);
            for (auto& f : fails)
                MESSAGE(f);
            CHECK(fails.empty());
            CHECK(a.summands.size() == b.summands.size());
        }
    }
}

TEST_CASE("discrete base: realized families have the cohomology of the product theory")
{
    struct Case {
        DecManifold X, Y;
        int p;
    };
    std::vector<Case> cases{{build_circle(3), build_circle(3), 0},
                            {build_circle(3), build_torus({2, 2}), 0},
                            {build_circle(3), build_torus({2, 2}), 1},
                            {build_torus({3, 3}), build_circle(3), 0},
                            {build_torus({3, 3}), build_circle(3), 1}};
    for (auto& c : cases) {
        const int n = c.X.n + c.Y.n;
        CAPTURE(c.X.name);
        CAPTURE(c.Y.name);
        CAPTURE(c.p);
        TheoryParams t;
        t.p = c.p;
        t.n = n;
        t.kappa = Rat(2);
        t.e = Rat(1, 3);
        auto rep = pushforward_full(SymbolicBase{c.X.n}, c.Y, c.p, t.kappa, t.e);
        auto fam = std::make_shared<const MixedComplex>(realize(rep, c.X));
        auto tot = std::make_shared<const MixedComplex>(build_maxwell_circ(product(c.X, c.Y), t));
        Cohomology hf(fam), ht(tot);
        for (int k = std::min(fam->lo, tot->lo); k <= std::max(fam->hi, tot->hi); ++k) {
            CAPTURE(k);
            auto gf = hf.group(k), gt = ht.group(k);
            CHECK_MESSAGE(gf.same_group(gt), gf.str() << " vs " << gt.str());
        }
    }
}

TEST_CASE("report serialization is deterministic")
{
    auto r = pushforward_full(SymbolicBase{2}, build_torus({2, 2}), 1, Rat(1, 2), 2);
    const std::string a = to_json(r), b = to_json(pushforward_full(SymbolicBase{2}, build_torus({2, 2}), 1, Rat(1, 2), 2));
    CHECK(a == b);
    auto j = nlohmann::json::parse(a);
    CHECK(j["summands"].size() == r.summands.size());
    CHECK(j["kappa"] == "1/2");
    CHECK(j["residual"]["acyclic"] == true);
    CHECK(to_markdown(r).find("| family |") != std::string::npos);
}
