#include "mxw/duality.hpp"

#include <deque>
#include <set>

namespace mxw {

namespace {

struct Loc {
    std::string name;
    int degree = 0;
    bool integral = false;
    std::size_t offset = 0, size = 0;
};

Loc find_piece(const MixedComplex& c, const std::string& name)
{
    auto l = c.locate(name);
    if (!l)
        throw InvalidParameter("no piece named " + name);
    auto [k, z] = *l;
    auto p = z ? c.zpiece(k, name) : c.rpiece(k, name);
    return {name, k, z, p->offset, p->size};
}

std::vector<Loc> pieces_at(const MixedComplex& c, int k)
{
    std::vector<Loc> out;
    if (!c.in_range(k))
        return out;
    for (auto& p : c.zpieces[k - c.lo])
        out.push_back({p.name, k, true, p.offset, p.size});
    for (auto& p : c.rpieces[k - c.lo])
        out.push_back({p.name, k, false, p.offset, p.size});
    return out;
}

std::vector<Loc> all_pieces(const MixedComplex& c)
{
    std::vector<Loc> out;
    for (int k = c.lo; k <= c.hi; ++k)
        for (auto& l : pieces_at(c, k))
            out.push_back(l);
    return out;
}

// block of the differential from piece a to piece b
RatMatrix dblock(const MixedComplex& c, const Loc& a, const Loc& b)
{
    if (b.degree != a.degree + 1 || (!a.integral && b.integral))
        return RatMatrix(b.size, a.size);
    if (a.integral && b.integral)
        return to_rat(c.d_zz(a.degree).block(b.offset, a.offset, b.size, a.size));
    if (a.integral)
        return c.d_zr(a.degree).block(b.offset, a.offset, b.size, a.size);
    return c.d_rr(a.degree).block(b.offset, a.offset, b.size, a.size);
}

// full residual f∘d - d∘f out of degree k, as (zz, zr, rr) blocks over Q
struct Residual {
    RatMatrix zz, zr, rr;
};

Residual residual(const ChainMap& f, int k)
{
    const MixedComplex& S = *f.src;
    const MixedComplex& T = *f.tgt;
    Residual r;
    r.zz = to_rat(f.zz(k + 1) * S.d_zz(k)) - to_rat(T.d_zz(k) * f.zz(k));
    r.zr = RatMatrix(f.zr(k + 1) * to_rat(S.d_zz(k))) + RatMatrix(f.rr(k + 1) * S.d_zr(k)) -
           RatMatrix(T.d_zr(k) * to_rat(f.zz(k))) - RatMatrix(T.d_rr(k) * f.zr(k));
    r.rr = RatMatrix(f.rr(k + 1) * S.d_rr(k)) - RatMatrix(T.d_rr(k) * f.rr(k));
    return r;
}

bool same_complex(const MixedComplex& a, const MixedComplex& b)
{
    if (a.lo != b.lo || a.hi != b.hi || a.terms != b.terms)
        return false;
    for (int k = a.lo; k <= a.hi; ++k)
        if (a.d_zz(k) != b.d_zz(k) || a.d_zr(k) != b.d_zr(k) || a.d_rr(k) != b.d_rr(k))
            return false;
    return true;
}

bool is_identity(const ChainMap& f)
{
    const MixedComplex& c = *f.src;
    for (int k = c.lo; k <= c.hi; ++k) {
        const MixedTerm t = c.term(k);
        if (f.zz(k) != IntMatrix::identity(t.z_rank) || !f.zr(k).is_zero() || f.rr(k) != RatMatrix::identity(t.r_dim))
            return false;
    }
    return true;
}

std::string rat_str(const Rat& x)
{
    return x.get_str();
}

RatMatrix eye(std::size_t n) { return RatMatrix::identity(n); }

}  // namespace

// ---- piecewise maps ----

std::map<std::string, int> solve_piece_signs(ComplexPtr src, ComplexPtr tgt, const std::vector<PieceMap>& maps)
{
    std::vector<Loc> a, b;
    std::map<std::string, std::size_t> by_target;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        a.push_back(find_piece(*src, maps[i].from));
        b.push_back(find_piece(*tgt, maps[i].to));
        if (a[i].degree != b[i].degree || a[i].integral != b[i].integral)
            throw InvalidParameter("piece map " + maps[i].from + " -> " + maps[i].to + " changes degree or kind");
        if (maps[i].block.rows() != b[i].size || maps[i].block.cols() != a[i].size)
            throw InvalidParameter("piece map " + maps[i].from + " -> " + maps[i].to + " has the wrong shape");
        by_target[maps[i].to] = i;
    }

    // relation[i] = list of (j, s) meaning sign_j = s * sign_i
    std::vector<std::vector<std::pair<std::size_t, int>>> rel(maps.size());
    auto fail = [&](std::size_t i, const std::string& to, const std::string& what) {
        throw SignSolveFailure("no sign makes " + maps[i].from + " -> " + to + " commute: " + what);
    };
    for (std::size_t i = 0; i < maps.size(); ++i) {
        for (auto& t : pieces_at(*tgt, a[i].degree + 1)) {
            RatMatrix Y = dblock(*tgt, b[i], t) * maps[i].block;
            auto it = by_target.find(t.name);
            RatMatrix X(t.size, a[i].size);
            if (it != by_target.end())
                X = maps[it->second].block * dblock(*src, a[i], a[it->second]);
            if (X.is_zero() && Y.is_zero())
                continue;
            if (it == by_target.end() || X.is_zero() || Y.is_zero())
                fail(i, t.name, "one side vanishes");
            int s = 0;
            if (X == Y)
                s = 1;
            else if (X == RatMatrix(Y * Rat(-1)))
                s = -1;
            else
                fail(i, t.name, "blocks differ by more than a sign");
            rel[i].push_back({it->second, s});
            rel[it->second].push_back({i, s});
        }
    }

    std::vector<int> sign(maps.size(), 0);
    for (std::size_t root = 0; root < maps.size(); ++root) {
        if (sign[root])
            continue;
        sign[root] = 1;
        std::deque<std::size_t> queue{root};
        while (!queue.empty()) {
            const std::size_t i = queue.front();
            queue.pop_front();
            for (auto [j, s] : rel[i]) {
                if (!sign[j]) {
                    sign[j] = s * sign[i];
                    queue.push_back(j);
                } else if (sign[j] != s * sign[i]) {
                    throw SignSolveFailure("inconsistent sign constraints at " + maps[i].from + " and " +
                                           maps[j].from);
                }
            }
        }
    }
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < maps.size(); ++i)
        out[maps[i].from] = sign[i];
    return out;
}

ChainMap assemble_piece_map(ComplexPtr src, ComplexPtr tgt, const std::vector<PieceMap>& maps,
                            const std::map<std::string, int>& signs)
{
    ChainMap f;
    f.src = src;
    f.tgt = tgt;
    for (int k = src->lo; k <= src->hi; ++k) {
        const MixedTerm s = src->term(k), t = tgt->term(k);
        f.fzz[k] = IntMatrix(t.z_rank, s.z_rank);
        f.fzr[k] = RatMatrix(t.r_dim, s.z_rank);
        f.frr[k] = RatMatrix(t.r_dim, s.r_dim);
    }
    for (auto& pm : maps) {
        const Loc a = find_piece(*src, pm.from), b = find_piece(*tgt, pm.to);
        auto it = signs.find(pm.from);
        const int s = it == signs.end() ? 1 : it->second;
        RatMatrix blk = s == 1 ? pm.block : RatMatrix(pm.block * Rat(-1));
        if (a.integral) {
            auto z = to_int(blk);
            if (!z)
                throw InvalidParameter("non-integral block on lattice piece " + pm.from);
            f.fzz[a.degree].set_block(b.offset, a.offset, *z);
        } else {
            f.frr[a.degree].set_block(b.offset, a.offset, blk);
        }
    }
    return f;
}

ChainMap invert(const ChainMap& f)
{
    ChainMap g;
    g.src = f.tgt;
    g.tgt = f.src;
    const int lo = std::min(f.src->lo, f.tgt->lo), hi = std::max(f.src->hi, f.tgt->hi);
    for (int k = lo; k <= hi; ++k) {
        const RatMatrix A = to_rat(f.zz(k));
        const RatMatrix R = f.rr(k);
        const std::string deg = " in degree " + std::to_string(k);
        if (A.rows() != A.cols() || rank(A) != A.rows())
            throw NotInvertible("lattice part not invertible" + deg);
        if (R.rows() != R.cols() || rank(R) != R.rows())
            throw NotInvertible("real part not invertible" + deg);
        const RatMatrix Ai = inverse(A), Ri = inverse(R);
        auto Az = to_int(Ai);
        if (!Az)
            throw NotInvertible("lattice part not unimodular" + deg);
        g.fzz[k] = *Az;
        g.frr[k] = Ri;
        g.fzr[k] = RatMatrix(Ri * f.zr(k) * Ai * Rat(-1));
    }
    return g;
}

std::vector<std::string> chain_map_defects(const ChainMap& f)
{
    std::vector<std::string> out;
    const int lo = std::min(f.src->lo, f.tgt->lo) - 1, hi = std::max(f.src->hi, f.tgt->hi);
    for (int k = lo; k <= hi; ++k) {
        const Residual r = residual(f, k);
        if (r.zz.is_zero() && r.zr.is_zero() && r.rr.is_zero())
            continue;
        bool located = false;
        for (auto& a : pieces_at(*f.src, k))
            for (auto& b : pieces_at(*f.tgt, k + 1)) {
                if (!a.integral && b.integral)
                    continue;
                const RatMatrix& m = a.integral ? (b.integral ? r.zz : r.zr) : r.rr;
                if (!m.block(b.offset, a.offset, b.size, a.size).is_zero()) {
                    out.push_back("degree " + std::to_string(k) + ": " + a.name + " -> " + b.name);
                    located = true;
                }
            }
        if (!located)
            out.push_back("degree " + std::to_string(k) + ": unlabeled block");
    }
    return out;
}

IsoReport verify_iso(const ComplexIso& f)
{
    IsoReport rep;
    rep.chain_map = f.fwd.verify() && f.inv.verify();
    if (!rep.chain_map) {
        for (auto& s : chain_map_defects(f.fwd))
            rep.failures.push_back("forward map: " + s);
        for (auto& s : chain_map_defects(f.inv))
            rep.failures.push_back("inverse map: " + s);
    }
    const bool shapes = same_complex(*f.fwd.src, *f.inv.tgt) && same_complex(*f.fwd.tgt, *f.inv.src);
    rep.composites_identity = shapes && is_identity(compose(f.inv, f.fwd)) && is_identity(compose(f.fwd, f.inv));
    if (!rep.composites_identity)
        rep.failures.push_back("composites are not the identity");
    if (rep.chain_map) {
        auto q = quasi_iso_report(f.fwd);
        rep.cohomology_iso = q.iso;
        for (auto& s : q.failures)
            rep.failures.push_back(s);
    }
    return rep;
}

ComplexIso flip_piece_sign(const ComplexIso& f, const std::string& piece)
{
    ComplexIso g = f;
    const Loc a = find_piece(*f.fwd.src, piece);
    auto neg = [&](RatMatrix& m) { m.set_block(0, a.offset, RatMatrix(m.block(0, a.offset, m.rows(), a.size) * Rat(-1))); };
    if (a.integral) {
        IntMatrix& z = g.fwd.fzz[a.degree];
        z.set_block(0, a.offset, IntMatrix(z.block(0, a.offset, z.rows(), a.size) * Int(-1)));
        neg(g.fwd.fzr[a.degree]);
    } else {
        neg(g.fwd.frr[a.degree]);
    }
    if (g.signs.count(piece))
        g.signs[piece] = -g.signs[piece];
    return g;
}

// ---- scaling groupoid ----

namespace {

void require_scalar(const TheoryParams& t)
{
    if (t.K.rows() || t.E.rows())
        throw InvalidParameter("scaling isomorphisms are built for scalar couplings");
}

// identity on lattices, a on the top forms, b on the bottom forms, c on the corner
ComplexIso scaled_identity(ComplexPtr src, ComplexPtr tgt, const Rat& a, const Rat& b, const Rat& c)
{
    std::vector<PieceMap> maps;
    for (auto& l : all_pieces(*src)) {
        Rat s = 1;
        if (l.name == "corner")
            s = c;
        else if (l.name.rfind("top.W", 0) == 0)
            s = a;
        else if (l.name.rfind("bot.W", 0) == 0)
            s = b;
        maps.push_back({l.name, l.name, RatMatrix(eye(l.size) * s)});
    }
    ComplexIso f;
    f.fwd = assemble_piece_map(src, tgt, maps);
    std::string why;
    if (!f.fwd.verify(&why))
        throw NotChainMap("scaling map: " + why);
    f.inv = invert(f.fwd);
    return f;
}

ComplexIso compose_iso(const ComplexIso& g, const ComplexIso& f)
{
    return {compose(g.fwd, f.fwd), compose(f.inv, g.inv), {}};
}

ComplexIso reverse(const ComplexIso& f) { return {f.inv, f.fwd, {}}; }

}  // namespace

Rat scaling_invariant(const TheoryParams& t)
{
    require_scalar(t);
    return t.e * t.kappa / (t.m * t.lambda);
}

namespace {

Rat default_scalar(const TheoryParams& t, ScalingMove g)
{
    switch (g) {
    case ScalingMove::TopForms:
        return 1 / t.m;
    case ScalingMove::BottomForms:
        return 1 / t.e;
    default:
        return 1 / t.lambda;
    }
}

}  // namespace

TheoryParams scaling_move_target(const TheoryParams& t, ScalingMove g, std::optional<Rat> s)
{
    const Rat x = s ? *s : default_scalar(t, g);
    if (x == 0)
        throw ZeroCoupling("scaling by zero");
    TheoryParams o = t;
    switch (g) {
    case ScalingMove::TopForms:
        o.m = x * t.m;
        o.lambda = t.lambda / x;
        break;
    case ScalingMove::BottomForms:
        o.e = x * t.e;
        o.kappa = t.kappa / x;
        break;
    case ScalingMove::Corner:
        o.lambda = x * t.lambda;
        o.kappa = x * t.kappa;
        break;
    }
    return o;
}

ComplexIso scaling_move(const DecManifold& m, const TheoryParams& t, ScalingMove g, std::optional<Rat> s)
{
    require_scalar(t);
    const Rat x = s ? *s : default_scalar(t, g);
    const TheoryParams o = scaling_move_target(t, g, x);
    auto src = std::make_shared<const MixedComplex>(build_T(m, t));
    auto tgt = std::make_shared<const MixedComplex>(build_T(m, o));
    Rat a = 1, b = 1, c = 1;
    if (g == ScalingMove::TopForms)
        a = x;
    else if (g == ScalingMove::BottomForms)
        b = x;
    else
        c = x;
    return scaled_identity(src, tgt, a, b, c);
}

ComplexIso scaling_iso(const DecManifold& m, const TheoryParams& from, const TheoryParams& to)
{
    require_scalar(from);
    require_scalar(to);
    if (from.p != to.p)
        throw InvalidParameter("scaling isomorphisms preserve the form degree");
    const Rat a = scaling_invariant(from), b = scaling_invariant(to);
    if (a != b)
        throw InvariantMismatch("eκ/(mλ) is " + rat_str(a) + " for the source and " + rat_str(b) + " for the target");
    from.validate(m);
    to.validate(m);
    auto normalize = [&](const TheoryParams& t) {
        ComplexIso f;
        TheoryParams cur = t;
        bool first = true;
        for (auto g : {ScalingMove::TopForms, ScalingMove::BottomForms, ScalingMove::Corner}) {
            ComplexIso s = scaling_move(m, cur, g);
            f = first ? s : compose_iso(s, f);
            first = false;
            cur = scaling_move_target(cur, g);
        }
        return f;
    };
    ComplexIso f = normalize(from), g = normalize(to);
    return compose_iso(reverse(g), f);
}

// ---- duality ----

TheoryParams duality_target(const TheoryParams& t)
{
    TheoryParams o;
    o.p = t.n - t.p - 2;
    o.n = t.n;
    if (t.K.rows() || t.E.rows()) {
        const RatMatrix K = t.Kmat(), E = t.Emat();
        const RatMatrix Ei = inverse(E);
        o.K = RatMatrix(Ei * inverse(K) * E);
        o.E = Ei;
    } else {
        o.kappa = 1 / t.kappa;
        o.e = 1 / t.e;
    }
    return o;
}

DualityIso duality_iso(const DecManifold& m, const TheoryParams& t)
{
    t.validate(m);
    if (t.m != 1 || t.lambda != 1)
        throw InvalidParameter("duality is built for Mxw° (m = λ = 1)");
    const int p = t.p, n = m.n, q = n - p - 2;
    DualityIso d;
    d.source = t;
    d.target = duality_target(t);
    d.target_space = m.dual();
    const RatMatrix Ei = inverse(t.Emat()), Ki = inverse(t.Kmat());
    const std::size_t r = t.rank();

    auto src = std::make_shared<const MixedComplex>(build_maxwell_circ(m, t));
    auto tgt = std::make_shared<const MixedComplex>(build_maxwell_circ(d.target_space, d.target));

    std::vector<PieceMap> maps;
    auto key = [](const char* row, char kind, int k) { return std::string(row) + "." + kind + std::to_string(k); };
    for (int k = 0; k <= n; ++k) {
        maps.push_back({key("top", 'Z', k), key("bot", 'Z', k), eye(m.ncells(k) * r)});
        maps.push_back({key("bot", 'Z', k), key("top", 'Z', k), eye(m.ndual(k) * r)});
    }
    for (int j = 0; j <= p; ++j)
        maps.push_back({key("top", 'W', j), key("bot", 'W', j), kron(eye(m.ncells(j)), Ei)});
    for (int j = 0; j <= q; ++j)
        maps.push_back({key("bot", 'W', j), key("top", 'W', j), kron(eye(m.ndual(j)), Ei)});
    maps.push_back({"corner", "corner", kron(m.dual_star_at(n - p - 1), RatMatrix(Ei * Ki))});

    ComplexIso f;
    f.signs = solve_piece_signs(src, tgt, maps);
    f.fwd = assemble_piece_map(src, tgt, maps, f.signs);
    auto defects = chain_map_defects(f.fwd);
    if (!defects.empty())
        throw SignSolveFailure("sign assignment leaves defects, first at " + defects.front());
    f.inv = invert(f.fwd);
    d.iso = std::move(f);
    d.self_dual = d.target.p == t.p && d.target.Kmat() == t.Kmat() && d.target.Emat() == t.Emat();
    return d;
}

InvolutionReport involution_check(const DecManifold& m, const TheoryParams& t)
{
    InvolutionReport rep;
    DualityIso a = duality_iso(m, t);
    DualityIso b = duality_iso(a.target_space, a.target);
    ComplexIso c{compose(b.iso.fwd, a.iso.fwd), compose(a.iso.inv, b.iso.inv), {}};
    rep.composite = verify_iso(c);
    rep.target_matches_source = same_complex(*c.fwd.src, *c.fwd.tgt);
    if (!rep.target_matches_source)
        return rep;

    rep.blockwise_scalar = true;
    const MixedComplex& s = *c.fwd.src;
    ChainMap expect = zero_map(c.fwd.src, c.fwd.tgt);
    for (int k = s.lo; k <= s.hi; ++k) {
        expect.fzz[k] = expect.zz(k);
        expect.frr[k] = expect.rr(k);
    }
    for (auto& l : all_pieces(s)) {
        const Rat x = l.size == 0 ? Rat(1)
                      : l.integral ? Rat(c.fwd.zz(l.degree)(l.offset, l.offset))
                                   : c.fwd.rr(l.degree)(l.offset, l.offset);
        rep.block_scalars.push_back({l.name, x});
        if (l.integral) {
            auto z = to_int(RatMatrix(eye(l.size) * x));
            if (!z) {
                rep.blockwise_scalar = false;
                continue;
            }
            expect.fzz[l.degree].set_block(l.offset, l.offset, *z);
        } else {
            expect.frr[l.degree].set_block(l.offset, l.offset, RatMatrix(eye(l.size) * x));
        }
    }
    for (int k = s.lo; k <= s.hi; ++k)
        if (c.fwd.zz(k) != expect.zz(k) || !c.fwd.zr(k).is_zero() || c.fwd.rr(k) != expect.rr(k))
            rep.blockwise_scalar = false;
    if (!rep.blockwise_scalar)
        return rep;
    rep.signs_only = true;
    std::set<int> seen;
    for (auto& [name, x] : rep.block_scalars) {
        if (x != 1 && x != -1)
            rep.signs_only = false;
        else
            seen.insert(x == 1 ? 1 : -1);
    }
    rep.global_sign = rep.signs_only && seen.size() == 1;
    if (rep.global_sign)
        rep.sign = *seen.begin();
    return rep;
}

}  // namespace mxw
