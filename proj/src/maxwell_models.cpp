#include "mxw/maxwell_models.hpp"

#include <mutex>
#include <sstream>
#include <unordered_map>

namespace mxw {

namespace {

RatMatrix eye(std::size_t n) { return RatMatrix::identity(n); }

RatMatrix scalar(const Rat& x, std::size_t r) { return RatMatrix(eye(r) * x); }

std::string name(const std::string& pre, char kind, int k) { return pre + "." + kind + std::to_string(k); }

// primal or dual cochains of m
struct Cochains {
    const DecManifold& m;
    bool dual;
    std::size_t dim(int k) const { return dual ? m.ndual(k) : m.ncells(k); }
    IntMatrix d(int k) const { return dual ? m.dual_dz(k) : m.dz(k); }
    RatMatrix metric(int k) const { return dual ? m.dual_metric[k] : m.metric[k]; }
};

// Resolution row (integer or real cochains 0..n, cochain k in degree zdeg0 + k) followed by the
// DEC row of forms 0..ftop (form j in degree wdeg0 + j), joined by incl ⊗ ι.
struct RowSpec {
    std::string pre;
    bool dual = false, integral = true;
    int zdeg0 = 0, wdeg0 = 0, ftop = 0;
    RatMatrix incl;  // r x r
    bool standin = false;
};

void add_row(ComplexBuilder<Rat>& b, const DecManifold& m, const RowSpec& s)
{
    const Cochains c{m, s.dual};
    const std::size_t r = s.incl.rows();
    const char zk = s.integral ? 'Z' : 'R';
    for (int k = 0; k <= m.n; ++k) {
        if (s.integral)
            b.add_z(name(s.pre, zk, k), s.zdeg0 + k, c.dim(k) * r);
        else
            b.add_r(name(s.pre, zk, k), s.zdeg0 + k, c.dim(k) * r);
    }
    for (int j = 0; j <= s.ftop; ++j)
        b.add_r(name(s.pre, 'W', j), s.wdeg0 + j, c.dim(j) * r);
    for (int k = 0; k < m.n; ++k) {
        IntMatrix dk = kron(c.d(k), IntMatrix::identity(r));
        if (s.integral)
            b.zz(name(s.pre, zk, k), name(s.pre, zk, k + 1), -dk);
        else
            b.rr(name(s.pre, zk, k), name(s.pre, zk, k + 1), -to_rat(dk));
    }
    for (int k = 0; k <= s.ftop; ++k) {
        RatMatrix i = kron(eye(c.dim(k)), s.incl);
        if (s.integral)
            b.zr(name(s.pre, zk, k), name(s.pre, 'W', k), i);
        else
            b.rr(name(s.pre, zk, k), name(s.pre, 'W', k), i);
    }
    for (int j = 0; j < s.ftop; ++j)
        b.rr(name(s.pre, 'W', j), name(s.pre, 'W', j + 1), to_rat(kron(c.d(j), IntMatrix::identity(r))));
    if (s.standin && s.ftop < m.n)
        b.standin(name(s.pre, 'W', s.ftop), to_rat(kron(c.d(s.ftop), IntMatrix::identity(r))));
}

// Lift metrics from the piece names of a complex built from rows.
LiftOptions row_metrics(const MixedComplex& c, const DecManifold& m, const std::map<std::string, bool>& dual_of,
                        std::size_t r)
{
    LiftOptions o;
    for (int k = c.lo; k <= c.hi; ++k) {
        const auto& ps = c.zpieces[k - c.lo];
        RatMatrix g(c.term(k).z_rank, c.term(k).z_rank);
        for (auto& p : ps) {
            const auto dot = p.name.find('.');
            const std::string pre = p.name.substr(0, dot);
            const int deg = std::stoi(p.name.substr(dot + 2));
            const Cochains cc{m, dual_of.at(pre)};
            g.set_block(p.offset, p.offset, kron(cc.metric(deg), eye(r)));
        }
        o.zmetric[k] = g;
    }
    return o;
}

MixedComplex corner(const DecManifold& m, int p, std::size_t r)
{
    ComplexBuilder<Rat> b;
    b.add_r("corner", 0, m.ndual(m.n - p - 1) * r);
    return b.build();
}

void check_nonzero(const Rat& x, const char* what)
{
    if (x == 0)
        throw ZeroCoupling(std::string(what) + " must be nonzero");
}

void check_invertible(const RatMatrix& a, const char* what)
{
    if (a.rows() != a.cols())
        throw SingularMatrix(std::string(what) + " is not square");
    if (rank(a) != a.rows())
        throw SingularMatrix(std::string(what) + " is singular");
}

}  // namespace

// ---- parameters and configurations ----

RatMatrix TheoryParams::Kmat() const { return K.rows() ? K : scalar(kappa, rank()); }
RatMatrix TheoryParams::Emat() const { return E.rows() ? E : scalar(e, rank()); }

void TheoryParams::validate() const
{
    if (p < 0 || p > n - 2)
        throw InvalidParameter("form degree p must satisfy 0 <= p <= n-2 (p=" + std::to_string(p) +
                               ", n=" + std::to_string(n) + ")");
    check_nonzero(kappa, "kappa");
    check_nonzero(e, "e");
    check_nonzero(m, "m");
    check_nonzero(lambda, "lambda");
    if (K.rows())
        check_invertible(K, "K");
    if (E.rows())
        check_invertible(E, "E");
    if (K.rows() && E.rows() && K.rows() != E.rows())
        throw SingularMatrix("K and E have different ranks");
}

void TheoryParams::validate(const DecManifold& mf) const
{
    if (mf.n != n)
        throw InvalidParameter("theory dimension " + std::to_string(n) + " does not match space dimension " +
                               std::to_string(mf.n));
    validate();
}

std::string TheoryParams::str() const
{
    std::ostringstream os;
    os << "p=" << p << " n=" << n << " kappa=" << kappa << " e=" << e;
    if (m != 1 || lambda != 1)
        os << " m=" << m << " lambda=" << lambda;
    if (rank() > 1)
        os << " rank=" << rank();
    return os.str();
}

FieldConfiguration FieldConfiguration::zero(const MixedComplex& c, int degree)
{
    auto t = c.term(degree);
    return {degree, IntMatrix(t.z_rank, 1), RatMatrix(t.r_dim, 1)};
}

IntMatrix FieldConfiguration::zblock(const MixedComplex& c, const std::string& piece) const
{
    auto p = c.zpiece(degree, piece);
    if (!p)
        throw InvalidParameter("no integral piece " + piece + " in degree " + std::to_string(degree));
    return z.rows_range(p->offset, p->size);
}

RatMatrix FieldConfiguration::rblock(const MixedComplex& c, const std::string& piece) const
{
    auto p = c.rpiece(degree, piece);
    if (!p)
        throw InvalidParameter("no real piece " + piece + " in degree " + std::to_string(degree));
    return r.rows_range(p->offset, p->size);
}

void FieldConfiguration::set_z(const MixedComplex& c, const std::string& piece, const IntMatrix& v)
{
    auto p = c.zpiece(degree, piece);
    if (!p || v.rows() != p->size)
        throw InvalidParameter("bad integral block " + piece);
    z.set_block(p->offset, 0, v);
}

void FieldConfiguration::set_r(const MixedComplex& c, const std::string& piece, const RatMatrix& v)
{
    auto p = c.rpiece(degree, piece);
    if (!p || v.rows() != p->size)
        throw InvalidParameter("bad real block " + piece);
    r.set_block(p->offset, 0, v);
}

bool FieldConfiguration::is_cocycle(const MixedComplex& c) const
{
    return (c.d_zz(degree) * z).is_zero() && RatMatrix(c.d_zr(degree) * to_rat(z) + c.d_rr(degree) * r).is_zero();
}

FieldConfiguration FieldConfiguration::plus_coboundary(const MixedComplex& c, const FieldConfiguration& x) const
{
    if (x.degree != degree - 1)
        throw DegreeMismatch("coboundary must come from degree " + std::to_string(degree - 1));
    FieldConfiguration out = *this;
    out.z += c.d_zz(x.degree) * x.z;
    out.r += c.d_zr(x.degree) * to_rat(x.z) + c.d_rr(x.degree) * x.r;
    return out;
}

bool IntegralClass::is_zero() const { return coords.is_zero(); }

// ---- lifting and cones ----

namespace {

// Lifts for different couplings on one manifold factor the same coboundary matrices, so the
// pseudoinverses and kernels are kept between calls.
template <class T>
std::string matrix_key(const Matrix<T>& m)
{
    std::string k = m.shape();
    for (auto& x : m.data()) {
        k += ' ';
        k += x.get_str();
    }
    return k;
}

template <class V>
class Memo {
public:
    template <class F>
    V get(const std::string& key, F compute)
    {
        {
            std::lock_guard lock(mu_);
            if (auto it = map_.find(key); it != map_.end())
                return it->second;
        }
        V v = compute();
        std::lock_guard lock(mu_);
        if (map_.size() > 256)
            map_.clear();
        map_.emplace(key, v);
        return v;
    }

private:
    std::mutex mu_;
    std::unordered_map<std::string, V> map_;
};

Memo<RatMatrix> pinv_memo;
Memo<IntMatrix> kernel_memo;

RatMatrix pinv(const RatMatrix& m)
{
    return pinv_memo.get(matrix_key(m), [&] { return rational_pseudoinverse(m); });
}

RatMatrix weighted_pinv(const RatMatrix& Zd, const RatMatrix& M)
{
    return pinv_memo.get("w" + matrix_key(Zd) + "|" + matrix_key(M), [&] {
        return RatMatrix(rational_pseudoinverse(RatMatrix(Zd.transpose() * M * Zd)) * Zd.transpose() * M);
    });
}

IntMatrix kernel(const IntMatrix& m)
{
    return kernel_memo.get(matrix_key(m), [&] { return integer_kernel_basis(m); });
}

}  // namespace

std::variant<ChainMap, Obstruction> lift_chain_map(const ChainMap& partial, const LiftOptions& opt)
{
    const MixedComplex& S = *partial.src;
    const MixedComplex& T = *partial.tgt;
    for (int k = T.lo; k <= T.hi; ++k)
        if (T.term(k).z_rank)
            throw std::invalid_argument("lift target must be real-only");
    ChainMap f = partial;
    f.fzz.clear();
    std::map<int, RatMatrix> g;
    for (int k = S.lo; k <= S.hi + 1; ++k)
        g[k] = partial.zr(k);

    for (int k = S.lo; k <= S.hi; ++k) {
        const RatMatrix Zd = to_rat(S.d_zz(k));
        const RatMatrix B = -(partial.rr(k + 1) * S.d_zr(k));
        const RatMatrix R = T.d_rr(k);
        const IntMatrix Kint = kernel(S.d_zz(k));
        const RatMatrix K = to_rat(Kint);
        RatMatrix resid = (R * g[k] + B) * K;
        if (!resid.is_zero()) {
            // correct g_k by psi * Q with Q vanishing on the image of the previous differential
            const RatMatrix Zp = to_rat(S.d_zz(k - 1));
            const RatMatrix Q = Zp.cols() ? RatMatrix(eye(Zp.rows()) - Zp * pinv(Zp)) : eye(Zp.rows());
            const RatMatrix C = Q * K;
            const RatMatrix target = -resid;
            const RatMatrix psi = pinv(R) * target * pinv(C);
            if (!(R * psi * C == target))
                return Obstruction{k, Kint, resid};
            g[k] += psi * Q;
        }
        if (S.term(k + 1).z_rank == 0 || T.term(k + 1).r_dim == 0) {
            g[k + 1] = RatMatrix(T.term(k + 1).r_dim, S.term(k + 1).z_rank);
            continue;
        }
        const RatMatrix rhs = R * g[k] + B;
        RatMatrix W;
        auto it = opt.zmetric.find(k + 1);
        if (it == opt.zmetric.end())
            W = pinv(Zd);
        else
            W = weighted_pinv(Zd, it->second);
        // keep the starting guess where it already solves the equation
        g[k + 1] += (rhs - g[k + 1] * Zd) * W;
    }
    for (auto& [k, m] : g)
        if (S.in_range(k) || T.in_range(k))
            f.fzr[k] = m;
    std::string why;
    if (!f.verify(&why))
        throw NotChainMap("lifted map fails: " + why);
    return f;
}

ChainMap lift_or_throw(const ChainMap& partial, const LiftOptions& opt)
{
    auto r = lift_chain_map(partial, opt);
    if (auto* o = std::get_if<Obstruction>(&r))
        throw Obstructed(*o);
    return std::get<ChainMap>(r);
}

MixedComplex fiber(const ChainMap& f)
{
    std::string why;
    if (!f.verify(&why))
        throw NotChainMap(why);
    const MixedComplex& S = *f.src;
    const MixedComplex& T = *f.tgt;
    MixedComplex c;
    const bool es = S.hi < S.lo, et = T.hi < T.lo;
    if (es && et)
        return c;
    c.lo = es ? T.lo + 1 : (et ? S.lo : std::min(S.lo, T.lo + 1));
    c.hi = es ? T.hi + 1 : (et ? S.hi : std::max(S.hi, T.hi + 1));
    auto standin_at = [](const MixedComplex& x, int k) {
        if (x.in_range(k) && !x.standin.empty())
            return x.standin[k - x.lo];
        return RatMatrix(0, x.term(k).r_dim);
    };
    const bool st = !S.standin.empty() || !T.standin.empty();
    for (int k = c.lo; k <= c.hi; ++k) {
        const MixedTerm a = S.term(k), b = T.term(k - 1);
        c.terms.push_back({a.z_rank + b.z_rank, a.r_dim + b.r_dim});
        std::vector<Piece> zp, rp;
        if (S.in_range(k)) {
            zp = S.zpieces[k - S.lo];
            rp = S.rpieces[k - S.lo];
        }
        if (T.in_range(k - 1)) {
            for (auto p : T.zpieces[k - 1 - T.lo]) {
                p.offset += a.z_rank;
                zp.push_back(p);
            }
            for (auto p : T.rpieces[k - 1 - T.lo]) {
                p.offset += a.r_dim;
                rp.push_back(p);
            }
        }
        c.zpieces.push_back(zp);
        c.rpieces.push_back(rp);
        const MixedTerm a1 = S.term(k + 1), b1 = T.term(k);
        IntMatrix zz(a1.z_rank + b1.z_rank, a.z_rank + b.z_rank);
        zz.set_block(0, 0, S.d_zz(k));
        zz.set_block(a1.z_rank, 0, f.zz(k));
        zz.set_block(a1.z_rank, a.z_rank, -T.d_zz(k - 1));
        RatMatrix zr(a1.r_dim + b1.r_dim, a.z_rank + b.z_rank);
        zr.set_block(0, 0, S.d_zr(k));
        zr.set_block(a1.r_dim, 0, f.zr(k));
        zr.set_block(a1.r_dim, a.z_rank, -T.d_zr(k - 1));
        RatMatrix rr(a1.r_dim + b1.r_dim, a.r_dim + b.r_dim);
        rr.set_block(0, 0, S.d_rr(k));
        rr.set_block(a1.r_dim, 0, f.rr(k));
        rr.set_block(a1.r_dim, a.r_dim, -T.d_rr(k - 1));
        c.zz.push_back(std::move(zz));
        c.zr.push_back(std::move(zr));
        c.rr.push_back(std::move(rr));
        if (st)
            c.standin.push_back(block_diag(standin_at(S, k), standin_at(T, k - 1)));
    }
    c.validate();
    return c;
}

MixedComplex integer_cochains(const DecManifold& m, bool dual)
{
    const Cochains c{m, dual};
    ComplexBuilder<Rat> b;
    for (int k = 0; k <= m.n; ++k)
        b.add_z(name("ch", 'Z', k), k, c.dim(k));
    for (int k = 0; k < m.n; ++k)
        b.zz(name("ch", 'Z', k), name("ch", 'Z', k + 1), c.d(k));
    return b.build();
}

// ---- models ----

MixedComplex build_bun_nabla(const DecManifold& m, int p)
{
    if (p < 0 || p > m.n)
        throw InvalidParameter("Bun needs 0 <= p <= n");
    ComplexBuilder<Rat> b;
    add_row(b, m, {"top", false, true, -p - 1, -p, p, eye(1), true});
    return b.build();
}

MixedComplex build_flat(const DecManifold& m, int p)
{
    if (p < 0 || p > m.n)
        throw InvalidParameter("flat model needs 0 <= p <= n");
    ComplexBuilder<Rat> b;
    add_row(b, m, {"top", false, true, -p - 1, -p, m.n, eye(1), false});
    return b.build();
}

MixedComplex build_maxwell(const DecManifold& m, const TheoryParams& t)
{
    t.validate(m);
    const int p = t.p, n = m.n;
    const std::size_t r = t.rank();
    const RatMatrix K = t.Kmat();
    ComplexBuilder<Rat> bs;
    add_row(bs, m, {"top", false, true, -p - 1, -p, p, eye(r), false});
    auto S = std::make_shared<const MixedComplex>(bs.build());

    ComplexBuilder<Rat> bt;
    for (int k = n - p; k <= n; ++k)
        bt.add_r(name("cl", 'D', k), k - (n - p), m.ndual(k) * r);
    for (int k = n - p; k < n; ++k)
        bt.rr(name("cl", 'D', k), name("cl", 'D', k + 1), -to_rat(kron(m.dual_dz(k), IntMatrix::identity(r))));
    auto T = std::make_shared<const MixedComplex>(bt.build());

    const RatMatrix dstar = to_rat(m.dual_dz(n - p - 1)) * m.star_at(p + 1);
    ChainMapBuilder<Rat> f(S, T);
    f.rr(name("top", 'W', p), name("cl", 'D', n - p), kron(RatMatrix(dstar * to_rat(m.dz(p))), K));
    f.zr(name("top", 'Z', p + 1), name("cl", 'D', n - p), kron(dstar, K));
    return fiber(lift_or_throw(f.build(), row_metrics(*S, m, {{"top", false}}, r)));
}

MixedComplex build_maxwell_pert(const DecManifold& m, const TheoryParams& t)
{
    t.validate(m);
    const int p = t.p, n = m.n;
    const std::size_t r = t.rank();
    const IntMatrix Ir = IntMatrix::identity(r);
    ComplexBuilder<Rat> b;
    for (int j = 0; j <= p; ++j)
        b.add_r(name("top", 'W', j), j - p, m.ncells(j) * r);
    for (int k = n - p; k <= n; ++k)
        b.add_r(name("cl", 'D', k), k - n + p + 1, m.ndual(k) * r);
    for (int j = 0; j < p; ++j)
        b.rr(name("top", 'W', j), name("top", 'W', j + 1), to_rat(kron(m.dz(j), Ir)));
    const RatMatrix q = to_rat(m.dual_dz(n - p - 1)) * m.star_at(p + 1) * to_rat(m.dz(p));
    b.rr(name("top", 'W', p), name("cl", 'D', n - p), kron(q, t.Kmat()));
    for (int k = n - p; k < n; ++k)
        b.rr(name("cl", 'D', k), name("cl", 'D', k + 1), to_rat(kron(m.dual_dz(k), Ir)));
    return b.build();
}

MixedComplex build_maxwell_tilde(const DecManifold& m, const TheoryParams& t)
{
    t.validate(m);
    const int p = t.p, n = m.n, q = n - p - 2;
    const std::size_t r = t.rank();
    const RatMatrix K = t.Kmat();
    ComplexBuilder<Rat> bs;
    add_row(bs, m, {"top", false, true, -p - 1, -p, p, eye(r), false});
    add_row(bs, m, {"bot", true, false, -q - 1, -q, q, eye(r), false});
    auto S = std::make_shared<const MixedComplex>(bs.build());
    auto T = std::make_shared<const MixedComplex>(corner(m, p, r));

    ChainMapBuilder<Rat> f(S, T);
    const RatMatrix star = m.star_at(p + 1);
    f.rr(name("top", 'W', p), "corner", kron(RatMatrix(star * to_rat(m.dz(p))), eye(r)));
    f.rr(name("bot", 'W', q), "corner", -kron(to_rat(m.dual_dz(q)), K));
    f.rr(name("bot", 'R', q + 1), "corner", -kron(eye(m.ndual(q + 1)), K));
    f.zr(name("top", 'Z', p + 1), "corner", kron(star, eye(r)));
    return fiber(lift_or_throw(f.build(), row_metrics(*S, m, {{"top", false}}, r)));
}

namespace {

MixedComplex build_T_mat(const DecManifold& m, int p, const RatMatrix& M, const RatMatrix& E, const RatMatrix& L,
                         const RatMatrix& K)
{
    const int n = m.n, q = n - p - 2;
    const std::size_t r = K.rows();
    ComplexBuilder<Rat> bs;
    add_row(bs, m, {"top", false, true, -p - 1, -p, p, M, false});
    add_row(bs, m, {"bot", true, true, -q - 1, -q, q, E, false});
    auto S = std::make_shared<const MixedComplex>(bs.build());
    auto T = std::make_shared<const MixedComplex>(corner(m, p, r));

    ChainMapBuilder<Rat> f(S, T);
    const RatMatrix star = m.star_at(p + 1);
    f.rr(name("top", 'W', p), "corner", kron(RatMatrix(star * to_rat(m.dz(p))), L));
    f.rr(name("bot", 'W', q), "corner", -kron(to_rat(m.dual_dz(q)), K));
    f.zr(name("top", 'Z', p + 1), "corner", kron(star, RatMatrix(L * M)));
    f.zr(name("bot", 'Z', q + 1), "corner", -kron(eye(m.ndual(q + 1)), RatMatrix(K * E)));
    return fiber(lift_or_throw(f.build(), row_metrics(*S, m, {{"top", false}, {"bot", true}}, r)));
}

}  // namespace

MixedComplex build_T(const DecManifold& m, int p, const Rat& mm, const Rat& e, const Rat& lambda, const Rat& kappa)
{
    TheoryParams t;
    t.p = p;
    t.n = m.n;
    t.m = mm;
    t.e = e;
    t.lambda = lambda;
    t.kappa = kappa;
    return build_T(m, t);
}

MixedComplex build_T(const DecManifold& m, const TheoryParams& t)
{
    t.validate(m);
    const std::size_t r = t.rank();
    return build_T_mat(m, t.p, scalar(t.m, r), t.Emat(), scalar(t.lambda, r), t.Kmat());
}

MixedComplex build_maxwell_circ(const DecManifold& m, const TheoryParams& t)
{
    TheoryParams c = t;
    c.m = 1;
    c.lambda = 1;
    return build_T(m, c);
}

MixedComplex build_higher_rank(const DecManifold& m, int p, const RatMatrix& K, const RatMatrix& E)
{
    TheoryParams t;
    t.p = p;
    t.n = m.n;
    t.K = K;
    t.E = E;
    if (!K.rows() || !E.rows())
        throw SingularMatrix("K and E must be given");
    return build_maxwell_circ(m, t);
}

MixedComplex build_mxwbf(const DecManifold& m, const TheoryParams& t)
{
    t.validate(m);
    if (t.rank() != 1)
        throw InvalidParameter("MxwBF is built for scalar couplings only");
    const int p = t.p, n = m.n, q = n - p - 2;
    const Rat& kappa = t.kappa;
    ComplexBuilder<Rat> b;
    add_row(b, m, {"bf1", false, true, -p - 2, -p - 1, n, eye(1), false});
    add_row(b, m, {"top", false, true, -p - 1, -p, p, eye(1), false});
    add_row(b, m, {"bot", true, false, -q - 1, -q, q, eye(1), false});
    add_row(b, m, {"bf4", true, true, -q - 1, -q, n, eye(1), false});
    b.add_r("corner", 1, m.ndual(n - p - 1));

    // the middle rows with the corner are Mxw̃ verbatim
    const RatMatrix star = m.star_at(p + 1);
    b.rr(name("top", 'W', p), "corner", RatMatrix(star * to_rat(m.dz(p))));
    b.rr(name("bot", 'W', q), "corner", RatMatrix(to_rat(m.dual_dz(q)) * (-kappa)));
    b.rr(name("bot", 'R', q + 1), "corner", RatMatrix(eye(m.ndual(q + 1)) * (-kappa)));
    b.zr(name("top", 'Z', p + 1), "corner", star);

    auto sgn = [](int k) { return k % 2 ? -1 : 1; };
    for (int k = 0; k <= n; ++k)
        b.zz(name("bf1", 'Z', k), name("top", 'Z', k), IntMatrix(IntMatrix::identity(m.ncells(k)) * Int(-sgn(k))));
    for (int j = 0; j <= p; ++j)
        b.rr(name("bf1", 'W', j), name("top", 'W', j), RatMatrix(eye(m.ncells(j)) * Rat(sgn(j))));
    b.rr(name("bf1", 'W', p + 1), "corner", RatMatrix(star * Rat(-sgn(p))));
    for (int k = 0; k <= q; ++k)
        b.zr(name("bf4", 'Z', k), name("bot", 'W', k), RatMatrix(eye(m.ndual(k)) * Rat(-1)));
    for (int k = 0; k <= n; ++k)
        b.rr(name("bot", 'R', k), name("bf4", 'W', k), eye(m.ndual(k)));
    b.zr(name("bf4", 'Z', q + 1), "corner", RatMatrix(eye(m.ndual(q + 1)) * kappa));
    return b.build();
}

// ---- comparison maps ----

ChainMap circ_to_tilde(const DecManifold& m, const TheoryParams& t, ComplexPtr circ, ComplexPtr tilde)
{
    const int p = t.p, n = m.n, q = n - p - 2;
    const std::size_t r = t.rank();
    ChainMapBuilder<Rat> f(circ, tilde);
    for (int k = 0; k <= n; ++k) {
        f.zz(name("top", 'Z', k), name("top", 'Z', k), IntMatrix::identity(m.ncells(k) * r));
        f.zr(name("bot", 'Z', k), name("bot", 'R', k), kron(eye(m.ndual(k)), t.Emat()));
    }
    for (int j = 0; j <= p; ++j)
        f.rr(name("top", 'W', j), name("top", 'W', j), eye(m.ncells(j) * r));
    for (int j = 0; j <= q; ++j)
        f.rr(name("bot", 'W', j), name("bot", 'W', j), eye(m.ndual(j) * r));
    f.rr("corner", "corner", eye(m.ndual(n - p - 1) * r));
    return f.build();
}

ChainMap tilde_to_maxwell(const DecManifold& m, const TheoryParams& t, ComplexPtr tilde, ComplexPtr mxw)
{
    const int p = t.p, n = m.n;
    const std::size_t r = t.rank();
    const RatMatrix K = t.Kmat();
    const RatMatrix K2 = K * K;
    ChainMapBuilder<Rat> f(tilde, mxw);
    for (int k = 0; k <= n; ++k)
        f.zz(name("top", 'Z', k), name("top", 'Z', k), IntMatrix::identity(m.ncells(k) * r));
    for (int j = 0; j <= p; ++j)
        f.rr(name("top", 'W', j), name("top", 'W', j), eye(m.ncells(j) * r));
    f.rr("corner", name("cl", 'D', n - p), kron(to_rat(m.dual_dz(n - p - 1)), K));
    for (int k = n - p; k <= n; ++k) {
        const Rat s = (k - (n - p)) % 2 ? 1 : -1;
        f.rr(name("bot", 'R', k), name("cl", 'D', k), kron(eye(m.ndual(k)), RatMatrix(K2 * s)));
    }
    return f.build();
}

ChargeSequence charge_sequence(const DecManifold& m, const TheoryParams& t)
{
    auto total = std::make_shared<const MixedComplex>(build_maxwell_circ(m, t));
    const MixedComplex& c = *total;
    MixedComplex sub, quot;
    sub.lo = quot.lo = c.lo;
    sub.hi = quot.hi = c.hi;
    for (int k = c.lo; k <= c.hi; ++k) {
        const auto i = std::size_t(k - c.lo);
        const auto a = c.term(k), b = c.term(k + 1);
        sub.terms.push_back({0, a.r_dim});
        sub.zz.push_back(IntMatrix(0, 0));
        sub.zr.push_back(RatMatrix(b.r_dim, 0));
        sub.rr.push_back(c.rr[i]);
        sub.zpieces.push_back({});
        sub.rpieces.push_back(c.rpieces[i]);
        quot.terms.push_back({a.z_rank, 0});
        quot.zz.push_back(c.zz[i]);
        quot.zr.push_back(RatMatrix(0, a.z_rank));
        quot.rr.push_back(RatMatrix(0, 0));
        quot.zpieces.push_back(c.zpieces[i]);
        quot.rpieces.push_back({});
    }
    sub.validate();
    quot.validate();
    ChargeSequence s;
    s.total = total;
    s.sub = std::make_shared<const MixedComplex>(std::move(sub));
    s.quot = std::make_shared<const MixedComplex>(std::move(quot));
    s.incl.src = s.sub;
    s.incl.tgt = total;
    s.proj.src = total;
    s.proj.tgt = s.quot;
    for (int k = c.lo; k <= c.hi; ++k) {
        s.incl.frr[k] = eye(c.term(k).r_dim);
        s.proj.fzz[k] = IntMatrix::identity(c.term(k).z_rank);
    }
    return s;
}

// ---- charges and observables ----

namespace {

MixedComplex integer_cochains_rank(const DecManifold& m, bool dual, std::size_t r)
{
    const Cochains c{m, dual};
    ComplexBuilder<Rat> b;
    for (int k = 0; k <= m.n; ++k)
        b.add_z(name("ch", 'Z', k), k, c.dim(k) * r);
    for (int k = 0; k < m.n; ++k)
        b.zz(name("ch", 'Z', k), name("ch", 'Z', k + 1), kron(c.d(k), IntMatrix::identity(r)));
    return b.build();
}

IntegralClass integral_class(const DecManifold& m, bool dual, std::size_t r, int k, const IntMatrix& z)
{
    auto c = std::make_shared<const MixedComplex>(integer_cochains_rank(m, dual, r));
    if (!(c->d_zz(k) * z).is_zero())
        throw NotCocycle("charge component is not an integer cocycle");
    Cohomology h(c);
    IntegralClass out;
    out.degree = k;
    out.group = h.discrete_group(k);
    out.coords = h.coordinates(k, z, RatMatrix(0, z.cols())).discrete;
    return out;
}

void require_degree0_cocycle(const MixedComplex& model, const FieldConfiguration& c)
{
    if (c.degree != 0)
        throw DegreeMismatch("charges are defined for degree-0 configurations");
    auto t = model.term(0);
    if (c.z.rows() != t.z_rank || c.r.rows() != t.r_dim)
        throw DegreeMismatch("configuration does not match the model in degree 0");
    if (!c.is_cocycle(model))
        throw NotCocycle("configuration is not a cocycle");
}

}  // namespace

Charges charges(const DecManifold& m, const TheoryParams& t, const MixedComplex& model, const FieldConfiguration& c)
{
    require_degree0_cocycle(model, c);
    const int p = t.p, n = m.n;
    Charges out;
    out.magnetic = integral_class(m, false, t.rank(), p + 1, c.zblock(model, name("top", 'Z', p + 1)));
    out.electric = integral_class(m, true, t.rank(), n - p - 1, c.zblock(model, name("bot", 'Z', n - p - 1)));
    return out;
}

FieldConfiguration magnetic_sector(const DecManifold& m, const TheoryParams& t, const MixedComplex& model,
                                   const IntMatrix& cocycle)
{
    const int p = t.p;
    const std::size_t r = t.rank();
    const IntegralClass want = integral_class(m, false, r, p + 1, cocycle);
    auto ptr = std::make_shared<const MixedComplex>(model);
    Cohomology h(ptr);
    const auto& lifts = h.discrete_lifts(0);
    const std::size_t g = lifts.first.cols();
    // magnetic coordinates of the discrete generators; torsion handled through extra modulus columns
    const std::size_t nf = want.group.free_rank, nt = want.group.torsion.size();
    IntMatrix A(nf + nt, g + nt);
    for (std::size_t j = 0; j < g; ++j) {
        FieldConfiguration x{0, lifts.first.cols_range(j, 1), lifts.second.cols_range(j, 1)};
        auto ch = charges(m, t, model, x);
        A.set_block(0, j, ch.magnetic.coords);
    }
    for (std::size_t i = 0; i < nt; ++i)
        A(nf + i, g + i) = want.group.torsion[i];
    auto x = solve_integer(A, want.coords);
    if (!x)
        throw InvalidParameter("no degree-0 sector carries this magnetic charge");
    FieldConfiguration out = FieldConfiguration::zero(model, 0);
    for (std::size_t j = 0; j < g; ++j) {
        const Int& a = (*x)(j, 0);
        if (a == 0)
            continue;
        out.z += IntMatrix(lifts.first.cols_range(j, 1) * a);
        out.r += RatMatrix(lifts.second.cols_range(j, 1) * Rat(a));
    }
    return out;
}

Rat symmetry_pairing(const DecManifold& m, const TheoryParams& t, const MixedComplex& model, const IntMatrix& cycle,
                     const Rat& g, const FieldConfiguration& c)
{
    const int p = t.p;
    const std::size_t dim = m.ncells(p + 1) * t.rank();
    if (cycle.rows() != dim || cycle.cols() != 1)
        throw DegreeMismatch("symmetry operator needs a " + std::to_string(p + 1) + "-chain");
    if (!(kron(m.dz(p), IntMatrix::identity(t.rank())).transpose() * cycle).is_zero())
        throw InvalidParameter("support of the symmetry operator is not a cycle");
    require_degree0_cocycle(model, c);
    const IntMatrix z = c.zblock(model, name("top", 'Z', p + 1));
    const Int w = (cycle.transpose() * z)(0, 0);
    Rat x = g * Rat(w);
    x.canonicalize();
    Int fl = x.get_num() / x.get_den();
    if (x.get_num() < 0 && fl * x.get_den() != x.get_num())
        fl -= 1;
    return Rat(x - Rat(fl));
}

RatMatrix bv_pairing_matrix(const DecManifold& m, const TheoryParams& t, const MixedComplex& pert, int k)
{
    RatMatrix P(pert.term(k).r_dim, pert.term(1 - k).r_dim);
    auto fill = [&](int deg, RatMatrix& into, bool transpose_sign) {
        for (int j = 0; j <= t.p; ++j) {
            if (j - t.p != deg)
                continue;
            auto a = pert.rpiece(deg, name("top", 'W', j));
            auto b = pert.rpiece(1 - deg, name("cl", 'D', m.n - j));
            if (!a || !b)
                continue;
            // normalized so that a degree-0 field gives κ (dA, ⋆dA)
            const Rat s = Rat(((j + 1) % 2 ? -1 : 1) * m.pairing_sign(j));
            RatMatrix blk = RatMatrix(eye(a->size) * s);
            if (transpose_sign)
                into.set_block(b->offset, a->offset, RatMatrix(blk.transpose() * Rat(-1)));
            else
                into.set_block(a->offset, b->offset, blk);
        }
    };
    fill(k, P, false);
    fill(1 - k, P, true);
    return P;
}

Rat bv_pairing(const DecManifold& m, const TheoryParams& t, const MixedComplex& pert, const FieldConfiguration& a,
               const FieldConfiguration& b)
{
    if (a.degree + b.degree != 1)
        return 0;
    return (a.r.transpose() * bv_pairing_matrix(m, t, pert, a.degree) * b.r)(0, 0);
}

Rat bv_action(const DecManifold& m, const TheoryParams& t, const MixedComplex& pert,
              const std::vector<FieldConfiguration>& field)
{
    std::map<int, const FieldConfiguration*> by;
    for (auto& f : field)
        by[f.degree] = &f;
    Rat s = 0;
    for (auto& [k, a] : by) {
        auto it = by.find(-k);
        if (it == by.end())
            continue;
        const FieldConfiguration& b = *it->second;
        FieldConfiguration qb{b.degree + 1, IntMatrix(0, 1), RatMatrix(pert.d_rr(b.degree) * b.r)};
        s += bv_pairing(m, t, pert, *a, qb);
    }
    return s;
}

}  // namespace mxw
