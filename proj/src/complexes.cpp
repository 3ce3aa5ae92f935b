#include "mxw/complexes.hpp"

#include <algorithm>
#include <sstream>

namespace mxw {

namespace {

template <class S>
Matrix<S> times_int(const Matrix<S>& a, const IntMatrix& b)
{
    return a * convert<S>(b);
}

template <class S>
bool close(const Matrix<S>& a, const Matrix<S>& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return false;
    if constexpr (Lin<S>::exact) {
        return a == b;
    } else {
        return Lin<S>::is_zero(a - b, std::max(max_abs(a), max_abs(b)));
    }
}

}  // namespace

template <class S>
IntMatrix MixedComplexT<S>::d_zz(int k) const
{
    if (in_range(k))
        return zz[k - lo];
    return IntMatrix(term(k + 1).z_rank, term(k).z_rank);
}

template <class S>
Matrix<S> MixedComplexT<S>::d_zr(int k) const
{
    if (in_range(k))
        return zr[k - lo];
    return Matrix<S>(term(k + 1).r_dim, term(k).z_rank);
}

template <class S>
Matrix<S> MixedComplexT<S>::d_rr(int k) const
{
    if (in_range(k))
        return rr[k - lo];
    return Matrix<S>(term(k + 1).r_dim, term(k).r_dim);
}

template <class S>
std::optional<Piece> MixedComplexT<S>::zpiece(int k, const std::string& name) const
{
    if (!in_range(k))
        return std::nullopt;
    for (auto& p : zpieces[k - lo])
        if (p.name == name)
            return p;
    return std::nullopt;
}

template <class S>
std::optional<Piece> MixedComplexT<S>::rpiece(int k, const std::string& name) const
{
    if (!in_range(k))
        return std::nullopt;
    for (auto& p : rpieces[k - lo])
        if (p.name == name)
            return p;
    return std::nullopt;
}

template <class S>
std::optional<std::pair<int, bool>> MixedComplexT<S>::locate(const std::string& name) const
{
    for (int k = lo; k <= hi; ++k) {
        for (auto& p : zpieces[k - lo])
            if (p.name == name)
                return std::make_pair(k, true);
        for (auto& p : rpieces[k - lo])
            if (p.name == name)
                return std::make_pair(k, false);
    }
    return std::nullopt;
}

template <class S>
void MixedComplexT<S>::validate() const
{
    const std::size_t n = hi >= lo ? std::size_t(hi - lo + 1) : 0;
    if (terms.size() != n || zz.size() != n || zr.size() != n || rr.size() != n)
        throw InvalidComplex("inconsistent degree range");
    for (int k = lo; k <= hi; ++k) {
        auto a = term(k), b = term(k + 1);
        const auto i = std::size_t(k - lo);
        if (zz[i].rows() != b.z_rank || zz[i].cols() != a.z_rank || zr[i].rows() != b.r_dim ||
            zr[i].cols() != a.z_rank || rr[i].rows() != b.r_dim || rr[i].cols() != a.r_dim)
            throw InvalidComplex("block shape mismatch in degree " + std::to_string(k));
    }
    std::string why;
    if (!square_zero(&why))
        throw InvalidComplex(why);
}

template <class S>
bool MixedComplexT<S>::square_zero(std::string* why) const
{
    for (int k = lo; k < hi; ++k) {
        if (!(d_zz(k + 1) * d_zz(k)).is_zero()) {
            if (why)
                *why = "zz∘zz ≠ 0 in degree " + std::to_string(k);
            return false;
        }
        Matrix<S> rr2 = d_rr(k + 1) * d_rr(k);
        if (!close(rr2, Matrix<S>(rr2.rows(), rr2.cols()))) {
            if (why)
                *why = "rr∘rr ≠ 0 in degree " + std::to_string(k);
            return false;
        }
        Matrix<S> a = times_int(d_zr(k + 1), d_zz(k));
        Matrix<S> b = d_rr(k + 1) * d_zr(k);
        if (!close(a, Matrix<S>(-b))) {
            if (why)
                *why = "zr∘zz + rr∘zr ≠ 0 in degree " + std::to_string(k);
            return false;
        }
    }
    return true;
}

FloatMixedComplex to_float(const MixedComplex& c)
{
    FloatMixedComplex f;
    f.lo = c.lo;
    f.hi = c.hi;
    f.terms = c.terms;
    f.zz = c.zz;
    for (auto& m : c.zr)
        f.zr.push_back(to_real(m));
    for (auto& m : c.rr)
        f.rr.push_back(to_real(m));
    for (auto& m : c.standin)
        f.standin.push_back(to_real(m));
    f.zpieces = c.zpieces;
    f.rpieces = c.rpieces;
    return f;
}

// ---- builder ----

template <class S>
void ComplexBuilder<S>::add_z(const std::string& name, int degree, std::size_t dim)
{
    if (pieces_.count(name))
        throw std::invalid_argument("duplicate piece " + name);
    pieces_[name] = P{degree, true, dim, order_.size()};
    order_.push_back(name);
}

template <class S>
void ComplexBuilder<S>::add_r(const std::string& name, int degree, std::size_t dim)
{
    if (pieces_.count(name))
        throw std::invalid_argument("duplicate piece " + name);
    pieces_[name] = P{degree, false, dim, order_.size()};
    order_.push_back(name);
}

template <class S>
const typename ComplexBuilder<S>::P& ComplexBuilder<S>::get(const std::string& name) const
{
    auto it = pieces_.find(name);
    if (it == pieces_.end())
        throw std::invalid_argument("unknown piece " + name);
    return it->second;
}

template <class S>
void ComplexBuilder<S>::zz(const std::string& from, const std::string& to, const IntMatrix& m)
{
    auto& a = get(from);
    auto& b = get(to);
    if (!a.integral || !b.integral || b.degree != a.degree + 1 || m.rows() != b.dim || m.cols() != a.dim)
        throw std::invalid_argument("bad zz block " + from + " -> " + to);
    maps_.push_back(M{from, to, 0, m, {}});
}

template <class S>
void ComplexBuilder<S>::zr(const std::string& from, const std::string& to, const Matrix<S>& m)
{
    auto& a = get(from);
    auto& b = get(to);
    if (!a.integral || b.integral || b.degree != a.degree + 1 || m.rows() != b.dim || m.cols() != a.dim)
        throw std::invalid_argument("bad zr block " + from + " -> " + to);
    maps_.push_back(M{from, to, 1, {}, m});
}

template <class S>
void ComplexBuilder<S>::rr(const std::string& from, const std::string& to, const Matrix<S>& m)
{
    auto& a = get(from);
    auto& b = get(to);
    if (a.integral || b.integral || b.degree != a.degree + 1 || m.rows() != b.dim || m.cols() != a.dim)
        throw std::invalid_argument("bad rr block " + from + " -> " + to);
    maps_.push_back(M{from, to, 2, {}, m});
}

template <class S>
void ComplexBuilder<S>::standin(const std::string& from, const Matrix<S>& m)
{
    auto& a = get(from);
    if (a.integral || m.cols() != a.dim)
        throw std::invalid_argument("bad stand-in block on " + from);
    standins_.emplace_back(from, m);
}

template <class S>
MixedComplexT<S> ComplexBuilder<S>::build(bool validate) const
{
    MixedComplexT<S> c;
    if (order_.empty())
        return c;
    c.lo = c.hi = pieces_.at(order_[0]).degree;
    for (auto& n : order_) {
        c.lo = std::min(c.lo, pieces_.at(n).degree);
        c.hi = std::max(c.hi, pieces_.at(n).degree);
    }
    const std::size_t nd = std::size_t(c.hi - c.lo + 1);
    c.terms.assign(nd, {});
    c.zpieces.assign(nd, {});
    c.rpieces.assign(nd, {});
    std::map<std::string, std::size_t> offset;
    for (auto& n : order_) {
        auto& p = pieces_.at(n);
        auto& t = c.terms[p.degree - c.lo];
        if (p.integral) {
            offset[n] = t.z_rank;
            c.zpieces[p.degree - c.lo].push_back(Piece{n, t.z_rank, p.dim});
            t.z_rank += p.dim;
        } else {
            offset[n] = t.r_dim;
            c.rpieces[p.degree - c.lo].push_back(Piece{n, t.r_dim, p.dim});
            t.r_dim += p.dim;
        }
    }
    for (int k = c.lo; k <= c.hi; ++k) {
        auto a = c.term(k), b = c.term(k + 1);
        c.zz.emplace_back(b.z_rank, a.z_rank);
        c.zr.emplace_back(b.r_dim, a.z_rank);
        c.rr.emplace_back(b.r_dim, a.r_dim);
    }
    for (auto& m : maps_) {
        const int k = pieces_.at(m.from).degree - c.lo;
        const std::size_t r0 = offset.at(m.to), c0 = offset.at(m.from);
        if (m.kind == 0)
            c.zz[k].add_block(r0, c0, m.zm);
        else if (m.kind == 1)
            c.zr[k].add_block(r0, c0, m.m);
        else
            c.rr[k].add_block(r0, c0, m.m);
    }
    if (!standins_.empty()) {
        std::vector<std::size_t> rows(nd, 0);
        std::vector<std::vector<std::pair<std::size_t, const Matrix<S>*>>> pending(nd);
        for (auto& [n, m] : standins_) {
            const int k = pieces_.at(n).degree - c.lo;
            pending[k].push_back({rows[k], &m});
            rows[k] += m.rows();
        }
        for (std::size_t k = 0; k < nd; ++k) {
            Matrix<S> s(rows[k], c.terms[k].r_dim);
            std::size_t idx = 0;
            for (auto& [n, m] : standins_) {
                if (std::size_t(pieces_.at(n).degree - c.lo) != k)
                    continue;
                s.set_block(pending[k][idx].first, offset.at(n), m);
                ++idx;
            }
            c.standin.push_back(std::move(s));
        }
    }
    if (validate)
        c.validate();
    return c;
}

// ---- chain maps ----

template <class S>
IntMatrix ChainMapT<S>::zz(int k) const
{
    auto it = fzz.find(k);
    if (it != fzz.end())
        return it->second;
    return IntMatrix(tgt->term(k).z_rank, src->term(k).z_rank);
}

template <class S>
Matrix<S> ChainMapT<S>::zr(int k) const
{
    auto it = fzr.find(k);
    if (it != fzr.end())
        return it->second;
    return Matrix<S>(tgt->term(k).r_dim, src->term(k).z_rank);
}

template <class S>
Matrix<S> ChainMapT<S>::rr(int k) const
{
    auto it = frr.find(k);
    if (it != frr.end())
        return it->second;
    return Matrix<S>(tgt->term(k).r_dim, src->term(k).r_dim);
}

template <class S>
bool ChainMapT<S>::verify(std::string* why) const
{
    const int lo = std::min(src->lo, tgt->lo) - 1, hi = std::max(src->hi, tgt->hi);
    for (int k = lo; k <= hi; ++k) {
        if (!(tgt->d_zz(k) * zz(k) == zz(k + 1) * src->d_zz(k))) {
            if (why)
                *why = "zz square fails in degree " + std::to_string(k);
            return false;
        }
        Matrix<S> lhs = times_int(tgt->d_zr(k), zz(k)) + tgt->d_rr(k) * zr(k);
        Matrix<S> rhs = times_int(zr(k + 1), src->d_zz(k)) + rr(k + 1) * src->d_zr(k);
        if (!close(lhs, rhs)) {
            if (why)
                *why = "zr square fails in degree " + std::to_string(k);
            return false;
        }
        if (!close(Matrix<S>(tgt->d_rr(k) * rr(k)), Matrix<S>(rr(k + 1) * src->d_rr(k)))) {
            if (why)
                *why = "rr square fails in degree " + std::to_string(k);
            return false;
        }
    }
    return true;
}

template <class S>
std::pair<IntMatrix, Matrix<S>> ChainMapT<S>::apply(int k, const IntMatrix& z, const Matrix<S>& r) const
{
    return {zz(k) * z, times_int(zr(k), z) + rr(k) * r};
}

template <class S>
ChainMapT<S> compose(const ChainMapT<S>& g, const ChainMapT<S>& f)
{
    ChainMapT<S> h;
    h.src = f.src;
    h.tgt = g.tgt;
    for (int k = f.src->lo; k <= f.src->hi; ++k) {
        h.fzz[k] = g.zz(k) * f.zz(k);
        h.fzr[k] = times_int(g.zr(k), f.zz(k)) + g.rr(k) * f.zr(k);
        h.frr[k] = g.rr(k) * f.rr(k);
    }
    return h;
}

template <class S>
ChainMapT<S> identity_map(std::shared_ptr<const MixedComplexT<S>> c)
{
    ChainMapT<S> f;
    f.src = f.tgt = c;
    for (int k = c->lo; k <= c->hi; ++k) {
        f.fzz[k] = IntMatrix::identity(c->term(k).z_rank);
        f.frr[k] = Matrix<S>::identity(c->term(k).r_dim);
    }
    return f;
}

template <class S>
ChainMapT<S> zero_map(std::shared_ptr<const MixedComplexT<S>> src, std::shared_ptr<const MixedComplexT<S>> tgt)
{
    ChainMapT<S> f;
    f.src = std::move(src);
    f.tgt = std::move(tgt);
    return f;
}

template <class S>
ChainMapBuilder<S>::ChainMapBuilder(std::shared_ptr<const MixedComplexT<S>> src,
                                    std::shared_ptr<const MixedComplexT<S>> tgt)
{
    f_.src = std::move(src);
    f_.tgt = std::move(tgt);
}

namespace {

template <class S>
std::pair<int, Piece> find_piece(const MixedComplexT<S>& c, const std::string& name, bool integral)
{
    auto loc = c.locate(name);
    if (!loc || loc->second != integral)
        throw std::invalid_argument("piece not found: " + name);
    auto p = integral ? c.zpiece(loc->first, name) : c.rpiece(loc->first, name);
    return {loc->first, *p};
}

}  // namespace

template <class S>
void ChainMapBuilder<S>::zz(const std::string& from, const std::string& to, const IntMatrix& m)
{
    auto [ka, a] = find_piece(*f_.src, from, true);
    auto [kb, b] = find_piece(*f_.tgt, to, true);
    if (ka != kb || m.rows() != b.size || m.cols() != a.size)
        throw std::invalid_argument("bad chain map block " + from + " -> " + to);
    if (!f_.fzz.count(ka))
        f_.fzz[ka] = f_.zz(ka);
    f_.fzz[ka].add_block(b.offset, a.offset, m);
}

template <class S>
void ChainMapBuilder<S>::zr(const std::string& from, const std::string& to, const Matrix<S>& m)
{
    auto [ka, a] = find_piece(*f_.src, from, true);
    auto [kb, b] = find_piece(*f_.tgt, to, false);
    if (ka != kb || m.rows() != b.size || m.cols() != a.size)
        throw std::invalid_argument("bad chain map block " + from + " -> " + to);
    if (!f_.fzr.count(ka))
        f_.fzr[ka] = f_.zr(ka);
    f_.fzr[ka].add_block(b.offset, a.offset, m);
}

template <class S>
void ChainMapBuilder<S>::rr(const std::string& from, const std::string& to, const Matrix<S>& m)
{
    auto [ka, a] = find_piece(*f_.src, from, false);
    auto [kb, b] = find_piece(*f_.tgt, to, false);
    if (ka != kb || m.rows() != b.size || m.cols() != a.size)
        throw std::invalid_argument("bad chain map block " + from + " -> " + to);
    if (!f_.frr.count(ka))
        f_.frr[ka] = f_.rr(ka);
    f_.frr[ka].add_block(b.offset, a.offset, m);
}

// ---- constructions ----

namespace {

std::vector<Piece> prefixed(const std::vector<Piece>& ps, const std::string& pre, std::size_t shift)
{
    std::vector<Piece> out;
    for (auto& p : ps)
        out.push_back(Piece{pre + p.name, p.offset + shift, p.size});
    return out;
}

template <class S>
Matrix<S> standin_at(const MixedComplexT<S>& c, int k)
{
    if (c.in_range(k) && !c.standin.empty())
        return c.standin[k - c.lo];
    return Matrix<S>(0, c.term(k).r_dim);
}

template <class S>
bool has_standins(const MixedComplexT<S>& c)
{
    for (auto& m : c.standin)
        if (m.rows() > 0)
            return true;
    return false;
}

}  // namespace

template <class S>
Cone<S> cone(const ChainMapT<S>& f)
{
    std::string why;
    if (!f.verify(&why))
        throw NotChainMap(why);
    const auto& T = *f.tgt;
    const auto& Sc = *f.src;
    auto out = std::make_shared<MixedComplexT<S>>();
    auto& c = *out;
    bool empty_t = T.hi < T.lo, empty_s = Sc.hi < Sc.lo;
    if (empty_t && empty_s)
        return Cone<S>{out, ChainMapT<S>{}, ChainMapT<S>{}};
    c.lo = empty_t ? Sc.lo - 1 : (empty_s ? T.lo : std::min(T.lo, Sc.lo - 1));
    c.hi = empty_t ? Sc.hi - 1 : (empty_s ? T.hi : std::max(T.hi, Sc.hi - 1));
    const bool st = has_standins(T) || has_standins(Sc);
    for (int k = c.lo; k <= c.hi; ++k) {
        MixedTerm a = T.term(k), b = Sc.term(k + 1);
        c.terms.push_back({a.z_rank + b.z_rank, a.r_dim + b.r_dim});
        std::vector<Piece> zp, rp;
        if (T.in_range(k)) {
            zp = prefixed(T.zpieces[k - T.lo], "tgt:", 0);
            rp = prefixed(T.rpieces[k - T.lo], "tgt:", 0);
        }
        if (Sc.in_range(k + 1)) {
            auto z2 = prefixed(Sc.zpieces[k + 1 - Sc.lo], "src:", a.z_rank);
            auto r2 = prefixed(Sc.rpieces[k + 1 - Sc.lo], "src:", a.r_dim);
            zp.insert(zp.end(), z2.begin(), z2.end());
            rp.insert(rp.end(), r2.begin(), r2.end());
        }
        c.zpieces.push_back(zp);
        c.rpieces.push_back(rp);
        MixedTerm a1 = T.term(k + 1), b1 = Sc.term(k + 2);
        IntMatrix zz(a1.z_rank + b1.z_rank, a.z_rank + b.z_rank);
        zz.set_block(0, 0, T.d_zz(k));
        zz.set_block(0, a.z_rank, f.zz(k + 1));
        zz.set_block(a1.z_rank, a.z_rank, -Sc.d_zz(k + 1));
        Matrix<S> zr(a1.r_dim + b1.r_dim, a.z_rank + b.z_rank);
        zr.set_block(0, 0, T.d_zr(k));
        zr.set_block(0, a.z_rank, f.zr(k + 1));
        zr.set_block(a1.r_dim, a.z_rank, -Sc.d_zr(k + 1));
        Matrix<S> rr(a1.r_dim + b1.r_dim, a.r_dim + b.r_dim);
        rr.set_block(0, 0, T.d_rr(k));
        rr.set_block(0, a.r_dim, f.rr(k + 1));
        rr.set_block(a1.r_dim, a.r_dim, -Sc.d_rr(k + 1));
        c.zz.push_back(std::move(zz));
        c.zr.push_back(std::move(zr));
        c.rr.push_back(std::move(rr));
        if (st)
            c.standin.push_back(block_diag(standin_at(T, k), standin_at(Sc, k + 1)));
    }
    c.validate();

    auto s1 = std::make_shared<MixedComplexT<S>>(shift(Sc, 1));
    Cone<S> res{out, {}, {}};
    res.inclusion.src = f.tgt;
    res.inclusion.tgt = out;
    res.projection.src = out;
    res.projection.tgt = s1;
    for (int k = c.lo; k <= c.hi; ++k) {
        MixedTerm a = T.term(k), b = Sc.term(k + 1);
        IntMatrix iz(a.z_rank + b.z_rank, a.z_rank);
        iz.set_block(0, 0, IntMatrix::identity(a.z_rank));
        Matrix<S> ir(a.r_dim + b.r_dim, a.r_dim);
        ir.set_block(0, 0, Matrix<S>::identity(a.r_dim));
        res.inclusion.fzz[k] = iz;
        res.inclusion.frr[k] = ir;
        IntMatrix pz(b.z_rank, a.z_rank + b.z_rank);
        pz.set_block(0, a.z_rank, IntMatrix::identity(b.z_rank));
        Matrix<S> pr(b.r_dim, a.r_dim + b.r_dim);
        pr.set_block(0, a.r_dim, Matrix<S>::identity(b.r_dim));
        res.projection.fzz[k] = pz;
        res.projection.frr[k] = pr;
    }
    return res;
}

template <class S>
MixedComplexT<S> shift(const MixedComplexT<S>& c, int k)
{
    MixedComplexT<S> s = c;
    s.lo = c.lo - k;
    s.hi = c.hi - k;
    if (k % 2 != 0) {
        for (auto& m : s.zz)
            m = -m;
        for (auto& m : s.zr)
            m = -m;
        for (auto& m : s.rr)
            m = -m;
    }
    return s;
}

template <class S>
MixedComplexT<S> direct_sum(const std::vector<MixedComplexT<S>>& cs)
{
    MixedComplexT<S> c;
    bool any = false;
    for (auto& x : cs) {
        if (x.hi < x.lo)
            continue;
        c.lo = any ? std::min(c.lo, x.lo) : x.lo;
        c.hi = any ? std::max(c.hi, x.hi) : x.hi;
        any = true;
    }
    if (!any)
        return c;
    bool st = false;
    for (auto& x : cs)
        st = st || has_standins(x);
    for (int k = c.lo; k <= c.hi; ++k) {
        MixedTerm t;
        std::vector<Piece> zp, rp;
        IntMatrix zz;
        Matrix<S> zr, rr, sd;
        for (std::size_t i = 0; i < cs.size(); ++i) {
            auto& x = cs[i];
            const std::string pre = "s" + std::to_string(i) + ":";
            if (x.in_range(k)) {
                auto a = prefixed(x.zpieces[k - x.lo], pre, t.z_rank);
                auto b = prefixed(x.rpieces[k - x.lo], pre, t.r_dim);
                zp.insert(zp.end(), a.begin(), a.end());
                rp.insert(rp.end(), b.begin(), b.end());
            }
            t.z_rank += x.term(k).z_rank;
            t.r_dim += x.term(k).r_dim;
            zz = block_diag(zz, x.d_zz(k));
            zr = block_diag(zr, x.d_zr(k));
            rr = block_diag(rr, x.d_rr(k));
            if (st)
                sd = block_diag(sd, standin_at(x, k));
        }
        c.terms.push_back(t);
        c.zpieces.push_back(zp);
        c.rpieces.push_back(rp);
        c.zz.push_back(zz);
        c.zr.push_back(zr);
        c.rr.push_back(rr);
        if (st)
            c.standin.push_back(sd);
    }
    c.validate();
    return c;
}

template <class S>
MixedComplexT<S> tensor_with_group(const MixedComplexT<S>& c, const FgAbGroup& g)
{
    std::vector<MixedComplexT<S>> parts(g.free_rank, c);
    auto cp = std::make_shared<const MixedComplexT<S>>(c);
    for (auto& d : g.torsion) {
        ChainMapT<S> f = identity_map(cp);
        for (auto& [k, m] : f.fzz)
            m *= d;
        for (auto& [k, m] : f.frr)
            m *= Lin<S>::from_int(d);
        parts.push_back(*cone(f).complex);
    }
    return direct_sum(parts);
}

template <class S>
std::size_t DoubleComplexT<S>::dim(int i, int j) const
{
    const int a = i - i0, b = j - j0;
    if (a < 0 || b < 0 || a >= int(ncols()) || b >= int(nrows()))
        return 0;
    return dims[a][b];
}

template <class S>
Matrix<S> DoubleComplexT<S>::vert(int i, int j) const
{
    const int a = i - i0, b = j - j0;
    if (a < 0 || b < 0 || a >= int(ncols()) || b + 1 >= int(nrows()))
        return Matrix<S>(dim(i, j + 1), dim(i, j));
    return v[a][b];
}

template <class S>
Matrix<S> DoubleComplexT<S>::horiz(int i, int j) const
{
    const int a = i - i0, b = j - j0;
    if (a < 0 || b < 0 || a + 1 >= int(ncols()) || b >= int(nrows()))
        return Matrix<S>(dim(i + 1, j), dim(i, j));
    return h[a][b];
}

template <class S>
MixedComplexT<S> total_complex(const DoubleComplexT<S>& dc)
{
    ComplexBuilder<S> b;
    auto name = [](int i, int j) { return "C(" + std::to_string(i) + "," + std::to_string(j) + ")"; };
    const int I = dc.i0 + int(dc.ncols()), J = dc.j0 + int(dc.nrows());
    for (int i = dc.i0; i < I; ++i)
        for (int j = dc.j0; j < J; ++j)
            b.add_r(name(i, j), i + j, dc.dim(i, j));
    for (int i = dc.i0; i < I; ++i)
        for (int j = dc.j0; j < J; ++j) {
            if (j + 1 < J) {
                Matrix<S> v = dc.vert(i, j);
                if (dc.vsign(i) < 0)
                    v = -v;
                b.rr(name(i, j), name(i, j + 1), v);
            }
            if (i + 1 < I)
                b.rr(name(i, j), name(i + 1, j), dc.horiz(i, j));
        }
    auto c = b.build(false);
    std::string why;
    if (!c.square_zero(&why))
        throw SignError("totalization is not a complex: " + why);
    return c;
}

template <class S>
MixedComplexT<S> conjugate(const MixedComplexT<S>& c, const std::vector<IntMatrix>& zbasis,
                           const std::vector<Matrix<S>>& rbasis)
{
    MixedComplexT<S> out = c;
    const int n = c.hi - c.lo + 1;
    std::vector<IntMatrix> zinv;
    std::vector<Matrix<S>> rinv;
    for (int i = 0; i < n; ++i) {
        auto zi = to_int(inverse(to_rat(zbasis[i])));
        if (!zi)
            throw std::invalid_argument("conjugate: lattice change of basis is not unimodular");
        zinv.push_back(*zi);
        if constexpr (Lin<S>::exact)
            rinv.push_back(inverse(rbasis[i]));
        else
            rinv.push_back(Lin<S>::pinv(rbasis[i]));
    }
    auto zb = [&](int i) { return i < n ? zbasis[i] : IntMatrix(0, 0); };
    auto rb = [&](int i) { return i < n ? rbasis[i] : Matrix<S>(0, 0); };
    for (int i = 0; i < n; ++i) {
        out.zz[i] = zb(i + 1) * c.zz[i] * zinv[i];
        out.zr[i] = rb(i + 1) * times_int(c.zr[i], zinv[i]);
        out.rr[i] = rb(i + 1) * c.rr[i] * rinv[i];
        if (!c.standin.empty())
            out.standin[i] = c.standin[i] * rinv[i];
    }
    out.validate();
    return out;
}

std::string StructuredAbGroup::str(bool elide_standins) const
{
    std::ostringstream os;
    bool first = true;
    auto sep = [&]() {
        if (!first)
            os << " ⊕ ";
        first = false;
    };
    const std::size_t a = elide_standins ? real_dim - standin_dim : real_dim;
    if (a > 0) {
        sep();
        os << "ℝ";
        if (a > 1)
            os << "^" << a;
    }
    if (torus_dim > 0) {
        sep();
        if (torus_dim == 1)
            os << "ℝ/ℤ";
        else
            os << "T^" << torus_dim;
    }
    if (free_rank > 0) {
        sep();
        os << "ℤ";
        if (free_rank > 1)
            os << "^" << free_rank;
    }
    for (auto& d : torsion) {
        sep();
        os << "ℤ/" << d;
    }
    if (first)
        os << "0";
    return os.str();
}

#define MXW_INSTANTIATE(S)                                                                             \
    template struct MixedComplexT<S>;                                                                  \
    template class ComplexBuilder<S>;                                                                  \
    template struct ChainMapT<S>;                                                                      \
    template class ChainMapBuilder<S>;                                                                 \
    template struct DoubleComplexT<S>;                                                                 \
    template ChainMapT<S> compose(const ChainMapT<S>&, const ChainMapT<S>&);                           \
    template ChainMapT<S> identity_map(std::shared_ptr<const MixedComplexT<S>>);                       \
    template ChainMapT<S> zero_map(std::shared_ptr<const MixedComplexT<S>>,                            \
                                   std::shared_ptr<const MixedComplexT<S>>);                           \
    template Cone<S> cone(const ChainMapT<S>&);                                                        \
    template MixedComplexT<S> shift(const MixedComplexT<S>&, int);                                     \
    template MixedComplexT<S> direct_sum(const std::vector<MixedComplexT<S>>&);                        \
    template MixedComplexT<S> tensor_with_group(const MixedComplexT<S>&, const FgAbGroup&);            \
    template MixedComplexT<S> total_complex(const DoubleComplexT<S>&);                                 \
    template MixedComplexT<S> conjugate(const MixedComplexT<S>&, const std::vector<IntMatrix>&,        \
                                        const std::vector<Matrix<S>>&);

MXW_INSTANTIATE(Rat)
MXW_INSTANTIATE(double)

}  // namespace mxw
