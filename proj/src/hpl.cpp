#include "mxw/hpl.hpp"

#include <algorithm>
#include <type_traits>

namespace mxw {

namespace {

template <class S>
using M = Matrix<S>;

template <class S>
double nrm(const M<S>& m)
{
    if (m.rows() == 0 || m.cols() == 0)
        return 0;
    if constexpr (std::is_same_v<S, Rat>)
        return m.is_zero() ? 0.0 : max_abs(to_real(m));
    else
        return max_abs(m);
}

template <class S>
bool negligible(const M<S>& m)
{
    if constexpr (std::is_same_v<S, Rat>)
        return m.is_zero();
    else
        return Lin<double>::is_zero(m);
}

template <class S>
std::size_t dim(const MixedComplexT<S>& c, int k)
{
    return c.term(k).r_dim;
}

template <class S>
M<S> eye(std::size_t n)
{
    return M<S>::identity(n);
}

template <class S>
M<S> at(const std::map<int, M<S>>& m, int k, std::size_t rows, std::size_t cols)
{
    auto it = m.find(k);
    if (it == m.end())
        return M<S>(rows, cols);
    return it->second;
}

template <class S>
void range_of(const RetractT<S>& r, int& lo, int& hi)
{
    lo = std::min(r.small->lo, r.big->lo);
    hi = std::max(r.small->hi, r.big->hi);
}

// real-only copy of c with the differential out of degree k replaced
template <class S>
MixedComplexT<S> with_differential(const MixedComplexT<S>& c, const std::map<int, M<S>>& d)
{
    MixedComplexT<S> o = c;
    for (int k = c.lo; k <= c.hi; ++k) {
        auto it = d.find(k);
        if (it != d.end())
            o.rr[k - c.lo] = it->second;
    }
    return o;
}

template <class S>
void require_real(const MixedComplexT<S>& c, const char* what)
{
    for (int k = c.lo; k <= c.hi; ++k)
        if (c.term(k).z_rank)
            throw RetractInvalid(std::string(what) + " has lattice terms; retracts act on real complexes");
}

}  // namespace

template <class S>
Matrix<S> RetractT<S>::i(int k) const
{
    return at(iota, k, dim(*big, k), dim(*small, k));
}

template <class S>
Matrix<S> RetractT<S>::p(int k) const
{
    return at(pi, k, dim(*small, k), dim(*big, k));
}

template <class S>
Matrix<S> RetractT<S>::h(int k) const
{
    return at(eta, k, dim(*big, k - 1), dim(*big, k));
}

template <class S>
RetractCheck RetractT<S>::check() const
{
    RetractCheck c;
    int lo, hi;
    range_of(*this, lo, hi);
    auto upd = [](double& x, double v) { x = std::max(x, v); };
    for (int k = lo - 1; k <= hi; ++k) {
        const M<S> dB = big->d_rr(k), dS = small->d_rr(k);
        upd(c.chain, nrm(M<S>(i(k + 1) * dS - dB * i(k))));
        upd(c.chain, nrm(M<S>(p(k + 1) * dB - dS * p(k))));
    }
    for (int k = lo; k <= hi; ++k) {
        upd(c.pi_iota, nrm(M<S>(p(k) * i(k) - eye<S>(dim(*small, k)))));
        const M<S> lhs = i(k) * p(k) - eye<S>(dim(*big, k));
        const M<S> rhs = big->d_rr(k - 1) * h(k) + h(k + 1) * big->d_rr(k);
        upd(c.homotopy, nrm(M<S>(lhs - rhs)));
        upd(c.side, nrm(M<S>(h(k) * i(k))));
        upd(c.side, nrm(M<S>(p(k - 1) * h(k))));
        upd(c.side, nrm(M<S>(h(k - 1) * h(k))));
    }
    return c;
}

template <class S>
Matrix<S> PerturbationT<S>::at(const MixedComplexT<S>& big, int k) const
{
    return mxw::at(delta, k, dim(big, k + 1), dim(big, k));
}

template <class S>
SmallnessCertificate<S> smallness_certificate(const RetractT<S>& r, const PerturbationT<S>& d)
{
    SmallnessCertificate<S> cert;
    const MixedComplexT<S>& B = *r.big;
    std::map<int, M<S>> N;
    bool nilpotent = true;
    int order = 1;
    for (int k = B.lo; k <= B.hi; ++k) {
        const M<S> n = d.at(B, k - 1) * r.h(k);
        N[k] = n;
        const std::size_t sz = dim(B, k);
        M<S> power = n, sum = eye<S>(sz);
        int j = 1;
        while (!negligible(power) && j <= int(sz)) {
            sum = sum + power;
            power = power * n;
            ++j;
        }
        if (!negligible(power)) {
            nilpotent = false;
            continue;
        }
        order = std::max(order, j);
        cert.inverse[k] = sum;
    }
    if (nilpotent) {
        cert.kind = SmallnessKind::Nilpotent;
        cert.order = order;
        return cert;
    }
    cert.inverse.clear();
    for (auto& [k, n] : N) {
        const M<S> a = eye<S>(dim(B, k)) - n;
        if (Lin<S>::rank(a) < a.rows()) {
            cert.kind = SmallnessKind::NotSmall;
            cert.degree = k;
            cert.witness = Lin<S>::kernel(a).cols_range(0, 1);
            cert.inverse.clear();
            return cert;
        }
        cert.inverse[k] = Lin<S>::inverse(a);
    }
    cert.kind = SmallnessKind::Invertible;
    return cert;
}

template <class S>
RetractT<S> perturb(const RetractT<S>& r, const PerturbationT<S>& d)
{
    const MixedComplexT<S>& B = *r.big;
    const MixedComplexT<S>& Sm = *r.small;
    require_real(B, "big complex");
    require_real(Sm, "small complex");
    std::map<int, M<S>> dB;
    for (int k = B.lo; k <= B.hi; ++k)
        dB[k] = M<S>(B.d_rr(k) + d.at(B, k));
    for (int k = B.lo; k < B.hi; ++k) {
        const M<S> sq = dB[k + 1] * dB[k];
        if (!negligible(sq))
            throw NotSquareZero("d + δ does not square to zero in degree " + std::to_string(k));
    }
    const auto cert = smallness_certificate(r, d);
    if (cert.kind == SmallnessKind::NotSmall)
        throw NotSmall("1 - δη is singular in degree " + std::to_string(cert.degree));

    auto inv = [&](int k) { return at(cert.inverse, k, dim(B, k), dim(B, k)); };
    auto A = [&](int k) { return M<S>(inv(k + 1) * d.at(B, k)); };  // B^k -> B^{k+1}

    RetractT<S> o;
    o.big = std::make_shared<const MixedComplexT<S>>(with_differential(B, dB));
    std::map<int, M<S>> dS;
    for (int k = Sm.lo; k <= Sm.hi; ++k)
        dS[k] = M<S>(Sm.d_rr(k) + r.p(k + 1) * A(k) * r.i(k));
    o.small = std::make_shared<const MixedComplexT<S>>(with_differential(Sm, dS));
    int lo, hi;
    range_of(r, lo, hi);
    for (int k = lo; k <= hi; ++k) {
        o.iota[k] = M<S>(r.i(k) + r.h(k + 1) * A(k) * r.i(k));
        o.pi[k] = M<S>(r.p(k) + r.p(k) * A(k - 1) * r.h(k));
        o.eta[k] = M<S>(r.h(k) + r.h(k) * A(k - 1) * r.h(k));
    }
    return o;
}

template <class S>
RetractT<S> normalize_side_conditions(const RetractT<S>& r)
{
    RetractT<S> o = r;
    int lo, hi;
    range_of(r, lo, hi);
    std::map<int, M<S>> q;  // 1 - ιπ
    for (int k = lo - 1; k <= hi + 1; ++k)
        q[k] = M<S>(eye<S>(dim(*r.big, k)) - r.i(k) * r.p(k));
    for (int k = lo; k <= hi + 1; ++k)
        o.eta[k] = M<S>(q[k - 1] * r.h(k) * q[k]);
    std::map<int, M<S>> e2;
    for (int k = lo; k <= hi + 1; ++k)
        e2[k] = M<S>(o.h(k) * r.big->d_rr(k - 1) * o.h(k) * S(-1));
    o.eta = e2;
    return o;
}

template <class S>
RetractT<S> harmonic_retract(std::shared_ptr<const MixedComplexT<S>> c)
{
    require_real(*c, "complex");
    ComplexBuilder<S> b;
    RetractT<S> r;
    r.big = c;
    std::map<int, M<S>> H;
    for (int k = c->lo; k <= c->hi; ++k) {
        const M<S> both = vstack(M<S>(c->d_rr(k)), M<S>(c->d_rr(k - 1).transpose()));
        H[k] = Lin<S>::kernel(both);
        b.add_r("H" + std::to_string(k), k, H[k].cols());
    }
    r.small = std::make_shared<const MixedComplexT<S>>(b.build());
    for (int k = c->lo; k <= c->hi; ++k) {
        r.iota[k] = H[k];
        r.pi[k] = M<S>(0, dim(*c, k));
        if (H[k].cols())
            r.pi[k] = M<S>(Lin<S>::inverse(M<S>(H[k].transpose() * H[k])) * H[k].transpose());
        r.eta[k] = M<S>(Lin<S>::pinv(c->d_rr(k - 1)) * S(-1));
    }
    return r;
}

template <class S>
MixedComplexT<S> column_complex(const DoubleComplexT<S>& dc, int i)
{
    ComplexBuilder<S> b;
    const int J = dc.j0 + int(dc.nrows());
    auto name = [&](int j) { return "C(" + std::to_string(i) + "," + std::to_string(j) + ")"; };
    for (int j = dc.j0; j < J; ++j)
        b.add_r(name(j), j, dc.dim(i, j));
    for (int j = dc.j0; j + 1 < J; ++j)
        b.rr(name(j), name(j + 1), dc.vert(i, j));
    return b.build();
}

template <class S>
StaircaseResult<S> staircase_transfer(const DoubleComplexT<S>& dc, const std::vector<RetractT<S>>& columns)
{
    const int I = dc.i0 + int(dc.ncols()), J = dc.j0 + int(dc.nrows());
    if (columns.size() != dc.ncols())
        throw RetractInvalid("one column retract per column is required");
    const double tol = std::is_same_v<S, Rat> ? 0.0 : 1e-9;

    DoubleComplexT<S> vonly = dc;
    for (auto& col : vonly.h)
        for (auto& m : col)
            m = M<S>(m.rows(), m.cols());
    auto B = std::make_shared<const MixedComplexT<S>>(total_complex(vonly));
    auto T = total_complex(dc);

    ComplexBuilder<S> sb;
    auto hname = [](int i, int j) { return "H(" + std::to_string(i) + "," + std::to_string(j) + ")"; };
    auto cname = [](int i, int j) { return "C(" + std::to_string(i) + "," + std::to_string(j) + ")"; };
    for (int i = dc.i0; i < I; ++i) {
        const RetractT<S>& c = columns[i - dc.i0];
        const auto col = column_complex(dc, i);
        if (c.big->lo > dc.j0 || c.big->hi < J - 1)
            throw RetractInvalid("column retract " + std::to_string(i) + " does not cover the column");
        for (int j = dc.j0; j < J; ++j)
            if (dim(*c.big, j) != dc.dim(i, j) || nrm(M<S>(c.big->d_rr(j) - col.d_rr(j))) > tol)
                throw RetractInvalid("column retract " + std::to_string(i) + " is for a different complex");
        if (!c.check().ok(tol))
            throw RetractInvalid("column retract " + std::to_string(i) + " fails the retract identities");
        for (int j = dc.j0; j < J; ++j)
            sb.add_r(hname(i, j), i + j, dim(*c.small, j));
    }
    for (int i = dc.i0; i < I; ++i) {
        const RetractT<S>& c = columns[i - dc.i0];
        const S s = S(dc.vsign(i));
        for (int j = dc.j0; j + 1 < J; ++j)
            sb.rr(hname(i, j), hname(i, j + 1), M<S>(c.small->d_rr(j) * s));
    }

    RetractT<S> r;
    r.big = B;
    r.small = std::make_shared<const MixedComplexT<S>>(sb.build());
    const MixedComplexT<S>& Sm = *r.small;
    for (int k = B->lo; k <= B->hi; ++k) {
        r.iota[k] = M<S>(dim(*B, k), dim(Sm, k));
        r.pi[k] = M<S>(dim(Sm, k), dim(*B, k));
        r.eta[k] = M<S>(dim(*B, k - 1), dim(*B, k));
    }
    PerturbationT<S> delta;
    for (int k = B->lo; k <= B->hi; ++k)
        delta.delta[k] = M<S>(T.d_rr(k) - B->d_rr(k));
    for (int i = dc.i0; i < I; ++i) {
        const RetractT<S>& c = columns[i - dc.i0];
        const S s = S(dc.vsign(i));
        for (int j = dc.j0; j < J; ++j) {
            const int k = i + j;
            auto bp = B->rpiece(k, cname(i, j));
            auto sp = Sm.rpiece(k, hname(i, j));
            r.iota[k].set_block(bp->offset, sp->offset, c.i(j));
            r.pi[k].set_block(sp->offset, bp->offset, c.p(j));
            if (j > dc.j0) {
                auto bq = B->rpiece(k - 1, cname(i, j - 1));
                r.eta[k].set_block(bq->offset, bp->offset, M<S>(c.h(j) * s));
            }
        }
    }
    StaircaseResult<S> out;
    out.nilpotency = smallness_certificate(r, delta).order;
    out.retract = perturb(r, delta);
    return out;
}

template <class S>
RetractT<S> hodge_retract(const DecManifold& m, int l, const HodgeData<S>* hp)
{
    if (l < 0 || l > m.n)
        throw InvalidParameter("truncation degree out of range");
    HodgeData<S> own;
    if (!hp) {
        own = hodge_decomposition<S>(m);
        hp = &own;
    }
    const HodgeData<S>& h = *hp;
    auto w = [](int k) { return "W" + std::to_string(k); };
    ComplexBuilder<S> bb, sb;
    for (int k = 0; k <= l; ++k)
        bb.add_r(w(k), k, m.ncells(k));
    for (int k = 0; k < l; ++k)
        bb.rr(w(k), w(k + 1), convert<S>(m.d[k]));
    for (int k = 0; k <= l; ++k)
        sb.add_r("H" + std::to_string(k), k, h.harmonic[k].cols());
    sb.add_r("K" + std::to_string(l), l, h.coclosed[l].cols());

    RetractT<S> r;
    r.big = std::make_shared<const MixedComplexT<S>>(bb.build());
    r.small = std::make_shared<const MixedComplexT<S>>(sb.build());
    for (int k = 0; k < l; ++k) {
        r.iota[k] = h.harmonic[k];
        r.pi[k] = h.pi[k];
        r.eta[k] = h.eta[k];
    }
    const M<S>& K = h.coclosed[l];
    const M<S>& g = h.metric[l];
    r.iota[l] = hstack(h.harmonic[l], K);
    M<S> pk(0, m.ncells(l));
    if (K.cols())
        pk = M<S>(Lin<S>::inverse(M<S>(K.transpose() * g * K)) * K.transpose() * g);
    r.pi[l] = vstack(h.pi[l], pk);
    r.eta[l] = h.eta[l];

    const auto c = r.check();
    const double tol = 1e-10;
    if (!c.ok(tol) || !c.side_ok(tol))
        throw ToleranceExceeded("Hodge retract residual " + std::to_string(std::max({c.chain, c.pi_iota, c.homotopy, c.side})));
    return r;
}

#define MXW_HPL(S)                                                                                         \
    template struct RetractT<S>;                                                                           \
    template struct PerturbationT<S>;                                                                      \
    template SmallnessCertificate<S> smallness_certificate(const RetractT<S>&, const PerturbationT<S>&);   \
    template RetractT<S> perturb(const RetractT<S>&, const PerturbationT<S>&);                             \
    template RetractT<S> normalize_side_conditions(const RetractT<S>&);                                    \
    template RetractT<S> harmonic_retract(std::shared_ptr<const MixedComplexT<S>>);                        \
    template MixedComplexT<S> column_complex(const DoubleComplexT<S>&, int);                               \
    template StaircaseResult<S> staircase_transfer(const DoubleComplexT<S>&, const std::vector<RetractT<S>>&); \
    template RetractT<S> hodge_retract(const DecManifold&, int, const HodgeData<S>*);

MXW_HPL(Rat)
MXW_HPL(double)

}  // namespace mxw
