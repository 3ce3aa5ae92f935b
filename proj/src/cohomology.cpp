#include "mxw/complexes.hpp"

#include <algorithm>
#include <cmath>

namespace mxw {

namespace {

template <class S>
Matrix<S> times_int(const Matrix<S>& a, const IntMatrix& b)
{
    return a * convert<S>(b);
}

Int mod(const Int& a, const Int& d)
{
    Int r;
    mpz_fdiv_r(r.get_mpz_t(), a.get_mpz_t(), d.get_mpz_t());
    return r;
}

// Integer vectors in the kernel of E (saturated basis).
IntMatrix integer_kernel(const RatMatrix& E)
{
    if (E.cols() == 0)
        return IntMatrix(0, 0);
    Int s;
    return integer_kernel_basis(clear_denominators(E, s));
}

// Float version: the real kernel must be spanned by rational vectors with small denominators.
IntMatrix integer_kernel(const RealMatrix& E)
{
    const std::size_t b = E.cols();
    if (b == 0)
        return IntMatrix(0, 0);
    RealMatrix N = Lin<double>::kernel(E);
    if (N.cols() == 0)
        return IntMatrix(b, 0);
    // numerical RREF of N^T, then snap to rationals
    RealMatrix a = N.transpose();
    const std::size_t r = a.rows();
    std::size_t row = 0;
    for (std::size_t col = 0; col < b && row < r; ++col) {
        std::size_t p = row;
        for (std::size_t i = row; i < r; ++i)
            if (std::abs(a(i, col)) > std::abs(a(p, col)))
                p = i;
        if (std::abs(a(p, col)) < 1e-8)
            continue;
        for (std::size_t j = 0; j < b; ++j)
            std::swap(a(p, j), a(row, j));
        double piv = a(row, col);
        for (std::size_t j = 0; j < b; ++j)
            a(row, j) /= piv;
        for (std::size_t i = 0; i < r; ++i)
            if (i != row) {
                double f = a(i, col);
                for (std::size_t j = 0; j < b; ++j)
                    a(i, j) -= f * a(row, j);
            }
        ++row;
    }
    RatMatrix R(row, b);
    for (std::size_t i = 0; i < row; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            R(i, j) = rationalize(a(i, j), 10000);
            if (std::abs(R(i, j).get_d() - a(i, j)) > 1e-10)
                throw NonDiscreteLattice("lattice relations are not rational");
        }
    RealMatrix check = E * to_real(R.transpose());
    if (!Lin<double>::is_zero(check, max_abs(E)))
        throw NonDiscreteLattice("rationalized lattice relations do not annihilate E");
    if (R.rows() != N.cols())
        throw NonDiscreteLattice("lattice relation rank mismatch");
    RatMatrix C = kernel_basis(R);  // rowspace(R) = ker(C^T)
    if (C.cols() == 0)
        return IntMatrix::identity(b);
    return integer_kernel(RatMatrix(C.transpose()));
}

template <class S>
bool in_lattice(const Matrix<S>& basis, const Matrix<S>& v, IntMatrix* coords = nullptr)
{
    if (v.cols() == 0)
        return true;
    if (basis.cols() == 0) {
        bool z = Lin<S>::is_zero(v, 1.0);
        if (z && coords)
            *coords = IntMatrix(0, v.cols());
        return z;
    }
    if constexpr (Lin<S>::exact) {
        auto x = lattice_coordinates(basis, v);
        if (x && coords)
            *coords = *x;
        return x.has_value();
    } else {
        RealMatrix t = Lin<double>::pinv(basis) * v;
        IntMatrix ti(t.rows(), t.cols());
        RealMatrix tr(t.rows(), t.cols());
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < t.cols(); ++j) {
                double rd = std::round(t(i, j));
                ti(i, j) = Int(static_cast<long>(rd));
                tr(i, j) = rd;
            }
        bool ok = Lin<double>::is_zero(basis * tr - v, std::max(1.0, max_abs(v)));
        if (ok && coords)
            *coords = ti;
        return ok;
    }
}

// Relation matrix of an invariant-factor presentation (free coordinates have none).
IntMatrix relations(std::size_t free, const std::vector<Int>& tors)
{
    IntMatrix r(free + tors.size(), tors.size());
    for (std::size_t i = 0; i < tors.size(); ++i)
        r(free + i, i) = tors[i];
    return r;
}

bool surjective(const IntMatrix& m, std::size_t free, const std::vector<Int>& tors)
{
    const std::size_t n = free + tors.size();
    if (n == 0)
        return true;
    IntMatrix big(n, m.cols() + tors.size());
    big.set_block(0, 0, m);
    big.set_block(0, m.cols(), relations(free, tors));
    return cokernel(big).trivial();
}

bool reduces_to_zero(const IntMatrix& m, std::size_t free, const std::vector<Int>& tors)
{
    for (std::size_t j = 0; j < m.cols(); ++j) {
        for (std::size_t i = 0; i < free; ++i)
            if (m(i, j) != 0)
                return false;
        for (std::size_t i = 0; i < tors.size(); ++i)
            if (m(free + i, j) % tors[i] != 0)
                return false;
    }
    return true;
}

// ker(G) ⊆ im(F) inside a group with presentation (free, tors); G lands in (free3, tors3).
bool kernel_in_image(const IntMatrix& F, const IntMatrix& G, std::size_t free2, const std::vector<Int>& tors2,
                     std::size_t free3, const std::vector<Int>& tors3)
{
    const std::size_t n2 = free2 + tors2.size();
    if (n2 == 0)
        return true;
    const std::size_t n3 = free3 + tors3.size();
    IntMatrix big(n3, n2 + tors3.size());
    big.set_block(0, 0, G);
    big.set_block(0, n2, relations(free3, tors3));
    IntMatrix k = integer_kernel_basis(big).rows_range(0, n2);
    IntMatrix img(n2, F.cols() + tors2.size());
    img.set_block(0, 0, F);
    img.set_block(0, F.cols(), relations(free2, tors2));
    return solve_integer(img, k).has_value();
}

}  // namespace

FgAbGroup ZDegree::group() const
{
    FgAbGroup g;
    g.free_rank = free_gens.cols();
    g.torsion = tors_orders;
    return g;
}

template <class S>
CohomologyT<S>::CohomologyT(std::shared_ptr<const MixedComplexT<S>> c) : c_(std::move(c))
{
}

template <class S>
const ZDegree& CohomologyT<S>::z(int k)
{
    auto it = z_.find(k);
    if (it != z_.end())
        return it->second;
    const auto& c = *c_;
    const std::size_t zk = c.term(k).z_rank;
    ZDegree d;
    IntMatrix K = integer_kernel_basis(c.d_zz(k));
    const std::size_t n = K.cols();
    if (zk == 0 || n == 0) {
        d.free_gens = IntMatrix(zk, 0);
        d.tors_gens = IntMatrix(zk, 0);
        d.free_coord = IntMatrix(0, zk);
        d.tors_coord = IntMatrix(0, zk);
        return z_[k] = d;
    }
    auto sk = smith_normal_form(K);
    IntMatrix L = sk.V * sk.U.rows_range(0, n);  // left inverse of K
    IntMatrix X = L * c.d_zz(k - 1);
    auto sx = smith_normal_form(X);
    IntMatrix gens = K * sx.Uinv;
    IntMatrix coord = sx.U * L;
    std::vector<std::size_t> tors_idx;
    for (std::size_t i = 0; i < sx.rank; ++i)
        if (sx.D(i, i) != 1)
            tors_idx.push_back(i);
    d.free_gens = gens.cols_range(sx.rank, n - sx.rank);
    d.free_coord = coord.rows_range(sx.rank, n - sx.rank);
    d.tors_gens = IntMatrix(zk, tors_idx.size());
    d.tors_coord = IntMatrix(tors_idx.size(), zk);
    for (std::size_t j = 0; j < tors_idx.size(); ++j) {
        d.tors_gens.set_block(0, j, gens.cols_range(tors_idx[j], 1));
        d.tors_coord.set_block(j, 0, coord.rows_range(tors_idx[j], 1));
        d.tors_orders.push_back(sx.D(tors_idx[j], tors_idx[j]));
    }
    return z_[k] = d;
}

template <class S>
const RDegree<S>& CohomologyT<S>::r(int k)
{
    auto it = r_.find(k);
    if (it != r_.end())
        return it->second;
    const auto& c = *c_;
    RDegree<S> d;
    Matrix<S> Kr = Lin<S>::kernel(c.d_rr(k));
    Matrix<S> Ir = Lin<S>::colspace(c.d_rr(k - 1));
    d.reps = Lin<S>::complement(Ir, Kr);
    Matrix<S> B = hstack(Ir, d.reps);
    Matrix<S> L = Lin<S>::left_inverse(B);
    d.coord = L.rows_range(Ir.cols(), d.reps.cols());
    return r_[k] = d;
}

template <class S>
const Connecting<S>& CohomologyT<S>::conn(int k)
{
    auto it = conn_.find(k);
    if (it != conn_.end())
        return it->second;
    const auto& c = *c_;
    const ZDegree& zp = z(k - 1);
    const RDegree<S>& rk = r(k);
    Connecting<S> d;
    const std::size_t b = zp.free_gens.cols();
    d.E = rk.coord * times_int(c.d_zr(k - 1), zp.free_gens);
    IntMatrix K = integer_kernel(d.E);
    const std::size_t nk = b == 0 ? 0 : K.cols();
    if (nk == 0) {
        d.W = IntMatrix::identity(b);
        d.Winv = IntMatrix::identity(b);
    } else {
        auto sk = smith_normal_form(K);
        d.W = sk.Uinv;
        d.Winv = sk.U;
    }
    d.t = b - nk;
    d.lattice = times_int(d.E, d.W.cols_range(nk, d.t));
    if (Lin<S>::rank(d.lattice) != d.t)
        throw NonDiscreteLattice("image of the lattice map is not discrete in degree " + std::to_string(k));
    return conn_[k] = d;
}

template <class S>
std::size_t CohomologyT<S>::discrete_free(int k)
{
    return z(k).free_gens.cols() - conn(k + 1).t;
}

template <class S>
FgAbGroup CohomologyT<S>::discrete_group(int k)
{
    FgAbGroup g;
    g.free_rank = discrete_free(k);
    g.torsion = z(k).tors_orders;
    return g;
}

template <class S>
const std::pair<IntMatrix, Matrix<S>>& CohomologyT<S>::discrete_lifts(int k)
{
    auto it = lifts_.find(k);
    if (it != lifts_.end())
        return it->second;
    const auto& c = *c_;
    const ZDegree& zk = z(k);
    const Connecting<S>& cn = conn(k + 1);
    const std::size_t nk = discrete_free(k);
    const std::size_t m = nk + zk.tors_gens.cols();
    IntMatrix Z(c.term(k).z_rank, m);
    Z.set_block(0, 0, zk.free_gens * cn.W.cols_range(0, nk));
    Z.set_block(0, nk, zk.tors_gens);
    Matrix<S> Y(c.term(k).r_dim, m);
    if (m > 0) {
        auto y = Lin<S>::solve(c.d_rr(k), Matrix<S>(-times_int(c.d_zr(k), Z)));
        if (!y)
            throw std::logic_error("discrete class does not lift to a cocycle in degree " + std::to_string(k));
        Y = *y;
    }
    // make torsion lifts have exact order
    const RDegree<S>& rk = r(k);
    for (std::size_t j = 0; j < zk.tors_gens.cols(); ++j) {
        const Int& ord = zk.tors_orders[j];
        IntMatrix tau = zk.tors_gens.cols_range(j, 1);
        auto x = solve_integer(c.d_zz(k - 1), IntMatrix(tau * ord));
        if (!x)
            throw std::logic_error("torsion generator is not torsion");
        Matrix<S> y = Y.cols_range(nk + j, 1);
        Matrix<S> resid = y * Lin<S>::from_int(ord) - times_int(c.d_zr(k - 1), *x);
        Matrix<S> rho = rk.coord * resid;
        Matrix<S> inv_ord(1, 1);
        inv_ord(0, 0) = Lin<S>::from_rat(Rat(1) / Rat(ord));
        y -= rk.reps * rho * inv_ord(0, 0);
        Y.set_block(0, nk + j, y);
    }
    return lifts_[k] = {Z, Y};
}

template <class S>
ClassCoords<S> CohomologyT<S>::coordinates(int k, const IntMatrix& zc, const Matrix<S>& rc)
{
    const auto& c = *c_;
    const ZDegree& zk = z(k);
    const Connecting<S>& cn = conn(k + 1);
    const std::size_t nk = discrete_free(k);
    const std::size_t ntors = zk.tors_gens.cols();
    const std::size_t N = zc.cols();
    IntMatrix zf = zk.free_coord * zc;
    IntMatrix a = cn.Winv * zf;
    for (std::size_t i = nk; i < a.rows(); ++i)
        for (std::size_t j = 0; j < N; ++j)
            if (a(i, j) != 0)
                throw NotExact("element is not a cocycle (free class outside ker E) in degree " +
                               std::to_string(k));
    IntMatrix coef(nk + ntors, N);
    coef.set_block(0, 0, a.rows_range(0, nk));
    if (ntors > 0) {
        IntMatrix zt = zk.tors_coord * zc;
        for (std::size_t i = 0; i < ntors; ++i)
            for (std::size_t j = 0; j < N; ++j)
                coef(nk + i, j) = mod(zt(i, j), zk.tors_orders[i]);
    }
    const auto& L = discrete_lifts(k);
    IntMatrix zrest = zc - L.first * coef;
    Matrix<S> rrest = rc - L.second * convert<S>(coef);
    if (!zrest.is_zero()) {
        auto x = solve_integer(c.d_zz(k - 1), zrest);
        if (!x)
            throw NotExact("integral part is not a coboundary after removing generators");
        rrest -= times_int(c.d_zr(k - 1), *x);
    }
    ClassCoords<S> out;
    out.real = r(k).coord * rrest;
    out.discrete = coef;
    return out;
}

template <class S>
StructuredAbGroup CohomologyT<S>::group(int k)
{
    StructuredAbGroup g;
    const RDegree<S>& rk = r(k);
    const std::size_t h = rk.reps.cols();
    const std::size_t t = conn(k).t;
    g.torus_dim = t;
    g.real_dim = h - t;
    g.free_rank = discrete_free(k);
    g.torsion = z(k).tors_orders;
    const auto& c = *c_;
    if (c.in_range(k) && !c.standin.empty() && c.standin[k - c.lo].rows() > 0 && h > 0)
        g.standin_dim = Lin<S>::rank(Matrix<S>(c.standin[k - c.lo] * rk.reps));
    return g;
}

template <class S>
StructuredAbGroup cohomology(const MixedComplexT<S>& c, int k)
{
    std::string why;
    if (!c.square_zero(&why))
        throw InvalidComplex(why);
    CohomologyT<S> h(std::make_shared<const MixedComplexT<S>>(c));
    return h.group(k);
}

template <class S>
std::vector<StructuredAbGroup> cohomology_all(const MixedComplexT<S>& c)
{
    std::string why;
    if (!c.square_zero(&why))
        throw InvalidComplex(why);
    CohomologyT<S> h(std::make_shared<const MixedComplexT<S>>(c));
    std::vector<StructuredAbGroup> out;
    for (int k = c.lo; k <= c.hi; ++k)
        out.push_back(h.group(k));
    return out;
}

namespace {

// Matrix of the map induced on the discrete quotient ker(E_{k+1}) ⊕ torsion.
template <class S>
IntMatrix discrete_matrix(const IntMatrix& fzz, CohomologyT<S>& src, CohomologyT<S>& tgt, int k)
{
    const ZDegree& zs = src.z(k);
    const std::size_t nk = src.discrete_free(k);
    IntMatrix gens(zs.free_gens.rows(), nk + zs.tors_gens.cols());
    gens.set_block(0, 0, zs.free_gens * src.conn(k + 1).W.cols_range(0, nk));
    gens.set_block(0, nk, zs.tors_gens);
    IntMatrix img = fzz * gens;
    const ZDegree& zt = tgt.z(k);
    const std::size_t nkt = tgt.discrete_free(k);
    IntMatrix a = tgt.conn(k + 1).Winv * (zt.free_coord * img);
    IntMatrix out(nkt + zt.tors_gens.cols(), gens.cols());
    out.set_block(0, 0, a.rows_range(0, nkt));
    if (zt.tors_gens.cols() > 0) {
        IntMatrix tt = zt.tors_coord * img;
        for (std::size_t i = 0; i < tt.rows(); ++i)
            for (std::size_t j = 0; j < tt.cols(); ++j)
                out(nkt + i, j) = mod(tt(i, j), zt.tors_orders[i]);
    }
    return out;
}

}  // namespace

template <class S>
QuasiIsoReport quasi_iso_report(const ChainMapT<S>& f)
{
    QuasiIsoReport rep;
    std::string why;
    if (!f.verify(&why)) {
        rep.iso = false;
        rep.failures.push_back("not a chain map: " + why);
        return rep;
    }
    CohomologyT<S> a(f.src), b(f.tgt);
    const int lo = std::min(f.src->lo, f.tgt->lo), hi = std::max(f.src->hi, f.tgt->hi);
    for (int k = lo; k <= hi; ++k) {
        const std::string deg = " in degree " + std::to_string(k);
        const auto& ra = a.r(k);
        const auto& rb = b.r(k);
        Matrix<S> phi = rb.coord * f.rr(k) * ra.reps;
        if (ra.reps.cols() != rb.reps.cols() || Lin<S>::rank(phi) != ra.reps.cols()) {
            rep.iso = false;
            rep.failures.push_back("real cohomology map not bijective" + deg);
            continue;
        }
        const auto& la = a.conn(k).lattice;
        const auto& lb = b.conn(k).lattice;
        IntMatrix T;
        if (la.cols() != lb.cols() || !in_lattice(lb, Matrix<S>(phi * la), &T) ||
            (T.rows() > 0 && abs(determinant(T)) != 1)) {
            rep.iso = false;
            rep.failures.push_back("torus lattices not matched" + deg);
            continue;
        }
        IntMatrix M = discrete_matrix(f.zz(k), a, b, k);
        GroupHom g(a.discrete_group(k), b.discrete_group(k), M);
        if (!g.is_injective() || !surjective(M, b.discrete_free(k), b.z(k).tors_orders)) {
            rep.iso = false;
            rep.failures.push_back("discrete part not isomorphic" + deg);
        }
    }
    return rep;
}

template <class S>
bool is_quasi_iso(const ChainMapT<S>& f)
{
    return quasi_iso_report(f).iso;
}

template <class S>
StructuredMap<S> induced_map(const ChainMapT<S>& f, CohomologyT<S>& src, CohomologyT<S>& tgt, int k)
{
    StructuredMap<S> m;
    const auto& rs = src.r(k);
    const auto& lifts = src.discrete_lifts(k);
    const std::size_t h = rs.reps.cols();
    IntMatrix z0(src.complex().term(k).z_rank, h);
    auto [zi, ri] = f.apply(k, z0, rs.reps);
    m.real = tgt.coordinates(k, zi, ri).real;
    auto [zd, rd] = f.apply(k, lifts.first, lifts.second);
    auto cd = tgt.coordinates(k, zd, rd);
    m.mixed = cd.real;
    m.discrete = cd.discrete;
    return m;
}

namespace {

// g∘f vanishes on structured cohomology (target lattice / torsion taken into account).
template <class S>
bool composite_zero(const StructuredMap<S>& g, const StructuredMap<S>& f, CohomologyT<S>& tgt, int k)
{
    Matrix<S> rr = g.real * f.real;
    if (!Lin<S>::is_zero(rr, 1.0))
        return false;
    Matrix<S> mixed = g.real * f.mixed + g.mixed * convert<S>(f.discrete);
    if (!in_lattice(tgt.conn(k).lattice, mixed))
        return false;
    IntMatrix dd = g.discrete * f.discrete;
    return reduces_to_zero(dd, tgt.discrete_free(k), tgt.z(k).tors_orders);
}

// Snake construction on representatives: cocycle of C^k -> cocycle of A^{k+1}.
template <class S>
std::pair<IntMatrix, Matrix<S>> snake(const MixedComplexT<S>& B, const ChainMapT<S>& i, const ChainMapT<S>& q,
                                      int k, const IntMatrix& z, const Matrix<S>& r, bool integral_only)
{
    IntMatrix zb(B.term(k).z_rank, z.cols());
    if (!z.is_zero() || integral_only) {
        auto x = solve_integer(q.zz(k), z);
        if (!x)
            throw NotExact("quotient map is not surjective on lattices");
        zb = *x;
    }
    Matrix<S> rb(B.term(k).r_dim, z.cols());
    if (!integral_only) {
        auto y = Lin<S>::solve(q.rr(k), Matrix<S>(r - times_int(q.zr(k), zb)));
        if (!y)
            throw NotExact("quotient map is not surjective on real blocks");
        rb = *y;
    }
    IntMatrix dz = B.d_zz(k) * zb;
    auto az = solve_integer(i.zz(k + 1), dz);
    if (!az)
        throw NotExact("boundary does not come from the subcomplex (lattice)");
    if (integral_only)
        return {*az, Matrix<S>(0, z.cols())};
    Matrix<S> dr = times_int(B.d_zr(k), zb) + B.d_rr(k) * rb;
    auto ar = Lin<S>::solve(i.rr(k + 1), Matrix<S>(dr - times_int(i.zr(k + 1), *az)));
    if (!ar)
        throw NotExact("boundary does not come from the subcomplex (real)");
    return {*az, *ar};
}

// Integral-part map on H(Z) in (free, torsion) coordinates.
IntMatrix zcoords(const ZDegree& t, const IntMatrix& img)
{
    IntMatrix out(t.free_gens.cols() + t.tors_gens.cols(), img.cols());
    out.set_block(0, 0, t.free_coord * img);
    if (t.tors_gens.cols() > 0) {
        IntMatrix tt = t.tors_coord * img;
        for (std::size_t i = 0; i < tt.rows(); ++i)
            for (std::size_t j = 0; j < tt.cols(); ++j)
                out(t.free_gens.cols() + i, j) = mod(tt(i, j), t.tors_orders[i]);
    }
    return out;
}

IntMatrix zgens(const ZDegree& z) { return hstack(z.free_gens, z.tors_gens); }

template <class S>
void check_ses(const MixedComplexT<S>& A, const MixedComplexT<S>& B, const MixedComplexT<S>& C,
               const ChainMapT<S>& i, const ChainMapT<S>& q, int lo, int hi)
{
    std::string why;
    if (!i.verify(&why) || !q.verify(&why))
        throw NotExact("SES maps are not chain maps: " + why);
    for (int k = lo; k <= hi; ++k) {
        const std::string deg = " in degree " + std::to_string(k);
        auto a = A.term(k), b = B.term(k), c = C.term(k);
        if (b.z_rank != a.z_rank + c.z_rank || b.r_dim != a.r_dim + c.r_dim)
            throw NotExact("ranks do not add up" + deg);
        if (!(q.zz(k) * i.zz(k)).is_zero() || !Lin<S>::is_zero(Matrix<S>(q.rr(k) * i.rr(k)), 1.0) ||
            !Lin<S>::is_zero(Matrix<S>(times_int(q.zr(k), i.zz(k)) + q.rr(k) * i.zr(k)), 1.0))
            throw NotExact("q∘i ≠ 0" + deg);
        if (rank(i.zz(k)) != a.z_rank || !cokernel(i.zz(k)).torsion.empty())
            throw NotExact("lattice inclusion is not a saturated injection" + deg);
        if (!cokernel(q.zz(k)).trivial())
            throw NotExact("lattice projection is not surjective" + deg);
        if (Lin<S>::rank(i.rr(k)) != a.r_dim || Lin<S>::rank(q.rr(k)) != c.r_dim)
            throw NotExact("real maps not injective/surjective" + deg);
    }
}

}  // namespace

template <class S>
LongExactSequence<S> les_of_ses(std::shared_ptr<const MixedComplexT<S>> sub,
                                std::shared_ptr<const MixedComplexT<S>> total,
                                std::shared_ptr<const MixedComplexT<S>> quot, const ChainMapT<S>& i,
                                const ChainMapT<S>& q)
{
    const int lo = std::min({sub->lo, total->lo, quot->lo}) - 1;
    const int hi = std::max({sub->hi, total->hi, quot->hi}) + 1;
    check_ses(*sub, *total, *quot, i, q, lo, hi);
    LongExactSequence<S> les;
    CohomologyT<S> HA(sub), HB(total), HC(quot);
    auto fail = [&](const std::string& s) {
        les.exact = false;
        les.failures.push_back(s);
    };

    // structured maps along the sequence
    std::map<int, StructuredMap<S>> mi, mq;
    for (int k = lo; k <= hi; ++k) {
        les.nodes.push_back({k, 'A', HA.group(k)});
        les.nodes.push_back({k, 'B', HB.group(k)});
        les.nodes.push_back({k, 'C', HC.group(k)});
        mi[k] = induced_map(i, HA, HB, k);
        mq[k] = induced_map(q, HB, HC, k);
        // connecting map on structured generators of H^k(C)
        const auto& rc = HC.r(k);
        const auto& lc = HC.discrete_lifts(k);
        StructuredMap<S> d;
        IntMatrix z0(quot->term(k).z_rank, rc.reps.cols());
        auto [az, ar] = snake(*total, i, q, k, z0, rc.reps, false);
        d.real = HA.coordinates(k + 1, az, ar).real;
        auto [bz, br] = snake(*total, i, q, k, lc.first, lc.second, false);
        auto cd = HA.coordinates(k + 1, bz, br);
        d.mixed = cd.real;
        d.discrete = cd.discrete;
        les.connecting[k] = d;
    }

    // (1) structured composites vanish
    for (int k = lo; k <= hi; ++k) {
        const std::string deg = " at degree " + std::to_string(k);
        if (!composite_zero(mq[k], mi[k], HC, k))
            fail("q*∘i* ≠ 0" + deg);
        if (!composite_zero(les.connecting[k], mq[k], HA, k + 1))
            fail("∂∘q* ≠ 0" + deg);
        if (k + 1 <= hi && !composite_zero(mi[k + 1], les.connecting[k], HB, k + 1))
            fail("i*∘∂ ≠ 0" + deg);
    }

    // (2) rank bookkeeping: alternating sums of dim (a + t) and of (b - t) vanish
    long s_dim = 0, s_disc = 0;
    int sign = 1;
    for (auto& n : les.nodes) {
        s_dim += sign * long(n.group.real_dim + n.group.torus_dim);
        s_disc += sign * (long(n.group.free_rank) - long(n.group.torus_dim));
        sign = -sign;
    }
    if (s_dim != 0 || s_disc != 0)
        fail("alternating rank sums do not vanish");

    // (3) exactness of the real-part LES (vector spaces)
    for (int k = lo; k <= hi; ++k) {
        const std::string deg = " at degree " + std::to_string(k);
        const std::size_t ha = HA.r(k).reps.cols(), hb = HB.r(k).reps.cols(), hc = HC.r(k).reps.cols();
        const auto& dprev = les.connecting.count(k - 1) ? les.connecting[k - 1].real : Matrix<S>(ha, 0);
        auto rk = [](const Matrix<S>& m) { return m.rows() && m.cols() ? Lin<S>::rank(m) : std::size_t(0); };
        if (rk(dprev) + rk(mi[k].real) != ha)
            fail("real LES not exact at A" + deg);
        if (rk(mi[k].real) + rk(mq[k].real) != hb)
            fail("real LES not exact at B" + deg);
        if (rk(mq[k].real) + rk(les.connecting[k].real) != hc)
            fail("real LES not exact at C" + deg);
    }

    // (4) exactness of the integral-part LES (finitely generated groups)
    std::map<int, IntMatrix> zi, zq, zd;
    for (int k = lo; k <= hi; ++k) {
        zi[k] = zcoords(HB.z(k), i.zz(k) * zgens(HA.z(k)));
        zq[k] = zcoords(HC.z(k), q.zz(k) * zgens(HB.z(k)));
        auto [az, ar] = snake(*total, i, q, k, zgens(HC.z(k)), Matrix<S>(0, zgens(HC.z(k)).cols()), true);
        (void)ar;
        zd[k] = zcoords(HA.z(k + 1), az);
    }
    for (int k = lo; k <= hi; ++k) {
        const std::string deg = " at degree " + std::to_string(k);
        const auto &za = HA.z(k), &zb = HB.z(k), &zc = HC.z(k);
        auto fa = za.free_gens.cols(), fb = zb.free_gens.cols(), fc = zc.free_gens.cols();
        IntMatrix dprev = zd.count(k - 1) ? zd[k - 1] : IntMatrix(fa + za.tors_gens.cols(), 0);
        const auto& za1 = HA.z(k + 1);
        if (!reduces_to_zero(IntMatrix(zi[k] * dprev), fb, zb.tors_orders) ||
            !kernel_in_image(dprev, zi[k], fa, za.tors_orders, fb, zb.tors_orders))
            fail("integral LES not exact at A" + deg);
        if (!reduces_to_zero(IntMatrix(zq[k] * zi[k]), fc, zc.tors_orders) ||
            !kernel_in_image(zi[k], zq[k], fb, zb.tors_orders, fc, zc.tors_orders))
            fail("integral LES not exact at B" + deg);
        if (!reduces_to_zero(IntMatrix(zd[k] * zq[k]), za1.free_gens.cols(), za1.tors_orders) ||
            !kernel_in_image(zq[k], zd[k], fc, zc.tors_orders, za1.free_gens.cols(), za1.tors_orders))
            fail("integral LES not exact at C" + deg);
    }
    return les;
}

#define MXW_INSTANTIATE_COH(S)                                                                         \
    template class CohomologyT<S>;                                                                     \
    template StructuredAbGroup cohomology(const MixedComplexT<S>&, int);                               \
    template std::vector<StructuredAbGroup> cohomology_all(const MixedComplexT<S>&);                   \
    template QuasiIsoReport quasi_iso_report(const ChainMapT<S>&);                                     \
    template bool is_quasi_iso(const ChainMapT<S>&);                                                   \
    template StructuredMap<S> induced_map(const ChainMapT<S>&, CohomologyT<S>&, CohomologyT<S>&, int); \
    template LongExactSequence<S> les_of_ses(                                                          \
        std::shared_ptr<const MixedComplexT<S>>, std::shared_ptr<const MixedComplexT<S>>,              \
        std::shared_ptr<const MixedComplexT<S>>, const ChainMapT<S>&, const ChainMapT<S>&);

MXW_INSTANTIATE_COH(Rat)
MXW_INSTANTIATE_COH(double)

}  // namespace mxw
