#include "mxw/exact_algebra.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace mxw {

RatMatrix to_rat(const IntMatrix& m)
{
    RatMatrix r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            r(i, j) = Rat(m(i, j));
    return r;
}

RealMatrix to_real(const RatMatrix& m)
{
    RealMatrix r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            r(i, j) = m(i, j).get_d();
    return r;
}

RealMatrix to_real(const IntMatrix& m)
{
    RealMatrix r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            r(i, j) = m(i, j).get_d();
    return r;
}

double max_abs(const RealMatrix& m)
{
    double s = 0;
    for (double x : m.data())
        s = std::max(s, std::abs(x));
    return s;
}

namespace {

Int floor_div(const Int& a, const Int& b)
{
    Int q;
    mpz_fdiv_q(q.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return q;
}

Int abs_int(const Int& a) { return a < 0 ? Int(-a) : a; }

// Elementary operations acting on A and the two accumulated transforms.
struct SnfWork {
    IntMatrix A, U, Uinv, V, Vinv;

    void swap_rows(std::size_t i, std::size_t j)
    {
        if (i == j)
            return;
        for (std::size_t k = 0; k < A.cols(); ++k)
            std::swap(A(i, k), A(j, k));
        for (std::size_t k = 0; k < U.cols(); ++k)
            std::swap(U(i, k), U(j, k));
        for (std::size_t k = 0; k < Uinv.rows(); ++k)
            std::swap(Uinv(k, i), Uinv(k, j));
    }
    void swap_cols(std::size_t i, std::size_t j)
    {
        if (i == j)
            return;
        for (std::size_t k = 0; k < A.rows(); ++k)
            std::swap(A(k, i), A(k, j));
        for (std::size_t k = 0; k < V.rows(); ++k)
            std::swap(V(k, i), V(k, j));
        for (std::size_t k = 0; k < Vinv.cols(); ++k)
            std::swap(Vinv(i, k), Vinv(j, k));
    }
    // row dst += q * row src
    void add_row(std::size_t dst, std::size_t src, const Int& q)
    {
        if (q == 0)
            return;
        for (std::size_t k = 0; k < A.cols(); ++k)
            if (A(src, k) != 0)
                A(dst, k) += q * A(src, k);
        for (std::size_t k = 0; k < U.cols(); ++k)
            if (U(src, k) != 0)
                U(dst, k) += q * U(src, k);
        for (std::size_t k = 0; k < Uinv.rows(); ++k)
            if (Uinv(k, dst) != 0)
                Uinv(k, src) -= q * Uinv(k, dst);
    }
    // col dst += q * col src
    void add_col(std::size_t dst, std::size_t src, const Int& q)
    {
        if (q == 0)
            return;
        for (std::size_t k = 0; k < A.rows(); ++k)
            if (A(k, src) != 0)
                A(k, dst) += q * A(k, src);
        for (std::size_t k = 0; k < V.rows(); ++k)
            if (V(k, src) != 0)
                V(k, dst) += q * V(k, src);
        for (std::size_t k = 0; k < Vinv.cols(); ++k)
            if (Vinv(dst, k) != 0)
                Vinv(src, k) -= q * Vinv(dst, k);
    }
    void negate_row(std::size_t i)
    {
        for (std::size_t k = 0; k < A.cols(); ++k)
            A(i, k) = -A(i, k);
        for (std::size_t k = 0; k < U.cols(); ++k)
            U(i, k) = -U(i, k);
        for (std::size_t k = 0; k < Uinv.rows(); ++k)
            Uinv(k, i) = -Uinv(k, i);
    }
};

}  // namespace

std::vector<Int> SmithForm::diagonal() const
{
    std::vector<Int> d;
    for (std::size_t i = 0; i < std::min(D.rows(), D.cols()); ++i)
        d.push_back(D(i, i));
    return d;
}

SmithForm smith_normal_form(const IntMatrix& m)
{
    const std::size_t r = m.rows(), c = m.cols();
    SnfWork w{m, IntMatrix::identity(r), IntMatrix::identity(r), IntMatrix::identity(c),
              IntMatrix::identity(c)};
    IntMatrix& A = w.A;

    std::size_t t = 0;
    for (; t < std::min(r, c); ++t) {
        // Smallest nonzero entry in the trailing block becomes the pivot.
        bool found = false;
        std::size_t pi = 0, pj = 0;
        Int best;
        for (std::size_t i = t; i < r; ++i)
            for (std::size_t j = t; j < c; ++j)
                if (A(i, j) != 0 && (!found || abs_int(A(i, j)) < best)) {
                    found = true;
                    best = abs_int(A(i, j));
                    pi = i;
                    pj = j;
                }
        if (!found)
            break;
        w.swap_rows(t, pi);
        w.swap_cols(t, pj);

        for (;;) {
            bool clean = true;
            for (std::size_t i = t + 1; i < r; ++i)
                if (A(i, t) != 0) {
                    w.add_row(i, t, -floor_div(A(i, t), A(t, t)));
                    if (A(i, t) != 0)
                        clean = false;
                }
            for (std::size_t j = t + 1; j < c; ++j)
                if (A(t, j) != 0) {
                    w.add_col(j, t, -floor_div(A(t, j), A(t, t)));
                    if (A(t, j) != 0)
                        clean = false;
                }
            if (!clean) {
                // a remainder smaller than the pivot is left somewhere in row/col t
                std::size_t bi = t, bj = t;
                Int b = abs_int(A(t, t));
                for (std::size_t i = t + 1; i < r; ++i)
                    if (A(i, t) != 0 && abs_int(A(i, t)) < b) {
                        b = abs_int(A(i, t));
                        bi = i;
                        bj = t;
                    }
                for (std::size_t j = t + 1; j < c; ++j)
                    if (A(t, j) != 0 && abs_int(A(t, j)) < b) {
                        b = abs_int(A(t, j));
                        bi = t;
                        bj = j;
                    }
                w.swap_rows(t, bi);
                w.swap_cols(t, bj);
                continue;
            }
            bool divides = true;
            for (std::size_t i = t + 1; i < r && divides; ++i)
                for (std::size_t j = t + 1; j < c; ++j)
                    if (A(i, j) != 0 && A(i, j) % A(t, t) != 0) {
                        w.add_row(t, i, 1);
                        divides = false;
                        break;
                    }
            if (divides)
                break;
        }
        if (A(t, t) < 0)
            w.negate_row(t);
    }

    SmithForm s;
    s.U = std::move(w.U);
    s.Uinv = std::move(w.Uinv);
    s.V = std::move(w.V);
    s.Vinv = std::move(w.Vinv);
    s.D = std::move(w.A);
    s.rank = t;
    return s;
}

std::string FgAbGroup::str() const
{
    if (trivial())
        return "0";
    std::ostringstream os;
    bool first = true;
    if (free_rank > 0) {
        os << "ℤ";
        if (free_rank > 1)
            os << "^" << free_rank;
        first = false;
    }
    for (auto& d : torsion) {
        os << (first ? "" : " ⊕ ") << "ℤ/" << d;
        first = false;
    }
    return os.str();
}

FgAbGroup make_group(std::size_t free_rank, std::vector<Int> orders)
{
    std::vector<Int> nz;
    for (auto& d : orders) {
        if (d == 0)
            ++free_rank;
        else if (abs_int(d) != 1)
            nz.push_back(abs_int(d));
    }
    FgAbGroup g;
    g.free_rank = free_rank;
    if (nz.empty())
        return g;
    IntMatrix D(nz.size(), nz.size());
    for (std::size_t i = 0; i < nz.size(); ++i)
        D(i, i) = nz[i];
    auto s = smith_normal_form(D);
    for (auto& d : s.diagonal())
        if (d != 1)
            g.torsion.push_back(d);
    return g;
}

FgAbGroup direct_sum(const FgAbGroup& a, const FgAbGroup& b)
{
    std::vector<Int> t = a.torsion;
    t.insert(t.end(), b.torsion.begin(), b.torsion.end());
    return make_group(a.free_rank + b.free_rank, t);
}

FgAbGroup cokernel(const IntMatrix& m)
{
    auto s = smith_normal_form(m);
    FgAbGroup g;
    g.free_rank = m.rows() - s.rank;
    for (std::size_t i = 0; i < s.rank; ++i)
        if (s.D(i, i) != 1)
            g.torsion.push_back(s.D(i, i));
    return g;
}

IntMatrix integer_kernel_basis(const IntMatrix& m)
{
    auto s = smith_normal_form(m);
    return s.V.cols_range(s.rank, m.cols() - s.rank);
}

std::size_t rank(const IntMatrix& m) { return rank(to_rat(m)); }

Int determinant(const IntMatrix& m)
{
    if (m.rows() != m.cols())
        throw std::invalid_argument("determinant of non-square matrix");
    const std::size_t n = m.rows();
    if (n == 0)
        return 1;
    // Bareiss fraction-free elimination
    IntMatrix a = m;
    Int prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (a(k, k) == 0) {
            std::size_t p = k + 1;
            while (p < n && a(p, k) == 0)
                ++p;
            if (p == n)
                return 0;
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(p, j));
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j) {
                Int num = a(i, j) * a(k, k) - a(i, k) * a(k, j);
                mpz_divexact(a(i, j).get_mpz_t(), num.get_mpz_t(), prev.get_mpz_t());
            }
        prev = a(k, k);
    }
    return sign * a(n - 1, n - 1);
}

std::optional<IntMatrix> solve_integer(const IntMatrix& A, const IntMatrix& B)
{
    if (A.rows() != B.rows())
        throw std::invalid_argument("solve_integer: row mismatch");
    auto s = smith_normal_form(A);
    IntMatrix UB = s.U * B;
    IntMatrix Y(A.cols(), B.cols());
    for (std::size_t i = 0; i < UB.rows(); ++i)
        for (std::size_t j = 0; j < B.cols(); ++j) {
            if (i < s.rank) {
                if (UB(i, j) % s.D(i, i) != 0)
                    return std::nullopt;
                Y(i, j) = UB(i, j) / s.D(i, i);
            } else if (UB(i, j) != 0) {
                return std::nullopt;
            }
        }
    return s.V * Y;
}

IntMatrix column_hermite_form(const IntMatrix& m)
{
    IntMatrix a = m;
    const std::size_t r = a.rows(), c = a.cols();
    auto add_col = [&](std::size_t dst, std::size_t src, const Int& q) {
        if (q == 0)
            return;
        for (std::size_t k = 0; k < r; ++k)
            a(k, dst) += q * a(k, src);
    };
    auto swap_col = [&](std::size_t x, std::size_t y) {
        if (x != y)
            for (std::size_t k = 0; k < r; ++k)
                std::swap(a(k, x), a(k, y));
    };
    std::size_t k = 0;
    for (std::size_t i = 0; i < r && k < c; ++i) {
        for (;;) {
            std::size_t best = c;
            for (std::size_t j = k; j < c; ++j)
                if (a(i, j) != 0 && (best == c || abs_int(a(i, j)) < abs_int(a(i, best))))
                    best = j;
            if (best == c)
                break;
            swap_col(k, best);
            bool clean = true;
            for (std::size_t j = k + 1; j < c; ++j)
                if (a(i, j) != 0) {
                    add_col(j, k, -floor_div(a(i, j), a(i, k)));
                    if (a(i, j) != 0)
                        clean = false;
                }
            if (clean)
                break;
        }
        if (a(i, k) == 0)
            continue;
        if (a(i, k) < 0)
            for (std::size_t t = 0; t < r; ++t)
                a(t, k) = -a(t, k);
        for (std::size_t j = 0; j < k; ++j)
            add_col(j, k, -floor_div(a(i, j), a(i, k)));
        ++k;
    }
    return a.cols_range(0, k);
}

GroupHom::GroupHom(FgAbGroup s, FgAbGroup t, IntMatrix m)
    : source(std::move(s)), target(std::move(t)), matrix(std::move(m))
{
    const std::size_t ns = source.free_rank + source.torsion.size();
    const std::size_t nt = target.free_rank + target.torsion.size();
    if (matrix.rows() != nt || matrix.cols() != ns)
        throw std::invalid_argument("GroupHom: matrix shape does not match generators");
    for (std::size_t i = 0; i < target.torsion.size(); ++i) {
        const Int& d = target.torsion[i];
        for (std::size_t j = 0; j < ns; ++j) {
            Int& x = matrix(target.free_rank + i, j);
            mpz_fdiv_r(x.get_mpz_t(), x.get_mpz_t(), d.get_mpz_t());
        }
    }
}

bool GroupHom::is_zero() const { return matrix.is_zero(); }

bool GroupHom::is_injective() const
{
    const std::size_t ns = matrix.cols(), nt = matrix.rows();
    // kernel of [M | R] where R holds the target relations
    IntMatrix big(nt, ns + target.torsion.size());
    big.set_block(0, 0, matrix);
    for (std::size_t i = 0; i < target.torsion.size(); ++i)
        big(target.free_rank + i, ns + i) = target.torsion[i];
    IntMatrix k = integer_kernel_basis(big);
    for (std::size_t col = 0; col < k.cols(); ++col) {
        for (std::size_t j = 0; j < source.free_rank; ++j)
            if (k(j, col) != 0)
                return false;
        for (std::size_t j = 0; j < source.torsion.size(); ++j)
            if (k(source.free_rank + j, col) % source.torsion[j] != 0)
                return false;
    }
    return true;
}

Rref rref(const RatMatrix& m)
{
    Rref out{m, {}};
    RatMatrix& a = out.r;
    const std::size_t r = a.rows(), c = a.cols();
    std::size_t row = 0;
    std::vector<std::size_t> nz;
    for (std::size_t col = 0; col < c && row < r; ++col) {
        std::size_t p = row;
        while (p < r && a(p, col) == 0)
            ++p;
        if (p == r)
            continue;
        if (p != row)
            for (std::size_t j = col; j < c; ++j)
                std::swap(a(p, j), a(row, j));
        Rat inv = 1 / a(row, col);
        nz.clear();
        for (std::size_t j = col; j < c; ++j)
            if (a(row, j) != 0) {
                a(row, j) *= inv;
                nz.push_back(j);
            }
        for (std::size_t i = 0; i < r; ++i) {
            if (i == row || a(i, col) == 0)
                continue;
            Rat f = a(i, col);
            for (std::size_t j : nz)
                a(i, j) -= f * a(row, j);
        }
        out.pivots.push_back(col);
        ++row;
    }
    return out;
}

std::size_t rank(const RatMatrix& m) { return rref(m).pivots.size(); }

RatMatrix kernel_basis(const RatMatrix& m)
{
    auto R = rref(m);
    const std::size_t c = m.cols();
    std::vector<bool> is_pivot(c, false);
    for (auto p : R.pivots)
        is_pivot[p] = true;
    RatMatrix k(c, c - R.pivots.size());
    std::size_t col = 0;
    for (std::size_t f = 0; f < c; ++f) {
        if (is_pivot[f])
            continue;
        k(f, col) = 1;
        for (std::size_t i = 0; i < R.pivots.size(); ++i)
            k(R.pivots[i], col) = -R.r(i, f);
        ++col;
    }
    return k;
}

RatMatrix column_space_basis(const RatMatrix& m)
{
    auto R = rref(m);
    RatMatrix b(m.rows(), R.pivots.size());
    for (std::size_t j = 0; j < R.pivots.size(); ++j)
        for (std::size_t i = 0; i < m.rows(); ++i)
            b(i, j) = m(i, R.pivots[j]);
    return b;
}

RatMatrix inverse(const RatMatrix& m)
{
    if (m.rows() != m.cols())
        throw std::invalid_argument("inverse of non-square matrix");
    const std::size_t n = m.rows();
    auto R = rref(hstack(m, RatMatrix::identity(n)));
    if (R.pivots.size() < n || (n > 0 && R.pivots[n - 1] != n - 1))
        throw std::domain_error("matrix is singular");
    return R.r.block(0, n, n, n);
}

Rat determinant(const RatMatrix& m)
{
    if (m.rows() != m.cols())
        throw std::invalid_argument("determinant of non-square matrix");
    RatMatrix a = m;
    const std::size_t n = a.rows();
    Rat det = 1;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        while (p < n && a(p, k) == 0)
            ++p;
        if (p == n)
            return 0;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(a(k, j), a(p, j));
            det = -det;
        }
        det *= a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            if (a(i, k) == 0)
                continue;
            Rat f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j)
                a(i, j) -= f * a(k, j);
        }
    }
    return det;
}

RatMatrix rational_pseudoinverse(const RatMatrix& m)
{
    auto R = rref(m);
    const std::size_t r = R.pivots.size();
    if (r == 0)
        return RatMatrix(m.cols(), m.rows());
    // full-rank factorization m = F G
    RatMatrix F(m.rows(), r);
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < m.rows(); ++i)
            F(i, j) = m(i, R.pivots[j]);
    RatMatrix G = R.r.rows_range(0, r);
    RatMatrix Ft = F.transpose(), Gt = G.transpose();
    return Gt * inverse(G * Gt) * inverse(Ft * F) * Ft;
}

std::optional<RatMatrix> solve(const RatMatrix& A, const RatMatrix& B)
{
    if (A.rows() != B.rows())
        throw std::invalid_argument("solve: row mismatch");
    auto R = rref(hstack(A, B));
    RatMatrix X(A.cols(), B.cols());
    for (std::size_t i = 0; i < R.pivots.size(); ++i) {
        if (R.pivots[i] >= A.cols())
            return std::nullopt;
        for (std::size_t j = 0; j < B.cols(); ++j)
            X(R.pivots[i], j) = R.r(i, A.cols() + j);
    }
    return X;
}

IntMatrix clear_denominators(const RatMatrix& m, Int& scale)
{
    scale = 1;
    for (auto& x : m.data()) {
        Int g;
        mpz_lcm(g.get_mpz_t(), scale.get_mpz_t(), x.get_den_mpz_t());
        scale = g;
    }
    IntMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            Rat v = m(i, j) * scale;
            out(i, j) = v.get_num();
        }
    return out;
}

std::optional<IntMatrix> to_int(const RatMatrix& m)
{
    IntMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (m(i, j).get_den() != 1)
                return std::nullopt;
            out(i, j) = m(i, j).get_num();
        }
    return out;
}

std::optional<IntMatrix> lattice_coordinates(const RatMatrix& B, const RatMatrix& A)
{
    Int s;
    IntMatrix both = clear_denominators(hstack(B, A), s);
    return solve_integer(both.cols_range(0, B.cols()), both.cols_range(B.cols(), A.cols()));
}

RatMatrix lattice_basis(const RatMatrix& m)
{
    Int s;
    IntMatrix im = clear_denominators(m, s);
    auto snf = smith_normal_form(im);
    IntMatrix b = (im * snf.V).cols_range(0, snf.rank);
    RatMatrix out = to_rat(b);
    Rat inv = Rat(1) / Rat(s);
    out *= inv;
    return out;
}

}  // namespace mxw
