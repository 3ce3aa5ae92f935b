#pragma once

// Random real complexes, chain maps and first-quadrant double complexes, built from elementary
// pieces (a cohomology class, or x -> dx) followed by a random change of basis in each degree.

#include "generators.hpp"
#include "mxw/complexes.hpp"

#include <memory>

namespace gen {

using namespace mxw;

struct RealCx {
    int lo = 0, hi = -1;
    std::vector<std::size_t> dims;
    std::vector<RatMatrix> d;  // d[k - lo] : degree k -> k + 1 (actual basis)
    std::vector<RatMatrix> G;  // standard -> actual basis, per degree
    // standard-form bookkeeping per degree: kind of each standard basis vector
    //   0 cohomology, 1 source of a pair, 2 target of a pair (partner index in the next/previous degree)
    std::vector<std::vector<int>> kind, partner;

    std::size_t dim(int k) const { return k >= lo && k <= hi ? dims[k - lo] : 0; }
    RatMatrix diff(int k) const { return k >= lo && k < hi ? d[k - lo] : RatMatrix(dim(k + 1), dim(k)); }
    std::size_t betti(int k) const
    {
        std::size_t b = 0;
        if (k >= lo && k <= hi)
            for (int t : kind[k - lo])
                b += t == 0;
        return b;
    }
};

inline RealCx random_real_complex(std::mt19937& rng, int lo, int hi, std::size_t maxdim = 3)
{
    RealCx c;
    c.lo = lo;
    c.hi = hi;
    const int n = hi - lo + 1;
    c.kind.assign(n, {});
    c.partner.assign(n, {});
    for (int k = 0; k < n; ++k) {
        // pairs starting here must fit in the next degree
        const int h = uniform(rng, 0, 1);
        for (int i = 0; i < h && c.kind[k].size() < maxdim; ++i) {
            c.kind[k].push_back(0);
            c.partner[k].push_back(-1);
        }
        if (k + 1 < n) {
            const int pairs = uniform(rng, 0, 1);
            for (int i = 0; i < pairs && c.kind[k].size() < maxdim; ++i) {
                c.kind[k].push_back(1);
                c.partner[k].push_back(int(c.kind[k + 1].size()));
                c.kind[k + 1].push_back(2);
                c.partner[k + 1].push_back(int(c.kind[k].size()) - 1);
            }
        }
    }
    for (int k = 0; k < n; ++k) {
        c.dims.push_back(c.kind[k].size());
        c.G.push_back(invertible_rat(rng, c.kind[k].size()));
    }
    for (int k = 0; k + 1 < n; ++k) {
        RatMatrix D(c.dims[k + 1], c.dims[k]);
        for (std::size_t i = 0; i < c.dims[k]; ++i)
            if (c.kind[k][i] == 1)
                D(c.partner[k][i], i) = 1;
        c.d.push_back(RatMatrix(c.G[k + 1] * D * inverse(c.G[k])));
    }
    if (n > 0)
        c.d.push_back(RatMatrix(0, c.dims[n - 1]));
    return c;
}

inline MixedComplex to_complex(const RealCx& c, const std::string& pre = "B")
{
    ComplexBuilder<Rat> b;
    for (int k = c.lo; k <= c.hi; ++k)
        b.add_r(pre + std::to_string(k), k, c.dim(k));
    for (int k = c.lo; k < c.hi; ++k)
        b.rr(pre + std::to_string(k), pre + std::to_string(k + 1), c.diff(k));
    return b.build();
}

// Random chain map A -> B (same degree range), in actual bases: degree k matrix.
inline std::vector<RatMatrix> random_chain_map(std::mt19937& rng, const RealCx& A, const RealCx& B)
{
    const int n = A.hi - A.lo + 1;
    std::vector<RatMatrix> F(n);
    // standard coordinates of B: cocycles are the kind 0 and kind 2 vectors
    auto random_cocycle = [&](int k) {
        RatMatrix v(B.dim(k), 1);
        for (std::size_t i = 0; i < B.dim(k); ++i)
            if (B.kind[k - B.lo][i] != 1)
                v(i, 0) = small_rat(rng, 3, 2);
        return v;
    };
    std::vector<RatMatrix> Fs(n);
    for (int t = 0; t < n; ++t)
        Fs[t] = RatMatrix(B.dim(A.lo + t), A.dim(A.lo + t));
    // standard-form differential of B
    auto Dstd = [&](int k) {
        RatMatrix D(B.dim(k + 1), B.dim(k));
        for (std::size_t i = 0; i < B.dim(k); ++i)
            if (B.kind[k - B.lo][i] == 1)
                D(B.partner[k - B.lo][i], i) = 1;
        return D;
    };
    for (int t = 0; t < n; ++t) {
        const int k = A.lo + t;
        for (std::size_t i = 0; i < A.dim(k); ++i) {
            const int kd = A.kind[t][i];
            if (kd == 0)
                Fs[t].set_block(0, i, random_cocycle(k));
            else if (kd == 1) {
                RatMatrix y = rat_matrix(rng, B.dim(k), 1);
                Fs[t].set_block(0, i, y);
                Fs[t + 1].set_block(0, A.partner[t][i], RatMatrix(Dstd(k) * y));
            }
        }
    }
    for (int t = 0; t < n; ++t)
        F[t] = RatMatrix(B.G[t] * Fs[t] * inverse(A.G[t]));
    return F;
}

// First-quadrant double complex with columns i = 0..ncols-1 and rows j = 0..nrows-1, a direct sum of
// tensor products, two-column mapping pieces and single columns, then conjugated per bidegree.
inline DoubleComplexT<Rat> random_double_complex(std::mt19937& rng, int ncols, int nrows, std::size_t maxdim = 5)
{
    for (;;) {
        std::vector<DoubleComplexT<Rat>> parts;
        const int npieces = uniform(rng, 1, 3);
        for (int q = 0; q < npieces; ++q) {
            DoubleComplexT<Rat> p;
            p.dims.assign(ncols, std::vector<std::size_t>(nrows, 0));
            p.v.assign(ncols, std::vector<RatMatrix>(nrows));
            p.h.assign(ncols, std::vector<RatMatrix>(nrows));
            const int type = uniform(rng, 0, 2);
            std::vector<RatMatrix> colmaps;
            if (type == 0) {
                // A ⊗ B
                RealCx a = random_real_complex(rng, 0, ncols - 1, 2), b = random_real_complex(rng, 0, nrows - 1, 2);
                for (int i = 0; i < ncols; ++i)
                    for (int j = 0; j < nrows; ++j) {
                        p.dims[i][j] = a.dim(i) * b.dim(j);
                        p.v[i][j] = kron(RatMatrix::identity(a.dim(i)), b.diff(j));
                        p.h[i][j] = kron(a.diff(i), RatMatrix::identity(b.dim(j)));
                    }
            } else {
                const int i0 = uniform(rng, 0, std::max(0, ncols - (type == 1 ? 2 : 1)));
                RealCx a = random_real_complex(rng, 0, nrows - 1, 2);
                RealCx b = random_real_complex(rng, 0, nrows - 1, 2);
                std::vector<RatMatrix> f;
                if (type == 1 && i0 + 1 < ncols)
                    f = random_chain_map(rng, a, b);
                for (int i = 0; i < ncols; ++i)
                    for (int j = 0; j < nrows; ++j) {
                        const RealCx* c = i == i0 ? &a : (!f.empty() && i == i0 + 1 ? &b : nullptr);
                        p.dims[i][j] = c ? c->dim(j) : 0;
                        p.v[i][j] = c ? c->diff(j) : RatMatrix(0, 0);
                    }
                for (int i = 0; i < ncols; ++i)
                    for (int j = 0; j < nrows; ++j) {
                        const std::size_t to = i + 1 < ncols ? p.dims[i + 1][j] : 0;
                        p.h[i][j] = (!f.empty() && i == i0) ? f[j] : RatMatrix(to, p.dims[i][j]);
                    }
            }
            // normalize shapes of v at the top row
            for (int i = 0; i < ncols; ++i)
                for (int j = 0; j < nrows; ++j) {
                    const std::size_t up = j + 1 < nrows ? p.dims[i][j + 1] : 0;
                    if (p.v[i][j].rows() != up || p.v[i][j].cols() != p.dims[i][j])
                        p.v[i][j] = RatMatrix(up, p.dims[i][j]);
                    const std::size_t right = i + 1 < ncols ? p.dims[i + 1][j] : 0;
                    if (p.h[i][j].rows() != right || p.h[i][j].cols() != p.dims[i][j])
                        p.h[i][j] = RatMatrix(right, p.dims[i][j]);
                }
            parts.push_back(p);
        }
        DoubleComplexT<Rat> dc;
        dc.dims.assign(ncols, std::vector<std::size_t>(nrows, 0));
        dc.v.assign(ncols, std::vector<RatMatrix>(nrows));
        dc.h.assign(ncols, std::vector<RatMatrix>(nrows));
        bool ok = true;
        for (int i = 0; i < ncols; ++i)
            for (int j = 0; j < nrows; ++j) {
                RatMatrix v(0, 0), h(0, 0);
                std::size_t dsum = 0;
                for (auto& p : parts) {
                    dsum += p.dims[i][j];
                    v = block_diag(v, p.v[i][j]);
                    h = block_diag(h, p.h[i][j]);
                }
                ok = ok && dsum <= maxdim;
                dc.dims[i][j] = dsum;
                dc.v[i][j] = v;
                dc.h[i][j] = h;
            }
        if (!ok)
            continue;
        // change of basis per bidegree
        std::vector<std::vector<RatMatrix>> G(ncols, std::vector<RatMatrix>(nrows));
        for (int i = 0; i < ncols; ++i)
            for (int j = 0; j < nrows; ++j)
                G[i][j] = invertible_rat(rng, dc.dims[i][j]);
        for (int i = 0; i < ncols; ++i)
            for (int j = 0; j < nrows; ++j) {
                const RatMatrix gi = inverse(G[i][j]);
                if (j + 1 < nrows)
                    dc.v[i][j] = RatMatrix(G[i][j + 1] * dc.v[i][j] * gi);
                if (i + 1 < ncols)
                    dc.h[i][j] = RatMatrix(G[i + 1][j] * dc.h[i][j] * gi);
            }
        return dc;
    }
}

// dim H^k by ranks
inline std::vector<std::size_t> real_betti(const MixedComplex& c)
{
    std::vector<std::size_t> b;
    for (int k = c.lo; k <= c.hi; ++k)
        b.push_back(c.term(k).r_dim - rank(c.d_rr(k)) - rank(c.d_rr(k - 1)));
    return b;
}

}  // namespace gen
