#include "mxw/dec_manifold.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace mxw {

namespace {

int sgn_pow(int e) { return e % 2 == 0 ? 1 : -1; }

bool is_diagonal(const RatMatrix& m)
{
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j && m(i, j) != 0)
                return false;
    return true;
}

RatMatrix fast_inverse(const RatMatrix& m)
{
    if (is_diagonal(m)) {
        RatMatrix out(m.rows(), m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i) {
            if (m(i, i) == 0)
                throw MetricNotSPD("zero diagonal star entry");
            out(i, i) = 1 / m(i, i);
        }
        return out;
    }
    return inverse(m);
}

RatMatrix diag(const std::vector<Rat>& v)
{
    RatMatrix m(v.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        m(i, i) = v[i];
    return m;
}

}  // namespace

bool is_spd(const RatMatrix& m)
{
    if (m.rows() != m.cols())
        return false;
    if (!(m == m.transpose()))
        return false;
    if (is_diagonal(m)) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            if (m(i, i) <= 0)
                return false;
        return true;
    }
    // exact LDL^T: all pivots positive
    RatMatrix a = m;
    const std::size_t n = a.rows();
    for (std::size_t k = 0; k < n; ++k) {
        if (a(k, k) <= 0)
            return false;
        for (std::size_t i = k + 1; i < n; ++i) {
            if (a(i, k) == 0)
                continue;
            Rat f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j)
                a(i, j) -= f * a(k, j);
        }
    }
    return true;
}

IntMatrix DecManifold::dz(int k) const
{
    if (k >= 0 && k < n)
        return d[k];
    return IntMatrix(ncells(k + 1), ncells(k));
}

IntMatrix DecManifold::dual_dz(int k) const
{
    if (k >= 0 && k < n)
        return dual_d[k];
    return IntMatrix(ndual(k + 1), ndual(k));
}

RatMatrix DecManifold::star_at(int k) const
{
    if (k >= 0 && k <= n)
        return star[k];
    return RatMatrix(ndual(n - k), ncells(k));
}

RatMatrix DecManifold::dual_star_at(int k) const
{
    if (k >= 0 && k <= n)
        return dual_star[k];
    return RatMatrix(ncells(n - k), ndual(k));
}

DecManifold DecManifold::dual() const
{
    DecManifold o = *this;
    std::swap(o.cells, o.dual_cells);
    std::swap(o.d, o.dual_d);
    std::swap(o.star, o.dual_star);
    std::swap(o.metric, o.dual_metric);
    o.is_dual = !is_dual;
    o.name = is_dual ? name.substr(0, name.size() - 1) : name + "*";
    return o;
}

void DecManifold::validate() const
{
    if (n < 0)
        throw InvalidParameter("negative dimension");
    if (cells.size() != std::size_t(n + 1) || d.size() != std::size_t(n) || star.size() != std::size_t(n + 1))
        throw InvalidParameter("cell data does not match the dimension");
    for (int k = 0; k < n; ++k) {
        if (d[k].rows() != cells[k + 1] || d[k].cols() != cells[k])
            throw InvalidParameter("coboundary shape mismatch in degree " + std::to_string(k));
        if (k + 1 < n && !(d[k + 1] * d[k]).is_zero())
            throw InvalidParameter("coboundary does not square to zero in degree " + std::to_string(k));
    }
    for (int k = 0; k <= n; ++k) {
        if (star[k].rows() != dual_cells[n - k] || star[k].cols() != cells[k])
            throw InvalidParameter("star shape mismatch in degree " + std::to_string(k));
        if (!is_spd(metric[k]))
            throw MetricNotSPD("metric in degree " + std::to_string(k) + " is not symmetric positive definite");
    }
    if (closed) {
        auto h = integer_cohomology(*this);
        if (!(h[n] == make_group(1, {})))
            throw InvalidParameter("top integer cohomology is " + h[n].str() + ", expected a closed oriented connected model");
    }
}

DecManifold make_dec(std::string name, int n, std::vector<std::size_t> cells, std::vector<IntMatrix> d,
                     std::vector<RatMatrix> star, bool closed)
{
    DecManifold m;
    m.name = std::move(name);
    m.n = n;
    m.closed = closed;
    m.cells = std::move(cells);
    m.d = std::move(d);
    m.star = std::move(star);
    if (m.cells.size() != std::size_t(n + 1) || m.d.size() != std::size_t(n) || m.star.size() != std::size_t(n + 1))
        throw InvalidParameter("cell data does not match the dimension");
    m.dual_cells.resize(n + 1);
    for (int k = 0; k <= n; ++k)
        m.dual_cells[k] = m.cells[n - k];
    for (int k = 0; k < n; ++k)
        m.dual_d.push_back(IntMatrix(m.d[n - k - 1].transpose() * Int(sgn_pow(n - k))));
    m.metric = m.star;
    for (int j = 0; j <= n; ++j) {
        if (!is_spd(m.star[n - j]))
            throw MetricNotSPD("star in degree " + std::to_string(n - j) + " is not symmetric positive definite");
        RatMatrix inv = fast_inverse(m.star[n - j]);
        m.dual_metric.push_back(inv);
        m.dual_star.push_back(RatMatrix(inv * Rat(sgn_pow(j * (n - j)))));
    }
    m.validate();
    return m;
}

DecManifold build_point() { return make_dec("point", 0, {1}, {}, {RatMatrix::identity(1)}); }

namespace {

DecManifold circle_impl(int m, Rat h)
{
    if (m < 2)
        throw InvalidParameter("circle needs at least 2 cells");
    if (h == 0)
        h = Rat(1, m);
    if (h < 0)
        throw InvalidParameter("edge length must be positive");
    IntMatrix d(m, m);
    for (int i = 0; i < m; ++i) {
        d(i, i) -= 1;
        d(i, (i + 1) % m) += 1;
    }
    return make_dec("circle" + std::to_string(m), 1, {std::size_t(m), std::size_t(m)}, {d},
                    {diag(std::vector<Rat>(m, h)), diag(std::vector<Rat>(m, 1 / h))});
}

}  // namespace

DecManifold build_circle(int m, Rat edge_length)
{
    if (m < 3)
        throw InvalidParameter("build_circle requires m >= 3");
    return circle_impl(m, edge_length);
}

DecManifold build_torus(const std::vector<int>& dims, const std::vector<Rat>& edge_lengths)
{
    if (dims.empty())
        throw InvalidParameter("torus needs at least one direction");
    if (!edge_lengths.empty() && edge_lengths.size() != dims.size())
        throw InvalidParameter("one edge length per direction expected");
    DecManifold t;
    std::string name = "torus";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        auto c = circle_impl(dims[i], edge_lengths.empty() ? Rat(0) : edge_lengths[i]);
        t = i == 0 ? c : product(t, c);
        name += (i ? "x" : "") + std::to_string(dims[i]);
    }
    if (dims.size() == 1)
        name = "torus" + std::to_string(dims[0]);
    t.name = name;
    return t;
}

DecManifold build_surface(int genus)
{
    if (genus < 0)
        throw InvalidParameter("genus must be nonnegative");
    // one vertex, 2g loops, one face attached along a1 b1 a1^-1 b1^-1 ...
    std::size_t e = 2 * std::size_t(genus);
    return make_dec("surface" + std::to_string(genus), 2, {1, e, 1}, {IntMatrix(e, 1), IntMatrix(1, e)},
                    {RatMatrix::identity(1), RatMatrix::identity(e), RatMatrix::identity(1)});
}

namespace {

// Simplicial coboundaries from lists of sorted simplices (faces of sorted simplices are sorted).
IntMatrix simplicial_coboundary(const std::vector<std::vector<int>>& lo, const std::vector<std::vector<int>>& hi)
{
    std::map<std::vector<int>, std::size_t> index;
    for (std::size_t i = 0; i < lo.size(); ++i)
        index[lo[i]] = i;
    IntMatrix d(hi.size(), lo.size());
    for (std::size_t r = 0; r < hi.size(); ++r)
        for (std::size_t j = 0; j < hi[r].size(); ++j) {
            auto f = hi[r];
            f.erase(f.begin() + j);
            d(r, index.at(f)) += (j % 2 == 0) ? 1 : -1;
        }
    return d;
}

}  // namespace

DecManifold build_sphere2()
{
    std::vector<std::vector<int>> v{{0}, {1}, {2}, {3}};
    std::vector<std::vector<int>> e{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    std::vector<std::vector<int>> f{{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
    return make_dec("sphere2", 2, {4, 6, 4}, {simplicial_coboundary(v, e), simplicial_coboundary(e, f)},
                    {RatMatrix::identity(4), RatMatrix::identity(6), RatMatrix::identity(4)});
}

DecManifold build_rp3()
{
    // boundary of the 16-cell (cross-polytope) modulo the antipodal map; a cell is a set of axes
    // with signs, the first sign normalized to +.
    using Cell = std::pair<std::vector<int>, std::vector<int>>;
    std::vector<std::vector<Cell>> cells(4);
    for (int mask = 1; mask < 16; ++mask) {
        std::vector<int> axes;
        for (int i = 0; i < 4; ++i)
            if (mask & (1 << i))
                axes.push_back(i);
        const int k = int(axes.size()) - 1;
        for (int s = 0; s < (1 << k); ++s) {
            std::vector<int> signs{1};
            for (int j = 0; j < k; ++j)
                signs.push_back((s >> j) & 1 ? -1 : 1);
            cells[k].push_back({axes, signs});
        }
    }
    auto normalize = [](Cell c) {
        if (c.second[0] < 0)
            for (auto& x : c.second)
                x = -x;
        return c;
    };
    std::vector<IntMatrix> d;
    for (int k = 0; k < 3; ++k) {
        std::map<Cell, std::size_t> index;
        for (std::size_t i = 0; i < cells[k].size(); ++i)
            index[cells[k][i]] = i;
        IntMatrix m(cells[k + 1].size(), cells[k].size());
        for (std::size_t r = 0; r < cells[k + 1].size(); ++r) {
            const auto& c = cells[k + 1][r];
            for (std::size_t j = 0; j < c.first.size(); ++j) {
                Cell f = c;
                f.first.erase(f.first.begin() + j);
                f.second.erase(f.second.begin() + j);
                m(r, index.at(normalize(f))) += (j % 2 == 0) ? 1 : -1;
            }
        }
        d.push_back(m);
    }
    std::vector<std::size_t> counts;
    std::vector<RatMatrix> star;
    for (auto& c : cells) {
        counts.push_back(c.size());
        star.push_back(RatMatrix::identity(c.size()));
    }
    return make_dec("rp3", 3, counts, d, star);
}

DecManifold build_interval()
{
    IntMatrix d(1, 2);
    d(0, 0) = -1;
    d(0, 1) = 1;
    return make_dec("interval", 1, {2, 1}, {d}, {diag({Rat(1, 2), Rat(1, 2)}), RatMatrix::identity(1)}, false);
}

DecManifold build_cube(int n)
{
    if (n < 1)
        throw InvalidParameter("cube dimension must be positive");
    DecManifold c = build_interval();
    for (int i = 1; i < n; ++i)
        c = product(c, build_interval());
    c.name = "cube" + std::to_string(n);
    return c;
}

DecManifold product(const DecManifold& a, const DecManifold& b)
{
    const int n = a.n + b.n;
    std::vector<std::size_t> cells(n + 1, 0);
    // offset of the (i, j) block inside degree i + j
    std::vector<std::vector<std::size_t>> off(a.n + 1, std::vector<std::size_t>(b.n + 1));
    for (int k = 0; k <= n; ++k)
        for (int i = std::max(0, k - b.n); i <= std::min(k, a.n); ++i) {
            off[i][k - i] = cells[k];
            cells[k] += a.cells[i] * b.cells[k - i];
        }
    std::vector<IntMatrix> d;
    for (int k = 0; k < n; ++k) {
        IntMatrix m(cells[k + 1], cells[k]);
        for (int i = std::max(0, k - b.n); i <= std::min(k, a.n); ++i) {
            const int j = k - i;
            if (i < a.n)
                m.set_block(off[i + 1][j], off[i][j], kron(a.d[i], IntMatrix::identity(b.cells[j])));
            if (j < b.n)
                m.set_block(off[i][j + 1], off[i][j],
                            IntMatrix(kron(IntMatrix::identity(a.cells[i]), b.d[j]) * Int(sgn_pow(i))));
        }
        d.push_back(m);
    }
    std::vector<RatMatrix> star;
    for (int k = 0; k <= n; ++k) {
        RatMatrix m(cells[k], cells[k]);
        for (int i = std::max(0, k - b.n); i <= std::min(k, a.n); ++i)
            m.set_block(off[i][k - i], off[i][k - i], kron(a.metric[i], b.metric[k - i]));
        star.push_back(m);
    }
    return make_dec(a.name + "x" + b.name, n, cells, d, star, a.closed && b.closed);
}

namespace {

std::vector<int> parse_dims(const std::string& s)
{
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, 'x')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw InvalidParameter("bad dims specification: " + s);
        }
    }
    return out;
}

int get_int(const std::map<std::string, std::string>& p, const std::string& key, int def)
{
    auto it = p.find(key);
    if (it == p.end())
        return def;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw InvalidParameter("parameter " + key + " must be an integer");
    }
}

// circumferences "a x b x ..." (rationals), each split over the edges of its direction
std::vector<Rat> edge_lengths(const std::map<std::string, std::string>& p, const std::string& key,
                              const std::vector<int>& dims)
{
    auto it = p.find(key);
    if (it == p.end())
        return {};
    std::vector<Rat> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, 'x')) {
        Rat q;
        if (q.set_str(tok, 10) != 0 || q <= 0)
            throw InvalidParameter("bad length: " + tok);
        q.canonicalize();
        out.push_back(q);
    }
    if (out.size() == 1)
        out.assign(dims.size(), out[0]);
    if (out.size() != dims.size())
        throw InvalidParameter("one length per direction expected");
    for (std::size_t i = 0; i < dims.size(); ++i)
        out[i] /= dims[i];
    return out;
}

}  // namespace

std::vector<std::string> builtin_names()
{
    return {"circle", "torus2", "torus3", "torus4", "surface", "sphere2", "rp3", "point", "cube"};
}

DecManifold builtin_space(const std::string& name, const std::map<std::string, std::string>& p)
{
    const std::map<std::string, std::set<std::string>> known = {
        {"circle", {"m", "length"}}, {"torus2", {"dims", "lengths"}}, {"torus3", {"dims", "lengths"}},
        {"torus4", {"dims", "lengths"}}, {"surface", {"genus"}}, {"cube", {"n"}}};
    for (auto& [k, v] : p) {
        auto it = known.find(name);
        if (it == known.end() || !it->second.count(k))
            throw InvalidParameter("space " + name + " takes no parameter " + k);
    }
    auto dims = [&](const std::string& def, std::size_t n) {
        auto it = p.find("dims");
        auto v = parse_dims(it == p.end() ? def : it->second);
        if (v.size() == 1)
            v.assign(n, v[0]);
        if (v.size() != n)
            throw InvalidParameter("torus" + std::to_string(n) + " needs " + std::to_string(n) + " dims");
        return v;
    };
    auto torus = [&](const std::string& def, std::size_t n) {
        auto d = dims(def, n);
        return build_torus(d, edge_lengths(p, "lengths", d));
    };
    if (name == "circle") {
        const int m = get_int(p, "m", 8);
        auto len = edge_lengths(p, "length", {m});
        return build_circle(m, len.empty() ? Rat(0) : len[0]);
    }
    if (name == "torus2")
        return torus("8x8", 2);
    if (name == "torus3")
        return torus("3x3x3", 3);
    if (name == "torus4")
        return torus("2x2x2x2", 4);
    if (name == "surface")
        return build_surface(get_int(p, "genus", 2));
    if (name == "sphere2")
        return build_sphere2();
    if (name == "rp3")
        return build_rp3();
    if (name == "point")
        return build_point();
    if (name == "cube")
        return build_cube(get_int(p, "n", 2));
    throw InvalidParameter("unknown space: " + name);
}

std::vector<FgAbGroup> integer_cohomology(const DecManifold& m)
{
    std::vector<FgAbGroup> out;
    for (int k = 0; k <= m.n; ++k) {
        const std::size_t ker = m.ncells(k) - rank(m.dz(k));
        auto cok = cokernel(m.dz(k - 1));
        FgAbGroup g;
        g.free_rank = ker - rank(m.dz(k - 1));
        g.torsion = cok.torsion;
        out.push_back(g);
    }
    return out;
}

std::vector<std::size_t> betti_numbers(const DecManifold& m)
{
    std::vector<std::size_t> b;
    for (auto& g : integer_cohomology(m))
        b.push_back(g.free_rank);
    return b;
}

// ---- Hodge theory ----

template <class S>
double HodgeData<S>::residual(const DecManifold& m) const
{
    double worst = 0;
    auto upd = [&](const Matrix<S>& x) {
        if (x.empty())
            return;
        if constexpr (Lin<S>::exact)
            worst = std::max(worst, max_abs(to_real(x)));
        else
            worst = std::max(worst, max_abs(x));
    };
    const int n = m.n;
    for (int k = 0; k <= n; ++k) {
        const std::size_t nk = m.ncells(k);
        Matrix<S> dk = convert<S>(m.dz(k)), dkm = convert<S>(m.dz(k - 1));
        Matrix<S> eta_k = eta[k];
        Matrix<S> eta_k1 = k + 1 <= n ? eta[k + 1] : Matrix<S>(nk, m.ncells(k + 1));
        Matrix<S> lhs = harmonic[k] * pi[k] - Matrix<S>::identity(nk);
        Matrix<S> rhs = dkm * eta_k + eta_k1 * dk;
        upd(Matrix<S>(lhs - rhs));
        upd(Matrix<S>(pi[k] * harmonic[k] - Matrix<S>::identity(harmonic[k].cols())));
        upd(Matrix<S>(eta_k * harmonic[k]));
        if (k > 0)
            upd(Matrix<S>(pi[k - 1] * eta_k));
        if (k > 1)
            upd(Matrix<S>(eta[k - 1] * eta_k));
    }
    return worst;
}

template <class S>
HodgeData<S> hodge_decomposition(const DecManifold& m, double tol)
{
    const int n = m.n;
    HodgeData<S> h;
    std::vector<Matrix<S>> M, Minv;
    for (int k = 0; k <= n; ++k) {
        if (!is_spd(m.metric[k]))
            throw MetricNotSPD("metric in degree " + std::to_string(k) + " is not symmetric positive definite");
        M.push_back(convert<S>(m.metric[k]));
        Minv.push_back(convert<S>(fast_inverse(m.metric[k])));
    }
    h.metric = M;
    for (int k = 0; k <= n; ++k) {
        // d^*_k : C^{k+1} -> C^k
        if (k < n)
            h.codiff.push_back(Minv[k] * convert<S>(m.dz(k)).transpose() * M[k + 1]);
        else
            h.codiff.push_back(Matrix<S>(m.ncells(k), 0));
    }
    for (int k = 0; k <= n; ++k) {
        const std::size_t nk = m.ncells(k);
        Matrix<S> lap(nk, nk);
        if (k > 0)
            lap += convert<S>(m.dz(k - 1)) * h.codiff[k - 1];
        if (k < n)
            lap += h.codiff[k] * convert<S>(m.dz(k));
        Matrix<S> H = Lin<S>::kernel(lap);
        if constexpr (!Lin<S>::exact) {
            // M-orthonormalize
            Matrix<S> g = H.transpose() * M[k] * H;
            Eigen::MatrixXd ge(g.rows(), g.cols());
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j)
                    ge(i, j) = g(i, j);
            if (g.rows() > 0) {
                Eigen::LLT<Eigen::MatrixXd> llt(ge);
                Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(g.rows(), g.rows()));
                Matrix<S> T(g.rows(), g.cols());
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j)
                        T(i, j) = linv(j, i);
                H = H * T;
            }
        }
        Matrix<S> gram = H.transpose() * M[k] * H;
        Matrix<S> pi = H.cols() ? Matrix<S>(Lin<S>::inverse(gram) * H.transpose() * M[k]) : Matrix<S>(0, nk);
        Matrix<S> P = H * pi;
        Matrix<S> G = Lin<S>::inverse(Matrix<S>(lap + P)) * (Matrix<S>::identity(nk) - P);
        h.harmonic.push_back(H);
        h.pi.push_back(pi);
        h.green.push_back(G);
        h.coclosed.push_back(k < n ? Lin<S>::colspace(h.codiff[k]) : Matrix<S>(nk, 0));
    }
    for (int k = 0; k <= n; ++k) {
        if (k == 0)
            h.eta.push_back(Matrix<S>(0, m.ncells(0)));
        else
            h.eta.push_back(Matrix<S>(-(h.codiff[k - 1] * h.green[k])));
    }
    const double r = h.residual(m);
    if (r > tol)
        throw ToleranceExceeded("Hodge retract identities violated by " + std::to_string(r));
    return h;
}

template struct HodgeData<Rat>;
template struct HodgeData<double>;
template HodgeData<Rat> hodge_decomposition(const DecManifold&, double);
template HodgeData<double> hodge_decomposition(const DecManifold&, double);

ComparisonMap comparison_map(const DecManifold& m, const HodgeData<Rat>& h, int l)
{
    ComparisonMap cm;
    cm.degree = l;
    const std::size_t nl = m.ncells(l);
    // integral free generators: cocycles whose classes span H^l_free
    IntMatrix K = integer_kernel_basis(m.dz(l));
    IntMatrix gens(nl, 0);
    if (K.cols() > 0) {
        auto sk = smith_normal_form(K);
        IntMatrix L = sk.V * sk.U.rows_range(0, K.cols());
        auto sx = smith_normal_form(IntMatrix(L * m.dz(l - 1)));
        gens = (K * sx.Uinv).cols_range(sx.rank, K.cols() - sx.rank);
    }
    const RatMatrix& H = h.harmonic[l];
    const std::size_t b = gens.cols();
    if (b != H.cols())
        throw ToleranceExceeded("harmonic dimension differs from the free rank in degree " + std::to_string(l));
    RatMatrix c = h.pi[l] * to_rat(gens);
    IntMatrix T = IntMatrix::identity(b);
    if (b > 0) {
        Int s;
        IntMatrix ci = clear_denominators(c, s);
        IntMatrix hnf = column_hermite_form(ci);
        auto t = to_int(inverse(to_rat(ci)) * to_rat(hnf));
        if (!t)
            throw std::logic_error("lattice reduction produced a non-integral transform");
        T = *t;
    }
    cm.generators = gens * T;
    cm.harmonic_reps = H * (h.pi[l] * to_rat(cm.generators));
    cm.gram = cm.harmonic_reps.transpose() * h.metric[l] * cm.harmonic_reps;
    // Cholesky gram = R^T R with R upper triangular
    RealMatrix g = to_real(cm.gram);
    RealMatrix R(b, b);
    for (std::size_t j = 0; j < b; ++j) {
        for (std::size_t i = 0; i <= j; ++i) {
            double s = g(i, j);
            for (std::size_t k = 0; k < i; ++k)
                s -= R(k, i) * R(k, j);
            if (i == j) {
                if (s <= 0)
                    throw MetricNotSPD("harmonic Gram matrix is not positive definite");
                R(i, j) = std::sqrt(s);
            } else {
                R(i, j) = s / R(i, i);
            }
        }
    }
    cm.E = R;
    cm.basis = b ? RealMatrix(to_real(cm.harmonic_reps) * Lin<double>::inverse(R)) : RealMatrix(nl, 0);
    return cm;
}

std::string StarAudit::str() const
{
    std::ostringstream os;
    for (std::size_t k = 0; k < expected.size(); ++k)
        os << "k=" << k << " expected " << (expected[k] > 0 ? "+1" : "-1") << " found "
           << (found[k] == 0 ? "none" : found[k] > 0 ? "+1" : "-1") << "\n";
    return os.str();
}

StarAudit star_sign_audit(const DecManifold& m, bool strict)
{
    StarAudit a;
    for (int k = 0; k <= m.n; ++k) {
        const int e = m.parity(k);
        RatMatrix p = m.dual_star_at(m.n - k) * m.star_at(k);
        const std::size_t nk = m.ncells(k);
        int f = 0;
        if (p == RatMatrix::identity(nk))
            f = 1;
        else if (p == RatMatrix(RatMatrix::identity(nk) * Rat(-1)))
            f = -1;
        if (nk == 0)
            f = e;
        a.expected.push_back(e);
        a.found.push_back(f);
        if (f != e)
            a.ok = false;
    }
    if (strict && !a.ok)
        throw SignViolation("star sign audit failed:\n" + a.str());
    return a;
}

// ---- mesh JSON ----

namespace {

using nlohmann::json;

json rat_json(const Rat& q)
{
    if (q.get_den() == 1 && q.get_num().fits_slong_p())
        return json(q.get_num().get_si());
    return json(q.get_str());
}

Rat json_rat(const json& j)
{
    if (j.is_number_integer())
        return Rat(j.get<long>());
    if (j.is_number_float())
        return Rat(j.get<double>());
    if (j.is_string()) {
        Rat q;
        const auto str = j.get<std::string>();
        if (q.set_str(str, 10) != 0 || q.get_den() == 0)
            throw InvalidParameter("bad rational entry " + str);
        q.canonicalize();
        return q;
    }
    throw InvalidParameter("star entries must be numbers or rational strings");
}

Int json_int(const json& j)
{
    if (j.is_number_integer())
        return Int(j.get<long>());
    if (j.is_string())
        return Int(j.get<std::string>());
    throw InvalidParameter("coboundary entries must be integers");
}

}  // namespace

std::string to_json(const DecManifold& m)
{
    json j;
    j["name"] = m.name;
    j["dims"] = m.n;
    j["closed"] = m.closed;
    j["cells"] = m.cells;
    json cob = json::array();
    for (auto& d : m.d) {
        json t = json::array();
        for (std::size_t r = 0; r < d.rows(); ++r)
            for (std::size_t c = 0; c < d.cols(); ++c)
                if (d(r, c) != 0) {
                    json v = d(r, c).fits_slong_p() ? json(d(r, c).get_si()) : json(d(r, c).get_str());
                    t.push_back({r, c, v});
                }
        cob.push_back(t);
    }
    j["coboundary"] = cob;
    json st = json::array();
    for (auto& s : m.star) {
        json e;
        if (is_diagonal(s)) {
            json dg = json::array();
            for (std::size_t i = 0; i < s.rows(); ++i)
                dg.push_back(rat_json(s(i, i)));
            e["diagonal"] = dg;
        } else {
            json dn = json::array();
            for (std::size_t i = 0; i < s.rows(); ++i) {
                json row = json::array();
                for (std::size_t c = 0; c < s.cols(); ++c)
                    row.push_back(rat_json(s(i, c)));
                dn.push_back(row);
            }
            e["dense"] = dn;
        }
        st.push_back(e);
    }
    j["star"] = st;
    return j.dump(1);
}

DecManifold dec_from_json(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidParameter(std::string("mesh JSON does not parse: ") + e.what());
    }
    try {
        const int n = j.at("dims").get<int>();
        auto cells = j.at("cells").get<std::vector<std::size_t>>();
        if (n < 0 || cells.size() != std::size_t(n + 1))
            throw InvalidParameter("cells must list n + 1 counts");
        std::vector<IntMatrix> d;
        const auto& cob = j.at("coboundary");
        if (cob.size() != std::size_t(n))
            throw InvalidParameter("coboundary must list n matrices");
        for (int k = 0; k < n; ++k) {
            IntMatrix m(cells[k + 1], cells[k]);
            for (auto& t : cob[k]) {
                auto r = t.at(0).get<std::size_t>(), c = t.at(1).get<std::size_t>();
                if (r >= m.rows() || c >= m.cols())
                    throw InvalidParameter("coboundary entry out of range in degree " + std::to_string(k));
                m(r, c) = json_int(t.at(2));
            }
            d.push_back(m);
        }
        std::vector<RatMatrix> star;
        const auto& st = j.at("star");
        if (st.size() != std::size_t(n + 1))
            throw InvalidParameter("star must list n + 1 matrices");
        for (int k = 0; k <= n; ++k) {
            RatMatrix s(cells[k], cells[k]);
            if (st[k].contains("diagonal")) {
                const auto& dg = st[k]["diagonal"];
                if (dg.size() != cells[k])
                    throw InvalidParameter("diagonal star has the wrong length in degree " + std::to_string(k));
                for (std::size_t i = 0; i < cells[k]; ++i)
                    s(i, i) = json_rat(dg[i]);
            } else {
                const auto& dn = st[k].at("dense");
                if (dn.size() != cells[k])
                    throw InvalidParameter("dense star has the wrong shape in degree " + std::to_string(k));
                for (std::size_t i = 0; i < cells[k]; ++i) {
                    if (dn[i].size() != cells[k])
                        throw InvalidParameter("dense star has the wrong shape in degree " + std::to_string(k));
                    for (std::size_t c = 0; c < cells[k]; ++c)
                        s(i, c) = json_rat(dn[i][c]);
                }
            }
            star.push_back(s);
        }
        return make_dec(j.value("name", std::string("mesh")), n, cells, d, star, j.value("closed", true));
    } catch (const json::exception& e) {
        throw InvalidParameter(std::string("mesh JSON is malformed: ") + e.what());
    }
}

}  // namespace mxw
