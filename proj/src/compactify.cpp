#include "mxw/compactify.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

namespace mxw {

namespace {

constexpr int kConst = -1;

int sgn(long k) { return k % 2 == 0 ? 1 : -1; }

RatMatrix eye(std::size_t n) { return RatMatrix::identity(n); }

RatMatrix scaled(const Rat& s, const RatMatrix& m)
{
    RatMatrix out = m;
    out *= s;
    return out;
}

double rat_max_abs(const RatMatrix& m)
{
    double v = 0;
    for (auto& q : m.data())
        v = std::max(v, std::abs(q.get_d()));
    return v;
}

// +1 if m = s·1, -1 if m = -s·1, otherwise 0
int scalar_sign(const RatMatrix& m, const Rat& s)
{
    if (m.rows() != m.cols())
        return 0;
    if (m == scaled(s, eye(m.rows())))
        return 1;
    if (m == scaled(Rat(-s), eye(m.rows())))
        return -1;
    return 0;
}

double min_singular_value(const RatMatrix& m)
{
    if (m.rows() != m.cols())
        return 0;
    if (m.rows() == 0)
        return std::numeric_limits<double>::infinity();
    Eigen::MatrixXd a(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            a(i, j) = m(i, j).get_d();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues().minCoeff();
}

std::string rat_str(const Rat& q) { return q.get_str(); }

SymBlock compose_block(const SymbolicBase& b, const SymBlock& g, const SymBlock& f, int j)
{
    SymBlock out;
    for (auto& tf : f.terms)
        for (auto& tg : g.terms) {
            auto r = b.reduce(j, tf.word + tg.word);
            if (!r.sign)
                continue;
            RatMatrix c = tg.coeff * tf.coeff;
            if (r.sign < 0)
                c = -c;
            out.add(r.word, c);
        }
    return out;
}

void accumulate(SymMap& a, const SymMap& b)
{
    for (auto& [k, blk] : b) {
        a[k].add(blk);
        if (a[k].is_zero())
            a.erase(k);
    }
}

// g ∘ f, where the sources of f are the slots fsrc
SymMap compose(const SymbolicBase& b, const SymMap& g, const SymMap& f, const std::vector<SymSlot>& fsrc)
{
    std::multimap<std::size_t, std::pair<std::size_t, const SymBlock*>> bysrc;
    for (auto& [k, blk] : g)
        bysrc.emplace(k.first, std::make_pair(k.second, &blk));
    SymMap out;
    for (auto& [k, blk] : f) {
        auto [lo, hi] = bysrc.equal_range(k.second);
        for (auto it = lo; it != hi; ++it) {
            SymBlock c = compose_block(b, *it->second.second, blk, fsrc[k.first].xdeg);
            if (!c.is_zero())
                out[{k.first, it->second.first}].add(c);
        }
    }
    for (auto it = out.begin(); it != out.end();)
        it = it->second.is_zero() ? out.erase(it) : std::next(it);
    return out;
}

SkeletonSlot skeleton(const SymSlot& s)
{
    return {s.row, s.kind == 'Z', s.kind == 'Z' ? 0 : s.xdeg, s.ydeg, s.degree};
}

std::string slot_name(const std::string& row, char kind, int j, int l)
{
    if (kind == 'Z')
        return row + ".Z[" + std::to_string(l) + "]";
    return row + "." + std::string(1, kind) + "[" + std::to_string(j) + "," + std::to_string(l) + "]";
}

std::string sub(int k) { return std::to_string(k); }

}  // namespace

SingularBlock::SingularBlock(std::string loc, double s)
    : std::runtime_error("singular block at " + loc + " (min singular value " + std::to_string(s) + ")"),
      location(std::move(loc)), min_singular(s)
{
}

// ---- symbolic base ----

SymbolicBase::Reduced SymbolicBase::reduce(int j, const std::string& w) const
{
    std::string out;
    std::vector<int> before;
    int cur = j, sign = 1;
    for (char c : w) {
        if (c == 'd') {
            if (cur == kConst || cur >= x || (!out.empty() && out.back() == 'd'))
                return {};
            before.push_back(cur);
            out.push_back('d');
            ++cur;
        } else if (c == 's') {
            if (!out.empty() && out.back() == 's') {
                const int k = before.back();
                if (k != kConst)
                    sign *= sgn(long(k) * (x - k));
                cur = k;
                out.pop_back();
                before.pop_back();
            } else {
                before.push_back(cur);
                out.push_back('s');
                cur = x - (cur == kConst ? 0 : cur);
            }
        } else {
            throw std::invalid_argument(std::string("unknown operator letter '") + c + "'");
        }
    }
    return {sign, out, cur};
}

void SymbolicBase::validate() const
{
    if (x < 0)
        throw InvalidParameter("base dimension must be nonnegative");
}

std::string word_label(const std::string& w)
{
    if (w.empty())
        return "1";
    std::string out;
    for (auto it = w.rbegin(); it != w.rend(); ++it)
        out += *it == 'd' ? "d" : "⋆";
    return out;
}

void SymBlock::add(const std::string& word, const RatMatrix& c)
{
    if (c.is_zero())
        return;
    auto it = std::lower_bound(terms.begin(), terms.end(), word,
                               [](const SymTerm& t, const std::string& w) { return t.word < w; });
    if (it != terms.end() && it->word == word) {
        it->coeff += c;
        if (it->coeff.is_zero())
            terms.erase(it);
        return;
    }
    terms.insert(it, SymTerm{word, c});
}

void SymBlock::add(const SymBlock& o)
{
    for (auto& t : o.terms)
        add(t.word, t.coeff);
}

const RatMatrix* SymBlock::coeff(const std::string& word) const
{
    for (auto& t : terms)
        if (t.word == word)
            return &t.coeff;
    return nullptr;
}

double SymBlock::max_abs() const
{
    double v = 0;
    for (auto& t : terms)
        v = std::max(v, rat_max_abs(t.coeff));
    return v;
}

std::string SymBlock::str() const
{
    std::ostringstream os;
    for (std::size_t i = 0; i < terms.size(); ++i)
        os << (i ? " + " : "") << word_label(terms[i].word) << "⊗[" << terms[i].coeff.shape() << "]";
    return os.str();
}

std::size_t SymComplex::add_slot(SymSlot s)
{
    if (has(s.name))
        throw std::logic_error("duplicate slot " + s.name);
    slots.push_back(std::move(s));
    return slots.size() - 1;
}

std::size_t SymComplex::index(const std::string& name) const
{
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (slots[i].name == name)
            return i;
    throw std::out_of_range("no slot " + name);
}

bool SymComplex::has(const std::string& name) const
{
    return std::any_of(slots.begin(), slots.end(), [&](const SymSlot& s) { return s.name == name; });
}

const SymBlock* SymComplex::block(const std::string& from, const std::string& to) const
{
    if (!has(from) || !has(to))
        return nullptr;
    auto it = d.find({index(from), index(to)});
    return it == d.end() ? nullptr : &it->second;
}

std::vector<std::string> SymComplex::square_defects() const
{
    std::vector<std::string> out;
    for (auto& [k, blk] : compose(base, d, d, slots))
        out.push_back(slots[k.first].name + " -> " + slots[k.second].name + ": " + blk.str());
    return out;
}

std::map<int, std::size_t> SymComplex::ranks() const
{
    std::map<int, std::size_t> r;
    for (auto& s : slots)
        r[s.degree] += s.dim;
    return r;
}

// ---- report types ----

std::string to_string(FamilyKind k)
{
    switch (k) {
    case FamilyKind::Maxwell: return "Maxwell";
    case FamilyKind::Deligne: return "Deligne";
    case FamilyKind::DeRham: return "DeRham";
    case FamilyKind::Torsion: return "Torsion";
    case FamilyKind::Lattice: return "Lattice";
    }
    return "?";
}

std::string SkeletonSlot::str() const
{
    std::ostringstream os;
    if (integral)
        os << "H^" << ydeg << "(Y,ℤ)";
    else
        os << "Ω^" << xdeg << "_X ⊗ H^" << ydeg << "(Y)";
    os << " [" << row << ", " << degree << "]";
    return os.str();
}

std::string Summand::label() const
{
    std::ostringstream os;
    switch (kind) {
    case FamilyKind::Maxwell:
        os << "Maxwell_{" << form_degree << "}⟨H^" << ell << "(Y), rank " << rank << "⟩";
        break;
    case FamilyKind::Deligne:
    case FamilyKind::DeRham:
        os << to_string(kind) << "[" << row << ", H^" << ell << "(Y), shift " << shift << "]";
        break;
    case FamilyKind::Torsion:
    case FamilyKind::Lattice:
        os << to_string(kind) << "[" << row << ", H^" << ell << " = " << group.str() << ", shift " << shift << "]";
        break;
    }
    return os.str();
}

// ---- K residual ----

AcyclicityCertificate verify_tk_bk_acyclic(const DecManifold& Y, int p, int x)
{
    if (!Y.closed)
        throw UnsupportedCase("fiber must be closed");
    const int y = Y.n;
    if (p < 0 || x < 0 || p > x + y - 2)
        throw InvalidParameter("need 0 <= p <= x + y - 2");
    DecManifold Yd = Y.dual();
    const auto hT = hodge_decomposition<Rat>(Y);
    const auto hB = hodge_decomposition<Rat>(Yd);
    AcyclicityCertificate c;
    c.regime = p < y ? "p < y" : "y <= p";
    for (int l = std::max(0, p - x); l <= std::min(y - 1, p); ++l) {
        const RatMatrix& K = hT.coclosed[l];
        const RatMatrix& Kd = hB.coclosed[y - l - 1];
        KBlock b;
        b.ell = l;
        b.top_xdeg = p - l;
        b.bot_xdeg = x - (p - l);
        b.bot_ydeg = y - l - 1;
        b.dim = K.cols();
        const std::string loc = "K^" + sub(l) + "(Y) -> K^" + sub(y - l - 1) + "(Y*) in X-degrees " +
                                sub(b.top_xdeg) + " -> " + sub(b.bot_xdeg);
        const RatMatrix img = Y.star_at(l + 1) * to_rat(Y.d[l]) * K;
        auto coords = solve(Kd, img);
        if (!coords)
            throw std::logic_error("⋆d_Y of a coclosed form is not coclosed at " + loc);
        b.min_singular = Kd.cols() == K.cols() ? min_singular_value(*coords) : 0;
        if (Kd.cols() != K.cols() || b.min_singular <= 1e-8)
            throw SingularBlock(loc, b.min_singular);
        c.min_singular = std::min(c.min_singular, b.min_singular);
        c.blocks.push_back(b);
    }
    c.acyclic = true;
    return c;
}

// ---- pushforward ----

namespace {

struct Row {
    const DecManifold* m = nullptr;
    const HodgeData<Rat>* h = nullptr;
    std::string name;
    int t = 0, shift = 0;
    std::vector<RatMatrix> basis;
    std::vector<IntMatrix> gens;
    std::vector<FgAbGroup> groups;
};

struct Matcher {
    const SymComplex& c;
    std::set<std::pair<std::size_t, std::size_t>> used;
    std::set<std::size_t> covered;
    std::vector<std::string> errors;

    const SymBlock* take(const std::string& a, const std::string& b)
    {
        if (!c.has(a) || !c.has(b)) {
            errors.push_back("missing slot for arrow " + a + " -> " + b);
            return nullptr;
        }
        used.insert({c.index(a), c.index(b)});
        return c.block(a, b);
    }

    // the block a -> b must be word ⊗ (±s·1)
    int scalar(const std::string& a, const std::string& b, const std::string& word, const Rat& s)
    {
        const SymBlock* blk = take(a, b);
        if (!blk || blk->terms.size() != 1 || blk->terms[0].word != word) {
            errors.push_back("expected " + word_label(word) + " ⊗ ±" + rat_str(s) + " on " + a + " -> " + b +
                             ", found " + (blk ? blk->str() : "0"));
            return 0;
        }
        const int sg = scalar_sign(blk->terms[0].coeff, s);
        if (!sg)
            errors.push_back("coefficient of " + a + " -> " + b + " is not ±" + rat_str(s) + "·1");
        return sg;
    }

    // the block a -> b must be word ⊗ (±m); returns the coefficient
    std::optional<RatMatrix> exact(const std::string& a, const std::string& b, const std::string& word,
                                   const RatMatrix& m)
    {
        const SymBlock* blk = take(a, b);
        if (!blk || blk->terms.size() != 1 || blk->terms[0].word != word) {
            errors.push_back("expected " + word_label(word) + " on " + a + " -> " + b + ", found " +
                             (blk ? blk->str() : "0"));
            return {};
        }
        const RatMatrix& got = blk->terms[0].coeff;
        if (!(got == m) && !(got == RatMatrix(-m)))
            errors.push_back("coefficient of " + a + " -> " + b + " differs from the predicted lattice map");
        return got;
    }

    void cover(Summand& s, const std::string& name, bool in_skeleton = true)
    {
        if (!c.has(name)) {
            errors.push_back("missing slot " + name);
            return;
        }
        const std::size_t i = c.index(name);
        if (!covered.insert(i).second)
            errors.push_back("slot " + name + " claimed by two families");
        s.slot_names.push_back(name);
        if (in_skeleton)
            s.slots.push_back(skeleton(c.slots[i]));
    }

    SkeletonArrow arrow(const std::string& a, const std::string& b, const std::string& label) const
    {
        return {skeleton(c.slots[c.index(a)]), skeleton(c.slots[c.index(b)]), label};
    }
};

DecompositionReport pushforward_impl(const SymbolicBase& base, const DecManifold& Y, int p, const Rat& kappa,
                                     const Rat& e, bool full)
{
    base.validate();
    Y.validate();
    if (!Y.closed)
        throw UnsupportedCase("fiber must be closed");
    if (kappa == 0 || (full && e == 0))
        throw ZeroCoupling("couplings must be nonzero");
    const int x = base.x, y = Y.n, n = x + y;
    if (p < 0 || p > n - 2)
        throw InvalidParameter("need 0 <= p <= x + y - 2");
    const int tT = p, tB = n - p - 1;

    DecompositionReport rep;
    rep.x = x;
    rep.y = y;
    rep.p = p;
    rep.n = n;
    rep.kappa = kappa;
    rep.e = e;
    rep.full = full;
    rep.fiber = Y.name;

    const DecManifold Yd = Y.dual();
    const auto hT = hodge_decomposition<Rat>(Y);
    const auto hB = hodge_decomposition<Rat>(Yd);
    Row rows[2];
    rows[0] = {&Y, &hT, "top", tT, p, {}, {}, integer_cohomology(Y)};
    rows[1] = {&Yd, &hB, "bot", tB, n - p - 2, {}, {}, integer_cohomology(Yd)};
    std::vector<RatMatrix> estar(y + 1), dual_reps(y + 1);
    for (int l = 0; l <= y; ++l) {
        auto cm = comparison_map(Y, hT, l);
        rows[0].basis.push_back(cm.harmonic_reps);
        rows[0].gens.push_back(cm.generators);
    }
    for (int k = 0; k <= y; ++k) {
        rows[1].basis.push_back(Y.star_at(y - k) * rows[0].basis[y - k]);
        auto cm = comparison_map(Yd, hB, k);
        rows[1].gens.push_back(cm.generators);
        auto s = solve(rows[1].basis[k], cm.harmonic_reps);
        if (!s)
            throw std::logic_error("harmonic forms of Y* are not the stars of those of Y");
        estar[k] = *s;
        dual_reps[k] = cm.harmonic_reps;
    }
    auto coef = [&](int r, int target_form_degree) { return r == 1 && target_form_degree == tB ? Rat(-kappa) : Rat(1); };

    // big complex: Ω^j_X ⊗ C^l(Y) on the top row, Ω^j_X ⊗ C^l(Y*) on the bottom row
    SymComplex big;
    big.base = base;
    std::map<std::tuple<int, int, int>, std::size_t> bix;
    for (int r = 0; r < 2; ++r)
        for (int j = 0; j <= std::min(x, rows[r].t); ++j)
            for (int l = 0; l <= std::min(y, rows[r].t - j); ++l)
                bix[{r, j, l}] = big.add_slot({slot_name(rows[r].name, 'C', j, l), rows[r].name, 'C',
                                               j + l - rows[r].shift, j, l, rows[r].m->ncells(l)});
    auto find = [&](int r, int j, int l) -> std::optional<std::size_t> {
        auto it = bix.find({r, j, l});
        if (it == bix.end())
            return {};
        return it->second;
    };
    SymMap d0, delta;
    for (auto& [key, i] : bix) {
        auto [r, j, l] = key;
        const std::size_t dim = big.slots[i].dim;
        if (auto t = find(r, j, l + 1))
            d0[{i, *t}].add("", scaled(Rat(sgn(j) * coef(r, j + l + 1)), to_rat(rows[r].m->d[l])));
        if (auto t = find(r, j + 1, l))
            delta[{i, *t}].add("d", scaled(coef(r, j + l + 1), eye(dim)));
        if (r == 0 && j + l == p) {
            if (auto t = find(1, x - j - 1, y - l))
                delta[{i, *t}].add("ds", scaled(Rat(sgn(long(l) * (x - j - 1))), Y.star_at(l)));
            if (l + 1 <= y)
                if (auto t = find(1, x - j, y - l - 1))
                    delta[{i, *t}].add("s", scaled(Rat(sgn(j) * sgn(long(l + 1) * (x - j))),
                                                   Y.star_at(l + 1) * to_rat(Y.d[l])));
        }
    }
    big.d = d0;
    accumulate(big.d, delta);
    if (auto bad = big.square_defects(); !bad.empty())
        throw std::logic_error("product complex does not square to zero: " + bad.front());

    // column retracts onto harmonic forms and the coclosed top part
    SymComplex& small = rep.transferred;
    small.base = base;
    SymMap iota, pim, eta;
    std::map<std::pair<int, int>, RetractT<Rat>> cache;
    for (int r = 0; r < 2; ++r) {
        const Row& R = rows[r];
        for (int j = 0; j <= std::min(x, R.t); ++j) {
            const int t = std::min(y, R.t - j);
            auto it = cache.find({r, t});
            if (it == cache.end())
                it = cache.emplace(std::make_pair(r, t), hodge_retract<Rat>(*R.m, t, R.h)).first;
            const RetractT<Rat>& rr = it->second;
            for (int l = 0; l <= t; ++l) {
                const std::size_t bi = bix.at({r, j, l});
                const std::size_t hl = R.h->harmonic[l].cols();
                const RatMatrix& pil = rr.pi.at(l);
                const int degree = j + l - R.shift;
                if (hl > 0) {
                    const RatMatrix& Bm = R.basis[l];
                    const RatMatrix piH = pil.rows_range(0, hl);
                    const RatMatrix Cinv = inverse(RatMatrix(piH * Bm));
                    const std::size_t si = small.add_slot({slot_name(R.name, 'H', j, l), R.name, 'H', degree, j, l, hl});
                    iota[{si, bi}].add("", Bm);
                    pim[{bi, si}].add("", Cinv * piH);
                }
                if (l == t) {
                    const std::size_t kd = rr.iota.at(t).cols() - hl;
                    if (kd > 0) {
                        const std::size_t si = small.add_slot({slot_name(R.name, 'K', j, l), R.name, 'K', degree, j, l, kd});
                        iota[{si, bi}].add("", rr.iota.at(t).cols_range(hl, kd));
                        pim[{bi, si}].add("", pil.rows_range(hl, kd));
                    }
                }
                if (l >= 1) {
                    const Rat c = Rat(sgn(j)) * coef(r, j + l);
                    eta[{bi, bix.at({r, j, l - 1})}].add("", scaled(Rat(1 / c), rr.eta.at(l)));
                }
            }
        }
    }

    // A = Σ (δη)^m δ
    SymMap A = delta, term = delta;
    int order = 1;
    for (;;) {
        term = compose(base, delta, compose(base, eta, term, big.slots), big.slots);
        if (term.empty())
            break;
        accumulate(A, term);
        if (++order > 4 * (n + 3))
            throw NotSmall("δη is not nilpotent on the product complex");
    }
    rep.nilpotency = order;
    small.d = compose(base, pim, compose(base, A, iota, small.slots), small.slots);

    if (full) {
        // each lattice class goes to its harmonic representative; any integral cocycle differs from it by
        // a coboundary, so this only changes the extension by a homotopy
        SymMap F;
        for (int l = 0; l <= y; ++l) {
            const IntMatrix& g = rows[0].gens[l];
            if (g.cols() == 0)
                continue;
            const std::size_t zi = small.add_slot({slot_name("top", 'Z', 0, l), "top", 'Z', l - p - 1, kConst, l, g.cols()});
            if (l <= p)
                F[{zi, bix.at({0, 0, l})}].add("", rows[0].basis[l]);
            else if (l == p + 1)
                if (auto t = find(1, x, y - p - 1))
                    F[{zi, *t}].add("s", scaled(Rat(sgn(long(l) * x)), Y.star_at(l) * rows[0].basis[l]));
        }
        for (int k = 0; k <= y; ++k) {
            const IntMatrix& g = rows[1].gens[k];
            if (g.cols() == 0)
                continue;
            const std::size_t zi =
                small.add_slot({slot_name("bot", 'Z', 0, k), "bot", 'Z', k - (n - p - 1), kConst, k, g.cols()});
            if (auto t = find(1, 0, k))
                F[{zi, *t}].add("", scaled(Rat(coef(1, k) * e), dual_reps[k]));
        }
        SymMap G = compose(base, pim, F, small.slots);
        accumulate(G, compose(base, pim, compose(base, A, compose(base, eta, F, small.slots), small.slots), small.slots));
        accumulate(small.d, G);
    }
    if (auto bad = small.square_defects(); !bad.empty())
        throw std::logic_error("transferred differential does not square to zero: " + bad.front());

    // ---- families ----
    Matcher mt{small, {}, {}, {}};
    auto H = [&](int r, int j, int l) { return slot_name(rows[r].name, 'H', j, l); };
    auto Z = [&](int r, int l) { return slot_name(rows[r].name, 'Z', 0, l); };
    auto rank_of = [&](int r, int l) { return std::size_t(rows[r].m == &Y ? hT.harmonic[l].cols() : hB.harmonic[l].cols()); };

    const int mlo = std::max(p - x + 1, 0), mhi = std::min(y, p);
    if (mlo > mhi)
        rep.notes.push_back("Maxwell range ℓ = " + sub(mlo) + ".." + sub(mhi) + " is empty");
    for (int l = mlo; l <= mhi; ++l) {
        const std::size_t b = rank_of(0, l);
        const int q = p - l, k = y - l, c = x - q - 1;
        if (b == 0) {
            rep.notes.push_back("H^" + sub(l) + "(Y) = 0, Maxwell family ℓ = " + sub(l) + " is absent");
            continue;
        }
        if (rank_of(1, k) != b)
            mt.errors.push_back("Poincaré duality mismatch between H^" + sub(l) + "(Y) and H^" + sub(k) + "(Y*)");
        Summand s;
        s.kind = FamilyKind::Maxwell;
        s.ell = l;
        s.form_degree = q;
        s.shift = 0;
        s.group = make_group(b, {});
        s.rank = b;
        for (int j = 0; j <= q; ++j) {
            mt.cover(s, H(0, j, l));
            if (j < q) {
                mt.scalar(H(0, j, l), H(0, j + 1, l), "d", 1);
                s.arrows.push_back(mt.arrow(H(0, j, l), H(0, j + 1, l), "d"));
            }
        }
        for (int j = 0; j <= c; ++j) {
            mt.cover(s, H(1, j, k));
            if (j < c) {
                const bool corner = j + 1 == c;
                const int sg = mt.scalar(H(1, j, k), H(1, j + 1, k), "d", corner ? kappa : Rat(1));
                s.arrows.push_back(mt.arrow(H(1, j, k), H(1, j + 1, k), corner ? "-κd" : "d"));
                if (corner)
                    s.K = scaled(Rat(-sg * kappa), eye(b));
            }
        }
        mt.scalar(H(0, q, l), H(1, c, k), "ds", 1);
        s.arrows.push_back(mt.arrow(H(0, q, l), H(1, c, k), "⋆d"));
        if (full) {
            if (auto g = mt.exact(Z(0, l), H(0, 0, l), "", eye(b))) {
                s.top_lattice = *g;
                mt.cover(s, Z(0, l));
                s.arrows.push_back(mt.arrow(Z(0, l), H(0, 0, l), "E"));
            }
            const Rat f = c == 0 ? Rat(-kappa * e) : e;
            if (auto g = mt.exact(Z(1, k), H(1, 0, k), "", scaled(f, estar[k]))) {
                mt.cover(s, Z(1, k));
                s.arrows.push_back(mt.arrow(Z(1, k), H(1, 0, k), "eE"));
                // the lattice lands on the corner when c = 0; read K from it
                s.E = scaled(e, estar[k]);
                if (c == 0)
                    s.K = scaled(Rat(-1), RatMatrix(*g * inverse(s.E)));
            }
        }
        if (s.K.rows() == 0)
            s.K = scaled(kappa, eye(b));
        rep.summands.push_back(std::move(s));
    }

    const FamilyKind dr = full ? FamilyKind::Deligne : FamilyKind::DeRham;
    const int thi = std::min(p - x, y);
    if (thi < 0)
        rep.notes.push_back("top de Rham range ℓ = 0.." + sub(p - x) + " is empty");
    if (p - x > y)
        rep.notes.push_back("top de Rham bound p-x = " + sub(p - x) + " exceeds y; H^ℓ(Y) = 0 beyond ℓ = y");
    for (int l = 0; l <= thi; ++l) {
        const std::size_t b = rank_of(0, l);
        if (b == 0) {
            rep.notes.push_back("H^" + sub(l) + "(Y) = 0, top de Rham family ℓ = " + sub(l) + " is absent");
            continue;
        }
        Summand s;
        s.kind = dr;
        s.row = "top";
        s.ell = l;
        s.form_degree = x;
        s.shift = p - l;
        s.group = make_group(b, {});
        s.rank = b;
        for (int j = 0; j <= x; ++j) {
            mt.cover(s, H(0, j, l));
            if (j < x) {
                mt.scalar(H(0, j, l), H(0, j + 1, l), "d", 1);
                s.arrows.push_back(mt.arrow(H(0, j, l), H(0, j + 1, l), "d"));
            }
        }
        if (full)
            if (auto g = mt.exact(Z(0, l), H(0, 0, l), "", eye(b))) {
                s.top_lattice = *g;
                mt.cover(s, Z(0, l));
                s.arrows.push_back(mt.arrow(Z(0, l), H(0, 0, l), "E"));
            }
        rep.summands.push_back(std::move(s));
    }

    if (y - p - 1 < 0)
        rep.notes.push_back("bottom de Rham range k = 0.." + sub(y - p - 1) + " is empty");
    for (int k = 0; k <= y - p - 1; ++k) {
        const std::size_t b = rank_of(1, k);
        if (b == 0) {
            rep.notes.push_back("H^" + sub(k) + "(Y*) = 0, bottom de Rham family k = " + sub(k) + " is absent");
            continue;
        }
        Summand s;
        s.kind = dr;
        s.row = "bot";
        s.ell = k;
        s.form_degree = x;
        s.shift = n - p - 2 - k;
        s.group = make_group(b, {});
        s.rank = b;
        for (int j = 0; j <= x; ++j) {
            mt.cover(s, H(1, j, k));
            if (j < x) {
                const bool corner = j + 1 + k == tB;
                mt.scalar(H(1, j, k), H(1, j + 1, k), "d", corner ? kappa : Rat(1));
                s.arrows.push_back(mt.arrow(H(1, j, k), H(1, j + 1, k), corner ? "-κd" : "d"));
            }
        }
        if (full) {
            const Rat f = k == tB ? Rat(-kappa * e) : e;
            if (auto g = mt.exact(Z(1, k), H(1, 0, k), "", scaled(f, estar[k]))) {
                mt.cover(s, Z(1, k));
                s.arrows.push_back(mt.arrow(Z(1, k), H(1, 0, k), "eE"));
                s.E = scaled(e, estar[k]);
            }
            // free classes of degree p+1 on Y reach the top of this family through ⋆
            if (k == y - p - 1 && small.has(Z(0, p + 1))) {
                mt.scalar(Z(0, p + 1), H(1, x, k), "s", 1);
                mt.cover(s, Z(0, p + 1), false);
                s.extra.push_back(mt.arrow(Z(0, p + 1), H(1, x, k), "⋆E"));
                rep.notes.push_back("H^" + sub(p + 1) + "(Y,ℤ) couples to the bottom family k = " + sub(k) +
                                    " through ⋆ (flux)");
            }
        }
        rep.summands.push_back(std::move(s));
    }

    if (full) {
        for (int l = p + 2; l <= y; ++l)
            if (small.has(Z(0, l))) {
                Summand s;
                s.kind = FamilyKind::Lattice;
                s.row = "top";
                s.ell = l;
                s.shift = p + 1;
                s.rank = rank_of(0, l);
                s.group = make_group(s.rank, {});
                mt.cover(s, Z(0, l));
                rep.summands.push_back(std::move(s));
            }
        for (int k = tB + 1; k <= y; ++k)
            if (small.has(Z(1, k))) {
                Summand s;
                s.kind = FamilyKind::Lattice;
                s.row = "bot";
                s.ell = k;
                s.shift = n - p - 1;
                s.rank = rank_of(1, k);
                s.group = make_group(s.rank, {});
                mt.cover(s, Z(1, k));
                rep.summands.push_back(std::move(s));
            }
        for (int r = 0; r < 2; ++r)
            for (int l = 0; l <= y; ++l) {
                const auto& tors = rows[r].groups[l].torsion;
                if (tors.empty())
                    continue;
                Summand s;
                s.kind = FamilyKind::Torsion;
                s.row = rows[r].name;
                s.ell = l;
                s.shift = r == 0 ? p + 1 : n - p - 1;
                s.group = make_group(0, tors);
                s.slots.push_back({rows[r].name, true, 0, l, l - s.shift});
                rep.summands.push_back(std::move(s));
            }
    }

    // K residual
    AcyclicityCertificate& cert = rep.residual;
    cert.regime = p < y ? "p < y" : "y <= p";
    std::set<std::string> kwords;
    std::set<std::size_t> kslots;
    for (std::size_t i = 0; i < small.slots.size(); ++i) {
        const SymSlot& s = small.slots[i];
        if (s.kind != 'K')
            continue;
        kslots.insert(i);
        if (s.row != "top")
            continue;
        const int j = s.xdeg, l = s.ydeg;
        const std::string partner = slot_name("bot", 'K', x - j, y - l - 1);
        const std::string loc = s.name + " -> " + partner;
        if (!small.has(partner))
            throw AcyclicityFailure("coclosed slot " + s.name + " has no partner");
        const std::size_t bdim = small.slots[small.index(partner)].dim;
        const SymBlock* blk = small.block(s.name, partner);
        mt.used.insert({i, small.index(partner)});
        const RatMatrix* m1 = blk ? blk->coeff("s") : nullptr;
        KBlock kb{l, j, x - j, y - l - 1, s.dim, 0};
        kb.min_singular = m1 && bdim == s.dim ? min_singular_value(*m1) : 0;
        if (blk)
            for (auto& t : blk->terms)
                kwords.insert(word_label(t.word));
        if (kb.min_singular <= 1e-8)
            throw AcyclicityFailure("⋆d_Y block is not invertible at " + loc);
        cert.min_singular = std::min(cert.min_singular, kb.min_singular);
        cert.blocks.push_back(kb);
    }
    for (std::size_t i : kslots)
        if (small.slots[i].row == "bot") {
            const SymSlot& s = small.slots[i];
            if (!small.has(slot_name("top", 'K', x - s.xdeg, y - s.ydeg - 1)))
                throw AcyclicityFailure("coclosed slot " + s.name + " has no partner");
        }
    std::sort(cert.blocks.begin(), cert.blocks.end(), [](const KBlock& a, const KBlock& b) { return a.ell < b.ell; });
    cert.words.assign(kwords.begin(), kwords.end());
    cert.acyclic = true;

    for (std::size_t i = 0; i < small.slots.size(); ++i)
        if (small.slots[i].kind != 'K' && !mt.covered.count(i))
            mt.errors.push_back("slot " + small.slots[i].name + " is not in any predicted family");
    for (auto& [k, blk] : small.d) {
        if (mt.used.count(k))
            continue;
        rep.off_family = std::max(rep.off_family, blk.max_abs());
        mt.errors.push_back("unpredicted block " + small.slots[k.first].name + " -> " + small.slots[k.second].name +
                            ": " + blk.str());
    }
    if (!mt.errors.empty()) {
        std::string msg = "transferred complex does not match the predicted families:";
        for (auto& s : mt.errors)
            msg += "\n  " + s;
        throw PatternMismatch(msg);
    }

    rep.ranks_transferred = small.ranks();
    for (auto& s : rep.summands)
        for (auto& nm : s.slot_names) {
            const SymSlot& sl = small.slots[small.index(nm)];
            rep.ranks_summands[sl.degree] += sl.dim;
        }
    for (std::size_t i : kslots)
        rep.ranks_summands[small.slots[i].degree] += small.slots[i].dim;
    return rep;
}

}  // namespace

DecompositionReport pushforward_pert(const SymbolicBase& base, const DecManifold& Y, int p, const Rat& kappa)
{
    return pushforward_impl(base, Y, p, kappa, 1, false);
}

DecompositionReport pushforward_full(const SymbolicBase& base, const DecManifold& Y, int p, const Rat& kappa,
                                     const Rat& e)
{
    return pushforward_impl(base, Y, p, kappa, e, true);
}

// ---- example tables ----

namespace {

SkeletonSlot real_slot(const std::string& row, int j, int l, int degree) { return {row, false, j, l, degree}; }
SkeletonSlot lattice_slot(const std::string& row, int l, int degree) { return {row, true, 0, l, degree}; }

// top chain Ω^0..Ω^q ⊗ H^l starting in degree t0, bottom chain Ω^0..Ω^c ⊗ H^k starting in degree b0
Summand table_maxwell(int l, int q, int k, int c, int t0, int b0)
{
    Summand s;
    s.kind = FamilyKind::Maxwell;
    s.ell = l;
    s.form_degree = q;
    for (int j = 0; j <= q; ++j) {
        s.slots.push_back(real_slot("top", j, l, t0 + j));
        if (j < q)
            s.arrows.push_back({real_slot("top", j, l, t0 + j), real_slot("top", j + 1, l, t0 + j + 1), "d"});
    }
    for (int j = 0; j <= c; ++j) {
        s.slots.push_back(real_slot("bot", j, k, b0 + j));
        if (j < c)
            s.arrows.push_back({real_slot("bot", j, k, b0 + j), real_slot("bot", j + 1, k, b0 + j + 1),
                                j + 1 == c ? "-κd" : "d"});
    }
    s.arrows.push_back({real_slot("top", q, l, t0 + q), real_slot("bot", c, k, b0 + c), "⋆d"});
    s.slots.push_back(lattice_slot("top", l, t0 - 1));
    s.arrows.push_back({lattice_slot("top", l, t0 - 1), real_slot("top", 0, l, t0), "E"});
    s.slots.push_back(lattice_slot("bot", k, b0 - 1));
    s.arrows.push_back({lattice_slot("bot", k, b0 - 1), real_slot("bot", 0, k, b0), "eE"});
    return s;
}

Summand table_deligne(const std::string& row, int l, int jmax, int d0, bool kappa_last)
{
    Summand s;
    s.kind = FamilyKind::Deligne;
    s.row = row;
    s.ell = l;
    s.form_degree = jmax;
    for (int j = 0; j <= jmax; ++j) {
        s.slots.push_back(real_slot(row, j, l, d0 + j));
        if (j < jmax)
            s.arrows.push_back({real_slot(row, j, l, d0 + j), real_slot(row, j + 1, l, d0 + j + 1),
                                kappa_last && j + 1 == jmax ? "-κd" : "d"});
    }
    s.slots.push_back(lattice_slot(row, l, d0 - 1));
    s.arrows.push_back({lattice_slot(row, l, d0 - 1), real_slot(row, 0, l, d0), row == "top" ? "E" : "eE"});
    return s;
}

Summand table_torsion(const std::string& row, int l, int degree)
{
    Summand s;
    s.kind = FamilyKind::Torsion;
    s.row = row;
    s.ell = l;
    s.shift = l - degree;
    s.slots.push_back(lattice_slot(row, l, degree));
    return s;
}

}  // namespace

std::vector<Summand> example_tables(int p, int y)
{
    if (p < 0 || p > 1 || y < 1 || y > 3)
        throw UnsupportedCase("example tables exist for x + y = 4, p in {0,1}, y in {1,2,3}");
    std::vector<Summand> t;
    if (p == 0 && y == 1) {
        t.push_back(table_maxwell(0, 0, 1, 2, 0, -1));
        t.push_back(table_deligne("bot", 0, 3, -2, true));
    } else if (p == 0 && y == 2) {
        t.push_back(table_maxwell(0, 0, 2, 1, 0, 0));
        t.push_back(table_deligne("bot", 0, 2, -2, false));
        t.push_back(table_deligne("bot", 1, 2, -1, true));
    } else if (p == 0 && y == 3) {
        t.push_back(table_maxwell(0, 0, 3, 0, 0, 1));
        t.push_back(table_deligne("bot", 0, 1, -2, false));
        t.push_back(table_deligne("bot", 1, 1, -1, false));
        t.push_back(table_deligne("bot", 2, 1, 0, true));
        t.push_back(table_torsion("top", 2, 1));
        t.push_back(table_torsion("bot", 2, -1));
    } else if (p == 1 && y == 1) {
        t.push_back(table_maxwell(0, 1, 1, 1, -1, 0));
        t.push_back(table_maxwell(1, 0, 0, 2, 0, -1));
    } else if (p == 1 && y == 2) {
        t.push_back(table_maxwell(0, 1, 2, 0, -1, 1));
        t.push_back(table_maxwell(1, 0, 1, 1, 0, 0));
        t.push_back(table_deligne("bot", 0, 2, -1, true));
    } else {
        t.push_back(table_maxwell(1, 0, 2, 0, 0, 1));
        t.push_back(table_deligne("top", 0, 1, -1, false));
        t.push_back(table_deligne("bot", 0, 1, -1, false));
        t.push_back(table_deligne("bot", 1, 1, 0, true));
        t.push_back(table_torsion("top", 2, 0));
        t.push_back(table_torsion("bot", 2, 0));
    }
    return t;
}

std::vector<SkeletonSlot> degree_zero_slots(const std::vector<Summand>& summands)
{
    std::vector<SkeletonSlot> out;
    for (auto& s : summands)
        for (auto& sl : s.slots)
            if (sl.degree == 0 && !sl.integral)
                out.push_back(sl);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::string family_key(const Summand& s)
{
    if (s.kind == FamilyKind::Maxwell)
        return "Maxwell ℓ=" + sub(s.ell);
    return to_string(s.kind) + " " + s.row + " ℓ=" + sub(s.ell);
}

bool compared(const Summand& s)
{
    return s.kind == FamilyKind::Maxwell || s.kind == FamilyKind::Deligne || s.kind == FamilyKind::DeRham;
}

}  // namespace

std::vector<std::string> diff_tables(const DecompositionReport& r, const std::vector<Summand>& expected)
{
    std::vector<std::string> out;
    std::map<std::string, const Summand*> got, want;
    for (auto& s : r.summands)
        if (compared(s))
            got[family_key(s)] = &s;
    for (auto& s : expected)
        if (compared(s))
            want[family_key(s)] = &s;
    for (auto& [k, w] : want) {
        auto it = got.find(k);
        if (it == got.end()) {
            // families with a zero coefficient group are absent rather than missing
            bool present = false;
            for (auto& sl : w->slots)
                present = present || (!sl.integral && r.transferred.has(slot_name(sl.row, 'H', sl.xdeg, sl.ydeg)));
            if (present)
                out.push_back("missing family " + k);
            continue;
        }
        const Summand& g = *it->second;
        auto a = g.slots, b = w->slots;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        for (auto& s : b)
            if (!std::binary_search(a.begin(), a.end(), s))
                out.push_back(k + ": missing slot " + s.str());
        for (auto& s : a)
            if (!std::binary_search(b.begin(), b.end(), s))
                out.push_back(k + ": unexpected slot " + s.str());
        auto x = g.arrows, y = w->arrows;
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        for (auto& s : y)
            if (!std::binary_search(x.begin(), x.end(), s))
                out.push_back(k + ": missing arrow " + s.label + " " + s.from.str() + " -> " + s.to.str());
        for (auto& s : x)
            if (!std::binary_search(y.begin(), y.end(), s))
                out.push_back(k + ": unexpected arrow " + s.label + " " + s.from.str() + " -> " + s.to.str());
        if (g.kind == FamilyKind::Maxwell) {
            if (!(g.K == scaled(r.kappa, eye(g.rank))))
                out.push_back(k + ": coupling K is not κ·Id");
            if (g.E.rows() != g.rank || g.E.cols() != g.rank)
                out.push_back(k + ": electric lattice e·E_ℓ missing");
        }
    }
    for (auto& [k, g] : got)
        if (!want.count(k))
            out.push_back("unexpected family " + k);
    // torsion entries of the tables are conditional on H^ℓ(Y, Z) having torsion
    for (auto& s : r.summands)
        if (s.kind == FamilyKind::Torsion) {
            bool ok = false;
            for (auto& w : expected)
                ok = ok || (w.kind == FamilyKind::Torsion && w.row == s.row && w.ell == s.ell && w.slots == s.slots);
            if (!ok)
                out.push_back("unexpected torsion family " + s.label());
        }
    return out;
}

std::vector<std::string> beyond_tables(const DecompositionReport& r)
{
    std::vector<std::string> out;
    for (auto& s : r.summands) {
        for (auto& a : s.extra)
            out.push_back(s.label() + ": " + a.label + " " + a.from.str() + " -> " + a.to.str());
        if (s.kind == FamilyKind::Lattice)
            out.push_back(s.label());
    }
    return out;
}

// ---- duality ----

namespace {

std::vector<SkeletonSlot> duality_key(const DecompositionReport& r, const Summand& s, bool swap)
{
    std::vector<SkeletonSlot> key;
    auto add = [&](SkeletonSlot sl) {
        if (!sl.integral && sl.row == "bot" && sl.xdeg + sl.ydeg == r.n - r.p - 1)
            return;
        if (swap)
            sl.row = sl.row == "top" ? "bot" : "top";
        key.push_back(sl);
    };
    for (auto& sl : s.slots)
        add(sl);
    for (auto& a : s.extra)
        add(a.from);
    std::sort(key.begin(), key.end());
    return key;
}

}  // namespace

std::vector<std::string> duality_correspondence(const DecompositionReport& a, const DecompositionReport& b)
{
    std::vector<std::string> out;
    if (a.x != b.x || a.y != b.y || b.p != a.n - a.p - 2)
        return {"reports are not related by duality (degrees)"};
    if (!(b.kappa * a.kappa == 1) || !(b.e * a.e == 1))
        out.push_back("couplings are not inverted");
    std::vector<bool> taken(b.summands.size(), false);
    for (auto& s : a.summands) {
        const auto ka = duality_key(a, s, true);
        bool found = false;
        for (std::size_t i = 0; i < b.summands.size() && !found; ++i) {
            const Summand& t = b.summands[i];
            if (taken[i] || duality_key(b, t, false) != ka)
                continue;
            if (s.kind == FamilyKind::Torsion && (t.kind != FamilyKind::Torsion || !(t.group == s.group)))
                continue;
            found = true;
            taken[i] = true;
            if (s.kind == FamilyKind::Maxwell && t.kind == FamilyKind::Maxwell) {
                if (s.rank != t.rank || !(RatMatrix(s.K * t.K) == eye(s.rank)))
                    out.push_back(s.label() + ": dual coupling is not K⁻¹");
                if (t.ell != a.y - s.ell)
                    out.push_back(s.label() + ": dual family sits at ℓ = " + sub(t.ell));
            }
        }
        if (!found)
            out.push_back("no dual partner for " + s.label());
    }
    for (std::size_t i = 0; i < b.summands.size(); ++i)
        if (!taken[i])
            out.push_back("dual summand " + b.summands[i].label() + " has no partner");
    return out;
}

// ---- discrete realization ----

namespace {

struct Side {
    bool dual = false;
    int deg = 0;
};

RatMatrix realize_word(const DecManifold& X, Side& side, const std::string& word)
{
    const std::size_t n0 = side.dual ? X.ndual(side.deg) : X.ncells(side.deg);
    RatMatrix m = eye(n0);
    for (char c : word) {
        if (c == 'd') {
            m = to_rat(side.dual ? X.dual_dz(side.deg) : X.dz(side.deg)) * m;
            ++side.deg;
        } else {
            m = (side.dual ? X.dual_star_at(side.deg) : X.star_at(side.deg)) * m;
            side.dual = !side.dual;
            side.deg = X.n - side.deg;
        }
    }
    return m;
}

IntMatrix int_eye(std::size_t n) { return IntMatrix::identity(n); }

}  // namespace

MixedComplex realize(const DecompositionReport& r, const DecManifold& X)
{
    if (X.n != r.x)
        throw InvalidParameter("base dimension does not match the report");
    if (!X.closed)
        throw UnsupportedCase("realization needs a closed base");
    const SymComplex& c = r.transferred;
    auto side_of = [](const SymSlot& s) { return s.row == "bot"; };
    auto xcells = [&](bool dual, int k) { return dual ? X.ndual(k) : X.ncells(k); };

    ComplexBuilder<Rat> b;
    for (auto& s : c.slots) {
        if (s.kind == 'Z') {
            for (int k = 0; k <= X.n; ++k)
                b.add_z(s.name + "#" + sub(k), s.degree + k, xcells(side_of(s), k) * s.dim);
        } else {
            b.add_r(s.name, s.degree, xcells(side_of(s), s.xdeg) * s.dim);
        }
    }
    std::map<std::pair<std::string, std::string>, RatMatrix> rr, zr;
    auto acc = [](std::map<std::pair<std::string, std::string>, RatMatrix>& m, const std::string& a,
                  const std::string& t, const RatMatrix& v) {
        auto it = m.find({a, t});
        if (it == m.end())
            m.emplace(std::make_pair(a, t), v);
        else
            it->second += v;
    };
    // outgoing blocks per slot
    std::multimap<std::size_t, std::pair<std::size_t, const SymBlock*>> out;
    for (auto& [k, blk] : c.d)
        out.emplace(k.first, std::make_pair(k.second, &blk));

    for (std::size_t i = 0; i < c.slots.size(); ++i) {
        const SymSlot& s = c.slots[i];
        if (s.kind == 'Z')
            continue;
        auto [lo, hi] = out.equal_range(i);
        for (auto it = lo; it != hi; ++it) {
            const SymSlot& t = c.slots[it->second.first];
            for (auto& term : it->second.second->terms) {
                Side sd{side_of(s), s.xdeg};
                const RatMatrix op = realize_word(X, sd, term.word);
                if (sd.dual != side_of(t) || sd.deg != t.xdeg)
                    throw std::logic_error("operator word lands outside its target on " + s.name + " -> " + t.name);
                acc(rr, s.name, t.name, kron(op, term.coeff));
            }
        }
    }

    // lattice rows: integer cochains with the image of each cochain degree propagated along the transfer
    struct Target {
        std::size_t slot;
        std::string word;
        RatMatrix coeff;
    };
    for (std::size_t i = 0; i < c.slots.size(); ++i) {
        const SymSlot& s = c.slots[i];
        if (s.kind != 'Z')
            continue;
        const bool dual = side_of(s);
        for (int k = 0; k < X.n; ++k) {
            const IntMatrix dz = dual ? X.dual_dz(k) : X.dz(k);
            b.zz(s.name + "#" + sub(k), s.name + "#" + sub(k + 1), IntMatrix(-kron(dz, int_eye(s.dim))));
        }
        std::vector<Target> f;
        auto [lo, hi] = out.equal_range(i);
        for (auto it = lo; it != hi; ++it)
            for (auto& term : it->second.second->terms)
                f.push_back({it->second.first, term.word, term.coeff});
        for (int k = 0; k <= X.n && !f.empty(); ++k) {
            std::vector<Target> next;
            for (auto& tg : f) {
                const SymSlot& t = c.slots[tg.slot];
                Side sd{dual, k};
                const RatMatrix op = realize_word(X, sd, tg.word);
                if (sd.dual != side_of(t) || sd.deg != t.xdeg)
                    throw std::logic_error("lattice map lands outside its target " + t.name);
                if (k + 1 + s.degree != t.degree)
                    throw std::logic_error("lattice map has the wrong degree");
                acc(zr, s.name + "#" + sub(k), t.name, kron(op, tg.coeff));
                auto [l2, h2] = out.equal_range(tg.slot);
                for (auto it = l2; it != h2; ++it)
                    for (auto& term : it->second.second->terms) {
                        const std::string w = tg.word + term.word;
                        if (w.empty() || w[0] != 'd')
                            throw std::logic_error("cannot propagate the lattice map through " + t.name);
                        auto red = c.base.reduce(k + 1, w.substr(1));
                        if (red.sign)
                            next.push_back({it->second.first, red.word,
                                            RatMatrix(scaled(Rat(red.sign), term.coeff) * tg.coeff)});
                    }
            }
            f = std::move(next);
        }
    }
    for (auto& [k, m] : rr)
        b.rr(k.first, k.second, m);
    for (auto& [k, m] : zr)
        b.zr(k.first, k.second, m);

    for (auto& s : r.summands) {
        if (s.kind != FamilyKind::Torsion)
            continue;
        const bool dual = s.row == "bot";
        const int deg = s.slots.at(0).degree;
        for (std::size_t t = 0; t < s.group.torsion.size(); ++t) {
            const std::string pre = "tors." + s.row + "[" + sub(s.ell) + "," + sub(int(t)) + "]";
            const Int ord = s.group.torsion[t];
            for (int k = 0; k <= X.n; ++k) {
                b.add_z(pre + "P#" + sub(k), deg - 1 + k, xcells(dual, k));
                b.add_z(pre + "Q#" + sub(k), deg + k, xcells(dual, k));
            }
            for (int k = 0; k <= X.n; ++k) {
                IntMatrix m = int_eye(xcells(dual, k));
                m *= ord;
                b.zz(pre + "P#" + sub(k), pre + "Q#" + sub(k), m);
                if (k < X.n) {
                    const IntMatrix dz = dual ? X.dual_dz(k) : X.dz(k);
                    b.zz(pre + "P#" + sub(k), pre + "P#" + sub(k + 1), IntMatrix(-dz));
                    b.zz(pre + "Q#" + sub(k), pre + "Q#" + sub(k + 1), dz);
                }
            }
        }
    }
    MixedComplex out_c = b.build();
    std::string why;
    if (!out_c.square_zero(&why))
        throw std::logic_error("realized complex does not square to zero: " + why);
    return out_c;
}

// ---- serialization ----

namespace {

nlohmann::ordered_json matrix_json(const RatMatrix& m)
{
    auto a = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::ordered_json::array();
        for (std::size_t j = 0; j < m.cols(); ++j)
            row.push_back(rat_str(m(i, j)));
        a.push_back(row);
    }
    return a;
}

nlohmann::ordered_json arrow_json(const SkeletonArrow& a)
{
    return {{"from", a.from.str()}, {"to", a.to.str()}, {"label", a.label}};
}

double finite(double v) { return std::isfinite(v) ? v : -1; }

}  // namespace

std::string to_json(const DecompositionReport& r)
{
    nlohmann::ordered_json j;
    j["x"] = r.x;
    j["y"] = r.y;
    j["p"] = r.p;
    j["n"] = r.n;
    j["kappa"] = rat_str(r.kappa);
    j["e"] = rat_str(r.e);
    j["full"] = r.full;
    j["fiber"] = r.fiber;
    auto sums = nlohmann::ordered_json::array();
    for (auto& s : r.summands) {
        nlohmann::ordered_json o;
        o["kind"] = to_string(s.kind);
        o["label"] = s.label();
        o["row"] = s.row;
        o["ell"] = s.ell;
        o["form_degree"] = s.form_degree;
        o["shift"] = s.shift;
        o["group"] = s.group.str();
        o["rank"] = s.rank;
        if (s.K.rows())
            o["K"] = matrix_json(s.K);
        if (s.E.rows())
            o["E"] = matrix_json(s.E);
        auto sl = nlohmann::ordered_json::array();
        for (auto& x : s.slots)
            sl.push_back(x.str());
        o["slots"] = sl;
        auto ar = nlohmann::ordered_json::array();
        for (auto& a : s.arrows)
            ar.push_back(arrow_json(a));
        o["arrows"] = ar;
        auto ex = nlohmann::ordered_json::array();
        for (auto& a : s.extra)
            ex.push_back(arrow_json(a));
        o["extra"] = ex;
        sums.push_back(o);
    }
    j["summands"] = sums;
    nlohmann::ordered_json res;
    res["regime"] = r.residual.regime;
    res["acyclic"] = r.residual.acyclic;
    res["min_singular"] = finite(r.residual.min_singular);
    auto blocks = nlohmann::ordered_json::array();
    for (auto& b : r.residual.blocks)
        blocks.push_back({{"ell", b.ell},
                          {"top_xdeg", b.top_xdeg},
                          {"bot_xdeg", b.bot_xdeg},
                          {"bot_ydeg", b.bot_ydeg},
                          {"dim", b.dim},
                          {"min_singular", finite(b.min_singular)}});
    res["blocks"] = blocks;
    res["words"] = r.residual.words;
    j["residual"] = res;
    j["nilpotency"] = r.nilpotency;
    j["off_family"] = r.off_family;
    j["notes"] = r.notes;
    auto ranks = nlohmann::ordered_json::array();
    for (auto& [d, v] : r.ranks_transferred)
        ranks.push_back({{"degree", d}, {"transferred", v}, {"summands", r.ranks_summands.count(d) ? r.ranks_summands.at(d) : 0}});
    j["ranks"] = ranks;
    return j.dump(2);
}

std::string to_markdown(const DecompositionReport& r)
{
    std::ostringstream os;
    os << "## Pushforward along X^" << r.x << " × " << r.fiber << " → X (p = " << r.p << ", κ = " << r.kappa;
    if (r.full)
        os << ", e = " << r.e;
    os << ")\n\n| family | slots | arrows | couplings |\n|---|---|---|---|\n";
    for (auto& s : r.summands) {
        os << "| " << s.label() << " | ";
        for (std::size_t i = 0; i < s.slots.size(); ++i)
            os << (i ? "<br>" : "") << s.slots[i].str();
        os << " | ";
        for (std::size_t i = 0; i < s.arrows.size() + s.extra.size(); ++i) {
            const auto& a = i < s.arrows.size() ? s.arrows[i] : s.extra[i - s.arrows.size()];
            os << (i ? "<br>" : "") << a.label << ": " << a.from.str() << " → " << a.to.str();
        }
        os << " | ";
        if (s.K.rows())
            os << "K = " << s.K << " ";
        if (s.E.rows())
            os << "E = " << s.E;
        os << " |\n";
    }
    os << "\nResidual T_K → B_K (" << r.residual.regime << "): " << (r.residual.acyclic ? "acyclic" : "not acyclic")
       << ", min singular value " << r.residual.min_singular << "\n";
    for (auto& n : r.notes)
        os << "- " << n << "\n";
    return os.str();
}

}  // namespace mxw
