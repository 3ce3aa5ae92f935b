#pragma once

#include "mxw/exact_algebra.hpp"
#include "mxw/linalg.hpp"

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mxw {

struct InvalidComplex : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotChainMap : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotExact : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SignError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonDiscreteLattice : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MixedTerm {
    std::size_t z_rank = 0, r_dim = 0;
    friend bool operator==(const MixedTerm&, const MixedTerm&) = default;
};

// Named sub-block of a term; models are assembled and inspected through these.
struct Piece {
    std::string name;
    std::size_t offset = 0, size = 0;
};

// Degree-wise terms Z^k (lattice) + R^k (real), differential blocks
//   zz: Z^k -> Z^{k+1},  zr: Z^k -> R^{k+1},  rr: R^k -> R^{k+1}.
template <class S>
struct MixedComplexT {
    int lo = 0, hi = -1;
    std::vector<MixedTerm> terms;
    std::vector<IntMatrix> zz;
    std::vector<Matrix<S>> zr, rr;
    std::vector<std::vector<Piece>> zpieces, rpieces;
    // Optional continuation of truncated rows (R^k -> W_k); used to count discrete stand-ins.
    std::vector<Matrix<S>> standin;

    bool in_range(int k) const { return k >= lo && k <= hi; }
    MixedTerm term(int k) const { return in_range(k) ? terms[k - lo] : MixedTerm{}; }
    IntMatrix d_zz(int k) const;
    Matrix<S> d_zr(int k) const;
    Matrix<S> d_rr(int k) const;
    std::optional<Piece> zpiece(int k, const std::string& name) const;
    std::optional<Piece> rpiece(int k, const std::string& name) const;
    // Degree of a named piece, searching both kinds.
    std::optional<std::pair<int, bool>> locate(const std::string& name) const;

    void validate() const;
    bool square_zero(std::string* why = nullptr) const;
};

using MixedComplex = MixedComplexT<Rat>;
using FloatMixedComplex = MixedComplexT<double>;

FloatMixedComplex to_float(const MixedComplex& c);

template <class S>
class ComplexBuilder {
public:
    void add_z(const std::string& name, int degree, std::size_t dim);
    void add_r(const std::string& name, int degree, std::size_t dim);
    bool has(const std::string& name) const { return pieces_.count(name) > 0; }
    int degree(const std::string& name) const { return pieces_.at(name).degree; }
    std::size_t dim(const std::string& name) const { return pieces_.at(name).dim; }

    void zz(const std::string& from, const std::string& to, const IntMatrix& m);
    void zr(const std::string& from, const std::string& to, const Matrix<S>& m);
    void rr(const std::string& from, const std::string& to, const Matrix<S>& m);
    void standin(const std::string& from, const Matrix<S>& m);

    MixedComplexT<S> build(bool validate = true) const;

private:
    struct P {
        int degree;
        bool integral;
        std::size_t dim;
        std::size_t order;
    };
    struct M {
        std::string from, to;
        int kind;  // 0 zz, 1 zr, 2 rr
        IntMatrix zm;
        Matrix<S> m;
    };
    const P& get(const std::string& name) const;
    std::map<std::string, P> pieces_;
    std::vector<std::string> order_;
    std::vector<M> maps_;
    std::vector<std::pair<std::string, Matrix<S>>> standins_;
};

template <class S>
struct ChainMapT {
    std::shared_ptr<const MixedComplexT<S>> src, tgt;
    std::map<int, IntMatrix> fzz;
    std::map<int, Matrix<S>> fzr, frr;

    IntMatrix zz(int k) const;
    Matrix<S> zr(int k) const;
    Matrix<S> rr(int k) const;
    bool verify(std::string* why = nullptr) const;
    // Apply in degree k to an element (z, r).
    std::pair<IntMatrix, Matrix<S>> apply(int k, const IntMatrix& z, const Matrix<S>& r) const;
};

using ChainMap = ChainMapT<Rat>;

template <class S>
ChainMapT<S> compose(const ChainMapT<S>& g, const ChainMapT<S>& f);
template <class S>
ChainMapT<S> identity_map(std::shared_ptr<const MixedComplexT<S>> c);
template <class S>
ChainMapT<S> zero_map(std::shared_ptr<const MixedComplexT<S>> src, std::shared_ptr<const MixedComplexT<S>> tgt);

template <class S>
class ChainMapBuilder {
public:
    ChainMapBuilder(std::shared_ptr<const MixedComplexT<S>> src, std::shared_ptr<const MixedComplexT<S>> tgt);
    void zz(const std::string& from, const std::string& to, const IntMatrix& m);
    void zr(const std::string& from, const std::string& to, const Matrix<S>& m);
    void rr(const std::string& from, const std::string& to, const Matrix<S>& m);
    ChainMapT<S> build() const { return f_; }

private:
    ChainMapT<S> f_;
};

template <class S>
struct Cone {
    std::shared_ptr<const MixedComplexT<S>> complex;
    ChainMapT<S> inclusion;   // target -> cone
    ChainMapT<S> projection;  // cone -> source[1]
};

// d(b, a) = (d b + f(a), -d a); pieces are prefixed "tgt:" and "src:".
template <class S>
Cone<S> cone(const ChainMapT<S>& f);

// C[k]^j = C^{j+k} with differential (-1)^k d.
template <class S>
MixedComplexT<S> shift(const MixedComplexT<S>& c, int k);

template <class S>
MixedComplexT<S> direct_sum(const std::vector<MixedComplexT<S>>& cs);

// C ⊗^L G: free_rank copies of C plus cone(d_i * id) for each torsion order.
template <class S>
MixedComplexT<S> tensor_with_group(const MixedComplexT<S>& c, const FgAbGroup& g);

// First-quadrant style double complex of real spaces; C^{i,j} sits in total degree i + j.
template <class S>
struct DoubleComplexT {
    int i0 = 0, j0 = 0;
    std::vector<std::vector<std::size_t>> dims;  // [i][j]
    std::vector<std::vector<Matrix<S>>> v;       // C^{i,j} -> C^{i,j+1}
    std::vector<std::vector<Matrix<S>>> h;       // C^{i,j} -> C^{i+1,j}
    bool anticommuting = false;                  // squares commute unless set

    std::size_t ncols() const { return dims.size(); }
    std::size_t nrows() const { return dims.empty() ? 0 : dims[0].size(); }
    std::size_t dim(int i, int j) const;
    Matrix<S> vert(int i, int j) const;
    Matrix<S> horiz(int i, int j) const;
    // sign applied to v in the totalization
    int vsign(int i) const { return anticommuting ? 1 : ((i - i0) % 2 == 0 ? 1 : -1); }
};

template <class S>
MixedComplexT<S> total_complex(const DoubleComplexT<S>& dc);

struct StructuredAbGroup {
    std::size_t real_dim = 0, torus_dim = 0, free_rank = 0;
    std::vector<Int> torsion;
    std::size_t standin_dim = 0;  // part of real_dim coming from truncation stand-ins

    bool trivial() const { return real_dim == 0 && torus_dim == 0 && free_rank == 0 && torsion.empty(); }
    // "ℝ^a ⊕ T^t ⊕ ℤ^b ⊕ ℤ/d…"; elide drops the stand-in dimensions
    std::string str(bool elide_standins = false) const;
    bool same_group(const StructuredAbGroup& o) const
    {
        return real_dim == o.real_dim && torus_dim == o.torus_dim && free_rank == o.free_rank &&
               torsion == o.torsion;
    }
};

// Integral part at one degree: H^k of the Z-quotient complex with explicit generators.
struct ZDegree {
    IntMatrix free_gens, tors_gens;
    std::vector<Int> tors_orders;
    IntMatrix free_coord, tors_coord;  // cocycle -> coordinates
    FgAbGroup group() const;
};

// Real part at one degree: H^k of the R-subcomplex.
template <class S>
struct RDegree {
    Matrix<S> reps;   // r_k x h
    Matrix<S> coord;  // h x r_k, kills im(rr_{k-1})
};

// Lattice map E_k: H^{k-1}(Z)_free -> H^k(R) and its integer kernel.
template <class S>
struct Connecting {
    Matrix<S> E;
    IntMatrix W, Winv;  // unimodular; first (b - t) columns span ker E
    Matrix<S> lattice;  // h_k x t basis of the image lattice
    std::size_t t = 0;
};

template <class S>
struct ClassCoords {
    Matrix<S> real;       // in H^k(R), defined mod the torus lattice
    IntMatrix discrete;   // free coordinates (ker E_{k+1} basis) then torsion residues
};

template <class S>
class CohomologyT {
public:
    explicit CohomologyT(std::shared_ptr<const MixedComplexT<S>> c);

    StructuredAbGroup group(int k);
    const ZDegree& z(int k);
    const RDegree<S>& r(int k);
    const Connecting<S>& conn(int k);
    // Discrete generators of H^k as cocycles (z, r): ker-lifts then torsion lifts.
    const std::pair<IntMatrix, Matrix<S>>& discrete_lifts(int k);
    std::size_t discrete_free(int k);  // rank of ker E_{k+1}
    std::vector<Int> discrete_torsion(int k) { return z(k).tors_orders; }
    FgAbGroup discrete_group(int k);
    ClassCoords<S> coordinates(int k, const IntMatrix& zc, const Matrix<S>& rc);
    const MixedComplexT<S>& complex() const { return *c_; }

private:
    std::shared_ptr<const MixedComplexT<S>> c_;
    std::map<int, ZDegree> z_;
    std::map<int, RDegree<S>> r_;
    std::map<int, Connecting<S>> conn_;
    std::map<int, std::pair<IntMatrix, Matrix<S>>> lifts_;
};

using Cohomology = CohomologyT<Rat>;

template <class S>
StructuredAbGroup cohomology(const MixedComplexT<S>& c, int k);
template <class S>
std::vector<StructuredAbGroup> cohomology_all(const MixedComplexT<S>& c);

struct QuasiIsoReport {
    bool iso = true;
    std::vector<std::string> failures;
};

template <class S>
QuasiIsoReport quasi_iso_report(const ChainMapT<S>& f);
template <class S>
bool is_quasi_iso(const ChainMapT<S>& f);

// Induced map on structured cohomology in generator coordinates:
//   real part (h' x h), discrete-into-real part (h' x m), discrete part (m' x m).
template <class S>
struct StructuredMap {
    Matrix<S> real, mixed;
    IntMatrix discrete;
};

template <class S>
StructuredMap<S> induced_map(const ChainMapT<S>& f, CohomologyT<S>& src, CohomologyT<S>& tgt, int k);

struct LesNode {
    int degree;
    char which;  // 'A' sub, 'B' total, 'C' quotient
    StructuredAbGroup group;
};

template <class S>
struct LongExactSequence {
    std::vector<LesNode> nodes;
    std::map<int, StructuredMap<S>> connecting;  // H^k(C) -> H^{k+1}(A)
    bool exact = true;
    std::vector<std::string> failures;
};

template <class S>
LongExactSequence<S> les_of_ses(std::shared_ptr<const MixedComplexT<S>> sub,
                                std::shared_ptr<const MixedComplexT<S>> total,
                                std::shared_ptr<const MixedComplexT<S>> quot, const ChainMapT<S>& i,
                                const ChainMapT<S>& q);

// Conjugate a complex by block-invertible changes of basis (unimodular on Z, invertible on R),
// one pair per degree.
template <class S>
MixedComplexT<S> conjugate(const MixedComplexT<S>& c, const std::vector<IntMatrix>& zbasis,
                           const std::vector<Matrix<S>>& rbasis);

}  // namespace mxw
