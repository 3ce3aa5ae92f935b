#pragma once

#include "mxw/complexes.hpp"
#include "mxw/dec_manifold.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mxw {

struct ZeroCoupling : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SingularMatrix : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotCocycle : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DegreeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Failure of the integral lift in one degree. cls maps integer cocycles of the source (columns,
// integer kernel basis) to the target real term; it is nonzero modulo the image of the target
// differential.
struct Obstruction {
    int degree = 0;
    IntMatrix cocycles;
    RatMatrix cls;
};

struct Obstructed : std::runtime_error {
    Obstruction obstruction;
    explicit Obstructed(Obstruction o)
        : std::runtime_error("integral lift obstructed in degree " + std::to_string(o.degree)),
          obstruction(std::move(o))
    {
    }
};

// Coupling data. Scalar couplings are used unless K / E are set (rank r theories).
struct TheoryParams {
    int p = 0, n = 0;
    Rat kappa = 1, e = 1, m = 1, lambda = 1;
    RatMatrix K, E;

    std::size_t rank() const { return K.rows() ? K.rows() : (E.rows() ? E.rows() : 1); }
    RatMatrix Kmat() const;
    RatMatrix Emat() const;
    void validate() const;
    void validate(const DecManifold& m) const;
    std::string str() const;
};

// Element of a model in one degree (column vectors on Z^k and R^k).
struct FieldConfiguration {
    int degree = 0;
    IntMatrix z;
    RatMatrix r;

    static FieldConfiguration zero(const MixedComplex& c, int degree);
    IntMatrix zblock(const MixedComplex& c, const std::string& piece) const;
    RatMatrix rblock(const MixedComplex& c, const std::string& piece) const;
    void set_z(const MixedComplex& c, const std::string& piece, const IntMatrix& v);
    void set_r(const MixedComplex& c, const std::string& piece, const RatMatrix& v);
    bool is_cocycle(const MixedComplex& c) const;
    // c + d(x), x of degree one lower
    FieldConfiguration plus_coboundary(const MixedComplex& c, const FieldConfiguration& x) const;
};

using ComplexPtr = std::shared_ptr<const MixedComplex>;

struct LiftOptions {
    // inner products on Z^k (as real vectors) selecting the pseudoinverse; identity if absent
    std::map<int, RatMatrix> zmetric;
};

// Extend partial (rr blocks, optional zr starting guesses) to a chain map into a real-only target.
std::variant<ChainMap, Obstruction> lift_chain_map(const ChainMap& partial, const LiftOptions& opt = {});
// Throws Obstructed.
ChainMap lift_or_throw(const ChainMap& partial, const LiftOptions& opt = {});

// S ⊕ T[-1] with d(s, t) = (d s, f(s) - d t); piece names of S and T are kept.
MixedComplex fiber(const ChainMap& f);

// Integer cellular cochains of M (primal or dual cells) as a Z-only complex.
MixedComplex integer_cochains(const DecManifold& m, bool dual = false);

MixedComplex build_bun_nabla(const DecManifold& m, int p);
// Full Deligne complex with Ω^p in degree 0 (abelian Chern-Simons fields for p = 1, n = 3).
MixedComplex build_flat(const DecManifold& m, int p = 1);
MixedComplex build_maxwell(const DecManifold& m, const TheoryParams& t);
MixedComplex build_maxwell_pert(const DecManifold& m, const TheoryParams& t);
MixedComplex build_maxwell_tilde(const DecManifold& m, const TheoryParams& t);
MixedComplex build_T(const DecManifold& m, int p, const Rat& mm, const Rat& e, const Rat& lambda,
                     const Rat& kappa);
MixedComplex build_T(const DecManifold& m, const TheoryParams& t);
MixedComplex build_maxwell_circ(const DecManifold& m, const TheoryParams& t);
MixedComplex build_higher_rank(const DecManifold& m, int p, const RatMatrix& K, const RatMatrix& E);
MixedComplex build_mxwbf(const DecManifold& m, const TheoryParams& t);

// Mxw°⟨κ,e⟩ -> Mxw̃⟨κ⟩, sending the bottom integral row into the real resolution by e.
ChainMap circ_to_tilde(const DecManifold& m, const TheoryParams& t, ComplexPtr circ, ComplexPtr tilde);
// Mxw̃⟨κ⟩ -> Mxw⟨κ⟩, a quasi-isomorphism.
ChainMap tilde_to_maxwell(const DecManifold& m, const TheoryParams& t, ComplexPtr tilde, ComplexPtr mxw);

// perturbative part ↪ Mxw° ↠ charge complex Z^{p+1}(M) ⊕ Z^{n-p-1}(M*) resolutions
struct ChargeSequence {
    ComplexPtr sub, total, quot;
    ChainMap incl, proj;
};
ChargeSequence charge_sequence(const DecManifold& m, const TheoryParams& t);

struct IntegralClass {
    int degree = 0;
    FgAbGroup group;
    IntMatrix coords;  // free coordinates then torsion residues
    bool is_zero() const;
};

struct Charges {
    IntegralClass magnetic, electric;
};

// Charges of a degree-0 cocycle of build_maxwell_circ / build_T / build_higher_rank.
Charges charges(const DecManifold& m, const TheoryParams& t, const MixedComplex& model,
                const FieldConfiguration& c);

// A degree-0 cocycle of Mxw° whose magnetic charge is the given integer (p+1)-cocycle.
FieldConfiguration magnetic_sector(const DecManifold& m, const TheoryParams& t, const MixedComplex& model,
                                   const IntMatrix& cocycle);

// g^{<N, c>} in R/Z: cycle is an integral (p+1)-cycle (a submanifold of codimension n-p-1) paired
// with the magnetic charge; g is given by a representative in R.
Rat symmetry_pairing(const DecManifold& m, const TheoryParams& t, const MixedComplex& model,
                     const IntMatrix& cycle, const Rat& g, const FieldConfiguration& c);

// BV pairing on build_maxwell_pert(m, t) between degrees k and 1 - k.
RatMatrix bv_pairing_matrix(const DecManifold& m, const TheoryParams& t, const MixedComplex& pert, int k);
Rat bv_pairing(const DecManifold& m, const TheoryParams& t, const MixedComplex& pert, const FieldConfiguration& a,
               const FieldConfiguration& b);
// sum over degrees of <A_k, Q A_{-k}>
Rat bv_action(const DecManifold& m, const TheoryParams& t, const MixedComplex& pert,
              const std::vector<FieldConfiguration>& field);

}  // namespace mxw
