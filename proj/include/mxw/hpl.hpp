#pragma once

#include "mxw/complexes.hpp"
#include "mxw/dec_manifold.hpp"

#include <map>
#include <memory>
#include <stdexcept>
#include <vector>

namespace mxw {

struct RetractInvalid : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotSquareZero : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Max residuals of the retract identities (0 means exact).
struct RetractCheck {
    double chain = 0;      // ι, π commute with the differentials
    double pi_iota = 0;    // π ι - 1
    double homotopy = 0;   // ι π - 1 - d η - η d
    double side = 0;       // η ι, π η, η η
    bool ok(double tol = 0) const { return chain <= tol && pi_iota <= tol && homotopy <= tol; }
    bool side_ok(double tol = 0) const { return side <= tol; }
};

// Homotopy equivalence between real complexes (only the R parts are used):
//   π ι = 1_S,  ι π = 1_B + d_B η + η d_B.
// iota[k] : S^k -> B^k, pi[k] : B^k -> S^k, eta[k] : B^k -> B^{k-1}.
template <class S>
struct RetractT {
    std::shared_ptr<const MixedComplexT<S>> small, big;
    std::map<int, Matrix<S>> iota, pi, eta;

    Matrix<S> i(int k) const;
    Matrix<S> p(int k) const;
    Matrix<S> h(int k) const;
    RetractCheck check() const;
};
using Retract = RetractT<Rat>;
using FloatRetract = RetractT<double>;

// delta[k] : B^k -> B^{k+1}
template <class S>
struct PerturbationT {
    std::map<int, Matrix<S>> delta;
    Matrix<S> at(const MixedComplexT<S>& big, int k) const;
};

enum class SmallnessKind { Nilpotent, Invertible, NotSmall };

template <class S>
struct SmallnessCertificate {
    SmallnessKind kind = SmallnessKind::Nilpotent;
    int order = 0;                       // nilpotency order of δη (Nilpotent)
    std::map<int, Matrix<S>> inverse;    // (1 - δη)^{-1} per degree (Nilpotent, Invertible)
    int degree = 0;                      // where 1 - δη is singular (NotSmall)
    Matrix<S> witness;                   // kernel vector of 1 - δη (NotSmall)
};

template <class S>
SmallnessCertificate<S> smallness_certificate(const RetractT<S>& r, const PerturbationT<S>& d);

// Perturbed retract for (B, d_B + δ); throws NotSquareZero, NotSmall.
template <class S>
RetractT<S> perturb(const RetractT<S>& r, const PerturbationT<S>& d);

// η -> (1 - ιπ) η (1 - ιπ), then -η d η, giving η ι = 0, π η = 0, η η = 0.
template <class S>
RetractT<S> normalize_side_conditions(const RetractT<S>& r);

// Retract of a real complex onto its cohomology with η = -d^+ (Moore-Penrose, standard inner product).
template <class S>
RetractT<S> harmonic_retract(std::shared_ptr<const MixedComplexT<S>> c);

// Column i of a double complex as a complex in degrees j (pieces "C(i,j)").
template <class S>
MixedComplexT<S> column_complex(const DoubleComplexT<S>& dc, int i);

template <class S>
struct StaircaseResult {
    RetractT<S> retract;  // from the transferred complex to Tot(dc); small pieces "H(i,j)"
    int nilpotency = 0;   // order of h η
};

// Column retracts (one per column, onto any small complex) are assembled on the totalization and
// perturbed by the horizontal differential; throws RetractInvalid.
template <class S>
StaircaseResult<S> staircase_transfer(const DoubleComplexT<S>& dc, const std::vector<RetractT<S>>& columns);

// Retract of the truncated complex C^0 -> ... -> C^l of m onto harmonic forms in degrees < l and
// H^l ⊕ K^l in degree l (pieces "H<k>", "K<l>"; big pieces "W<k>"). Throws ToleranceExceeded.
template <class S>
RetractT<S> hodge_retract(const DecManifold& m, int l, const HodgeData<S>* h = nullptr);

}  // namespace mxw
