#pragma once

#include "mxw/maxwell_models.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mxw {

struct InvariantMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NotInvertible : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SignSolveFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A chain map with a certified inverse.
struct ComplexIso {
    ChainMap fwd, inv;
    std::map<std::string, int> signs;  // sign chosen per source piece (empty if none were solved)
};

// Source piece sent to a target piece by a fixed block; the overall sign may still be solved.
struct PieceMap {
    std::string from, to;
    RatMatrix block;
};

// Assign a sign to each PieceMap so that the result is a chain map. Throws SignSolveFailure with
// the offending blocks when no assignment exists.
std::map<std::string, int> solve_piece_signs(ComplexPtr src, ComplexPtr tgt, const std::vector<PieceMap>& maps);
ChainMap assemble_piece_map(ComplexPtr src, ComplexPtr tgt, const std::vector<PieceMap>& maps,
                            const std::map<std::string, int>& signs = {});

// Degreewise inverse of a map that is invertible on every term (unimodular on Z). NotInvertible otherwise.
ChainMap invert(const ChainMap& f);

struct IsoReport {
    bool chain_map = false, composites_identity = false, cohomology_iso = false;
    std::vector<std::string> failures;
    bool ok() const { return chain_map && composites_identity && cohomology_iso; }
};
IsoReport verify_iso(const ComplexIso& f);

// Nonzero blocks of f∘d - d∘f as "degree k: a -> b" strings.
std::vector<std::string> chain_map_defects(const ChainMap& f);

// ---- scaling groupoid of T⟨m,e,λ,κ⟩ ----

enum class ScalingMove { TopForms, BottomForms, Corner };

Rat scaling_invariant(const TheoryParams& t);  // eκ/(mλ)
// Multiplying the top forms by s sends (m, λ) to (s m, λ/s), the bottom forms (e, κ) to (s e, κ/s),
// the corner (λ, κ) to (s λ, s κ). The default s is 1/m, 1/e or 1/λ respectively.
TheoryParams scaling_move_target(const TheoryParams& t, ScalingMove g, std::optional<Rat> s = {});
ComplexIso scaling_move(const DecManifold& m, const TheoryParams& t, ScalingMove g, std::optional<Rat> s = {});
// Composite of generator moves T⟨from⟩ -> T⟨1,1,1,inv⟩ -> T⟨to⟩. Scalar couplings only.
ComplexIso scaling_iso(const DecManifold& m, const TheoryParams& from, const TheoryParams& to);

// ---- abelian duality ----

// Mxw°_{p}⟨κ,e⟩ on M  ->  Mxw°_{n-p-2}⟨1/κ,1/e⟩ on M*; for rank r couplings ⟨E⁻¹K⁻¹E, E⁻¹⟩.
TheoryParams duality_target(const TheoryParams& t);

struct DualityIso {
    ComplexIso iso;
    TheoryParams source, target;
    DecManifold target_space;
    bool self_dual = false;  // target couplings and degree equal the source ones
};
DualityIso duality_iso(const DecManifold& m, const TheoryParams& t);

struct InvolutionReport {
    bool target_matches_source = false;  // twice-dualized model equals the original as data
    std::vector<std::pair<std::string, Rat>> block_scalars;  // composite block on each piece, as a multiple of 1
    bool blockwise_scalar = false;  // every block is a multiple of the identity
    bool signs_only = false;        // every multiple is ±1
    bool global_sign = false;       // one common sign
    int sign = 0;
    IsoReport composite;
};
InvolutionReport involution_check(const DecManifold& m, const TheoryParams& t);

// Copy of f with the block on one source piece negated (fault injection).
ComplexIso flip_piece_sign(const ComplexIso& f, const std::string& piece);

}  // namespace mxw
