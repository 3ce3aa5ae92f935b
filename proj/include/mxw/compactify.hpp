#pragma once

#include "mxw/hpl.hpp"
#include "mxw/maxwell_models.hpp"

#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mxw {

struct AcyclicityFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PatternMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedCase : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SingularBlock : std::runtime_error {
    std::string location;
    double min_singular = 0;
    SingularBlock(std::string loc, double s);
};

// Operators on the base X are words in d = d_X and s = ⋆_X, applied left to right, so "ds" is ⋆_X d_X.
// Source degree -1 stands for locally constant functions (d kills them, ⋆ sends them to top forms).
struct SymbolicBase {
    int x = 0;

    struct Reduced {
        int sign = 0;  // 0: the word vanishes
        std::string word;
        int target = -1;
    };
    Reduced reduce(int j, const std::string& word) const;
    void validate() const;
};

// "ds" -> "⋆d", "" -> "1"
std::string word_label(const std::string& word);

struct SymTerm {
    std::string word;
    RatMatrix coeff;
};

// Sum of (operator on X) ⊗ (matrix on coefficient spaces).
struct SymBlock {
    std::vector<SymTerm> terms;

    void add(const std::string& word, const RatMatrix& coeff);
    void add(const SymBlock& o);
    bool is_zero() const { return terms.empty(); }
    const RatMatrix* coeff(const std::string& word) const;
    double max_abs() const;
    std::string str() const;
};

struct SymSlot {
    std::string name;
    std::string row;  // "top" or "bot"
    char kind = 'C';  // C cochains of Y, H harmonic, K coclosed, Z lattice H^l(Y, Z)_free
    int degree = 0;
    int xdeg = 0;     // -1 on lattice slots
    int ydeg = 0;
    std::size_t dim = 0;
};

using SymMap = std::map<std::pair<std::size_t, std::size_t>, SymBlock>;

struct SymComplex {
    SymbolicBase base;
    std::vector<SymSlot> slots;
    SymMap d;

    std::size_t add_slot(SymSlot s);
    std::size_t index(const std::string& name) const;
    bool has(const std::string& name) const;
    const SymBlock* block(const std::string& from, const std::string& to) const;
    // nonzero blocks of d∘d
    std::vector<std::string> square_defects() const;
    // total coefficient dimension per degree
    std::map<int, std::size_t> ranks() const;
};

enum class FamilyKind { Maxwell, Deligne, DeRham, Torsion, Lattice };
std::string to_string(FamilyKind k);

struct SkeletonSlot {
    std::string row;
    bool integral = false;
    int xdeg = 0, ydeg = 0, degree = 0;

    auto operator<=>(const SkeletonSlot&) const = default;
    std::string str() const;  // "Ω^1_X ⊗ H^0(Y) [top, 0]"
};

struct SkeletonArrow {
    SkeletonSlot from, to;
    std::string label;  // d, -κd, ⋆d, E, eE, ⋆E

    auto operator<=>(const SkeletonArrow&) const = default;
};

struct Summand {
    FamilyKind kind = FamilyKind::Maxwell;
    std::string row;  // for de Rham, Deligne, torsion and lattice summands
    int ell = 0;      // Y-degree of the coefficient group (top row degree for Maxwell)
    int form_degree = 0;
    int shift = 0;
    FgAbGroup group;
    std::size_t rank = 0;
    RatMatrix K, E, top_lattice;
    std::vector<std::string> slot_names;
    std::vector<SkeletonSlot> slots;
    std::vector<SkeletonArrow> arrows;
    // arrows present in the pushforward that the family list of the decomposition leaves out
    std::vector<SkeletonArrow> extra;

    std::string label() const;
};

struct KBlock {
    int ell = 0;
    int top_xdeg = 0, bot_xdeg = 0, bot_ydeg = 0;
    std::size_t dim = 0;
    double min_singular = 0;
};

struct AcyclicityCertificate {
    std::string regime;  // "p < y" or "y <= p"
    std::vector<KBlock> blocks;
    double min_singular = std::numeric_limits<double>::infinity();
    std::vector<std::string> words;  // X-operators on the transferred T_K -> B_K blocks
    bool acyclic = false;
};

// The two-column complex T_K -> B_K built from ⋆d_Y on coclosed forms.
AcyclicityCertificate verify_tk_bk_acyclic(const DecManifold& Y, int p, int x);

struct DecompositionReport {
    int x = 0, y = 0, p = 0, n = 0;
    Rat kappa = 1, e = 1;
    bool full = false;
    std::string fiber;
    std::vector<Summand> summands;
    AcyclicityCertificate residual;
    int nilpotency = 0;
    double off_family = 0;
    std::vector<std::string> notes;
    SymComplex transferred;
    std::map<int, std::size_t> ranks_transferred, ranks_summands;
};

DecompositionReport pushforward_pert(const SymbolicBase& base, const DecManifold& Y, int p, const Rat& kappa);
DecompositionReport pushforward_full(const SymbolicBase& base, const DecManifold& Y, int p, const Rat& kappa,
                                     const Rat& e);

// Hand-transcribed family skeletons for x + y = 4, p in {0, 1}, y in {1, 2, 3}.
std::vector<Summand> example_tables(int p, int y);
std::vector<SkeletonSlot> degree_zero_slots(const std::vector<Summand>& s);
// Differences between the Maxwell, Deligne, de Rham and torsion families of r and the expected skeleton.
std::vector<std::string> diff_tables(const DecompositionReport& r, const std::vector<Summand>& expected);
// Parts of r outside the expected skeleton that are not mismatches: flux arrows and lattice summands.
std::vector<std::string> beyond_tables(const DecompositionReport& r);

// Pairs the summands of a with those of b, the pushforward of the dual theory with fiber Y*; returns
// the failures (empty on a bijection with inverted couplings).
std::vector<std::string> duality_correspondence(const DecompositionReport& a, const DecompositionReport& b);

// The transferred complex (and torsion summands) with X replaced by a DEC manifold.
MixedComplex realize(const DecompositionReport& r, const DecManifold& X);

std::string to_json(const DecompositionReport& r);
std::string to_markdown(const DecompositionReport& r);

}  // namespace mxw
