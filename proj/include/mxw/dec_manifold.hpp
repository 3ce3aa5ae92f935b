#pragma once

#include "mxw/exact_algebra.hpp"
#include "mxw/linalg.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mxw {

struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct MetricNotSPD : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ToleranceExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SignViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A closed oriented cell complex together with its dual cell structure and DEC Hodge stars.
//
// Degree-k cochains C^k live on k-cells; dual cochains D^k live on dual k-cells, which are in
// bijection with primal (n-k)-cells. star[k] : C^k -> D^{n-k} and dual_star[k] : D^k -> C^{n-k}.
// dual() exchanges the two structures, so every construction on M has a twin on M*.
struct DecManifold {
    std::string name;
    int n = 0;
    bool closed = true;
    std::vector<std::size_t> cells, dual_cells;
    std::vector<IntMatrix> d, dual_d;           // d[k] : C^k -> C^{k+1}, k = 0..n-1
    std::vector<RatMatrix> star, dual_star;     // star[k] : C^k -> D^{n-k}
    std::vector<RatMatrix> metric, dual_metric; // SPD Gram matrix of int a ∧ ⋆b on C^k
    bool is_dual = false;                       // toggled by dual()

    std::size_t ncells(int k) const { return k >= 0 && k <= n ? cells[k] : 0; }
    std::size_t ndual(int k) const { return k >= 0 && k <= n ? dual_cells[k] : 0; }
    // coboundary with zero blocks outside 0..n-1
    IntMatrix dz(int k) const;
    IntMatrix dual_dz(int k) const;
    RatMatrix star_at(int k) const;       // C^k -> D^{n-k}
    RatMatrix dual_star_at(int k) const;  // D^k -> C^{n-k}
    // sign s with int (a in C^k) ∧ (b in D^{n-k}) = s * a^T b
    int pairing_sign(int k) const { return is_dual ? parity(k) : 1; }
    // sign s with int (x in D^k) ∧ (c in C^{n-k}) = s * c^T x
    int dual_pairing_sign(int k) const { return is_dual ? 1 : parity(k); }
    int parity(int k) const { return (k * (n - k)) % 2 ? -1 : 1; }

    DecManifold dual() const;
    void validate() const;
};

// Assemble from primal data; the dual complex, dual stars and metrics are derived.
DecManifold make_dec(std::string name, int n, std::vector<std::size_t> cells, std::vector<IntMatrix> d,
                     std::vector<RatMatrix> star, bool closed = true);

DecManifold build_point();
DecManifold build_circle(int m, Rat edge_length = 0);  // edge_length 0 means 1/m
DecManifold build_torus(const std::vector<int>& dims, const std::vector<Rat>& edge_lengths = {});
DecManifold build_surface(int genus);
DecManifold build_sphere2();
DecManifold build_rp3();
DecManifold build_interval();
DecManifold build_cube(int n);  // single n-cube, not closed
DecManifold product(const DecManifold& a, const DecManifold& b);

// Named built-ins used by the CLI: circle, torus2, torus3, torus4, surface, sphere2, rp3, point, cube.
// Parameters: m and length (circle), dims and lengths (tori, "a x b", circumferences), genus, n.
DecManifold builtin_space(const std::string& name, const std::map<std::string, std::string>& params = {});
std::vector<std::string> builtin_names();

std::vector<FgAbGroup> integer_cohomology(const DecManifold& m);
std::vector<std::size_t> betti_numbers(const DecManifold& m);

template <class S>
struct HodgeData {
    // per degree k = 0..n
    std::vector<Matrix<S>> harmonic;  // iota: C^k -> harmonic coordinates (columns)
    std::vector<Matrix<S>> pi;        // C^k -> harmonic coordinates
    std::vector<Matrix<S>> eta;       // C^k -> C^{k-1} (Green homotopy, -d^* G)
    std::vector<Matrix<S>> green;     // G on C^k
    std::vector<Matrix<S>> coclosed;  // basis of K^k = im d^* in C^k
    std::vector<Matrix<S>> codiff;    // d^* : C^{k+1} -> C^k, index k
    std::vector<Matrix<S>> metric;

    // max residual of the retract identities over all degrees
    double residual(const DecManifold& m) const;
};

template <class S>
HodgeData<S> hodge_decomposition(const DecManifold& m, double tol = 1e-10);

// E_l : H^l_free(M, Z) -> H^l(M, R) in canonical bases.
struct ComparisonMap {
    int degree = 0;
    IntMatrix generators;    // integer cocycles (columns), canonical HNF order
    RatMatrix harmonic_reps; // their exact harmonic projections
    RatMatrix gram;          // pairing of the harmonic projections
    RealMatrix E;            // coordinates in the orthonormal harmonic basis (upper triangular)
    RealMatrix basis;        // orthonormal harmonic basis obtained by Gram-Schmidt
};

ComparisonMap comparison_map(const DecManifold& m, const HodgeData<Rat>& h, int degree);

struct StarAudit {
    std::vector<int> expected, found;  // (-1)^{k(n-k)} and the measured sign, per degree
    bool ok = true;
    std::string str() const;
};

// Checks dual_star[n-k] * star[k] = (-1)^{k(n-k)} for every degree; throws SignViolation on failure
// when strict is set.
StarAudit star_sign_audit(const DecManifold& m, bool strict = true);

// Symmetric positive definiteness, exact.
bool is_spd(const RatMatrix& m);

std::string to_json(const DecManifold& m);
DecManifold dec_from_json(const std::string& text);

}  // namespace mxw
