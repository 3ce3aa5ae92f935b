#pragma once

#include "mxw/matrix.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mxw {

// U * m * V = D, with Uinv, Vinv the exact inverses of U, V.
struct SmithForm {
    IntMatrix U, D, V, Uinv, Vinv;
    std::size_t rank = 0;
    std::vector<Int> diagonal() const;
};

SmithForm smith_normal_form(const IntMatrix& m);

struct FgAbGroup {
    std::size_t free_rank = 0;
    std::vector<Int> torsion;  // d1 | d2 | ..., each >= 2

    bool trivial() const { return free_rank == 0 && torsion.empty(); }
    std::string str() const;
    friend bool operator==(const FgAbGroup&, const FgAbGroup&) = default;
};

// Normalizes an arbitrary list of cyclic orders (0 meaning Z) to invariant factors.
FgAbGroup make_group(std::size_t free_rank, std::vector<Int> orders);
FgAbGroup direct_sum(const FgAbGroup& a, const FgAbGroup& b);

FgAbGroup cokernel(const IntMatrix& m);
IntMatrix integer_kernel_basis(const IntMatrix& m);
std::size_t rank(const IntMatrix& m);
Int determinant(const IntMatrix& m);

// Any integer X with A X = B, if one exists.
std::optional<IntMatrix> solve_integer(const IntMatrix& A, const IntMatrix& B);

// Column Hermite normal form of a full-column-rank integer matrix: returns a basis of
// the same lattice that is canonical (lower triangular in pivot rows, positive pivots).
IntMatrix column_hermite_form(const IntMatrix& m);

// Homomorphism between invariant-factor presentations, matrix on the standard generators
// (free generators first, then torsion generators).
struct GroupHom {
    FgAbGroup source, target;
    IntMatrix matrix;

    GroupHom(FgAbGroup s, FgAbGroup t, IntMatrix m);
    bool is_zero() const;
    bool is_injective() const;
};

// Rational linear algebra.
struct Rref {
    RatMatrix r;
    std::vector<std::size_t> pivots;
};

Rref rref(const RatMatrix& m);
std::size_t rank(const RatMatrix& m);
RatMatrix kernel_basis(const RatMatrix& m);
RatMatrix column_space_basis(const RatMatrix& m);
RatMatrix inverse(const RatMatrix& m);
Rat determinant(const RatMatrix& m);
RatMatrix rational_pseudoinverse(const RatMatrix& m);
std::optional<RatMatrix> solve(const RatMatrix& A, const RatMatrix& B);

// Smallest positive s with s*m integral, and the integer matrix s*m.
IntMatrix clear_denominators(const RatMatrix& m, Int& scale);
std::optional<IntMatrix> to_int(const RatMatrix& m);

// Integer combination X with B X = A (columns of A in the Z-span of the columns of B).
std::optional<IntMatrix> lattice_coordinates(const RatMatrix& B, const RatMatrix& A);

// A Z-basis (columns) of the subgroup of Q^r generated by the columns of m.
RatMatrix lattice_basis(const RatMatrix& m);

}  // namespace mxw
