#pragma once

// Field-generic linear algebra used by the templated complex code: exact over Rat,
// SVD-based with a relative tolerance over double.

#include "mxw/exact_algebra.hpp"

#include <optional>

namespace mxw {

template <class S>
struct Lin;

template <>
struct Lin<Rat> {
    static constexpr bool exact = true;
    static RatMatrix kernel(const RatMatrix& m);
    static RatMatrix colspace(const RatMatrix& m);
    static std::size_t rank(const RatMatrix& m);
    // Basis of a complement of span(sub) inside span(space); sub must lie in span(space).
    static RatMatrix complement(const RatMatrix& sub, const RatMatrix& space);
    static RatMatrix left_inverse(const RatMatrix& b);
    static std::optional<RatMatrix> solve(const RatMatrix& a, const RatMatrix& b);
    static RatMatrix pinv(const RatMatrix& m);
    static RatMatrix inverse(const RatMatrix& m);
    static bool is_zero(const RatMatrix& m, double scale = 1.0);
    static Rat from_rat(const Rat& q) { return q; }
    static Rat from_int(const Int& z) { return Rat(z); }
    static double to_double(const Rat& q) { return q.get_d(); }
};

template <>
struct Lin<double> {
    static constexpr bool exact = false;
    static double tol;  // relative, default 1e-9
    static RealMatrix kernel(const RealMatrix& m);
    static RealMatrix colspace(const RealMatrix& m);
    static std::size_t rank(const RealMatrix& m);
    static RealMatrix complement(const RealMatrix& sub, const RealMatrix& space);
    static RealMatrix left_inverse(const RealMatrix& b);
    static std::optional<RealMatrix> solve(const RealMatrix& a, const RealMatrix& b);
    static RealMatrix pinv(const RealMatrix& m);
    static RealMatrix inverse(const RealMatrix& m);
    static bool is_zero(const RealMatrix& m, double scale = 1.0);
    static double from_rat(const Rat& q) { return q.get_d(); }
    static double from_int(const Int& z) { return z.get_d(); }
    static double to_double(double x) { return x; }
};

template <class S>
Matrix<S> convert(const IntMatrix& m)
{
    Matrix<S> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out(i, j) = Lin<S>::from_int(m(i, j));
    return out;
}

template <class S>
Matrix<S> convert(const RatMatrix& m)
{
    Matrix<S> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            out(i, j) = Lin<S>::from_rat(m(i, j));
    return out;
}

// Best rational approximation with bounded denominator (continued fractions).
Rat rationalize(double x, long max_den);

}  // namespace mxw
