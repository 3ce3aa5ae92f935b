#include "mxw/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace mxw {

RatMatrix Lin<Rat>::kernel(const RatMatrix& m) { return kernel_basis(m); }
RatMatrix Lin<Rat>::colspace(const RatMatrix& m) { return column_space_basis(m); }
std::size_t Lin<Rat>::rank(const RatMatrix& m) { return mxw::rank(m); }

RatMatrix Lin<Rat>::complement(const RatMatrix& sub, const RatMatrix& space)
{
    auto R = rref(hstack(sub, space));
    std::vector<std::size_t> keep;
    for (auto p : R.pivots)
        if (p >= sub.cols())
            keep.push_back(p - sub.cols());
    RatMatrix out(space.rows(), keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j)
        for (std::size_t i = 0; i < space.rows(); ++i)
            out(i, j) = space(i, keep[j]);
    return out;
}

RatMatrix Lin<Rat>::left_inverse(const RatMatrix& b)
{
    if (b.cols() == 0)
        return RatMatrix(0, b.rows());
    RatMatrix bt = b.transpose();
    return inverse(bt * b) * bt;
}

std::optional<RatMatrix> Lin<Rat>::solve(const RatMatrix& a, const RatMatrix& b) { return mxw::solve(a, b); }
RatMatrix Lin<Rat>::pinv(const RatMatrix& m) { return rational_pseudoinverse(m); }
RatMatrix Lin<Rat>::inverse(const RatMatrix& m) { return mxw::inverse(m); }
bool Lin<Rat>::is_zero(const RatMatrix& m, double) { return m.is_zero(); }

double Lin<double>::tol = 1e-9;

namespace {

Eigen::MatrixXd to_eigen(const RealMatrix& m)
{
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            e(i, j) = m(i, j);
    return e;
}

RealMatrix from_eigen(const Eigen::MatrixXd& e)
{
    RealMatrix m(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j)
            m(i, j) = e(i, j);
    return m;
}

struct Svd {
    Eigen::MatrixXd U, V;
    Eigen::VectorXd s;
    std::size_t rank = 0;
};

Svd svd(const RealMatrix& m)
{
    Svd out;
    if (m.rows() == 0 || m.cols() == 0) {
        out.U = Eigen::MatrixXd::Identity(m.rows(), m.rows());
        out.V = Eigen::MatrixXd::Identity(m.cols(), m.cols());
        return out;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> s(to_eigen(m), Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.U = s.matrixU();
    out.V = s.matrixV();
    out.s = s.singularValues();
    double thr = Lin<double>::tol * std::max(1.0, out.s.size() ? out.s(0) : 0.0);
    for (Eigen::Index i = 0; i < out.s.size(); ++i)
        if (out.s(i) > thr)
            ++out.rank;
    return out;
}

}  // namespace

RealMatrix Lin<double>::kernel(const RealMatrix& m)
{
    auto s = svd(m);
    return from_eigen(s.V.rightCols(m.cols() - s.rank));
}

RealMatrix Lin<double>::colspace(const RealMatrix& m)
{
    auto s = svd(m);
    return from_eigen(s.U.leftCols(s.rank));
}

std::size_t Lin<double>::rank(const RealMatrix& m) { return svd(m).rank; }

RealMatrix Lin<double>::complement(const RealMatrix& sub, const RealMatrix& space)
{
    RealMatrix q = colspace(sub);
    RealMatrix p = space - q * (q.transpose() * space);
    return colspace(p);
}

RealMatrix Lin<double>::pinv(const RealMatrix& m)
{
    auto s = svd(m);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.cols(), m.rows());
    for (std::size_t i = 0; i < s.rank; ++i)
        out += s.V.col(i) * (1.0 / s.s(i)) * s.U.col(i).transpose();
    return from_eigen(out);
}

RealMatrix Lin<double>::inverse(const RealMatrix& m)
{
    if (m.rows() != m.cols())
        throw std::domain_error("inverse of a non-square matrix");
    if (m.rows() == 0)
        return m;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(to_eigen(m));
    if (!lu.isInvertible())
        throw std::domain_error("matrix is singular");
    return from_eigen(lu.inverse());
}

RealMatrix Lin<double>::left_inverse(const RealMatrix& b) { return pinv(b); }

std::optional<RealMatrix> Lin<double>::solve(const RealMatrix& a, const RealMatrix& b)
{
    RealMatrix x = pinv(a) * b;
    double scale = std::max(max_abs(a) * max_abs(x), max_abs(b));
    if (!is_zero(a * x - b, scale))
        return std::nullopt;
    return x;
}

bool Lin<double>::is_zero(const RealMatrix& m, double scale)
{
    return max_abs(m) <= tol * std::max(1.0, scale);
}

Rat rationalize(double x, long max_den)
{
    // convergents p/q of the continued fraction of x
    long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double r = x;
    for (int it = 0; it < 64; ++it) {
        double a = std::floor(r);
        if (std::abs(a) > 9e15)
            break;
        long ai = static_cast<long>(a);
        long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 > max_den)
            break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        double frac = r - a;
        if (std::abs(frac) < 1e-15)
            break;
        r = 1.0 / frac;
    }
    if (q1 == 0)
        return Rat(0);
    Rat out(p1, q1);
    out.canonicalize();
    return out;
}

}  // namespace mxw
