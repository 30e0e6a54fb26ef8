#ifndef OPTINPUT_MATRIX_CORE_HPP
#define OPTINPUT_MATRIX_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <utility>

#include "optinput/errors.hpp"

namespace optinput {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Dense symmetric matrix. The stored entries are symmetrized on
/// construction, so m(i, j) == m(j, i) holds bit-for-bit.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(const Matrix& m)
    {
        if (m.rows() != m.cols()) {
            throw DimensionMismatch("SymMatrix requires a square matrix");
        }
        if (m.rows() < 1) {
            throw DimensionMismatch("SymMatrix requires dim >= 1");
        }
        data_ = 0.5 * (m + m.transpose());
    }

    static SymMatrix identity(Eigen::Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

    static SymMatrix diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

    [[nodiscard]] Eigen::Index dim() const noexcept { return data_.rows(); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return data_(i, j); }
    [[nodiscard]] const Matrix& matrix() const noexcept { return data_; }

private:
    Matrix data_;
};

struct CholeskyOptions {
    /// Retry once with eps*I added (eps = 1e-12 * trace / dim) when the
    /// plain factorization fails.
    bool jitter = false;
};

namespace detail {

inline Eigen::LLT<Matrix> factor(const SymMatrix& m, const CholeskyOptions& opts = {})
{
    Eigen::LLT<Matrix> llt(m.matrix());
    if (llt.info() == Eigen::Success) {
        return llt;
    }
    if (opts.jitter) {
        const double eps = 1e-12 * m.matrix().trace() / static_cast<double>(m.dim());
        if (eps > 0.0) {
            Matrix shifted = m.matrix();
            shifted.diagonal().array() += eps;
            llt.compute(shifted);
            if (llt.info() == Eigen::Success) {
                return llt;
            }
        }
    }
    throw NotPositiveDefinite("Cholesky factorization failed");
}

} // namespace detail

/// Lower-triangular L with L * L^T == m.
inline Matrix cholesky(const SymMatrix& m, const CholeskyOptions& opts = {})
{
    return detail::factor(m, opts).matrixL();
}

inline double logdet(const SymMatrix& m, const CholeskyOptions& opts = {})
{
    const auto llt = detail::factor(m, opts);
    const Matrix& lu = llt.matrixLLT();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lu.rows(); ++i) {
        acc += 2.0 * std::log(lu(i, i));
    }
    return acc;
}

inline Vector solve(const SymMatrix& m, const Vector& b, const CholeskyOptions& opts = {})
{
    if (b.size() != m.dim()) {
        throw DimensionMismatch("solve: rhs length does not match matrix dim");
    }
    return detail::factor(m, opts).solve(b);
}

inline SymMatrix inverse(const SymMatrix& m, const CholeskyOptions& opts = {})
{
    const auto llt = detail::factor(m, opts);
    return SymMatrix(llt.solve(Matrix::Identity(m.dim(), m.dim())));
}

/// Tr(m^-1), accumulated from one solve per unit vector.
inline double trace_of_inverse(const SymMatrix& m, const CholeskyOptions& opts = {})
{
    const auto llt = detail::factor(m, opts);
    double acc = 0.0;
    Vector e = Vector::Zero(m.dim());
    for (Eigen::Index i = 0; i < m.dim(); ++i) {
        e.setZero();
        e(i) = 1.0;
        acc += llt.solve(e)(i);
    }
    return acc;
}

struct EigenPair {
    double value = 0.0;
    Vector vector;
};

/// Smallest eigenvalue and a unit eigenvector.
///
/// For indefinite or numerically singular input a dense eigensolve gives the seed; shifted inverse
/// iteration then polishes the pair until ||m v - lambda v|| <= 1e-8 ||m||.
/// Starting from a fixed vector (e.g. all ones) is not used: that vector is
/// orthogonal to the bottom eigenvector of any centrosymmetric matrix whose
/// bottom eigenvector is skew, and Q(r) is centrosymmetric for ridge kernels.
inline EigenPair min_eigpair(const SymMatrix& m, int max_refine = 50)
{
    // Positive definite input: take the top pair of m^-1. For strongly graded
    // matrices the direct solve loses the bottom eigenvalue entirely, while
    // the Cholesky-based inverse keeps it to working relative accuracy.
    if (const Eigen::LLT<Matrix> llt(m.matrix()); llt.info() == Eigen::Success) {
        const Matrix minv = llt.solve(Matrix::Identity(m.dim(), m.dim()));
        Eigen::SelfAdjointEigenSolver<Matrix> inv_es(0.5 * (minv + minv.transpose()));
        const Eigen::Index top = m.dim() - 1;
        if (inv_es.info() == Eigen::Success && inv_es.eigenvalues()(top) > 0.0) {
            return {1.0 / inv_es.eigenvalues()(top), inv_es.eigenvectors().col(top).normalized()};
        }
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix());
    if (es.info() != Eigen::Success) {
        throw ConvergenceFailure("symmetric eigensolver did not converge");
    }
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    const double target = 1e-8 * scale;

    EigenPair out{es.eigenvalues()(0), es.eigenvectors().col(0).normalized()};
    auto residual = [&](const EigenPair& p) {
        return (m.matrix() * p.vector - p.value * p.vector).norm();
    };
    if (residual(out) <= target) {
        return out;
    }

    const Eigen::Index n = m.dim();
    const double gap = n > 1 ? es.eigenvalues()(1) - es.eigenvalues()(0) : scale;
    const double shift = out.value - 1e-3 * std::max(gap, 1e-12 * std::max(scale, 1.0));
    Matrix shifted = m.matrix();
    shifted.diagonal().array() -= shift;
    Eigen::PartialPivLU<Matrix> lu(shifted);
    for (int it = 0; it < max_refine; ++it) {
        Vector next = lu.solve(out.vector);
        const double nrm = next.norm();
        if (!std::isfinite(nrm) || nrm == 0.0) {
            break;
        }
        out.vector = next / nrm;
        out.value = out.vector.dot(m.matrix() * out.vector);
        if (residual(out) <= target) {
            return out;
        }
    }
    throw ConvergenceFailure("min_eigpair refinement budget exhausted");
}

/// Numerical rank from singular values above `threshold * sigma_max`.
inline Eigen::Index numerical_rank(const Matrix& m, double threshold = 1e-8)
{
    if (m.size() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) {
        return 0;
    }
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > threshold * s(0)) {
            ++rank;
        }
    }
    return rank;
}

} // namespace optinput

#endif // OPTINPUT_MATRIX_CORE_HPP
