#pragma once

// Dense real linear-algebra kernel: norms, Moore-Penrose pseudo-inverse,
// projector construction and guarded linear solves.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace sdae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a square system is numerically singular (pivot below threshold).
class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace linalg {

inline constexpr double kDefaultRankTol = 1e-12;
inline constexpr double kSingularPivotTol = 1e-12;

/// Induced 1-norm: maximum absolute column sum.
template <typename Derived>
typename Derived::Scalar mat_norm_1(const Eigen::MatrixBase<Derived>& m)
{
    if (m.size() == 0) return typename Derived::Scalar(0);
    return m.cwiseAbs().colwise().sum().maxCoeff();
}

template <typename Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& m)
{
    return m.norm();
}

template <typename Derived>
typename Derived::Scalar vec_norm(const Eigen::MatrixBase<Derived>& x)
{
    return x.norm();
}

/**
 * Moore-Penrose pseudo-inverse through the singular value decomposition.
 *
 * Singular values below rank_tol * sigma_max are treated as zero. For the
 * returned M^-, each of the four Penrose residuals is bounded by roughly
 * 10 * n * max(rank_tol, eps) * sigma_max * |M^-|, which is what the tests
 * check in relative form.
 */
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
pseudo_inverse(const Eigen::MatrixBase<Derived>& m,
               typename Derived::Scalar rank_tol = kDefaultRankTol)
{
    using Scalar = typename Derived::Scalar;
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (!(rank_tol > 0)) throw std::invalid_argument("pseudo_inverse: rank_tol must be positive");
    if (!m.allFinite()) throw std::invalid_argument("pseudo_inverse: non-finite input");

    Eigen::JacobiSVD<Dense> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success)
        throw std::runtime_error("pseudo_inverse: SVD did not converge");

    const auto& sigma = svd.singularValues();
    Dense result = Dense::Zero(m.cols(), m.rows());
    if (sigma.size() == 0 || sigma(0) == Scalar(0)) return result;

    const Scalar cutoff = rank_tol * sigma(0);
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
        if (sigma(k) <= cutoff) break;
        result.noalias() += (svd.matrixV().col(k) / sigma(k)) * svd.matrixU().col(k).transpose();
    }
    return result;
}

/// P = A^- A, Q = I - P, R = I - A A^-.
template <typename Scalar>
struct Projectors {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> P;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> Q;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> R;
};

template <typename DerivedA, typename DerivedPinv>
Projectors<typename DerivedA::Scalar>
projectors(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedPinv>& a_pinv)
{
    using Scalar = typename DerivedA::Scalar;
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (a.rows() != a.cols() || a_pinv.rows() != a.cols() || a_pinv.cols() != a.rows())
        throw DimensionMismatch("projectors: A must be square and A_pinv its transpose shape");
    const Eigen::Index d = a.rows();
    Projectors<Scalar> out;
    out.P = a_pinv * a;
    out.Q = Dense::Identity(d, d) - out.P;
    out.R = Dense::Identity(d, d) - a * a_pinv;
    return out;
}

/**
 * LU factorization with complete pivoting and an explicit singularity test:
 * the system is rejected when the smallest pivot falls below
 * kSingularPivotTol * |M|_1.
 */
class LinearSolver {
public:
    LinearSolver() = default;

    explicit LinearSolver(const Matrix& m, std::string context = {})
    {
        if (m.rows() != m.cols())
            throw DimensionMismatch("solve_linear: matrix must be square");
        if (!m.allFinite())
            throw SingularSystem("solve_linear: non-finite matrix" + suffix(context));
        lu_.compute(m);
        const double scale = mat_norm_1(m);
        const double min_pivot = m.rows() == 0 ? 0.0
            : lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
        if (scale == 0.0 || min_pivot < kSingularPivotTol * scale)
            throw SingularSystem("solve_linear: numerically singular matrix (pivot "
                                 + std::to_string(min_pivot) + ", |M|_1 "
                                 + std::to_string(scale) + ")" + suffix(context));
    }

    Vector solve(const Vector& b) const
    {
        if (b.size() != lu_.rows()) throw DimensionMismatch("solve_linear: rhs size mismatch");
        return lu_.solve(b);
    }

    Matrix solve(const Matrix& b) const
    {
        if (b.rows() != lu_.rows()) throw DimensionMismatch("solve_linear: rhs size mismatch");
        return lu_.solve(b);
    }

    Matrix inverse() const { return lu_.inverse(); }
    Eigen::Index size() const { return lu_.rows(); }

private:
    static std::string suffix(const std::string& context)
    {
        return context.empty() ? std::string{} : " [" + context + "]";
    }

    Eigen::FullPivLU<Matrix> lu_;
};

inline Vector solve_linear(const Matrix& m, const Vector& b)
{
    return LinearSolver(m).solve(b);
}

}  // namespace linalg
}  // namespace sdae
