#pragma once

#include "bsid/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace bsid {

// x_{t+1} = A x_t + B u_t + w_t,  y_t = u_t' C x_t + z_t.
template <typename Scalar>
struct StateSpaceModel {
    Mat<Scalar> A;  // n x n
    Mat<Scalar> B;  // n x p
    Mat<Scalar> C;  // p x n

    Index n() const { return A.rows(); }
    Index p() const { return B.cols(); }

    void validate() const {
        require(A.rows() >= 1 && A.rows() == A.cols(), "model: A must be square and non-empty");
        require(B.rows() == n() && B.cols() >= 1, "model: B must be n x p");
        require(C.rows() == p() && C.cols() == n(), "model: C must be p x n");
    }
};

using Model = StateSpaceModel<double>;

// A -> T A T^-1, B -> T B, C -> C T^-1.
template <typename Scalar, typename Derived>
StateSpaceModel<Scalar> similarity_transform(const StateSpaceModel<Scalar>& m,
                                             const Eigen::MatrixBase<Derived>& T) {
    require(T.rows() == m.n() && T.cols() == m.n(), "similarity_transform: T must be n x n");
    const Mat<Scalar> Tinv = T.derived().eval().inverse();
    return {T * m.A * Tinv, T * m.B, m.C * Tinv};
}

template <typename Derived>
typename Derived::RealScalar spectral_radius(const Eigen::MatrixBase<Derived>& A) {
    require(A.rows() == A.cols(), "spectral_radius: matrix must be square");
    if (A.size() == 0) return 0;
    Eigen::EigenSolver<Mat<typename Derived::Scalar>> es(A.derived(), false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Default decay rate in (rho(A), 1) used when none is configured.
template <typename Derived>
typename Derived::RealScalar default_decay_rate(const Eigen::MatrixBase<Derived>& A) {
    return (1 + spectral_radius(A)) / 2;
}

template <typename Scalar>
struct MarkovParams {
    Mat<Scalar> G;  // p x pL, block i = C A^i B
    Mat<Scalar> F;  // p x nL, block i = C A^i
    Index L = 0;

    Index p() const { return G.rows(); }
    auto block(Index i) const { return G.middleCols(i * p(), p()); }
};

template <typename Scalar>
MarkovParams<Scalar> markov_params(const StateSpaceModel<Scalar>& m, Index L) {
    m.validate();
    require(L >= 1, "markov_params: L must be >= 1");
    const Index n = m.n(), p = m.p();
    MarkovParams<Scalar> out{Mat<Scalar>(p, p * L), Mat<Scalar>(p, n * L), L};
    Mat<Scalar> CAi = m.C;
    for (Index i = 0; i < L; ++i) {
        out.F.middleCols(i * n, n) = CAi;
        out.G.middleCols(i * p, p).noalias() = CAi * m.B;
        CAi = (CAi * m.A).eval();
    }
    return out;
}

// C A^k.
template <typename Scalar>
Mat<Scalar> observe_power(const StateSpaceModel<Scalar>& m, Index k) {
    Mat<Scalar> CAk = m.C;
    for (Index i = 0; i < k; ++i) CAk = (CAk * m.A).eval();
    return CAk;
}

// sup_k ||A^k|| / rho^k. The scan runs at least to
// K = max(64, ceil(log(1e-12) / log(rho(A)/rho))) and continues until
// ||(A/rho)^k|| <= 1, after which sub-multiplicativity bounds every later
// term by an earlier one.
template <typename Derived>
typename Derived::RealScalar transient_factor(const Eigen::MatrixBase<Derived>& A,
                                              typename Derived::RealScalar rho) {
    using Scalar = typename Derived::Scalar;
    using Real = typename Derived::RealScalar;
    using std::ceil;
    using std::log;
    require(A.rows() == A.cols(), "transient_factor: matrix must be square");
    const Real radius = spectral_radius(A);
    if (!(rho > radius) || !(rho < 1))
        throw PreconditionError("transient_factor: need spectral_radius(A) < rho < 1, got rho=" +
                                std::to_string(double(rho)) +
                                " radius=" + std::to_string(double(radius)));
    const Real tail = Real(1e-12);
    Index k_min = 64;
    if (radius > 0)
        k_min = std::max<Index>(k_min, Index(ceil(log(tail) / log(radius / rho))));
    constexpr Index k_cap = 10'000'000;

    const Mat<Scalar> scaled = A / rho;
    Mat<Scalar> power = Mat<Scalar>::Identity(A.rows(), A.cols());
    Real sup = 1;
    for (Index k = 1; k <= k_cap; ++k) {
        power = (power * scaled).eval();
        const Real ratio = op_norm(power);
        sup = std::max(sup, ratio);
        if (k >= k_min && ratio <= 1) return sup;
    }
    throw NumericalError("transient_factor: tail did not decay within iteration cap");
}

// Gamma = sum_{i>=0} A^i S (A^i)', by fixed-point iteration from Gamma_0 = S.
template <typename DA, typename DS>
Mat<typename DA::Scalar> gramian_infinite(const Eigen::MatrixBase<DA>& A,
                                          const Eigen::MatrixBase<DS>& S,
                                          Index max_iter = 100'000) {
    using Scalar = typename DA::Scalar;
    using Real = typename DA::RealScalar;
    require(A.rows() == A.cols() && S.rows() == A.rows() && S.cols() == A.rows(),
            "gramian_infinite: dimension mismatch");
    if (!(spectral_radius(A) < 1))
        throw PreconditionError("gramian_infinite: requires spectral_radius(A) < 1");
    Mat<Scalar> gamma = S;
    const Mat<Scalar> a = A;
    for (Index it = 0; it < max_iter; ++it) {
        Mat<Scalar> next = a * gamma * a.transpose() + S;
        const Real step = (next - gamma).norm();
        gamma = std::move(next);
        if (step <= Real(1e-15) * gamma.norm()) break;
    }
    const Real scale = gamma.norm();
    const Real residual = (a * gamma * a.transpose() + S - gamma).norm();
    if (scale > 0 && residual > Real(1e-12) * scale)
        throw NumericalError("gramian_infinite: no convergence, relative residual " +
                             std::to_string(double(residual / scale)));
    return gamma;
}

// sum_{i=0}^{horizon} A^i S (A^i)'.
template <typename DA, typename DS>
Mat<typename DA::Scalar> gramian_finite(const Eigen::MatrixBase<DA>& A,
                                        const Eigen::MatrixBase<DS>& S, Index horizon) {
    using Scalar = typename DA::Scalar;
    require(A.rows() == A.cols() && S.rows() == A.rows() && S.cols() == A.rows(),
            "gramian_finite: dimension mismatch");
    require(horizon >= 0, "gramian_finite: negative horizon");
    Mat<Scalar> power = Mat<Scalar>::Identity(A.rows(), A.cols());
    Mat<Scalar> sum = Mat<Scalar>::Zero(A.rows(), A.cols());
    for (Index i = 0; i <= horizon; ++i) {
        sum.noalias() += power * S * power.transpose();
        power = (A * power).eval();
    }
    return sum;
}

// sum_{i,j=0}^{T} A^i B u_{T-i} u_{T-j}' B' (A^j)' for inputs u_0..u_T stored
// as columns. The double sum factors as m m' with m = sum_i A^i B u_{T-i}.
template <typename DA, typename DB, typename DU>
Mat<typename DA::Scalar> input_gramian(const Eigen::MatrixBase<DA>& A,
                                       const Eigen::MatrixBase<DB>& B,
                                       const Eigen::MatrixBase<DU>& inputs) {
    using Scalar = typename DA::Scalar;
    require(A.rows() == A.cols() && B.rows() == A.rows() && inputs.rows() == B.cols(),
            "input_gramian: dimension mismatch");
    Vec<Scalar> m = Vec<Scalar>::Zero(A.rows());
    for (Index t = 0; t < inputs.cols(); ++t) m = A * m + B * inputs.col(t);
    return m * m.transpose();
}

}  // namespace bsid
