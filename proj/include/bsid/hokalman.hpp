#pragma once

#include "bsid/common.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace bsid {

template <typename Scalar>
struct HankelSet {
    Mat<Scalar> H;        // pL/2 x p(L/2+1), block (i, j) = G_{i+j}
    Mat<Scalar> H_minus;  // H without its last p columns
    Mat<Scalar> H_plus;   // H without its first p columns
    Mat<Scalar> L_hat;    // rank-n truncation of H_minus
    Mat<Scalar> U;        // leading n left singular vectors of H_minus
    Mat<Scalar> V;        // leading n right singular vectors of H_minus
    Vec<Scalar> singular_values;  // all singular values of H_minus
    Scalar sigma_min_L = 0;       // n-th singular value of H_minus
    Index n = 0, p = 0, L = 0;
};

template <typename Scalar>
struct Realization {
    Mat<Scalar> A_hat, B_hat, C_hat;
    Mat<Scalar> O;  // U Sigma^{1/2}
    Mat<Scalar> Q;  // Sigma^{1/2} V'
    HankelSet<Scalar> hankel;

    Index n() const { return A_hat.rows(); }
    Index p() const { return C_hat.rows(); }
};

// G is p x pL with blocks G_0..G_{L-1}.
template <typename Derived>
HankelSet<typename Derived::Scalar> build_hankel(const Eigen::MatrixBase<Derived>& G, Index n) {
    using Scalar = typename Derived::Scalar;
    const Index p = G.rows();
    require(p >= 1 && G.cols() % p == 0, "build_hankel: G must be p x pL");
    const Index L = G.cols() / p;
    require(L >= 2 && L % 2 == 0, "build_hankel: L must be even and >= 2");
    require(n >= 1 && L >= 2 * n, "build_hankel: need 1 <= n and L >= 2n");
    const Index half = L / 2;

    HankelSet<Scalar> hs;
    hs.n = n;
    hs.p = p;
    hs.L = L;
    hs.H.resize(p * half, p * (half + 1));
    for (Index i = 0; i < half; ++i)
        for (Index j = 0; j <= half; ++j)
            hs.H.block(i * p, j * p, p, p) = G.middleCols((i + j) * p, p);
    hs.H_minus = hs.H.leftCols(p * half);
    hs.H_plus = hs.H.rightCols(p * half);

    Eigen::JacobiSVD<Mat<Scalar>> svd(hs.H_minus, Eigen::ComputeThinU | Eigen::ComputeThinV);
    hs.singular_values = svd.singularValues();
    hs.U = svd.matrixU().leftCols(n);
    hs.V = svd.matrixV().leftCols(n);
    // Each left singular vector's largest-magnitude entry is made positive.
    for (Index k = 0; k < n; ++k) {
        Index arg = 0;
        hs.U.col(k).cwiseAbs().maxCoeff(&arg);
        if (hs.U(arg, k) < 0) {
            hs.U.col(k) *= -1;
            hs.V.col(k) *= -1;
        }
    }
    const Vec<Scalar> s = hs.singular_values.head(n);
    hs.sigma_min_L = s(n - 1);
    hs.L_hat = hs.U * s.asDiagonal() * hs.V.transpose();
    return hs;
}

// Balanced realization from the rank-n factorization of H_minus.
template <typename Derived>
Realization<typename Derived::Scalar> ho_kalman(const Eigen::MatrixBase<Derived>& G, Index n,
                                                 typename Derived::RealScalar rel_tol = 1e-10) {
    using Scalar = typename Derived::Scalar;
    using std::sqrt;
    Realization<Scalar> r;
    r.hankel = build_hankel(G, n);
    const HankelSet<Scalar>& hs = r.hankel;
    const Scalar top = hs.singular_values(0);
    if (!(top > 0) || hs.sigma_min_L < rel_tol * top)
        throw NumericalError("ho_kalman: degenerate rank-n truncation, sigma_n = " +
                             std::to_string(double(hs.sigma_min_L)) +
                             ", sigma_1 = " + std::to_string(double(top)));
    const Vec<Scalar> root = hs.singular_values.head(n).cwiseSqrt();
    const Vec<Scalar> inv_root = root.cwiseInverse();
    r.O = hs.U * root.asDiagonal();
    r.Q = root.asDiagonal() * hs.V.transpose();
    r.C_hat = r.O.topRows(hs.p);
    r.B_hat = r.Q.leftCols(hs.p);
    // O^+ = Sigma^{-1/2} U', Q^+ = V Sigma^{-1/2}.
    r.A_hat = inv_root.asDiagonal() * hs.U.transpose() * hs.H_plus * hs.V * inv_root.asDiagonal();
    return r;
}

template <typename Scalar>
struct Alignment {
    Mat<Scalar> T;  // orthogonal n x n
    Scalar dA = 0, dB = 0, dC = 0;
};

// T minimizes ||O_ref - O_other T||_F over orthogonal matrices.
template <typename Scalar>
Alignment<Scalar> align_realizations(const Realization<Scalar>& ref, const Realization<Scalar>& other) {
    require(ref.n() == other.n() && ref.p() == other.p(), "align_realizations: dimension mismatch");
    require(ref.O.rows() == other.O.rows(), "align_realizations: observability factors differ in size");
    const Mat<Scalar> M = other.O.transpose() * ref.O;
    Eigen::JacobiSVD<Mat<Scalar>> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Alignment<Scalar> a;
    a.T = svd.matrixU() * svd.matrixV().transpose();
    a.dB = (ref.B_hat - a.T.transpose() * other.B_hat).norm();
    a.dC = (ref.C_hat - other.C_hat * a.T).norm();
    a.dA = (ref.A_hat - a.T.transpose() * other.A_hat * a.T).norm();
    return a;
}

template <typename Scalar>
struct RealizationBounds {
    Scalar bound_BC = 0;
    Scalar bound_A = 0;
    bool robustness_ok = false;
};

// Perturbation bounds for realizations built from H and H_hat, given
// sigma_min of the rank-n truncation and ||G - G_hat||_F.
template <typename DH, typename DHh>
RealizationBounds<typename DH::Scalar> realization_error_bounds(const Eigen::MatrixBase<DH>& H,
                                                                const Eigen::MatrixBase<DHh>& H_hat,
                                                                typename DH::Scalar sigma_min,
                                                                typename DH::Scalar g_err_fro, Index L) {
    using Scalar = typename DH::Scalar;
    using std::sqrt;
    if (!(sigma_min > 0)) throw PreconditionError("realization_error_bounds: sigma_min must be positive");
    require(L >= 1 && g_err_fro >= 0, "realization_error_bounds: invalid L or error norm");
    const Scalar l = Scalar(L);
    RealizationBounds<Scalar> b;
    b.bound_BC = sqrt(10 * l / sigma_min) * g_err_fro;
    b.bound_A = (9 * sqrt(l) * (op_norm(H) + op_norm(H_hat)) / (sigma_min * sigma_min) +
                 sqrt(2 * l) / sigma_min) *
                g_err_fro;
    b.robustness_ok = g_err_fro <= sigma_min / (2 * sqrt(2 * l));
    return b;
}

}  // namespace bsid
