#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace bsid {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Invalid dimensions, out-of-range arguments, infeasible grids.
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Violated mathematical precondition (e.g. decay rate below the spectral radius).
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Iteration caps, degenerate factorizations.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ParameterError(what);
}

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-trial streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t base, Keys... keys) noexcept {
    std::uint64_t h = mix64(base);
    ((h = mix64(h ^ static_cast<std::uint64_t>(keys))), ...);
    return h;
}

// Spectral (operator 2-) norm.
template <typename Derived>
typename Derived::RealScalar op_norm(const Eigen::MatrixBase<Derived>& m) {
    using Real = typename Derived::RealScalar;
    if (m.size() == 0) return Real(0);
    if (m.cols() == 1 || m.rows() == 1) return m.norm();
    Eigen::JacobiSVD<Mat<typename Derived::Scalar>> svd(m.derived());
    return svd.singularValues()(0);
}

// Column-major vectorization and its inverse.
template <typename Derived>
Vec<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& m) {
    Mat<typename Derived::Scalar> dense = m;
    return Eigen::Map<const Vec<typename Derived::Scalar>>(dense.data(), dense.size());
}

template <typename Derived>
Mat<typename Derived::Scalar> unvec(const Eigen::MatrixBase<Derived>& v, Index rows, Index cols) {
    require(v.size() == rows * cols, "unvec: size mismatch");
    Vec<typename Derived::Scalar> dense = v;
    return Eigen::Map<const Mat<typename Derived::Scalar>>(dense.data(), rows, cols);
}

}  // namespace bsid
