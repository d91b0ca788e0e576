// spin.hpp - spin-s operators, rotations and the tensor-product site layout
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qlink {

using Complex = std::complex<double>;
using DenseMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;

/// Half-integer spin quantum number, stored as 2s so that it stays exact.
class Spin {
  public:
    constexpr Spin() = default;

    static Spin from_twice(int two_s) {
        if (two_s < 1) {
            throw std::invalid_argument("spin must satisfy s >= 1/2, got 2s = " + std::to_string(two_s));
        }
        Spin s;
        s.two_s_ = two_s;
        return s;
    }

    /// Accepts 0.5, 1, 1.5, ... and rejects anything that is not a positive half-integer.
    static Spin from_value(double s) {
        if (!std::isfinite(s)) {
            throw std::invalid_argument("spin must be finite");
        }
        const double twice = 2.0 * s;
        const double rounded = std::round(twice);
        if (std::abs(twice - rounded) > 1e-9 || rounded < 1.0 || rounded > 1e6) {
            throw std::invalid_argument("spin must be a positive half-integer, got " + std::to_string(s));
        }
        return from_twice(static_cast<int>(rounded));
    }

    constexpr int twice() const noexcept { return two_s_; }
    constexpr double value() const noexcept { return 0.5 * two_s_; }
    constexpr int dim() const noexcept { return two_s_ + 1; }
    constexpr bool is_half() const noexcept { return two_s_ == 1; }

    friend constexpr bool operator==(Spin a, Spin b) noexcept { return a.two_s_ == b.two_s_; }

  private:
    int two_s_ = 1;
};

inline std::string to_string(Spin s) {
    return s.twice() % 2 == 0 ? std::to_string(s.twice() / 2) : std::to_string(s.twice()) + "/2";
}

/// Spin matrices in the descending-Sz basis: index k carries Sz = s - k.
struct SpinOps {
    Spin s;
    int d = 0;
    DenseMatrix sx;
    DenseMatrix sy;
    DenseMatrix sz;
};

inline SpinOps spin_operators(Spin s) {
    const int d = s.dim();
    const double sv = s.value();
    DenseMatrix raise = DenseMatrix::Zero(d, d);
    for (int k = 1; k < d; ++k) {
        const double m = sv - k;  // S+ maps index k (Sz = m) to index k-1
        raise(k - 1, k) = std::sqrt(sv * (sv + 1.0) - m * (m + 1.0));
    }
    const DenseMatrix lower = raise.adjoint();

    SpinOps ops;
    ops.s = s;
    ops.d = d;
    ops.sx = 0.5 * (raise + lower);
    ops.sy = Complex(0.0, -0.5) * (raise - lower);
    ops.sz = DenseMatrix::Zero(d, d);
    for (int k = 0; k < d; ++k) {
        ops.sz(k, k) = sv - k;
    }
    return ops;
}

enum class Axis { x, y, z };

/// exp(-i * angle * S^axis).
inline DenseMatrix rotation_unitary(Spin s, Axis axis, double angle) {
    const SpinOps ops = spin_operators(s);
    if (axis == Axis::z) {
        DenseMatrix u = DenseMatrix::Zero(ops.d, ops.d);
        for (int k = 0; k < ops.d; ++k) {
            u(k, k) = std::exp(Complex(0.0, -angle * ops.sz(k, k).real()));
        }
        return u;
    }
    const DenseMatrix& gen = axis == Axis::x ? ops.sx : ops.sy;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(gen);
    Eigen::VectorXcd phases(ops.d);
    for (int k = 0; k < ops.d; ++k) {
        phases(k) = std::exp(Complex(0.0, -angle * eig.eigenvalues()(k)));
    }
    return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Per-site dimensions and row-major strides of the chain Hilbert space
/// (site 0 is the most significant digit).
class SiteLayout {
  public:
    SiteLayout() = default;

    explicit SiteLayout(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) {
            throw std::invalid_argument("layout needs at least one site");
        }
        strides_.assign(dims_.size(), 1);
        total_ = 1;
        for (std::size_t i = dims_.size(); i-- > 0;) {
            if (dims_[i] < 1) {
                throw std::invalid_argument("site dimension must be positive");
            }
            strides_[i] = total_;
            if (total_ > (std::uint64_t{1} << 40) / static_cast<std::uint64_t>(dims_[i])) {
                throw std::length_error("Hilbert space dimension overflows the index type");
            }
            total_ *= static_cast<std::uint64_t>(dims_[i]);
        }
    }

    std::size_t n_sites() const noexcept { return dims_.size(); }
    int dim(std::size_t site) const { return dims_.at(site); }
    std::uint64_t stride(std::size_t site) const { return strides_.at(site); }
    std::uint64_t total_dim() const noexcept { return total_; }
    const std::vector<int>& dims() const noexcept { return dims_; }
    const std::vector<std::uint64_t>& strides() const noexcept { return strides_; }

    int digit(std::uint64_t index, std::size_t site) const {
        return static_cast<int>((index / strides_[site]) % static_cast<std::uint64_t>(dims_[site]));
    }

  private:
    std::vector<int> dims_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t total_ = 0;
};

/// Link A, (n_sites - 2) bulk sites, link B.
inline SiteLayout chain_layout(int n_sites, Spin link, Spin bulk) {
    if (n_sites < 2) {
        throw std::invalid_argument("chain needs at least the two link sites");
    }
    std::vector<int> dims(static_cast<std::size_t>(n_sites), bulk.dim());
    dims.front() = link.dim();
    dims.back() = link.dim();
    return SiteLayout(std::move(dims));
}

}  // namespace qlink
