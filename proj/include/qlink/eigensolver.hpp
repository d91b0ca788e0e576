// eigensolver.hpp - lowest eigenpairs of sparse Hermitian matrices
//
// lanczos_lowest runs a restarted block Lanczos iteration: the Krylov basis is
// kept fully orthogonal (two Gram-Schmidt passes), the projected matrix is
// diagonalized by Rayleigh-Ritz, and the basis is thick-restarted on the
// lowest Ritz vectors. Blocks are what let exactly degenerate eigenvalues
// show up with their full multiplicity; a randomized verification round
// guards against copies that the current Krylov space cannot see.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "qlink/sparse.hpp"

namespace qlink {

struct EigenPairs {
    std::vector<double> values;  // ascending
    DenseMatrix vectors;         // one column per value
    std::vector<double> residuals;

    std::size_t size() const noexcept { return values.size(); }
    StateVector vector(std::size_t i) const { return vectors.col(static_cast<Eigen::Index>(i)); }
    double max_residual() const {
        return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
    }
};

struct LanczosOptions {
    double tol = 1e-10;
    std::uint64_t seed = 1;
    /// Upper limit when a degenerate cluster forces k to grow; 0 means dim.
    std::size_t k_cap = 0;
    /// Eigenvalues closer than this are treated as one cluster at the truncation boundary.
    double cluster_gap = 1e-8;
    bool resolve_clusters = true;
    /// 0 selects automatically.
    std::size_t block_size = 0;
    /// 0 means 50 * k.
    std::size_t max_restarts = 0;
};

class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& what, std::vector<double> best_residuals)
        : std::runtime_error(what), best_residuals_(std::move(best_residuals)) {}
    const std::vector<double>& best_residuals() const noexcept { return best_residuals_; }

  private:
    std::vector<double> best_residuals_;
};

namespace detail {

/// Portable uniform doubles in [-0.5, 0.5) from a 64-bit engine.
inline double uniform_centered(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5; }

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> random_vector(std::mt19937_64& rng, Eigen::Index n) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if constexpr (std::is_floating_point_v<Scalar>) {
            v(i) = uniform_centered(rng);
        } else {
            const double re = uniform_centered(rng);
            v(i) = Scalar(re, uniform_centered(rng));
        }
    }
    return v;
}

/// Krylov basis with stored images H*V so that the projected matrix is exact.
template <class Scalar>
class KrylovBasis {
  public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    KrylovBasis(const CsrMatrix<Scalar>& h, Eigen::Index capacity)
        : h_(h), v_(static_cast<Eigen::Index>(h.dim()), capacity), hv_(v_.rows(), capacity),
          t_(capacity, capacity) {}

    Eigen::Index size() const noexcept { return cols_; }
    Eigen::Index capacity() const noexcept { return v_.cols(); }
    Eigen::Index dim() const noexcept { return v_.rows(); }

    /// Orthogonalizes the columns of x against the basis and each other, appends
    /// the ones that do not lie in the span, and returns how many were kept.
    Eigen::Index append(Matrix x) {
        const Eigen::Index room = std::min(capacity(), dim()) - cols_;
        if (room <= 0 || x.cols() == 0) {
            return 0;
        }
        const Eigen::VectorXd original = x.colwise().norm();
        for (int pass = 0; pass < 2 && cols_ > 0; ++pass) {
            const Matrix overlap = v_.leftCols(cols_).adjoint() * x;
            x.noalias() -= v_.leftCols(cols_) * overlap;
        }
        const Eigen::Index first = cols_;
        for (Eigen::Index c = 0; c < x.cols() && cols_ - first < room; ++c) {
            Vector col = x.col(c);
            for (int pass = 0; pass < 2 && cols_ > first; ++pass) {
                const Vector overlap = v_.middleCols(first, cols_ - first).adjoint() * col;
                col.noalias() -= v_.middleCols(first, cols_ - first) * overlap;
            }
            const double remaining = col.norm();
            if (original(c) == 0.0 || remaining < 1e-10 * original(c)) {
                continue;
            }
            v_.col(cols_) = col / remaining;
            ++cols_;
        }
        const Eigen::Index added = cols_ - first;
        if (added == 0) {
            return 0;
        }
        Vector hx;
        for (Eigen::Index c = first; c < cols_; ++c) {
            h_.multiply(Vector(v_.col(c)), hx);
            hv_.col(c) = hx;
        }
        const Matrix block = v_.leftCols(cols_).adjoint() * hv_.middleCols(first, added);
        t_.block(0, first, cols_, added) = block;
        t_.block(first, 0, added, cols_) = block.adjoint();
        for (Eigen::Index c = first; c < cols_; ++c) {
            t_(c, c) = Scalar(std::real(t_(c, c)));
        }
        return added;
    }

    struct Ritz {
        Eigen::VectorXd values;
        Matrix coefficients;
    };

    Ritz rayleigh_ritz() const {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(t_.topLeftCorner(cols_, cols_));
        return Ritz{eig.eigenvalues(), eig.eigenvectors()};
    }

    Matrix images(Eigen::Index first, Eigen::Index count) const { return hv_.middleCols(first, count); }
    Matrix combine(const Matrix& coeff) const { return v_.leftCols(cols_) * coeff; }
    Matrix combine_images(const Matrix& coeff) const { return hv_.leftCols(cols_) * coeff; }

    /// Replaces the basis by V*coeff (thick restart), then restores orthonormality.
    void restart(const Matrix& coeff) {
        const Eigen::Index q = coeff.cols();
        Matrix v = combine(coeff);
        Matrix hv = combine_images(coeff);
        const Matrix gram = v.adjoint() * v;
        Eigen::LLT<Matrix> llt(gram);
        const Matrix linv = llt.matrixL().solve(Matrix::Identity(q, q));
        v = v * linv.adjoint();
        hv = hv * linv.adjoint();
        v_.leftCols(q) = v;
        hv_.leftCols(q) = hv;
        Matrix t = v.adjoint() * hv;
        t = (0.5 * (t + t.adjoint())).eval();
        t_.topLeftCorner(q, q) = t;
        cols_ = q;
    }

  private:
    const CsrMatrix<Scalar>& h_;
    Matrix v_;
    Matrix hv_;
    Matrix t_;
    Eigen::Index cols_ = 0;
};

template <class Scalar>
std::vector<double> true_residuals(const CsrMatrix<Scalar>& h,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& vecs,
                                   const std::vector<double>& vals) {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    std::vector<double> res(vals.size());
    Vector hv;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const Vector v = vecs.col(static_cast<Eigen::Index>(i));
        h.multiply(v, hv);
        res[i] = (hv - vals[i] * v).norm();
    }
    return res;
}

template <class Scalar>
struct RawPairs {
    std::vector<double> values;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors;
    std::vector<double> residuals;
};

/// Lowest `nev` eigenpairs without any cluster handling.
template <class Scalar>
RawPairs<Scalar> block_lanczos(const CsrMatrix<Scalar>& h, std::size_t nev, const LanczosOptions& opts,
                               std::mt19937_64& rng,
                               const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* warm = nullptr) {
    using Basis = KrylovBasis<Scalar>;
    using Matrix = typename Basis::Matrix;
    const auto n = static_cast<Eigen::Index>(h.dim());
    const auto want = static_cast<Eigen::Index>(nev);
    const Eigen::Index block =
        std::min<Eigen::Index>(n, opts.block_size > 0 ? static_cast<Eigen::Index>(opts.block_size)
                                                      : std::clamp<Eigen::Index>(want / 2, 4, 16));
    const Eigen::Index capacity = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * want + 3 * block, 96));
    const Eigen::Index keep = std::min<Eigen::Index>(capacity, want + block);
    const std::size_t max_restarts = opts.max_restarts > 0 ? opts.max_restarts : 50 * nev;

    Basis basis(h, capacity);
    if (warm != nullptr) {
        basis.append(warm->leftCols(std::min(warm->cols(), keep)));
    }
    const Eigen::Index full = std::min(basis.capacity(), n);
    auto fill_random = [&](Eigen::Index count) {
        Eigen::Index added = 0;
        for (int attempt = 0; added < count && attempt < 4; ++attempt) {
            const Eigen::Index missing = std::min(count - added, full - basis.size());
            if (missing <= 0) {
                break;
            }
            Matrix fresh(n, missing);
            for (Eigen::Index c = 0; c < missing; ++c) {
                fresh.col(c) = random_vector<Scalar>(rng, n);
            }
            added += basis.append(std::move(fresh));
        }
        return added;
    };
    fill_random(std::max<Eigen::Index>(block, want - basis.size()));

    std::vector<double> best(nev, std::numeric_limits<double>::infinity());
    std::vector<double> previous_converged;

    // Block Krylov growth: the next block is H applied to the newest one.
    auto expand = [&](Eigen::Index added) {
        while (added > 0 && basis.size() < full) {
            added = basis.append(basis.images(basis.size() - added, added));
            if (added == 0) {
                added = fill_random(block);
            }
        }
    };
    expand(basis.size());

    for (std::size_t cycle = 0; cycle <= max_restarts; ++cycle) {
        const typename Basis::Ritz ritz = basis.rayleigh_ritz();
        const Eigen::Index m = std::min<Eigen::Index>(basis.size(), want + block);
        const Matrix coeff = ritz.coefficients.leftCols(m);
        const Matrix y = basis.combine(coeff);
        const Matrix r = basis.combine_images(coeff) - y * ritz.values.head(m).asDiagonal();
        std::vector<double> res(static_cast<std::size_t>(m));
        for (Eigen::Index i = 0; i < m; ++i) {
            res[static_cast<std::size_t>(i)] = r.col(i).norm();
        }
        bool converged = basis.size() >= want;
        for (Eigen::Index i = 0; i < std::min(m, want); ++i) {
            const auto u = static_cast<std::size_t>(i);
            converged = converged && res[u] < opts.tol;
            best[u] = std::min(best[u], res[u]);
        }

        if (converged) {
            RawPairs<Scalar> out;
            out.values.assign(ritz.values.data(), ritz.values.data() + want);
            out.vectors = y.leftCols(want);
            out.residuals = true_residuals(h, out.vectors, out.values);
            const bool certified = std::all_of(out.residuals.begin(), out.residuals.end(),
                                               [&](double x) { return x < opts.tol; });
            bool stable = !previous_converged.empty();
            for (std::size_t i = 0; stable && i < nev; ++i) {
                stable = std::abs(previous_converged[i] - out.values[i]) <= std::max(opts.tol, 1e-12);
            }
            if (certified && (stable || basis.size() >= n)) {
                return out;
            }
            if (certified) {
                // Accept only after a second convergence seeded with fresh random directions agrees.
                previous_converged = out.values;
            }
        }

        basis.restart(ritz.coefficients.leftCols(std::min<Eigen::Index>(keep, basis.size())));
        Eigen::Index added = 0;
        if (!converged) {
            std::vector<Eigen::Index> pick;
            for (Eigen::Index i = 0; i < m && static_cast<Eigen::Index>(pick.size()) < block; ++i) {
                if (res[static_cast<std::size_t>(i)] >= opts.tol) {
                    pick.push_back(i);
                }
            }
            added = basis.append(r(Eigen::all, pick));
        }
        if (added == 0) {
            added = fill_random(block);
        }
        expand(added);
    }
    throw ConvergenceError("block Lanczos did not converge " + std::to_string(nev) + " eigenpairs within " +
                               std::to_string(max_restarts) + " restarts",
                           best);
}

/// Cluster-aware driver over one scalar type.
template <class Scalar>
RawPairs<Scalar> lowest_with_clusters(const CsrMatrix<Scalar>& h, std::size_t k, const LanczosOptions& opts) {
    const std::size_t n = h.dim();
    std::mt19937_64 rng(opts.seed);
    const std::size_t cap = opts.k_cap > 0 ? std::min(opts.k_cap, n) : n;
    std::size_t keep = k;
    std::size_t need = opts.resolve_clusters ? std::min(n, k + 1) : k;
    RawPairs<Scalar> pairs = block_lanczos(h, need, opts, rng);
    while (opts.resolve_clusters && keep < cap && pairs.values.size() > keep &&
           pairs.values[keep] - pairs.values[keep - 1] <= opts.cluster_gap) {
        ++keep;
        if (keep < n && pairs.values.size() <= keep) {
            need = std::min(n, std::max(keep + 1, need + need / 2));
            pairs = block_lanczos(h, need, opts, rng, &pairs.vectors);
        }
    }
    keep = std::min(keep, pairs.values.size());
    pairs.values.resize(keep);
    pairs.residuals.resize(keep);
    pairs.vectors = pairs.vectors.leftCols(static_cast<Eigen::Index>(keep)).eval();
    return pairs;
}

}  // namespace detail

/// k lowest eigenpairs. With resolve_clusters, k grows until the next eigenvalue
/// is more than cluster_gap above the last returned one (or k reaches k_cap).
inline EigenPairs lanczos_lowest(const SparseHermitian& h, std::size_t k, const LanczosOptions& opts = {}) {
    const std::size_t n = h.dim();
    if (k < 1 || k > n) {
        throw std::invalid_argument("requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(n) +
                                    "-dimensional matrix");
    }
    if (!(opts.tol > 0.0)) {
        throw std::invalid_argument("tolerance must be positive");
    }
    EigenPairs out;
    if (h.is_real()) {
        // Real symmetric input: iterate in real arithmetic, report complex vectors.
        auto raw = detail::lowest_with_clusters(h.real_part(), k, opts);
        out.values = std::move(raw.values);
        out.vectors = raw.vectors.cast<Complex>();
        out.residuals = std::move(raw.residuals);
    } else {
        auto raw = detail::lowest_with_clusters(h, k, opts);
        out.values = std::move(raw.values);
        out.vectors = std::move(raw.vectors);
        out.residuals = std::move(raw.residuals);
    }
    return out;
}

inline constexpr std::size_t default_oracle_cap = 4096;

/// Complete dense eigendecomposition; the brute-force reference for small matrices.
inline EigenPairs dense_spectrum(const SparseHermitian& h, std::size_t cap = default_oracle_cap) {
    if (h.dim() > cap) {
        throw std::length_error("dense spectrum requested for dimension " + std::to_string(h.dim()) +
                                " above the oracle cap " + std::to_string(cap));
    }
    EigenPairs out;
    auto fill = [&out](const auto& dense) {
        using Matrix = std::decay_t<decltype(dense)>;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(dense);
        const Matrix residual = dense * eig.eigenvectors() - eig.eigenvectors() * eig.eigenvalues().asDiagonal();
        out.values.assign(eig.eigenvalues().data(), eig.eigenvalues().data() + eig.eigenvalues().size());
        out.vectors = eig.eigenvectors().template cast<Complex>();
        out.residuals.resize(out.values.size());
        for (Eigen::Index i = 0; i < residual.cols(); ++i) {
            out.residuals[static_cast<std::size_t>(i)] = residual.col(i).norm();
        }
    };
    if (h.is_real()) {
        fill(Eigen::MatrixXd(h.to_dense().real()));
    } else {
        fill(h.to_dense());
    }
    return out;
}

struct SpectralBounds {
    double lower = 0.0;
    double upper = 0.0;
    double ritz_min = 0.0;
    double ritz_max = 0.0;
};

/// Extremal Ritz values of a single-vector Lanczos run, padded outward by
/// 1e-3 of the span (or by the Ritz residual when that is larger).
inline SpectralBounds spectral_bounds(const SparseHermitian& h, std::uint64_t seed = 1) {
    const auto n = static_cast<Eigen::Index>(h.dim());
    if (n < 2) {
        throw std::invalid_argument("spectral bounds need dimension >= 2");
    }
    std::mt19937_64 rng(seed);
    const Eigen::Index max_steps = std::min<Eigen::Index>(n, 160);
    DenseMatrix v(n, max_steps);
    std::vector<double> alpha;
    std::vector<double> beta;
    StateVector q = detail::random_vector<Complex>(rng, n);
    q.normalize();
    StateVector w;
    Eigen::VectorXd ritz;
    double res_min = 0.0;
    double res_max = 0.0;
    for (Eigen::Index step = 0; step < max_steps; ++step) {
        v.col(step) = q;
        h.multiply(q, w);
        alpha.push_back(q.dot(w).real());
        for (int pass = 0; pass < 2; ++pass) {
            const StateVector overlap = v.leftCols(step + 1).adjoint() * w;
            w.noalias() -= v.leftCols(step + 1) * overlap;
        }
        const double b = w.norm();

        const auto m = static_cast<Eigen::Index>(alpha.size());
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < m) {
                t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
        ritz = eig.eigenvalues();
        res_min = b * std::abs(eig.eigenvectors()(m - 1, 0));
        res_max = b * std::abs(eig.eigenvectors()(m - 1, m - 1));
        const double span = ritz(m - 1) - ritz(0);
        if (b < 1e-12 * std::max(1.0, std::abs(ritz(m - 1))) ||
            (m >= 8 && std::max(res_min, res_max) < 1e-4 * std::max(span, 1e-12))) {
            break;
        }
        beta.push_back(b);
        q = w / b;
    }
    SpectralBounds out;
    out.ritz_min = ritz(0);
    out.ritz_max = ritz(ritz.size() - 1);
    const double span = out.ritz_max - out.ritz_min;
    const double pad = span < 1e-12 ? 1e-6 : 1e-3 * span;
    out.lower = out.ritz_min - std::max(pad, res_min);
    out.upper = out.ritz_max + std::max(pad, res_max);
    return out;
}

}  // namespace qlink
