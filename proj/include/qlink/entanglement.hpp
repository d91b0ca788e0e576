// entanglement.hpp - reduced link state, partial transpose, logarithmic negativity, purity
#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlink/eigensolver.hpp"
#include "qlink/spin.hpp"

namespace qlink {

/// Two-link state on C^d (x) C^d, row index a*d + b with a on link A.
struct LinkDensityMatrix {
    int d_link = 0;
    DenseMatrix rho;

    /// Throws unless rho is Hermitian, unit trace and PSD, all to `tol`.
    void check(double tol = 1e-10) const {
        const Eigen::Index n = static_cast<Eigen::Index>(d_link) * d_link;
        if (rho.rows() != n || rho.cols() != n) {
            throw std::invalid_argument("link density matrix has the wrong shape");
        }
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) {
            throw std::invalid_argument("link density matrix is not Hermitian");
        }
        if (std::abs(rho.trace() - Complex(1.0, 0.0)) > tol) {
            throw std::invalid_argument("link density matrix does not have unit trace");
        }
        Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(rho, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -tol) {
            throw std::invalid_argument("link density matrix has a negative eigenvalue");
        }
    }

    double purity() const { return (rho * rho).trace().real(); }
};

/// Boltzmann-weighted window of low-lying eigenstates.
struct SpectralEnsemble {
    EigenPairs pairs;
    double beta = 0.0;
    std::vector<double> weights;
    /// exp(-beta * (E_max - E_min)) over the window; small means the window is wide enough.
    double truncation_margin = 1.0;
};

/// Weights exp(-beta (E_k - E_0)) / Z with energies shifted by the lowest one.
inline SpectralEnsemble make_ensemble(EigenPairs pairs, double beta) {
    if (pairs.size() == 0) {
        throw std::invalid_argument("ensemble needs at least one eigenpair");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("beta must be finite and non-negative");
    }
    SpectralEnsemble ens;
    ens.beta = beta;
    const double e0 = pairs.values.front();
    ens.weights.resize(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        ens.weights[k] = std::exp(-beta * (pairs.values[k] - e0));
    }
    const double z = std::accumulate(ens.weights.begin(), ens.weights.end(), 0.0);
    for (double& w : ens.weights) {
        w /= z;
    }
    ens.truncation_margin = std::exp(-beta * (pairs.values.back() - e0));
    ens.pairs = std::move(pairs);
    return ens;
}

inline double purity(const SpectralEnsemble& ensemble) {
    double p = 0.0;
    for (double w : ensemble.weights) {
        p += w * w;
    }
    return p;
}

namespace detail {

inline void check_link_layout(const SiteLayout& layout) {
    if (layout.n_sites() < 2 || layout.dims().front() != layout.dims().back()) {
        throw std::invalid_argument("link reduction needs two end sites of equal dimension");
    }
}

/// Adds weight * Tr_bulk |psi><psi| into rho.
inline void accumulate_link_state(const StateVector& psi, const SiteLayout& layout, double weight, DenseMatrix& rho) {
    const Eigen::Index d = layout.dims().front();
    const Eigen::Index bulk = static_cast<Eigen::Index>(layout.total_dim()) / (d * d);
    // Column-major view: element (b, c + bulk*a) is psi[(a, c, b)].
    const Eigen::Map<const DenseMatrix> view(psi.data(), d, bulk * d);
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index ap = a; ap < d; ++ap) {
            const DenseMatrix block =
                weight * (view.middleCols(bulk * a, bulk) * view.middleCols(bulk * ap, bulk).adjoint());
            rho.block(a * d, ap * d, d, d) += block;
            if (ap != a) {
                rho.block(ap * d, a * d, d, d) += block.adjoint();
            }
        }
    }
}

}  // namespace detail

inline LinkDensityMatrix reduce_to_links(const StateVector& psi, const SiteLayout& layout) {
    detail::check_link_layout(layout);
    if (static_cast<std::uint64_t>(psi.size()) != layout.total_dim()) {
        throw std::invalid_argument("state length " + std::to_string(psi.size()) + " does not match layout dimension " +
                                    std::to_string(layout.total_dim()));
    }
    if (std::abs(psi.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("state is not normalized");
    }
    const int d = layout.dims().front();
    LinkDensityMatrix out{d, DenseMatrix::Zero(d * d, d * d)};
    detail::accumulate_link_state(psi, layout, 1.0, out.rho);
    return out;
}

inline LinkDensityMatrix reduce_to_links(const SpectralEnsemble& ensemble, const SiteLayout& layout) {
    detail::check_link_layout(layout);
    const auto& vecs = ensemble.pairs.vectors;
    if (static_cast<std::uint64_t>(vecs.rows()) != layout.total_dim()) {
        throw std::invalid_argument("ensemble vectors do not match the layout dimension");
    }
    if (std::abs(std::accumulate(ensemble.weights.begin(), ensemble.weights.end(), 0.0) - 1.0) > 1e-10) {
        throw std::invalid_argument("ensemble weights do not sum to one");
    }
    const int d = layout.dims().front();
    LinkDensityMatrix out{d, DenseMatrix::Zero(d * d, d * d)};
    for (std::size_t k = 0; k < ensemble.weights.size(); ++k) {
        if (ensemble.weights[k] == 0.0) {
            continue;
        }
        const StateVector v = vecs.col(static_cast<Eigen::Index>(k));
        if (std::abs(v.norm() - 1.0) > 1e-10) {
            throw std::invalid_argument("ensemble vector " + std::to_string(k) + " is not normalized");
        }
        detail::accumulate_link_state(v, layout, ensemble.weights[k], out.rho);
    }
    return out;
}

enum class Party { a, b };

/// (rho^{T_A})_{(i,j),(k,l)} = rho_{(k,j),(i,l)}; T_B swaps the second indices instead.
inline DenseMatrix partial_transpose(const DenseMatrix& rho, int d, Party party = Party::a) {
    DenseMatrix out(rho.rows(), rho.cols());
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            for (int k = 0; k < d; ++k) {
                for (int l = 0; l < d; ++l) {
                    out(i * d + j, k * d + l) =
                        party == Party::a ? rho(k * d + j, i * d + l) : rho(i * d + l, k * d + j);
                }
            }
        }
    }
    return out;
}

inline DenseMatrix partial_transpose(const LinkDensityMatrix& state, Party party = Party::a) {
    return partial_transpose(state.rho, state.d_link, party);
}

struct Negativity {
    double negativity = 0.0;       // sum of |negative eigenvalues| of rho^{T_A}
    double log_negativity = 0.0;   // log2(2 N + 1)
    double normalized = 0.0;       // log_negativity / log2(d)
};

/// Eigenvalues of the partial transpose in (-floor, 0) count as zero.
inline constexpr double negativity_floor = 1e-12;

inline Negativity log_negativity(const LinkDensityMatrix& state) {
    DenseMatrix pt = partial_transpose(state);
    pt = 0.5 * (pt + pt.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(pt, Eigen::EigenvaluesOnly);
    Negativity out;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double ev = eig.eigenvalues()(i);
        if (ev <= -negativity_floor) {
            out.negativity -= ev;
        }
    }
    out.log_negativity = std::log2(2.0 * out.negativity + 1.0);
    out.normalized = out.log_negativity / std::log2(static_cast<double>(state.d_link));
    return out;
}

}  // namespace qlink
