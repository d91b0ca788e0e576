// oracle.hpp - brute-force references: Kronecker-product Hamiltonian, index-sum
// partial trace, eigendecomposition propagator, and the combined equivalence check
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qlink/dynamics.hpp"
#include "qlink/eigensolver.hpp"
#include "qlink/entanglement.hpp"
#include "qlink/model.hpp"

namespace qlink::oracle {

/// Kronecker product of per-site factors, site 0 most significant.
inline DenseMatrix kron_site_operator(const std::vector<DenseMatrix>& per_site) {
    DenseMatrix out = DenseMatrix::Identity(1, 1);
    for (const DenseMatrix& m : per_site) {
        out = DenseMatrix(Eigen::kroneckerProduct(out, m));
    }
    return out;
}

/// Dense H assembled from sum_alpha S^alpha_i S^alpha_j products; no CSR code involved.
inline DenseMatrix dense_hamiltonian(const ChainSpec& spec, std::uint64_t cap = default_oracle_cap) {
    spec.validate();
    const SiteLayout layout = spec.layout();
    if (layout.total_dim() > cap) {
        throw std::length_error("dense Hamiltonian above the oracle cap");
    }
    const int n = spec.n_sites;
    const SpinOps link = spin_operators(spec.s_link);
    const SpinOps bulk = spin_operators(spec.s_bulk);
    auto ops = [&](int site) -> const SpinOps& { return (site == 0 || site == n - 1) ? link : bulk; };
    auto identity = [&](int site) { return DenseMatrix(DenseMatrix::Identity(ops(site).d, ops(site).d)); };

    const auto dim = static_cast<Eigen::Index>(layout.total_dim());
    DenseMatrix h = DenseMatrix::Zero(dim, dim);
    auto add_bond = [&](int a, int b, double coefficient) {
        if (coefficient == 0.0) {
            return;
        }
        DenseMatrix dot = DenseMatrix::Zero(dim, dim);
        for (int alpha = 0; alpha < 3; ++alpha) {
            std::vector<DenseMatrix> factors;
            for (int site = 0; site < n; ++site) {
                if (site == a || site == b) {
                    const SpinOps& o = ops(site);
                    factors.push_back(alpha == 0 ? o.sx : alpha == 1 ? o.sy : o.sz);
                } else {
                    factors.push_back(identity(site));
                }
            }
            dot += kron_site_operator(factors);
        }
        if (ops(a).s.is_half() || ops(b).s.is_half()) {
            h += coefficient * dot;
        } else {
            h += coefficient * (std::cos(spec.theta) * dot + std::sin(spec.theta) * (dot * dot));
        }
    };
    const double link_j = spec.lambda * spec.j;
    for (int i = 1; i + 1 <= n - 2; ++i) {
        add_bond(i, i + 1, spec.j);
    }
    for (int i = 1; i + 2 <= n - 2; ++i) {
        add_bond(i, i + 2, spec.j * spec.j2);
    }
    add_bond(0, 1, link_j);
    add_bond(n - 2, n - 1, link_j);
    add_bond(0, 2, link_j * spec.j2);
    add_bond(n - 3, n - 1, link_j * spec.j2);
    return h;
}

/// rho_{(a,b),(a',b')} = sum over bulk configurations c of psi(a,c,b) conj(psi(a',c,b)),
/// with every basis index decoded digit by digit.
inline DenseMatrix naive_link_trace(const StateVector& psi, const SiteLayout& layout) {
    const std::size_t n = layout.n_sites();
    const int d = layout.dim(0);
    DenseMatrix rho = DenseMatrix::Zero(d * d, d * d);
    for (std::uint64_t i = 0; i < layout.total_dim(); ++i) {
        for (std::uint64_t k = 0; k < layout.total_dim(); ++k) {
            bool same_bulk = true;
            for (std::size_t site = 1; site + 1 < n && same_bulk; ++site) {
                same_bulk = layout.digit(i, site) == layout.digit(k, site);
            }
            if (!same_bulk) {
                continue;
            }
            const int row = layout.digit(i, 0) * d + layout.digit(i, n - 1);
            const int col = layout.digit(k, 0) * d + layout.digit(k, n - 1);
            rho(row, col) += psi(static_cast<Eigen::Index>(i)) * std::conj(psi(static_cast<Eigen::Index>(k)));
        }
    }
    return rho;
}

/// exp(-i H t) through a full eigendecomposition.
class DensePropagator {
  public:
    explicit DensePropagator(const DenseMatrix& h) : eig_(h) {}

    StateVector evolve(const StateVector& psi, double t) const {
        const Eigen::VectorXcd phases =
            (eig_.eigenvalues().cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
        return eig_.eigenvectors() * (phases.asDiagonal() * (eig_.eigenvectors().adjoint() * psi));
    }

  private:
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig_;
};

inline StateVector random_state(std::uint64_t seed, Eigen::Index n) {
    std::mt19937_64 rng(seed);
    StateVector v = detail::random_vector<Complex>(rng, n);
    return v / v.norm();
}

inline constexpr std::uint64_t naive_trace_cap = 1296;

struct CheckOptions {
    double tol = 1e-10;
    std::uint64_t seed = 1;
    std::size_t cap = default_oracle_cap;
    double horizon = 50.0;
    double step = 1.0;
    double chebyshev_tol = 1e-14;
};

struct CheckReport {
    std::uint64_t dim = 0;
    std::size_t k = 0;
    double hamiltonian_deviation = 0.0;
    double eigenvalue_deviation = 0.0;
    double max_residual = 0.0;
    double fidelity_deficit = 0.0;
    double trace_deviation = 0.0;
    /// The index-sum trace is quadratic in dim and only run up to naive_trace_cap.
    bool trace_checked = false;

    static constexpr double eigenvalue_bound = 1e-10;
    static constexpr double fidelity_bound = 1e-9;
    static constexpr double trace_bound = 1e-12;
    static constexpr double hamiltonian_bound = 1e-12;

    bool pass() const {
        return hamiltonian_deviation < hamiltonian_bound && eigenvalue_deviation < eigenvalue_bound &&
               fidelity_deficit < fidelity_bound && trace_deviation < trace_bound;
    }
};

/// Sparse build, Lanczos, Chebyshev and the link trace against their brute-force twins.
inline CheckReport check_spec(const ChainSpec& spec, const CheckOptions& opts = {}) {
    const Hamiltonian ham = build_hamiltonian(spec, opts.cap);
    const DenseMatrix dense = dense_hamiltonian(spec, opts.cap);
    CheckReport rep;
    rep.dim = ham.layout.total_dim();
    rep.hamiltonian_deviation = (ham.matrix.to_dense() - dense).cwiseAbs().maxCoeff();

    const std::size_t dl = static_cast<std::size_t>(spec.s_link.dim());
    rep.k = std::min<std::size_t>(9 * dl * dl, ham.matrix.dim());
    LanczosOptions lopts;
    lopts.tol = opts.tol;
    lopts.seed = opts.seed;
    lopts.resolve_clusters = false;
    const EigenPairs lanczos = lanczos_lowest(ham.matrix, rep.k, lopts);
    Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(dense, Eigen::EigenvaluesOnly);
    for (std::size_t i = 0; i < rep.k; ++i) {
        rep.eigenvalue_deviation =
            std::max(rep.eigenvalue_deviation, std::abs(lanczos.values[i] - eig.eigenvalues()(static_cast<Eigen::Index>(i))));
    }
    rep.max_residual = lanczos.max_residual();

    const StateVector psi0 = random_state(opts.seed, static_cast<Eigen::Index>(rep.dim));
    const DensePropagator exact(dense);
    ChebyshevPropagator cheb(ham.matrix, spectral_bounds(ham.matrix, opts.seed), opts.chebyshev_tol);
    StateVector psi = psi0;
    double t = 0.0;
    const auto steps = static_cast<std::size_t>(std::ceil(opts.horizon / opts.step - 1e-9));
    for (std::size_t s = 1; s <= steps; ++s) {
        const double target = std::min(opts.horizon, static_cast<double>(s) * opts.step);
        psi = cheb.step(psi, target - t);
        t = target;
        const double fidelity = std::abs(exact.evolve(psi0, t).dot(psi));
        rep.fidelity_deficit = std::max(rep.fidelity_deficit, 1.0 - fidelity);
    }

    if (rep.dim <= naive_trace_cap) {
        rep.trace_checked = true;
        rep.trace_deviation =
            (reduce_to_links(psi0, ham.layout).rho - naive_link_trace(psi0, ham.layout)).cwiseAbs().maxCoeff();
    }
    return rep;
}

}  // namespace qlink::oracle
