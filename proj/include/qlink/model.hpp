// model.hpp - link-bulk-link spin chain Hamiltonians (Heisenberg and bilinear-biquadratic)
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qlink/sparse.hpp"
#include "qlink/spin.hpp"

namespace qlink {

/// Open chain: link A (site 0), bulk sites 1..N-2, link B (site N-1).
/// Energies are in units of `j`; `lambda` is the link coupling relative to `j`.
struct ChainSpec {
    int n_sites = 8;
    Spin s_bulk = Spin::from_twice(1);
    Spin s_link = Spin::from_twice(1);
    double lambda = 0.1;
    double j2 = 0.0;
    double theta = 0.0;
    double j = 1.0;

    void validate() const {
        if (n_sites < 4) {
            throw std::invalid_argument("n_sites must be at least 4 (two bulk sites), got " + std::to_string(n_sites));
        }
        if (!(j > 0.0) || !std::isfinite(j)) {
            throw std::invalid_argument("energy unit j must be positive");
        }
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
            throw std::invalid_argument("lambda must be finite and non-negative");
        }
        if (!std::isfinite(j2) || !std::isfinite(theta)) {
            throw std::invalid_argument("j2 and theta must be finite");
        }
    }

    SiteLayout layout() const { return chain_layout(n_sites, s_link, s_bulk); }
};

class CapacityError : public std::length_error {
  public:
    CapacityError(std::uint64_t requested, std::uint64_t budget)
        : std::length_error("Hilbert space dimension " + std::to_string(requested) + " exceeds the budget of " +
                            std::to_string(budget)),
          requested_(requested),
          budget_(budget) {}

    std::uint64_t requested() const noexcept { return requested_; }
    std::uint64_t budget() const noexcept { return budget_; }

  private:
    std::uint64_t requested_;
    std::uint64_t budget_;
};

inline constexpr std::uint64_t default_max_dim = std::uint64_t{1} << 22;

inline DenseMatrix heisenberg_pair(Spin a, Spin b) {
    const SpinOps oa = spin_operators(a);
    const SpinOps ob = spin_operators(b);
    return DenseMatrix(Eigen::kroneckerProduct(oa.sx, ob.sx)) + DenseMatrix(Eigen::kroneckerProduct(oa.sy, ob.sy)) +
           DenseMatrix(Eigen::kroneckerProduct(oa.sz, ob.sz));
}

/// cos(theta) S.S + sin(theta) (S.S)^2, or plain S.S when either spin is 1/2.
inline DenseMatrix two_site_coupling(Spin a, Spin b, double theta) {
    const DenseMatrix dot = heisenberg_pair(a, b);
    if (a.is_half() || b.is_half()) {
        return dot;
    }
    return std::cos(theta) * dot + std::sin(theta) * (dot * dot);
}

struct Hamiltonian {
    SparseHermitian matrix;
    SiteLayout layout;
};

/// Bond list of the chain with 0-based sites: bulk NN and NNN bonds scale with j,
/// the four link bonds with lambda * j.
inline std::vector<LocalTerm> hamiltonian_terms(const ChainSpec& spec) {
    spec.validate();
    const int n = spec.n_sites;
    const double link = spec.lambda * spec.j;
    std::vector<LocalTerm> terms;
    auto bond = [&](int a, int b, double coefficient) {
        if (coefficient == 0.0) {
            return;
        }
        const Spin sa = (a == 0 || a == n - 1) ? spec.s_link : spec.s_bulk;
        const Spin sb = (b == 0 || b == n - 1) ? spec.s_link : spec.s_bulk;
        terms.push_back(LocalTerm{Complex(coefficient, 0.0), two_site_coupling(sa, sb, spec.theta),
                                  {static_cast<std::size_t>(a), static_cast<std::size_t>(b)}});
    };
    for (int i = 1; i <= n - 3; ++i) {
        bond(i, i + 1, spec.j);
    }
    for (int i = 1; i <= n - 4; ++i) {
        bond(i, i + 2, spec.j * spec.j2);
    }
    bond(0, 1, link);
    bond(n - 2, n - 1, link);
    bond(0, 2, link * spec.j2);
    bond(n - 3, n - 1, link * spec.j2);
    return terms;
}

inline Hamiltonian build_hamiltonian(const ChainSpec& spec, std::uint64_t max_dim = default_max_dim) {
    spec.validate();
    SiteLayout layout = spec.layout();
    if (layout.total_dim() > max_dim) {
        throw CapacityError(layout.total_dim(), max_dim);
    }
    return Hamiltonian{assemble_local_terms(hamiltonian_terms(spec), layout), std::move(layout)};
}

/// Diagonal of sum_i Sz_i, in units of 1/2 (exact integers).
inline std::vector<int> twice_total_sz(const SiteLayout& layout) {
    std::vector<int> out(layout.total_dim());
    for (std::uint64_t idx = 0; idx < layout.total_dim(); ++idx) {
        int acc = 0;
        for (std::size_t site = 0; site < layout.n_sites(); ++site) {
            acc += (layout.dim(site) - 1) - 2 * layout.digit(idx, site);
        }
        out[idx] = acc;
    }
    return out;
}

inline SparseHermitian total_sz(const SiteLayout& layout) {
    const std::vector<int> twice = twice_total_sz(layout);
    std::vector<Complex> diag(twice.size());
    for (std::size_t i = 0; i < twice.size(); ++i) {
        diag[i] = Complex(0.5 * twice[i], 0.0);
    }
    return SparseHermitian::from_diagonal(diag);
}

/// Basis indices grouped by 2*Sz_total. H is block diagonal in these sectors.
inline std::map<int, std::vector<std::uint64_t>> sz_sectors(const SiteLayout& layout) {
    std::map<int, std::vector<std::uint64_t>> sectors;
    const std::vector<int> twice = twice_total_sz(layout);
    for (std::uint64_t i = 0; i < twice.size(); ++i) {
        sectors[twice[i]].push_back(i);
    }
    return sectors;
}

}  // namespace qlink
