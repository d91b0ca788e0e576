// sparse.hpp - compressed sparse row matrices and embedding of local operators
#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qlink/spin.hpp"

namespace qlink {

template <class Scalar>
class CsrMatrix {
  public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    CsrMatrix() = default;

    /// Takes ownership of already sorted, duplicate-free rows.
    CsrMatrix(std::size_t dim, std::vector<std::size_t> row_ptr, std::vector<std::uint32_t> cols,
              std::vector<Scalar> values)
        : dim_(dim), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {
        if (row_ptr_.size() != dim_ + 1 || cols_.size() != values_.size() || row_ptr_.back() != cols_.size()) {
            throw std::invalid_argument("inconsistent CSR arrays");
        }
    }

    static CsrMatrix from_diagonal(std::span<const Scalar> diag) {
        std::vector<std::size_t> ptr(diag.size() + 1);
        std::vector<std::uint32_t> cols;
        std::vector<Scalar> vals;
        for (std::size_t r = 0; r < diag.size(); ++r) {
            if (diag[r] != Scalar(0)) {
                cols.push_back(static_cast<std::uint32_t>(r));
                vals.push_back(diag[r]);
            }
            ptr[r + 1] = cols.size();
        }
        return CsrMatrix(diag.size(), std::move(ptr), std::move(cols), std::move(vals));
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return values_.size(); }
    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::uint32_t>& col_index() const noexcept { return cols_; }
    const std::vector<Scalar>& values() const noexcept { return values_; }

    /// y = A x; the vector scalar may be wider than the matrix scalar (real A, complex x).
    template <class V>
    void multiply(std::span<const V> x, std::span<V> y) const {
        if (x.size() != dim_ || y.size() != dim_) {
            throw std::invalid_argument("matvec size mismatch");
        }
        for (std::size_t r = 0; r < dim_; ++r) {
            V acc(0);
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                acc += values_[p] * x[cols_[p]];
            }
            y[r] = acc;
        }
    }

    template <class V>
    void multiply(const Eigen::Matrix<V, Eigen::Dynamic, 1>& x, Eigen::Matrix<V, Eigen::Dynamic, 1>& y) const {
        y.resize(static_cast<Eigen::Index>(dim_));
        multiply(std::span<const V>(x.data(), static_cast<std::size_t>(x.size())),
                 std::span<V>(y.data(), static_cast<std::size_t>(y.size())));
    }

    template <class V>
    Eigen::Matrix<V, Eigen::Dynamic, 1> apply(const Eigen::Matrix<V, Eigen::Dynamic, 1>& x) const {
        Eigen::Matrix<V, Eigen::Dynamic, 1> y;
        multiply(x, y);
        return y;
    }

    /// True when every stored value has zero imaginary part.
    bool is_real() const {
        if constexpr (std::is_floating_point_v<Scalar>) {
            return true;
        } else {
            return std::all_of(values_.begin(), values_.end(), [](const Scalar& v) { return v.imag() == 0.0; });
        }
    }

    CsrMatrix<double> real_part() const {
        std::vector<double> re(values_.size());
        for (std::size_t i = 0; i < values_.size(); ++i) {
            re[i] = std::real(values_[i]);
        }
        return CsrMatrix<double>(dim_, row_ptr_, cols_, std::move(re));
    }

    Scalar at(std::size_t r, std::size_t c) const {
        const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
        const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
        const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
        if (it == last || *it != c) {
            return Scalar(0);
        }
        return values_[static_cast<std::size_t>(it - cols_.begin())];
    }

    Scalar trace() const {
        Scalar t(0);
        for (std::size_t r = 0; r < dim_; ++r) {
            t += at(r, r);
        }
        return t;
    }

    /// Largest |H_rc - conj(H_cr)| over stored entries.
    double hermiticity_defect() const {
        double worst = 0.0;
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                worst = std::max(worst, std::abs(values_[p] - std::conj(at(cols_[p], r))));
            }
        }
        return worst;
    }

    Dense to_dense() const {
        Dense m = Dense::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols_[p])) += values_[p];
            }
        }
        return m;
    }

    /// Restriction to the rows and columns in `basis` (ascending, unique).
    CsrMatrix restrict_to(std::span<const std::uint64_t> basis) const {
        std::vector<std::int64_t> position(dim_, -1);
        for (std::size_t i = 0; i < basis.size(); ++i) {
            position.at(basis[i]) = static_cast<std::int64_t>(i);
        }
        std::vector<std::size_t> ptr(basis.size() + 1, 0);
        std::vector<std::uint32_t> cols;
        std::vector<Scalar> vals;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            const std::size_t r = basis[i];
            for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
                if (position[cols_[p]] >= 0) {
                    cols.push_back(static_cast<std::uint32_t>(position[cols_[p]]));
                    vals.push_back(values_[p]);
                }
            }
            ptr[i + 1] = cols.size();
        }
        return CsrMatrix(basis.size(), std::move(ptr), std::move(cols), std::move(vals));
    }

  private:
    std::size_t dim_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::uint32_t> cols_;
    std::vector<Scalar> values_;
};

using SparseHermitian = CsrMatrix<Complex>;

/// coefficient * op acting on `sites` (first site is the most significant
/// local index), identity elsewhere.
struct LocalTerm {
    Complex coefficient{1.0, 0.0};
    DenseMatrix op;
    std::vector<std::size_t> sites;
};

/// Assembles a sum of local terms row by row without forming any Kronecker product.
inline SparseHermitian assemble_local_terms(const std::vector<LocalTerm>& terms, const SiteLayout& layout) {
    const std::uint64_t dim = layout.total_dim();
    if (dim > std::uint64_t{0xffffffff}) {
        throw std::length_error("matrix dimension exceeds 32-bit column indices");
    }

    struct Prepared {
        std::vector<std::size_t> sites;
        std::vector<int> local_dims;
        // nonzeros of each local row: (local column, value)
        std::vector<std::vector<std::pair<int, Complex>>> rows;
    };
    std::vector<Prepared> prepared;
    prepared.reserve(terms.size());
    for (const LocalTerm& term : terms) {
        if (term.sites.empty()) {
            throw std::invalid_argument("local term acts on no sites");
        }
        Prepared p;
        p.sites = term.sites;
        Eigen::Index local_dim = 1;
        for (std::size_t k = 0; k < term.sites.size(); ++k) {
            const std::size_t site = term.sites[k];
            if (site >= layout.n_sites()) {
                throw std::out_of_range("site index " + std::to_string(site) + " outside the chain");
            }
            for (std::size_t other = 0; other < k; ++other) {
                if (term.sites[other] == site) {
                    throw std::invalid_argument("local term names the same site twice");
                }
            }
            p.local_dims.push_back(layout.dim(site));
            local_dim *= layout.dim(site);
        }
        if (term.op.rows() != local_dim || term.op.cols() != local_dim) {
            throw std::invalid_argument("operator dimension " + std::to_string(term.op.rows()) +
                                        " does not match the product of site dimensions " +
                                        std::to_string(local_dim));
        }
        p.rows.resize(static_cast<std::size_t>(local_dim));
        for (Eigen::Index lr = 0; lr < local_dim; ++lr) {
            for (Eigen::Index lc = 0; lc < local_dim; ++lc) {
                const Complex v = term.coefficient * term.op(lr, lc);
                if (v != Complex(0.0, 0.0)) {
                    p.rows[static_cast<std::size_t>(lr)].emplace_back(static_cast<int>(lc), v);
                }
            }
        }
        prepared.push_back(std::move(p));
    }

    std::vector<std::size_t> row_ptr(dim + 1, 0);
    std::vector<std::uint32_t> cols;
    std::vector<Complex> vals;
    std::vector<std::pair<std::uint64_t, Complex>> row;
    std::vector<int> digits;
    for (std::uint64_t r = 0; r < dim; ++r) {
        row.clear();
        for (const Prepared& p : prepared) {
            const std::size_t m = p.sites.size();
            digits.resize(m);
            int local_row = 0;
            std::uint64_t base = r;
            for (std::size_t k = 0; k < m; ++k) {
                digits[k] = layout.digit(r, p.sites[k]);
                local_row = local_row * p.local_dims[k] + digits[k];
                base -= static_cast<std::uint64_t>(digits[k]) * layout.stride(p.sites[k]);
            }
            for (const auto& [local_col, v] : p.rows[static_cast<std::size_t>(local_row)]) {
                std::uint64_t c = base;
                int rest = local_col;
                for (std::size_t k = m; k-- > 0;) {
                    c += static_cast<std::uint64_t>(rest % p.local_dims[k]) * layout.stride(p.sites[k]);
                    rest /= p.local_dims[k];
                }
                row.emplace_back(c, v);
            }
        }
        std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t i = 0; i < row.size();) {
            const std::uint64_t c = row[i].first;
            Complex sum(0.0, 0.0);
            for (; i < row.size() && row[i].first == c; ++i) {
                sum += row[i].second;
            }
            if (sum != Complex(0.0, 0.0)) {
                cols.push_back(static_cast<std::uint32_t>(c));
                vals.push_back(sum);
            }
        }
        row_ptr[r + 1] = cols.size();
    }
    return SparseHermitian(dim, std::move(row_ptr), std::move(cols), std::move(vals));
}

inline SparseHermitian embed_operator(const DenseMatrix& op, std::vector<std::size_t> sites,
                                      const SiteLayout& layout) {
    return assemble_local_terms({LocalTerm{Complex(1.0, 0.0), op, std::move(sites)}}, layout);
}

}  // namespace qlink
