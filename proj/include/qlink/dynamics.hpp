// dynamics.hpp - quench from rotated product states, Chebyshev propagation, link entanglement in time
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlink/eigensolver.hpp"
#include "qlink/entanglement.hpp"
#include "qlink/model.hpp"
#include "qlink/parallel.hpp"

namespace qlink {

enum class LinkSeed { zero, one, uniform };

inline std::string to_string(LinkSeed s) {
    switch (s) {
        case LinkSeed::zero: return "zero";
        case LinkSeed::one: return "one";
        case LinkSeed::uniform: return "uniform";
    }
    return "unknown";
}

inline LinkSeed link_seed_from_string(const std::string& name) {
    if (name == "zero") return LinkSeed::zero;
    if (name == "one") return LinkSeed::one;
    if (name == "uniform") return LinkSeed::uniform;
    throw std::invalid_argument("unknown link state '" + name + "' (expected zero, one or uniform)");
}

struct QuenchSetup {
    ChainSpec spec;
    LinkSeed link_state = LinkSeed::zero;
    double omega = 0.0;
    double phi = 0.0;
    std::vector<double> times;
    double chebyshev_tol = 1e-14;

    void validate() const {
        spec.validate();
        if (!(omega >= 0.0 && omega <= std::numbers::pi + 1e-12)) {
            throw std::invalid_argument("omega must lie in [0, pi]");
        }
        if (!(phi >= 0.0 && phi < 2.0 * std::numbers::pi)) {
            throw std::invalid_argument("phi must lie in [0, 2 pi)");
        }
        if (times.empty()) {
            throw std::invalid_argument("time grid is empty");
        }
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!(times[i] >= 0.0) || !std::isfinite(times[i]) || (i > 0 && !(times[i] > times[i - 1]))) {
                throw std::invalid_argument("times must be finite, non-negative and strictly ascending");
            }
        }
        if (!(chebyshev_tol > 0.0)) {
            throw std::invalid_argument("chebyshev_tol must be positive");
        }
    }
};

inline StateVector link_seed_vector(LinkSeed seed, int d) {
    StateVector v = StateVector::Zero(d);
    switch (seed) {
        case LinkSeed::zero: v(0) = 1.0; break;
        case LinkSeed::one: v(1) = 1.0; break;
        case LinkSeed::uniform: v.setConstant(Complex(1.0 / std::sqrt(static_cast<double>(d)), 0.0)); break;
    }
    return v;
}

/// U^z(phi) U^y(omega) applied to the seed state of one link.
inline StateVector rotated_link_state(Spin s, LinkSeed seed, double omega, double phi) {
    return rotation_unitary(s, Axis::z, phi) * (rotation_unitary(s, Axis::y, omega) * link_seed_vector(seed, s.dim()));
}

/// Rotated link on both ends, every bulk site in |0> (maximal Sz).
inline StateVector prepare_initial_state(const QuenchSetup& setup, const SiteLayout& layout) {
    setup.validate();
    const int d = setup.spec.s_link.dim();
    if (layout.dims().front() != d || layout.dims().back() != d) {
        throw std::invalid_argument("layout does not match the link spin");
    }
    const StateVector link = rotated_link_state(setup.spec.s_link, setup.link_state, setup.omega, setup.phi);
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(layout.total_dim()));
    const std::uint64_t stride_a = layout.stride(0);
    const std::uint64_t stride_b = layout.stride(layout.n_sites() - 1);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            psi(static_cast<Eigen::Index>(a * stride_a + b * stride_b)) = link(a) * link(b);
        }
    }
    return psi / psi.norm();
}

class PropagationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// exp(-i H dt) via the Chebyshev expansion on the spectrum mapped to [-1, 1]:
/// e^{-i x y} = J_0(x) + 2 sum_n (-i)^n J_n(x) T_n(y).
class ChebyshevPropagator {
  public:
    ChebyshevPropagator(const SparseHermitian& h, SpectralBounds bounds, double tol = 1e-14)
        : h_(h), center_(0.5 * (bounds.upper + bounds.lower)), half_width_(0.5 * (bounds.upper - bounds.lower)),
          tol_(tol) {
        if (h.is_real()) {
            real_ = h.real_part();
        }
        if (!(half_width_ > 0.0)) {
            throw std::invalid_argument("spectral bounds must satisfy lower < upper");
        }
        if (!(tol > 0.0)) {
            throw std::invalid_argument("Chebyshev tolerance must be positive");
        }
    }

    StateVector step(const StateVector& psi, double dt) {
        if (dt < 0.0 || !std::isfinite(dt)) {
            throw std::invalid_argument("time step must be finite and non-negative");
        }
        if (dt == 0.0) {
            return psi;
        }
        if (dt != cached_dt_) {
            prepare(dt);
        }
        const Eigen::Index n = psi.size();
        StateVector prev = psi;
        StateVector curr(n);
        StateVector next(n);
        StateVector out = coefficients_[0] * prev;
        if (coefficients_.size() > 1) {
            apply_scaled(prev, curr);
            out.noalias() += coefficients_[1] * curr;
        }
        for (std::size_t k = 2; k < coefficients_.size(); ++k) {
            apply_scaled(curr, next);
            next = 2.0 * next - prev;
            out.noalias() += coefficients_[k] * next;
            std::swap(prev, curr);
            std::swap(curr, next);
        }
        out *= phase_;
        const double in_norm = psi.norm();
        if (!std::isfinite(out.norm()) || std::abs(out.norm() - in_norm) > 1e-6 * std::max(in_norm, 1.0)) {
            throw PropagationError("Chebyshev step changed the norm from " + std::to_string(in_norm) + " to " +
                                   std::to_string(out.norm()) + "; re-estimate the spectral bounds");
        }
        return out;
    }

    std::size_t terms() const noexcept { return coefficients_.size(); }

  private:
    void apply_scaled(const StateVector& in, StateVector& out) const {
        if (real_) {
            real_->multiply(in, out);
        } else {
            h_.multiply(in, out);
        }
        out = (out - center_ * in) / half_width_;
    }

    void prepare(double dt) {
        const double x = half_width_ * dt;
        coefficients_.clear();
        Complex minus_i_pow(1.0, 0.0);
        for (int k = 0;; ++k) {
            const double jk = std::cyl_bessel_j(static_cast<double>(k), x);
            coefficients_.push_back((k == 0 ? 1.0 : 2.0) * minus_i_pow * jk);
            minus_i_pow *= Complex(0.0, -1.0);
            if (k > x && std::abs(jk) < tol_ && std::abs(std::cyl_bessel_j(static_cast<double>(k + 1), x)) < tol_) {
                break;
            }
        }
        phase_ = std::exp(Complex(0.0, -center_ * dt));
        cached_dt_ = dt;
    }

    const SparseHermitian& h_;
    std::optional<CsrMatrix<double>> real_;
    double center_;
    double half_width_;
    double tol_;
    double cached_dt_ = -1.0;
    std::vector<Complex> coefficients_;
    Complex phase_{1.0, 0.0};
};

inline StateVector chebyshev_evolve(const SparseHermitian& h, const StateVector& psi, double dt,
                                    const SpectralBounds& bounds, double tol = 1e-14) {
    ChebyshevPropagator prop(h, bounds, tol);
    return prop.step(psi, dt);
}

struct Trajectory {
    std::vector<double> times;
    std::vector<double> entanglement;
    /// | ||psi(t)|| - 1 | after each grid time.
    std::vector<double> norm_drift;
    double max_norm_drift = 0.0;
    double energy_drift = 0.0;
    double sz_drift = 0.0;
    double peak = 0.0;
    double peak_time = 0.0;
    double time_average = 0.0;
    bool average_converged = false;
    std::size_t chebyshev_terms = 0;
};

inline constexpr double average_convergence_threshold = 1e-3;

/// Mean over the grid; converged when the trailing-half mean is within the threshold of it.
inline void summarize_trajectory(Trajectory& traj) {
    traj.peak = 0.0;
    traj.peak_time = traj.times.empty() ? 0.0 : traj.times.front();
    double sum = 0.0;
    for (std::size_t i = 0; i < traj.entanglement.size(); ++i) {
        if (traj.entanglement[i] > traj.peak) {
            traj.peak = traj.entanglement[i];
            traj.peak_time = traj.times[i];
        }
        sum += traj.entanglement[i];
    }
    const std::size_t n = traj.entanglement.size();
    traj.time_average = n > 0 ? sum / static_cast<double>(n) : 0.0;
    const std::size_t half = n / 2;
    double tail = 0.0;
    for (std::size_t i = half; i < n; ++i) {
        tail += traj.entanglement[i];
    }
    const double tail_avg = n > half ? tail / static_cast<double>(n - half) : 0.0;
    traj.average_converged = n >= 2 && std::abs(tail_avg - traj.time_average) < average_convergence_threshold;
}

/// Evolves under a prebuilt Hamiltonian; the bounds are reused for every step.
inline Trajectory entanglement_trajectory(const QuenchSetup& setup, const Hamiltonian& ham,
                                          const SpectralBounds& bounds) {
    setup.validate();
    StateVector psi = prepare_initial_state(setup, ham.layout);
    ChebyshevPropagator prop(ham.matrix, bounds, setup.chebyshev_tol);
    const std::vector<int> twice_sz = twice_total_sz(ham.layout);
    auto energy = [&](const StateVector& v) { return v.dot(ham.matrix.apply(v)).real(); };
    auto sz = [&](const StateVector& v) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            acc += 0.5 * twice_sz[static_cast<std::size_t>(i)] * std::norm(v(i));
        }
        return acc;
    };
    const double e0 = energy(psi);
    const double sz0 = sz(psi);

    Trajectory traj;
    traj.times = setup.times;
    traj.entanglement.reserve(setup.times.size());
    traj.norm_drift.reserve(setup.times.size());
    double t = 0.0;
    for (double target : setup.times) {
        psi = prop.step(psi, target - t);
        t = target;
        const double norm = psi.norm();
        traj.norm_drift.push_back(std::abs(norm - 1.0));
        traj.max_norm_drift = std::max(traj.max_norm_drift, traj.norm_drift.back());
        traj.energy_drift = std::max(traj.energy_drift, std::abs(energy(psi) / (norm * norm) - e0));
        traj.sz_drift = std::max(traj.sz_drift, std::abs(sz(psi) / (norm * norm) - sz0));
        // Drift is tracked above; the measure itself sees the normalized state.
        traj.entanglement.push_back(log_negativity(reduce_to_links(StateVector(psi / norm), ham.layout)).normalized);
        traj.chebyshev_terms = std::max(traj.chebyshev_terms, prop.terms());
    }
    summarize_trajectory(traj);
    return traj;
}

struct DynamicsOptions {
    std::uint64_t seed = 1;
    std::uint64_t max_dim = default_max_dim;
};

inline Trajectory entanglement_trajectory(const QuenchSetup& setup, const DynamicsOptions& opts = {}) {
    setup.validate();
    const Hamiltonian ham = build_hamiltonian(setup.spec, opts.max_dim);
    return entanglement_trajectory(setup, ham, spectral_bounds(ham.matrix, opts.seed));
}

/// Horizon 8 pi / (lambda J) with step min(0.25 / J, horizon / 2000).
inline std::vector<double> default_time_grid(const ChainSpec& spec, std::optional<double> horizon = {},
                                             std::optional<double> step = {}) {
    const double link = spec.lambda * spec.j;
    const double t_max = horizon.value_or(link > 0.0 ? 8.0 * std::numbers::pi / link : 0.0);
    if (!(t_max > 0.0) || !std::isfinite(t_max)) {
        throw std::invalid_argument("time horizon must be positive; a zero link coupling needs an explicit horizon");
    }
    const double dt = step.value_or(std::min(0.25 / spec.j, t_max / 2000.0));
    if (!(dt > 0.0)) {
        throw std::invalid_argument("time step must be positive");
    }
    const auto count = static_cast<std::size_t>(std::floor(t_max / dt + 1e-9)) + 1;
    std::vector<double> times(count);
    for (std::size_t i = 0; i < count; ++i) {
        times[i] = static_cast<double>(i) * dt;
    }
    return times;
}

inline std::vector<double> uniform_omega_grid(std::size_t count) {
    if (count == 0) {
        throw std::invalid_argument("omega grid needs at least one point");
    }
    std::vector<double> out(count, 0.0);
    for (std::size_t i = 1; i < count; ++i) {
        out[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return out;
}

struct OmegaScan {
    std::vector<double> omegas;
    std::vector<Trajectory> trajectories;
    /// max over (t, omega) of the entanglement.
    double e_max = 0.0;
    double t_star = 0.0;
    double omega_star = 0.0;
    /// max over omega of the time average.
    double average_max = 0.0;
    double omega_average_star = 0.0;
    SpectralBounds bounds;
};

inline OmegaScan maximize_over_omega(const QuenchSetup& base, const std::vector<double>& omegas,
                                     const DynamicsOptions& opts = {}, unsigned threads = 1) {
    if (omegas.empty()) {
        throw std::invalid_argument("omega grid is empty");
    }
    const Hamiltonian ham = build_hamiltonian(base.spec, opts.max_dim);
    OmegaScan scan;
    scan.bounds = spectral_bounds(ham.matrix, opts.seed);
    scan.omegas = omegas;
    scan.trajectories.resize(omegas.size());
    parallel_for(omegas.size(), threads, [&](std::size_t i) {
        QuenchSetup setup = base;
        setup.omega = omegas[i];
        scan.trajectories[i] = entanglement_trajectory(setup, ham, scan.bounds);
    });
    bool first = true;
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        const Trajectory& tr = scan.trajectories[i];
        if (first || tr.peak > scan.e_max) {
            scan.e_max = tr.peak;
            scan.t_star = tr.peak_time;
            scan.omega_star = omegas[i];
        }
        if (first || tr.time_average > scan.average_max) {
            scan.average_max = tr.time_average;
            scan.omega_average_star = omegas[i];
        }
        first = false;
    }
    return scan;
}

/// First time the entanglement falls back to `fraction` of the trajectory peak
/// after having reached half of it.
inline std::optional<double> first_collapse_time(const Trajectory& traj, double fraction = 0.05) {
    if (traj.peak <= 0.0) {
        return std::nullopt;
    }
    bool risen = false;
    for (std::size_t i = 0; i < traj.entanglement.size(); ++i) {
        if (!risen) {
            risen = traj.entanglement[i] >= 0.5 * traj.peak;
        } else if (traj.entanglement[i] <= fraction * traj.peak) {
            return traj.times[i];
        }
    }
    return std::nullopt;
}

}  // namespace qlink
