// equilibrium.hpp - low-temperature link entanglement as a function of the link coupling
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlink/eigensolver.hpp"
#include "qlink/entanglement.hpp"
#include "qlink/model.hpp"
#include "qlink/parallel.hpp"

namespace qlink {

struct ThermalOptions {
    /// Required bound on exp(-beta * (E_max - E_0)) over the eigenvalue window.
    double eps = 1e-6;
    /// Largest window; 0 means the full dimension.
    std::size_t k_cap = 0;
    std::uint64_t max_dim = default_max_dim;
    /// Dimensions up to this use the complete dense spectrum; 0 always iterates.
    std::size_t dense_limit = 1296;
    LanczosOptions lanczos{};
};

struct ThermalPoint {
    double lambda = 0.0;
    double beta = 0.0;
    double entanglement = 0.0;
    double purity = 0.0;
    std::size_t k_used = 0;
    double truncation_margin = 1.0;
    double ground_energy = 0.0;
    double max_residual = 0.0;
    bool valid = false;
    std::string error;
};

struct ThermalState {
    LinkDensityMatrix rho;
    ThermalPoint point;
};

/// Thermal link state from the 3 d^2 lowest eigenstates, doubling the window
/// until the Boltzmann tail is below eps. A window holding the complete
/// spectrum is exact and always valid; hitting k_cap first marks the point invalid.
/// Small chains skip the iteration and take the dense spectrum.
inline ThermalState thermal_link_state(const ChainSpec& spec, double beta, const ThermalOptions& opts = {}) {
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        throw std::invalid_argument("beta must be positive and finite");
    }
    if (!(opts.eps > 0.0)) {
        throw std::invalid_argument("certificate bound eps must be positive");
    }
    const Hamiltonian ham = build_hamiltonian(spec, opts.max_dim);
    const std::size_t dim = ham.matrix.dim();
    const std::size_t cap = opts.k_cap > 0 ? std::min(opts.k_cap, dim) : dim;
    const std::size_t d = static_cast<std::size_t>(spec.s_link.dim());
    std::size_t k = std::min(cap, 3 * d * d);

    LanczosOptions lopts = opts.lanczos;
    lopts.k_cap = cap;
    const bool dense = dim <= opts.dense_limit;
    while (true) {
        EigenPairs pairs = dense ? dense_spectrum(ham.matrix, dim) : lanczos_lowest(ham.matrix, k, lopts);
        const std::size_t used = pairs.size();
        const double max_residual = pairs.max_residual();
        SpectralEnsemble ens = make_ensemble(std::move(pairs), beta);
        const bool complete = used >= dim;
        if (ens.truncation_margin < opts.eps || complete || k >= cap) {
            ThermalState out;
            out.rho = reduce_to_links(ens, ham.layout);
            out.point.lambda = spec.lambda;
            out.point.beta = beta;
            out.point.entanglement = log_negativity(out.rho).normalized;
            out.point.purity = purity(ens);
            out.point.k_used = used;
            out.point.truncation_margin = ens.truncation_margin;
            out.point.ground_energy = ens.pairs.values.front();
            out.point.max_residual = max_residual;
            out.point.valid = ens.truncation_margin < opts.eps || complete;
            if (!out.point.valid) {
                out.point.error = "window cap " + std::to_string(cap) + " reached before the Boltzmann tail fell below eps";
            }
            return out;
        }
        k = std::min(cap, 2 * k);
    }
}

inline constexpr double vanishing_entanglement = 1e-3;

struct CurveSummary {
    std::optional<double> lambda_m;
    double e_max = 0.0;
    double purity_at_m = 0.0;
    /// Largest grid coupling below lambda_m with entanglement under vanishing_entanglement.
    std::optional<double> lambda_v;
    bool partial = false;
};

struct ThermalCurve {
    std::vector<ThermalPoint> points;
    CurveSummary summary;
};

inline CurveSummary summarize_curve(const std::vector<ThermalPoint>& points) {
    CurveSummary s;
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].valid) {
            s.partial = true;
            continue;
        }
        if (!best || points[i].entanglement > points[*best].entanglement) {
            best = i;
        }
    }
    if (!best) {
        return s;
    }
    s.lambda_m = points[*best].lambda;
    s.e_max = points[*best].entanglement;
    s.purity_at_m = points[*best].purity;
    for (std::size_t i = 0; i < *best; ++i) {
        if (points[i].valid && points[i].entanglement < vanishing_entanglement) {
            s.lambda_v = points[i].lambda;
        }
    }
    return s;
}

/// One independent thermal point per coupling in `lambdas` (ascending, non-negative).
inline ThermalCurve entanglement_vs_lambda(const ChainSpec& base, double beta, const std::vector<double>& lambdas,
                                           const ThermalOptions& opts = {}, unsigned threads = 1) {
    if (lambdas.empty()) {
        throw std::invalid_argument("lambda grid is empty");
    }
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] >= 0.0) || (i > 0 && !(lambdas[i] > lambdas[i - 1]))) {
            throw std::invalid_argument("lambda grid must be non-negative and strictly ascending");
        }
    }
    ThermalCurve curve;
    curve.points.resize(lambdas.size());
    parallel_for(lambdas.size(), threads, [&](std::size_t i) {
        ChainSpec spec = base;
        spec.lambda = lambdas[i];
        try {
            curve.points[i] = thermal_link_state(spec, beta, opts).point;
        } catch (const ConvergenceError& e) {
            ThermalPoint p;
            p.lambda = lambdas[i];
            p.beta = beta;
            p.error = e.what();
            curve.points[i] = p;
        }
    });
    curve.summary = summarize_curve(curve.points);
    return curve;
}

/// `count` points log-spaced over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) {
        throw std::invalid_argument("log grid needs 0 < lo <= hi and at least one point");
    }
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    out.back() = hi;
    return out;
}

}  // namespace qlink
