// acceptance - one PASS/FAIL line per criterion; exits nonzero when any fails
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "qlink/qlink.hpp"

using namespace qlink;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

ChainSpec chain(int n, int twice_bulk, int twice_link, double theta = 0.0, double j2 = 0.0) {
    ChainSpec s;
    s.n_sites = n;
    s.s_bulk = Spin::from_twice(twice_bulk);
    s.s_link = Spin::from_twice(twice_link);
    s.theta = theta;
    s.j2 = j2;
    return s;
}

const std::vector<double>& lambda_grid() {
    static const std::vector<double> grid = log_grid(1e-3, 1.0, 48);
    return grid;
}

ThermalCurve curve(const ChainSpec& spec, double beta) {
    return entanglement_vs_lambda(spec, beta, lambda_grid(), {}, worker_count());
}

std::size_t invalid_points(const ThermalCurve& c) {
    return static_cast<std::size_t>(
        std::count_if(c.points.begin(), c.points.end(), [](const ThermalPoint& p) { return !p.valid; }));
}

Outcome equilibrium_maximum() {
    Outcome o{true, ""};
    for (int twice_link : {1, 2}) {
        const ThermalCurve c = curve(chain(8, 1, twice_link), 1e4);
        const bool ok = c.summary.lambda_m && c.summary.e_max >= 0.95 && c.summary.purity_at_m >= 0.99 &&
                        invalid_points(c) == 0;
        o.pass = o.pass && ok;
        o.detail += "d_link=" + std::to_string(twice_link + 1) + ": E_max=" + fmt(c.summary.e_max) +
                    " at lambda=" + fmt(c.summary.lambda_m.value_or(NAN)) + " purity=" + fmt(c.summary.purity_at_m) +
                    " invalid=" + std::to_string(invalid_points(c)) + "; ";
    }
    return o;
}

Outcome degenerate_purity() {
    ChainSpec spec = chain(8, 1, 1);
    spec.lambda = 1e-3;
    const ThermalPoint p = thermal_link_state(spec, 1e3).point;
    return {p.valid && std::abs(p.purity - 0.25) <= 0.02 && p.entanglement < 0.05,
            "purity=" + fmt(p.purity) + " E=" + fmt(p.entanglement) + " k=" + std::to_string(p.k_used)};
}

Outcome biquadratic_window() {
    auto measure = [](const ThermalCurve& c) {
        return std::count_if(c.points.begin(), c.points.end(),
                             [](const ThermalPoint& p) { return p.valid && p.entanglement >= 0.9; });
    };
    const double third = std::numbers::pi / 3.0;
    const ThermalCurve neg = curve(chain(6, 2, 2, -third), 1e4);
    const ThermalCurve zero = curve(chain(6, 2, 2, 0.0), 1e4);
    const ThermalCurve pos = curve(chain(6, 2, 2, third), 1e4);
    const auto m_neg = measure(neg);
    const auto m_zero = measure(zero);
    const bool ok = m_neg > m_zero && pos.summary.e_max < 0.5 &&
                    invalid_points(neg) + invalid_points(zero) + invalid_points(pos) == 0;
    return {ok, "points with E>=0.9 of 48: theta=-pi/3 " + std::to_string(m_neg) + ", theta=0 " +
                    std::to_string(m_zero) + "; theta=+pi/3 E_max=" + fmt(pos.summary.e_max)};
}

Outcome next_nearest_robustness() {
    Outcome o{true, ""};
    for (int twice_link : {1, 2}) {
        const double base = curve(chain(8, 1, twice_link), 1e4).summary.e_max;
        o.detail += "d_link=" + std::to_string(twice_link + 1) + ": E_max(0)=" + fmt(base);
        for (double j2 : {0.1, 0.2}) {
            const ThermalCurve c = curve(chain(8, 1, twice_link, 0.0, j2), 1e4);
            const double diff = std::abs(c.summary.e_max - base);
            o.pass = o.pass && diff < 0.05 && invalid_points(c) == 0;
            o.detail += " E_max(" + fmt(j2) + ")=" + fmt(c.summary.e_max);
        }
        o.detail += "; ";
    }
    return o;
}

OmegaScan quench_scan(const ChainSpec& spec, LinkSeed seed, double horizon_factor) {
    QuenchSetup q;
    q.spec = spec;
    q.link_state = seed;
    q.times = default_time_grid(spec, horizon_factor * std::numbers::pi / (spec.lambda * spec.j));
    return maximize_over_omega(q, uniform_omega_grid(33), {}, worker_count());
}

Outcome qutrit_quench() {
    Outcome o{true, ""};
    for (double lambda : {0.01, 0.02, 0.03}) {
        ChainSpec spec = chain(6, 2, 2);
        spec.lambda = lambda;
        const OmegaScan s = quench_scan(spec, LinkSeed::one, 32.0);
        o.pass = o.pass && s.e_max >= 0.95;
        o.detail += "lambda=" + fmt(lambda) + ": E_max=" + fmt(s.e_max) + " (omega=" + fmt(s.omega_star) +
                    ", t=" + fmt(s.t_star) + "); ";
    }
    o.detail += "horizon 32 pi/lambda";
    return o;
}

Outcome size_trend() {
    Outcome o{true, ""};
    double last_peak = -1.0;
    double last_avg = -1.0;
    for (int n : {8, 10, 12}) {
        ChainSpec spec = chain(n, 1, 2);
        spec.lambda = 0.02;
        const OmegaScan s = quench_scan(spec, LinkSeed::zero, 8.0);
        if (last_peak >= 0.0) {
            o.pass = o.pass && s.e_max - last_peak >= -0.02 && s.average_max - last_avg >= -0.02;
        }
        last_peak = s.e_max;
        last_avg = s.average_max;
        o.detail += "N=" + std::to_string(n) + ": E_max=" + fmt(s.e_max) + " avg_max=" + fmt(s.average_max) + "; ";
    }
    o.detail += "lambda=0.02";
    return o;
}

Outcome trivial_dynamics() {
    Outcome o{true, ""};
    double worst_null = 0.0;
    double worst_phi = 0.0;
    for (const ChainSpec& base : {chain(6, 1, 2), chain(6, 2, 2), chain(8, 1, 1), chain(5, 3, 3)}) {
        ChainSpec spec = base;
        spec.lambda = 0.3;
        QuenchSetup q;
        q.spec = spec;
        q.times = default_time_grid(spec);
        worst_null = std::max(worst_null, entanglement_trajectory(q).peak);

        q.omega = 1.0;
        const Trajectory ref = entanglement_trajectory(q);
        for (double phi : {0.5, std::numbers::pi / 2.0, 2.5, std::numbers::pi, 5.0}) {
            q.phi = phi;
            const Trajectory tr = entanglement_trajectory(q);
            for (std::size_t i = 0; i < tr.entanglement.size(); ++i) {
                worst_phi = std::max(worst_phi, std::abs(tr.entanglement[i] - ref.entanglement[i]));
            }
        }
    }
    o.pass = worst_null < 1e-9 && worst_phi < 1e-9;
    o.detail = "max null E=" + fmt(worst_null) + " max phi deviation=" + fmt(worst_phi);
    return o;
}

Outcome oracle_suite() {
    std::vector<ChainSpec> specs;
    const std::vector<double> lambdas = {0.05, 0.3, 1.0};
    std::size_t index = 0;
    for (int n = 4; n <= 12; ++n) {
        for (int tb = 1; tb <= 5; ++tb) {
            for (int tl = 1; tl <= 5; ++tl) {
                ChainSpec s = chain(n, tb, tl, tb >= 2 && tl >= 2 ? -std::numbers::pi / 3.0 : 0.0, 0.1 * (index % 3));
                s.lambda = lambdas[index % lambdas.size()];
                if (chain_layout(n, s.s_link, s.s_bulk).total_dim() <= 1296) {
                    specs.push_back(s);
                    ++index;
                }
            }
        }
    }
    std::vector<oracle::CheckReport> reports(specs.size());
    std::vector<std::string> errors(specs.size());
    parallel_for(specs.size(), worker_count(), [&](std::size_t i) {
        try {
            reports[i] = oracle::check_spec(specs[i]);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    oracle::CheckReport worst;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const oracle::CheckReport& r = reports[i];
        if (!errors[i].empty() || !r.pass() || !r.trace_checked) {
            ++failed;
        }
        worst.eigenvalue_deviation = std::max(worst.eigenvalue_deviation, r.eigenvalue_deviation);
        worst.fidelity_deficit = std::max(worst.fidelity_deficit, r.fidelity_deficit);
        worst.trace_deviation = std::max(worst.trace_deviation, r.trace_deviation);
        worst.hamiltonian_deviation = std::max(worst.hamiltonian_deviation, r.hamiltonian_deviation);
    }
    return {failed == 0, std::to_string(specs.size()) + " specs, " + std::to_string(failed) +
                             " failed; worst eigenvalue=" + fmt(worst.eigenvalue_deviation) +
                             " fidelity deficit=" + fmt(worst.fidelity_deficit) + " trace=" + fmt(worst.trace_deviation) +
                             " hamiltonian=" + fmt(worst.hamiltonian_deviation)};
}

Outcome measure_units() {
    auto maximally_entangled = [](int d) {
        StateVector v = StateVector::Zero(d * d);
        for (int k = 0; k < d; ++k) {
            v(k * d + k) = 1.0 / std::sqrt(static_cast<double>(d));
        }
        return LinkDensityMatrix{d, v * v.adjoint()};
    };
    const double bell = log_negativity(maximally_entangled(2)).normalized;
    const double qutrit = log_negativity(maximally_entangled(3)).normalized;

    const LinkDensityMatrix b = maximally_entangled(2);
    const LinkDensityMatrix werner{2, 0.5 * b.rho + 0.125 * DenseMatrix::Identity(4, 4)};
    const double w = log_negativity(werner).normalized;

    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    auto random_pure = [&](int d) {
        StateVector v(d);
        for (int i = 0; i < d; ++i) {
            const double re = g(rng);
            v(i) = Complex(re, g(rng));
        }
        v.normalize();
        return DenseMatrix(v * v.adjoint());
    };
    double worst_product = 0.0;
    for (int d = 2; d <= 6; ++d) {
        for (int trial = 0; trial < 200; ++trial) {
            DenseMatrix a = random_pure(d);
            DenseMatrix c = random_pure(d);
            if (trial % 2 == 1) {
                a = 0.5 * (a + random_pure(d));
                c = 0.3 * c + 0.7 * random_pure(d);
            }
            worst_product = std::max(
                worst_product,
                log_negativity(LinkDensityMatrix{d, DenseMatrix(Eigen::kroneckerProduct(a, c))}).normalized);
        }
    }
    const bool ok = std::abs(bell - 1.0) < 1e-10 && std::abs(qutrit - 1.0) < 1e-10 && worst_product == 0.0 &&
                    std::abs(w - std::log2(1.25)) < 1e-10;
    return {ok, "Bell=" + fmt(bell) + " qutrit=" + fmt(qutrit) + " max product=" + fmt(worst_product) +
                    " Werner(1/2)-log2(5/4)=" + fmt(w - std::log2(1.25))};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"equilibrium maximum, N=8, beta=1e4", equilibrium_maximum},
        {"degenerate manifold purity, beta=1e3, lambda=1e-3", degenerate_purity},
        {"biquadratic stability window, spin-1 bulk, N=6", biquadratic_window},
        {"next-nearest-neighbour robustness, N=8", next_nearest_robustness},
        {"qutrit link quench, spin-1 bulk, N=6", qutrit_quench},
        {"quench growth with N in {8, 10, 12}", size_trend},
        {"trivial dynamics and azimuth invariance", trivial_dynamics},
        {"oracle equivalence for every dimension <= 1296", oracle_suite},
        {"entanglement measure unit values", measure_units},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        while (o.detail.size() >= 2 && o.detail.compare(o.detail.size() - 2, 2, "; ") == 0) {
            o.detail.resize(o.detail.size() - 2);
        }
        failures += o.pass ? 0 : 1;
        std::cout << "criterion " << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << " " << criteria[i].first << " | "
                  << o.detail << " [" << fmt(seconds) << " s]" << std::endl;
    }
    std::cout << (failures == 0 ? "acceptance PASS" : "acceptance FAIL") << " (" << criteria.size() - failures << "/"
              << criteria.size() << ")" << std::endl;
    return failures == 0 ? 0 : 1;
}
