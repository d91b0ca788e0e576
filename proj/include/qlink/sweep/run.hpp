// run.hpp - sweep execution: point scheduling, CSV tables and the JSON manifest
#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlink/dynamics.hpp"
#include "qlink/equilibrium.hpp"
#include "qlink/oracle.hpp"
#include "qlink/parallel.hpp"
#include "qlink/sweep/config.hpp"

namespace qlink::sweep {

inline constexpr const char* tool_name = "qlink";
inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_io = 4 };

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Shortest text that parses back to the same double.
inline std::string format_number(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char ch : s) {
        out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    }
    return out + "\"";
}

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_row(header); }

    CsvTable& cell(const std::string& s) {
        row_.push_back(csv_field(s));
        return *this;
    }
    CsvTable& cell(const char* s) { return cell(std::string(s)); }
    CsvTable& cell(double x) { return cell(format_number(x)); }
    CsvTable& cell(std::uint64_t x) { return cell(std::to_string(x)); }
    CsvTable& cell(bool b) { return cell(std::string(b ? "true" : "false")); }

    void end_row() {
        if (row_.size() != columns_) {
            throw std::logic_error("CSV row has " + std::to_string(row_.size()) + " cells, header has " +
                                   std::to_string(columns_));
        }
        add_row(row_);
        row_.clear();
    }

    const std::string& text() const noexcept { return text_; }

  private:
    void add_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            text_ += (i ? "," : "") + cells[i];
        }
        text_ += '\n';
    }

    std::size_t columns_;
    std::vector<std::string> row_;
    std::string text_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << text;
    out.close();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

inline nlohmann::json resolved_json(const SweepConfig& c) {
    nlohmann::json j;
    j["mode"] = c.mode ? to_string(*c.mode) : "";
    j["model"] = {{"n_sites", c.model.n_sites},
                  {"s_bulk", c.model.s_bulk.value()},
                  {"s_link", c.model.s_link.value()},
                  {"theta", c.model.theta},
                  {"j2", c.model.j2},
                  {"j", c.model.j},
                  {"dim", c.model.layout().total_dim()}};
    nlohmann::json grid = {{"lambda", c.lambdas}};
    if (c.mode == Mode::thermal) {
        grid["beta"] = c.betas;
    }
    if (c.mode == Mode::dynamics) {
        grid["omega_count"] = c.omega_count;
        grid["link_state"] = to_string(c.link_state);
        grid["phi"] = c.phi;
        if (c.horizon) {
            grid["horizon"] = *c.horizon;
        } else {
            grid["horizon_factor"] = c.horizon_factor.value_or(SweepConfig::default_horizon_factor);
        }
        if (c.time_step) {
            grid["time_step"] = *c.time_step;
        }
    }
    if (c.mode == Mode::oracle_check) {
        grid["horizon"] = c.horizon.value_or(SweepConfig::oracle_horizon);
        grid["time_step"] = c.time_step.value_or(SweepConfig::oracle_step);
    }
    j["grid"] = grid;
    j["solver"] = {{"tol", c.tol},
                   {"eps", c.eps},
                   {"seed", c.seed.value_or(0)},
                   {"k_cap", c.k_cap},
                   {"oracle_cap", c.oracle_cap},
                   {"chebyshev_tol", c.chebyshev_tol},
                   {"max_dim", c.max_dim}};
    j["output"] = {{"directory", c.directory}, {"formats", c.formats}, {"series", c.series}};
    return j;
}

struct RunOptions {
    std::optional<std::string> out_dir;
    unsigned threads = 1;
    /// Empty means "now".
    std::string timestamp;
};

struct RunResult {
    int exit_code = exit_ok;
    std::filesystem::path table;
    std::filesystem::path manifest;
    std::size_t points = 0;
    std::size_t failed = 0;
};

struct Tables {
    CsvTable main;
    std::optional<CsvTable> series;
    nlohmann::json summary;
    nlohmann::json certificates;
    std::size_t points = 0;
    std::size_t failed = 0;
    bool any_check_failed = false;
};

inline Tables run_thermal(const SweepConfig& c, unsigned threads) {
    Tables out{CsvTable({"beta", "lambda", "entanglement", "purity", "k_used", "truncation_margin", "ground_energy",
                         "max_residual", "status", "error"}),
               std::nullopt, nlohmann::json::array(), nlohmann::json::object()};
    ThermalOptions opts;
    opts.eps = c.eps;
    opts.k_cap = c.k_cap;
    opts.max_dim = c.max_dim;
    opts.lanczos.tol = c.tol;
    opts.lanczos.seed = *c.seed;

    const std::size_t nl = c.lambdas.size();
    std::vector<ThermalPoint> points(c.betas.size() * nl);
    std::vector<char> failed(points.size(), 0);
    parallel_for(points.size(), threads, [&](std::size_t i) {
        ChainSpec spec = c.model;
        spec.lambda = c.lambdas[i % nl];
        const double beta = c.betas[i / nl];
        try {
            points[i] = thermal_link_state(spec, beta, opts).point;
        } catch (const std::exception& e) {
            points[i] = ThermalPoint{};
            points[i].lambda = spec.lambda;
            points[i].beta = beta;
            points[i].error = e.what();
            failed[i] = 1;
        }
    });

    std::size_t uncertified = 0;
    double worst_margin = 0.0;
    double worst_residual = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const ThermalPoint& p = points[i];
        const std::string status = failed[i] ? "failed" : p.valid ? "ok" : "uncertified";
        out.main.cell(p.beta).cell(p.lambda);
        if (failed[i]) {
            out.main.cell("").cell("").cell("").cell("").cell("").cell("");
        } else {
            out.main.cell(p.entanglement)
                .cell(p.purity)
                .cell(static_cast<std::uint64_t>(p.k_used))
                .cell(p.truncation_margin)
                .cell(p.ground_energy)
                .cell(p.max_residual);
            worst_margin = std::max(worst_margin, p.truncation_margin);
            worst_residual = std::max(worst_residual, p.max_residual);
        }
        out.main.cell(status).cell(p.error);
        out.main.end_row();
        out.failed += failed[i] ? 1 : 0;
        uncertified += (!failed[i] && !p.valid) ? 1 : 0;
    }
    out.points = points.size();
    for (std::size_t b = 0; b < c.betas.size(); ++b) {
        const std::vector<ThermalPoint> curve(points.begin() + static_cast<std::ptrdiff_t>(b * nl),
                                              points.begin() + static_cast<std::ptrdiff_t>((b + 1) * nl));
        const CurveSummary s = summarize_curve(curve);
        nlohmann::json row = {{"beta", c.betas[b]}, {"partial", s.partial}};
        row["lambda_m"] = s.lambda_m ? nlohmann::json(*s.lambda_m) : nlohmann::json(nullptr);
        row["e_max"] = s.e_max;
        row["purity_at_lambda_m"] = s.purity_at_m;
        row["lambda_v"] = s.lambda_v ? nlohmann::json(*s.lambda_v) : nlohmann::json(nullptr);
        out.summary.push_back(row);
    }
    out.certificates = {{"points", points.size()},
                        {"failed", out.failed},
                        {"uncertified", uncertified},
                        {"max_truncation_margin", worst_margin},
                        {"max_residual", worst_residual},
                        {"lambda_v_threshold", vanishing_entanglement}};
    return out;
}

inline Tables run_dynamics(const SweepConfig& c, unsigned threads) {
    Tables out{CsvTable({"lambda", "omega", "phi", "peak", "peak_time", "time_average", "average_converged",
                         "max_norm_drift", "energy_drift", "sz_drift", "chebyshev_terms", "steps", "time_step",
                         "status", "error"}),
               std::nullopt, nlohmann::json::array(), nlohmann::json::object()};
    if (c.series) {
        out.series.emplace(std::vector<std::string>{"lambda", "omega", "t", "entanglement", "norm_drift"});
    }
    const std::vector<double> omegas = uniform_omega_grid(c.omega_count);
    const std::size_t nw = omegas.size();

    std::vector<Hamiltonian> hams;
    std::vector<SpectralBounds> bounds;
    std::vector<std::vector<double>> grids;
    for (double lambda : c.lambdas) {
        ChainSpec spec = c.model;
        spec.lambda = lambda;
        hams.push_back(build_hamiltonian(spec, c.max_dim));
        bounds.push_back(spectral_bounds(hams.back().matrix, *c.seed));
        grids.push_back(c.time_grid(lambda));
    }

    std::vector<Trajectory> trajs(c.lambdas.size() * nw);
    std::vector<std::string> errors(trajs.size());
    parallel_for(trajs.size(), threads, [&](std::size_t i) {
        const std::size_t l = i / nw;
        QuenchSetup setup;
        setup.spec = c.model;
        setup.spec.lambda = c.lambdas[l];
        setup.link_state = c.link_state;
        setup.omega = omegas[i % nw];
        setup.phi = c.phi;
        setup.times = grids[l];
        setup.chebyshev_tol = c.chebyshev_tol;
        try {
            trajs[i] = entanglement_trajectory(setup, hams[l], bounds[l]);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    double worst_drift = 0.0;
    double worst_energy = 0.0;
    double worst_sz = 0.0;
    for (std::size_t l = 0; l < c.lambdas.size(); ++l) {
        const auto& times = grids[l];
        const double dt = times.size() > 1 ? times[1] - times[0] : 0.0;
        std::optional<std::size_t> best_peak;
        std::optional<std::size_t> best_avg;
        for (std::size_t w = 0; w < nw; ++w) {
            const std::size_t i = l * nw + w;
            const Trajectory& tr = trajs[i];
            const bool ok = errors[i].empty();
            out.main.cell(c.lambdas[l]).cell(omegas[w]).cell(c.phi);
            if (ok) {
                out.main.cell(tr.peak)
                    .cell(tr.peak_time)
                    .cell(tr.time_average)
                    .cell(tr.average_converged)
                    .cell(tr.max_norm_drift)
                    .cell(tr.energy_drift)
                    .cell(tr.sz_drift)
                    .cell(static_cast<std::uint64_t>(tr.chebyshev_terms));
                worst_drift = std::max(worst_drift, tr.max_norm_drift);
                worst_energy = std::max(worst_energy, tr.energy_drift);
                worst_sz = std::max(worst_sz, tr.sz_drift);
                // Strict comparisons keep the smaller omega on ties.
                if (!best_peak || tr.peak > trajs[l * nw + *best_peak].peak) {
                    best_peak = w;
                }
                if (!best_avg || tr.time_average > trajs[l * nw + *best_avg].time_average) {
                    best_avg = w;
                }
            } else {
                for (int k = 0; k < 8; ++k) {
                    out.main.cell("");
                }
                ++out.failed;
            }
            out.main.cell(static_cast<std::uint64_t>(times.size()))
                .cell(dt)
                .cell(std::string(ok ? "ok" : "failed"))
                .cell(errors[i]);
            out.main.end_row();
            if (out.series && ok) {
                for (std::size_t k = 0; k < tr.times.size(); ++k) {
                    out.series->cell(c.lambdas[l]).cell(omegas[w]).cell(tr.times[k]).cell(tr.entanglement[k]).cell(
                        tr.norm_drift[k]);
                    out.series->end_row();
                }
            }
        }
        nlohmann::json row = {{"lambda", c.lambdas[l]},
                              {"spectral_lower", bounds[l].lower},
                              {"spectral_upper", bounds[l].upper},
                              {"time_step", dt},
                              {"horizon", times.back()}};
        if (best_peak) {
            const Trajectory& tr = trajs[l * nw + *best_peak];
            row["e_max"] = tr.peak;
            row["t_star"] = tr.peak_time;
            row["omega_star"] = omegas[*best_peak];
            const Trajectory& ta = trajs[l * nw + *best_avg];
            row["average_max"] = ta.time_average;
            row["omega_average_star"] = omegas[*best_avg];
            row["average_converged"] = ta.average_converged;
        }
        out.summary.push_back(row);
    }
    out.points = trajs.size();
    out.certificates = {{"points", trajs.size()},
                        {"failed", out.failed},
                        {"max_norm_drift", worst_drift},
                        {"max_energy_drift", worst_energy},
                        {"max_sz_drift", worst_sz},
                        {"average_convergence_threshold", average_convergence_threshold}};
    return out;
}

inline Tables run_oracle_check(const SweepConfig& c, unsigned threads, std::ostream& report) {
    Tables out{CsvTable({"lambda", "dim", "k", "hamiltonian_deviation", "eigenvalue_deviation", "max_residual",
                         "fidelity_deficit", "trace_deviation", "trace_checked", "status", "error"}),
               std::nullopt, nlohmann::json::array(), nlohmann::json::object()};
    oracle::CheckOptions opts;
    opts.tol = c.tol;
    opts.seed = *c.seed;
    opts.cap = c.oracle_cap;
    opts.horizon = c.horizon.value_or(SweepConfig::oracle_horizon);
    opts.step = c.time_step.value_or(SweepConfig::oracle_step);
    opts.chebyshev_tol = c.chebyshev_tol;

    std::vector<oracle::CheckReport> reports(c.lambdas.size());
    std::vector<std::string> errors(c.lambdas.size());
    parallel_for(c.lambdas.size(), threads, [&](std::size_t i) {
        ChainSpec spec = c.model;
        spec.lambda = c.lambdas[i];
        try {
            reports[i] = oracle::check_spec(spec, opts);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const oracle::CheckReport& r = reports[i];
        const bool ok = errors[i].empty();
        const bool pass = ok && r.pass();
        out.main.cell(c.lambdas[i]);
        if (ok) {
            out.main.cell(r.dim)
                .cell(static_cast<std::uint64_t>(r.k))
                .cell(r.hamiltonian_deviation)
                .cell(r.eigenvalue_deviation)
                .cell(r.max_residual)
                .cell(r.fidelity_deficit)
                .cell(r.trace_deviation)
                .cell(r.trace_checked);
        } else {
            for (int k = 0; k < 8; ++k) {
                out.main.cell("");
            }
            ++out.failed;
        }
        out.main.cell(std::string(pass ? "PASS" : "FAIL")).cell(errors[i]);
        out.main.end_row();
        out.any_check_failed = out.any_check_failed || !pass;
        report << (pass ? "PASS" : "FAIL") << " lambda=" << format_number(c.lambdas[i]);
        if (ok) {
            report << " eigenvalue_deviation=" << r.eigenvalue_deviation << " fidelity_deficit=" << r.fidelity_deficit
                   << " trace_deviation=" << r.trace_deviation;
        } else {
            report << " error: " << errors[i];
        }
        report << '\n';
    }
    out.points = reports.size();
    out.certificates = {{"points", reports.size()},
                        {"failed", out.failed},
                        {"bounds",
                         {{"eigenvalue", oracle::CheckReport::eigenvalue_bound},
                          {"fidelity", oracle::CheckReport::fidelity_bound},
                          {"trace", oracle::CheckReport::trace_bound},
                          {"hamiltonian", oracle::CheckReport::hamiltonian_bound}}}};
    out.summary = {{"pass", !out.any_check_failed}};
    report << "oracle-check " << (out.any_check_failed ? "FAIL" : "PASS") << '\n';
    return out;
}

/// Runs a resolved config and writes `<mode>_<timestamp>.csv` plus manifest.json.
inline RunResult run(const SweepConfig& c, const RunOptions& opts, std::ostream& report = std::cout) {
    namespace fs = std::filesystem;
    const Mode mode = c.mode.value();
    const unsigned threads = std::max(1u, opts.threads);
    Tables tables = [&] {
        switch (mode) {
            case Mode::thermal: return run_thermal(c, threads);
            case Mode::dynamics: return run_dynamics(c, threads);
            case Mode::oracle_check: return run_oracle_check(c, threads, report);
        }
        throw std::logic_error("unhandled mode");
    }();

    RunResult result;
    result.points = tables.points;
    result.failed = tables.failed;
    const fs::path dir = opts.out_dir.value_or(c.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    const std::string stamp = opts.timestamp.empty() ? utc_timestamp() : opts.timestamp;
    std::string stem = to_string(mode) + "_" + stamp;
    for (int n = 1; fs::exists(dir / (stem + ".csv")); ++n) {
        stem = to_string(mode) + "_" + stamp + "_" + std::to_string(n);
    }
    result.table = dir / (stem + ".csv");
    write_file(result.table, tables.main.text());
    std::optional<fs::path> series_path;
    if (tables.series) {
        series_path = dir / (stem + "_series.csv");
        write_file(*series_path, tables.series->text());
    }

    nlohmann::json manifest;
    manifest["tool"] = {{"name", tool_name}, {"version", tool_version}};
    manifest["mode"] = to_string(mode);
    manifest["timestamp"] = stamp;
    manifest["config_source"] = c.source;
    manifest["seed"] = *c.seed;
    manifest["threads"] = threads;
    manifest["config"] = resolved_json(c);
    manifest["table"] = result.table.filename().string();
    if (series_path) {
        manifest["series"] = series_path->filename().string();
    }
    manifest["summary"] = tables.summary;
    manifest["certificates"] = tables.certificates;
    result.manifest = dir / "manifest.json";
    write_file(result.manifest, manifest.dump(2) + "\n");

    if (tables.points > 0 && tables.failed == tables.points) {
        result.exit_code = exit_solver;
    } else if (mode == Mode::oracle_check && tables.any_check_failed) {
        result.exit_code = exit_solver;
    }
    return result;
}

}  // namespace qlink::sweep
