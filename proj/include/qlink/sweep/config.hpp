// config.hpp - sweep configuration: strict TOML schema with line-numbered diagnostics
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <toml.hpp>

#include "qlink/dynamics.hpp"
#include "qlink/eigensolver.hpp"
#include "qlink/equilibrium.hpp"
#include "qlink/model.hpp"

namespace qlink::sweep {

enum class Mode { thermal, dynamics, oracle_check };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::thermal: return "thermal";
        case Mode::dynamics: return "dynamics";
        case Mode::oracle_check: return "oracle-check";
    }
    return "unknown";
}

inline std::optional<Mode> mode_from_string(std::string_view name) {
    if (name == "thermal") return Mode::thermal;
    if (name == "dynamics") return Mode::dynamics;
    if (name == "oracle-check") return Mode::oracle_check;
    return std::nullopt;
}

/// Rejected configuration; `line` is 0 when the problem is not tied to one line.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string source, std::size_t line, const std::string& message)
        : std::runtime_error(format(source, line, message)), line_(line) {}

    std::size_t line() const noexcept { return line_; }

  private:
    static std::string format(const std::string& source, std::size_t line, const std::string& message) {
        std::string out = source.empty() ? "config" : source;
        if (line > 0) {
            out += ":" + std::to_string(line);
        }
        return out + ": " + message;
    }

    std::size_t line_;
};

struct SweepConfig {
    std::optional<Mode> mode;
    std::string source;

    ChainSpec model;
    std::vector<double> lambdas;
    bool lambda_given = false;
    std::vector<double> betas;

    std::size_t omega_count = 33;
    LinkSeed link_state = LinkSeed::zero;
    double phi = 0.0;
    /// Absolute horizon in units of 1/J, or a multiple of pi / (lambda J).
    std::optional<double> horizon;
    std::optional<double> horizon_factor;
    std::optional<double> time_step;

    double tol = 1e-10;
    double eps = 1e-6;
    std::optional<std::uint64_t> seed;
    std::size_t k_cap = 0;
    std::size_t oracle_cap = default_oracle_cap;
    double chebyshev_tol = 1e-14;
    std::uint64_t max_dim = default_max_dim;

    std::string directory = ".";
    std::vector<std::string> formats{"csv"};
    bool series = true;

    static constexpr double default_horizon_factor = 8.0;
    static constexpr double oracle_horizon = 50.0;
    static constexpr double oracle_step = 1.0;

    /// Time grid for one coupling in dynamics mode.
    std::vector<double> time_grid(double lambda) const {
        ChainSpec spec = model;
        spec.lambda = lambda;
        std::optional<double> t = horizon;
        if (!t) {
            t = horizon_factor.value_or(default_horizon_factor) * std::numbers::pi / (lambda * model.j);
        }
        return default_time_grid(spec, t, time_step);
    }
};

namespace detail {

inline std::size_t line_of(const toml::node& n) { return n.source().begin.line; }

class Reader {
  public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(std::size_t line, const std::string& message) const {
        throw ConfigError(source_, line, message);
    }
    [[noreturn]] void fail(const toml::node& n, const std::string& message) const { fail(line_of(n), message); }

    void check_keys(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) const {
        for (auto&& [key, value] : t) {
            if (!allowed.contains(std::string(key.str()))) {
                std::string list;
                for (const auto& a : allowed) {
                    list += (list.empty() ? "" : ", ") + a;
                }
                fail(key.source().begin.line,
                     "unknown key '" + std::string(key.str()) + "' in " + where + " (allowed: " + list + ")");
            }
        }
    }

    const toml::table* table(const toml::table& parent, const char* key) const {
        const toml::node* n = parent.get(key);
        if (n == nullptr) {
            return nullptr;
        }
        if (!n->is_table()) {
            fail(*n, std::string("'") + key + "' must be a table");
        }
        return n->as_table();
    }

    double number(const toml::node& n, const std::string& name) const {
        if (auto v = n.value_exact<double>()) {
            if (!std::isfinite(*v)) {
                fail(n, name + " must be finite");
            }
            return *v;
        }
        if (auto v = n.value_exact<std::int64_t>()) {
            return static_cast<double>(*v);
        }
        fail(n, name + " must be a number");
    }

    std::int64_t integer(const toml::node& n, const std::string& name) const {
        if (auto v = n.value_exact<std::int64_t>()) {
            return *v;
        }
        fail(n, name + " must be an integer");
    }

    std::string string(const toml::node& n, const std::string& name) const {
        if (auto v = n.value_exact<std::string>()) {
            return *v;
        }
        fail(n, name + " must be a string");
    }

    bool boolean(const toml::node& n, const std::string& name) const {
        if (auto v = n.value_exact<bool>()) {
            return *v;
        }
        fail(n, name + " must be true or false");
    }

    Spin spin(const toml::node& n, const std::string& name) const {
        double s = 0.0;
        if (auto text = n.value_exact<std::string>()) {
            const auto slash = text->find('/');
            try {
                std::size_t used = 0;
                if (slash == std::string::npos) {
                    s = std::stod(*text, &used);
                    if (used != text->size()) {
                        throw std::invalid_argument("trailing characters");
                    }
                } else {
                    const std::string num = text->substr(0, slash);
                    const std::string den = text->substr(slash + 1);
                    if (den != "2") {
                        throw std::invalid_argument("denominator must be 2");
                    }
                    s = std::stod(num, &used) / 2.0;
                    if (used != num.size()) {
                        throw std::invalid_argument("trailing characters");
                    }
                }
            } catch (const std::exception&) {
                fail(n, name + " must be a positive half-integer such as 0.5, 1 or \"3/2\", got \"" + *text + "\"");
            }
        } else {
            s = number(n, name);
        }
        try {
            return Spin::from_value(s);
        } catch (const std::invalid_argument&) {
            std::ostringstream msg;
            msg << name << " must be a positive half-integer (0.5, 1, 1.5, ...), got " << s;
            fail(n, msg.str());
        }
    }

    std::vector<double> numbers(const toml::node& n, const std::string& name) const {
        const toml::array* arr = n.as_array();
        if (arr == nullptr) {
            fail(n, name + " must be an array of numbers");
        }
        std::vector<double> out;
        for (const toml::node& item : *arr) {
            out.push_back(number(item, name + " entry"));
        }
        return out;
    }

    const std::string& source() const noexcept { return source_; }

  private:
    std::string source_;
};

inline void read_model(const Reader& r, const toml::table& t, SweepConfig& c) {
    r.check_keys(t, {"n_sites", "s_bulk", "s_link", "theta", "j2", "j"}, "[model]");
    for (const char* required : {"n_sites", "s_bulk", "s_link"}) {
        if (!t.contains(required)) {
            r.fail(line_of(t), std::string("[model] is missing '") + required + "'");
        }
    }
    const toml::node& n = *t.get("n_sites");
    const std::int64_t sites = r.integer(n, "n_sites");
    if (sites < 4) {
        r.fail(n, "n_sites must be at least 4 (two link sites plus at least two bulk sites), got " +
                      std::to_string(sites));
    }
    if (sites > 64) {
        r.fail(n, "n_sites must be at most 64, got " + std::to_string(sites));
    }
    c.model.n_sites = static_cast<int>(sites);
    c.model.s_bulk = r.spin(*t.get("s_bulk"), "s_bulk");
    c.model.s_link = r.spin(*t.get("s_link"), "s_link");
    if (const toml::node* v = t.get("theta")) {
        c.model.theta = r.number(*v, "theta");
    }
    if (const toml::node* v = t.get("j2")) {
        c.model.j2 = r.number(*v, "j2");
    }
    if (const toml::node* v = t.get("j")) {
        c.model.j = r.number(*v, "j");
        if (!(c.model.j > 0.0)) {
            r.fail(*v, "j must be positive (antiferromagnetic energy unit)");
        }
    }
}

inline void read_grid(const Reader& r, const toml::table& t, SweepConfig& c) {
    r.check_keys(t,
                 {"lambda", "lambda_log", "beta", "omega_count", "link_state", "phi", "horizon", "horizon_factor",
                  "time_step"},
                 "[grid]");
    const toml::node* list = t.get("lambda");
    const toml::node* log = t.get("lambda_log");
    if (list != nullptr && log != nullptr) {
        r.fail(*log, "give either lambda or lambda_log, not both");
    }
    c.lambda_given = list != nullptr || log != nullptr;
    if (list != nullptr) {
        c.lambdas = r.numbers(*list, "lambda");
        if (c.lambdas.empty()) {
            r.fail(*list, "lambda grid is empty");
        }
        for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
            if (!(c.lambdas[i] >= 0.0)) {
                r.fail(*list, "lambda values must be non-negative");
            }
            if (i > 0 && !(c.lambdas[i] > c.lambdas[i - 1])) {
                r.fail(*list, "lambda values must be strictly ascending");
            }
        }
    }
    if (log != nullptr) {
        const toml::table* lt = log->as_table();
        if (lt == nullptr) {
            r.fail(*log, "lambda_log must be a table {min, max, count}");
        }
        r.check_keys(*lt, {"min", "max", "count"}, "lambda_log");
        for (const char* required : {"min", "max", "count"}) {
            if (!lt->contains(required)) {
                r.fail(*log, std::string("lambda_log is missing '") + required + "'");
            }
        }
        const double lo = r.number(*lt->get("min"), "lambda_log.min");
        const double hi = r.number(*lt->get("max"), "lambda_log.max");
        const std::int64_t count = r.integer(*lt->get("count"), "lambda_log.count");
        if (!(lo > 0.0) || !(hi >= lo)) {
            r.fail(*log, "lambda_log needs 0 < min <= max");
        }
        if (count < 1 || count > 100000) {
            r.fail(*lt->get("count"), "lambda_log.count must lie in [1, 100000]");
        }
        c.lambdas = log_grid(lo, hi, static_cast<std::size_t>(count));
    }
    if (const toml::node* v = t.get("beta")) {
        c.betas = r.numbers(*v, "beta");
        if (c.betas.empty()) {
            r.fail(*v, "beta list is empty");
        }
        for (double b : c.betas) {
            if (!(b > 0.0)) {
                r.fail(*v, "beta values must be positive");
            }
        }
    }
    if (const toml::node* v = t.get("omega_count")) {
        const std::int64_t count = r.integer(*v, "omega_count");
        if (count < 1 || count > 100000) {
            r.fail(*v, "omega_count must lie in [1, 100000]");
        }
        c.omega_count = static_cast<std::size_t>(count);
    }
    if (const toml::node* v = t.get("link_state")) {
        try {
            c.link_state = link_seed_from_string(r.string(*v, "link_state"));
        } catch (const std::invalid_argument& e) {
            r.fail(*v, e.what());
        }
    }
    if (const toml::node* v = t.get("phi")) {
        c.phi = r.number(*v, "phi");
        if (!(c.phi >= 0.0 && c.phi < 2.0 * std::numbers::pi)) {
            r.fail(*v, "phi must lie in [0, 2 pi)");
        }
    }
    const toml::node* h = t.get("horizon");
    const toml::node* hf = t.get("horizon_factor");
    if (h != nullptr && hf != nullptr) {
        r.fail(*hf, "give either horizon or horizon_factor, not both");
    }
    if (h != nullptr) {
        c.horizon = r.number(*h, "horizon");
        if (!(*c.horizon > 0.0)) {
            r.fail(*h, "horizon must be positive");
        }
    }
    if (hf != nullptr) {
        c.horizon_factor = r.number(*hf, "horizon_factor");
        if (!(*c.horizon_factor > 0.0)) {
            r.fail(*hf, "horizon_factor must be positive");
        }
    }
    if (const toml::node* v = t.get("time_step")) {
        c.time_step = r.number(*v, "time_step");
        if (!(*c.time_step > 0.0)) {
            r.fail(*v, "time_step must be positive");
        }
    }
}

inline void read_solver(const Reader& r, const toml::table& t, SweepConfig& c) {
    r.check_keys(t, {"tol", "eps", "seed", "k_cap", "oracle_cap", "chebyshev_tol", "max_dim"}, "[solver]");
    auto positive = [&](const char* key, double& target) {
        if (const toml::node* v = t.get(key)) {
            target = r.number(*v, key);
            if (!(target > 0.0)) {
                r.fail(*v, std::string(key) + " must be positive");
            }
        }
    };
    positive("tol", c.tol);
    positive("eps", c.eps);
    positive("chebyshev_tol", c.chebyshev_tol);
    if (c.eps >= 1.0) {
        r.fail(*t.get("eps"), "eps must be below 1");
    }
    if (const toml::node* v = t.get("seed")) {
        const std::int64_t s = r.integer(*v, "seed");
        if (s < 0) {
            r.fail(*v, "seed must be non-negative");
        }
        c.seed = static_cast<std::uint64_t>(s);
    }
    auto count = [&](const char* key, auto& target, std::int64_t lo) {
        if (const toml::node* v = t.get(key)) {
            const std::int64_t x = r.integer(*v, key);
            if (x < lo) {
                r.fail(*v, std::string(key) + " must be at least " + std::to_string(lo));
            }
            target = static_cast<std::remove_reference_t<decltype(target)>>(x);
        }
    };
    count("k_cap", c.k_cap, 0);
    count("oracle_cap", c.oracle_cap, 2);
    count("max_dim", c.max_dim, 2);
}

inline void read_output(const Reader& r, const toml::table& t, SweepConfig& c) {
    r.check_keys(t, {"directory", "formats", "series"}, "[output]");
    if (const toml::node* v = t.get("directory")) {
        c.directory = r.string(*v, "directory");
        if (c.directory.empty()) {
            r.fail(*v, "directory must not be empty");
        }
    }
    if (const toml::node* v = t.get("formats")) {
        const toml::array* arr = v->as_array();
        if (arr == nullptr || arr->empty()) {
            r.fail(*v, "formats must be a non-empty array of strings");
        }
        c.formats.clear();
        for (const toml::node& item : *arr) {
            const std::string f = r.string(item, "formats entry");
            if (f != "csv") {
                r.fail(item, "unsupported output format '" + f + "' (only csv)");
            }
            c.formats.push_back(f);
        }
    }
    if (const toml::node* v = t.get("series")) {
        c.series = r.boolean(*v, "series");
    }
}

}  // namespace detail

/// Range checks that involve several blocks at once.
inline void check_consistency(const SweepConfig& c) {
    auto fail = [&](const std::string& message) { throw ConfigError(c.source, 0, message); };
    if (!c.mode) {
        fail("mode is not set");
    }
    if (!c.seed) {
        fail("seed is mandatory (set [solver] seed or pass --seed)");
    }
    std::uint64_t dim = 0;
    try {
        dim = c.model.layout().total_dim();
    } catch (const std::length_error& e) {
        fail(std::string("model is too large: ") + e.what());
    }
    if (dim > c.max_dim) {
        fail("Hilbert space dimension " + std::to_string(dim) + " exceeds max_dim " + std::to_string(c.max_dim));
    }
    if (c.lambdas.empty()) {
        fail("lambda grid is empty");
    }
    switch (*c.mode) {
        case Mode::thermal:
            if (c.betas.empty()) {
                fail("thermal mode needs a beta list in [grid]");
            }
            break;
        case Mode::dynamics:
            if (!c.horizon) {
                for (double l : c.lambdas) {
                    if (l == 0.0) {
                        fail("lambda = 0 in dynamics mode needs an explicit horizon");
                    }
                }
            }
            if (c.link_state == LinkSeed::one && c.model.s_link.dim() < 2) {
                fail("link_state one needs a link dimension of at least 2");
            }
            break;
        case Mode::oracle_check:
            if (dim > c.oracle_cap) {
                fail("oracle-check needs dimension " + std::to_string(dim) + " <= oracle_cap " +
                     std::to_string(c.oracle_cap));
            }
            break;
    }
}

/// Parses a config document. `source` names it in diagnostics.
inline SweepConfig parse_config(std::string_view text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(source, e.source().begin.line, std::string(e.description()));
    }
    detail::Reader r(source);
    r.check_keys(root, {"mode", "model", "grid", "solver", "output"}, "the top level");

    SweepConfig c;
    c.source = source;
    if (const toml::node* v = root.get("mode")) {
        const std::string name = r.string(*v, "mode");
        c.mode = mode_from_string(name);
        if (!c.mode) {
            r.fail(*v, "unknown mode '" + name + "' (expected thermal, dynamics or oracle-check)");
        }
    }
    const toml::table* model = r.table(root, "model");
    if (model == nullptr) {
        r.fail(0, "missing [model] table");
    }
    detail::read_model(r, *model, c);
    if (const toml::table* grid = r.table(root, "grid")) {
        detail::read_grid(r, *grid, c);
    }
    if (const toml::table* solver = r.table(root, "solver")) {
        detail::read_solver(r, *solver, c);
    }
    if (const toml::table* output = r.table(root, "output")) {
        detail::read_output(r, *output, c);
    }
    return c;
}

/// Applies the subcommand and command-line overrides, fills mode-specific
/// defaults and runs the cross-block checks.
inline void resolve(SweepConfig& c, std::optional<Mode> requested, std::optional<std::uint64_t> seed_override) {
    if (requested) {
        if (c.mode && *c.mode != *requested) {
            throw ConfigError(c.source, 0,
                              "config declares mode " + to_string(*c.mode) + " but the command is " +
                                  to_string(*requested));
        }
        c.mode = requested;
    }
    if (seed_override) {
        c.seed = seed_override;
    }
    if (!c.lambda_given && c.mode == Mode::thermal) {
        c.lambdas = log_grid(1e-3, 1.0, 48);
    }
    check_consistency(c);
}

}  // namespace qlink::sweep
