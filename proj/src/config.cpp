#include "mvflow/config.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "mvflow/coefficients.hpp"
#include "mvflow/error.hpp"

namespace mvflow {

InitialSampler SamplerSpec::build(std::size_t dim) const {
    std::vector<double> m = mean;
    if (m.size() == 1 && dim > 1) m.assign(dim, m[0]);
    if (m.size() != dim) {
        throw ConfigError("initial mean has " + std::to_string(m.size()) + " entries for dimension " +
                          std::to_string(dim));
    }
    if (kind == "dirac") return InitialSampler::dirac(std::move(m));
    return InitialSampler::isotropic_gaussian(std::move(m), std);
}

MeasureFlow FlowSpec::build(const TimeGrid& grid, std::size_t dim) const {
    const auto times = grid.times();
    std::vector<EmpiricalMeasure> ms;
    ms.reserve(times.size());
    std::vector<double> quantiles;
    if (kind == "gaussian") {
        const boost::math::normal_distribution<double> z;
        for (std::size_t i = 0; i < atoms; ++i) {
            quantiles.push_back(boost::math::quantile(z, (static_cast<double>(i) + 0.5) / static_cast<double>(atoms)));
        }
    }
    for (double t : times) {
        if (kind == "dirac") {
            ms.push_back(EmpiricalMeasure::dirac(std::vector<double>(dim, location + velocity * t)));
        } else if (kind == "two_atom") {
            const double p = p0 + (p1 - p0) * t / grid.t_end();
            std::vector<double> coords(dim, left);
            coords.resize(2 * dim, right);
            ms.emplace_back(dim, std::move(coords), std::vector<double>{p, 1.0 - p});
        } else {
            std::vector<double> coords;
            coords.reserve(atoms * dim);
            for (double q : quantiles) coords.insert(coords.end(), dim, mean + velocity * t + std * q);
            ms.push_back(EmpiricalMeasure::uniform(dim, std::move(coords)));
        }
    }
    return MeasureFlow(times, std::move(ms));
}

CoefficientSet ExperimentConfig::coefficients() const {
    try {
        return make_preset(preset, preset_params);
    } catch (const InvalidArgument& e) {
        const auto it = key_lines.find("coefficients.preset");
        throw ConfigError((it == key_lines.end() ? std::string() : "line " + std::to_string(it->second) + ": ") +
                          e.what());
    }
}

PicardOptions ExperimentConfig::picard_options() const {
    PicardOptions o;
    o.metric = FlowMetric::parse(metric, theta);
    o.tol = tol;
    o.max_iter = max_iter;
    o.n_paths = n_paths;
    o.seed = seed;
    o.windowed = windowed;
    return o;
}

namespace {

struct Value {
    enum class Type { number, boolean, string, list };
    Type type = Type::string;
    double number = 0.0;
    bool boolean = false;
    std::string text;
    std::vector<double> list;
};

const char* type_name(Value::Type t) {
    switch (t) {
        case Value::Type::number: return "number";
        case Value::Type::boolean: return "boolean";
        case Value::Type::string: return "string";
        case Value::Type::list: return "list of numbers";
    }
    return "?";
}

[[noreturn]] void fail(std::size_t line, const std::string& message) {
    throw ConfigError("line " + std::to_string(line) + ": " + message);
}

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && quoted) {
            ++i;
        } else if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

Value parse_value(const std::string& raw, std::size_t line) {
    Value v;
    if (raw.empty()) fail(line, "missing value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') fail(line, "unterminated string");
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\') {
                if (i + 2 >= raw.size()) fail(line, "dangling escape in string");
                v.text += raw[++i];
            } else if (raw[i] == '"') {
                fail(line, "unexpected quote inside string");
            } else {
                v.text += raw[i];
            }
        }
        v.type = Value::Type::string;
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.type = Value::Type::boolean;
        v.boolean = raw == "true";
        return v;
    }
    if (parse_double(raw, v.number)) {
        v.type = Value::Type::number;
        v.list = {v.number};
        return v;
    }
    if (raw.find(',') != std::string::npos) {
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double x = 0.0;
            if (!parse_double(trim(item), x)) fail(line, "list entry '" + trim(item) + "' is not a number");
            v.list.push_back(x);
        }
        if (raw.back() == ',') fail(line, "trailing comma in list");
        v.type = Value::Type::list;
        return v;
    }
    for (char c : raw) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '/')) {
            fail(line, "cannot read value '" + raw + "' (quote strings containing spaces or symbols)");
        }
    }
    v.type = Value::Type::string;
    v.text = raw;
    return v;
}

struct Setter {
    std::function<void(ExperimentConfig&, const Value&, std::size_t)> apply;
};

void expect(const Value& v, Value::Type t, const std::string& key, std::size_t line) {
    // a single number is also a one-element list
    if (v.type == t || (t == Value::Type::list && v.type == Value::Type::number)) return;
    fail(line, "key '" + key + "' expects a " + type_name(t) + ", got a " + type_name(v.type));
}

double finite_number(const Value& v, const std::string& key, std::size_t line) {
    expect(v, Value::Type::number, key, line);
    if (!std::isfinite(v.number)) fail(line, "key '" + key + "' must be finite");
    return v.number;
}

double positive(const Value& v, const std::string& key, std::size_t line) {
    const double x = finite_number(v, key, line);
    if (!(x > 0.0)) fail(line, "key '" + key + "' must be positive");
    return x;
}

double nonnegative(const Value& v, const std::string& key, std::size_t line) {
    const double x = finite_number(v, key, line);
    if (!(x >= 0.0)) fail(line, "key '" + key + "' must be nonnegative");
    return x;
}

std::uint64_t integer(double x, const std::string& key, std::size_t line, double lo) {
    if (x != std::floor(x) || x < lo || x > 9007199254740992.0) {
        fail(line, "key '" + key + "' must be an integer >= " + std::to_string(static_cast<long long>(lo)));
    }
    return static_cast<std::uint64_t>(x);
}

std::size_t count(const Value& v, const std::string& key, std::size_t line) {
    return integer(finite_number(v, key, line), key, line, 1.0);
}

std::string one_of(const Value& v, const std::string& key, std::size_t line, std::initializer_list<const char*> allowed) {
    expect(v, Value::Type::string, key, line);
    std::string options;
    for (const char* a : allowed) {
        if (v.text == a) return v.text;
        options += options.empty() ? a : std::string(", ") + a;
    }
    fail(line, "key '" + key + "' must be one of: " + options);
}

using Table = std::map<std::string, Setter>;

void add_sampler_keys(Table& t, const std::string& prefix, SamplerSpec ExperimentConfig::*member, bool ExperimentConfig::*flag) {
    const auto mark = [flag](ExperimentConfig& c) {
        if (flag) c.*flag = true;
    };
    t[prefix + ".kind"] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
        (c.*member).kind = one_of(v, prefix + ".kind", l, {"gaussian", "dirac"});
        mark(c);
    }};
    t[prefix + ".mean"] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
        expect(v, Value::Type::list, prefix + ".mean", l);
        for (double x : v.list) {
            if (!std::isfinite(x)) fail(l, "key '" + prefix + ".mean' must be finite");
        }
        (c.*member).mean = v.list;
        mark(c);
    }};
    t[prefix + ".std"] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
        (c.*member).std = nonnegative(v, prefix + ".std", l);
        mark(c);
    }};
}

void add_flow_keys(Table& t, const std::string& prefix, FlowSpec ExperimentConfig::*member) {
    t[prefix + ".kind"] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
        (c.*member).kind = one_of(v, prefix + ".kind", l, {"dirac", "two_atom", "gaussian"});
        c.has_flows = true;
    }};
    const auto number = [&](const std::string& name, double FlowSpec::*field, int sign) {
        const std::string key = prefix + "." + name;
        t[key] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
            (c.*member).*field = sign > 0 ? positive(v, key, l) : finite_number(v, key, l);
        }};
    };
    number("location", &FlowSpec::location, 0);
    number("velocity", &FlowSpec::velocity, 0);
    number("left", &FlowSpec::left, 0);
    number("right", &FlowSpec::right, 0);
    number("mean", &FlowSpec::mean, 0);
    number("std", &FlowSpec::std, 1);
    for (auto [name, field] : {std::pair{"p0", &FlowSpec::p0}, std::pair{"p1", &FlowSpec::p1}}) {
        const std::string key = prefix + "." + name;
        t[key] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
            const double p = finite_number(v, key, l);
            if (p < 0.0 || p > 1.0) fail(l, "key '" + key + "' must lie in [0, 1]");
            (c.*member).*field = p;
        }};
    }
    t[prefix + ".atoms"] = {[=](ExperimentConfig& c, const Value& v, std::size_t l) {
        (c.*member).atoms = count(v, prefix + ".atoms", l);
    }};
}

const Table& key_table() {
    static const Table table = [] {
        Table t;
        t["kind"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            c.kind = one_of(v, "kind", l, {"stability", "contraction", "picard", "chaos", "distances", "validate"});
        }};
        t["coefficients.preset"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            c.preset = one_of(v, "coefficients.preset", l, {"conv_ou", "conv_tanh", "moment", "feedback", "singular1d"});
        }};
        add_sampler_keys(t, "init", &ExperimentConfig::init, nullptr);
        add_sampler_keys(t, "init_b", &ExperimentConfig::init_b, &ExperimentConfig::has_init_b);
        t["grid.t_end"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.t_end = positive(v, "grid.t_end", l); }};
        t["grid.n_steps"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.n_steps = count(v, "grid.n_steps", l); }};
        t["n_paths"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.n_paths = count(v, "n_paths", l); }};
        t["theta"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            c.theta = finite_number(v, "theta", l);
            if (!(c.theta >= 1.0)) fail(l, "key 'theta' must be >= 1");
        }};
        t["metric"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.metric = one_of(v, "metric", l, {"rho", "rho_tilde"}); }};
        t["tol"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.tol = positive(v, "tol", l); }};
        t["max_iter"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.max_iter = count(v, "max_iter", l); }};
        t["seed"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            c.seed = integer(finite_number(v, "seed", l), "seed", l, 0.0);
        }};
        t["output_dir"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            expect(v, Value::Type::string, "output_dir", l);
            if (v.text.empty()) fail(l, "key 'output_dir' must not be empty");
            c.output_dir = v.text;
        }};
        t["windowed"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            expect(v, Value::Type::boolean, "windowed", l);
            c.windowed = v.boolean;
        }};
        t["allowance"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.allowance = nonnegative(v, "allowance", l); }};
        t["binning_allowance"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            c.binning_allowance = nonnegative(v, "binning_allowance", l);
        }};
        t["probes"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) { c.probes = count(v, "probes", l); }};
        add_flow_keys(t, "flow_a", &ExperimentConfig::flow_a);
        add_flow_keys(t, "flow_b", &ExperimentConfig::flow_b);
        t["chaos.particles"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            expect(v, Value::Type::list, "chaos.particles", l);
            c.chaos_particles.clear();
            for (double x : v.list) c.chaos_particles.push_back(integer(x, "chaos.particles", l, 1.0));
        }};
        t["chaos.oracle_paths"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            c.chaos_oracle_paths = count(v, "chaos.oracle_paths", l);
        }};
        t["export.flow"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            expect(v, Value::Type::boolean, "export.flow", l);
            c.export_flow = v.boolean;
        }};
        t["export.paths"] = {[](ExperimentConfig& c, const Value& v, std::size_t l) {
            expect(v, Value::Type::boolean, "export.paths", l);
            c.export_paths = v.boolean;
        }};
        return t;
    }();
    return table;
}

bool valid_key(const std::string& key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    if (key.find("..") != std::string::npos) return false;
    for (char c : key) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    }
    return true;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    cfg.source_text = text;
    std::map<std::string, std::pair<double, std::size_t>> coefficient_params;

    std::istringstream in(text);
    std::string raw_line;
    std::size_t lineno = 0;
    while (std::getline(in, raw_line)) {
        ++lineno;
        if (!raw_line.empty() && raw_line.back() == '\r') raw_line.pop_back();
        const std::string line = trim(strip_comment(raw_line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string raw_value = trim(std::string_view(line).substr(eq + 1));
        if (!valid_key(key)) fail(lineno, "malformed key '" + key + "'");
        if (const auto seen = cfg.key_lines.find(key); seen != cfg.key_lines.end()) {
            fail(lineno, "duplicate key '" + key + "' (first set on line " + std::to_string(seen->second) + ")");
        }
        const Value value = parse_value(raw_value, lineno);
        cfg.key_lines[key] = lineno;

        if (key.rfind("coefficients.", 0) == 0 && key != "coefficients.preset") {
            const std::string param = key.substr(13);
            if (param.find('.') != std::string::npos) fail(lineno, "unknown key '" + key + "'");
            coefficient_params[param] = {finite_number(value, key, lineno), lineno};
            continue;
        }
        const auto& table = key_table();
        const auto it = table.find(key);
        if (it == table.end()) fail(lineno, "unknown key '" + key + "'");
        it->second.apply(cfg, value, lineno);
    }

    if (!coefficient_params.empty()) {
        if (cfg.preset.empty()) {
            fail(coefficient_params.begin()->second.second, "coefficient parameters need coefficients.preset");
        }
        const auto defaults = preset_defaults(cfg.preset);
        for (const auto& [param, entry] : coefficient_params) {
            if (!defaults.count(param)) {
                fail(entry.second, "unknown key 'coefficients." + param + "' for preset " + cfg.preset);
            }
            cfg.preset_params[param] = entry.first;
        }
    }
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void require_for(const ExperimentConfig& cfg, const std::string& kind) {
    if (!cfg.kind.empty() && cfg.kind != kind) {
        throw ConfigError("line " + std::to_string(cfg.key_lines.at("kind")) + ": config is for '" + cfg.kind +
                          "', not '" + kind + "'");
    }
    const auto need = [&](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("missing required key " + what + " for " + kind);
    };
    if (kind != "distances") need(!cfg.preset.empty(), "'coefficients.preset'");
    if (kind == "stability" || kind == "distances") need(cfg.has_init_b, "'init_b.*' (second initial law)");
    if (kind == "contraction") {
        need(cfg.key_lines.count("flow_a.kind") != 0, "'flow_a.kind'");
        need(cfg.key_lines.count("flow_b.kind") != 0, "'flow_b.kind'");
    }
}

}  // namespace mvflow
