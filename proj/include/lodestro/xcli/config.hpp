#pragma once

// Experiment configuration: one JSON document, strict parsing (unknown keys
// and wrong types are errors), dotted-path overrides, canonical
// serialization and a content hash for provenance.

#include <lodestro/accel.hpp>
#include <lodestro/experiment.hpp>
#include <lodestro/tune.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lodestro::xcli {

using json = nlohmann::json;

inline constexpr const char* config_schema = "lodestro.config/1";

/// Any problem with the configuration; maps to exit code 2.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NoiseSettings {
    double amplitude = 1e-3;
    double correlation_length = 0.1;
    bool operator==(const NoiseSettings&) const = default;
};

struct SweepSpec {
    std::vector<double> beta = tune::arange(0.05, 1.0, 0.05);
    std::vector<double> m = tune::arange(0, 10, 1);
    std::vector<double> d = {0};
    bool operator==(const SweepSpec&) const = default;
};

struct TuneSpec {
    std::vector<tune::Dimension> space = tune::default_space({"beta", "m", "d"}).dims();
    std::size_t n_initial = 10;
    std::size_t n_total = 50;
    /// Put the base accel configuration into the initial batch.
    bool seed_default = true;

    bool operator==(const TuneSpec& o) const {
        if (space.size() != o.space.size()) return false;
        for (std::size_t i = 0; i < space.size(); ++i) {
            const auto& a = space[i];
            const auto& b = o.space[i];
            if (a.name != b.name || a.kind != b.kind || a.lower != b.lower || a.upper != b.upper) return false;
        }
        return n_initial == o.n_initial && n_total == o.n_total && seed_default == o.seed_default;
    }
};

struct OutputSpec {
    bool plot = false;
    bool record_linear_residual = false;
    bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
    ProblemConfig problem;
    std::optional<NoiseSettings> noise;
    accel::AccelConfig accel;
    SweepSpec sweep;
    TuneSpec tune;
    OutputSpec output;
    /// Root seed: noise seeds and the tuner's sampler derive from it.
    std::uint64_t seed = 0;

    ExperimentConfig() { accel.beta = default_beta(problem.r); }

    /// Problem with the noise model attached, seeded for draw stream `index`.
    [[nodiscard]] ProblemConfig problem_for(std::uint64_t index) const {
        ProblemConfig p = problem;
        p.noise.reset();
        if (noise) p.noise = flux::NoiseModel{noise->amplitude, noise->correlation_length,
                                              tune::derive_seed(seed, index)};
        return p;
    }
};

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    const auto& p = a.problem;
    const auto& q = b.problem;
    const bool problem_eq = p.r == q.r && p.n_points == q.n_points && p.h_step == q.h_step && p.dmin == q.dmin &&
                            p.dmax == q.dmax && p.p_right == q.p_right && p.source_edge == q.source_edge &&
                            p.initial_profile == q.initial_profile && p.initial_scale == q.initial_scale &&
                            p.initial_height == q.initial_height;
    const auto& x = a.accel;
    const auto& y = b.accel;
    const bool accel_eq = x.m_max == y.m_max && x.beta == y.beta && x.delay == y.delay && x.k_max == y.k_max &&
                          x.tol == y.tol && x.damping == y.damping && x.depth == y.depth &&
                          x.omega_beta == y.omega_beta && x.omega_m == y.omega_m && x.beta_min == y.beta_min;
    return problem_eq && accel_eq && a.noise == b.noise && a.sweep == b.sweep && a.tune == b.tune &&
           a.output == b.output && a.seed == b.seed;
}

namespace detail {

inline void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw config_error(where + ": expected an object");
    for (const auto& [key, _] : obj.items()) {
        if (!known.count(key)) throw config_error(where + ": unknown key '" + key + "'");
    }
}

inline double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw config_error(where + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::uint64_t get_unsigned(const json& obj, const char* key, std::uint64_t fallback,
                                  const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw config_error(where + "." + key + ": expected a nonnegative integer");
}

inline bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw config_error(where + "." + key + ": expected a boolean");
    return v.get<bool>();
}

inline std::string get_string(const json& obj, const char* key, const std::string& fallback,
                              const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) throw config_error(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

/// A list of numbers, or {"start", "stop", "step"}.
inline std::vector<double> get_axis(const json& obj, const char* key, const std::vector<double>& fallback,
                                    const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    const std::string path = where + "." + key;
    if (v.is_array()) {
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw config_error(path + ": expected numbers");
            out.push_back(e.get<double>());
        }
        if (out.empty()) throw config_error(path + ": empty axis");
        return out;
    }
    if (v.is_object()) {
        reject_unknown(v, {"start", "stop", "step"}, path);
        for (const char* k : {"start", "stop", "step"}) {
            if (!v.contains(k)) throw config_error(path + ": missing '" + k + "'");
        }
        const double start = get_number(v, "start", 0, path);
        const double stop = get_number(v, "stop", 0, path);
        const double step = get_number(v, "step", 0, path);
        if (!(step > 0.0) || stop < start) throw config_error(path + ": need step > 0 and stop >= start");
        return tune::arange(start, stop, step);
    }
    throw config_error(path + ": expected a list or a range object");
}

inline tune::dim_kind parse_kind(const std::string& s, const std::string& where) {
    if (s == "continuous") return tune::dim_kind::continuous;
    if (s == "continuous_log") return tune::dim_kind::continuous_log;
    if (s == "integer") return tune::dim_kind::integer;
    throw config_error(where + ": unknown dimension kind '" + s + "'");
}

}  // namespace detail

/// Builds a config from JSON, filling defaults for absent keys. accel.beta
/// defaults to 0.6 / r when not given.
inline ExperimentConfig from_json(const json& j) {
    using namespace detail;
    ExperimentConfig cfg;
    reject_unknown(j, {"schema", "problem", "noise", "accel", "sweep", "tune", "output", "seed"}, "config");
    if (j.contains("schema")) {
        if (!j.at("schema").is_string() || j.at("schema").get<std::string>() != config_schema) {
            throw config_error(std::string("config.schema: expected \"") + config_schema + "\"");
        }
    }
    cfg.seed = get_unsigned(j, "seed", 0, "config");

    if (j.contains("problem")) {
        const json& p = j.at("problem");
        const std::string w = "problem";
        reject_unknown(p, {"r", "n_points", "h_step", "dmin", "dmax", "p_right", "source_edge", "initial_profile",
                           "initial_scale", "initial_height"},
                       w);
        auto& pc = cfg.problem;
        pc.r = get_number(p, "r", pc.r, w);
        pc.n_points = get_unsigned(p, "n_points", pc.n_points, w);
        pc.h_step = get_number(p, "h_step", pc.h_step, w);
        pc.dmin = get_number(p, "dmin", pc.dmin, w);
        pc.dmax = get_number(p, "dmax", pc.dmax, w);
        pc.p_right = get_number(p, "p_right", pc.p_right, w);
        pc.source_edge = get_number(p, "source_edge", pc.source_edge, w);
        pc.initial_profile = get_string(p, "initial_profile", pc.initial_profile, w);
        pc.initial_scale = get_number(p, "initial_scale", pc.initial_scale, w);
        pc.initial_height = get_number(p, "initial_height", pc.initial_height, w);
    }

    if (j.contains("noise") && !j.at("noise").is_null()) {
        const json& n = j.at("noise");
        reject_unknown(n, {"amplitude", "correlation_length"}, "noise");
        NoiseSettings ns;
        ns.amplitude = get_number(n, "amplitude", ns.amplitude, "noise");
        ns.correlation_length = get_number(n, "correlation_length", ns.correlation_length, "noise");
        cfg.noise = ns;
    }

    cfg.accel.beta = default_beta(cfg.problem.r);
    if (j.contains("accel")) {
        const json& a = j.at("accel");
        const std::string w = "accel";
        reject_unknown(a, {"m_max", "beta", "delay", "k_max", "tol", "damping", "depth", "omega_beta", "omega_m",
                           "beta_min"},
                       w);
        auto& ac = cfg.accel;
        ac.m_max = get_unsigned(a, "m_max", ac.m_max, w);
        ac.beta = get_number(a, "beta", ac.beta, w);
        ac.delay = get_unsigned(a, "delay", ac.delay, w);
        ac.k_max = get_unsigned(a, "k_max", ac.k_max, w);
        ac.tol = get_number(a, "tol", ac.tol, w);
        const std::string damping = get_string(a, "damping", std::string(accel::to_string(ac.damping)), w);
        const std::string depth = get_string(a, "depth", std::string(accel::to_string(ac.depth)), w);
        if (damping != "fixed" && damping != "adaptive") throw config_error("accel.damping: fixed or adaptive");
        if (depth != "fixed" && depth != "adaptive") throw config_error("accel.depth: fixed or adaptive");
        ac.damping = damping == "fixed" ? accel::damping_mode::fixed : accel::damping_mode::adaptive;
        ac.depth = depth == "fixed" ? accel::depth_mode::fixed : accel::depth_mode::adaptive;
        ac.omega_beta = get_number(a, "omega_beta", ac.omega_beta, w);
        ac.omega_m = get_number(a, "omega_m", ac.omega_m, w);
        ac.beta_min = get_number(a, "beta_min", ac.beta_min, w);
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        reject_unknown(s, {"beta", "m", "d"}, "sweep");
        cfg.sweep.beta = get_axis(s, "beta", cfg.sweep.beta, "sweep");
        cfg.sweep.m = get_axis(s, "m", cfg.sweep.m, "sweep");
        cfg.sweep.d = get_axis(s, "d", cfg.sweep.d, "sweep");
    }

    if (j.contains("tune")) {
        const json& t = j.at("tune");
        reject_unknown(t, {"space", "n_initial", "n_total", "seed_default"}, "tune");
        if (t.contains("space")) {
            const json& sp = t.at("space");
            if (!sp.is_array() || sp.empty()) throw config_error("tune.space: expected a nonempty list");
            std::vector<tune::Dimension> dims;
            for (std::size_t i = 0; i < sp.size(); ++i) {
                const json& e = sp[i];
                const std::string w = "tune.space[" + std::to_string(i) + "]";
                if (e.is_string()) {
                    try {
                        dims.push_back(tune::default_space({e.get<std::string>()}).dims().front());
                    } catch (const contract_error& err) {
                        throw config_error(w + ": " + err.what());
                    }
                    continue;
                }
                reject_unknown(e, {"name", "kind", "lower", "upper"}, w);
                for (const char* k : {"name", "kind", "lower", "upper"}) {
                    if (!e.contains(k)) throw config_error(w + ": missing '" + k + "'");
                }
                dims.push_back({get_string(e, "name", "", w), parse_kind(get_string(e, "kind", "", w), w),
                                get_number(e, "lower", 0, w), get_number(e, "upper", 0, w)});
            }
            cfg.tune.space = std::move(dims);
        }
        cfg.tune.n_initial = get_unsigned(t, "n_initial", cfg.tune.n_initial, "tune");
        cfg.tune.n_total = get_unsigned(t, "n_total", cfg.tune.n_total, "tune");
        cfg.tune.seed_default = get_bool(t, "seed_default", cfg.tune.seed_default, "tune");
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        reject_unknown(o, {"plot", "record_linear_residual"}, "output");
        cfg.output.plot = get_bool(o, "plot", cfg.output.plot, "output");
        cfg.output.record_linear_residual =
            get_bool(o, "record_linear_residual", cfg.output.record_linear_residual, "output");
    }
    return cfg;
}

/// Every field, explicitly. Keys are sorted on output (canonical order).
inline json to_json(const ExperimentConfig& cfg) {
    json j;
    j["schema"] = config_schema;
    j["seed"] = cfg.seed;
    const auto& p = cfg.problem;
    j["problem"] = {{"r", p.r},
                    {"n_points", p.n_points},
                    {"h_step", p.h_step},
                    {"dmin", p.dmin},
                    {"dmax", p.dmax},
                    {"p_right", p.p_right},
                    {"source_edge", p.source_edge},
                    {"initial_profile", p.initial_profile},
                    {"initial_scale", p.initial_scale},
                    {"initial_height", p.initial_height}};
    j["noise"] = cfg.noise ? json{{"amplitude", cfg.noise->amplitude},
                                  {"correlation_length", cfg.noise->correlation_length}}
                           : json(nullptr);
    const auto& a = cfg.accel;
    j["accel"] = {{"m_max", a.m_max},
                  {"beta", a.beta},
                  {"delay", a.delay},
                  {"k_max", a.k_max},
                  {"tol", a.tol},
                  {"damping", std::string(accel::to_string(a.damping))},
                  {"depth", std::string(accel::to_string(a.depth))},
                  {"omega_beta", a.omega_beta},
                  {"omega_m", a.omega_m},
                  {"beta_min", a.beta_min}};
    j["sweep"] = {{"beta", cfg.sweep.beta}, {"m", cfg.sweep.m}, {"d", cfg.sweep.d}};
    json space = json::array();
    for (const auto& d : cfg.tune.space) {
        space.push_back({{"name", d.name}, {"kind", std::string(tune::to_string(d.kind))},
                         {"lower", d.lower}, {"upper", d.upper}});
    }
    j["tune"] = {{"space", space},
                 {"n_initial", cfg.tune.n_initial},
                 {"n_total", cfg.tune.n_total},
                 {"seed_default", cfg.tune.seed_default}};
    j["output"] = {{"plot", cfg.output.plot}, {"record_linear_residual", cfg.output.record_linear_residual}};
    return j;
}

/// Semantic checks beyond types; throws config_error.
inline void validate(const ExperimentConfig& cfg) {
    try {
        ProblemConfig p = cfg.problem_for(0);
        p.validate();
        cfg.accel.validate();
        tune::ParamSpace space;
        for (const auto& d : cfg.tune.space) {
            space.add(d.name, d.kind, d.lower, d.upper);
            (void)tune::apply_sample(space, tune::Sample(space.size(), d.lower), cfg.accel);
        }
    } catch (const contract_error& e) {
        throw config_error(e.what());
    }
    auto check_axis = [](const std::vector<double>& v, const char* name, bool integral) {
        for (double x : v) {
            if (!std::isfinite(x) || x < 0.0 || (integral && std::floor(x) != x)) {
                throw config_error(std::string("sweep.") + name + ": invalid value");
            }
        }
    };
    check_axis(cfg.sweep.beta, "beta", false);
    check_axis(cfg.sweep.m, "m", true);
    check_axis(cfg.sweep.d, "d", true);
    for (double b : cfg.sweep.beta) {
        if (!(b > 0.0 && b <= 1.0)) throw config_error("sweep.beta: values must lie in (0, 1]");
    }
    if (cfg.tune.n_initial < 1 || cfg.tune.n_initial > cfg.tune.n_total) {
        throw config_error("tune: need 1 <= n_initial <= n_total");
    }
}

/// Parses "a.b.c=value". The value is read as JSON when possible, otherwise
/// as a bare string.
inline void apply_override(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("override '" + assignment + "': expected path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw config_error("override '" + assignment + "': empty path segment");
        if (node->is_null()) *node = json::object();
        if (!node->is_object()) throw config_error("override '" + assignment + "': '" + key + "' is not inside an object");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw config_error("config file '" + path + "' is not valid JSON");
    return j;
}

/// File (optional) + overrides -> validated config.
inline ExperimentConfig load_config(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
    json j = path ? read_json_file(*path) : json::object();
    for (const auto& o : overrides) apply_override(j, o);
    ExperimentConfig cfg = from_json(j);
    validate(cfg);
    return cfg;
}

/// FNV-1a 64 of the compact canonical config text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lodestro::xcli
