#pragma once

// Run configuration: JSON schema, defaults, validation and sweep expansion.
//
// Every key is optional except `mode`. Unknown keys are rejected at every
// nesting level. A manifest written by a previous run ({"config": {...}, ...})
// is accepted as input and reproduces that run.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qgda/cgns.hpp"
#include "qgda/metrics.hpp"
#include "qgda/particles.hpp"
#include "qgda/qg_model.hpp"
#include "qgda/vorticity_filter.hpp"

namespace qgda {

using Json = nlohmann::json;

enum class Mode { truth, filter_vorticity, filter_layer2, particles, sweep };

inline Mode parse_mode(std::string_view s) {
    if (s == "truth") return Mode::truth;
    if (s == "filter-vorticity") return Mode::filter_vorticity;
    if (s == "filter-layer2") return Mode::filter_layer2;
    if (s == "particles") return Mode::particles;
    if (s == "sweep") return Mode::sweep;
    throw ConfigError("config: key 'mode': unknown value '" + std::string(s) +
                      "' (expected truth|filter-vorticity|filter-layer2|particles|sweep)");
}

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::truth: return "truth";
        case Mode::filter_vorticity: return "filter-vorticity";
        case Mode::filter_layer2: return "filter-layer2";
        case Mode::particles: return "particles";
        case Mode::sweep: return "sweep";
    }
    return "?";
}

enum class FlowSource { truth, recovered };
enum class SnapshotFormat { csv, binary };

struct ParticleRunConfig {
    ParticleConfig tracer;
    FlowSource flow = FlowSource::truth;
};

struct SweepConfig {
    std::vector<int> grids{10, 30, 50};
    std::vector<long> n_steps{500, 1000, 3000, 5000, 10000, 15000, 20000};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    Mode filter = Mode::filter_layer2;
};

struct RunConfig {
    std::optional<Mode> mode;
    int n = 10;
    PhysParams phys{.n_steps = 1000};
    InitialCondition ic = InitialCondition::sinusoidal;
    NoiseConfig noise;
    CovMode cov_mode = CovMode::diagonal;
    Smoothing smoothing;
    StdDivisor std_divisor = StdDivisor::population;
    ParticleRunConfig particles;
    SweepConfig sweep;
    std::string out_dir = "out";
    long stride = 100;
    SnapshotFormat format = SnapshotFormat::csv;

    GridSpec grid() const { return GridSpec(n); }
};

namespace detail {

[[noreturn]] inline void key_error(const std::string& key, const std::string& msg) {
    throw ConfigError("config: key '" + key + "': " + msg);
}

inline void reject_unknown(const Json& obj, const std::string& prefix, std::initializer_list<std::string_view> known) {
    for (const auto& [k, _] : obj.items()) {
        bool ok = false;
        for (auto name : known) ok = ok || k == name;
        if (!ok) key_error(prefix + k, "unknown key");
    }
}

inline double get_number(const Json& v, const std::string& key) {
    if (!v.is_number()) key_error(key, "expected a number");
    return v.get<double>();
}

inline long get_integer(const Json& v, const std::string& key) {
    if (!v.is_number_integer()) key_error(key, "expected an integer");
    return v.get<long>();
}

inline std::uint64_t get_unsigned(const Json& v, const std::string& key) {
    if (!v.is_number_unsigned()) key_error(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline std::string get_string(const Json& v, const std::string& key) {
    if (!v.is_string()) key_error(key, "expected a string");
    return v.get<std::string>();
}

template <class F>
auto with_key(const std::string& key, F&& parse) -> decltype(parse()) {
    try {
        return parse();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind("config: key", 0) == 0) throw;
        key_error(key, what);
    }
}

template <class T>
std::vector<T> get_list(const Json& v, const std::string& key, T (*item)(const Json&, const std::string&)) {
    if (!v.is_array()) key_error(key, "expected an array");
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(item(v[i], key + "[" + std::to_string(i) + "]"));
    return out;
}

inline int get_int(const Json& v, const std::string& key) { return static_cast<int>(get_integer(v, key)); }

}  // namespace detail

/// Throws ConfigError naming the offending key.
inline void validate(const RunConfig& c) {
    using detail::key_error;
    if (!c.mode) key_error("mode", "required (truth|filter-vorticity|filter-layer2|particles|sweep)");
    if (c.n < 4) key_error("n", "grid size must be >= 4");
    if (!(c.phys.dt > 0.0)) key_error("dt", "must be > 0");
    if (!(c.phys.kd2 > 0.0)) key_error("kd2", "must be > 0");
    if (c.phys.n_steps < 0) key_error("n_steps", "must be >= 0");
    if (!(c.noise.B1 > 0.0)) key_error("B1", "must be > 0");
    if (!(c.noise.b2 >= 0.0)) key_error("b2", "must be >= 0");
    if (c.stride < 1) key_error("stride", "must be >= 1");
    if (c.smoothing.width < 1 || c.smoothing.width % 2 == 0) key_error("smoothing.width", "must be a positive odd integer");
    if (c.smoothing.interval < Smoothing::automatic) key_error("smoothing.interval", "must be >= 0 or \"auto\"");
    const ParticleConfig& p = c.particles.tracer;
    if (p.count < 1) key_error("particles.count", "must be >= 1");
    if (!(p.drag_beta >= 0.0)) key_error("particles.drag_beta", "must be >= 0");
    if (!(p.sigma_x >= 0.0)) key_error("particles.sigma_x", "must be >= 0");
    if (p.layer != 1 && p.layer != 2) key_error("particles.layer", "must be 1 or 2");
    if (c.particles.flow == FlowSource::recovered && p.layer != 2)
        key_error("particles.flow", "the recovered flow is the second layer; set particles.layer = 2");
    const long spin = spinup_length(c.phys.n_steps);
    if (*c.mode == Mode::filter_vorticity && spin < 2) key_error("n_steps", "vorticity filter needs n_steps > 100");
    if ((*c.mode == Mode::filter_layer2 || (*c.mode == Mode::particles && c.particles.flow == FlowSource::recovered)) &&
        spin < 3)
        key_error("n_steps", "layer-2 filter needs n_steps > 200");
    if (*c.mode == Mode::sweep) {
        if (c.sweep.grids.empty()) key_error("sweep.grids", "must not be empty");
        if (c.sweep.n_steps.empty()) key_error("sweep.n_steps", "must not be empty");
        if (c.sweep.seeds.empty()) key_error("sweep.seeds", "must not be empty");
        for (int g : c.sweep.grids)
            if (g < 4) key_error("sweep.grids", "grid sizes must be >= 4");
        const long min_steps = c.sweep.filter == Mode::filter_layer2 ? 201 : 101;
        for (long s : c.sweep.n_steps)
            if (s < min_steps) key_error("sweep.n_steps", "each entry must be >= " + std::to_string(min_steps));
    }
}

/// Parses a config object (or a manifest wrapping one under "config").
/// Missing keys keep their defaults; the result is validated.
inline RunConfig parse_config(const Json& input) {
    using namespace detail;
    if (!input.is_object()) throw ConfigError("config: top level must be a JSON object");
    const Json& j = input.contains("config") ? input.at("config") : input;
    if (!j.is_object()) key_error("config", "expected an object");
    reject_unknown(j, "", {"mode", "n", "dt", "n_steps", "kd2", "beta", "ic", "seed", "B1", "b2", "cov_mode",
                           "smoothing", "std_divisor", "particles", "sweep", "out_dir", "stride", "format"});
    RunConfig c;
    auto str = [&](const char* key) { return get_string(j.at(key), key); };
    if (j.contains("mode")) c.mode = with_key("mode", [&] { return parse_mode(str("mode")); });
    if (j.contains("n")) c.n = get_int(j.at("n"), "n");
    if (j.contains("dt")) c.phys.dt = get_number(j.at("dt"), "dt");
    if (j.contains("n_steps")) c.phys.n_steps = get_integer(j.at("n_steps"), "n_steps");
    if (j.contains("kd2")) c.phys.kd2 = get_number(j.at("kd2"), "kd2");
    if (j.contains("beta")) c.phys.beta = get_number(j.at("beta"), "beta");
    if (j.contains("ic")) c.ic = with_key("ic", [&] { return parse_initial_condition(str("ic")); });
    if (j.contains("seed")) c.noise.seed = get_unsigned(j.at("seed"), "seed");
    if (j.contains("B1")) c.noise.B1 = get_number(j.at("B1"), "B1");
    if (j.contains("b2")) c.noise.b2 = get_number(j.at("b2"), "b2");
    if (j.contains("cov_mode")) c.cov_mode = with_key("cov_mode", [&] { return parse_cov_mode(str("cov_mode")); });
    if (j.contains("std_divisor")) {
        const std::string s = str("std_divisor");
        if (s == "population") c.std_divisor = StdDivisor::population;
        else if (s == "sample") c.std_divisor = StdDivisor::sample;
        else key_error("std_divisor", "expected population|sample");
    }
    if (j.contains("out_dir")) c.out_dir = str("out_dir");
    if (j.contains("stride")) c.stride = get_integer(j.at("stride"), "stride");
    if (j.contains("format")) {
        const std::string s = str("format");
        if (s == "csv") c.format = SnapshotFormat::csv;
        else if (s == "binary") c.format = SnapshotFormat::binary;
        else key_error("format", "expected csv|binary");
    }
    if (j.contains("smoothing")) {
        const Json& s = j.at("smoothing");
        if (!s.is_object()) key_error("smoothing", "expected an object");
        reject_unknown(s, "smoothing.", {"width", "interval"});
        if (s.contains("width")) c.smoothing.width = get_int(s.at("width"), "smoothing.width");
        if (s.contains("interval")) {
            const Json& v = s.at("interval");
            if (v.is_string()) {
                if (v.get<std::string>() != "auto") key_error("smoothing.interval", "expected an integer or \"auto\"");
                c.smoothing.interval = Smoothing::automatic;
            } else {
                c.smoothing.interval = get_integer(v, "smoothing.interval");
                if (c.smoothing.interval < 0) key_error("smoothing.interval", "must be >= 0 or \"auto\"");
            }
        }
    }
    if (j.contains("particles")) {
        const Json& p = j.at("particles");
        if (!p.is_object()) key_error("particles", "expected an object");
        reject_unknown(p, "particles.", {"count", "drag_beta", "sigma_x", "layer", "flow"});
        ParticleConfig& t = c.particles.tracer;
        if (p.contains("count")) t.count = get_int(p.at("count"), "particles.count");
        if (p.contains("drag_beta")) t.drag_beta = get_number(p.at("drag_beta"), "particles.drag_beta");
        if (p.contains("sigma_x")) t.sigma_x = get_number(p.at("sigma_x"), "particles.sigma_x");
        if (p.contains("layer")) t.layer = get_int(p.at("layer"), "particles.layer");
        if (p.contains("flow")) {
            const std::string s = get_string(p.at("flow"), "particles.flow");
            if (s == "truth") c.particles.flow = FlowSource::truth;
            else if (s == "recovered") c.particles.flow = FlowSource::recovered;
            else key_error("particles.flow", "expected truth|recovered");
        }
    }
    if (j.contains("sweep")) {
        const Json& s = j.at("sweep");
        if (!s.is_object()) key_error("sweep", "expected an object");
        reject_unknown(s, "sweep.", {"grids", "n_steps", "seeds", "filter"});
        if (s.contains("grids")) c.sweep.grids = get_list<int>(s.at("grids"), "sweep.grids", get_int);
        if (s.contains("n_steps")) c.sweep.n_steps = get_list<long>(s.at("n_steps"), "sweep.n_steps", get_integer);
        if (s.contains("seeds")) c.sweep.seeds = get_list<std::uint64_t>(s.at("seeds"), "sweep.seeds", get_unsigned);
        if (s.contains("filter")) {
            c.sweep.filter = with_key("sweep.filter", [&] { return parse_mode(get_string(s.at("filter"), "sweep.filter")); });
            if (c.sweep.filter != Mode::filter_layer2 && c.sweep.filter != Mode::filter_vorticity)
                key_error("sweep.filter", "expected filter-layer2|filter-vorticity");
        }
    }
    c.particles.tracer.seed = c.noise.seed;
    validate(c);
    return c;
}

inline RunConfig parse_config_text(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully-defaulted JSON echo. Keys are emitted in sorted order.
inline Json to_json(const RunConfig& c) {
    Json j;
    j["mode"] = c.mode ? Json(to_string(*c.mode)) : Json();
    j["n"] = c.n;
    j["dt"] = c.phys.dt;
    j["n_steps"] = c.phys.n_steps;
    j["kd2"] = c.phys.kd2;
    j["beta"] = c.phys.beta;
    j["ic"] = to_string(c.ic);
    j["seed"] = c.noise.seed;
    j["B1"] = c.noise.B1;
    j["b2"] = c.noise.b2;
    j["cov_mode"] = to_string(c.cov_mode);
    j["std_divisor"] = c.std_divisor == StdDivisor::population ? "population" : "sample";
    j["smoothing"] = {{"width", c.smoothing.width},
                      {"interval", c.smoothing.interval == Smoothing::automatic ? Json("auto")
                                                                                 : Json(c.smoothing.interval)}};
    const ParticleConfig& p = c.particles.tracer;
    j["particles"] = {{"count", p.count},
                      {"drag_beta", p.drag_beta},
                      {"sigma_x", p.sigma_x},
                      {"layer", p.layer},
                      {"flow", c.particles.flow == FlowSource::truth ? "truth" : "recovered"}};
    j["sweep"] = {{"grids", c.sweep.grids},
                  {"n_steps", c.sweep.n_steps},
                  {"seeds", c.sweep.seeds},
                  {"filter", to_string(c.sweep.filter)}};
    j["out_dir"] = c.out_dir;
    j["stride"] = c.stride;
    j["format"] = c.format == SnapshotFormat::csv ? "csv" : "binary";
    return j;
}

/// FNV-1a over the canonical JSON echo, excluding out_dir (where a run
/// writes does not change what it computes). 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
    Json j = to_json(c);
    j.erase("out_dir");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct SweepCell {
    int n;
    long n_steps;
    std::uint64_t seed;
};

/// Grid-major, then step count, then seed.
inline std::vector<SweepCell> expand_sweep(const SweepConfig& s) {
    std::vector<SweepCell> out;
    for (int n : s.grids)
        for (long nt : s.n_steps)
            for (std::uint64_t seed : s.seeds) out.push_back({n, nt, seed});
    return out;
}

/// The distinct (n, N_t) rows of the summary table.
inline std::vector<std::pair<int, long>> sweep_rows(const SweepConfig& s) {
    std::vector<std::pair<int, long>> out;
    for (int n : s.grids)
        for (long nt : s.n_steps) out.emplace_back(n, nt);
    return out;
}

/// Config of one sweep cell: the sweep's filter mode on (n, N_t, seed).
inline RunConfig cell_config(const RunConfig& sweep, const SweepCell& cell) {
    RunConfig c = sweep;
    c.mode = sweep.sweep.filter;
    c.n = cell.n;
    c.phys.n_steps = cell.n_steps;
    c.noise.seed = cell.seed;
    c.particles.tracer.seed = cell.seed;
    return c;
}

}  // namespace qgda
