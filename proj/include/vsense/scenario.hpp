#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vsense/common.hpp"
#include "vsense/envsynth.hpp"
#include "vsense/netsynth.hpp"
#include "vsense/otfs.hpp"
#include "vsense/signal.hpp"
#include "vsense/subnyq.hpp"

namespace vsense {

// ============================================================================
// Map file format
// ============================================================================
//
// Plain text, one segment per line:
//   ax ay bx by loss_db blocking
// with coordinates in meters, loss in dB, blocking true/false. '#' starts a
// comment; blank lines are ignored.

inline Map2D parse_map_text(const std::string& text, const std::string& source = "<map>") {
    Map2D map;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        MapSegment seg;
        std::string blocking;
        if (!(ls >> seg.a.x)) continue;  // blank line
        if (!(ls >> seg.a.y >> seg.b.x >> seg.b.y >> seg.reflection_loss_db >> blocking))
            throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                     ": expected 'ax ay bx by loss_db blocking'");
        if (blocking == "true")
            seg.blocking = true;
        else if (blocking == "false")
            seg.blocking = false;
        else
            throw std::runtime_error(source + ":" + std::to_string(lineno) +
                                     ": blocking must be 'true' or 'false', got '" + blocking + "'");
        map.segments.push_back(seg);
    }
    map.validate();
    return map;
}

inline Map2D load_map_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open map file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_map_text(ss.str(), path);
}

// ============================================================================
// Scenario configuration
// ============================================================================

struct ScheduleCfg {
    std::string kind = "linear";
    int n = 16;
    double f_min = 3.0e9;
    double f_max = 3.1875e9;
    double pri = 5e-4;
    double hop_bandwidth = 0.0;  // 0 => contiguous default
};

struct MapCfg {
    std::string file;       // empty when inline
    Map2D inline_map;
    bool is_inline = false;

    Map2D load() const { return is_inline ? inline_map : load_map_file(file); }
};

struct SamplerCfg {
    double nyquist_rate = 200e6;
    int L = 16;
    int phase = 0;
};

struct FrameCfg {
    int M = 64;
    int N = 16;
    std::string constellation = "qpsk";
};

struct NoiseCfg {
    std::optional<double> snr_db;
    std::optional<double> sigma_range;
};

struct OutputCfg {
    std::string path = ".";
    std::string format = "csv";  // csv | json-lines
};

struct ScenarioConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    std::optional<TargetScene> scene;
    std::optional<ScheduleCfg> schedule;
    std::optional<MapCfg> map;
    std::optional<SamplerCfg> sampler;
    std::optional<FrameCfg> frame;
    std::optional<NoiseCfg> noise;
    int mc_trials = 0;  // 0 => experiment default
    OutputCfg output;
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::vector<std::string>& allowed,
                       const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw std::invalid_argument("config: unknown key '" + path + it.key() + "'");
    }
}

inline Vec2 parse_vec2(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2)
        throw std::invalid_argument("config: " + path + " must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline ScenarioConfig parse_scenario_json(const detail::json& j) {
    using detail::check_keys;
    ScenarioConfig cfg;
    check_keys(j, {"experiment", "seed", "scene", "schedule", "map", "sampler", "frame", "noise",
                   "mc_trials", "output"},
               "");
    if (!j.contains("experiment") || !j["experiment"].is_string())
        throw std::invalid_argument("config: 'experiment' (string) is required");
    cfg.experiment = j["experiment"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mc_trials")) {
        cfg.mc_trials = j["mc_trials"].get<int>();
        if (cfg.mc_trials < 1) throw std::invalid_argument("config: mc_trials must be >= 1");
    }
    if (j.contains("scene")) {
        const auto& js = j["scene"];
        check_keys(js, {"targets"}, "scene.");
        TargetScene scene;
        if (!js.contains("targets") || !js["targets"].is_array())
            throw std::invalid_argument("config: scene.targets (array) is required");
        for (std::size_t i = 0; i < js["targets"].size(); ++i) {
            const auto& jt = js["targets"][i];
            std::string p = "scene.targets[" + std::to_string(i) + "].";
            check_keys(jt, {"position", "velocity", "amplitude"}, p);
            Target t;
            t.position = detail::parse_vec2(jt.at("position"), p + "position");
            t.velocity = jt.contains("velocity") ? detail::parse_vec2(jt["velocity"], p + "velocity")
                                                 : Vec2{0, 0};
            if (jt.contains("amplitude")) {
                Vec2 a = detail::parse_vec2(jt["amplitude"], p + "amplitude");
                t.amplitude = Complex(a.x, a.y);
            } else {
                t.amplitude = Complex(1, 0);
            }
            if (std::abs(t.amplitude) <= 0.0)
                throw std::invalid_argument("config: " + p + "amplitude must be nonzero");
            scene.targets.push_back(t);
        }
        cfg.scene = scene;
    }
    if (j.contains("schedule")) {
        const auto& js = j["schedule"];
        check_keys(js, {"kind", "n", "f_min", "f_max", "pri", "hop_bandwidth"}, "schedule.");
        ScheduleCfg s;
        if (js.contains("kind")) s.kind = js["kind"].get<std::string>();
        parse_hop_kind(s.kind);  // validate
        if (js.contains("n")) s.n = js["n"].get<int>();
        if (!js.contains("f_min") || !js.contains("f_max") || !js.contains("pri"))
            throw std::invalid_argument("config: schedule needs f_min, f_max and pri (Hz, Hz, s)");
        s.f_min = js["f_min"].get<double>();
        s.f_max = js["f_max"].get<double>();
        s.pri = js["pri"].get<double>();
        if (js.contains("hop_bandwidth")) s.hop_bandwidth = js["hop_bandwidth"].get<double>();
        cfg.schedule = s;
    }
    if (j.contains("map")) {
        const auto& jm = j["map"];
        check_keys(jm, {"file", "segments"}, "map.");
        MapCfg m;
        if (jm.contains("file")) {
            m.file = jm["file"].get<std::string>();
            if (!std::filesystem::exists(m.file))
                throw std::invalid_argument("config: map.file does not exist: " + m.file);
        } else if (jm.contains("segments")) {
            m.is_inline = true;
            for (std::size_t i = 0; i < jm["segments"].size(); ++i) {
                const auto& js = jm["segments"][i];
                if (!js.is_array() || js.size() != 6)
                    throw std::invalid_argument("config: map.segments[" + std::to_string(i) +
                                                "] must be [ax, ay, bx, by, loss_db, blocking]");
                MapSegment seg;
                seg.a = {js[0].get<double>(), js[1].get<double>()};
                seg.b = {js[2].get<double>(), js[3].get<double>()};
                seg.reflection_loss_db = js[4].get<double>();
                seg.blocking = js[5].get<bool>();
                m.inline_map.segments.push_back(seg);
            }
            m.inline_map.validate();
        } else {
            throw std::invalid_argument("config: map needs either 'file' or 'segments'");
        }
        cfg.map = m;
    }
    if (j.contains("sampler")) {
        const auto& js = j["sampler"];
        check_keys(js, {"nyquist_rate", "L", "phase"}, "sampler.");
        SamplerCfg s;
        if (!js.contains("nyquist_rate") || !js.contains("L"))
            throw std::invalid_argument("config: sampler needs nyquist_rate (Hz) and L");
        s.nyquist_rate = js["nyquist_rate"].get<double>();
        s.L = js["L"].get<int>();
        if (js.contains("phase")) s.phase = js["phase"].get<int>();
        SamplerSpec{s.nyquist_rate, s.L, s.phase}.validate();
        cfg.sampler = s;
    }
    if (j.contains("frame")) {
        const auto& js = j["frame"];
        check_keys(js, {"M", "N", "constellation"}, "frame.");
        FrameCfg f;
        if (!js.contains("M") || !js.contains("N"))
            throw std::invalid_argument("config: frame needs M and N");
        f.M = js["M"].get<int>();
        f.N = js["N"].get<int>();
        if (js.contains("constellation")) f.constellation = js["constellation"].get<std::string>();
        if (f.constellation != "qpsk")
            throw std::invalid_argument("config: frame.constellation must be 'qpsk'");
        if (f.M < 1 || f.N < 1) throw std::invalid_argument("config: frame.M and frame.N must be >= 1");
        cfg.frame = f;
    }
    if (j.contains("noise")) {
        const auto& js = j["noise"];
        check_keys(js, {"snr_db", "sigma_range"}, "noise.");
        NoiseCfg nz;
        if (js.contains("snr_db")) nz.snr_db = js["snr_db"].get<double>();
        if (js.contains("sigma_range")) {
            nz.sigma_range = js["sigma_range"].get<double>();
            if (*nz.sigma_range <= 0.0)
                throw std::invalid_argument("config: noise.sigma_range must be > 0 (meters)");
        }
        cfg.noise = nz;
    }
    if (j.contains("output")) {
        const auto& js = j["output"];
        check_keys(js, {"path", "format"}, "output.");
        if (js.contains("path")) cfg.output.path = js["path"].get<std::string>();
        if (js.contains("format")) cfg.output.format = js["format"].get<std::string>();
        if (cfg.output.format != "csv" && cfg.output.format != "json-lines")
            throw std::invalid_argument("config: output.format must be 'csv' or 'json-lines'");
    }
    return cfg;
}

// Validated config with defaults applied; unknown keys are rejected. Parse
// errors carry line diagnostics.
inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    std::string text = ss.str();
    detail::json j;
    try {
        j = detail::json::parse(text);
    } catch (const detail::json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
            if (text[i] == '\n') ++line;
        throw std::runtime_error(path + ":" + std::to_string(line) + ": " + e.what());
    }
    try {
        return parse_scenario_json(j);
    } catch (const std::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

inline std::string serialize_scenario(const ScenarioConfig& cfg) {
    detail::json j;
    j["experiment"] = cfg.experiment;
    j["seed"] = cfg.seed;
    if (cfg.mc_trials > 0) j["mc_trials"] = cfg.mc_trials;
    if (cfg.scene) {
        detail::json targets = detail::json::array();
        for (const auto& t : cfg.scene->targets) {
            targets.push_back({{"position", {t.position.x, t.position.y}},
                               {"velocity", {t.velocity.x, t.velocity.y}},
                               {"amplitude", {t.amplitude.real(), t.amplitude.imag()}}});
        }
        j["scene"] = {{"targets", targets}};
    }
    if (cfg.schedule) {
        j["schedule"] = {{"kind", cfg.schedule->kind}, {"n", cfg.schedule->n},
                         {"f_min", cfg.schedule->f_min}, {"f_max", cfg.schedule->f_max},
                         {"pri", cfg.schedule->pri}};
        if (cfg.schedule->hop_bandwidth > 0.0)
            j["schedule"]["hop_bandwidth"] = cfg.schedule->hop_bandwidth;
    }
    if (cfg.map) {
        if (cfg.map->is_inline) {
            detail::json segs = detail::json::array();
            for (const auto& s : cfg.map->inline_map.segments)
                segs.push_back({s.a.x, s.a.y, s.b.x, s.b.y, s.reflection_loss_db, s.blocking});
            j["map"] = {{"segments", segs}};
        } else {
            j["map"] = {{"file", cfg.map->file}};
        }
    }
    if (cfg.sampler)
        j["sampler"] = {{"nyquist_rate", cfg.sampler->nyquist_rate}, {"L", cfg.sampler->L},
                        {"phase", cfg.sampler->phase}};
    if (cfg.frame)
        j["frame"] = {{"M", cfg.frame->M}, {"N", cfg.frame->N},
                      {"constellation", cfg.frame->constellation}};
    if (cfg.noise) {
        j["noise"] = detail::json::object();
        if (cfg.noise->snr_db) j["noise"]["snr_db"] = *cfg.noise->snr_db;
        if (cfg.noise->sigma_range) j["noise"]["sigma_range"] = *cfg.noise->sigma_range;
    }
    j["output"] = {{"path", cfg.output.path}, {"format", cfg.output.format}};
    return j.dump(2) + "\n";
}

// ============================================================================
// Reports and emission
// ============================================================================

struct MetricRow {
    std::string name;
    double value = 0.0;
    std::string tolerance;
    bool pass = true;
};

struct RunReport {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::vector<MetricRow> rows;
    double wall_ms = 0.0;

    bool all_pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }
    void add(const std::string& name, double value, const std::string& tol, bool pass) {
        rows.push_back({name, value, tol, pass});
    }
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    return f;
}

}  // namespace detail

inline void emit_profile(const std::string& path, const std::string& format,
                         const std::vector<double>& axis, const std::vector<double>& magnitude) {
    if (axis.size() != magnitude.size())
        throw std::invalid_argument("emit_profile: axis/magnitude size mismatch");
    auto f = detail::open_out(path);
    if (format == "csv") {
        f << "axis_value,magnitude\n";
        for (std::size_t i = 0; i < axis.size(); ++i)
            f << detail::fmt_num(axis[i]) << ',' << detail::fmt_num(magnitude[i]) << '\n';
    } else if (format == "json-lines") {
        for (std::size_t i = 0; i < axis.size(); ++i)
            f << "{\"axis_value\":" << detail::fmt_num(axis[i])
              << ",\"magnitude\":" << detail::fmt_num(magnitude[i]) << "}\n";
    } else {
        throw std::invalid_argument("emit_profile: unknown format " + format);
    }
}

// Rows in lexicographic (x, then y) order.
inline void emit_surface(const std::string& path, const std::string& format, const Surface2D& s) {
    if (s.z.size() != s.x.size() * s.y.size())
        throw std::invalid_argument("emit_surface: inconsistent surface");
    auto f = detail::open_out(path);
    if (format == "csv") {
        f << "x,y,magnitude\n";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            for (std::size_t j = 0; j < s.y.size(); ++j)
                f << detail::fmt_num(s.x[i]) << ',' << detail::fmt_num(s.y[j]) << ','
                  << detail::fmt_num(s.at(i, j)) << '\n';
    } else if (format == "json-lines") {
        for (std::size_t i = 0; i < s.x.size(); ++i)
            for (std::size_t j = 0; j < s.y.size(); ++j)
                f << "{\"x\":" << detail::fmt_num(s.x[i]) << ",\"y\":" << detail::fmt_num(s.y[j])
                  << ",\"magnitude\":" << detail::fmt_num(s.at(i, j)) << "}\n";
    } else {
        throw std::invalid_argument("emit_surface: unknown format " + format);
    }
}

inline void emit_report(const std::string& path, const std::string& format, const RunReport& r) {
    auto f = detail::open_out(path);
    if (format == "csv") {
        f << "metric,value,tolerance,pass\n";
        for (const auto& row : r.rows)
            f << row.name << ',' << detail::fmt_num(row.value) << ',' << row.tolerance << ','
              << (row.pass ? "true" : "false") << '\n';
    } else if (format == "json-lines") {
        for (const auto& row : r.rows)
            f << "{\"metric\":\"" << row.name << "\",\"value\":" << detail::fmt_num(row.value)
              << ",\"tolerance\":\"" << row.tolerance << "\",\"pass\":" << (row.pass ? "true" : "false")
              << "}\n";
    } else {
        throw std::invalid_argument("emit_report: unknown format " + format);
    }
}

}  // namespace vsense
