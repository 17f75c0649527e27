#ifndef LORBPANO_CONFIG_HPP
#define LORBPANO_CONFIG_HPP

#include <glob.h>

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lorbpano/homography.hpp"
#include "lorbpano/lorb.hpp"
#include "lorbpano/matchlsh.hpp"
#include "lorbpano/pipeline.hpp"

namespace lorbpano {

struct CameraConfig {
    int id = 0;
    std::string frame_glob;
    std::vector<std::string> frames;  // glob expansion, sorted
    Homography pre_transform = Homography::identity();
    std::optional<DetectionRegion> crop;
};

/// Everything a run needs; parsed from the line-oriented key = value config
/// documented in the README.
struct RunConfig {
    std::vector<CameraConfig> cameras;
    double overlap = 0.25;
    ExtractionConfig extraction;
    MatchConfig matching;
    ProsacConfig prosac;
    PipelineConfig pipeline;
    int blend_levels = 4;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    bool emit_timings = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::string> out;
    if (rc == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    globfree(&g);
    return out;
}

template <typename T>
T parse_number(const std::string& value, int line, const std::string& key) {
    std::istringstream in(value);
    T v{};
    in >> v;
    if (in.fail() || !in.eof())
        throw ParseError("line " + std::to_string(line) + ": bad value for " + key);
    return v;
}

inline std::vector<double> parse_csv_numbers(const std::string& value, int line,
                                             const std::string& key) {
    std::vector<double> out;
    std::istringstream in(value);
    std::string tok;
    while (std::getline(in, tok, ','))
        out.push_back(parse_number<double>(trim(tok), line, key));
    return out;
}

}  // namespace detail

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound(path);
    RunConfig cfg;
    CameraConfig* camera = nullptr;  // null while in the global section
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = detail::trim(raw);
        if (auto pos = line.find('#'); pos != std::string::npos)
            line = detail::trim(line.substr(0, pos));
        if (line.empty()) continue;
        if (line == "[camera]") {
            cfg.cameras.emplace_back();
            camera = &cfg.cameras.back();
            camera->id = static_cast<int>(cfg.cameras.size()) - 1;
            continue;
        }
        if (line.front() == '[')
            throw ParseError("line " + std::to_string(lineno) + ": unknown section " + line);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError("line " + std::to_string(lineno) + ": expected key = value");

        if (camera) {
            if (key == "id")
                camera->id = detail::parse_number<int>(value, lineno, key);
            else if (key == "frames")
                camera->frame_glob = value;
            else if (key == "pre_transform") {
                auto v = detail::parse_csv_numbers(value, lineno, key);
                if (v.size() != 9)
                    throw ValidationError("pre_transform: expected 9 comma-separated values");
                for (int i = 0; i < 9; ++i) camera->pre_transform.h[i] = v[i];
            } else if (key == "crop") {
                auto v = detail::parse_csv_numbers(value, lineno, key);
                if (v.size() != 4) throw ValidationError("crop: expected x0,y0,x1,y1");
                camera->crop = DetectionRegion{static_cast<int>(v[0]), static_cast<int>(v[1]),
                                               static_cast<int>(v[2]), static_cast<int>(v[3]),
                                               camera->id};
            } else {
                throw ValidationError("unknown camera key: " + key);
            }
            continue;
        }

        if (key == "seed")
            cfg.seed = detail::parse_number<std::uint64_t>(value, lineno, key);
        else if (key == "overlap")
            cfg.overlap = detail::parse_number<double>(value, lineno, key);
        else if (key == "output_dir")
            cfg.output_dir = value;
        else if (key == "mode") {
            if (value == "serial")
                cfg.pipeline.mode = PipelineMode::Serial;
            else if (value == "pipelined")
                cfg.pipeline.mode = PipelineMode::Pipelined;
            else
                throw ValidationError("mode: expected serial or pipelined");
        } else if (key == "frames_in_flight")
            cfg.pipeline.frames_in_flight = detail::parse_number<int>(value, lineno, key);
        else if (key == "workers_per_stage")
            cfg.pipeline.workers_per_stage = detail::parse_number<int>(value, lineno, key);
        else if (key == "homography_refresh")
            cfg.pipeline.homography_refresh = detail::parse_number<int>(value, lineno, key);
        else if (key == "blend_levels")
            cfg.blend_levels = detail::parse_number<int>(value, lineno, key);
        else if (key == "emit_timings")
            cfg.emit_timings = value == "true" || value == "1";
        else if (key == "fast_threshold")
            cfg.extraction.fast_threshold =
                static_cast<std::uint8_t>(detail::parse_number<int>(value, lineno, key));
        else if (key == "fast_arc")
            cfg.extraction.fast_arc = detail::parse_number<int>(value, lineno, key);
        else if (key == "harris_alpha")
            cfg.extraction.harris_alpha = detail::parse_number<float>(value, lineno, key);
        else if (key == "harris_threshold")
            cfg.extraction.harris_threshold = detail::parse_number<float>(value, lineno, key);
        else if (key == "harris_sigma")
            cfg.extraction.harris_sigma = detail::parse_number<float>(value, lineno, key);
        else if (key == "top_n")
            cfg.extraction.top_n = detail::parse_number<int>(value, lineno, key);
        else if (key == "n_d")
            cfg.extraction.n_d = detail::parse_number<int>(value, lineno, key);
        else if (key == "brief_blur_sigma")
            cfg.extraction.brief_blur_sigma = detail::parse_number<float>(value, lineno, key);
        else if (key == "patch_half")
            cfg.extraction.patch_half = detail::parse_number<int>(value, lineno, key);
        else if (key == "lsh_tables")
            cfg.matching.tables = detail::parse_number<int>(value, lineno, key);
        else if (key == "lsh_bits")
            cfg.matching.bits = detail::parse_number<int>(value, lineno, key);
        else if (key == "lsh_probes")
            cfg.matching.t_probes = detail::parse_number<int>(value, lineno, key);
        else if (key == "max_distance")
            cfg.matching.max_distance = detail::parse_number<int>(value, lineno, key);
        else if (key == "ratio")
            cfg.matching.ratio = detail::parse_number<float>(value, lineno, key);
        else if (key == "prosac_threshold_px")
            cfg.prosac.threshold_px = detail::parse_number<double>(value, lineno, key);
        else if (key == "prosac_max_iter")
            cfg.prosac.max_iter = detail::parse_number<int>(value, lineno, key);
        else if (key == "prosac_confidence")
            cfg.prosac.confidence = detail::parse_number<double>(value, lineno, key);
        else
            throw ValidationError("unknown key: " + key);
    }

    // validation and derived fields
    if (cfg.overlap <= 0.0) throw ValidationError("overlap: NoOverlap, must be > 0");
    if (cfg.overlap > 1.0) throw ValidationError("overlap: must be <= 1");
    if (cfg.pipeline.frames_in_flight < 1)
        throw ValidationError("frames_in_flight: must be >= 1");
    if (cfg.pipeline.workers_per_stage < 1)
        throw ValidationError("workers_per_stage: must be >= 1");
    if (cfg.pipeline.homography_refresh < 1)
        throw ValidationError("homography_refresh: must be >= 1");
    if (cfg.blend_levels < 1) throw ValidationError("blend_levels: must be >= 1");
    try {
        cfg.extraction.validate();
    } catch (const Error& e) {
        throw ValidationError(e.what());
    }
    cfg.matching.seed = cfg.seed;
    cfg.prosac.seed = cfg.seed;
    for (auto& cam : cfg.cameras) {
        if (cam.frame_glob.empty()) continue;
        cam.frames = detail::expand_glob(cam.frame_glob);
        if (cam.frames.empty())
            throw MissingFrames("no files match pattern: " + cam.frame_glob);
    }
    return cfg;
}

}  // namespace lorbpano

#endif
