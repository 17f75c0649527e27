#ifndef LORBPANO_CLI_HPP
#define LORBPANO_CLI_HPP

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "lorbpano/config.hpp"
#include "lorbpano/synth.hpp"

namespace lorbpano {
namespace cli {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("LORB_LOG");
        if (!env) return LogLevel::Error;
        std::string v(env);
        if (v == "debug") return LogLevel::Debug;
        if (v == "info") return LogLevel::Info;
        return LogLevel::Error;
    }();
    return level;
}

inline void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}
inline void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}
inline void log_error(const std::string& msg) { std::cerr << "[error] " << msg << "\n"; }

inline std::string plane_hex(const Descriptor& d, bool gt) {
    char buf[17];
    std::string out;
    for (int i = 0; i < Descriptor::words(d.n_d); ++i) {
        std::snprintf(buf, sizeof buf, "%016llx",
                      static_cast<unsigned long long>(gt ? d.gt[i] : d.lt[i]));
        out += buf;
    }
    return out;
}

inline RigLayout rig_from_config(const RunConfig& cfg) {
    RigLayout layout;
    for (const auto& cam : cfg.cameras) {
        RigLayout::Camera c;
        c.pre_transform = cam.pre_transform;
        c.crop = cam.crop;
        layout.cameras.push_back(c);
    }
    layout.overlap.overlap_fraction = cfg.overlap;
    return layout;
}

inline StitchParams params_from_config(const RunConfig& cfg) {
    StitchParams p;
    p.extraction = cfg.extraction;
    p.matching = cfg.matching;
    p.prosac = cfg.prosac;
    p.blend_levels = cfg.blend_levels;
    p.seed = cfg.seed;
    return p;
}

inline void write_timings_csv(const std::string& path,
                              const std::vector<std::string>& frame_rows,
                              const Metrics& metrics) {
    std::ofstream out(path);
    out << "frame_index,stage,duration_ns\n";
    for (const auto& row : frame_rows) out << row << "\n";
    for (int s = 0; s < kNumStages; ++s) {
        auto sum = metrics.stage_summary(static_cast<Stage>(s));
        char buf[160];
        std::snprintf(buf, sizeof buf, "summary,%s,%.0f,%.0f,%.0f",
                      stage_name(static_cast<Stage>(s)), sum.mean, sum.p50, sum.p99);
        out << buf << "\n";
    }
}

inline void print_metrics(const Metrics& metrics) {
    std::printf("frames in/out: %llu/%llu  throughput: %.2f fps  wall: %.2fs\n",
                static_cast<unsigned long long>(metrics.frames_in),
                static_cast<unsigned long long>(metrics.frames_out),
                metrics.frames_per_second, metrics.wall_seconds);
    for (int s = 0; s < kNumStages; ++s) {
        auto sum = metrics.stage_summary(static_cast<Stage>(s));
        std::printf("  %-14s mean %8.2fms  p50 %8.2fms  p99 %8.2fms\n",
                    stage_name(static_cast<Stage>(s)), sum.mean / 1e6, sum.p50 / 1e6,
                    sum.p99 / 1e6);
    }
    std::printf("  pool: high water %d, arena creations %llu (%llu after warm-up)\n",
                metrics.pool_high_water,
                static_cast<unsigned long long>(metrics.pool_creations),
                static_cast<unsigned long long>(metrics.pool_creations_after_warmup));
    for (const auto& d : metrics.drops)
        log_error("dropped frame " + std::to_string(d.frame_index) + " at " +
                  std::string(stage_name(d.stage)) + ": " + d.reason);
}

/// Per-frame PPM writer plus timing collection; exit 0 on >= 1 stitched frame.
inline int cmd_stitch(const RunConfig& cfg) {
    if (cfg.cameras.size() < 2) {
        log_error("stitch needs at least 2 cameras");
        return 2;
    }
    for (const auto& cam : cfg.cameras)
        if (cam.frames.empty()) {
            log_error("camera " + std::to_string(cam.id) + " has no frames");
            return 2;
        }
    std::size_t frame_count = cfg.cameras[0].frames.size();
    for (const auto& cam : cfg.cameras)
        frame_count = std::min(frame_count, cam.frames.size());

    std::filesystem::create_directories(cfg.output_dir);
    StitchEngine engine(rig_from_config(cfg), params_from_config(cfg), cfg.pipeline);

    std::size_t next_frame = 0;
    FrameSource source = [&]() -> std::optional<std::vector<ImageU8>> {
        if (next_frame >= frame_count) return std::nullopt;
        std::vector<ImageU8> cams;
        for (const auto& cam : cfg.cameras)
            cams.push_back(load_image(cam.frames[next_frame]));
        ++next_frame;
        return cams;
    };

    std::vector<std::string> timing_rows;
    FrameSink sink = [&](const FramePacket& pkt) {
        ImageU8 out = pkt.composite;
        if (out.channels == 1) {  // PPM output is always 3-channel
            ImageU8 rgb(out.width, out.height, 3, ColorSpace::RGB);
            for (int y = 0; y < out.height; ++y)
                for (int x = 0; x < out.width; ++x)
                    for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = out.at(x, y);
            out = std::move(rgb);
        }
        save_pnm(out, cfg.output_dir + "/pano_" + std::to_string(pkt.frame_index) + ".ppm");
        if (cfg.emit_timings)
            for (int s = 0; s < kNumStages; ++s) {
                const auto& span = pkt.stage_times[s];
                timing_rows.push_back(std::to_string(pkt.frame_index) + "," +
                                      stage_name(static_cast<Stage>(s)) + "," +
                                      std::to_string(span.end_ns - span.start_ns));
            }
    };

    Metrics metrics;
    try {
        metrics = engine.run(source, sink);
    } catch (const Error& e) {
        log_error(e.what());
        return 1;
    }
    if (cfg.emit_timings)
        write_timings_csv(cfg.output_dir + "/timings.csv", timing_rows, metrics);
    print_metrics(metrics);
    return metrics.frames_out >= 1 ? 0 : 1;
}

/// Writes keypoints + descriptors of one image as CSV to
/// <output_dir>/features.csv.
inline int cmd_extract(const RunConfig& cfg, const std::string& image_path) {
    ImageU8 img;
    try {
        img = to_grayscale(load_image(image_path));
    } catch (const Error& e) {
        log_error(e.what());
        return 1;
    }
    const int ph = cfg.extraction.patch_half;
    if (img.width <= 2 * ph || img.height <= 2 * ph) {
        log_error("image smaller than 2*patch_half");
        return 1;
    }
    std::vector<DetectionRegion> regions{
        DetectionRegion{ph, ph, img.width - ph, img.height - ph, 0}};
    BriefPattern pattern = brief_pattern(cfg.extraction.n_d, ph, cfg.seed);
    std::vector<Feature> features;
    try {
        features = extract_features(img, regions, cfg.extraction, pattern);
    } catch (const Error& e) {
        log_error(e.what());
        return 1;
    }
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir + "/features.csv");
    out << "x,y,response,region_id,gt_plane,lt_plane\n";
    char buf[64];
    for (const auto& f : features) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6g,%d", f.keypoint.x, f.keypoint.y,
                      f.keypoint.response, f.keypoint.region_id);
        out << buf << "," << plane_hex(f.descriptor, true) << ","
            << plane_hex(f.descriptor, false) << "\n";
    }
    log_info("wrote " + std::to_string(features.size()) + " features");
    return 0;
}

namespace bench {

inline double time_ms(const std::function<void()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

/// Full-frame vs overlap-restricted extraction time at the benchmark sizes.
inline void features_suite(const RunConfig& cfg, std::ostream& csv) {
    csv << "width,height,full_ms,region_ms,ratio\n";
    const int reps = 5;
    BriefPattern pattern = brief_pattern(cfg.extraction.n_d, cfg.extraction.patch_half,
                                         cfg.seed);
    for (auto [w, h] : std::vector<std::pair<int, int>>{{800, 600}, {1920, 1080},
                                                        {2304, 1728}}) {
        ImageU8 img = synth::texture(w, h, cfg.seed + w);
        const int ph = cfg.extraction.patch_half;
        std::vector<DetectionRegion> full{DetectionRegion{ph, ph, w - ph, h - ph, 0}};
        const int strip = static_cast<int>(std::lround(w * (1.0 - cfg.overlap)));
        std::vector<DetectionRegion> region{DetectionRegion{strip + ph, ph, w - ph, h - ph, 0}};
        std::vector<double> full_ms, region_ms;
        for (int r = 0; r < reps; ++r) {
            full_ms.push_back(
                time_ms([&] { extract_features(img, full, cfg.extraction, pattern); }));
            region_ms.push_back(
                time_ms([&] { extract_features(img, region, cfg.extraction, pattern); }));
        }
        double fm = median(full_ms), rm = median(region_ms);
        char buf[128];
        std::snprintf(buf, sizeof buf, "%d,%d,%.2f,%.2f,%.3f", w, h, fm, rm, rm / fm);
        csv << buf << "\n";
        std::printf("features %dx%d: full %.1fms, region %.1fms, ratio %.3f\n", w, h, fm, rm,
                    rm / fm);
    }
}

inline Descriptor random_descriptor(int n_d, std::mt19937_64& rng) {
    Descriptor d(n_d);
    for (int i = 0; i < n_d; ++i) {
        int t = static_cast<int>(rng() % 3) - 1;
        d.set_trit(i, t);
    }
    return d;
}

/// Flips `flips` trits to a different value.
inline Descriptor perturb_descriptor(const Descriptor& base, int flips, std::mt19937_64& rng) {
    Descriptor d(base.n_d);
    std::vector<int> trits(base.n_d);
    for (int i = 0; i < base.n_d; ++i) trits[i] = base.trit(i);
    for (int f = 0; f < flips; ++f) {
        int i = static_cast<int>(rng() % static_cast<std::uint64_t>(base.n_d));
        trits[i] = trits[i] == 0 ? 1 : 0;
    }
    for (int i = 0; i < base.n_d; ++i) d.set_trit(i, trits[i]);
    return d;
}

inline void match_suite(const RunConfig& cfg, std::ostream& csv) {
    const int n = 1000, queries = 100;
    std::mt19937_64 rng(cfg.seed);
    std::vector<Descriptor> base;
    for (int i = 0; i < n; ++i) base.push_back(random_descriptor(cfg.extraction.n_d, rng));
    LshIndex index(base, cfg.matching.tables, cfg.matching.bits, cfg.matching.seed);
    int recalled = 0;
    double lsh_ms = 0, brute_ms = 0;
    for (int qi = 0; qi < queries; ++qi) {
        int target = static_cast<int>(rng() % n);
        Descriptor q = perturb_descriptor(base[target], 8, rng);
        int brute_best = -1, brute_dist = 1 << 30;
        brute_ms += time_ms([&] {
            for (int i = 0; i < n; ++i) {
                int d = descriptor_distance(q, base[i]);
                if (d < brute_dist) {
                    brute_dist = d;
                    brute_best = i;
                }
            }
        });
        std::vector<Match> hits;
        lsh_ms += time_ms([&] {
            hits = query(index, q, cfg.matching.t_probes, 2 * cfg.extraction.n_d);
        });
        if (!hits.empty() && hits[0].train_id == brute_best) ++recalled;
    }
    double recall = static_cast<double>(recalled) / queries;
    csv << "queries,recall,lsh_ms_total,brute_ms_total\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.3f,%.2f,%.2f", queries, recall, lsh_ms, brute_ms);
    csv << buf << "\n";
    std::printf("match: recall %.3f, lsh %.2fms vs brute %.2fms over %d queries\n", recall,
                lsh_ms, brute_ms, queries);
}

/// One synthetic pipeline run; returns throughput in frames/sec.
inline double pipeline_run(const RunConfig& cfg, int cameras, PipelineMode mode,
                           int frames_in_flight, int frames, int width, int height) {
    const double f = cfg.overlap;
    const int shift = static_cast<int>(std::lround(width * (1.0 - f)));
    ImageU8 wide = synth::texture(width + shift * (cameras - 1), height, cfg.seed);
    std::vector<ImageU8> cams;
    for (int c = 0; c < cameras; ++c) {
        ImageU8 img(width, height, 1, ColorSpace::Gray);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) img.at(x, y) = wide.at(x + c * shift, y);
        cams.push_back(std::move(img));
    }
    RigLayout layout;
    layout.cameras.resize(cameras);
    layout.overlap.overlap_fraction = f;
    StitchParams params = params_from_config(cfg);
    PipelineConfig pc = cfg.pipeline;
    pc.mode = mode;
    pc.frames_in_flight = frames_in_flight;
    StitchEngine engine(layout, params, pc);
    int produced = 0;
    FrameSource source = [&]() -> std::optional<std::vector<ImageU8>> {
        if (produced >= frames) return std::nullopt;
        ++produced;
        return cams;
    };
    FrameSink sink = [](const FramePacket&) {};
    Metrics m = engine.run(source, sink);
    return m.frames_per_second;
}

inline void pipeline_suite(const RunConfig& cfg, std::ostream& csv) {
    csv << "cameras,frames_in_flight,mode,fps\n";
    const int frames = 20, width = 320, height = 240;
    for (int cams = 2; cams <= 7; ++cams) {
        double serial_fps =
            pipeline_run(cfg, cams, PipelineMode::Serial, 1, frames, width, height);
        csv << cams << ",1,serial," << serial_fps << "\n";
        std::printf("pipeline cams=%d serial: %.2f fps\n", cams, serial_fps);
        for (int fif : {1, 2, 4, 8}) {
            double fps =
                pipeline_run(cfg, cams, PipelineMode::Pipelined, fif, frames, width, height);
            csv << cams << "," << fif << ",pipelined," << fps << "\n";
            std::printf("pipeline cams=%d fif=%d: %.2f fps\n", cams, fif, fps);
        }
    }
}

}  // namespace bench

inline int cmd_bench(const RunConfig& cfg, const std::string& suite) {
    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream csv(cfg.output_dir + "/bench_" + suite + ".csv");
    if (suite == "features")
        bench::features_suite(cfg, csv);
    else if (suite == "match")
        bench::match_suite(cfg, csv);
    else if (suite == "pipeline")
        bench::pipeline_suite(cfg, csv);
    else {
        log_error("unknown bench suite: " + suite + " (features|match|pipeline)");
        return 2;
    }
    return 0;
}

}  // namespace cli
}  // namespace lorbpano

#endif
