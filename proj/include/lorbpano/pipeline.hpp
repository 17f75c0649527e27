#ifndef LORBPANO_PIPELINE_HPP
#define LORBPANO_PIPELINE_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lorbpano/compose.hpp"
#include "lorbpano/homography.hpp"
#include "lorbpano/lorb.hpp"
#include "lorbpano/matchlsh.hpp"

namespace lorbpano {

enum class Stage {
    Ingest = 0,
    RectifyCrop,
    Detect,
    Describe,
    MatchEstimate,
    WarpBlend,
    Output
};
constexpr int kNumStages = 7;

inline const char* stage_name(Stage s) {
    static const char* names[kNumStages] = {"ingest",  "rectify_crop",   "detect",
                                            "describe", "match_estimate", "warp_blend",
                                            "output"};
    return names[static_cast<int>(s)];
}

struct StageSpan {
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
};

/// One frame's journey through the pipeline.
struct FramePacket {
    std::uint64_t frame_index = 0;
    std::vector<ImageU8> images;                 // per camera
    std::vector<DetectionRegion> regions;        // all regions, camera_id set
    std::vector<std::vector<Keypoint>> keypoints;     // per camera
    std::vector<std::vector<Descriptor>> descriptors;  // per camera, parallel to keypoints
    std::vector<std::vector<Match>> pair_matches;     // per adjacent camera pair
    std::vector<Homography> homographies;        // per camera, into camera-0 frame
    ImageU8 composite;
    std::array<StageSpan, kNumStages> stage_times{};

    bool failed = false;
    Stage fail_stage = Stage::Ingest;
    std::string fail_reason;
};

/// Pre-sized reusable packets; no arena growth is expected after
/// construction during steady-state processing.
class BufferPool {
public:
    struct Caps {
        int num_cameras = 2;
        int width = 0, height = 0, channels = 1;
        int top_n = 500;
        int n_d = 256;
        int frames_in_flight = 1;
        std::size_t memory_cap_bytes = std::size_t{4} << 30;
    };

    explicit BufferPool(const Caps& caps) : caps_(caps) {
        if (caps.width < 1 || caps.height < 1 || caps.num_cameras < 1 ||
            caps.frames_in_flight < 1 || (caps.channels != 1 && caps.channels != 3))
            throw CapacityOverflow("buffer pool: invalid capacity parameters");
        if (byte_budget() > caps.memory_cap_bytes)
            throw CapacityOverflow("buffer pool: byte budget exceeds memory cap");
        for (int i = 0; i < caps.frames_in_flight; ++i) {
            free_.push_back(make_packet());
            ++creations_;
        }
    }

    /// Closed-form sizing: per packet, image arenas (cams*w*h*ch bytes),
    /// keypoint/descriptor arenas (cams * regions(=2) * top_n entries),
    /// match arenas ((cams-1) * top_n), and a canvas raster capped at
    /// (cams*w) x (2h); all times frames_in_flight.
    std::size_t byte_budget() const {
        const std::size_t img = static_cast<std::size_t>(caps_.num_cameras) * caps_.width *
                                caps_.height * caps_.channels;
        const std::size_t kp =
            static_cast<std::size_t>(caps_.num_cameras) * 2 * caps_.top_n * sizeof(Keypoint);
        const std::size_t desc = static_cast<std::size_t>(caps_.num_cameras) * 2 *
                                 caps_.top_n * 2 * (static_cast<std::size_t>(caps_.n_d) / 8);
        const std::size_t matches = static_cast<std::size_t>(caps_.num_cameras - 1 > 0
                                                                 ? caps_.num_cameras - 1
                                                                 : 0) *
                                    caps_.top_n * sizeof(Match);
        const std::size_t canvas = static_cast<std::size_t>(caps_.num_cameras) * caps_.width *
                                   2 * caps_.height * caps_.channels;
        return (img + kp + desc + matches + canvas) * caps_.frames_in_flight;
    }

    std::unique_ptr<FramePacket> acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !free_.empty(); });
        auto pkt = std::move(free_.back());
        free_.pop_back();
        ++in_use_;
        high_water_ = std::max(high_water_, in_use_);
        ++acquires_;
        return pkt;
    }

    void release(std::unique_ptr<FramePacket> pkt) {
        reset_packet(*pkt);
        std::lock_guard lock(mu_);
        free_.push_back(std::move(pkt));
        --in_use_;
        cv_.notify_one();
    }

    std::uint64_t arena_creations() const { return creations_; }
    std::uint64_t acquires() const { return acquires_; }
    int high_water() const { return high_water_; }
    int capacity() const { return caps_.frames_in_flight; }

private:
    std::unique_ptr<FramePacket> make_packet() {
        auto pkt = std::make_unique<FramePacket>();
        pkt->images.resize(caps_.num_cameras);
        for (auto& img : pkt->images)
            img.data.reserve(static_cast<std::size_t>(caps_.width) * caps_.height *
                             caps_.channels);
        pkt->keypoints.resize(caps_.num_cameras);
        pkt->descriptors.resize(caps_.num_cameras);
        for (int c = 0; c < caps_.num_cameras; ++c) {
            pkt->keypoints[c].reserve(static_cast<std::size_t>(caps_.top_n) * 2);
            pkt->descriptors[c].reserve(static_cast<std::size_t>(caps_.top_n) * 2);
        }
        pkt->pair_matches.resize(std::max(0, caps_.num_cameras - 1));
        for (auto& m : pkt->pair_matches)
            m.reserve(static_cast<std::size_t>(caps_.top_n));
        pkt->homographies.reserve(caps_.num_cameras);
        pkt->composite.data.reserve(static_cast<std::size_t>(caps_.num_cameras) *
                                    caps_.width * 2 * caps_.height * caps_.channels);
        record_caps(*pkt);
        return pkt;
    }

    void record_caps(FramePacket& pkt) {
        tracked_caps_.clear();
        for (auto& img : pkt.images) tracked_caps_.push_back(img.data.capacity());
        tracked_caps_.push_back(pkt.composite.data.capacity());
    }

    /// Clears per-frame state and counts a creation event when a tracked
    /// arena outgrew its reservation (steady state must not do this).
    void reset_packet(FramePacket& pkt) {
        std::size_t i = 0;
        bool grew = false;
        for (auto& img : pkt.images)
            grew |= img.data.capacity() > tracked_caps_[i++];
        grew |= pkt.composite.data.capacity() > tracked_caps_[i];
        if (grew) {
            ++creations_;
            record_caps(pkt);
        }
        for (auto& kp : pkt.keypoints) kp.clear();
        for (auto& d : pkt.descriptors) d.clear();
        for (auto& m : pkt.pair_matches) m.clear();
        pkt.regions.clear();
        pkt.homographies.clear();
        pkt.failed = false;
        pkt.fail_reason.clear();
        pkt.stage_times = {};
    }

    Caps caps_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<std::unique_ptr<FramePacket>> free_;
    std::vector<std::size_t> tracked_caps_;
    std::atomic<std::uint64_t> creations_{0};
    std::atomic<std::uint64_t> acquires_{0};
    int in_use_ = 0;
    int high_water_ = 0;
};

enum class PipelineMode { Serial, Pipelined };

struct PipelineConfig {
    PipelineMode mode = PipelineMode::Pipelined;
    int frames_in_flight = 4;
    int workers_per_stage = 1;
    int homography_refresh = 1;  // recompute every K frames
};

struct DroppedFrame {
    std::uint64_t frame_index;
    Stage stage;
    std::string reason;
};

struct Metrics {
    std::array<std::vector<double>, kNumStages> stage_ns;
    std::vector<DroppedFrame> drops;
    std::uint64_t frames_in = 0;
    std::uint64_t frames_out = 0;
    double wall_seconds = 0.0;
    double frames_per_second = 0.0;
    std::uint64_t pool_creations = 0;
    std::uint64_t pool_creations_after_warmup = 0;
    int pool_high_water = 0;

    struct Summary {
        double mean = 0, p50 = 0, p99 = 0;
    };
    Summary stage_summary(Stage s) const {
        auto v = stage_ns[static_cast<int>(s)];
        Summary out;
        if (v.empty()) return out;
        std::sort(v.begin(), v.end());
        for (double x : v) out.mean += x;
        out.mean /= static_cast<double>(v.size());
        out.p50 = v[v.size() / 2];
        out.p99 = v[std::min(v.size() - 1, static_cast<std::size_t>(v.size() * 99 / 100))];
        return out;
    }
};

/// Per-camera pre-correction and the inter-camera overlap declaration.
struct RigLayout {
    struct Camera {
        Homography pre_transform = Homography::identity();
        std::optional<DetectionRegion> crop;  // camera_id unused here
    };
    std::vector<Camera> cameras;
    CameraLayout overlap;
};

struct StitchParams {
    ExtractionConfig extraction;
    MatchConfig matching;
    ProsacConfig prosac;
    int blend_levels = 4;
    std::uint64_t seed = 0;
};

/// Reuses the last estimated homography set between refreshes; K=1
/// recomputes every frame.
class HomographyCache {
public:
    explicit HomographyCache(int refresh_every) : k_(refresh_every) {
        if (k_ < 1) throw BadParams("homography cache: K must be >= 1");
    }

    /// estimator() is invoked on refresh frames (and, as a fallback, never:
    /// a failed refresh falls back to the cached set when one exists).
    std::vector<Homography> get(std::uint64_t frame_index,
                                const std::function<std::vector<Homography>()>& estimator) {
        if (frame_index % static_cast<std::uint64_t>(k_) == 0 || !cached_) {
            try {
                cached_ = estimator();
                ++estimations_;
            } catch (const Error&) {
                if (!cached_) throw NoValidHomographyYet("no homography cached yet");
            }
        }
        return *cached_;
    }

    std::uint64_t estimations() const { return estimations_; }

private:
    int k_;
    std::optional<std::vector<Homography>> cached_;
    std::uint64_t estimations_ = 0;
};

using FrameSource = std::function<std::optional<std::vector<ImageU8>>()>;
using FrameSink = std::function<void(const FramePacket&)>;

namespace detail {

template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t cap) : cap_(cap) {}

    void push(T item) {
        std::unique_lock lock(mu_);
        cv_full_.wait(lock, [&] { return q_.size() < cap_ || closed_; });
        q_.push_back(std::move(item));
        cv_empty_.notify_one();
    }

    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        cv_empty_.wait(lock, [&] { return !q_.empty() || closed_; });
        if (q_.empty()) return std::nullopt;
        T item = std::move(q_.front());
        q_.pop_front();
        cv_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lock(mu_);
        closed_ = true;
        cv_empty_.notify_all();
        cv_full_.notify_all();
    }

private:
    std::size_t cap_;
    std::mutex mu_;
    std::condition_variable cv_empty_, cv_full_;
    std::deque<T> q_;
    bool closed_ = false;
};

inline std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace detail

/// Runs Ingest -> Rectify/Crop -> Detect -> Describe -> Match+Estimate ->
/// Warp+Blend -> Output over a frame source, Serial or Pipelined; composites
/// are bit-identical between the two modes.
class StitchEngine {
public:
    StitchEngine(RigLayout layout, StitchParams params, PipelineConfig cfg)
        : layout_(std::move(layout)), params_(std::move(params)), cfg_(cfg),
          pattern_(brief_pattern(params_.extraction.n_d, params_.extraction.patch_half,
                                 params_.seed)),
          cache_(cfg.homography_refresh) {
        params_.extraction.validate();
        if (layout_.cameras.empty()) throw BadParams("stitch engine: no cameras");
    }

    BufferPool& make_pool(int width, int height, int channels) {
        BufferPool::Caps caps;
        caps.num_cameras = static_cast<int>(layout_.cameras.size());
        caps.width = width;
        caps.height = height;
        caps.channels = channels;
        caps.top_n = params_.extraction.top_n;
        caps.n_d = params_.extraction.n_d;
        caps.frames_in_flight =
            cfg_.mode == PipelineMode::Serial ? 1 : cfg_.frames_in_flight;
        pool_ = std::make_unique<BufferPool>(caps);
        return *pool_;
    }

    const BriefPattern& pattern() const { return pattern_; }
    const HomographyCache& homography_cache() const { return cache_; }

    Metrics run(const FrameSource& source, const FrameSink& sink) {
        Metrics metrics;
        const auto t0 = std::chrono::steady_clock::now();
        if (cfg_.mode == PipelineMode::Serial)
            run_serial(source, sink, metrics);
        else
            run_pipelined(source, sink, metrics);
        metrics.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics.frames_per_second =
            metrics.wall_seconds > 0 ? metrics.frames_out / metrics.wall_seconds : 0.0;
        if (pool_) {
            metrics.pool_creations = pool_->arena_creations();
            metrics.pool_creations_after_warmup =
                pool_->arena_creations() - warmup_creations_;
            metrics.pool_high_water = pool_->high_water();
        }
        return metrics;
    }

    // --- stage bodies, usable directly by tests ---

    void stage_rectify_crop(FramePacket& pkt) const {
        std::vector<std::pair<int, int>> dims;
        for (std::size_t c = 0; c < pkt.images.size(); ++c) {
            const auto& cam = layout_.cameras[c];
            ImageU8& img = pkt.images[c];
            const bool identity = cam.pre_transform.h == Homography::identity().h;
            if (!identity) {
                Canvas self{img.width, img.height, 0, 0, {}};
                auto [warped, cov] = warp_image(to_f32(img), cam.pre_transform, self);
                img = to_u8_image(warped);
            }
            if (cam.crop) {
                const DetectionRegion& r = *cam.crop;
                if (r.x0 < 0 || r.y0 < 0 || r.x1 > img.width || r.y1 > img.height ||
                    r.width() < 1 || r.height() < 1)
                    throw BadParams("rectify_crop: crop outside image");
                ImageU8 cropped(r.width(), r.height(), img.channels, img.color_space);
                for (int y = r.y0; y < r.y1; ++y)
                    for (int x = r.x0; x < r.x1; ++x)
                        for (int ch = 0; ch < img.channels; ++ch)
                            cropped.at(x - r.x0, y - r.y0, ch) = img.at(x, y, ch);
                img = std::move(cropped);
            }
            dims.emplace_back(img.width, img.height);
        }
        pkt.regions = partition_regions(layout_.overlap, dims, params_.extraction.patch_half);
    }

    void stage_detect(FramePacket& pkt) const {
        const int cams = static_cast<int>(pkt.images.size());
        auto detect_camera = [&](int c) {
            const ImageU8& img = pkt.images[c];
            std::vector<Keypoint>& out = pkt.keypoints[c];
            for (std::size_t ri = 0; ri < pkt.regions.size(); ++ri) {
                if (pkt.regions[ri].camera_id != c) continue;
                auto corners = fast_corners(img, pkt.regions[ri],
                                            params_.extraction.fast_threshold,
                                            params_.extraction.fast_arc);
                if (corners.empty()) continue;
                auto responses = harris_response(img, corners, params_.extraction.harris_alpha,
                                                 params_.extraction.harris_sigma);
                std::vector<Keypoint> candidates;
                for (std::size_t i = 0; i < corners.size(); ++i)
                    if (responses[i] >= params_.extraction.harris_threshold)
                        candidates.push_back(Keypoint{corners[i].first, corners[i].second,
                                                      responses[i], static_cast<int>(ri)});
                auto selected = select_top_n(nms(candidates), params_.extraction.top_n);
                out.insert(out.end(), selected.begin(), selected.end());
            }
        };
        run_per_camera(cams, detect_camera);
    }

    void stage_describe(FramePacket& pkt) const {
        const int cams = static_cast<int>(pkt.images.size());
        auto describe_camera = [&](int c) {
            const ImageU8& img = pkt.images[c];
            pkt.descriptors[c].assign(pkt.keypoints[c].size(),
                                      Descriptor(params_.extraction.n_d));
            // one smoothed crop per region this camera's keypoints live in
            for (std::size_t ri = 0; ri < pkt.regions.size(); ++ri) {
                if (pkt.regions[ri].camera_id != c) continue;
                bool any = false;
                for (const auto& kp : pkt.keypoints[c]) any |= kp.region_id == static_cast<int>(ri);
                if (!any) continue;
                auto crop = lorbpano::detail::smoothed_crop(img, pkt.regions[ri],
                                                            params_.extraction.patch_half,
                                                            params_.extraction.brief_blur_sigma);
                for (std::size_t i = 0; i < pkt.keypoints[c].size(); ++i) {
                    const Keypoint& kp = pkt.keypoints[c][i];
                    if (kp.region_id != static_cast<int>(ri)) continue;
                    Keypoint local{kp.x - crop.off_x, kp.y - crop.off_y, kp.response,
                                   kp.region_id};
                    pkt.descriptors[c][i] = brief_descriptor(crop.img, local, pattern_);
                }
            }
        };
        run_per_camera(cams, describe_camera);
    }

    void stage_match_estimate(FramePacket& pkt) {
        auto estimator = [&]() -> std::vector<Homography> {
            const int cams = static_cast<int>(pkt.images.size());
            std::vector<Homography> chain{Homography::identity()};
            for (int i = 0; i + 1 < cams; ++i) {
                // query = right camera's left strip, train = left camera's right strip
                auto matches = match_features(pkt.descriptors[i + 1], pkt.descriptors[i],
                                              params_.matching);
                pkt.pair_matches[i] = matches;
                std::vector<Correspondence> corr;
                for (const Match& m : matches) {
                    const Keypoint& src = pkt.keypoints[i + 1][m.query_id];
                    const Keypoint& dst = pkt.keypoints[i][m.train_id];
                    corr.push_back(Correspondence{static_cast<double>(src.x),
                                                  static_cast<double>(src.y),
                                                  static_cast<double>(dst.x),
                                                  static_cast<double>(dst.y), m.quality});
                }
                ProsacConfig pc = params_.prosac;
                pc.seed = params_.seed ^ (pkt.frame_index * 0x9e3779b97f4a7c15ULL + i);
                auto result = prosac_homography(corr, pc);
                chain.push_back(chain.back().compose(result.model));
            }
            return chain;
        };
        pkt.homographies = cache_.get(pkt.frame_index, estimator);
    }

    void stage_warp_blend(FramePacket& pkt) const {
        std::vector<std::pair<int, int>> dims;
        for (const auto& img : pkt.images) dims.emplace_back(img.width, img.height);
        Canvas canvas = compute_canvas(dims, pkt.homographies);
        std::vector<ImageF32> warped;
        std::vector<ImageF32> coverage;
        for (std::size_t c = 0; c < pkt.images.size(); ++c) {
            auto [w, cov] = warp_image(to_f32(pkt.images[c]), pkt.homographies[c], canvas);
            warped.push_back(std::move(w));
            coverage.push_back(std::move(cov));
        }
        auto masks = linear_seam_mask(coverage);
        int levels = params_.blend_levels;
        while (levels > 1 && (canvas.width < (1 << (levels - 1)) ||
                              canvas.height < (1 << (levels - 1))))
            --levels;
        ImageU8 blended = multiband_blend(warped, masks, levels);
        pkt.composite.width = blended.width;
        pkt.composite.height = blended.height;
        pkt.composite.channels = blended.channels;
        pkt.composite.color_space = blended.color_space;
        pkt.composite.data.assign(blended.data.begin(), blended.data.end());
    }

private:
    void run_per_camera(int cams, const std::function<void(int)>& fn) const {
        const int workers = std::min(cfg_.workers_per_stage, cams);
        if (workers <= 1) {
            for (int c = 0; c < cams; ++c) fn(c);
            return;
        }
        std::vector<std::thread> threads;
        std::atomic<int> next{0};
        for (int t = 0; t < workers; ++t)
            threads.emplace_back([&] {
                for (int c = next.fetch_add(1); c < cams; c = next.fetch_add(1)) fn(c);
            });
        for (auto& th : threads) th.join();
    }

    bool run_stage(FramePacket& pkt, Stage stage, Metrics& metrics, std::mutex* mmu) {
        if (pkt.failed) return false;
        auto& span = pkt.stage_times[static_cast<int>(stage)];
        span.start_ns = detail::now_ns();
        try {
            switch (stage) {
                case Stage::RectifyCrop: stage_rectify_crop(pkt); break;
                case Stage::Detect: stage_detect(pkt); break;
                case Stage::Describe: stage_describe(pkt); break;
                case Stage::MatchEstimate: stage_match_estimate(pkt); break;
                case Stage::WarpBlend: stage_warp_blend(pkt); break;
                default: break;
            }
        } catch (const std::exception& e) {
            pkt.failed = true;
            pkt.fail_stage = stage;
            pkt.fail_reason = e.what();
            span.end_ns = detail::now_ns();
            if (mmu) {
                std::lock_guard lock(*mmu);
                metrics.drops.push_back({pkt.frame_index, stage, pkt.fail_reason});
            } else {
                metrics.drops.push_back({pkt.frame_index, stage, pkt.fail_reason});
            }
            return false;
        }
        span.end_ns = detail::now_ns();
        if (mmu) {
            std::lock_guard lock(*mmu);
            metrics.stage_ns[static_cast<int>(stage)].push_back(
                static_cast<double>(span.end_ns - span.start_ns));
        } else {
            metrics.stage_ns[static_cast<int>(stage)].push_back(
                static_cast<double>(span.end_ns - span.start_ns));
        }
        return true;
    }

    void note_warmup(std::uint64_t frames_started) {
        if (!warmup_recorded_ && pool_ &&
            frames_started >= static_cast<std::uint64_t>(pool_->capacity())) {
            warmup_creations_ = pool_->arena_creations();
            warmup_recorded_ = true;
        }
    }

    void finish_packet(std::unique_ptr<FramePacket> pkt, const FrameSink& sink,
                       Metrics& metrics, std::mutex* mmu) {
        auto& span = pkt->stage_times[static_cast<int>(Stage::Output)];
        span.start_ns = detail::now_ns();
        if (!pkt->failed) {
            sink(*pkt);
            span.end_ns = detail::now_ns();
            double ns = static_cast<double>(span.end_ns - span.start_ns);
            if (mmu) {
                std::lock_guard lock(*mmu);
                metrics.stage_ns[static_cast<int>(Stage::Output)].push_back(ns);
                ++metrics.frames_out;
            } else {
                metrics.stage_ns[static_cast<int>(Stage::Output)].push_back(ns);
                ++metrics.frames_out;
            }
        }
        pool_->release(std::move(pkt));
    }

    std::unique_ptr<FramePacket> ingest(const FrameSource& source, std::uint64_t index,
                                        Metrics& metrics, std::mutex* mmu, bool& done) {
        auto frame = source();
        if (!frame) {
            done = true;
            return nullptr;
        }
        if (!pool_) {
            if (frame->empty()) throw BadParams("pipeline: empty camera set");
            make_pool((*frame)[0].width, (*frame)[0].height, (*frame)[0].channels);
        }
        auto pkt = pool_->acquire();
        pkt->frame_index = index;
        auto& span = pkt->stage_times[static_cast<int>(Stage::Ingest)];
        span.start_ns = detail::now_ns();
        // copy into the pooled image arenas rather than adopting the
        // supplier's buffers, so steady state reuses reserved capacity
        if (pkt->images.size() != frame->size()) pkt->images.resize(frame->size());
        for (std::size_t c = 0; c < frame->size(); ++c) {
            const ImageU8& src = (*frame)[c];
            ImageU8& dst = pkt->images[c];
            dst.width = src.width;
            dst.height = src.height;
            dst.channels = src.channels;
            dst.color_space = src.color_space;
            dst.data.assign(src.data.begin(), src.data.end());
        }
        span.end_ns = detail::now_ns();
        double ns = static_cast<double>(span.end_ns - span.start_ns);
        if (mmu) {
            std::lock_guard lock(*mmu);
            metrics.stage_ns[static_cast<int>(Stage::Ingest)].push_back(ns);
            ++metrics.frames_in;
        } else {
            metrics.stage_ns[static_cast<int>(Stage::Ingest)].push_back(ns);
            ++metrics.frames_in;
        }
        return pkt;
    }

    void run_serial(const FrameSource& source, const FrameSink& sink, Metrics& metrics) {
        std::uint64_t index = 0;
        bool done = false;
        for (;;) {
            auto pkt = ingest(source, index, metrics, nullptr, done);
            if (done) break;
            note_warmup(index + 1);
            for (Stage s : {Stage::RectifyCrop, Stage::Detect, Stage::Describe,
                            Stage::MatchEstimate, Stage::WarpBlend})
                if (!run_stage(*pkt, s, metrics, nullptr)) break;
            finish_packet(std::move(pkt), sink, metrics, nullptr);
            ++index;
        }
    }

    void run_pipelined(const FrameSource& source, const FrameSink& sink, Metrics& metrics) {
        using Queue = detail::BoundedQueue<std::unique_ptr<FramePacket>>;
        const std::size_t qcap = static_cast<std::size_t>(cfg_.frames_in_flight);
        std::array<std::unique_ptr<Queue>, 6> queues;
        for (auto& q : queues) q = std::make_unique<Queue>(qcap);
        std::mutex mmu;

        std::thread ingest_thread([&] {
            std::uint64_t index = 0;
            bool done = false;
            for (;;) {
                auto pkt = ingest(source, index, metrics, &mmu, done);
                if (done) break;
                note_warmup(index + 1);
                queues[0]->push(std::move(pkt));
                ++index;
            }
            queues[0]->close();
        });

        const std::array<Stage, 5> middle = {Stage::RectifyCrop, Stage::Detect,
                                             Stage::Describe, Stage::MatchEstimate,
                                             Stage::WarpBlend};
        std::vector<std::thread> workers;
        for (std::size_t i = 0; i < middle.size(); ++i)
            workers.emplace_back([&, i] {
                for (;;) {
                    auto pkt = queues[i]->pop();
                    if (!pkt) break;
                    run_stage(**pkt, middle[i], metrics, &mmu);
                    queues[i + 1]->push(std::move(*pkt));
                }
                queues[i + 1]->close();
            });

        std::thread output_thread([&] {
            std::uint64_t expected = 0;
            for (;;) {
                auto pkt = queues[5]->pop();
                if (!pkt) break;
                // single-worker stages preserve FIFO order
                assert((*pkt)->frame_index >= expected);
                expected = (*pkt)->frame_index + 1;
                (void)expected;
                finish_packet(std::move(*pkt), sink, metrics, &mmu);
            }
        });

        ingest_thread.join();
        for (auto& w : workers) w.join();
        output_thread.join();
    }

    RigLayout layout_;
    StitchParams params_;
    PipelineConfig cfg_;
    BriefPattern pattern_;
    HomographyCache cache_;
    std::unique_ptr<BufferPool> pool_;
    std::uint64_t warmup_creations_ = 0;
    bool warmup_recorded_ = false;
};

/// Spec-surface helper: a pool sized for `frames_in_flight` packets.
inline BufferPool preallocate(const PipelineConfig& cfg, int width, int height, int channels,
                              int top_n, int n_d, int num_cameras = 2) {
    BufferPool::Caps caps;
    caps.num_cameras = num_cameras;
    caps.width = width;
    caps.height = height;
    caps.channels = channels;
    caps.top_n = top_n;
    caps.n_d = n_d;
    caps.frames_in_flight = cfg.mode == PipelineMode::Serial ? 1 : cfg.frames_in_flight;
    return BufferPool(caps);
}

}  // namespace lorbpano

#endif
