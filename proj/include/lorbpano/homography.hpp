#ifndef LORBPANO_HOMOGRAPHY_HPP
#define LORBPANO_HOMOGRAPHY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lorbpano/error.hpp"

namespace lorbpano {

/// 3x3 projective transform, normalized so h[2][2] == 1.
struct Homography {
    std::array<double, 9> h = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return Homography{}; }
    static Homography translation(double tx, double ty) {
        return Homography{{1, 0, tx, 0, 1, ty, 0, 0, 1}};
    }

    double det() const {
        return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
               h[2] * (h[3] * h[7] - h[4] * h[6]);
    }

    std::pair<double, double> apply(double x, double y) const {
        double w = h[6] * x + h[7] * y + h[8];
        return {(h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w};
    }

    Homography inverse() const {
        double d = det();
        if (std::abs(d) < 1e-12) throw SingularHomography("homography not invertible");
        std::array<double, 9> inv = {
            (h[4] * h[8] - h[5] * h[7]) / d, (h[2] * h[7] - h[1] * h[8]) / d,
            (h[1] * h[5] - h[2] * h[4]) / d, (h[5] * h[6] - h[3] * h[8]) / d,
            (h[0] * h[8] - h[2] * h[6]) / d, (h[2] * h[3] - h[0] * h[5]) / d,
            (h[3] * h[7] - h[4] * h[6]) / d, (h[1] * h[6] - h[0] * h[7]) / d,
            (h[0] * h[4] - h[1] * h[3]) / d};
        Homography out{inv};
        if (std::abs(out.h[8]) > 1e-12)
            for (double& v : out.h) v /= inv[8];
        return out;
    }

    /// this ∘ other: applies `other` first.
    Homography compose(const Homography& other) const {
        Homography out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += h[r * 3 + k] * other.h[k * 3 + c];
                out.h[r * 3 + c] = s;
            }
        if (std::abs(out.h[8]) > 1e-12)
            for (double& v : out.h) v /= out.h[8];
        return out;
    }
};

/// One (src -> dst) point correspondence with a matcher quality score.
struct Correspondence {
    double sx = 0, sy = 0;
    double dx = 0, dy = 0;
    float quality = 0.0f;
};

namespace detail {

struct Normalizer {
    double cx = 0, cy = 0, scale = 1;
    std::pair<double, double> apply(double x, double y) const {
        return {(x - cx) * scale, (y - cy) * scale};
    }
};

inline Normalizer hartley_normalizer(const std::vector<Correspondence>& pairs, bool src) {
    Normalizer n;
    for (const auto& p : pairs) {
        n.cx += src ? p.sx : p.dx;
        n.cy += src ? p.sy : p.dy;
    }
    n.cx /= pairs.size();
    n.cy /= pairs.size();
    double mean_dist = 0;
    for (const auto& p : pairs) {
        double x = (src ? p.sx : p.dx) - n.cx, y = (src ? p.sy : p.dy) - n.cy;
        mean_dist += std::sqrt(x * x + y * y);
    }
    mean_dist /= pairs.size();
    n.scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    return n;
}

inline bool three_collinear(const std::vector<Correspondence>& pairs) {
    for (std::size_t i = 0; i < pairs.size(); ++i)
        for (std::size_t j = i + 1; j < pairs.size(); ++j)
            for (std::size_t k = j + 1; k < pairs.size(); ++k) {
                double cross = (pairs[j].sx - pairs[i].sx) * (pairs[k].sy - pairs[i].sy) -
                               (pairs[j].sy - pairs[i].sy) * (pairs[k].sx - pairs[i].sx);
                if (std::abs(cross) < 1e-9) return true;
            }
    return false;
}

}  // namespace detail

/// Hartley-normalized DLT: least squares on the 2n x 9 system, denormalized
/// and scaled so h33 = 1.
inline Homography dlt_homography(const std::vector<Correspondence>& pairs) {
    if (pairs.size() < 4) throw InsufficientMatches("dlt: need at least 4 pairs");
    if (pairs.size() == 4 && detail::three_collinear(pairs))
        throw DegenerateConfiguration("dlt: 3 collinear source points");
    const auto ns = detail::hartley_normalizer(pairs, true);
    const auto nd = detail::hartley_normalizer(pairs, false);
    Eigen::MatrixXd a(2 * pairs.size(), 9);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [x, y] = ns.apply(pairs[i].sx, pairs[i].sy);
        auto [u, v] = nd.apply(pairs[i].dx, pairs[i].dy);
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    Eigen::VectorXd hv = svd.matrixV().col(8);
    // denormalize: H = Td^-1 * Hn * Ts
    Eigen::Matrix3d hn;
    hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
    Eigen::Matrix3d ts, td;
    ts << ns.scale, 0, -ns.scale * ns.cx, 0, ns.scale, -ns.scale * ns.cy, 0, 0, 1;
    td << nd.scale, 0, -nd.scale * nd.cx, 0, nd.scale, -nd.scale * nd.cy, 0, 0, 1;
    Eigen::Matrix3d hm = td.inverse() * hn * ts;
    if (std::abs(hm(2, 2)) < 1e-12) throw NumericalFailure("dlt: h33 vanished");
    hm /= hm(2, 2);
    Homography out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.h[r * 3 + c] = hm(r, c);
    if (std::abs(out.det()) < 1e-9)
        throw DegenerateConfiguration("dlt: singular homography");
    return out;
}

/// Symmetric transfer error: forward plus backward Euclidean residual.
inline double symmetric_transfer_error(const Homography& h, const Homography& h_inv,
                                       const Correspondence& c) {
    auto [fx, fy] = h.apply(c.sx, c.sy);
    auto [bx, by] = h_inv.apply(c.dx, c.dy);
    return std::hypot(fx - c.dx, fy - c.dy) + std::hypot(bx - c.sx, by - c.sy);
}

enum class SamplingMode { Prosac, Uniform };

struct ProsacConfig {
    double threshold_px = 3.0;
    int max_iter = 1000;
    double confidence = 0.99;
    std::uint64_t seed = 0;
    SamplingMode sampling = SamplingMode::Prosac;
    double t_total = 200000.0;  // growth schedule budget (equivalent RANSAC samples)
};

struct ProsacResult {
    Homography model;
    std::vector<bool> inlier_mask;
    int inlier_count = 0;
    int iterations = 0;
};

/// Per-iteration sampler record, for diagnostics and the efficiency benchmark.
struct ProsacTrace {
    std::vector<int> pool_sizes;                 // n(t) per iteration
    std::vector<std::array<int, 4>> samples;     // indices drawn per iteration
};

/// Progressive sample consensus over matches pre-sorted by quality
/// descending. Iteration t draws the 4-point sample uniformly from the top
/// n(t) matches, n(t) growing by the Chum-Matas schedule; Uniform mode fixes
/// n(t) = all matches (plain RANSAC baseline).
inline ProsacResult prosac_homography(const std::vector<Correspondence>& matches,
                                      const ProsacConfig& cfg,
                                      ProsacTrace* trace = nullptr) {
    constexpr int kSample = 4;
    const int n_total = static_cast<int>(matches.size());
    if (n_total < kSample) throw InsufficientMatches("prosac: need at least 4 matches");
    std::mt19937_64 rng(cfg.seed);

    // Chum-Matas growth: T_n = T_total * prod_{i=0..m-1} (n-i)/(N-i)
    double t_n = cfg.t_total;
    for (int i = 0; i < kSample; ++i)
        t_n *= static_cast<double>(kSample - i) / (n_total - i);
    double t_n_prime = 1.0;
    int pool = (cfg.sampling == SamplingMode::Prosac) ? kSample : n_total;

    ProsacResult best;
    best.inlier_mask.assign(n_total, false);
    double best_err_sum = 0.0;
    std::array<int, 4> sample{};
    std::vector<bool> mask(n_total);

    for (int t = 1; t <= cfg.max_iter; ++t) {
        while (cfg.sampling == SamplingMode::Prosac && pool < n_total &&
               static_cast<double>(t) > t_n_prime) {
            double t_next = t_n * static_cast<double>(pool + 1) / (pool + 1 - kSample);
            t_n_prime += std::ceil(t_next - t_n);
            t_n = t_next;
            ++pool;
        }
        // 4 distinct indices uniform over the current pool
        for (int i = 0; i < kSample; ++i) {
            for (;;) {
                int v = std::uniform_int_distribution<int>(0, pool - 1)(rng);
                bool dup = false;
                for (int j = 0; j < i; ++j) dup |= sample[j] == v;
                if (!dup) {
                    sample[i] = v;
                    break;
                }
            }
        }
        if (trace) {
            trace->pool_sizes.push_back(pool);
            trace->samples.push_back(sample);
        }
        best.iterations = t;

        std::vector<Correspondence> minimal{matches[sample[0]], matches[sample[1]],
                                            matches[sample[2]], matches[sample[3]]};
        Homography h, h_inv;
        try {
            h = dlt_homography(minimal);
            h_inv = h.inverse();
        } catch (const Error&) {
            continue;  // degenerate sample
        }
        int count = 0;
        double err_sum = 0.0;
        for (int i = 0; i < n_total; ++i) {
            double e = symmetric_transfer_error(h, h_inv, matches[i]);
            mask[i] = e <= cfg.threshold_px;
            if (mask[i]) {
                ++count;
                err_sum += e;
            }
        }
        if (count > best.inlier_count ||
            (count == best.inlier_count && count > 0 && err_sum < best_err_sum)) {
            best.model = h;
            best.inlier_count = count;
            best.inlier_mask = mask;
            best_err_sum = err_sum;
        }
        if (best.inlier_count >= kSample) {
            double w = static_cast<double>(best.inlier_count) / n_total;
            double p_fail = 1.0 - std::pow(w, kSample);
            if (p_fail < 1e-12 ||
                static_cast<double>(t) * std::log(p_fail) <= std::log(1.0 - cfg.confidence))
                break;
        }
    }
    if (best.inlier_count < kSample)
        throw NoModelFound("prosac: no hypothesis with >= 4 inliers");

    // final refit on all inliers, then refresh the mask with the refit model
    std::vector<Correspondence> inliers;
    for (int i = 0; i < n_total; ++i)
        if (best.inlier_mask[i]) inliers.push_back(matches[i]);
    try {
        Homography refit = dlt_homography(inliers);
        Homography refit_inv = refit.inverse();
        best.model = refit;
        best.inlier_count = 0;
        for (int i = 0; i < n_total; ++i) {
            best.inlier_mask[i] =
                symmetric_transfer_error(refit, refit_inv, matches[i]) <= cfg.threshold_px;
            if (best.inlier_mask[i]) ++best.inlier_count;
        }
    } catch (const Error&) {
        // keep the minimal-sample model if the refit degenerates
    }
    if (best.inlier_count < kSample)
        throw NoModelFound("prosac: refit lost the consensus");
    return best;
}

}  // namespace lorbpano

#endif
