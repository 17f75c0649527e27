#ifndef LORBPANO_MATCHLSH_HPP
#define LORBPANO_MATCHLSH_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <numeric>
#include <random>
#include <unordered_map>
#include <vector>

#include "lorbpano/lorb.hpp"

namespace lorbpano {

struct Match {
    int query_id = -1;
    int train_id = -1;
    int distance = 0;
    float quality = 0.0f;  // 1 - distance / (2 * n_d)
};

/// Sum of the two per-plane Hamming distances. A 0<->+-1 trit mismatch costs
/// 1, a +1<->-1 mismatch costs 2.
inline int descriptor_distance(const Descriptor& a, const Descriptor& b) {
    if (a.n_d != b.n_d) throw LengthMismatch("descriptor_distance: n_d mismatch");
    int d = 0;
    for (int i = 0; i < Descriptor::words(a.n_d); ++i) {
        d += std::popcount(a.gt[i] ^ b.gt[i]);
        d += std::popcount(a.lt[i] ^ b.lt[i]);
    }
    return d;
}

/// Bit-sampling LSH over the 2*n_d concatenated bitplanes (gt plane first).
class LshIndex {
public:
    LshIndex() = default;

    /// Builds L tables, each hashing k distinct sampled bit positions.
    LshIndex(std::vector<Descriptor> descriptors, int tables, int bits, std::uint64_t seed)
        : descs_(std::move(descriptors)), num_tables_(tables), num_bits_(bits), seed_(seed) {
        n_d_ = descs_.empty() ? 0 : descs_[0].n_d;
        if (tables < 1) throw BadParams("build_index: L must be >= 1");
        if (bits < 1 || (n_d_ > 0 && bits > 2 * n_d_))
            throw BadParams("build_index: k must be in [1, 2*n_d]");
        std::mt19937_64 rng(seed);
        tables_.resize(tables);
        for (auto& table : tables_) {
            // sample k distinct positions from [0, 2*n_d)
            const int domain = n_d_ > 0 ? 2 * n_d_ : bits;
            std::vector<int> positions(domain);
            std::iota(positions.begin(), positions.end(), 0);
            for (int i = 0; i < bits; ++i) {
                std::uniform_int_distribution<int> pick(i, domain - 1);
                std::swap(positions[i], positions[pick(rng)]);
            }
            positions.resize(bits);
            table.bit_positions = std::move(positions);
            for (std::size_t id = 0; id < descs_.size(); ++id)
                table.buckets[hash_key(table, descs_[id])].push_back(static_cast<int>(id));
        }
    }

    int n_d() const { return n_d_; }
    int num_tables() const { return num_tables_; }
    int num_bits() const { return num_bits_; }
    std::size_t size() const { return descs_.size(); }
    const Descriptor& descriptor(int id) const { return descs_[id]; }

    struct Table {
        std::vector<int> bit_positions;
        std::unordered_map<std::uint64_t, std::vector<int>> buckets;
    };
    const std::vector<Table>& tables() const { return tables_; }

    std::uint64_t hash_key(const Table& table, const Descriptor& d) const {
        std::uint64_t key = 0;
        for (std::size_t i = 0; i < table.bit_positions.size(); ++i) {
            int pos = table.bit_positions[i];
            const auto& plane = pos < d.n_d ? d.gt : d.lt;
            int bit = pos < d.n_d ? pos : pos - d.n_d;
            if (plane[bit / 64] >> (bit % 64) & 1) key |= std::uint64_t{1} << i;
        }
        return key;
    }

private:
    std::vector<Descriptor> descs_;
    std::vector<Table> tables_;
    int num_tables_ = 0;
    int num_bits_ = 0;
    int n_d_ = 0;
    std::uint64_t seed_ = 0;
};

inline LshIndex build_index(std::vector<Descriptor> descriptors, int tables, int bits,
                            std::uint64_t seed) {
    return LshIndex(std::move(descriptors), tables, bits, seed);
}

/// Perturbation masks over the k hash bits: the empty mask first, then masks
/// by increasing cardinality, lexicographic by index set within a cardinality.
inline std::vector<std::uint64_t> probe_sequence(int k, int t_probes) {
    if (t_probes < 1) throw BadParams("probe_sequence: t_probes must be >= 1");
    if (k < 1 || k >= 63) throw BadParams("probe_sequence: k must be in [1,62]");
    if (static_cast<std::uint64_t>(t_probes) > (std::uint64_t{1} << k))
        throw TooManyProbes("probe_sequence: t_probes exceeds 2^k");
    std::vector<std::uint64_t> masks;
    masks.push_back(0);
    for (int card = 1; static_cast<int>(masks.size()) < t_probes && card <= k; ++card) {
        // combinations of `card` indices in lexicographic order
        std::vector<int> idx(card);
        std::iota(idx.begin(), idx.end(), 0);
        for (;;) {
            std::uint64_t mask = 0;
            for (int i : idx) mask |= std::uint64_t{1} << i;
            masks.push_back(mask);
            if (static_cast<int>(masks.size()) >= t_probes) break;
            int i = card - 1;
            while (i >= 0 && idx[i] == k - card + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < card; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return masks;
}

/// Probes t_probes buckets per table, dedupes candidates, computes exact
/// distances and returns hits within max_distance sorted by (distance, id).
inline std::vector<Match> query(const LshIndex& index, const Descriptor& q, int t_probes,
                                int max_distance, int query_id = -1) {
    if (index.size() > 0 && q.n_d != index.n_d())
        throw ParamMismatch("query: descriptor n_d differs from index");
    if (index.size() == 0) return {};
    const auto probes = probe_sequence(index.num_bits(), t_probes);
    std::vector<std::uint8_t> seen(index.size(), 0);
    std::vector<Match> hits;
    for (const auto& table : index.tables()) {
        const std::uint64_t key = index.hash_key(table, q);
        for (std::uint64_t mask : probes) {
            auto it = table.buckets.find(key ^ mask);
            if (it == table.buckets.end()) continue;
            for (int id : it->second) {
                if (seen[id]) continue;
                seen[id] = 1;
                int d = descriptor_distance(q, index.descriptor(id));
                if (d <= max_distance)
                    hits.push_back(Match{query_id, id, d,
                                         1.0f - static_cast<float>(d) / (2.0f * q.n_d)});
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Match& a, const Match& b) {
        return std::tie(a.distance, a.train_id) < std::tie(b.distance, b.train_id);
    });
    return hits;
}

struct MatchConfig {
    int tables = 4;        // L
    int bits = 16;         // k
    int t_probes = 16;
    int max_distance = 64;
    float ratio = 0.8f;    // Lowe-style ratio test on best vs second best
    std::uint64_t seed = 0;
};

/// One-way A->B matching: per query, best LSH candidate kept iff it passes
/// the ratio test against the second best. Output sorted by quality
/// descending (ties by query_id).
inline std::vector<Match> match_features(const std::vector<Descriptor>& set_a,
                                         const std::vector<Descriptor>& set_b,
                                         const MatchConfig& cfg) {
    if (set_a.empty() || set_b.empty()) throw EmptyInput("match_features: empty set");
    LshIndex index(set_b, cfg.tables, cfg.bits, cfg.seed);
    std::vector<Match> out;
    for (std::size_t qi = 0; qi < set_a.size(); ++qi) {
        auto hits = query(index, set_a[qi], cfg.t_probes, cfg.max_distance,
                          static_cast<int>(qi));
        if (hits.empty()) continue;
        if (hits.size() >= 2 &&
            !(hits[0].distance < cfg.ratio * static_cast<float>(hits[1].distance)))
            continue;
        out.push_back(hits[0]);
    }
    std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) {
        if (a.quality != b.quality) return a.quality > b.quality;
        return a.query_id < b.query_id;
    });
    return out;
}

}  // namespace lorbpano

#endif
