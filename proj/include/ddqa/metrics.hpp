#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "ddqa/error.hpp"
#include "ddqa/mask_geometry.hpp"

namespace ddqa {

/// Per-pixel anomaly scores for one image, row-major.
struct ScoreMap {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<float> scores;

    float at(std::uint32_t x, std::uint32_t y) const { return scores[static_cast<std::size_t>(y) * width + x]; }
};

struct SegMetrics {
    double auroc = 0.0;
    double f1_max = 0.0;
    double ap = 0.0;
    std::uint64_t pixels_pos = 0;
    std::uint64_t pixels_neg = 0;
};

enum class MetricMode { Exact, Binned };

/// Streaming pool of (score, label) observations.
///
/// Exact mode keeps every observation and ranks them at finalize time. Binned
/// mode keeps positive/negative histograms over a fixed [lo, hi] range, so
/// merging is an elementwise sum and results do not depend on how pixels were
/// partitioned across accumulators.
class MetricAccumulator {
public:
    static constexpr std::size_t kDefaultBins = 4096;

    static MetricAccumulator exact() { return MetricAccumulator(); }

    static MetricAccumulator binned(std::size_t bins, double lo, double hi) {
        if (bins == 0) {
            throw ConfigError("binned accumulator needs at least one bin");
        }
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
            throw ConfigError(fmt::format("binned accumulator needs finite lo < hi, got [{}, {}]", lo, hi));
        }
        MetricAccumulator acc;
        acc.mode_ = MetricMode::Binned;
        acc.lo_ = lo;
        acc.hi_ = hi;
        acc.pos_counts_.assign(bins, 0);
        acc.neg_counts_.assign(bins, 0);
        return acc;
    }

    MetricMode mode() const noexcept { return mode_; }
    std::size_t bins() const noexcept { return pos_counts_.size(); }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    std::uint64_t positives() const noexcept { return pos_; }
    std::uint64_t negatives() const noexcept { return neg_; }
    std::uint64_t total() const noexcept { return pos_ + neg_; }

    std::span<const std::uint64_t> pos_counts() const noexcept { return pos_counts_; }
    std::span<const std::uint64_t> neg_counts() const noexcept { return neg_counts_; }

    void add(double score, bool positive) {
        if (!std::isfinite(score)) {
            throw ConfigError("non-finite score");
        }
        if (mode_ == MetricMode::Exact) {
            observations_.emplace_back(score, positive);
        } else {
            if (score < lo_ || score > hi_) {
                throw ConfigError(fmt::format("score {} outside binned range [{}, {}]", score, lo_, hi_));
            }
            auto& counts = positive ? pos_counts_ : neg_counts_;
            ++counts[bin_of(score)];
        }
        ++(positive ? pos_ : neg_);
    }

    /// Adds one observation per pixel; label is 1 where `labels` is non-zero.
    template <std::floating_point T>
    void add(std::span<const T> scores, std::span<const std::uint8_t> labels) {
        if (scores.size() != labels.size()) {
            throw DimensionError(
                fmt::format("score/label size mismatch: {} vs {}", scores.size(), labels.size()));
        }
        // Validate first so a bad map leaves the accumulator untouched.
        for (T s : scores) {
            if (!std::isfinite(s)) {
                throw ConfigError("non-finite score");
            }
            if (mode_ == MetricMode::Binned && (s < lo_ || s > hi_)) {
                throw ConfigError(fmt::format("score {} outside binned range [{}, {}]", double(s), lo_, hi_));
            }
        }
        if (mode_ == MetricMode::Exact) {
            observations_.reserve(observations_.size() + scores.size());
        }
        for (std::size_t i = 0; i < scores.size(); ++i) {
            add(static_cast<double>(scores[i]), labels[i] != 0);
        }
    }

    void merge(const MetricAccumulator& other) {
        if (!compatible(other)) {
            throw ConfigError("merge: accumulator configurations differ");
        }
        if (mode_ == MetricMode::Exact) {
            observations_.insert(observations_.end(), other.observations_.begin(), other.observations_.end());
        } else {
            for (std::size_t b = 0; b < bins(); ++b) {
                pos_counts_[b] += other.pos_counts_[b];
                neg_counts_[b] += other.neg_counts_[b];
            }
        }
        pos_ += other.pos_;
        neg_ += other.neg_;
    }

    bool compatible(const MetricAccumulator& other) const noexcept {
        return mode_ == other.mode_ &&
               (mode_ == MetricMode::Exact || (bins() == other.bins() && lo_ == other.lo_ && hi_ == other.hi_));
    }

    /// Positive/negative counts grouped by tied score, highest score first.
    /// In binned mode a group is one bin.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> descending_groups() const {
        std::vector<std::pair<std::uint64_t, std::uint64_t>> groups;
        if (mode_ == MetricMode::Binned) {
            for (std::size_t b = bins(); b-- > 0;) {
                if (pos_counts_[b] + neg_counts_[b] > 0) {
                    groups.emplace_back(pos_counts_[b], neg_counts_[b]);
                }
            }
            return groups;
        }
        std::vector<std::pair<double, bool>> sorted = observations_;
        std::sort(sorted.begin(), sorted.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::size_t i = 0; i < sorted.size();) {
            std::uint64_t p = 0;
            std::uint64_t n = 0;
            std::size_t j = i;
            for (; j < sorted.size() && sorted[j].first == sorted[i].first; ++j) {
                ++(sorted[j].second ? p : n);
            }
            groups.emplace_back(p, n);
            i = j;
        }
        return groups;
    }

private:
    MetricAccumulator() = default;

    std::size_t bin_of(double score) const noexcept {
        const double t = (score - lo_) / (hi_ - lo_) * static_cast<double>(bins());
        const auto b = static_cast<std::size_t>(t);
        return std::min(b, bins() - 1);
    }

    MetricMode mode_ = MetricMode::Exact;
    double lo_ = 0.0;
    double hi_ = 0.0;
    std::uint64_t pos_ = 0;
    std::uint64_t neg_ = 0;
    std::vector<std::pair<double, bool>> observations_;
    std::vector<std::uint64_t> pos_counts_;
    std::vector<std::uint64_t> neg_counts_;
};

/// Adds every pixel of `scores` with its ground-truth label from `gt`.
inline MetricAccumulator accumulate(MetricAccumulator acc, const ScoreMap& scores, const BinaryMask& gt) {
    if (scores.width != gt.width() || scores.height != gt.height()) {
        throw DimensionError(fmt::format("score map {}x{} does not match mask {}x{}", scores.width, scores.height,
                                         gt.width(), gt.height()));
    }
    if (scores.scores.size() != gt.size()) {
        throw DimensionError("score map buffer does not match its dimensions");
    }
    acc.add(std::span<const float>(scores.scores), gt.labels());
    return acc;
}

inline MetricAccumulator merge(MetricAccumulator a, const MetricAccumulator& b) {
    a.merge(b);
    return a;
}

/// Pixel-level AUROC, F1-max and AP over everything pooled in `acc`.
///
/// Observations are swept from the highest score down, one tie group (or bin)
/// at a time, with "score >= threshold" predicting anomalous:
///   AUROC  = P(pos > neg) + P(tie)/2, summed exactly in integers;
///   F1-max = max over group cuts of 2TP / (TP + FP + P);
///   AP     = sum over cuts of (newly recalled fraction) * precision at the cut.
inline SegMetrics finalize(const MetricAccumulator& acc) {
    const std::uint64_t total_pos = acc.positives();
    const std::uint64_t total_neg = acc.negatives();
    if (total_pos == 0 || total_neg == 0) {
        throw DegenerateError(
            fmt::format("metrics undefined with {} positive and {} negative pixels", total_pos, total_neg));
    }

    // Twice the Mann-Whitney U statistic; exact in 128 bits.
    unsigned __int128 twice_u = 0;
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    double best_f1 = 0.0;
    double ap = 0.0;
    for (const auto& [p, n] : acc.descending_groups()) {
        const std::uint64_t neg_below = total_neg - fp - n;
        twice_u += static_cast<unsigned __int128>(p) * (2 * static_cast<unsigned __int128>(neg_below) + n);
        tp += p;
        fp += n;
        const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + total_pos);
        best_f1 = std::max(best_f1, f1);
        if (p > 0) {
            ap += (static_cast<double>(p) / static_cast<double>(total_pos)) *
                  (static_cast<double>(tp) / static_cast<double>(tp + fp));
        }
    }

    SegMetrics m;
    const long double pairs = static_cast<long double>(total_pos) * static_cast<long double>(total_neg);
    m.auroc = static_cast<double>(static_cast<long double>(twice_u) / (2.0L * pairs));
    m.f1_max = best_f1;
    m.ap = std::min(ap, 1.0);
    m.pixels_pos = total_pos;
    m.pixels_neg = total_neg;
    return m;
}

}  // namespace ddqa
