#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "ddqa/error.hpp"
#include "ddqa/mask_geometry.hpp"
#include "ddqa/metrics.hpp"
#include "ddqa/parallel.hpp"
#include "ddqa/png_io.hpp"
#include "ddqa/score_map_io.hpp"

namespace ddqa {

enum class Pooling {
    Pooled,    // one accumulator over every pixel of every image
    PerImage,  // metrics per image, then the unweighted mean over images where they are defined
};

struct EvalSegOptions {
    MetricMode mode = MetricMode::Binned;
    std::size_t bins = MetricAccumulator::kDefaultBins;
    std::optional<std::pair<double, double>> range;  // binned mode; detected from the data when absent
    Pooling pooling = Pooling::Pooled;
    unsigned threads = 1;
};

struct EvalSegResult {
    SegMetrics metrics;
    std::size_t images = 0;
    std::size_t images_averaged = 0;  // PerImage only
};

struct ScoreMaskPair {
    std::string stem;
    std::filesystem::path scores;
    std::filesystem::path mask;
};

/// Pairs every regular file in `pred_dir` with `<gt_dir>/<stem>.png`.
inline std::vector<ScoreMaskPair> pair_score_maps(const std::filesystem::path& pred_dir,
                                                  const std::filesystem::path& gt_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(pred_dir)) {
        throw IoError("not a directory: " + pred_dir.string());
    }
    if (!fs::is_directory(gt_dir)) {
        throw IoError("not a directory: " + gt_dir.string());
    }
    std::map<std::string, fs::path> by_stem;
    for (const auto& entry : fs::directory_iterator(pred_dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const std::string stem = entry.path().stem().string();
        if (!by_stem.emplace(stem, entry.path()).second) {
            throw IntegrityError("two score maps share the stem \"" + stem + "\"");
        }
    }
    std::vector<ScoreMaskPair> pairs;
    for (auto& [stem, path] : by_stem) {
        fs::path mask = gt_dir / (stem + ".png");
        if (!fs::is_regular_file(mask)) {
            throw IoError("no ground-truth mask for score map \"" + stem + "\" (expected " + mask.string() + ")");
        }
        pairs.push_back({stem, path, std::move(mask)});
    }
    if (pairs.empty()) {
        throw IoError("no score maps in " + pred_dir.string());
    }
    return pairs;
}

namespace detail {

inline std::pair<double, double> score_range(const std::vector<ScoreMaskPair>& pairs, unsigned threads) {
    std::vector<std::pair<double, double>> partial(std::max(1u, threads),
                                                   {std::numeric_limits<double>::infinity(),
                                                    -std::numeric_limits<double>::infinity()});
    parallel_chunks(pairs.size(), threads, [&](unsigned worker, std::size_t begin, std::size_t end) {
        auto& [lo, hi] = partial[worker];
        for (std::size_t i = begin; i < end; ++i) {
            for (float s : read_score_map(pairs[i].scores).scores) {
                if (!std::isfinite(s)) {
                    throw ConfigError(pairs[i].stem + ": non-finite score");
                }
                lo = std::min(lo, static_cast<double>(s));
                hi = std::max(hi, static_cast<double>(s));
            }
        }
    });
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (auto [l, h] : partial) {
        lo = std::min(lo, l);
        hi = std::max(hi, h);
    }
    if (!(lo < hi)) {
        hi = lo + 1.0;  // constant maps: everything lands in the first bin
    }
    return {lo, hi};
}

}  // namespace detail

/// Evaluates paired score maps against ground-truth masks.
inline EvalSegResult evaluate_score_maps(const std::vector<ScoreMaskPair>& pairs, const EvalSegOptions& opt) {
    MetricAccumulator proto = MetricAccumulator::exact();
    if (opt.mode == MetricMode::Binned) {
        const auto [lo, hi] = opt.range ? *opt.range : detail::score_range(pairs, opt.threads);
        proto = MetricAccumulator::binned(opt.bins, lo, hi);
    }

    const unsigned workers = std::max(1u, opt.threads);
    std::vector<MetricAccumulator> pooled(workers, proto);
    std::vector<std::optional<SegMetrics>> per_image(pairs.size());

    parallel_chunks(pairs.size(), workers, [&](unsigned worker, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const ScoreMap scores = read_score_map(pairs[i].scores);
            const BinaryMask gt = decode_mask(png::read_file(pairs[i].mask));
            try {
                if (opt.pooling == Pooling::Pooled) {
                    pooled[worker] = accumulate(std::move(pooled[worker]), scores, gt);
                } else {
                    const MetricAccumulator acc = accumulate(proto, scores, gt);
                    if (acc.positives() > 0 && acc.negatives() > 0) {
                        per_image[i] = finalize(acc);
                    }
                }
            } catch (const Error& e) {
                throw Error(pairs[i].stem + ": " + e.what());
            }
        }
    });

    EvalSegResult result;
    result.images = pairs.size();
    if (opt.pooling == Pooling::Pooled) {
        MetricAccumulator total = proto;
        for (const auto& acc : pooled) {
            total.merge(acc);
        }
        result.metrics = finalize(total);
        return result;
    }

    SegMetrics mean;
    for (const auto& m : per_image) {
        if (!m) {
            continue;
        }
        ++result.images_averaged;
        mean.auroc += m->auroc;
        mean.f1_max += m->f1_max;
        mean.ap += m->ap;
        mean.pixels_pos += m->pixels_pos;
        mean.pixels_neg += m->pixels_neg;
    }
    if (result.images_averaged == 0) {
        throw DegenerateError("no image has both anomalous and normal pixels");
    }
    const auto k = static_cast<double>(result.images_averaged);
    mean.auroc /= k;
    mean.f1_max /= k;
    mean.ap /= k;
    result.metrics = mean;
    return result;
}

/// {"auroc":…, "f1_max":…, "ap":…, "pixels_pos":…, "pixels_neg":…} with six decimals.
inline std::string format_seg_metrics_json(const SegMetrics& m) {
    return fmt::format(R"({{"auroc":{:.6f}, "f1_max":{:.6f}, "ap":{:.6f}, "pixels_pos":{}, "pixels_neg":{}}})",
                       m.auroc, m.f1_max, m.ap, m.pixels_pos, m.pixels_neg);
}

}  // namespace ddqa
