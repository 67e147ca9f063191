#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "ddqa/error.hpp"
#include "ddqa/mask_geometry.hpp"

namespace ddqa::loss {

inline constexpr double kClampEps = 1e-7;

/// Weights of the mask objective lambda_bce * BCE + lambda_dice * DICE.
/// Defaults follow the usual LISA-style setup; they are not authoritative.
struct LossWeights {
    double lambda_bce = 2.0;
    double lambda_dice = 0.5;
    double smooth_eps = 1.0;

    void check() const {
        if (lambda_bce < 0 || lambda_dice < 0 || !(lambda_bce + lambda_dice > 0)) {
            throw ConfigError(fmt::format("loss weights must be non-negative with a positive sum, got ({}, {})",
                                          lambda_bce, lambda_dice));
        }
        if (!(smooth_eps >= 0)) {
            throw ConfigError("smooth_eps must be non-negative");
        }
    }
};

/// Target token ids with one row of logits per position (row-major, ids.size() x vocab).
struct TokenSequence {
    std::vector<std::uint32_t> ids;
    std::vector<double> logits;
    std::size_t vocab = 0;
};

/// Per-pixel foreground probabilities with the shape of the target mask.
struct MaskPrediction {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> probabilities;
};

namespace detail {

inline void check_sizes(std::size_t pred, std::size_t gt) {
    if (pred != gt) {
        throw DimensionError(fmt::format("prediction has {} elements, target has {}", pred, gt));
    }
    if (pred == 0) {
        throw DimensionError("empty prediction");
    }
}

inline double clamp_prob(double p, double eps) noexcept { return std::clamp(p, eps, 1.0 - eps); }

inline void check_tokens(const TokenSequence& seq) {
    if (seq.vocab == 0 || seq.ids.empty()) {
        throw DimensionError("token sequence needs a vocabulary and at least one position");
    }
    if (seq.logits.size() != seq.ids.size() * seq.vocab) {
        throw DimensionError(fmt::format("logits hold {} values, expected {} positions x {} vocab",
                                         seq.logits.size(), seq.ids.size(), seq.vocab));
    }
    for (std::uint32_t id : seq.ids) {
        if (id >= seq.vocab) {
            throw DimensionError(fmt::format("token id {} outside vocabulary of {}", id, seq.vocab));
        }
    }
}

}  // namespace detail

/// Mean over positions of -log softmax(logits)[target].
inline double ce_loss(const TokenSequence& seq) {
    detail::check_tokens(seq);
    double total = 0.0;
    for (std::size_t t = 0; t < seq.ids.size(); ++t) {
        const std::span<const double> row(seq.logits.data() + t * seq.vocab, seq.vocab);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) {
            z += std::exp(v - m);
        }
        total += (m + std::log(z)) - row[seq.ids[t]];
    }
    return total / static_cast<double>(seq.ids.size());
}

/// d ce_loss / d logits, same layout as seq.logits.
inline std::vector<double> ce_grad(const TokenSequence& seq) {
    detail::check_tokens(seq);
    std::vector<double> grad(seq.logits.size());
    const double inv_t = 1.0 / static_cast<double>(seq.ids.size());
    for (std::size_t t = 0; t < seq.ids.size(); ++t) {
        const std::span<const double> row(seq.logits.data() + t * seq.vocab, seq.vocab);
        const double m = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) {
            z += std::exp(v - m);
        }
        for (std::size_t k = 0; k < seq.vocab; ++k) {
            const double softmax = std::exp(row[k] - m) / z;
            grad[t * seq.vocab + k] = inv_t * (softmax - (k == seq.ids[t] ? 1.0 : 0.0));
        }
    }
    return grad;
}

/// Mean binary cross-entropy with p clamped to [eps, 1 - eps].
inline double bce_loss(std::span<const double> p, std::span<const std::uint8_t> g, double clamp_eps = kClampEps) {
    detail::check_sizes(p.size(), g.size());
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = detail::clamp_prob(p[i], clamp_eps);
        total -= g[i] ? std::log(q) : std::log1p(-q);
    }
    return total / static_cast<double>(p.size());
}

/// Gradient of bce_loss; zero where the clamp is active.
inline std::vector<double> bce_grad(std::span<const double> p, std::span<const std::uint8_t> g,
                                    double clamp_eps = kClampEps) {
    detail::check_sizes(p.size(), g.size());
    const double inv_n = 1.0 / static_cast<double>(p.size());
    std::vector<double> grad(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < clamp_eps || p[i] > 1.0 - clamp_eps) {
            continue;
        }
        grad[i] = inv_n * (g[i] ? -1.0 / p[i] : 1.0 / (1.0 - p[i]));
    }
    return grad;
}

/// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)
inline double dice_loss(std::span<const double> p, std::span<const std::uint8_t> g, double smooth_eps) {
    detail::check_sizes(p.size(), g.size());
    double inter = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += g[i] ? p[i] : 0.0;
        sum += p[i] + (g[i] ? 1.0 : 0.0);
    }
    const double denom = sum + smooth_eps;
    if (denom == 0.0) {
        return 0.0;  // empty prediction on an empty target with eps = 0
    }
    return 1.0 - (2.0 * inter + smooth_eps) / denom;
}

inline std::vector<double> dice_grad(std::span<const double> p, std::span<const std::uint8_t> g,
                                     double smooth_eps) {
    detail::check_sizes(p.size(), g.size());
    double inter = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += g[i] ? p[i] : 0.0;
        sum += p[i] + (g[i] ? 1.0 : 0.0);
    }
    const double denom = sum + smooth_eps;
    const double num = 2.0 * inter + smooth_eps;
    std::vector<double> grad(p.size(), 0.0);
    if (denom == 0.0) {
        return grad;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        grad[i] = -((g[i] ? 2.0 : 0.0) * denom - num) / (denom * denom);
    }
    return grad;
}

inline double mdlm_loss(std::span<const double> p, std::span<const std::uint8_t> g, const LossWeights& w,
                        double clamp_eps = kClampEps) {
    w.check();
    return w.lambda_bce * bce_loss(p, g, clamp_eps) + w.lambda_dice * dice_loss(p, g, w.smooth_eps);
}

inline std::vector<double> mdlm_grad(std::span<const double> p, std::span<const std::uint8_t> g,
                                     const LossWeights& w, double clamp_eps = kClampEps) {
    w.check();
    std::vector<double> grad = bce_grad(p, g, clamp_eps);
    const std::vector<double> dice = dice_grad(p, g, w.smooth_eps);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = w.lambda_bce * grad[i] + w.lambda_dice * dice[i];
    }
    return grad;
}

// Shape-checked overloads on the mask types.

inline void check_shape(const MaskPrediction& pred, const BinaryMask& gt) {
    if (pred.width != gt.width() || pred.height != gt.height() || pred.probabilities.size() != gt.size()) {
        throw DimensionError(fmt::format("prediction {}x{} does not match mask {}x{}", pred.width, pred.height,
                                         gt.width(), gt.height()));
    }
}

inline double bce_loss(const MaskPrediction& pred, const BinaryMask& gt, double clamp_eps = kClampEps) {
    check_shape(pred, gt);
    return bce_loss(pred.probabilities, gt.labels(), clamp_eps);
}

inline double dice_loss(const MaskPrediction& pred, const BinaryMask& gt, double smooth_eps) {
    check_shape(pred, gt);
    return dice_loss(pred.probabilities, gt.labels(), smooth_eps);
}

inline double mdlm_loss(const MaskPrediction& pred, const BinaryMask& gt, const LossWeights& w = {},
                        double clamp_eps = kClampEps) {
    check_shape(pred, gt);
    return mdlm_loss(pred.probabilities, gt.labels(), w, clamp_eps);
}

}  // namespace ddqa::loss
