#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "ddqa/error.hpp"
#include "ddqa/png_io.hpp"

namespace ddqa {

/// A binary defect mask. Coordinates are (x = column, y = row) with the origin
/// at the top-left corner; storage is row-major, one byte per pixel (0 or 1).
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(std::uint32_t width, std::uint32_t height)
        : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {}

    static BinaryMask from_pixels(std::uint32_t width, std::uint32_t height,
                                  std::span<const std::pair<std::uint32_t, std::uint32_t>> pixels) {
        BinaryMask mask(width, height);
        for (auto [x, y] : pixels) {
            mask.set(x, y);
        }
        return mask;
    }

    std::uint32_t width() const noexcept { return width_; }
    std::uint32_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool contains(std::uint32_t x, std::uint32_t y) const { return bits_[index(x, y)] != 0; }

    void set(std::uint32_t x, std::uint32_t y, bool on = true) {
        if (x >= width_ || y >= height_) {
            throw DimensionError(fmt::format("pixel ({},{}) outside {}x{} mask", x, y, width_, height_));
        }
        bits_[index(x, y)] = on ? 1 : 0;
    }

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }
    bool empty() const noexcept { return std::find(bits_.begin(), bits_.end(), std::uint8_t{1}) == bits_.end(); }

    /// Row-major 0/1 labels, one per pixel.
    std::span<const std::uint8_t> labels() const noexcept { return bits_; }

    /// Anomalous pixels in row-major (y, x) order.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pixels() const {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
        for (std::uint32_t y = 0; y < height_; ++y) {
            for (std::uint32_t x = 0; x < width_; ++x) {
                if (contains(x, y)) {
                    out.emplace_back(x, y);
                }
            }
        }
        return out;
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(std::uint32_t x, std::uint32_t y) const noexcept {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    std::uint32_t width_ = 0;
    std::uint32_t height_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Axis-aligned box with inclusive pixel edges.
struct BoundingBox {
    std::uint32_t x_min = 0;
    std::uint32_t y_min = 0;
    std::uint32_t x_max = 0;
    std::uint32_t y_max = 0;

    std::uint64_t area() const noexcept {
        return static_cast<std::uint64_t>(x_max - x_min + 1) * (y_max - y_min + 1);
    }

    /// "[x_min,y_min,x_max,y_max]"
    std::string to_string() const { return fmt::format("[{},{},{},{}]", x_min, y_min, x_max, y_max); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Intersection over union measured in inclusive pixel areas.
inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const std::uint32_t ix0 = std::max(a.x_min, b.x_min);
    const std::uint32_t iy0 = std::max(a.y_min, b.y_min);
    const std::uint32_t ix1 = std::min(a.x_max, b.x_max);
    const std::uint32_t iy1 = std::min(a.y_max, b.y_max);
    std::uint64_t inter = 0;
    if (ix0 <= ix1 && iy0 <= iy1) {
        inter = static_cast<std::uint64_t>(ix1 - ix0 + 1) * (iy1 - iy0 + 1);
    }
    const std::uint64_t uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline constexpr std::array<std::string_view, 9> kRegionNames = {
    "top left corner", "top",    "top right corner",
    "left",            "center", "right",
    "bottom left corner", "bottom", "bottom right corner",
};

/// One cell of the 3x3 image grid.
struct GridRegion {
    int row = 0;
    int col = 0;

    int index() const noexcept { return row * 3 + col; }
    std::string_view name() const noexcept { return kRegionNames[static_cast<std::size_t>(index())]; }

    static GridRegion from_index(int idx) noexcept { return GridRegion{idx / 3, idx % 3}; }

    friend bool operator==(const GridRegion&, const GridRegion&) = default;
};

enum class Connectivity { Four, Eight };

/// Decodes mask PNG bytes; any stored value > 0 is anomalous.
inline BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
    const png::GrayImage img = png::decode_gray8(bytes);
    BinaryMask mask(img.width, img.height);
    for (std::uint32_t y = 0; y < img.height; ++y) {
        for (std::uint32_t x = 0; x < img.width; ++x) {
            if (img.pixels[static_cast<std::size_t>(y) * img.width + x] > 0) {
                mask.set(x, y);
            }
        }
    }
    return mask;
}

/// Encodes a mask as an 8-bit PNG with anomalous pixels stored as 255.
inline std::vector<std::uint8_t> encode_mask(const BinaryMask& mask) {
    png::GrayImage img{mask.width(), mask.height(), {}};
    img.pixels.reserve(mask.size());
    for (std::uint8_t v : mask.labels()) {
        img.pixels.push_back(v ? 255 : 0);
    }
    return png::encode_gray8(img);
}

/// Splits a mask into connected components on the same canvas, ordered by each
/// component's first pixel in row-major (y, x) order.
inline std::vector<BinaryMask> connected_components(const BinaryMask& mask,
                                                    Connectivity connectivity = Connectivity::Eight) {
    const std::uint32_t w = mask.width();
    const std::uint32_t h = mask.height();
    std::vector<std::uint8_t> visited(mask.size(), 0);
    std::vector<BinaryMask> components;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;

    for (std::uint32_t y = 0; y < h; ++y) {
        for (std::uint32_t x = 0; x < w; ++x) {
            const std::size_t seed = static_cast<std::size_t>(y) * w + x;
            if (!mask.contains(x, y) || visited[seed]) {
                continue;
            }
            BinaryMask comp(w, h);
            visited[seed] = 1;
            stack.assign(1, {x, y});
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                comp.set(cx, cy);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if ((dx == 0 && dy == 0) ||
                            (connectivity == Connectivity::Four && dx != 0 && dy != 0)) {
                            continue;
                        }
                        const std::int64_t nx = static_cast<std::int64_t>(cx) + dx;
                        const std::int64_t ny = static_cast<std::int64_t>(cy) + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                            continue;
                        }
                        const auto ux = static_cast<std::uint32_t>(nx);
                        const auto uy = static_cast<std::uint32_t>(ny);
                        const std::size_t n = static_cast<std::size_t>(uy) * w + ux;
                        if (!visited[n] && mask.contains(ux, uy)) {
                            visited[n] = 1;
                            stack.emplace_back(ux, uy);
                        }
                    }
                }
            }
            components.push_back(std::move(comp));
        }
    }
    return components;
}

inline BoundingBox tight_bbox(const BinaryMask& mask) {
    bool found = false;
    BoundingBox box{mask.width(), mask.height(), 0, 0};
    for (std::uint32_t y = 0; y < mask.height(); ++y) {
        for (std::uint32_t x = 0; x < mask.width(); ++x) {
            if (!mask.contains(x, y)) {
                continue;
            }
            found = true;
            box.x_min = std::min(box.x_min, x);
            box.y_min = std::min(box.y_min, y);
            box.x_max = std::max(box.x_max, x);
            box.y_max = std::max(box.y_max, y);
        }
    }
    if (!found) {
        throw EmptyMaskError("tight_bbox: mask has no anomalous pixels");
    }
    return box;
}

namespace detail {

// Cell index (0..2) for each coordinate along an axis of length n, with cell c
// covering [floor(c*n/3), floor((c+1)*n/3) - 1].
inline std::vector<int> grid_cells(std::uint32_t n) {
    std::vector<int> cells(n, 0);
    for (int c = 0; c < 3; ++c) {
        const std::uint64_t lo = static_cast<std::uint64_t>(c) * n / 3;
        const std::uint64_t hi = static_cast<std::uint64_t>(c + 1) * n / 3;
        for (std::uint64_t i = lo; i < hi; ++i) {
            cells[i] = c;
        }
    }
    return cells;
}

}  // namespace detail

/// The 3x3 cell holding the most anomalous pixels; ties go to the smallest
/// row-major cell index.
inline GridRegion grid_region(const BinaryMask& mask) {
    const auto cols = detail::grid_cells(mask.width());
    const auto rows = detail::grid_cells(mask.height());
    std::array<std::uint64_t, 9> counts{};
    for (std::uint32_t y = 0; y < mask.height(); ++y) {
        for (std::uint32_t x = 0; x < mask.width(); ++x) {
            if (mask.contains(x, y)) {
                ++counts[static_cast<std::size_t>(rows[y] * 3 + cols[x])];
            }
        }
    }
    const auto best = std::max_element(counts.begin(), counts.end());
    if (*best == 0) {
        throw EmptyMaskError("grid_region: mask has no anomalous pixels");
    }
    return GridRegion::from_index(static_cast<int>(best - counts.begin()));
}

}  // namespace ddqa
