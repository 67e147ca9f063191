#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ddqa/manifest.hpp"
#include "ddqa/mask_geometry.hpp"
#include "ddqa/png_io.hpp"
#include "ddqa/rng.hpp"

namespace ddqa {

/// Parameters of a synthetic anomaly dataset used for smoke tests and the
/// random-chance baseline.
struct SynthOptions {
    std::string dataset = "synthetic";
    std::size_t samples = 100;
    double anomalous_fraction = 0.75;
    std::size_t max_defects = 2;
    std::uint32_t width = 48;
    std::uint32_t height = 48;
    std::size_t mask_pool = 64;
    std::uint64_t seed = 7;
    std::vector<std::string> object_classes{"bottle", "cable", "screw", "tile"};
    std::vector<std::string> defect_classes{"scratch", "dent", "crack", "hole", "stain", "contamination"};
};

/// A random non-empty rectangle or ellipse blob.
inline BinaryMask random_blob(std::uint32_t w, std::uint32_t h, SplitMix64& rng) {
    BinaryMask mask(w, h);
    const auto cx = static_cast<std::int64_t>(rng.below(w));
    const auto cy = static_cast<std::int64_t>(rng.below(h));
    const auto rx = static_cast<std::int64_t>(1 + rng.below(std::max<std::uint32_t>(w / 4, 1)));
    const auto ry = static_cast<std::int64_t>(1 + rng.below(std::max<std::uint32_t>(h / 4, 1)));
    const bool ellipse = rng.below(2) == 1;
    for (std::int64_t y = cy - ry; y <= cy + ry; ++y) {
        for (std::int64_t x = cx - rx; x <= cx + rx; ++x) {
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            const double dx = static_cast<double>(x - cx) / static_cast<double>(rx);
            const double dy = static_cast<double>(y - cy) / static_cast<double>(ry);
            if (!ellipse || dx * dx + dy * dy <= 1.0) {
                mask.set(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y));
            }
        }
    }
    mask.set(static_cast<std::uint32_t>(cx), static_cast<std::uint32_t>(cy));
    return mask;
}

/// Writes masks/ and manifest.json under `dir` and returns the manifest path.
/// Defect instances reference a shared pool of mask files.
inline std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SynthOptions& opt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "masks");
    SplitMix64 rng(opt.seed);

    std::vector<std::string> pool;
    for (std::size_t i = 0; i < std::max<std::size_t>(opt.mask_pool, 1); ++i) {
        const std::string rel = fmt::format("masks/m{:05}.png", i);
        png::write_file(dir / rel, encode_mask(random_blob(opt.width, opt.height, rng)));
        pool.push_back(rel);
    }

    DatasetManifest m;
    m.dataset_name = opt.dataset;
    m.object_classes = opt.object_classes;
    m.defect_classes = opt.defect_classes;
    for (std::size_t i = 0; i < opt.samples; ++i) {
        SampleRecord s;
        s.id = fmt::format("s{:07}", i);
        s.image = fmt::format("images/{}.png", s.id);
        s.width = opt.width;
        s.height = opt.height;
        s.object_class = opt.object_classes[rng.below(opt.object_classes.size())];
        s.anomalous = rng.uniform() < opt.anomalous_fraction;
        if (s.anomalous) {
            const std::size_t k = 1 + rng.below(std::max<std::size_t>(opt.max_defects, 1));
            for (std::size_t d = 0; d < k; ++d) {
                s.defects.push_back({pool[rng.below(pool.size())],
                                     opt.defect_classes[rng.below(opt.defect_classes.size())]});
            }
        }
        m.samples.push_back(std::move(s));
    }

    const fs::path manifest_path = dir / "manifest.json";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot create " + manifest_path.string());
    }
    out << manifest_to_json(m).dump(1) << '\n';
    return manifest_path;
}

}  // namespace ddqa
