#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddqa/error.hpp"
#include "ddqa/mask_geometry.hpp"
#include "ddqa/parallel.hpp"
#include "ddqa/png_io.hpp"

namespace ddqa {

struct DefectInstance {
    std::string mask;          // relative to the manifest directory
    std::string defect_class;

    friend bool operator==(const DefectInstance&, const DefectInstance&) = default;
};

struct SampleRecord {
    std::string id;
    std::string image;         // relative to the manifest directory
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::string object_class;
    bool anomalous = false;
    std::vector<DefectInstance> defects;

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct DatasetManifest {
    std::string dataset_name;
    std::vector<std::string> object_classes;
    std::vector<std::string> defect_classes;
    std::vector<SampleRecord> samples;
    std::filesystem::path base_dir;

    std::filesystem::path resolve(std::string_view relative) const { return base_dir / std::string(relative); }

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

namespace detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(fmt::format("{}: missing field \"{}\"", where, key));
    }
    return *it;
}

inline std::string require_string(const json& obj, const char* key, std::string_view where) {
    const json& v = require(obj, key, where);
    if (!v.is_string()) {
        throw SchemaError(fmt::format("{}: field \"{}\" must be a string", where, key));
    }
    return v.get<std::string>();
}

inline std::uint32_t require_dimension(const json& obj, const char* key, std::string_view where) {
    const json& v = require(obj, key, where);
    if (!v.is_number_integer()) {
        throw SchemaError(fmt::format("{}: field \"{}\" must be an integer", where, key));
    }
    const auto n = v.get<std::int64_t>();
    if (n < 1 || n > std::int64_t{1} << 30) {
        throw SchemaError(fmt::format("{}: field \"{}\" must be a positive pixel count, got {}", where, key, n));
    }
    return static_cast<std::uint32_t>(n);
}

inline std::vector<std::string> require_string_list(const json& obj, const char* key, std::string_view where) {
    const json& v = require(obj, key, where);
    if (!v.is_array()) {
        throw SchemaError(fmt::format("{}: field \"{}\" must be an array", where, key));
    }
    std::vector<std::string> out;
    for (const json& item : v) {
        if (!item.is_string()) {
            throw SchemaError(fmt::format("{}: \"{}\" entries must be strings", where, key));
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace detail

/// Parses and validates manifest JSON text. Paths stay relative; `base_dir` is
/// the directory they resolve against.
inline DatasetManifest parse_manifest(std::string_view text, std::filesystem::path base_dir = {}) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("manifest parse error: ") + e.what());
    }
    if (!doc.is_object()) {
        throw SchemaError("manifest: top-level value must be an object");
    }

    DatasetManifest m;
    m.base_dir = std::move(base_dir);
    m.dataset_name = detail::require_string(doc, "dataset", "manifest");
    m.object_classes = detail::require_string_list(doc, "object_classes", "manifest");
    m.defect_classes = detail::require_string_list(doc, "defect_classes", "manifest");

    const json& samples = detail::require(doc, "samples", "manifest");
    if (!samples.is_array()) {
        throw SchemaError("manifest: field \"samples\" must be an array");
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const json& s = samples[i];
        const std::string where = fmt::format("samples[{}]", i);
        if (!s.is_object()) {
            throw SchemaError(where + ": must be an object");
        }
        SampleRecord rec;
        rec.id = detail::require_string(s, "id", where);
        rec.image = detail::require_string(s, "image", where);
        rec.width = detail::require_dimension(s, "width", where);
        rec.height = detail::require_dimension(s, "height", where);
        rec.object_class = detail::require_string(s, "object_class", where);
        const json& anomalous = detail::require(s, "anomalous", where);
        if (!anomalous.is_boolean()) {
            throw SchemaError(where + ": field \"anomalous\" must be a boolean");
        }
        rec.anomalous = anomalous.get<bool>();
        const json& defects = detail::require(s, "defects", where);
        if (!defects.is_array()) {
            throw SchemaError(where + ": field \"defects\" must be an array");
        }
        for (std::size_t k = 0; k < defects.size(); ++k) {
            const std::string dwhere = fmt::format("{}.defects[{}]", where, k);
            if (!defects[k].is_object()) {
                throw SchemaError(dwhere + ": must be an object");
            }
            rec.defects.push_back({detail::require_string(defects[k], "mask", dwhere),
                                   detail::require_string(defects[k], "defect_class", dwhere)});
        }
        m.samples.push_back(std::move(rec));
    }

    const std::unordered_set<std::string> objects(m.object_classes.begin(), m.object_classes.end());
    const std::unordered_set<std::string> defects(m.defect_classes.begin(), m.defect_classes.end());
    std::unordered_set<std::string> seen;
    for (const SampleRecord& s : m.samples) {
        if (!seen.insert(s.id).second) {
            throw IntegrityError(fmt::format("sample \"{}\": duplicate sample id", s.id));
        }
        if (!objects.contains(s.object_class)) {
            throw IntegrityError(
                fmt::format("sample \"{}\": object class \"{}\" not in object_classes", s.id, s.object_class));
        }
        if (s.anomalous != !s.defects.empty()) {
            throw IntegrityError(fmt::format("sample \"{}\": anomalous={} inconsistent with {} defect(s)", s.id,
                                             s.anomalous, s.defects.size()));
        }
        for (const DefectInstance& d : s.defects) {
            if (!defects.contains(d.defect_class)) {
                throw IntegrityError(
                    fmt::format("sample \"{}\": defect class \"{}\" not in defect_classes", s.id, d.defect_class));
            }
        }
    }
    return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open manifest " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), path.parent_path());
}

/// Loads and decodes the mask of one defect instance, checking it against the
/// owning sample's dimensions. Emptiness is left to the caller.
inline BinaryMask load_defect_mask(const DatasetManifest& m, const SampleRecord& s, const DefectInstance& d) {
    BinaryMask mask = decode_mask(png::read_file(m.resolve(d.mask)));
    if (mask.width() != s.width || mask.height() != s.height) {
        throw DimensionError(fmt::format("dimension mismatch: mask is {}x{}, sample is {}x{}", mask.width(),
                                         mask.height(), s.width, s.height));
    }
    return mask;
}

struct MaskFailure {
    std::string sample_id;
    std::size_t defect_index = 0;
    std::string mask;
    std::string reason;

    friend bool operator==(const MaskFailure&, const MaskFailure&) = default;
};

struct ValidationReport {
    std::size_t checked = 0;
    std::vector<MaskFailure> failures;  // sorted by (sample_id, defect_index)

    bool ok() const noexcept { return failures.empty(); }
};

/// Decodes every defect mask and checks dimensions and non-emptiness. Failures
/// are collected per instance; the sweep never aborts early.
inline ValidationReport validate_masks(const DatasetManifest& m, unsigned threads = 1) {
    struct Job {
        const SampleRecord* sample;
        std::size_t index;
    };
    std::vector<Job> jobs;
    for (const SampleRecord& s : m.samples) {
        for (std::size_t k = 0; k < s.defects.size(); ++k) {
            jobs.push_back({&s, k});
        }
    }

    std::vector<std::vector<MaskFailure>> partial(std::max(1u, threads));
    parallel_chunks(jobs.size(), threads, [&](unsigned worker, std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const SampleRecord& s = *jobs[j].sample;
            const DefectInstance& d = s.defects[jobs[j].index];
            std::string reason;
            try {
                if (load_defect_mask(m, s, d).empty()) {
                    reason = "empty mask";
                }
            } catch (const IoError& e) {
                reason = std::string("io error: ") + e.what();
            } catch (const DecodeError& e) {
                reason = e.what();
            } catch (const DimensionError& e) {
                reason = e.what();
            }
            if (!reason.empty()) {
                partial[worker].push_back({s.id, jobs[j].index, d.mask, std::move(reason)});
            }
        }
    });

    ValidationReport report;
    report.checked = jobs.size();
    for (auto& p : partial) {
        std::move(p.begin(), p.end(), std::back_inserter(report.failures));
    }
    std::sort(report.failures.begin(), report.failures.end(), [](const MaskFailure& a, const MaskFailure& b) {
        return std::tie(a.sample_id, a.defect_index) < std::tie(b.sample_id, b.defect_index);
    });
    return report;
}

/// Serializes a manifest back to its JSON document form.
inline nlohmann::ordered_json manifest_to_json(const DatasetManifest& m) {
    nlohmann::ordered_json doc;
    doc["dataset"] = m.dataset_name;
    doc["object_classes"] = m.object_classes;
    doc["defect_classes"] = m.defect_classes;
    doc["samples"] = nlohmann::ordered_json::array();
    for (const SampleRecord& s : m.samples) {
        nlohmann::ordered_json js;
        js["id"] = s.id;
        js["image"] = s.image;
        js["width"] = s.width;
        js["height"] = s.height;
        js["object_class"] = s.object_class;
        js["anomalous"] = s.anomalous;
        js["defects"] = nlohmann::ordered_json::array();
        for (const DefectInstance& d : s.defects) {
            js["defects"].push_back({{"mask", d.mask}, {"defect_class", d.defect_class}});
        }
        doc["samples"].push_back(std::move(js));
    }
    return doc;
}

}  // namespace ddqa
