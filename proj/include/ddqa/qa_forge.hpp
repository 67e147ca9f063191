#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddqa/error.hpp"
#include "ddqa/manifest.hpp"
#include "ddqa/mask_geometry.hpp"
#include "ddqa/parallel.hpp"
#include "ddqa/rng.hpp"

namespace ddqa {

enum class Task { AD, RDL, DFM, DC };

inline constexpr std::array<Task, 4> kAllTasks = {Task::AD, Task::RDL, Task::DFM, Task::DC};

inline constexpr std::string_view task_name(Task t) noexcept {
    switch (t) {
        case Task::AD: return "AD";
        case Task::RDL: return "RDL";
        case Task::DFM: return "DFM";
        case Task::DC: return "DC";
    }
    return "?";
}

/// Case-insensitive task code lookup ("ad", "RDL", ...).
inline std::optional<Task> parse_task(std::string_view text) noexcept {
    std::string upper(text);
    for (char& c : upper) {
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    for (Task t : kAllTasks) {
        if (upper == task_name(t)) {
            return t;
        }
    }
    return std::nullopt;
}

/// Number of options for choice tasks; 0 for the open-ended DFM.
inline constexpr std::size_t option_count(Task t) noexcept {
    switch (t) {
        case Task::AD: return 2;
        case Task::RDL:
        case Task::DC: return 4;
        case Task::DFM: return 0;
    }
    return 0;
}

struct QaMeta {
    std::string dataset;
    std::string object_class;
    std::optional<std::string> defect_class;
    std::optional<std::size_t> defect_index;
    std::optional<std::string> region;
    std::optional<BoundingBox> bbox;

    friend bool operator==(const QaMeta&, const QaMeta&) = default;
};

struct QaRecord {
    std::string qid;
    std::string image;
    Task task = Task::AD;
    std::string question;
    std::vector<std::string> options;  // "A. Yes", "B. No", ...; empty for DFM
    std::string answer;                // option letter, or "[x_min,y_min,x_max,y_max]" for DFM
    QaMeta meta;

    friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

struct BuildConfig {
    std::uint64_t seed = 42;
    std::vector<Task> tasks{kAllTasks.begin(), kAllTasks.end()};
    std::vector<std::string> fallback_defect_classes;

    bool enabled(Task t) const { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); }
};

/// Question templates. Each carries a single {object_class} placeholder.
struct QuestionTemplates {
    static constexpr std::string_view ad = "Is there any defect in the {object_class}?";
    static constexpr std::string_view rdl =
        "The image of the {object_class} is divided into a 3x3 grid. In which region is the defect located?";
    static constexpr std::string_view dfm =
        "Give the bounding box of the defect in the {object_class} as [x_min,y_min,x_max,y_max] in pixel "
        "coordinates.";
    static constexpr std::string_view dc = "What type of defect is present in the {object_class}?";
};

namespace detail {

inline std::string fill_template(std::string_view tmpl, std::string_view object_class) {
    constexpr std::string_view placeholder = "{object_class}";
    std::string out(tmpl);
    if (const auto pos = out.find(placeholder); pos != std::string::npos) {
        out.replace(pos, placeholder.size(), object_class);
    }
    return out;
}

inline char option_letter(std::size_t i) noexcept { return static_cast<char>('A' + i); }

// Shuffles `correct` together with `distractors` and fills options/answer.
inline void assign_options(QaRecord& rec, std::string correct, std::vector<std::string> distractors,
                           SplitMix64& rng) {
    std::vector<std::string> texts;
    texts.reserve(distractors.size() + 1);
    texts.push_back(correct);
    for (auto& d : distractors) {
        texts.push_back(std::move(d));
    }
    shuffle(std::span<std::string>(texts), rng);
    rec.options.clear();
    for (std::size_t i = 0; i < texts.size(); ++i) {
        rec.options.push_back(fmt::format("{}. {}", option_letter(i), texts[i]));
        if (texts[i] == correct) {
            rec.answer = std::string(1, option_letter(i));
        }
    }
}

}  // namespace detail

/// Stable question id: a pure function of (dataset, sample id, task, defect index).
inline std::string make_qid(std::string_view dataset, std::string_view sample_id, Task task,
                            std::optional<std::size_t> defect_index = std::nullopt) {
    if (defect_index) {
        return fmt::format("{}/{}/{}/{}", dataset, sample_id, task_name(task), *defect_index);
    }
    return fmt::format("{}/{}/{}", dataset, sample_id, task_name(task));
}

inline QaRecord gen_ad(std::string_view dataset, const SampleRecord& sample, const BuildConfig& cfg) {
    QaRecord rec;
    rec.qid = make_qid(dataset, sample.id, Task::AD);
    rec.image = sample.image;
    rec.task = Task::AD;
    rec.question = detail::fill_template(QuestionTemplates::ad, sample.object_class);
    rec.meta = {std::string(dataset), sample.object_class, {}, {}, {}, {}};
    SplitMix64 rng = record_rng(cfg.seed, rec.qid);
    detail::assign_options(rec, sample.anomalous ? "Yes" : "No", {sample.anomalous ? "No" : "Yes"}, rng);
    return rec;
}

/// Rough localization: the correct option is the dominant 3x3 cell of the
/// defect mask, against three distinct other cell names.
inline QaRecord gen_rdl(std::string_view dataset, const SampleRecord& sample, std::size_t defect_index,
                        const BinaryMask& mask, const BuildConfig& cfg) {
    const GridRegion region = grid_region(mask);
    QaRecord rec;
    rec.qid = make_qid(dataset, sample.id, Task::RDL, defect_index);
    rec.image = sample.image;
    rec.task = Task::RDL;
    rec.question = detail::fill_template(QuestionTemplates::rdl, sample.object_class);
    rec.meta = {std::string(dataset), sample.object_class, sample.defects.at(defect_index).defect_class,
                defect_index, std::string(region.name()), {}};

    SplitMix64 rng = record_rng(cfg.seed, rec.qid);
    std::vector<std::string> others;
    for (int i = 0; i < 9; ++i) {
        if (i != region.index()) {
            others.emplace_back(kRegionNames[static_cast<std::size_t>(i)]);
        }
    }
    detail::assign_options(rec, std::string(region.name()), sample_without_replacement(std::move(others), 3, rng),
                           rng);
    return rec;
}

/// Fine mapping: open-ended, answered by the tight box over the whole instance mask.
inline QaRecord gen_dfm(std::string_view dataset, const SampleRecord& sample, std::size_t defect_index,
                        const BinaryMask& mask, const BuildConfig&) {
    const BoundingBox box = tight_bbox(mask);
    QaRecord rec;
    rec.qid = make_qid(dataset, sample.id, Task::DFM, defect_index);
    rec.image = sample.image;
    rec.task = Task::DFM;
    rec.question = detail::fill_template(QuestionTemplates::dfm, sample.object_class);
    rec.answer = box.to_string();
    rec.meta = {std::string(dataset), sample.object_class, sample.defects.at(defect_index).defect_class,
                defect_index, {}, box};
    return rec;
}

/// Classification: three distractors from the manifest vocabulary, topped up
/// from cfg.fallback_defect_classes when the vocabulary is too small.
inline QaRecord gen_dc(const DatasetManifest& manifest, const SampleRecord& sample, std::size_t defect_index,
                       const BuildConfig& cfg) {
    const std::string& correct = sample.defects.at(defect_index).defect_class;
    QaRecord rec;
    rec.qid = make_qid(manifest.dataset_name, sample.id, Task::DC, defect_index);
    rec.image = sample.image;
    rec.task = Task::DC;
    rec.question = detail::fill_template(QuestionTemplates::dc, sample.object_class);
    rec.meta = {manifest.dataset_name, sample.object_class, correct, defect_index, {}, {}};

    SplitMix64 rng = record_rng(cfg.seed, rec.qid);
    auto distinct_excluding = [](const std::vector<std::string>& src, const std::vector<std::string>& exclude) {
        std::vector<std::string> out;
        for (const auto& s : src) {
            if (std::find(exclude.begin(), exclude.end(), s) == exclude.end() &&
                std::find(out.begin(), out.end(), s) == out.end()) {
                out.push_back(s);
            }
        }
        return out;
    };

    std::vector<std::string> pool = distinct_excluding(manifest.defect_classes, {correct});
    std::vector<std::string> distractors;
    if (pool.size() >= 3) {
        distractors = sample_without_replacement(std::move(pool), 3, rng);
    } else {
        distractors = pool;
        std::vector<std::string> used = distractors;
        used.push_back(correct);
        std::vector<std::string> extra = distinct_excluding(cfg.fallback_defect_classes, used);
        const std::size_t need = 3 - distractors.size();
        if (extra.size() < need) {
            throw VocabularyError(fmt::format(
                "sample \"{}\": only {} distinct distractor classes for \"{}\" (need 3)", sample.id,
                distractors.size() + extra.size(), correct));
        }
        for (auto& e : sample_without_replacement(std::move(extra), need, rng)) {
            distractors.push_back(std::move(e));
        }
    }
    detail::assign_options(rec, correct, std::move(distractors), rng);
    return rec;
}

struct BuildIssue {
    std::string qid;
    std::string message;

    friend bool operator==(const BuildIssue&, const BuildIssue&) = default;
};

struct BuildResult {
    std::vector<QaRecord> records;  // sorted by qid
    std::vector<BuildIssue> issues; // sorted by qid
};

/// Generates every enabled task: AD per sample, RDL/DFM/DC per defect instance.
/// A failing record is skipped and reported; output order depends only on qids.
inline BuildResult build_dataset(const DatasetManifest& manifest, const BuildConfig& cfg, unsigned threads = 1) {
    if (cfg.tasks.empty()) {
        throw ConfigError("build: no tasks enabled");
    }
    const bool need_mask = cfg.enabled(Task::RDL) || cfg.enabled(Task::DFM);
    const std::string& ds = manifest.dataset_name;

    std::vector<BuildResult> partial(std::max(1u, threads));
    parallel_chunks(manifest.samples.size(), threads, [&](unsigned worker, std::size_t begin, std::size_t end) {
        BuildResult& out = partial[worker];
        auto attempt = [&](const std::string& qid, auto&& make) {
            try {
                out.records.push_back(make());
            } catch (const Error& e) {
                out.issues.push_back({qid, e.what()});
            }
        };
        for (std::size_t i = begin; i < end; ++i) {
            const SampleRecord& s = manifest.samples[i];
            if (cfg.enabled(Task::AD)) {
                attempt(make_qid(ds, s.id, Task::AD), [&] { return gen_ad(ds, s, cfg); });
            }
            for (std::size_t k = 0; k < s.defects.size(); ++k) {
                std::optional<BinaryMask> mask;
                std::string mask_error;
                if (need_mask) {
                    try {
                        mask = load_defect_mask(manifest, s, s.defects[k]);
                    } catch (const Error& e) {
                        mask_error = e.what();
                    }
                }
                for (Task t : {Task::RDL, Task::DFM}) {
                    if (!cfg.enabled(t)) {
                        continue;
                    }
                    const std::string qid = make_qid(ds, s.id, t, k);
                    if (!mask) {
                        out.issues.push_back({qid, mask_error});
                        continue;
                    }
                    attempt(qid, [&] {
                        return t == Task::RDL ? gen_rdl(ds, s, k, *mask, cfg) : gen_dfm(ds, s, k, *mask, cfg);
                    });
                }
                if (cfg.enabled(Task::DC)) {
                    attempt(make_qid(ds, s.id, Task::DC, k), [&] { return gen_dc(manifest, s, k, cfg); });
                }
            }
        }
    });

    BuildResult result;
    for (auto& p : partial) {
        std::move(p.records.begin(), p.records.end(), std::back_inserter(result.records));
        std::move(p.issues.begin(), p.issues.end(), std::back_inserter(result.issues));
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const QaRecord& a, const QaRecord& b) { return a.qid < b.qid; });
    std::sort(result.issues.begin(), result.issues.end(),
              [](const BuildIssue& a, const BuildIssue& b) { return a.qid < b.qid; });
    for (std::size_t i = 1; i < result.records.size(); ++i) {
        if (result.records[i].qid == result.records[i - 1].qid) {
            throw IntegrityError("build: qid collision on \"" + result.records[i].qid + "\"");
        }
    }
    return result;
}

// ---- JSON Lines ----

inline nlohmann::ordered_json to_json(const QaRecord& r) {
    nlohmann::ordered_json j;
    j["qid"] = r.qid;
    j["image"] = r.image;
    j["task"] = std::string(task_name(r.task));
    j["question"] = r.question;
    if (r.task != Task::DFM) {
        j["options"] = r.options;
    }
    j["answer"] = r.answer;
    nlohmann::ordered_json meta;
    meta["dataset"] = r.meta.dataset;
    meta["object_class"] = r.meta.object_class;
    if (r.meta.defect_class) meta["defect_class"] = *r.meta.defect_class;
    if (r.meta.defect_index) meta["defect_index"] = *r.meta.defect_index;
    if (r.meta.region) meta["region"] = *r.meta.region;
    if (r.meta.bbox) {
        const BoundingBox& b = *r.meta.bbox;
        meta["bbox"] = {b.x_min, b.y_min, b.x_max, b.y_max};
    }
    j["meta"] = std::move(meta);
    return j;
}

inline QaRecord qa_from_json(const nlohmann::json& j) {
    using detail::require_string;
    if (!j.is_object()) {
        throw SchemaError("qa record must be a JSON object");
    }
    QaRecord r;
    r.qid = require_string(j, "qid", "qa record");
    const std::string where = "qa record \"" + r.qid + "\"";
    r.image = require_string(j, "image", where);
    const auto task = parse_task(require_string(j, "task", where));
    if (!task) {
        throw SchemaError(where + ": unknown task");
    }
    r.task = *task;
    r.question = require_string(j, "question", where);
    r.answer = require_string(j, "answer", where);
    if (r.task != Task::DFM) {
        r.options = detail::require_string_list(j, "options", where);
        if (r.options.size() != option_count(r.task)) {
            throw SchemaError(fmt::format("{}: expected {} options, got {}", where, option_count(r.task),
                                          r.options.size()));
        }
    }
    const auto& meta = detail::require(j, "meta", where);
    if (!meta.is_object()) {
        throw SchemaError(where + ": meta must be an object");
    }
    r.meta.dataset = meta.value("dataset", std::string{});
    r.meta.object_class = meta.value("object_class", std::string{});
    if (meta.contains("defect_class")) r.meta.defect_class = meta.at("defect_class").get<std::string>();
    if (meta.contains("defect_index")) r.meta.defect_index = meta.at("defect_index").get<std::size_t>();
    if (meta.contains("region")) r.meta.region = meta.at("region").get<std::string>();
    if (meta.contains("bbox")) {
        const auto v = meta.at("bbox").get<std::vector<std::uint32_t>>();
        if (v.size() != 4) {
            throw SchemaError(where + ": meta.bbox must hold 4 integers");
        }
        r.meta.bbox = BoundingBox{v[0], v[1], v[2], v[3]};
    }
    return r;
}

inline void write_jsonl(std::ostream& out, const std::vector<QaRecord>& records) {
    for (const QaRecord& r : records) {
        out << to_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict) << '\n';
    }
}

/// Reads JSON Lines, skipping blank lines. Errors carry the 1-based line number.
template <typename Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(fmt::format("line {}: {}", lineno, e.what()));
        }
        try {
            fn(j);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(fmt::format("line {}: {}", lineno, e.what()));
        } catch (const SchemaError& e) {
            throw SchemaError(fmt::format("line {}: {}", lineno, e.what()));
        }
    }
}

inline std::vector<QaRecord> read_qa_jsonl(std::istream& in) {
    std::vector<QaRecord> out;
    for_each_jsonl(in, [&](const nlohmann::json& j) { out.push_back(qa_from_json(j)); });
    return out;
}

}  // namespace ddqa
