#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddqa/error.hpp"
#include "ddqa/mask_geometry.hpp"
#include "ddqa/qa_forge.hpp"
#include "ddqa/rng.hpp"

namespace ddqa {

struct PredictionRecord {
    std::string qid;
    std::string raw_answer;

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// Accepts "B", "B.", "B)", "B. text" or "b) text" (leading whitespace ignored).
/// Returns the upper-case letter, or nothing when the answer does not parse or
/// names an option outside the first `n_options`.
inline std::optional<char> parse_choice(std::string_view raw, std::size_t n_options) noexcept {
    std::size_t i = 0;
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) {
        ++i;
    }
    if (i >= raw.size() || !std::isalpha(static_cast<unsigned char>(raw[i]))) {
        return std::nullopt;
    }
    const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(raw[i])));
    if (letter < 'A' || static_cast<std::size_t>(letter - 'A') >= n_options) {
        return std::nullopt;
    }
    const std::string_view rest = raw.substr(i + 1);
    if (!rest.empty() && rest.front() != '.' && rest.front() != ')' &&
        rest.find_first_not_of(" \t\r\n") != std::string_view::npos) {
        return std::nullopt;
    }
    return letter;
}

/// Parses "[x1,y1,x2,y2]" with optional whitespace; requires x1<=x2, y1<=y2.
inline std::optional<BoundingBox> parse_bbox(std::string_view raw) noexcept {
    auto skip_ws = [&](std::size_t& i) {
        while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) {
            ++i;
        }
    };
    std::size_t i = 0;
    skip_ws(i);
    if (i >= raw.size() || raw[i] != '[') {
        return std::nullopt;
    }
    ++i;
    std::array<std::uint32_t, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
        skip_ws(i);
        const auto [ptr, ec] = std::from_chars(raw.data() + i, raw.data() + raw.size(), v[k]);
        if (ec != std::errc{}) {
            return std::nullopt;
        }
        i = static_cast<std::size_t>(ptr - raw.data());
        skip_ws(i);
        const char expected = k < 3 ? ',' : ']';
        if (i >= raw.size() || raw[i] != expected) {
            return std::nullopt;
        }
        ++i;
    }
    skip_ws(i);
    if (i != raw.size() || v[0] > v[2] || v[1] > v[3]) {
        return std::nullopt;
    }
    return BoundingBox{v[0], v[1], v[2], v[3]};
}

inline bool score_dfm(std::string_view raw, const BoundingBox& gt, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
        throw ConfigError(fmt::format("IoU threshold must lie in (0, 1], got {}", iou_threshold));
    }
    const auto pred = parse_bbox(raw);
    return pred && iou(*pred, gt) >= iou_threshold;
}

/// Rounds correct/total*100 half-up to tenths of a percent, exactly.
inline std::int64_t percent_tenths(std::uint64_t correct, std::uint64_t total) noexcept {
    if (total == 0) {
        return 0;
    }
    return static_cast<std::int64_t>((2000 * correct + total) / (2 * total));
}

struct TaskScore {
    std::uint64_t correct = 0;
    std::uint64_t total = 0;
    std::uint64_t unparsed = 0;

    std::int64_t accuracy_tenths() const noexcept { return percent_tenths(correct, total); }
    double accuracy() const noexcept { return static_cast<double>(accuracy_tenths()) / 10.0; }
};

struct TaskReport {
    std::map<Task, TaskScore> tasks;  // only tasks present in the ground truth
    std::int64_t average_tenths = 0;  // mean of the rounded task accuracies, rounded half-up

    double average() const noexcept { return static_cast<double>(average_tenths) / 10.0; }
    bool has(Task t) const { return tasks.contains(t); }
};

inline void finish_report(TaskReport& report) {
    std::int64_t sum = 0;
    for (const auto& [task, score] : report.tasks) {
        sum += score.accuracy_tenths();
    }
    const auto k = static_cast<std::int64_t>(report.tasks.size());
    report.average_tenths = k == 0 ? 0 : (2 * sum + k) / (2 * k);
}

/// Scores predictions against ground truth. Missing predictions count as
/// incorrect; duplicate or unknown qids are errors.
inline TaskReport score_run(const std::vector<PredictionRecord>& preds, const std::vector<QaRecord>& gt,
                            double iou_threshold = 0.5) {
    std::unordered_map<std::string_view, const QaRecord*> by_qid;
    TaskReport report;
    for (const QaRecord& r : gt) {
        if (!by_qid.emplace(r.qid, &r).second) {
            throw ScoringError("duplicate qid in ground truth: " + r.qid);
        }
        ++report.tasks[r.task].total;
    }
    std::unordered_set<std::string_view> seen;
    for (const PredictionRecord& p : preds) {
        const auto it = by_qid.find(p.qid);
        if (it == by_qid.end()) {
            throw ScoringError("prediction for unknown qid: " + p.qid);
        }
        if (!seen.insert(p.qid).second) {
            throw ScoringError("duplicate prediction for qid: " + p.qid);
        }
        const QaRecord& truth = *it->second;
        TaskScore& score = report.tasks[truth.task];
        bool correct = false;
        if (truth.task == Task::DFM) {
            const auto box = parse_bbox(truth.answer);
            if (!box) {
                throw ScoringError("ground-truth DFM answer is not a bounding box: " + truth.qid);
            }
            correct = score_dfm(p.raw_answer, *box, iou_threshold);
            score.unparsed += parse_bbox(p.raw_answer) ? 0 : 1;
        } else {
            const auto letter = parse_choice(p.raw_answer, truth.options.size());
            score.unparsed += letter ? 0 : 1;
            correct = letter && truth.answer.size() == 1 && *letter == truth.answer.front();
        }
        score.correct += correct ? 1 : 0;
    }
    finish_report(report);
    return report;
}

enum class ReportFormat { Text, Markdown, Json };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) noexcept {
    if (s == "text") return ReportFormat::Text;
    if (s == "markdown" || s == "md") return ReportFormat::Markdown;
    if (s == "json") return ReportFormat::Json;
    return std::nullopt;
}

/// Column order of result tables.
inline constexpr std::array<Task, 4> kReportColumns = {Task::AD, Task::DC, Task::RDL, Task::DFM};

/// Renders one result row with columns AD, DC, RDL, DFM, Average; absent tasks print "-".
inline std::string render_table(const TaskReport& report, ReportFormat format, std::string_view row_label = "Run") {
    auto cell = [&](Task t) {
        return report.has(t) ? fmt::format("{:.1f}", report.tasks.at(t).accuracy()) : std::string("-");
    };
    const std::string avg = report.tasks.empty() ? "-" : fmt::format("{:.1f}", report.average());

    switch (format) {
        case ReportFormat::Json: {
            nlohmann::ordered_json j;
            j["model"] = std::string(row_label);
            for (Task t : kReportColumns) {
                if (!report.has(t)) {
                    j[std::string(task_name(t))] = nullptr;
                    continue;
                }
                const TaskScore& s = report.tasks.at(t);
                nlohmann::ordered_json js;
                js["accuracy"] = s.accuracy();
                js["correct"] = s.correct;
                js["total"] = s.total;
                js["unparsed"] = s.unparsed;
                j[std::string(task_name(t))] = std::move(js);
            }
            j["average"] = report.tasks.empty() ? nlohmann::ordered_json(nullptr)
                                                : nlohmann::ordered_json(report.average());
            return j.dump() + "\n";
        }
        case ReportFormat::Markdown: {
            std::string out = "| Model | AD | DC | RDL | DFM | Average |\n|---|---|---|---|---|---|\n";
            out += fmt::format("| {} |", row_label);
            for (Task t : kReportColumns) {
                out += fmt::format(" {} |", cell(t));
            }
            out += fmt::format(" {} |\n", avg);
            return out;
        }
        case ReportFormat::Text:
        default: {
            const std::size_t w = std::max<std::size_t>(row_label.size(), 5);
            std::string out = fmt::format("{:<{}} | {:>6} | {:>6} | {:>6} | {:>6} | {:>7}\n", "Model", w, "AD", "DC",
                                          "RDL", "DFM", "Average");
            out += fmt::format("{:<{}} |", row_label, w);
            for (Task t : kReportColumns) {
                out += fmt::format(" {:>6} |", cell(t));
            }
            out += fmt::format(" {:>7}\n", avg);
            return out;
        }
    }
}

// ---- predictions I/O ----

inline void write_predictions_jsonl(std::ostream& out, const std::vector<PredictionRecord>& preds) {
    for (const auto& p : preds) {
        nlohmann::ordered_json j;
        j["qid"] = p.qid;
        j["answer"] = p.raw_answer;
        out << j.dump() << '\n';
    }
}

inline std::vector<PredictionRecord> read_predictions_jsonl(std::istream& in) {
    std::vector<PredictionRecord> out;
    for_each_jsonl(in, [&](const nlohmann::json& j) {
        if (!j.is_object()) {
            throw SchemaError("prediction must be a JSON object");
        }
        out.push_back({detail::require_string(j, "qid", "prediction"),
                       detail::require_string(j, "answer", "prediction")});
    });
    return out;
}

/// Uniform random responder: a random option letter for choice questions and a
/// random box inside [0, 256)^2 for DFM. Each answer depends only on (seed, qid).
inline std::vector<PredictionRecord> random_responder(const std::vector<QaRecord>& qa, std::uint64_t seed) {
    std::vector<PredictionRecord> out;
    out.reserve(qa.size());
    for (const QaRecord& r : qa) {
        SplitMix64 rng = record_rng(seed ^ 0x5bd1e995ULL, r.qid);
        if (r.task == Task::DFM) {
            auto a = static_cast<std::uint32_t>(rng.below(256));
            auto b = static_cast<std::uint32_t>(rng.below(256));
            auto c = static_cast<std::uint32_t>(rng.below(256));
            auto d = static_cast<std::uint32_t>(rng.below(256));
            out.push_back({r.qid, BoundingBox{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)}
                                      .to_string()});
        } else {
            const auto k = rng.below(std::max<std::size_t>(r.options.size(), 1));
            out.push_back({r.qid, std::string(1, static_cast<char>('A' + k))});
        }
    }
    return out;
}

}  // namespace ddqa
