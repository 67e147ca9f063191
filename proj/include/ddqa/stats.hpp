#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddqa/qa_forge.hpp"

namespace ddqa {

/// Question counts per task and source dataset.
struct QaStats {
    std::set<std::string> datasets;
    std::map<Task, std::map<std::string, std::size_t>> counts;

    std::size_t count(Task t, const std::string& ds) const {
        const auto it = counts.find(t);
        if (it == counts.end()) return 0;
        const auto jt = it->second.find(ds);
        return jt == it->second.end() ? 0 : jt->second;
    }
    std::size_t task_total(Task t) const {
        std::size_t n = 0;
        for (const auto& ds : datasets) n += count(t, ds);
        return n;
    }
    std::size_t dataset_total(const std::string& ds) const {
        std::size_t n = 0;
        for (Task t : kAllTasks) n += count(t, ds);
        return n;
    }
    std::size_t total() const {
        std::size_t n = 0;
        for (Task t : kAllTasks) n += task_total(t);
        return n;
    }
};

inline QaStats compute_stats(const std::vector<QaRecord>& records) {
    QaStats s;
    for (const QaRecord& r : records) {
        s.datasets.insert(r.meta.dataset);
        ++s.counts[r.task][r.meta.dataset];
    }
    return s;
}

// Row order of the statistics table.
inline constexpr std::array<Task, 4> kStatsRows = {Task::AD, Task::RDL, Task::DFM, Task::DC};

/// Task x dataset count table: columns Task, Questions, then one per dataset.
inline std::string render_stats(const QaStats& s, bool json = false) {
    if (json) {
        nlohmann::ordered_json j;
        for (Task t : kStatsRows) {
            nlohmann::ordered_json row;
            row["questions"] = s.task_total(t);
            for (const auto& ds : s.datasets) row[ds] = s.count(t, ds);
            j[std::string(task_name(t))] = std::move(row);
        }
        nlohmann::ordered_json total;
        total["questions"] = s.total();
        for (const auto& ds : s.datasets) total[ds] = s.dataset_total(ds);
        j["Total"] = std::move(total);
        return j.dump() + "\n";
    }

    std::vector<std::string> header{"Task", "Questions"};
    header.insert(header.end(), s.datasets.begin(), s.datasets.end());
    std::vector<std::vector<std::string>> rows;
    for (Task t : kStatsRows) {
        std::vector<std::string> row{std::string(task_name(t)), std::to_string(s.task_total(t))};
        for (const auto& ds : s.datasets) row.push_back(std::to_string(s.count(t, ds)));
        rows.push_back(std::move(row));
    }
    std::vector<std::string> total{"Total", std::to_string(s.total())};
    for (const auto& ds : s.datasets) total.push_back(std::to_string(s.dataset_total(ds)));

    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
        width[c] = std::max(width[c], total[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out = fmt::format("{:<{}}", cells[0], width[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) out += fmt::format(" | {:>{}}", cells[c], width[c]);
        return out + "\n";
    };
    std::string out = line(header);
    std::size_t rule = width[0];
    for (std::size_t c = 1; c < width.size(); ++c) rule += 3 + width[c];
    out += std::string(rule, '-') + "\n";
    for (const auto& r : rows) out += line(r);
    out += std::string(rule, '-') + "\n";
    out += line(total);
    return out;
}

}  // namespace ddqa
