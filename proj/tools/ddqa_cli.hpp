#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "ddqa/ddqa.hpp"
#include "ddqa/loss_check.hpp"

namespace ddqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline const std::vector<std::string> kDefaultFallbackClasses = {
    "scratch", "crack", "dent", "stain", "hole", "contamination", "deformation", "missing part"};

namespace detail {

inline std::vector<QaRecord> read_qa_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return read_qa_jsonl(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

inline std::vector<PredictionRecord> read_pred_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return read_predictions_jsonl(in);
    } catch (const Error& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    return out;
}

}  // namespace detail

/// Runs the command line; returns 0 on success, 1 on validation or tolerance
/// failure, 2 on usage errors. Nothing is written to `err` on success.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"ddqa: defect question-answering dataset builder and anomaly evaluation toolkit", "ddqa"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    std::string log_path;
    app.add_option("--log", log_path, "Append warnings to this file instead of discarding them");

    std::string manifest_path;
    auto* validate = app.add_subcommand("validate", "Validate a dataset manifest and decode every defect mask");
    validate->add_option("--manifest", manifest_path, "Manifest JSON")->required();
    unsigned threads = 1;
    validate->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));

    std::string out_path;
    std::uint64_t seed = 42;
    std::vector<std::string> task_names{"ad", "rdl", "dfm", "dc"};
    std::vector<std::string> fallback = kDefaultFallbackClasses;
    auto* build = app.add_subcommand("build", "Generate AD/RDL/DFM/DC questions as JSON Lines");
    build->add_option("--manifest", manifest_path, "Manifest JSON")->required();
    build->add_option("--out", out_path, "Output .jsonl")->required();
    build->add_option("--seed", seed, "Seed for option sampling and shuffling")->capture_default_str();
    build->add_option("--tasks", task_names, "Comma-separated task list")
        ->delimiter(',')
        ->check(CLI::IsMember({"ad", "rdl", "dfm", "dc"}, CLI::ignore_case))
        ->capture_default_str();
    build->add_option("--fallback-classes", fallback,
                      "Comma-separated defect classes used to pad DC distractors when the manifest vocabulary "
                      "has fewer than four classes")
        ->delimiter(',');
    build->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));

    std::string qa_path;
    std::string format = "text";
    auto* stats = app.add_subcommand("stats", "Count questions per task and dataset");
    stats->add_option("--qa", qa_path, "Question file (.jsonl)")->required();
    stats->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));

    std::string pred_path;
    std::string gt_path;
    double iou_threshold = 0.5;
    std::string label = "Run";
    auto* score = app.add_subcommand("score", "Score an answer file against generated questions");
    score->add_option("--pred", pred_path, "Predictions (.jsonl, {\"qid\",\"answer\"} per line)")->required();
    score->add_option("--gt", gt_path, "Question file produced by build")->required();
    score->add_option("--iou", iou_threshold, "IoU threshold for DFM answers")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    score->add_option("--format", format, "text, markdown or json")
        ->check(CLI::IsMember({"text", "markdown", "md", "json"}));
    score->add_option("--label", label, "Row label in the rendered table");

    std::string mode = "binned";
    std::size_t bins = MetricAccumulator::kDefaultBins;
    std::vector<double> range;
    bool per_image = false;
    auto* eval_seg = app.add_subcommand("eval-seg", "Pixel-level AUROC, F1-max and AP of score maps");
    eval_seg->add_option("--pred", pred_path, "Directory of EIADSM01 score maps")->required();
    eval_seg->add_option("--gt", gt_path, "Directory of mask PNGs named <stem>.png")->required();
    eval_seg->add_option("--mode", mode, "exact or binned")->check(CLI::IsMember({"exact", "binned"}))
        ->capture_default_str();
    eval_seg->add_option("--bins", bins, "Histogram bins in binned mode")->check(CLI::Range(1, 1 << 24))
        ->capture_default_str();
    eval_seg->add_option("--range", range, "Binned score range lo,hi (default: detected from the data)")
        ->delimiter(',')
        ->expected(2);
    eval_seg->add_flag("--per-image", per_image, "Average per-image metrics instead of pooling all pixels");
    eval_seg->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));

    std::string fixture_path;
    auto* loss_check = app.add_subcommand("loss-check", "Check loss values and gradients against a JSON fixture");
    loss_check->add_option("--fixture", fixture_path, "Fixture JSON")->required();

    auto* responder = app.add_subcommand("random-responder", "Write uniformly random answers for a question file");
    responder->group("");
    responder->add_option("--qa", qa_path, "Question file")->required();
    responder->add_option("--out", out_path, "Output predictions (.jsonl)")->required();
    responder->add_option("--seed", seed, "Seed");

    SynthOptions synth_opt;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset (masks + manifest)");
    synth->group("");
    synth->add_option("--out", out_path, "Output directory")->required();
    synth->add_option("--samples", synth_opt.samples, "Number of samples");
    synth->add_option("--seed", synth_opt.seed, "Seed");
    synth->add_option("--anomalous-fraction", synth_opt.anomalous_fraction)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--max-defects", synth_opt.max_defects)->check(CLI::Range(1, 16));
    synth->add_option("--width", synth_opt.width)->check(CLI::Range(1, 1 << 14));
    synth->add_option("--height", synth_opt.height)->check(CLI::Range(1, 1 << 14));
    synth->add_option("--dataset", synth_opt.dataset, "Dataset name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "ddqa: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::app);
        if (!log) {
            err << "ddqa: cannot open log file " << log_path << "\n";
            return kExitUsage;
        }
    }
    auto warn = [&](const std::string& msg) {
        if (log.is_open()) log << msg << '\n';
    };

    try {
        if (validate->parsed()) {
            const DatasetManifest m = load_manifest(manifest_path);
            const ValidationReport report = validate_masks(m, threads);
            out << fmt::format("{}: {} samples, {} defect instances checked, {} failure(s)\n", m.dataset_name,
                               m.samples.size(), report.checked, report.failures.size());
            for (const auto& f : report.failures) {
                out << fmt::format("FAIL {} defect[{}] {}: {}\n", f.sample_id, f.defect_index, f.mask, f.reason);
            }
            return report.ok() ? kExitOk : kExitFailure;
        }

        if (build->parsed()) {
            BuildConfig cfg;
            cfg.seed = seed;
            cfg.tasks.clear();
            for (const auto& name : task_names) {
                const Task t = *parse_task(name);
                if (!cfg.enabled(t)) cfg.tasks.push_back(t);
            }
            cfg.fallback_defect_classes = fallback;
            const DatasetManifest m = load_manifest(manifest_path);
            const BuildResult result = build_dataset(m, cfg, threads);
            std::ofstream file = detail::open_output(out_path);
            write_jsonl(file, result.records);
            file.close();
            if (!file) throw IoError("write failed for " + out_path);
            out << fmt::format("wrote {} records to {} ({} skipped)\n", result.records.size(), out_path,
                               result.issues.size());
            for (const auto& issue : result.issues) {
                warn(fmt::format("skipped {}: {}", issue.qid, issue.message));
            }
            return kExitOk;
        }

        if (stats->parsed()) {
            out << render_stats(compute_stats(detail::read_qa_file(qa_path)), format == "json");
            return kExitOk;
        }

        if (score->parsed()) {
            if (!(iou_threshold > 0.0)) {
                err << "ddqa: --iou must lie in (0, 1]\n";
                return kExitUsage;
            }
            const TaskReport report =
                score_run(detail::read_pred_file(pred_path), detail::read_qa_file(gt_path), iou_threshold);
            out << render_table(report, *parse_report_format(format), label);
            return kExitOk;
        }

        if (eval_seg->parsed()) {
            EvalSegOptions opt;
            opt.mode = mode == "exact" ? MetricMode::Exact : MetricMode::Binned;
            opt.bins = bins;
            if (!range.empty()) opt.range = std::pair{range[0], range[1]};
            opt.pooling = per_image ? Pooling::PerImage : Pooling::Pooled;
            opt.threads = threads;
            const EvalSegResult result = evaluate_score_maps(pair_score_maps(pred_path, gt_path), opt);
            out << format_seg_metrics_json(result.metrics) << '\n';
            return kExitOk;
        }

        if (loss_check->parsed()) {
            std::ifstream in(fixture_path);
            if (!in) throw IoError("cannot open " + fixture_path);
            nlohmann::json fixture;
            try {
                fixture = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(fixture_path + ": " + e.what());
            }
            loss::CheckOutcome outcome;
            try {
                outcome = loss::run_loss_check(fixture);
            } catch (const nlohmann::json::exception& e) {
                throw SchemaError(fixture_path + ": " + e.what());
            }
            for (const auto& c : outcome.cases) out << loss::format_case(c) << '\n';
            out << fmt::format("max gradient relative error: {:.3e}\n", outcome.max_grad_rel_err);
            out << (outcome.ok() ? "loss-check: OK\n" : "loss-check: FAILED\n");
            return outcome.ok() ? kExitOk : kExitFailure;
        }

        if (responder->parsed()) {
            const auto preds = random_responder(detail::read_qa_file(qa_path), seed);
            std::ofstream file = detail::open_output(out_path);
            write_predictions_jsonl(file, preds);
            out << fmt::format("wrote {} predictions to {}\n", preds.size(), out_path);
            return kExitOk;
        }

        if (synth->parsed()) {
            const auto path = write_synthetic_dataset(out_path, synth_opt);
            out << "wrote " << path.string() << '\n';
            return kExitOk;
        }
    } catch (const std::exception& e) {
        err << "ddqa: error: " << e.what() << '\n';
        return kExitFailure;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace ddqa::cli
