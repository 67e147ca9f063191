#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "ddqa/error.hpp"
#include "ddqa/losses.hpp"

namespace ddqa::loss {

// Fixture document:
// {"grad_tolerance": 1e-4, "fd_step": 1e-5,
//  "cases": [{"name": "...", "pred": [...], "gt": [0|1, ...],
//             "weights": {"lambda_bce": 2, "lambda_dice": 0.5, "smooth_eps": 1},
//             "expected": {"bce": ..., "dice": ..., "mdlm": ...}, "tolerance": 1e-6},
//            {"name": "...", "ce": {"vocab": V, "ids": [...], "logits": [[...], ...]},
//             "expected": {"ce": ...}}]}

struct CaseOutcome {
    std::string name;
    std::optional<double> bce, dice, mdlm, ce;
    double max_grad_rel_err = 0.0;
    std::vector<std::string> failures;
};

struct CheckOutcome {
    std::vector<CaseOutcome> cases;
    double max_grad_rel_err = 0.0;
    bool ok() const {
        return std::all_of(cases.begin(), cases.end(), [](const CaseOutcome& c) { return c.failures.empty(); });
    }
};

/// max_i |a_i - f_i| / max(|a_i|, |f_i|, 1e-12) between an analytic gradient and
/// central differences of `fn`, over coordinates where `include(i)` holds.
template <typename Loss, typename Include>
double max_gradient_rel_error(std::vector<double> x, const std::vector<double>& analytic, Loss&& fn, double h,
                              Include&& include) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!include(i)) continue;
        const double x0 = x[i];
        x[i] = x0 + h;
        const double up = fn(x);
        x[i] = x0 - h;
        const double down = fn(x);
        x[i] = x0;
        const double fd = (up - down) / (2.0 * h);
        const double scale = std::max({std::abs(analytic[i]), std::abs(fd), 1e-12});
        worst = std::max(worst, std::abs(analytic[i] - fd) / scale);
    }
    return worst;
}

inline CheckOutcome run_loss_check(const nlohmann::json& fixture) {
    if (!fixture.is_object() || !fixture.contains("cases") || !fixture.at("cases").is_array()) {
        throw SchemaError("loss fixture needs a \"cases\" array");
    }
    const double grad_tol = fixture.value("grad_tolerance", 1e-4);
    const double h = fixture.value("fd_step", 1e-5);

    CheckOutcome out;
    std::size_t index = 0;
    for (const auto& c : fixture.at("cases")) {
        CaseOutcome res;
        res.name = c.value("name", fmt::format("case{}", index++));
        const double tol = c.value("tolerance", 1e-6);
        const auto expected = c.value("expected", nlohmann::json::object());
        auto compare = [&](const char* key, double got) {
            if (expected.contains(key)) {
                const double want = expected.at(key).get<double>();
                if (!(std::abs(got - want) <= tol)) {
                    res.failures.push_back(fmt::format("{} = {:.9f}, expected {:.9f} (tol {:g})", key, got, want, tol));
                }
            }
        };

        if (c.contains("ce")) {
            const auto& jc = c.at("ce");
            TokenSequence seq;
            seq.vocab = jc.at("vocab").get<std::size_t>();
            seq.ids = jc.at("ids").get<std::vector<std::uint32_t>>();
            for (const auto& row : jc.at("logits")) {
                const auto r = row.get<std::vector<double>>();
                if (r.size() != seq.vocab) {
                    throw SchemaError(res.name + ": logits row length differs from vocab");
                }
                seq.logits.insert(seq.logits.end(), r.begin(), r.end());
            }
            res.ce = ce_loss(seq);
            compare("ce", *res.ce);
            auto fn = [&](const std::vector<double>& logits) {
                TokenSequence s = seq;
                s.logits = logits;
                return ce_loss(s);
            };
            res.max_grad_rel_err = max_gradient_rel_error(seq.logits, ce_grad(seq), fn, h, [](std::size_t) { return true; });
        }

        if (c.contains("pred")) {
            const auto pred = c.at("pred").get<std::vector<double>>();
            const auto gt_raw = c.at("gt").get<std::vector<int>>();
            std::vector<std::uint8_t> gt;
            for (int g : gt_raw) {
                if (g != 0 && g != 1) throw SchemaError(res.name + ": gt values must be 0 or 1");
                gt.push_back(static_cast<std::uint8_t>(g));
            }
            LossWeights w;
            if (c.contains("weights")) {
                const auto& jw = c.at("weights");
                w.lambda_bce = jw.value("lambda_bce", w.lambda_bce);
                w.lambda_dice = jw.value("lambda_dice", w.lambda_dice);
                w.smooth_eps = jw.value("smooth_eps", w.smooth_eps);
            }
            res.bce = bce_loss(pred, gt);
            res.dice = dice_loss(pred, gt, w.smooth_eps);
            res.mdlm = mdlm_loss(pred, gt, w);
            compare("bce", *res.bce);
            compare("dice", *res.dice);
            compare("mdlm", *res.mdlm);

            // Coordinates within h of the clamp are skipped: the loss is not smooth there.
            auto interior = [&](std::size_t i) { return pred[i] > kClampEps + h && pred[i] < 1.0 - kClampEps - h; };
            auto fn = [&](const std::vector<double>& p) { return mdlm_loss(p, gt, w); };
            res.max_grad_rel_err =
                std::max(res.max_grad_rel_err, max_gradient_rel_error(pred, mdlm_grad(pred, gt, w), fn, h, interior));
        }

        if (res.max_grad_rel_err >= grad_tol) {
            res.failures.push_back(
                fmt::format("gradient relative error {:.3e} exceeds {:g}", res.max_grad_rel_err, grad_tol));
        }
        out.max_grad_rel_err = std::max(out.max_grad_rel_err, res.max_grad_rel_err);
        out.cases.push_back(std::move(res));
    }
    return out;
}

inline std::string format_case(const CaseOutcome& c) {
    std::string line = c.name + ":";
    if (c.ce) line += fmt::format(" ce={:.6f}", *c.ce);
    if (c.bce) line += fmt::format(" bce={:.6f} dice={:.6f} mdlm={:.6f}", *c.bce, *c.dice, *c.mdlm);
    line += fmt::format(" max_grad_rel_err={:.3e} {}", c.max_grad_rel_err, c.failures.empty() ? "ok" : "FAIL");
    for (const auto& f : c.failures) line += "\n  " + f;
    return line;
}

}  // namespace ddqa::loss
