#pragma once

// Binary detection metrics and top-k ranking metrics (mAP, R-precision,
// NDCG) with binary relevance against the ground-truth top-k. With k = 1 the
// three ranking metrics coincide by construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "upd/raster.hpp"

namespace upd::metrics {

struct DetectionMetrics {
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;  // no predicted positives; reported as 0
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline DetectionMetrics detection_metrics(std::span<const int> preds, std::span<const int> labels) {
    require(!preds.empty() && preds.size() == labels.size(),
            "detection_metrics: need equal-length non-empty prediction and label lists");
    DetectionMetrics m;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require((preds[i] == 0 || preds[i] == 1) && (labels[i] == 0 || labels[i] == 1),
                "detection_metrics: predictions and labels must be 0/1");
        if (preds[i] == 1 && labels[i] == 1) ++m.tp;
        else if (preds[i] == 1 && labels[i] == 0) ++m.fp;
        else if (preds[i] == 0 && labels[i] == 1) ++m.fn;
        else ++m.tn;
    }
    const double n = static_cast<double>(preds.size());
    m.accuracy = (m.tp + m.tn) / n;
    m.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    if (m.tp + m.fp == 0) {
        m.precision_undefined = true;
        m.precision = 0.0;
    } else {
        m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
    }
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                          : 0.0;
    return m;
}

struct RankingJudgment {
    std::vector<int> predicted;     // class ids, best first
    std::vector<int> ground_truth;  // class ids, most contributing first
};

inline void validate_judgment(const RankingJudgment& j) {
    auto no_dups = [](const std::vector<int>& v) {
        std::vector<int> s(v);
        std::sort(s.begin(), s.end());
        return std::adjacent_find(s.begin(), s.end()) == s.end();
    };
    require(no_dups(j.predicted) && no_dups(j.ground_truth),
            "RankingJudgment: duplicate classes within a list");
}

struct RankMetrics {
    double map = 0.0;
    double rprec = 0.0;
    double ndcg = 0.0;
};

// Relevant set R = ground-truth top-k, binary relevance rel(i) = [pred_i in R].
// Judgments whose ground truth is shorter than k are scored against all of it
// (denominators truncate to |R|); empty-ground-truth judgments are skipped.
inline RankMetrics rank_metrics_at_k(std::span<const RankingJudgment> judgments, int k) {
    require(k >= 1, "rank_metrics_at_k: k must be >= 1");
    require(!judgments.empty(), "rank_metrics_at_k: empty judgment list");

    RankMetrics total;
    std::size_t counted = 0;
    for (const RankingJudgment& j : judgments) {
        validate_judgment(j);
        if (j.ground_truth.empty()) continue;
        const int r = std::min<int>(k, static_cast<int>(j.ground_truth.size()));
        std::vector<int> relevant(j.ground_truth.begin(), j.ground_truth.begin() + r);

        double ap = 0.0, hits = 0.0, dcg = 0.0, idcg = 0.0;
        for (int i = 1; i <= r; ++i) {
            bool rel = false;
            if (i <= static_cast<int>(j.predicted.size()))
                rel = std::find(relevant.begin(), relevant.end(), j.predicted[i - 1]) !=
                      relevant.end();
            if (rel) {
                hits += 1.0;
                ap += hits / static_cast<double>(i);
                dcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
            }
            idcg += 1.0 / std::log2(static_cast<double>(i) + 1.0);
        }
        total.map += ap / static_cast<double>(r);
        total.rprec += hits / static_cast<double>(r);
        total.ndcg += dcg / idcg;
        ++counted;
    }
    require(counted > 0, "rank_metrics_at_k: no judgment has ground-truth entries");
    total.map /= static_cast<double>(counted);
    total.rprec /= static_cast<double>(counted);
    total.ndcg /= static_cast<double>(counted);
    return total;
}

}  // namespace upd::metrics
