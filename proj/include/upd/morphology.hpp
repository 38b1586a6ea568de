#pragma once

// Street-canyon height/width binning and per-bin report aggregation. The
// ratio estimator is a documented proxy working on segmentation rasters;
// manifest-supplied bins always take precedence over it.

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upd/metrics.hpp"
#include "upd/segmentation.hpp"

namespace upd::morph {

enum class Bin { open = 0, low, mid, deep, unbinned };
constexpr int kNumBins = 5;

inline const char* bin_name(Bin b) {
    static const char* names[] = {"open", "low", "mid", "deep", "unbinned"};
    return names[static_cast<int>(b)];
}

// open: ratio 0; low: (0,1]; mid: (1,2]; deep: > 3. The (2,3] gap stays
// unbinned, keeping the published table schema; boundary values land in the
// lower bin.
inline Bin bin_for_ratio(double r) {
    if (!std::isfinite(r) || r < 0.0) return Bin::unbinned;
    if (r == 0.0) return Bin::open;
    if (r <= 1.0) return Bin::low;
    if (r <= 2.0) return Bin::mid;
    if (r > 3.0) return Bin::deep;
    return Bin::unbinned;
}

// Accepts a bin name or a raw ratio.
inline std::optional<Bin> parse_bin(const std::string& token) {
    if (token.empty()) return std::nullopt;
    std::string t;
    for (char c : token) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (int i = 0; i < kNumBins; ++i)
        if (t == bin_name(static_cast<Bin>(i))) return static_cast<Bin>(i);
    try {
        std::size_t pos = 0;
        const double r = std::stod(t, &pos);
        if (pos == t.size()) return bin_for_ratio(r);
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

struct RatioEstimate {
    double ratio = 0.0;
    bool valid = false;  // false -> unbinned (no road found)

    Bin bin() const { return valid ? bin_for_ratio(ratio) : Bin::unbinned; }
};

namespace detail {

inline double median(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline int longest_run(const std::vector<bool>& hits) {
    int best = 0, cur = 0;
    for (bool h : hits) {
        cur = h ? cur + 1 : 0;
        best = std::max(best, cur);
    }
    return best;
}

}  // namespace detail

// Proxy canyon ratio: median building-column run height over median road run
// width in the bottom third of the raster. No road -> invalid (unbinned); no
// building -> ratio 0 (open).
inline RatioEstimate estimate_ratio(const seg::SegmentationMap& map) {
    const int h = map.height, w = map.width;

    std::vector<int> road_widths;
    std::vector<bool> row_hits(w);
    for (int y = 2 * h / 3; y < h; ++y) {
        bool any = false;
        for (int x = 0; x < w; ++x) {
            row_hits[x] = map.at(y, x) == seg::kRoad;
            any |= row_hits[x];
        }
        if (any) road_widths.push_back(detail::longest_run(row_hits));
    }
    if (road_widths.empty()) return {};

    std::vector<int> building_heights;
    std::vector<bool> col_hits(h);
    for (int x = 0; x < w; ++x) {
        bool any = false;
        for (int y = 0; y < h; ++y) {
            col_hits[y] = map.at(y, x) == seg::kBuilding;
            any |= col_hits[y];
        }
        if (any) building_heights.push_back(detail::longest_run(col_hits));
    }
    if (building_heights.empty()) return {0.0, true};

    const double road_width = detail::median(road_widths);
    const double building_height = detail::median(building_heights);
    return {building_height / road_width, true};
}

// ---------------------------------------------------------------------------
// Stratified reporting
// ---------------------------------------------------------------------------

struct StratumItem {
    Bin bin = Bin::unbinned;
    bool has_detection = false;
    int predicted = 0;
    int label = 0;
    bool has_judgment = false;
    metrics::RankingJudgment judgment;
};

struct StratumRow {
    Bin bin = Bin::unbinned;
    std::size_t n_detection = 0;
    metrics::DetectionMetrics detection;
    std::size_t n_ranking = 0;
    std::vector<double> map_at;  // mAP@1..k_max
};

// Groups per-image results by bin and delegates to the plain metrics; bins
// with no images are omitted.
inline std::vector<StratumRow> stratified_report(std::span<const StratumItem> items,
                                                 int k_max = 4) {
    require(k_max >= 1, "stratified_report: k_max must be >= 1");
    std::vector<StratumRow> rows;
    for (int b = 0; b < kNumBins; ++b) {
        const Bin bin = static_cast<Bin>(b);
        std::vector<int> preds, labels;
        std::vector<metrics::RankingJudgment> judgments;
        for (const StratumItem& it : items) {
            if (it.bin != bin) continue;
            if (it.has_detection) {
                preds.push_back(it.predicted);
                labels.push_back(it.label);
            }
            if (it.has_judgment) judgments.push_back(it.judgment);
        }
        if (preds.empty() && judgments.empty()) continue;
        StratumRow row;
        row.bin = bin;
        row.n_detection = preds.size();
        if (!preds.empty()) row.detection = metrics::detection_metrics(preds, labels);
        row.n_ranking = judgments.size();
        if (!judgments.empty())
            for (int k = 1; k <= k_max; ++k)
                row.map_at.push_back(metrics::rank_metrics_at_k(judgments, k).map);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace upd::morph
