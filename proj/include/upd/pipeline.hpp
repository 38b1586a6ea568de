#pragma once

// Batch detection and ranking over manifest rows with a bounded worker pool.
// Weights and schema are shared read-only; every per-image result lands in
// its own slot and rows are stably sorted by image id before writing, so the
// output bytes never depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "upd/manifest.hpp"
#include "upd/model.hpp"
#include "upd/png_io.hpp"
#include "upd/ranker.hpp"
#include "upd/scorecam.hpp"
#include "upd/segmentation.hpp"

namespace upd::pipeline {

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    const std::size_t nthreads = std::min<std::size_t>(workers, n);
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(run);
    for (std::thread& t : pool) t.join();
}

struct DetectRow {
    std::string image_id;
    int label = 0;
    double p_upd = 0.0;
    std::string error;  // non-empty marks a failed row
};

inline std::vector<DetectRow> run_detect(const SwinModel& model,
                                         std::span<const manifest::Row> rows, int workers) {
    std::vector<DetectRow> out(rows.size());
    parallel_for(rows.size(), workers, [&](std::size_t i) {
        DetectRow& row = out[i];
        row.image_id = rows[i].image_id;
        try {
            const ImageRaster image = pngio::read_image(rows[i].image_path);
            const swin::ForwardTrace trace = model.forward(image);
            row.label = trace.predicted;
            row.p_upd = trace.probs[1];
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    std::stable_sort(out.begin(), out.end(),
                     [](const DetectRow& a, const DetectRow& b) { return a.image_id < b.image_id; });
    return out;
}

// Any component mapping (image, model) -> ActivationMap can stand in for the
// default score-weighted explainer.
using ExplainerFn = std::function<ActivationMap(const ImageRaster&, const ClassifierModel&)>;

struct RankOptions {
    cam::ExplainerConfig explainer;
    ExplainerFn explainer_fn;       // empty -> cam::explain with the config above
    std::optional<std::size_t> min_pixels;  // default: 0.1% of image area
    int top_k = 4;
    bool force = false;             // rank images predicted clean as well
    std::string heatmap_dir;        // empty -> no heatmap PNGs
    std::optional<std::unordered_map<int, int>> remap;  // source-taxonomy id table
};

struct RankRow {
    std::string image_id;
    int label = 0;
    double p_upd = 0.0;
    bool skipped = false;  // predicted clean and not forced
    rank::FactorRanking ranking;
    std::string error;
};

inline std::vector<RankRow> run_rank(const SwinModel& model, std::span<const manifest::Row> rows,
                                     const RankOptions& opts, int workers) {
    std::vector<RankRow> out(rows.size());
    parallel_for(rows.size(), workers, [&](std::size_t i) {
        RankRow& row = out[i];
        row.image_id = rows[i].image_id;
        try {
            const ImageRaster image = pngio::read_image(rows[i].image_path);
            const swin::ForwardTrace trace = model.forward(image);
            row.label = trace.predicted;
            row.p_upd = trace.probs[1];
            if (row.label == 0 && !opts.force) {
                row.skipped = true;
                return;
            }
            if (rows[i].segmentation_path.empty())
                throw std::runtime_error("manifest row has no segmentation_path");
            const seg::SegmentationMap segmap =
                opts.remap ? seg::load_segmentation_remapped(rows[i].segmentation_path,
                                                             image.height, image.width, *opts.remap)
                           : seg::load_segmentation(rows[i].segmentation_path, image.height,
                                                    image.width);
            const ActivationMap heat = opts.explainer_fn
                                           ? opts.explainer_fn(image, model)
                                           : cam::explain(image, model, opts.explainer);
            const std::size_t min_px =
                opts.min_pixels ? *opts.min_pixels
                                : rank::default_min_pixels(image.height, image.width);
            row.ranking = rank::rank_factors(segmap, heat, min_px, rows[i].image_id);
            if (static_cast<int>(row.ranking.entries.size()) > opts.top_k)
                row.ranking.entries.resize(opts.top_k);
            if (!opts.heatmap_dir.empty()) {
                std::filesystem::create_directories(opts.heatmap_dir);
                pngio::write_heatmap(opts.heatmap_dir + "/" + rows[i].image_id + "_heat.png", heat);
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    std::stable_sort(out.begin(), out.end(),
                     [](const RankRow& a, const RankRow& b) { return a.image_id < b.image_id; });
    return out;
}

}  // namespace upd::pipeline
