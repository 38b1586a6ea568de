#pragma once

// Gradient-free score-weighted explanation. Each selected channel of the
// final token grid is upsampled, normalized, and used to mask the input; the
// class-score change over a baseline image weights that channel's
// contribution to the evidence map.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <limits>
#include <optional>
#include <thread>
#include <vector>

#include "upd/linalg.hpp"
#include "upd/model.hpp"
#include "upd/raster.hpp"

namespace upd::cam {

struct ExplainerConfig {
    int target_class = 1;  // disorder class
    std::size_t channel_budget = std::numeric_limits<std::size_t>::max();  // all channels
    std::optional<ImageRaster> baseline;  // defaults to the zero image
    int workers = 1;

    void validate() const {
        require(target_class == 0 || target_class == 1, "ExplainerConfig: target class must be 0 or 1");
        require(channel_budget >= 1, "ExplainerConfig: channel_budget must be >= 1");
        require(workers >= 1, "ExplainerConfig: workers must be >= 1");
    }
};

// Top-budget channels by L2 activation norm, descending; ties broken by
// ascending channel index.
inline std::vector<int> select_channels(const FeatureGrid& grid, std::size_t budget) {
    require(budget >= 1, "select_channels: budget must be >= 1");
    std::vector<double> norm2(grid.dim, 0.0);
    for (std::size_t t = 0; t < grid.tokens(); ++t)
        for (int d = 0; d < grid.dim; ++d) {
            const double v = grid.data[t * grid.dim + d];
            norm2[d] += v * v;
        }
    std::vector<int> idx(grid.dim);
    for (int d = 0; d < grid.dim; ++d) idx[d] = d;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (norm2[a] != norm2[b]) return norm2[a] > norm2[b];
        return a < b;
    });
    if (idx.size() > budget) idx.resize(budget);
    return idx;
}

inline ActivationMap explain(const ImageRaster& image, const ClassifierModel& model,
                             const ExplainerConfig& cfg = {}) {
    cfg.validate();

    FeatureGrid grid = model.last_stage_grid(image);
    std::vector<int> selected = select_channels(grid, cfg.channel_budget);
    // Fixed ascending combination order so the result cannot depend on how
    // the per-channel work is scheduled.
    std::sort(selected.begin(), selected.end());
    const std::size_t q = selected.size();

    const ImageRaster& base =
        cfg.baseline ? *cfg.baseline : ImageRaster::zeros(image.height, image.width, image.channels);
    require(base.height == image.height && base.width == image.width,
            "explain: baseline dims must match the image");
    const double base_score = model.predict_probs(base)[cfg.target_class];

    std::vector<Plane> upsampled(q);
    std::vector<double> scores(q);

    auto score_channel = [&](std::size_t i) {
        upsampled[i] = bilinear_resize(grid.channel(selected[i]), image.height, image.width);
        ActivationMap mask = minmax_normalize(upsampled[i]);
        ImageRaster masked = image;
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) {
                const double m = mask.at(y, x);
                for (int c = 0; c < image.channels; ++c) masked.at(y, x, c) *= m;
            }
        scores[i] = model.predict_probs(masked)[cfg.target_class] - base_score;
    };

    if (cfg.workers == 1 || q == 1) {
        for (std::size_t i = 0; i < q; ++i) score_channel(i);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next.fetch_add(1); i < q; i = next.fetch_add(1)) score_channel(i);
        };
        std::vector<std::thread> pool;
        const std::size_t nthreads = std::min<std::size_t>(cfg.workers, q);
        pool.reserve(nthreads);
        for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    // Softmax weights over channel scores, then a fixed-order weighted sum.
    std::vector<double> weights = scores;
    linalg::softmax_inplace(std::span<double>(weights.data(), weights.size()));

    Plane combined(image.height, image.width, 0.0);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t p = 0; p < combined.values.size(); ++p)
            combined.values[p] += weights[i] * upsampled[i].values[p];
    for (double& v : combined.values) v = std::max(v, 0.0);
    return minmax_normalize(combined);
}

}  // namespace upd::cam
