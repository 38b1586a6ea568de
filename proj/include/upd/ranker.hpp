#pragma once

// Per-object activation density and the descending sort that produces the
// disorder-factor ranking: density_i = sum of activation over class-i pixels
// divided by that class's pixel count.

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "upd/raster.hpp"
#include "upd/segmentation.hpp"

namespace upd::rank {

struct FactorEntry {
    int class_id = 0;
    double density = 0.0;
    std::size_t pixel_count = 0;
};

struct FactorRanking {
    std::string image_id;
    std::vector<FactorEntry> entries;  // density descending, ties by class id
    bool no_qualifying_class = false;
};

// Default minimum region size: 0.1% of the image area. Suppresses
// segmentation speckle; pass 0 to rank every present class.
inline std::size_t default_min_pixels(int height, int width) {
    return static_cast<std::size_t>(height) * width / 1000;
}

inline FactorRanking rank_factors(const seg::SegmentationMap& segmap, const ActivationMap& act,
                                  std::size_t min_pixels, std::string image_id = {}) {
    require(segmap.height == act.height && segmap.width == act.width,
            "rank_factors: segmentation and activation dims must match");

    std::array<double, seg::kNumClasses + 1> sums{};
    std::array<std::size_t, seg::kNumClasses + 1> counts{};
    for (std::size_t i = 0; i < segmap.data.size(); ++i) {
        const int id = segmap.data[i];
        sums[id] += act.data[i];
        ++counts[id];
    }

    FactorRanking out;
    out.image_id = std::move(image_id);
    for (int id = 1; id <= seg::kNumClasses; ++id) {
        if (counts[id] == 0 || counts[id] < min_pixels) continue;
        out.entries.push_back({id, sums[id] / static_cast<double>(counts[id]), counts[id]});
    }
    std::sort(out.entries.begin(), out.entries.end(), [](const FactorEntry& a, const FactorEntry& b) {
        if (a.density != b.density) return a.density > b.density;
        return a.class_id < b.class_id;
    });
    out.no_qualifying_class = out.entries.empty();
    return out;
}

}  // namespace upd::rank
