#pragma once

// Geospatial outputs for the case-study workflow: one GeoJSON Point feature
// per detection with its factor ranking, plus a simple lat/lon grid
// aggregation of disorder rates.

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "upd/raster.hpp"
#include "upd/segmentation.hpp"

namespace upd::geo {

struct StudyRecord {
    std::string image_id;
    double lat = 0.0;
    double lon = 0.0;
    bool upd = false;
    double p_upd = 0.0;
    std::vector<std::pair<int, double>> factors;  // (class id, density), best first
};

inline bool coordinates_valid(const StudyRecord& r) {
    return std::isfinite(r.lat) && std::isfinite(r.lon) && r.lat >= -90.0 && r.lat <= 90.0 &&
           r.lon >= -180.0 && r.lon <= 180.0;
}

struct GeoJsonResult {
    nlohmann::json collection;
    std::vector<std::string> rejected;  // image ids with out-of-range coordinates
};

// RFC 7946 FeatureCollection; coordinates are [lon, lat]. Input order is
// preserved; invalid records are dropped and reported.
inline GeoJsonResult emit_geojson(std::span<const StudyRecord> records, int top_k = 4) {
    require(top_k >= 1, "emit_geojson: top_k must be >= 1");
    GeoJsonResult result;
    result.collection = {{"type", "FeatureCollection"}, {"features", nlohmann::json::array()}};
    for (const StudyRecord& r : records) {
        if (!coordinates_valid(r) || !(r.p_upd >= 0.0 && r.p_upd <= 1.0)) {
            result.rejected.push_back(r.image_id);
            continue;
        }
        nlohmann::json factors = nlohmann::json::array();
        nlohmann::json densities = nlohmann::json::array();
        const std::size_t n = std::min<std::size_t>(r.factors.size(), top_k);
        for (std::size_t i = 0; i < n; ++i) {
            factors.push_back(seg::class_name(r.factors[i].first));
            densities.push_back(r.factors[i].second);
        }
        result.collection["features"].push_back(
            {{"type", "Feature"},
             {"geometry", {{"type", "Point"}, {"coordinates", {r.lon, r.lat}}}},
             {"properties",
              {{"image_id", r.image_id},
               {"upd", r.upd},
               {"p_upd", r.p_upd},
               {"factors", factors},
               {"densities", densities}}}});
    }
    return result;
}

struct GridCell {
    long lat_idx = 0;  // floor(lat / cell_size)
    long lon_idx = 0;
    std::size_t count = 0;
    std::size_t upd_count = 0;

    double rate() const { return count ? static_cast<double>(upd_count) / count : 0.0; }
};

inline std::vector<GridCell> grid_aggregate(std::span<const StudyRecord> records,
                                            double cell_size) {
    require(cell_size > 0.0, "grid_aggregate: cell size must be positive");
    std::map<std::pair<long, long>, GridCell> cells;
    for (const StudyRecord& r : records) {
        if (!coordinates_valid(r)) continue;
        const long li = static_cast<long>(std::floor(r.lat / cell_size));
        const long lo = static_cast<long>(std::floor(r.lon / cell_size));
        GridCell& c = cells[{li, lo}];
        c.lat_idx = li;
        c.lon_idx = lo;
        ++c.count;
        if (r.upd) ++c.upd_count;
    }
    std::vector<GridCell> out;
    out.reserve(cells.size());
    for (const auto& [key, cell] : cells) out.push_back(cell);
    return out;
}

}  // namespace upd::geo
