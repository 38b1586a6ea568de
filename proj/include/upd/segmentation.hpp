#pragma once

// Fixed 12-class street-scene schema and ingestion of externally produced
// class-id rasters. Any segmenter can feed the pipeline as long as it exports
// this format; per-class binary masks are sliced on demand.

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "upd/png_io.hpp"
#include "upd/raster.hpp"

namespace upd::seg {

constexpr int kNumClasses = 12;
constexpr int kVoidClass = 0;

inline const char* class_name(int id) {
    static const char* names[] = {"void",   "sidewalk", "building", "vehicle",     "fence",
                                  "motorcycle", "person", "pole",     "road",        "sky",
                                  "traffic sign", "vegetation", "wall"};
    require(id >= 0 && id <= kNumClasses, "class_name: id out of range");
    return names[id];
}

inline std::optional<int> class_id(const std::string& name) {
    for (int i = 0; i <= kNumClasses; ++i)
        if (name == class_name(i)) return i;
    return std::nullopt;
}

constexpr int kSidewalk = 1;
constexpr int kBuilding = 2;
constexpr int kVehicle = 3;
constexpr int kFence = 4;
constexpr int kMotorcycle = 5;
constexpr int kPerson = 6;
constexpr int kPole = 7;
constexpr int kRoad = 8;
constexpr int kSky = 9;
constexpr int kTrafficSign = 10;
constexpr int kVegetation = 11;
constexpr int kWall = 12;

struct SegmentationMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;  // class ids 0..12

    SegmentationMap() = default;
    SegmentationMap(int h, int w, std::vector<std::uint8_t> d)
        : height(h), width(w), data(std::move(d)) {
        require(height >= 1 && width >= 1, "SegmentationMap: bad dimensions");
        require(data.size() == static_cast<std::size_t>(height) * width,
                "SegmentationMap: data length must be H*W");
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data[i] > kNumClasses)
                throw std::invalid_argument(
                    "SegmentationMap: unknown class id " + std::to_string(int(data[i])) +
                    " at pixel (" + std::to_string(i / width) + "," + std::to_string(i % width) + ")");
        }
    }

    int at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

// 8-bit single-channel PNG of class ids. Dimensions must match the companion
// image.
inline SegmentationMap load_segmentation(const std::string& path, int expected_h, int expected_w) {
    pngio::detail::Gray8 raw = pngio::read_gray8(path);
    if (raw.height != expected_h || raw.width != expected_w)
        throw std::runtime_error("segmentation dims " + std::to_string(raw.width) + "x" +
                                 std::to_string(raw.height) + " do not match image " +
                                 std::to_string(expected_w) + "x" + std::to_string(expected_h) +
                                 ": " + path);
    return SegmentationMap(raw.height, raw.width, std::move(raw.data));
}

inline void save_segmentation(const std::string& path, const SegmentationMap& map) {
    pngio::write_gray8(path, map.height, map.width, map.data);
}

struct ClassMask {
    std::vector<std::uint8_t> mask;  // 1 where the pixel belongs to the class
    std::size_t pixel_count = 0;
};

inline ClassMask class_mask(const SegmentationMap& map, int id) {
    require(id >= 1 && id <= kNumClasses, "class_mask: class id must be in 1..12");
    ClassMask out;
    out.mask.resize(map.data.size());
    for (std::size_t i = 0; i < map.data.size(); ++i) {
        const bool hit = map.data[i] == id;
        out.mask[i] = hit ? 1 : 0;
        out.pixel_count += hit ? 1 : 0;
    }
    return out;
}

// Source-taxonomy ids are rewritten through the table; anything unmapped
// becomes void. Takes raw bytes because source rasters may use ids outside
// the schema.
inline SegmentationMap apply_remap(int height, int width, const std::vector<std::uint8_t>& raw,
                                   const std::unordered_map<int, int>& table) {
    for (const auto& [from, to] : table)
        require(to >= 0 && to <= kNumClasses, "apply_remap: target id out of range");
    std::vector<std::uint8_t> out(raw.size(), kVoidClass);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto it = table.find(raw[i]);
        if (it != table.end()) out[i] = static_cast<std::uint8_t>(it->second);
    }
    return SegmentationMap(height, width, std::move(out));
}

inline SegmentationMap load_segmentation_remapped(const std::string& path, int expected_h,
                                                  int expected_w,
                                                  const std::unordered_map<int, int>& table) {
    pngio::detail::Gray8 raw = pngio::read_gray8(path);
    if (raw.height != expected_h || raw.width != expected_w)
        throw std::runtime_error("segmentation dims do not match image: " + path);
    return apply_remap(raw.height, raw.width, raw.data, table);
}

// Remap table file: one "source_id,target_id" pair per line, '#' comments.
inline std::unordered_map<int, int> load_remap_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open remap table: " + path);
    std::unordered_map<int, int> table;
    std::string line;
    while (std::getline(is, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::size_t comma = line.find(',');
        require(comma != std::string::npos, "remap table: expected 'source,target': " + line);
        table[std::stoi(line.substr(0, comma))] = std::stoi(line.substr(comma + 1));
    }
    return table;
}

}  // namespace upd::seg
