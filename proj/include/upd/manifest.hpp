#pragma once

// Manifest CSV binding each image to its segmentation raster and optional
// ground truth: header row, columns image_path, segmentation_path,
// gt_ranking (semicolon-separated class ids, most contributing first), lat,
// lon, morphology (bin name or raw ratio). Only image_path is mandatory.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "upd/csvio.hpp"

namespace upd::manifest {

struct Row {
    std::string image_id;  // stem of image_path
    std::string image_path;
    std::string segmentation_path;
    std::vector<int> gt_ranking;
    std::optional<double> lat;
    std::optional<double> lon;
    std::string morphology;
};

inline std::vector<Row> load(const std::string& path) {
    const std::vector<std::vector<std::string>> rows = csv::read_file(path);
    require(!rows.empty(), "manifest: missing header row: " + path);

    const std::vector<std::string>& header = rows[0];
    auto column = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int c_image = column("image_path");
    const int c_seg = column("segmentation_path");
    const int c_gt = column("gt_ranking");
    const int c_lat = column("lat");
    const int c_lon = column("lon");
    const int c_morph = column("morphology");
    require(c_image >= 0, "manifest: header must contain image_path: " + path);

    auto field = [](const std::vector<std::string>& row, int idx) -> std::string {
        return idx >= 0 && idx < static_cast<int>(row.size()) ? row[idx] : std::string{};
    };

    std::vector<Row> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        Row m;
        m.image_path = field(rows[r], c_image);
        require(!m.image_path.empty(),
                "manifest: empty image_path in data row " + std::to_string(r));
        m.image_id = std::filesystem::path(m.image_path).stem().string();
        m.segmentation_path = field(rows[r], c_seg);
        const std::string gt = field(rows[r], c_gt);
        if (!gt.empty()) {
            std::size_t start = 0;
            while (start <= gt.size()) {
                const std::size_t sep = gt.find(';', start);
                const std::string tok = gt.substr(start, sep == std::string::npos ? sep : sep - start);
                if (!tok.empty()) m.gt_ranking.push_back(std::stoi(tok));
                if (sep == std::string::npos) break;
                start = sep + 1;
            }
        }
        const std::string lat = field(rows[r], c_lat);
        const std::string lon = field(rows[r], c_lon);
        if (!lat.empty()) m.lat = std::stod(lat);
        if (!lon.empty()) m.lon = std::stod(lon);
        m.morphology = field(rows[r], c_morph);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace upd::manifest
