#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "upd/pipeline.hpp"
#include "upd/rng.hpp"

using namespace upd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "upd_pipeline_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

swin::SwinConfig small_config() {
    swin::SwinConfig cfg;
    cfg.embed_dim = 8;
    cfg.num_heads = {1, 2, 4, 8};
    cfg.window_size = 2;
    cfg.depths = {1, 1, 1, 1};
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("a custom explainer backend slots into the ranking pipeline") {
    TempDir dir;
    StreamRng rng(3, "img");
    std::vector<double> pix(64 * 64 * 3);
    for (double& v : pix) v = rng.next_uniform();
    pngio::write_image((dir.path / "img.png").string(), ImageRaster(64, 64, 3, pix));

    // Left half building, right half road.
    std::vector<std::uint8_t> ids(64 * 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) ids[y * 64 + x] = x < 32 ? seg::kBuilding : seg::kRoad;
    seg::save_segmentation((dir.path / "seg.png").string(), seg::SegmentationMap(64, 64, ids));

    manifest::Row row;
    row.image_id = "img";
    row.image_path = (dir.path / "img.png").string();
    row.segmentation_path = (dir.path / "seg.png").string();
    std::vector<manifest::Row> rows{row};

    const SwinModel model(swin::SwinWeights::init(small_config()));

    // Backend that always blames the right half of the frame.
    pipeline::RankOptions opts;
    opts.force = true;
    opts.explainer_fn = [](const ImageRaster& image, const ClassifierModel&) {
        std::vector<double> v(static_cast<std::size_t>(image.height) * image.width, 0.0);
        for (int y = 0; y < image.height; ++y)
            for (int x = image.width / 2; x < image.width; ++x)
                v[static_cast<std::size_t>(y) * image.width + x] = 1.0;
        return ActivationMap(image.height, image.width, std::move(v));
    };

    const auto results = pipeline::run_rank(model, rows, opts, 1);
    REQUIRE(results.size() == 1);
    REQUIRE(results[0].error.empty());
    REQUIRE(!results[0].skipped);
    REQUIRE(results[0].ranking.entries.size() == 2);
    REQUIRE(results[0].ranking.entries[0].class_id == seg::kRoad);
    REQUIRE(results[0].ranking.entries[0].density == 1.0);
    REQUIRE(results[0].ranking.entries[1].class_id == seg::kBuilding);
    REQUIRE(results[0].ranking.entries[1].density == 0.0);
}

TEST_CASE("detect pipeline reports unreadable images per row") {
    TempDir dir;
    StreamRng rng(4, "img");
    std::vector<double> pix(64 * 64 * 3);
    for (double& v : pix) v = rng.next_uniform();
    pngio::write_image((dir.path / "good.png").string(), ImageRaster(64, 64, 3, pix));

    manifest::Row good, missing;
    good.image_id = "good";
    good.image_path = (dir.path / "good.png").string();
    missing.image_id = "missing";
    missing.image_path = (dir.path / "missing.png").string();
    std::vector<manifest::Row> rows{missing, good};

    const SwinModel model(swin::SwinWeights::init(small_config()));
    const auto results = pipeline::run_detect(model, rows, 2);
    REQUIRE(results.size() == 2);
    REQUIRE(results[0].image_id == "good");  // stable sort by image id
    REQUIRE(results[0].error.empty());
    REQUIRE(results[0].p_upd >= 0.0);
    REQUIRE(results[0].p_upd <= 1.0);
    REQUIRE(results[1].image_id == "missing");
    REQUIRE(!results[1].error.empty());
}
