#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "upd/png_io.hpp"
#include "upd/rng.hpp"
#include "upd/segmentation.hpp"
#include "upd/weights_io.hpp"

namespace fs = std::filesystem;
using namespace upd;

namespace {

std::string updx_bin() {
    const char* bin = std::getenv("UPDX_BIN");
    return bin ? bin : "";
}

int run(const std::string& args, const fs::path& dir) {
    const std::string cmd = updx_bin() + " " + args + " >" + (dir / "stdout.txt").string() +
                            " 2>" + (dir / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n' ? 1 : 0;
    return n;
}

struct Fixture {
    fs::path dir;

    Fixture() : dir(fs::temp_directory_path() / "upd_cli_test") {
        fs::remove_all(dir);
        fs::create_directories(dir);
        REQUIRE(run("init-weights --out " + weights() +
                        " --embed-dim 8 --heads 1,2,4,8 --depths 1,1,1,1 --window 2",
                    dir) == 0);
        make_images();
        make_manifest();
    }
    ~Fixture() { fs::remove_all(dir); }

    std::string weights() const { return (dir / "model.updw").string(); }
    std::string path(const std::string& name) const { return (dir / name).string(); }

    void make_images() {
        for (int i = 0; i < 3; ++i) {
            StreamRng rng(100 + i, "img");
            std::vector<double> pix(64 * 64 * 3);
            for (double& v : pix) v = rng.next_uniform();
            pngio::write_image(path("img" + std::to_string(i) + ".png"),
                               ImageRaster(64, 64, 3, pix));

            std::vector<std::uint8_t> ids(64 * 64, seg::kSky);
            for (int y = 40; y < 64; ++y)
                for (int x = 0; x < 64; ++x) ids[y * 64 + x] = seg::kRoad;
            for (int y = 10; y < 40; ++y)
                for (int x = 0; x < 24; ++x) ids[y * 64 + x] = seg::kBuilding;
            for (int y = 10; y < 40; ++y)
                for (int x = 40; x < 64; ++x) ids[y * 64 + x] = seg::kVegetation;
            seg::save_segmentation(path("seg" + std::to_string(i) + ".png"),
                                   seg::SegmentationMap(64, 64, ids));
        }
    }

    void make_manifest() {
        std::ofstream os(path("manifest.csv"));
        os << "image_path,segmentation_path,gt_ranking,lat,lon,morphology\n";
        for (int i = 0; i < 3; ++i)
            os << path("img" + std::to_string(i) + ".png") << ","
               << path("seg" + std::to_string(i) + ".png") << ",2;11;8;9,34.0" << i
               << ",-118.2,low\n";
    }
};

}  // namespace

TEST_CASE("cli end-to-end") {
    if (updx_bin().empty()) SKIP("UPDX_BIN not set");
    Fixture fx;

    SECTION("complexity prints both cost formulas") {
        REQUIRE(run("complexity --tokens-h 56 --tokens-w 56 --channels 96 --window 7", fx.dir) ==
                0);
        const std::string out = slurp(fx.dir / "stdout.txt");
        REQUIRE(out.find("msa_flops=2003828736") != std::string::npos);
        REQUIRE(out.find("wmsa_flops=145108992") != std::string::npos);
    }

    SECTION("detect is deterministic and worker-invariant") {
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.weights() + " --out " + fx.path("p1.csv"),
                    fx.dir) == 0);
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.weights() + " --out " + fx.path("p2.csv") + " --workers 4",
                    fx.dir) == 0);
        const std::string a = slurp(fx.path("p1.csv"));
        REQUIRE(a == slurp(fx.path("p2.csv")));
        REQUIRE(count_lines(a) == 4);  // header + 3 rows
        REQUIRE(a.rfind("image_id,label,p_upd,error\n", 0) == 0);
    }

    SECTION("an empty manifest yields a header-only csv and success") {
        {
            std::ofstream os(fx.path("empty.csv"));
            os << "image_path,segmentation_path,gt_ranking,lat,lon,morphology\n";
        }
        REQUIRE(run("detect --manifest " + fx.path("empty.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("pe.csv"),
                    fx.dir) == 0);
        REQUIRE(slurp(fx.path("pe.csv")) == "image_id,label,p_upd,error\n");
    }

    SECTION("a corrupt image produces an error row and a nonzero exit") {
        {
            std::ofstream os(fx.path("img_broken.png"));
            os << "not a png";
        }
        std::ofstream os(fx.path("broken.csv"));
        os << "image_path,segmentation_path,gt_ranking,lat,lon,morphology\n";
        os << fx.path("img0.png") << ",,,,,\n";
        os << fx.path("img_broken.png") << ",,,,,\n";
        os << fx.path("img1.png") << ",,,,,\n";
        os.close();
        REQUIRE(run("detect --manifest " + fx.path("broken.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("pb.csv"),
                    fx.dir) == 1);
        const std::string out = slurp(fx.path("pb.csv"));
        REQUIRE(count_lines(out) == 4);
        REQUIRE(out.find("img_broken") != std::string::npos);
        REQUIRE(out.find("failed to decode PNG") != std::string::npos);
    }

    SECTION("rank honors --top-k and is worker-invariant") {
        REQUIRE(run("rank --manifest " + fx.path("manifest.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("r1.csv") + " --force --top-k 1 --budget 4",
                    fx.dir) == 0);
        const std::string r1 = slurp(fx.path("r1.csv"));
        REQUIRE(count_lines(r1) == 4);  // header + one row per image
        REQUIRE(run("rank --manifest " + fx.path("manifest.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("r4.csv") + " --force --top-k 1 --budget 4" +
                        " --workers 4",
                    fx.dir) == 0);
        REQUIRE(r1 == slurp(fx.path("r4.csv")));
    }

    SECTION("rank without --force skips clean images or keeps them all") {
        REQUIRE(run("rank --manifest " + fx.path("manifest.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("rs.csv") + " --budget 4",
                    fx.dir) == 0);
        REQUIRE(run("rank --manifest " + fx.path("manifest.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("rf.csv") + " --budget 4 --force",
                    fx.dir) == 0);
        REQUIRE(count_lines(slurp(fx.path("rs.csv"))) <= count_lines(slurp(fx.path("rf.csv"))));
    }

    SECTION("missing segmentation is a per-row error") {
        std::ofstream os(fx.path("noseg.csv"));
        os << "image_path,segmentation_path,gt_ranking,lat,lon,morphology\n";
        os << fx.path("img0.png") << ",,,,,\n";
        os.close();
        REQUIRE(run("rank --manifest " + fx.path("noseg.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("rn.csv") + " --budget 4 --force",
                    fx.dir) == 1);
        REQUIRE(slurp(fx.dir / "stderr.txt").find("no segmentation_path") != std::string::npos);
    }

    SECTION("eval scores a copied ground truth at one") {
        {
            std::ofstream os(fx.path("copied.csv"));
            os << "image_id,rank,class_id,class_name,density,pixel_count\n";
            for (int i = 0; i < 3; ++i) {
                const std::string id = "img" + std::to_string(i);
                os << id << ",1,2,building,0.9,100\n";
                os << id << ",2,11,vegetation,0.8,100\n";
                os << id << ",3,8,road,0.7,100\n";
                os << id << ",4,9,sky,0.6,100\n";
            }
        }
        REQUIRE(run("eval --rankings " + fx.path("copied.csv") + " --manifest " +
                        fx.path("manifest.csv") + " --out " + fx.path("report"),
                    fx.dir) == 0);
        const std::string csv = slurp(fx.path("report.csv"));
        REQUIRE(csv.rfind("metric,top1,top2,top3,top4\n", 0) == 0);
        REQUIRE(csv.find("mAP,1,1,1,1") != std::string::npos);
        REQUIRE(csv.find("RPrec,1,1,1,1") != std::string::npos);
        REQUIRE(csv.find("NDCG,1,1,1,1") != std::string::npos);
        REQUIRE(slurp(fx.path("report.txt")).find("100.00%") != std::string::npos);
    }

    SECTION("dataset qscore and label pipeline") {
        {
            std::ofstream os(fx.path("comparisons.csv"));
            os << "left_id,right_id,attribute,outcome\n";
            const char* attrs[] = {"safe", "lively", "boring", "wealthy", "depressing",
                                   "beautiful"};
            for (const char* a : attrs)
                for (int i = 0; i < 4; ++i)
                    for (int j = i + 1; j < 4; ++j)
                        os << "img" << i << ",img" << j << "," << a << ","
                           << (std::string(a) == "boring" || std::string(a) == "depressing"
                                   ? "right"
                                   : "left")
                           << "\n";
        }
        REQUIRE(run("dataset qscore --comparisons " + fx.path("comparisons.csv") + " --out " +
                        fx.path("qscores.csv"),
                    fx.dir) == 0);
        const std::string qs = slurp(fx.path("qscores.csv"));
        REQUIRE(qs.rfind("image_id,attribute,wins,losses,ties,score\n", 0) == 0);
        REQUIRE(count_lines(qs) == 1 + 4 * 6);

        REQUIRE(run("dataset label --qscores " + fx.path("qscores.csv") + " --out " +
                        fx.path("labels.csv") + " --low-pct 50 --high-pct 50 --min-votes 0",
                    fx.dir) == 0);
        const std::string labels = slurp(fx.path("labels.csv"));
        REQUIRE(count_lines(labels) == 5);  // header + 4 images, all labeled
    }

    SECTION("train-head appends a usable head section") {
        {
            std::ofstream os(fx.path("train_labels.csv"));
            os << "image_id,label\n";
            os << "img0,1\nimg1,0\nimg2,1\n";
        }
        REQUIRE(run("train-head --manifest " + fx.path("manifest.csv") + " --labels " +
                        fx.path("train_labels.csv") + " --weights " + fx.weights() +
                        " --out-weights " + fx.path("trained.updw") + " --curve " +
                        fx.path("curve.csv") + " --epochs 3 --split-ratio 0.67",
                    fx.dir) == 0);
        REQUIRE(count_lines(slurp(fx.path("curve.csv"))) == 4);
        const swin::SwinWeights trained = weights::load(fx.path("trained.updw"));
        const swin::SwinWeights base = weights::load(fx.weights());
        REQUIRE(trained.patch_embed.w == base.patch_embed.w);
        REQUIRE(trained.head.w != base.head.w);
    }

    SECTION("map emits parseable geojson and an aggregate csv") {
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.weights() + " --out " + fx.path("preds.csv"),
                    fx.dir) == 0);
        REQUIRE(run("map --manifest " + fx.path("manifest.csv") + " --preds " +
                        fx.path("preds.csv") + " --out " + fx.path("map.geojson") +
                        " --aggregate " + fx.path("cells.csv") + " --cell 0.5",
                    fx.dir) == 0);
        const nlohmann::json fc = nlohmann::json::parse(slurp(fx.path("map.geojson")));
        REQUIRE(fc.at("type") == "FeatureCollection");
        REQUIRE(fc.at("features").size() == 3);
        const std::string cells = slurp(fx.path("cells.csv"));
        REQUIRE(cells.rfind("cell_lat,cell_lon,count,upd_rate\n", 0) == 0);
        REQUIRE(cells.find(",3,") != std::string::npos);  // all three share one cell
    }

    SECTION("stratify reports by manifest-supplied bins") {
        {
            std::ofstream os(fx.path("strat_labels.csv"));
            os << "image_id,label\nimg0,1\nimg1,0\nimg2,1\n";
        }
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.weights() + " --out " + fx.path("sp.csv"),
                    fx.dir) == 0);
        REQUIRE(run("stratify --manifest " + fx.path("manifest.csv") + " --preds " +
                        fx.path("sp.csv") + " --labels " + fx.path("strat_labels.csv") +
                        " --out " + fx.path("strat"),
                    fx.dir) == 0);
        const std::string det = slurp(fx.path("strat_detection.csv"));
        REQUIRE(det.find("low,3,") != std::string::npos);  // manifest pins every image to low
    }

    SECTION("rank writes heatmap PNGs on request") {
        REQUIRE(run("rank --manifest " + fx.path("manifest.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("rh.csv") + " --force --budget 4 --heatmap-dir " +
                        fx.path("heat"),
                    fx.dir) == 0);
        for (int i = 0; i < 3; ++i) {
            const auto png =
                pngio::read_gray8(fx.path("heat") + "/img" + std::to_string(i) + "_heat.png");
            REQUIRE(png.height == 64);
            REQUIRE(png.width == 64);
        }
    }

    SECTION("rank applies a class-id remap table") {
        {
            std::ofstream os(fx.path("remap.csv"));
            os << "11,12\n8,8\n2,2\n9,9\n";  // vegetation reported as wall
        }
        REQUIRE(run("rank --manifest " + fx.path("manifest.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("rr.csv") + " --force --budget 4 --seg-remap " +
                        fx.path("remap.csv"),
                    fx.dir) == 0);
        const std::string out = slurp(fx.path("rr.csv"));
        REQUIRE(out.find("wall") != std::string::npos);
        REQUIRE(out.find("vegetation") == std::string::npos);
    }

    SECTION("eval-detect joins predictions with labels") {
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.weights() + " --out " + fx.path("edp.csv"),
                    fx.dir) == 0);
        const std::string preds = slurp(fx.path("edp.csv"));
        {
            std::ofstream os(fx.path("ed_labels.csv"));
            os << "image_id,label\n";
            // Copy each predicted label so the metrics read exactly 1.0.
            std::istringstream is(preds);
            std::string line;
            std::getline(is, line);
            while (std::getline(is, line)) {
                const auto comma = line.find(',');
                os << line.substr(0, comma) << "," << line[comma + 1] << "\n";
            }
        }
        REQUIRE(run("eval-detect --preds " + fx.path("edp.csv") + " --labels " +
                        fx.path("ed_labels.csv") + " --out " + fx.path("edreport"),
                    fx.dir) == 0);
        const std::string report = slurp(fx.path("edreport.csv"));
        REQUIRE(report.rfind("n,accuracy,", 0) == 0);
        REQUIRE(report.find("3,1,") != std::string::npos);
    }

    SECTION("stratify falls back to segmentation-based bin estimation") {
        {
            std::ofstream os(fx.path("nomorph.csv"));
            os << "image_path,segmentation_path,gt_ranking,lat,lon,morphology\n";
            for (int i = 0; i < 3; ++i)
                os << fx.path("img" + std::to_string(i) + ".png") << ","
                   << fx.path("seg" + std::to_string(i) + ".png") << ",,,,\n";
        }
        {
            std::ofstream os(fx.path("sm_labels.csv"));
            os << "image_id,label\nimg0,1\nimg1,0\nimg2,1\n";
        }
        REQUIRE(run("detect --manifest " + fx.path("nomorph.csv") + " --weights " + fx.weights() +
                        " --out " + fx.path("smp.csv"),
                    fx.dir) == 0);
        REQUIRE(run("stratify --manifest " + fx.path("nomorph.csv") + " --preds " +
                        fx.path("smp.csv") + " --labels " + fx.path("sm_labels.csv") + " --out " +
                        fx.path("sm"),
                    fx.dir) == 0);
        // Fixture rasters: 30 px building runs over a 64 px road band -> low.
        REQUIRE(slurp(fx.path("sm_detection.csv")).find("low,3,") != std::string::npos);
    }

    SECTION("a config file supplies defaults that flags override") {
        {
            std::ofstream os(fx.path("updx.cfg"));
            os << "workers=4\n";
        }
        REQUIRE(run("detect --config " + fx.path("updx.cfg") + " --manifest " +
                        fx.path("manifest.csv") + " --weights " + fx.weights() + " --out " +
                        fx.path("cfg1.csv"),
                    fx.dir) == 0);
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.weights() + " --out " + fx.path("cfg2.csv") + " --workers 1",
                    fx.dir) == 0);
        REQUIRE(slurp(fx.path("cfg1.csv")) == slurp(fx.path("cfg2.csv")));
    }

    SECTION("selftest runs the oracle suites") {
        REQUIRE(run("selftest", fx.dir) == 0);
        const std::string out = slurp(fx.dir / "stdout.txt");
        REQUIRE(out.find("PASS window-attention-oracle") != std::string::npos);
        REQUIRE(out.find("PASS factor-ranking-oracle") != std::string::npos);
        REQUIRE(out.find("PASS complexity-identity") != std::string::npos);
        REQUIRE(out.find("PASS metric-collapse-at-1") != std::string::npos);
        REQUIRE(out.find("PASS qscore-extremes") != std::string::npos);
        REQUIRE(out.find("FAIL") == std::string::npos);
    }

    SECTION("usage errors exit with code 2") {
        REQUIRE(run("detect --manifest missing.csv", fx.dir) == 2);
        REQUIRE(run("nonsense-subcommand", fx.dir) == 2);
        REQUIRE(run("detect --manifest " + fx.path("manifest.csv") + " --weights " +
                        fx.path("absent.updw") + " --out " + fx.path("x.csv"),
                    fx.dir) == 2);
    }
}
