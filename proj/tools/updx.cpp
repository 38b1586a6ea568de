// updx: street-view disorder detection, explanation, and ranking pipeline.
//
// Subcommands cover the full workflow: weight initialization, batch
// detection, factor ranking with heatmaps, dataset construction from
// pairwise comparisons, head training, evaluation reports, morphology
// stratification, geospatial export, attention-cost accounting, and the
// built-in oracle self-test.
//
// Exit codes: 0 success, 1 per-item failures occurred, 2 configuration or
// usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "upd/csvio.hpp"
#include "upd/geojson.hpp"
#include "upd/manifest.hpp"
#include "upd/metrics.hpp"
#include "upd/model.hpp"
#include "upd/morphology.hpp"
#include "upd/pipeline.hpp"
#include "upd/qscore.hpp"
#include "upd/ranker.hpp"
#include "upd/selfcheck.hpp"
#include "upd/trainer.hpp"
#include "upd/weights_io.hpp"

namespace {

using upd::csv::format_double;

constexpr int kExitOk = 0;
constexpr int kExitItemFailures = 1;
constexpr int kExitUsage = 2;

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t comma = s.find(',', start);
        const std::string tok = s.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!tok.empty()) out.push_back(std::stoi(tok));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

upd::swin::SwinConfig config_from_flags(const std::string& depths, const std::string& heads,
                                        int patch, int embed_dim, int window, double mlp_ratio,
                                        std::uint64_t seed) {
    upd::swin::SwinConfig cfg;
    cfg.patch_size = patch;
    cfg.embed_dim = embed_dim;
    cfg.window_size = window;
    cfg.mlp_ratio = mlp_ratio;
    cfg.seed = seed;
    const std::vector<int> d = parse_int_list(depths);
    const std::vector<int> h = parse_int_list(heads);
    if (d.size() != 4 || h.size() != 4)
        throw CLI::ValidationError("--depths and --heads need exactly 4 comma-separated values");
    std::copy(d.begin(), d.end(), cfg.depths.begin());
    std::copy(h.begin(), h.end(), cfg.num_heads.begin());
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// CSV readers for intermediate products
// ---------------------------------------------------------------------------

struct PredRow {
    int label = 0;
    double p_upd = 0.0;
};

std::map<std::string, PredRow> read_predictions(const std::string& path) {
    const auto rows = upd::csv::read_file(path);
    upd::require(!rows.empty() && rows[0].size() >= 3 && rows[0][0] == "image_id",
                 "predictions CSV: unexpected header: " + path);
    std::map<std::string, PredRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() < 3 || rows[i][1].empty()) continue;  // error rows carry no label
        out[rows[i][0]] = {std::stoi(rows[i][1]), std::stod(rows[i][2])};
    }
    return out;
}

std::map<std::string, int> read_labels(const std::string& path) {
    const auto rows = upd::csv::read_file(path);
    upd::require(!rows.empty() && rows[0].size() >= 2 && rows[0][0] == "image_id",
                 "labels CSV: unexpected header: " + path);
    std::map<std::string, int> out;
    for (std::size_t i = 1; i < rows.size(); ++i) out[rows[i][0]] = std::stoi(rows[i][1]);
    return out;
}

// image_id -> predicted class ids ordered by rank.
std::map<std::string, std::vector<int>> read_rankings(const std::string& path) {
    const auto rows = upd::csv::read_file(path);
    upd::require(!rows.empty() && rows[0].size() >= 3 && rows[0][0] == "image_id" &&
                     rows[0][1] == "rank",
                 "rankings CSV: unexpected header: " + path);
    std::map<std::string, std::vector<std::pair<int, int>>> tmp;
    for (std::size_t i = 1; i < rows.size(); ++i)
        tmp[rows[i][0]].push_back({std::stoi(rows[i][1]), std::stoi(rows[i][2])});
    std::map<std::string, std::vector<int>> out;
    for (auto& [id, entries] : tmp) {
        std::sort(entries.begin(), entries.end());
        for (const auto& [r, cls] : entries) out[id].push_back(cls);
    }
    return out;
}

std::array<std::vector<upd::dataset::QScore>, upd::dataset::kNumAttributes> read_qscores(
    const std::string& path) {
    const auto rows = upd::csv::read_file(path);
    upd::require(!rows.empty() && rows[0].size() >= 6 && rows[0][0] == "image_id",
                 "qscores CSV: unexpected header: " + path);
    std::array<std::vector<upd::dataset::QScore>, upd::dataset::kNumAttributes> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto attr = upd::dataset::attribute_from_name(rows[i][1]);
        upd::require(attr.has_value(), "qscores CSV: unknown attribute: " + rows[i][1]);
        upd::dataset::QScore q;
        q.image_id = rows[i][0];
        q.attribute = *attr;
        q.wins = std::stoul(rows[i][2]);
        q.losses = std::stoul(rows[i][3]);
        q.ties = std::stoul(rows[i][4]);
        q.score = std::stod(rows[i][5]);
        out[static_cast<int>(*attr)].push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
    return buf;
}

void write_rank_report(const std::string& out_prefix,
                       const std::vector<upd::metrics::RankingJudgment>& judgments, int k_max) {
    upd::csv::Writer csv_out([&] {
        std::vector<std::string> h{"metric"};
        for (int k = 1; k <= k_max; ++k) h.push_back("top" + std::to_string(k));
        return h;
    }());
    std::vector<upd::metrics::RankMetrics> at_k;
    for (int k = 1; k <= k_max; ++k) at_k.push_back(upd::metrics::rank_metrics_at_k(judgments, k));

    const char* names[] = {"mAP", "RPrec", "NDCG"};
    for (int m = 0; m < 3; ++m) {
        std::vector<std::string> row{names[m]};
        for (const auto& rm : at_k)
            row.push_back(format_double(m == 0 ? rm.map : m == 1 ? rm.rprec : rm.ndcg));
        csv_out.add_row(row);
    }
    csv_out.write(out_prefix + ".csv");

    std::string text = "Metrics";
    for (int k = 1; k <= k_max; ++k) text += "\tTop@" + std::to_string(k);
    text += '\n';
    for (int m = 0; m < 3; ++m) {
        text += names[m];
        for (const auto& rm : at_k)
            text += '\t' + percent(m == 0 ? rm.map : m == 1 ? rm.rprec : rm.ndcg);
        text += '\n';
    }
    upd::csv::atomic_write(out_prefix + ".txt", text);
    std::cout << text;
}

void write_detect_report(const std::string& out_prefix, const upd::metrics::DetectionMetrics& m,
                         std::size_t n) {
    upd::csv::Writer csv_out({"n", "accuracy", "recall", "precision", "f1",
                              "precision_undefined", "tp", "fp", "fn", "tn"});
    csv_out.add_row({std::to_string(n), format_double(m.accuracy), format_double(m.recall),
                     format_double(m.precision), format_double(m.f1),
                     m.precision_undefined ? "1" : "0", std::to_string(m.tp), std::to_string(m.fp),
                     std::to_string(m.fn), std::to_string(m.tn)});
    csv_out.write(out_prefix + ".csv");

    std::string text = "n\tAccuracy\tRecall\tPrecision\tF1\n" + std::to_string(n) + '\t' +
                       percent(m.accuracy) + '\t' + percent(m.recall) + '\t' +
                       percent(m.precision) + (m.precision_undefined ? "*" : "") + '\t' +
                       percent(m.f1) + '\n';
    if (m.precision_undefined) text += "* no predicted positives; precision reported as 0\n";
    upd::csv::atomic_write(out_prefix + ".txt", text);
    std::cout << text;
}

std::vector<upd::metrics::RankingJudgment> build_judgments(
    const std::map<std::string, std::vector<int>>& predicted,
    std::span<const upd::manifest::Row> manifest_rows) {
    std::vector<upd::metrics::RankingJudgment> out;
    for (const auto& row : manifest_rows) {
        if (row.gt_ranking.empty()) continue;
        auto it = predicted.find(row.image_id);
        if (it == predicted.end()) continue;
        out.push_back({it->second, row.gt_ranking});
    }
    upd::require(!out.empty(), "no manifest rows with ground-truth rankings match the predictions");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"street-view physical disorder detection and factor ranking"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.set_config("--config")->description("flat key=value config file; flags override it");

    std::uint64_t seed = 0;
    int workers = 1;
    app.add_option("--seed", seed, "global RNG seed")->envname("UPDX_SEED");
    app.add_option("--workers", workers, "worker threads for batch stages")
        ->envname("UPDX_WORKERS")
        ->check(CLI::PositiveNumber);

    // Shared model/config flags.
    std::string depths = "2,2,2,2", heads = "2,4,8,16";
    int patch = 4, embed_dim = 32, window = 7;
    double mlp_ratio = 4.0;

    // ---- init-weights ----
    auto* cmd_init = app.add_subcommand("init-weights", "create a deterministic weight file");
    std::string init_out;
    cmd_init->add_option("--out", init_out, "output weight file")->required();
    cmd_init->add_option("--patch", patch, "patch size");
    cmd_init->add_option("--embed-dim", embed_dim, "embedding dim C");
    cmd_init->add_option("--depths", depths, "blocks per stage, 4 comma-separated");
    cmd_init->add_option("--heads", heads, "heads per stage, 4 comma-separated");
    cmd_init->add_option("--window", window, "attention window M");
    cmd_init->add_option("--mlp-ratio", mlp_ratio, "MLP expansion factor");

    // ---- detect ----
    auto* cmd_detect = app.add_subcommand("detect", "classify manifest images");
    std::string det_manifest, det_weights, det_out;
    cmd_detect->add_option("--manifest", det_manifest)->required();
    cmd_detect->add_option("--weights", det_weights)->required();
    cmd_detect->add_option("--out", det_out, "predictions CSV")->required();

    // ---- rank ----
    auto* cmd_rank = app.add_subcommand("rank", "explain detections and rank disorder factors");
    std::string rank_manifest, rank_weights, rank_out, rank_heatmap_dir, rank_remap;
    int rank_top_k = 4;
    long long rank_min_pixels = -1;
    std::size_t rank_budget = 0;
    int rank_target = 1;
    bool rank_force = false;
    cmd_rank->add_option("--manifest", rank_manifest)->required();
    cmd_rank->add_option("--weights", rank_weights)->required();
    cmd_rank->add_option("--out", rank_out, "rankings CSV")->required();
    cmd_rank->add_option("--heatmap-dir", rank_heatmap_dir, "write per-image heatmap PNGs here");
    cmd_rank->add_option("--top-k", rank_top_k, "keep at most k factors per image");
    cmd_rank->add_option("--min-pixels", rank_min_pixels,
                         "minimum region size; -1 = 0.1% of image area");
    cmd_rank->add_option("--budget", rank_budget, "channels scored by the explainer; 0 = all");
    cmd_rank->add_option("--target", rank_target, "explained class (default 1 = disorder)");
    cmd_rank->add_option("--seg-remap", rank_remap, "source,target class-id remap table");
    cmd_rank->add_flag("--force", rank_force, "rank images predicted clean as well");

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "ranking metrics against ground truth");
    std::string eval_rankings, eval_manifest, eval_out;
    int eval_kmax = 4;
    cmd_eval->add_option("--rankings", eval_rankings)->required();
    cmd_eval->add_option("--manifest", eval_manifest, "manifest with gt_ranking column")->required();
    cmd_eval->add_option("--out", eval_out, "report prefix (.csv/.txt)")->required();
    cmd_eval->add_option("--k-max", eval_kmax)->check(CLI::Range(1, 12));

    // ---- eval-detect ----
    auto* cmd_evdet = app.add_subcommand("eval-detect", "detection metrics against labels");
    std::string evdet_preds, evdet_labels, evdet_out;
    cmd_evdet->add_option("--preds", evdet_preds, "predictions CSV from detect")->required();
    cmd_evdet->add_option("--labels", evdet_labels, "labels CSV (image_id,label)")->required();
    cmd_evdet->add_option("--out", evdet_out, "report prefix (.csv/.txt)")->required();

    // ---- dataset ----
    auto* cmd_dataset = app.add_subcommand("dataset", "perception dataset construction");
    cmd_dataset->require_subcommand(1);
    auto* cmd_qscore = cmd_dataset->add_subcommand("qscore", "Q scores from pairwise comparisons");
    std::string qs_comparisons, qs_out, qs_attribute = "all";
    cmd_qscore->add_option("--comparisons", qs_comparisons,
                           "CSV: left_id,right_id,attribute,outcome")->required();
    cmd_qscore->add_option("--out", qs_out, "qscores CSV")->required();
    cmd_qscore->add_option("--attribute", qs_attribute, "single attribute or 'all'");

    auto* cmd_label = cmd_dataset->add_subcommand("label", "percentile labels from Q scores");
    std::string lb_qscores, lb_out;
    double lb_low = 5.0, lb_high = 95.0;
    std::size_t lb_min_votes = 100;
    cmd_label->add_option("--qscores", lb_qscores)->required();
    cmd_label->add_option("--out", lb_out, "labels CSV")->required();
    cmd_label->add_option("--low-pct", lb_low, "disorder percentile threshold");
    cmd_label->add_option("--high-pct", lb_high, "non-disorder percentile threshold");
    cmd_label->add_option("--min-votes", lb_min_votes, "keep images rated strictly more often");

    // ---- train-head ----
    auto* cmd_train = app.add_subcommand("train-head", "train the linear head on frozen features");
    std::string tr_manifest, tr_labels, tr_weights, tr_out_weights, tr_curve;
    upd::train::TrainConfig tr_cfg;
    cmd_train->add_option("--manifest", tr_manifest)->required();
    cmd_train->add_option("--labels", tr_labels, "labels CSV (image_id,label)")->required();
    cmd_train->add_option("--weights", tr_weights, "input weight file")->required();
    cmd_train->add_option("--out-weights", tr_out_weights, "weight file with trained head")
        ->required();
    cmd_train->add_option("--curve", tr_curve, "loss curve CSV");
    cmd_train->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    cmd_train->add_option("--epochs", tr_cfg.epochs);
    cmd_train->add_option("--batch-size", tr_cfg.batch_size);
    cmd_train->add_option("--split-ratio", tr_cfg.split_ratio, "train fraction");

    // ---- stratify ----
    auto* cmd_strat = app.add_subcommand("stratify", "per-morphology-bin reports");
    std::string st_manifest, st_preds, st_labels, st_rankings, st_out;
    int st_kmax = 4;
    cmd_strat->add_option("--manifest", st_manifest)->required();
    cmd_strat->add_option("--preds", st_preds, "predictions CSV (with --labels)");
    cmd_strat->add_option("--labels", st_labels, "labels CSV (with --preds)");
    cmd_strat->add_option("--rankings", st_rankings, "rankings CSV for per-bin mAP");
    cmd_strat->add_option("--out", st_out, "report prefix")->required();
    cmd_strat->add_option("--k-max", st_kmax)->check(CLI::Range(1, 12));

    // ---- map ----
    auto* cmd_map = app.add_subcommand("map", "GeoJSON export of detections and factors");
    std::string mp_manifest, mp_preds, mp_rankings, mp_out, mp_aggregate;
    double mp_cell = 0.01;
    int mp_top_k = 4;
    cmd_map->add_option("--manifest", mp_manifest, "manifest with lat/lon columns")->required();
    cmd_map->add_option("--preds", mp_preds, "predictions CSV")->required();
    cmd_map->add_option("--rankings", mp_rankings, "rankings CSV for factor properties");
    cmd_map->add_option("--out", mp_out, "GeoJSON output")->required();
    cmd_map->add_option("--aggregate", mp_aggregate, "per-cell disorder-rate CSV");
    cmd_map->add_option("--cell", mp_cell, "aggregation cell size in degrees");
    cmd_map->add_option("--top-k", mp_top_k, "factors kept per feature");

    // ---- complexity ----
    auto* cmd_cx = app.add_subcommand("complexity", "attention cost for an h x w token grid");
    std::uint64_t cx_h = 0, cx_w = 0, cx_c = 0, cx_m = 7;
    cmd_cx->add_option("--tokens-h", cx_h, "grid height in tokens")->required();
    cmd_cx->add_option("--tokens-w", cx_w, "grid width in tokens")->required();
    cmd_cx->add_option("--channels", cx_c, "channel count C")->required();
    cmd_cx->add_option("--window", cx_m, "window size M");

    // ---- selftest ----
    auto* cmd_selftest = app.add_subcommand("selftest", "run the built-in oracle suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*cmd_init) {
            const upd::swin::SwinConfig cfg =
                config_from_flags(depths, heads, patch, embed_dim, window, mlp_ratio, seed);
            upd::weights::save(init_out, upd::swin::SwinWeights::init(cfg));
            std::cout << "wrote " << init_out << "\n";
            return kExitOk;
        }

        if (*cmd_detect) {
            const upd::SwinModel model(upd::weights::load(det_weights));
            const auto rows = upd::manifest::load(det_manifest);
            const auto results = upd::pipeline::run_detect(model, rows, workers);
            upd::csv::Writer out({"image_id", "label", "p_upd", "error"});
            bool failures = false;
            for (const auto& r : results) {
                if (r.error.empty()) {
                    out.add_row({r.image_id, std::to_string(r.label), format_double(r.p_upd), ""});
                } else {
                    out.add_row({r.image_id, "", "", r.error});
                    failures = true;
                }
            }
            out.write(det_out);
            return failures ? kExitItemFailures : kExitOk;
        }

        if (*cmd_rank) {
            const upd::SwinModel model(upd::weights::load(rank_weights));
            const auto rows = upd::manifest::load(rank_manifest);
            upd::pipeline::RankOptions opts;
            opts.explainer.target_class = rank_target;
            if (rank_budget > 0) opts.explainer.channel_budget = rank_budget;
            opts.explainer.workers = 1;  // parallelism lives at the image level
            if (rank_min_pixels >= 0) opts.min_pixels = static_cast<std::size_t>(rank_min_pixels);
            opts.top_k = rank_top_k;
            opts.force = rank_force;
            opts.heatmap_dir = rank_heatmap_dir;
            if (!rank_remap.empty()) opts.remap = upd::seg::load_remap_table(rank_remap);
            const auto results = upd::pipeline::run_rank(model, rows, opts, workers);
            upd::csv::Writer out(
                {"image_id", "rank", "class_id", "class_name", "density", "pixel_count"});
            bool failures = false;
            for (const auto& r : results) {
                if (!r.error.empty()) {
                    std::cerr << "error: " << r.image_id << ": " << r.error << "\n";
                    failures = true;
                    continue;
                }
                if (r.skipped) continue;
                int position = 1;
                for (const auto& e : r.ranking.entries)
                    out.add_row({r.image_id, std::to_string(position++),
                                 std::to_string(e.class_id), upd::seg::class_name(e.class_id),
                                 format_double(e.density), std::to_string(e.pixel_count)});
            }
            out.write(rank_out);
            return failures ? kExitItemFailures : kExitOk;
        }

        if (*cmd_eval) {
            const auto predicted = read_rankings(eval_rankings);
            const auto rows = upd::manifest::load(eval_manifest);
            write_rank_report(eval_out, build_judgments(predicted, rows), eval_kmax);
            return kExitOk;
        }

        if (*cmd_evdet) {
            const auto preds = read_predictions(evdet_preds);
            const auto labels = read_labels(evdet_labels);
            std::vector<int> p, l;
            for (const auto& [id, pred] : preds) {
                auto it = labels.find(id);
                if (it == labels.end()) continue;
                p.push_back(pred.label);
                l.push_back(it->second);
            }
            upd::require(!p.empty(), "no predictions match the label file");
            write_detect_report(evdet_out, upd::metrics::detection_metrics(p, l), p.size());
            return kExitOk;
        }

        if (*cmd_qscore) {
            const auto rows = upd::csv::read_file(qs_comparisons);
            upd::require(!rows.empty() && rows[0].size() >= 4,
                         "comparisons CSV: expected header left_id,right_id,attribute,outcome");
            std::vector<upd::dataset::ComparisonRecord> records;
            for (std::size_t i = 1; i < rows.size(); ++i) {
                const auto attr = upd::dataset::attribute_from_name(rows[i][2]);
                upd::require(attr.has_value(), "comparisons CSV: unknown attribute: " + rows[i][2]);
                upd::dataset::Outcome outcome;
                if (rows[i][3] == "left") outcome = upd::dataset::Outcome::left;
                else if (rows[i][3] == "right") outcome = upd::dataset::Outcome::right;
                else if (rows[i][3] == "tie") outcome = upd::dataset::Outcome::tie;
                else throw std::runtime_error("comparisons CSV: unknown outcome: " + rows[i][3]);
                records.push_back({rows[i][0], rows[i][1], *attr, outcome});
            }
            upd::csv::Writer out({"image_id", "attribute", "wins", "losses", "ties", "score"});
            for (int a = 0; a < upd::dataset::kNumAttributes; ++a) {
                const auto attr = static_cast<upd::dataset::Attribute>(a);
                if (qs_attribute != "all" && qs_attribute != upd::dataset::attribute_name(attr))
                    continue;
                const bool any = std::any_of(records.begin(), records.end(),
                                             [&](const auto& r) { return r.attribute == attr; });
                if (!any) continue;
                for (const auto& q : upd::dataset::compute_q_scores(records, attr))
                    out.add_row({q.image_id, upd::dataset::attribute_name(attr),
                                 std::to_string(q.wins), std::to_string(q.losses),
                                 std::to_string(q.ties), format_double(q.score)});
            }
            out.write(qs_out);
            return kExitOk;
        }

        if (*cmd_label) {
            const auto per_attribute = read_qscores(lb_qscores);
            upd::dataset::LabelConfig cfg;
            cfg.low_pct = lb_low;
            cfg.high_pct = lb_high;
            cfg.min_votes = lb_min_votes;
            const auto result = upd::dataset::label_dataset(per_attribute, cfg);
            upd::csv::Writer out({"image_id", "label", "combined_score", "q_safe", "q_lively",
                                  "q_boring", "q_wealthy", "q_depressing", "q_beautiful"});
            for (const auto& img : result.labeled) {
                std::vector<std::string> row{img.image_id, std::to_string(img.label),
                                             format_double(img.combined)};
                for (double q : img.attribute_scores) row.push_back(format_double(q));
                out.add_row(row);
            }
            out.write(lb_out);
            std::cerr << result.labeled.size() << " labeled, " << result.unlabeled.size()
                      << " unlabeled, " << result.excluded.size() << " excluded\n";
            return kExitOk;
        }

        if (*cmd_train) {
            const upd::swin::SwinWeights base = upd::weights::load(tr_weights);
            const upd::SwinModel model(base);
            const auto rows = upd::manifest::load(tr_manifest);
            const auto labels = read_labels(tr_labels);
            std::vector<const upd::manifest::Row*> labeled_rows;
            for (const auto& row : rows)
                if (labels.count(row.image_id)) labeled_rows.push_back(&row);
            upd::require(!labeled_rows.empty(), "no manifest rows match the label file");

            std::vector<upd::train::LabeledFeature> features(labeled_rows.size());
            upd::pipeline::parallel_for(labeled_rows.size(), workers, [&](std::size_t i) {
                const upd::ImageRaster image = upd::pngio::read_image(labeled_rows[i]->image_path);
                features[i].feature = model.forward(image).pooled;
                features[i].label = labels.at(labeled_rows[i]->image_id);
            });

            tr_cfg.seed = seed;
            const upd::train::TrainResult result = upd::train::train_head(features, tr_cfg);
            upd::weights::append_head_section(tr_weights, tr_out_weights, result.head);
            if (!tr_curve.empty()) {
                upd::csv::Writer curve({"epoch", "train_loss", "val_loss", "val_accuracy"});
                for (std::size_t e = 0; e < result.train_loss.size(); ++e)
                    curve.add_row({std::to_string(e + 1), format_double(result.train_loss[e]),
                                   format_double(result.val_loss[e]),
                                   format_double(result.val_accuracy[e])});
                curve.write(tr_curve);
            }
            std::cout << "final train loss " << format_double(result.train_loss.back())
                      << ", val accuracy " << format_double(result.val_accuracy.back()) << "\n";
            return kExitOk;
        }

        if (*cmd_strat) {
            const auto rows = upd::manifest::load(st_manifest);
            const bool want_detect = !st_preds.empty() && !st_labels.empty();
            const bool want_rank = !st_rankings.empty();
            upd::require(want_detect || want_rank,
                         "stratify needs --preds with --labels, or --rankings");
            std::map<std::string, PredRow> preds;
            std::map<std::string, int> labels;
            std::map<std::string, std::vector<int>> rankings;
            if (want_detect) {
                preds = read_predictions(st_preds);
                labels = read_labels(st_labels);
            }
            if (want_rank) rankings = read_rankings(st_rankings);

            std::vector<upd::morph::StratumItem> items;
            for (const auto& row : rows) {
                upd::morph::StratumItem item;
                if (!row.morphology.empty()) {
                    const auto bin = upd::morph::parse_bin(row.morphology);
                    upd::require(bin.has_value(),
                                 "manifest: bad morphology value: " + row.morphology);
                    item.bin = *bin;
                } else if (!row.segmentation_path.empty()) {
                    const auto raw = upd::pngio::read_gray8(row.segmentation_path);
                    const upd::seg::SegmentationMap segmap(raw.height, raw.width, raw.data);
                    item.bin = upd::morph::estimate_ratio(segmap).bin();
                } else {
                    item.bin = upd::morph::Bin::unbinned;
                }
                if (want_detect) {
                    auto pit = preds.find(row.image_id);
                    auto lit = labels.find(row.image_id);
                    if (pit != preds.end() && lit != labels.end()) {
                        item.has_detection = true;
                        item.predicted = pit->second.label;
                        item.label = lit->second;
                    }
                }
                if (want_rank && !row.gt_ranking.empty()) {
                    auto rit = rankings.find(row.image_id);
                    if (rit != rankings.end()) {
                        item.has_judgment = true;
                        item.judgment = {rit->second, row.gt_ranking};
                    }
                }
                items.push_back(std::move(item));
            }
            const auto report = upd::morph::stratified_report(items, st_kmax);

            if (want_detect) {
                upd::csv::Writer det({"bin", "n", "accuracy", "recall", "precision", "f1"});
                for (const auto& r : report) {
                    if (r.n_detection == 0) continue;
                    det.add_row({upd::morph::bin_name(r.bin), std::to_string(r.n_detection),
                                 format_double(r.detection.accuracy),
                                 format_double(r.detection.recall),
                                 format_double(r.detection.precision),
                                 format_double(r.detection.f1)});
                }
                det.write(st_out + "_detection.csv");
            }
            if (want_rank) {
                upd::csv::Writer rk([&] {
                    std::vector<std::string> h{"bin", "n"};
                    for (int k = 1; k <= st_kmax; ++k) h.push_back("map_top" + std::to_string(k));
                    return h;
                }());
                for (const auto& r : report) {
                    if (r.n_ranking == 0) continue;
                    std::vector<std::string> row{upd::morph::bin_name(r.bin),
                                                 std::to_string(r.n_ranking)};
                    for (double v : r.map_at) row.push_back(format_double(v));
                    rk.add_row(row);
                }
                rk.write(st_out + "_ranking.csv");
            }
            for (const auto& r : report)
                std::cout << upd::morph::bin_name(r.bin) << ": " << r.n_detection
                          << " detection rows, " << r.n_ranking << " ranking rows\n";
            return kExitOk;
        }

        if (*cmd_map) {
            const auto rows = upd::manifest::load(mp_manifest);
            const auto preds = read_predictions(mp_preds);
            std::map<std::string, std::vector<int>> rankings;
            std::map<std::string, std::vector<std::pair<int, double>>> factor_map;
            if (!mp_rankings.empty()) {
                const auto raw = upd::csv::read_file(mp_rankings);
                for (std::size_t i = 1; i < raw.size(); ++i)
                    factor_map[raw[i][0]].push_back(
                        {std::stoi(raw[i][2]), std::stod(raw[i][4])});
            }
            std::vector<upd::geo::StudyRecord> records;
            bool failures = false;
            for (const auto& row : rows) {
                auto pit = preds.find(row.image_id);
                if (pit == preds.end()) continue;
                if (!row.lat || !row.lon) {
                    std::cerr << "error: " << row.image_id << ": manifest row has no lat/lon\n";
                    failures = true;
                    continue;
                }
                upd::geo::StudyRecord rec;
                rec.image_id = row.image_id;
                rec.lat = *row.lat;
                rec.lon = *row.lon;
                rec.upd = pit->second.label == 1;
                rec.p_upd = pit->second.p_upd;
                auto fit = factor_map.find(row.image_id);
                if (fit != factor_map.end()) rec.factors = fit->second;
                records.push_back(std::move(rec));
            }
            const auto result = upd::geo::emit_geojson(records, mp_top_k);
            for (const auto& id : result.rejected) {
                std::cerr << "error: " << id << ": coordinates out of range\n";
                failures = true;
            }
            upd::csv::atomic_write(mp_out, result.collection.dump(2) + "\n");
            if (!mp_aggregate.empty()) {
                const auto cells = upd::geo::grid_aggregate(records, mp_cell);
                upd::csv::Writer agg({"cell_lat", "cell_lon", "count", "upd_rate"});
                for (const auto& c : cells)
                    agg.add_row({format_double(c.lat_idx * mp_cell),
                                 format_double(c.lon_idx * mp_cell), std::to_string(c.count),
                                 format_double(c.rate())});
                agg.write(mp_aggregate);
            }
            return failures ? kExitItemFailures : kExitOk;
        }

        if (*cmd_cx) {
            std::cout << "msa_flops=" << upd::swin::flops_to_string(
                             upd::swin::complexity_msa(cx_h, cx_w, cx_c))
                      << "\n"
                      << "wmsa_flops=" << upd::swin::flops_to_string(
                             upd::swin::complexity_wmsa(cx_h, cx_w, cx_c, cx_m))
                      << "\n";
            return kExitOk;
        }

        if (*cmd_selftest) {
            bool all_ok = true;
            for (const auto& check : upd::selfcheck::run_all()) {
                std::cout << (check.passed ? "PASS " : "FAIL ") << check.name << " ("
                          << check.detail << ")\n";
                all_ok = all_ok && check.passed;
            }
            return all_ok ? kExitOk : kExitItemFailures;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
