#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "upd/qscore.hpp"
#include "upd/rng.hpp"
#include "upd/selfcheck.hpp"

using namespace upd;
using dataset::Attribute;
using dataset::ComparisonRecord;
using dataset::Outcome;
using dataset::QScore;

namespace {

constexpr Attribute kAttr = Attribute::safe;

double score_of(const std::vector<QScore>& scores, const std::string& id) {
    for (const QScore& q : scores)
        if (q.image_id == id) return q.score;
    FAIL("missing image " + id);
    return -1.0;
}

}  // namespace

TEST_CASE("all-win and all-loss fixtures hit the exact bounds") {
    selfcheck::CheckResult r = selfcheck::check_qscore_extremes();
    INFO(r.detail);
    REQUIRE(r.passed);
}

TEST_CASE("a split pair scores symmetrically at the midpoint") {
    std::vector<ComparisonRecord> records{{"a", "b", kAttr, Outcome::left},
                                          {"a", "b", kAttr, Outcome::right}};
    std::vector<QScore> scores = dataset::compute_q_scores(records, kAttr);
    REQUIRE(scores.size() == 2);
    REQUIRE(scores[0].wins == 1);
    REQUIRE(scores[0].losses == 1);
    REQUIRE(score_of(scores, "a") == 5.0);
    REQUIRE(score_of(scores, "b") == 5.0);
}

TEST_CASE("doubling every record leaves the scores unchanged") {
    StreamRng rng(19, "dup");
    std::vector<std::string> ids{"a", "b", "c", "d", "e"};
    std::vector<ComparisonRecord> records;
    for (int i = 0; i < 60; ++i) {
        const std::string l = ids[rng.next_index(ids.size())];
        std::string r = ids[rng.next_index(ids.size())];
        while (r == l) r = ids[rng.next_index(ids.size())];
        const Outcome o = static_cast<Outcome>(rng.next_index(3));
        records.push_back({l, r, kAttr, o});
    }
    std::vector<ComparisonRecord> doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());

    std::vector<QScore> a = dataset::compute_q_scores(records, kAttr);
    std::vector<QScore> b = dataset::compute_q_scores(doubled, kAttr);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].image_id == b[i].image_id);
        REQUIRE(b[i].wins == 2 * a[i].wins);
        REQUIRE(a[i].score == b[i].score);
    }
}

TEST_CASE("scores stay within [0,10] on random record sets") {
    StreamRng rng(29, "bounds");
    std::vector<std::string> ids{"p", "q", "r", "s", "t", "u"};
    std::vector<ComparisonRecord> records;
    for (int i = 0; i < 200; ++i) {
        const std::string l = ids[rng.next_index(ids.size())];
        std::string r = ids[rng.next_index(ids.size())];
        while (r == l) r = ids[rng.next_index(ids.size())];
        records.push_back({l, r, kAttr, static_cast<Outcome>(rng.next_index(3))});
    }
    for (const QScore& q : dataset::compute_q_scores(records, kAttr)) {
        REQUIRE(q.score >= 0.0);
        REQUIRE(q.score <= 10.0);
    }
}

TEST_CASE("self-comparisons and empty attribute sets are rejected") {
    std::vector<ComparisonRecord> self{{"a", "a", kAttr, Outcome::left}};
    REQUIRE_THROWS_AS(dataset::compute_q_scores(self, kAttr), std::invalid_argument);

    std::vector<ComparisonRecord> other{{"a", "b", Attribute::lively, Outcome::left}};
    REQUIRE_THROWS_AS(dataset::compute_q_scores(other, kAttr), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

namespace {

// Synthetic per-attribute scores: positives get v, negatives 10-v, so the
// combined score equals v exactly.
std::array<std::vector<QScore>, dataset::kNumAttributes> synthetic_scores(
    const std::vector<double>& values, std::size_t votes_each = 40) {
    std::array<std::vector<QScore>, dataset::kNumAttributes> per_attribute;
    for (std::size_t i = 0; i < values.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "img%03zu", i);
        for (int a = 0; a < dataset::kNumAttributes; ++a) {
            const Attribute attr = static_cast<Attribute>(a);
            QScore q;
            q.image_id = buf;
            q.attribute = attr;
            q.wins = votes_each;
            q.score = dataset::attribute_negative(attr) ? 10.0 - values[i] : values[i];
            per_attribute[a].push_back(q);
        }
    }
    return per_attribute;
}

}  // namespace

TEST_CASE("default percentiles label five images per tail out of one hundred") {
    std::vector<double> values(100);
    for (int i = 0; i < 100; ++i) values[i] = i * 0.1;  // 0 .. 9.9
    auto per_attribute = synthetic_scores(values);
    dataset::LabelResult result = dataset::label_dataset(per_attribute, {});

    std::size_t upd = 0, clean = 0;
    for (const auto& img : result.labeled) {
        if (img.label == 1) {
            ++upd;
            REQUIRE(img.combined < result.low_threshold);
        } else {
            ++clean;
            REQUIRE(img.combined >= result.high_threshold);
        }
    }
    REQUIRE(upd == 5);
    REQUIRE(clean == 5);
    REQUIRE(result.unlabeled.size() == 90);
}

TEST_CASE("the vote filter drops sparsely rated images") {
    std::vector<double> values(20);
    for (int i = 0; i < 20; ++i) values[i] = i * 0.5;
    auto per_attribute = synthetic_scores(values, 40);  // 240 votes per image
    // img000 gets only 99 votes in total.
    for (int a = 0; a < dataset::kNumAttributes; ++a) {
        per_attribute[a][0].wins = a < 3 ? 17 : 16;  // 3*17 + 3*16 = 99
    }
    dataset::LabelConfig cfg;
    cfg.low_pct = 30.0;
    cfg.high_pct = 70.0;
    dataset::LabelResult result = dataset::label_dataset(per_attribute, cfg);
    REQUIRE(std::find(result.excluded.begin(), result.excluded.end(), "img000") !=
            result.excluded.end());
    for (const auto& img : result.labeled) REQUIRE(img.image_id != "img000");
}

TEST_CASE("images missing an attribute are excluded") {
    std::vector<double> values(10);
    for (int i = 0; i < 10; ++i) values[i] = i * 1.0;
    auto per_attribute = synthetic_scores(values);
    per_attribute[2].erase(per_attribute[2].begin() + 4);  // img004 loses "boring"
    dataset::LabelConfig cfg;
    cfg.low_pct = 40.0;
    cfg.high_pct = 60.0;
    dataset::LabelResult result = dataset::label_dataset(per_attribute, cfg);
    REQUIRE(std::find(result.excluded.begin(), result.excluded.end(), "img004") !=
            result.excluded.end());
}

TEST_CASE("coincident thresholds label every image") {
    std::vector<double> values(30);
    for (int i = 0; i < 30; ++i) values[i] = i * 0.3;
    auto per_attribute = synthetic_scores(values);
    dataset::LabelConfig cfg;
    cfg.low_pct = 50.0;
    cfg.high_pct = 50.0;
    dataset::LabelResult result = dataset::label_dataset(per_attribute, cfg);
    REQUIRE(result.unlabeled.empty());
    REQUIRE(result.labeled.size() == 30);

    std::size_t upd = 0;
    for (const auto& img : result.labeled) upd += img.label == 1 ? 1 : 0;
    REQUIRE(upd == 15);
}

TEST_CASE("label sets are disjoint") {
    std::vector<double> values(50);
    for (int i = 0; i < 50; ++i) values[i] = i * 0.2;
    auto per_attribute = synthetic_scores(values);
    dataset::LabelConfig cfg;
    cfg.low_pct = 20.0;
    cfg.high_pct = 80.0;
    dataset::LabelResult result = dataset::label_dataset(per_attribute, cfg);
    std::vector<std::string> upd, clean;
    for (const auto& img : result.labeled)
        (img.label == 1 ? upd : clean).push_back(img.image_id);
    for (const auto& id : upd)
        REQUIRE(std::find(clean.begin(), clean.end(), id) == clean.end());
}

TEST_CASE("too few labeled images per class is a dataset error") {
    std::vector<double> values(10);
    for (int i = 0; i < 10; ++i) values[i] = i * 1.0;
    auto per_attribute = synthetic_scores(values);
    dataset::LabelConfig cfg;
    cfg.low_pct = 1.0;  // nothing falls strictly below the minimum
    cfg.high_pct = 99.0;
    REQUIRE_THROWS_AS(dataset::label_dataset(per_attribute, cfg), std::runtime_error);
}
