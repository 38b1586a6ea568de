#pragma once

// Pairwise-comparison scoring: per-attribute 0..10 Q scores from win/loss
// ratios with opponent-strength corrections, and percentile labeling of the
// combined six-attribute score into disorder / non-disorder classes.
//
// In the correction sums, an opponent's win (loss) ratio is computed over its
// comparisons excluding those against the image being scored, so the
// head-to-head result never feeds back into its own correction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upd/raster.hpp"

namespace upd::dataset {

enum class Attribute { safe = 0, lively, boring, wealthy, depressing, beautiful };
constexpr int kNumAttributes = 6;

inline const char* attribute_name(Attribute a) {
    static const char* names[] = {"safe", "lively", "boring", "wealthy", "depressing", "beautiful"};
    return names[static_cast<int>(a)];
}

inline std::optional<Attribute> attribute_from_name(const std::string& s) {
    for (int i = 0; i < kNumAttributes; ++i)
        if (s == attribute_name(static_cast<Attribute>(i))) return static_cast<Attribute>(i);
    return std::nullopt;
}

// Attributes where a high score means a *worse* street; inverted before the
// six-way combination so low combined score always means disorder.
inline bool attribute_negative(Attribute a) {
    return a == Attribute::boring || a == Attribute::depressing;
}

enum class Outcome { left, right, tie };

struct ComparisonRecord {
    std::string left;
    std::string right;
    Attribute attribute = Attribute::safe;
    Outcome outcome = Outcome::tie;
};

struct QScore {
    std::string image_id;
    Attribute attribute = Attribute::safe;
    std::size_t wins = 0, losses = 0, ties = 0;
    double score = 0.0;  // clamped to [0,10]

    std::size_t total() const { return wins + losses + ties; }
};

inline std::vector<QScore> compute_q_scores(std::span<const ComparisonRecord> records,
                                            Attribute attribute) {
    struct Tally {
        std::size_t wins = 0, losses = 0, ties = 0;
        std::size_t total() const { return wins + losses + ties; }
    };
    std::map<std::string, Tally> stats;
    // Head-to-head tallies, keyed (image, opponent). The wins field doubles as
    // the per-opponent win-event count for the correction sums, so record
    // duplication scales every sum by exactly two.
    std::map<std::pair<std::string, std::string>, Tally> versus;

    std::size_t used = 0;
    for (const ComparisonRecord& r : records) {
        if (r.attribute != attribute) continue;
        require(r.left != r.right, "ComparisonRecord: image compared against itself");
        ++used;
        Tally& lt = stats[r.left];
        Tally& rt = stats[r.right];
        Tally& lv = versus[{r.left, r.right}];
        Tally& rv = versus[{r.right, r.left}];
        switch (r.outcome) {
            case Outcome::left:
                ++lt.wins, ++rt.losses, ++lv.wins, ++rv.losses;
                break;
            case Outcome::right:
                ++rt.wins, ++lt.losses, ++rv.wins, ++lv.losses;
                break;
            case Outcome::tie:
                ++lt.ties, ++rt.ties, ++lv.ties, ++rv.ties;
                break;
        }
    }
    require(used > 0, "compute_q_scores: no records for the requested attribute");

    auto win_ratio_excluding = [&](const std::string& img, const std::string& vs) {
        const Tally& all = stats.at(img);
        auto it = versus.find({img, vs});
        const Tally sub = it == versus.end() ? Tally{} : it->second;
        const std::size_t n = all.total() - sub.total();
        return n > 0 ? static_cast<double>(all.wins - sub.wins) / static_cast<double>(n) : 0.0;
    };
    auto loss_ratio_excluding = [&](const std::string& img, const std::string& vs) {
        const Tally& all = stats.at(img);
        auto it = versus.find({img, vs});
        const Tally sub = it == versus.end() ? Tally{} : it->second;
        const std::size_t n = all.total() - sub.total();
        return n > 0 ? static_cast<double>(all.losses - sub.losses) / static_cast<double>(n) : 0.0;
    };

    std::vector<QScore> out;
    out.reserve(stats.size());
    for (const auto& [id, tally] : stats) {
        const double n = static_cast<double>(tally.total());
        const double win_ratio = static_cast<double>(tally.wins) / n;

        // Per-opponent counted sums in id order: one win event over opponent j
        // contributes j's win ratio once.
        double win_sum = 0.0, loss_sum = 0.0;
        auto it = versus.lower_bound({id, std::string{}});
        for (; it != versus.end() && it->first.first == id; ++it) {
            const std::string& opp = it->first.second;
            if (it->second.wins > 0)
                win_sum += static_cast<double>(it->second.wins) * win_ratio_excluding(opp, id);
            if (it->second.losses > 0)
                loss_sum += static_cast<double>(it->second.losses) * loss_ratio_excluding(opp, id);
        }
        const double win_correction =
            tally.wins > 0 ? win_sum / static_cast<double>(tally.wins) : 0.0;
        const double loss_correction =
            tally.losses > 0 ? loss_sum / static_cast<double>(tally.losses) : 0.0;

        double q = (10.0 / 3.0) * (win_ratio + win_correction - loss_correction + 1.0);
        q = std::clamp(q, 0.0, 10.0);
        out.push_back({id, attribute, tally.wins, tally.losses, tally.ties, q});
    }
    return out;  // std::map iteration: sorted by image id
}

// ---------------------------------------------------------------------------
// Percentile labeling
// ---------------------------------------------------------------------------

struct LabelConfig {
    double low_pct = 5.0;
    double high_pct = 95.0;
    std::size_t min_votes = 100;  // image kept only if rated strictly more often

    void validate() const {
        require(low_pct >= 0.0 && high_pct <= 100.0 && low_pct <= high_pct,
                "LabelConfig: need 0 <= low_pct <= high_pct <= 100");
    }
};

struct LabeledImage {
    std::string image_id;
    int label = 0;  // 1 = disorder
    double combined = 0.0;
    std::array<double, kNumAttributes> attribute_scores{};
};

struct LabelResult {
    std::vector<LabeledImage> labeled;
    std::vector<std::string> unlabeled;  // between the two thresholds
    std::vector<std::string> excluded;   // missing attributes or too few votes
    double low_threshold = 0.0;
    double high_threshold = 0.0;
};

// combined < low-percentile value -> disorder (1); combined >= high-percentile
// value -> non-disorder (0); everything between stays unlabeled.
inline LabelResult label_dataset(
    const std::array<std::vector<QScore>, kNumAttributes>& per_attribute, const LabelConfig& cfg) {
    cfg.validate();

    struct Entry {
        std::array<double, kNumAttributes> scores{};
        std::array<bool, kNumAttributes> present{};
        std::size_t votes = 0;
    };
    std::map<std::string, Entry> images;
    for (int a = 0; a < kNumAttributes; ++a)
        for (const QScore& q : per_attribute[a]) {
            Entry& e = images[q.image_id];
            e.scores[a] = q.score;
            e.present[a] = true;
            e.votes += q.total();
        }

    LabelResult result;
    std::vector<std::pair<std::string, Entry>> eligible;
    for (const auto& [id, e] : images) {
        const bool complete = std::all_of(e.present.begin(), e.present.end(), [](bool p) { return p; });
        if (!complete || e.votes <= cfg.min_votes) {
            result.excluded.push_back(id);
            continue;
        }
        eligible.emplace_back(id, e);
    }
    require(!eligible.empty(), "label_dataset: no image passes the vote/coverage filters");

    auto combined_score = [](const Entry& e) {
        double s = 0.0;
        for (int a = 0; a < kNumAttributes; ++a) {
            const double q = e.scores[a];
            s += attribute_negative(static_cast<Attribute>(a)) ? 10.0 - q : q;
        }
        return s / kNumAttributes;
    };

    std::vector<double> combined(eligible.size());
    for (std::size_t i = 0; i < eligible.size(); ++i) combined[i] = combined_score(eligible[i].second);

    std::vector<double> sorted(combined);
    std::sort(sorted.begin(), sorted.end());
    auto percentile_value = [&](double pct) {
        std::size_t idx = static_cast<std::size_t>(std::floor(sorted.size() * pct / 100.0));
        idx = std::min(idx, sorted.size() - 1);
        return sorted[idx];
    };
    result.low_threshold = percentile_value(cfg.low_pct);
    result.high_threshold = percentile_value(cfg.high_pct);

    std::size_t n_upd = 0, n_clean = 0;
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        const auto& [id, e] = eligible[i];
        if (combined[i] < result.low_threshold) {
            result.labeled.push_back({id, 1, combined[i], e.scores});
            ++n_upd;
        } else if (combined[i] >= result.high_threshold) {
            result.labeled.push_back({id, 0, combined[i], e.scores});
            ++n_clean;
        } else {
            result.unlabeled.push_back(id);
        }
    }
    if (n_upd < 2 || n_clean < 2)
        throw std::runtime_error("label_dataset: fewer than 2 labeled images in a class (" +
                                 std::to_string(n_upd) + " disorder, " + std::to_string(n_clean) +
                                 " non-disorder)");
    return result;
}

}  // namespace upd::dataset
