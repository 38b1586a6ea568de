#pragma once

// Independent reference implementations used only for verification: a
// brute-force per-window full-attention evaluator and a naive per-pixel
// density accumulator. They share nothing with the production code paths
// beyond the value types, so agreement is meaningful. The suite runners back
// the `selftest` subcommand and the test binaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "upd/metrics.hpp"
#include "upd/qscore.hpp"
#include "upd/ranker.hpp"
#include "upd/raster.hpp"
#include "upd/rng.hpp"
#include "upd/segmentation.hpp"
#include "upd/swin.hpp"

namespace upd::selfcheck {

// Plain full attention run independently on every M x M window sliced out of
// the grid. Per-token matrix-vector products and a local softmax; no shared
// kernels.
inline FeatureGrid naive_window_attention(const FeatureGrid& grid, int num_heads, int window,
                                          const swin::LinearParams& qkv,
                                          const swin::LinearParams& proj) {
    const int rows = grid.rows, cols = grid.cols, dim = grid.dim;
    const int n = window * window;
    const int dh = dim / num_heads;
    FeatureGrid out(rows, cols, dim);

    auto apply_linear = [](const std::vector<double>& x, const std::vector<double>& w,
                           const std::vector<double>& b, int in, int nout) {
        std::vector<double> y(nout);
        for (int o = 0; o < nout; ++o) {
            double acc = b[o];
            for (int i = 0; i < in; ++i) acc += x[i] * w[static_cast<std::size_t>(i) * nout + o];
            y[o] = acc;
        }
        return y;
    };

    for (int wr = 0; wr < rows / window; ++wr)
        for (int wc = 0; wc < cols / window; ++wc) {
            // Slice the window.
            std::vector<std::vector<double>> tok(n);
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    const double* src = grid.token(wr * window + i, wc * window + j);
                    tok[i * window + j].assign(src, src + dim);
                }
            std::vector<std::vector<double>> q(n), k(n), v(n);
            for (int t = 0; t < n; ++t) {
                std::vector<double> fused = apply_linear(tok[t], qkv.w, qkv.b, dim, 3 * dim);
                q[t].assign(fused.begin(), fused.begin() + dim);
                k[t].assign(fused.begin() + dim, fused.begin() + 2 * dim);
                v[t].assign(fused.begin() + 2 * dim, fused.end());
            }
            for (int t = 0; t < n; ++t) {
                std::vector<double> merged(dim, 0.0);
                for (int h = 0; h < num_heads; ++h) {
                    const int off = h * dh;
                    std::vector<double> scores(n);
                    for (int u = 0; u < n; ++u) {
                        double dot = 0.0;
                        for (int d = 0; d < dh; ++d) dot += q[t][off + d] * k[u][off + d];
                        scores[u] = dot / std::sqrt(static_cast<double>(dh));
                    }
                    double mx = scores[0];
                    for (double s : scores) mx = std::max(mx, s);
                    double z = 0.0;
                    for (double& s : scores) {
                        s = std::exp(s - mx);
                        z += s;
                    }
                    for (int u = 0; u < n; ++u)
                        for (int d = 0; d < dh; ++d) merged[off + d] += scores[u] / z * v[u][off + d];
                }
                std::vector<double> projected = apply_linear(merged, proj.w, proj.b, dim, dim);
                const int i = t / window, j = t % window;
                std::copy(projected.begin(), projected.end(),
                          out.token(wr * window + i, wc * window + j));
            }
        }
    return out;
}

// Naive double-loop evaluation of the density ranking, with its own
// insertion sort.
inline std::vector<rank::FactorEntry> naive_rank(const seg::SegmentationMap& segmap,
                                                 const ActivationMap& act,
                                                 std::size_t min_pixels) {
    std::vector<rank::FactorEntry> entries;
    for (int id = 1; id <= seg::kNumClasses; ++id) {
        double sum = 0.0;
        std::size_t count = 0;
        for (int y = 0; y < segmap.height; ++y)
            for (int x = 0; x < segmap.width; ++x)
                if (segmap.at(y, x) == id) {
                    sum += act.at(y, x);
                    ++count;
                }
        if (count == 0 || count < min_pixels) continue;
        rank::FactorEntry e{id, sum / static_cast<double>(count), count};
        std::size_t pos = 0;
        while (pos < entries.size() &&
               (entries[pos].density > e.density ||
                (entries[pos].density == e.density && entries[pos].class_id < e.class_id)))
            ++pos;
        entries.insert(entries.begin() + pos, e);
    }
    return entries;
}

// ---------------------------------------------------------------------------
// Check suites
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

inline FeatureGrid random_grid(int rows, int cols, int dim, std::uint64_t seed) {
    StreamRng rng(seed, "grid");
    std::vector<double> data(static_cast<std::size_t>(rows) * cols * dim);
    for (double& v : data) v = rng.next_uniform() * 2.0 - 1.0;
    return FeatureGrid(rows, cols, dim, std::move(data));
}

inline CheckResult check_window_attention_oracle(int trials = 100) {
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        StreamRng pick(1000 + t, "cfg");
        const int m_choices[] = {2, 4, 7};
        const int window = m_choices[pick.next_index(3)];
        const int wr = 1 + static_cast<int>(pick.next_index(2));
        const int wc = 1 + static_cast<int>(pick.next_index(2));
        const int heads = 1 + static_cast<int>(pick.next_index(2));
        const int dim = heads * (2 + static_cast<int>(pick.next_index(3)));
        FeatureGrid grid = random_grid(wr * window, wc * window, dim, 2000 + t);
        swin::LinearParams qkv = swin::detail::init_linear(3000 + t, "qkv", dim, 3 * dim);
        swin::LinearParams proj = swin::detail::init_linear(3000 + t, "proj", dim, dim);
        FeatureGrid fast = swin::window_attention(grid, false, heads, window, qkv, proj);
        FeatureGrid slow = naive_window_attention(grid, heads, window, qkv, proj);
        for (std::size_t i = 0; i < fast.data.size(); ++i)
            worst = std::max(worst, std::fabs(fast.data[i] - slow.data[i]));
    }
    return {"window-attention-oracle", worst < 1e-10,
            "max abs diff " + format_value(worst) + " over " + std::to_string(trials) +
                " grids"};
}

inline CheckResult check_rank_oracle(int trials = 1000) {
    double worst = 0.0;
    bool order_ok = true;
    for (int t = 0; t < trials; ++t) {
        StreamRng rng(5000 + t, "rank");
        const int h = 2 + static_cast<int>(rng.next_index(63));
        const int w = 2 + static_cast<int>(rng.next_index(63));
        const int nclasses = 1 + static_cast<int>(rng.next_index(12));
        std::vector<std::uint8_t> ids(static_cast<std::size_t>(h) * w);
        std::vector<double> act(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            ids[i] = static_cast<std::uint8_t>(rng.next_index(nclasses + 1));  // 0..nclasses
            act[i] = rng.next_uniform();
        }
        seg::SegmentationMap segmap(h, w, std::move(ids));
        ActivationMap amap(h, w, std::move(act));
        const std::size_t min_px = rng.next_index(4);
        rank::FactorRanking fast = rank::rank_factors(segmap, amap, min_px);
        std::vector<rank::FactorEntry> slow = naive_rank(segmap, amap, min_px);
        if (fast.entries.size() != slow.size()) {
            order_ok = false;
            break;
        }
        for (std::size_t i = 0; i < slow.size(); ++i) {
            if (fast.entries[i].class_id != slow[i].class_id ||
                fast.entries[i].pixel_count != slow[i].pixel_count)
                order_ok = false;
            worst = std::max(worst, std::fabs(fast.entries[i].density - slow[i].density));
        }
    }
    return {"factor-ranking-oracle", order_ok && worst < 1e-12,
            "max density diff " + format_value(worst) + " over " + std::to_string(trials) +
                " rasters"};
}

inline CheckResult check_complexity_identity(int trials = 1000) {
    bool ok = true;
    for (int t = 0; t < trials && ok; ++t) {
        StreamRng rng(7000 + t, "complexity");
        const std::uint64_t h = 1 + rng.next_index(512);
        const std::uint64_t w = 1 + rng.next_index(512);
        const std::uint64_t c = 1 + rng.next_index(1024);
        const std::uint64_t m = 1 + rng.next_index(64);
        const swin::Flops lhs = swin::complexity_msa(h, w, c) - swin::complexity_wmsa(h, w, c, m);
        const swin::Flops hw = static_cast<swin::Flops>(h) * w;
        const swin::Flops rhs =
            2 * hw * static_cast<swin::Flops>(c) * (hw - static_cast<swin::Flops>(m) * m);
        ok = lhs == rhs;
    }
    // Frozen spot values, evaluated independently with big-integer arithmetic.
    ok = ok && swin::complexity_msa(56, 56, 96) == swin::Flops(2003828736LL);
    ok = ok && swin::complexity_wmsa(56, 56, 96, 7) == swin::Flops(145108992LL);
    ok = ok && swin::complexity_msa(1, 1, 1) == 6 && swin::complexity_wmsa(1, 1, 1, 1) == 6;
    return {"complexity-identity", ok, "1000 random tuples + frozen spot values"};
}

inline CheckResult check_metric_collapse(int trials = 10000) {
    bool ok = true;
    for (int t = 0; t < trials && ok; ++t) {
        StreamRng rng(9000 + t, "judgments");
        const int n = 1 + static_cast<int>(rng.next_index(8));
        std::vector<metrics::RankingJudgment> js(n);
        for (metrics::RankingJudgment& j : js) {
            std::vector<int> classes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
            for (std::size_t i = classes.size(); i > 1; --i)
                std::swap(classes[i - 1], classes[rng.next_index(i)]);
            const int npred = 1 + static_cast<int>(rng.next_index(6));
            j.predicted.assign(classes.begin(), classes.begin() + npred);
            for (std::size_t i = classes.size(); i > 1; --i)
                std::swap(classes[i - 1], classes[rng.next_index(i)]);
            const int ngt = 1 + static_cast<int>(rng.next_index(6));
            j.ground_truth.assign(classes.begin(), classes.begin() + ngt);
        }
        const metrics::RankMetrics m = metrics::rank_metrics_at_k(js, 1);
        ok = m.map == m.rprec && m.rprec == m.ndcg;
    }
    return {"metric-collapse-at-1", ok, std::to_string(trials) + " randomized judgment sets"};
}

inline CheckResult check_qscore_extremes() {
    using dataset::Attribute;
    using dataset::ComparisonRecord;
    using dataset::Outcome;
    const Attribute attr = Attribute::safe;
    std::vector<ComparisonRecord> wins{
        {"a", "b", attr, Outcome::left},  {"a", "c", attr, Outcome::left},
        {"b", "d", attr, Outcome::left},  {"b", "d", attr, Outcome::left},
        {"c", "d", attr, Outcome::left},
    };
    std::vector<ComparisonRecord> losses{
        {"a", "b", attr, Outcome::right}, {"a", "c", attr, Outcome::right},
        {"b", "d", attr, Outcome::right}, {"b", "d", attr, Outcome::right},
        {"c", "d", attr, Outcome::right},
    };
    bool ok = true;
    for (const dataset::QScore& q : dataset::compute_q_scores(wins, attr)) {
        if (q.image_id == "a") ok = ok && q.score == 10.0;
        ok = ok && q.score >= 0.0 && q.score <= 10.0;
    }
    for (const dataset::QScore& q : dataset::compute_q_scores(losses, attr)) {
        if (q.image_id == "a") ok = ok && q.score == 0.0;
        ok = ok && q.score >= 0.0 && q.score <= 10.0;
    }
    return {"qscore-extremes", ok, "all-win fixture = 10, all-loss fixture = 0"};
}

inline std::vector<CheckResult> run_all() {
    return {check_window_attention_oracle(), check_rank_oracle(), check_complexity_identity(),
            check_metric_collapse(), check_qscore_extremes()};
}

}  // namespace upd::selfcheck
