#pragma once

// Deterministic forward pass of the shifted-window transformer classifier:
// patch embedding, alternating W-MSA / SW-MSA blocks, patch merging, and the
// pooled classification head, plus the attention-complexity accounting for
// the global and windowed variants.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "upd/linalg.hpp"
#include "upd/raster.hpp"
#include "upd/rng.hpp"

namespace upd::swin {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitSigma = 0.02;

struct SwinConfig {
    int patch_size = 4;
    int embed_dim = 32;              // C
    std::array<int, 4> depths{2, 2, 2, 2};
    std::array<int, 4> num_heads{2, 4, 8, 16};
    int window_size = 7;             // M
    double mlp_ratio = 4.0;
    int num_classes = 2;
    std::uint64_t seed = 0;

    int stage_dim(int stage) const { return embed_dim << stage; }

    void validate() const {
        require(patch_size >= 1, "SwinConfig: patch_size must be >= 1");
        require(embed_dim >= 1, "SwinConfig: embed_dim must be >= 1");
        require(window_size >= 1, "SwinConfig: window_size must be >= 1");
        require(mlp_ratio > 0.0, "SwinConfig: mlp_ratio must be positive");
        require(num_classes == 2, "SwinConfig: binary classifier expects 2 classes");
        for (int s = 0; s < 4; ++s) {
            require(depths[s] >= 1, "SwinConfig: every stage needs at least one block");
            require(num_heads[s] >= 1 && stage_dim(s) % num_heads[s] == 0,
                    "SwinConfig: stage dim must be divisible by its head count");
        }
    }

    // Every one of the four stage grids must be window-divisible; padding is
    // rejected rather than implemented.
    void validate_input(int h, int w) const {
        const int unit = patch_size * 8;
        require(h >= unit && w >= unit && h % unit == 0 && w % unit == 0,
                "input dims must be positive multiples of patch_size*8");
        const int g = h / patch_size, gw = w / patch_size;
        for (int s = 0; s < 4; ++s) {
            require((g >> s) % window_size == 0 && (gw >> s) % window_size == 0,
                    "every stage grid must be divisible by the window size");
        }
    }
};

struct LinearParams {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major in x out
    std::vector<double> b;  // out
};

struct LayerNormParams {
    std::vector<double> gamma;
    std::vector<double> beta;
};

struct BlockParams {
    LayerNormParams norm1;
    LinearParams qkv;   // C -> 3C, laid out [Q | K | V]
    LinearParams proj;  // C -> C
    LayerNormParams norm2;
    LinearParams fc1;   // C -> mlp_ratio*C
    LinearParams fc2;   // mlp_ratio*C -> C
};

struct StageParams {
    std::vector<BlockParams> blocks;
    LinearParams merge;  // 4C -> 2C; absent after the last stage
    bool has_merge = false;
};

namespace detail {

inline LinearParams init_linear(std::uint64_t seed, const std::string& path, int in, int out) {
    LinearParams p;
    p.in = in;
    p.out = out;
    p.w.resize(static_cast<std::size_t>(in) * out);
    StreamRng rng(seed, path + ".weight");
    for (double& v : p.w) v = rng.next_trunc_normal(kInitSigma);
    p.b.assign(out, 0.0);
    return p;
}

inline LayerNormParams init_norm(int dim) {
    return LayerNormParams{std::vector<double>(dim, 1.0), std::vector<double>(dim, 0.0)};
}

}  // namespace detail

struct SwinWeights {
    SwinConfig cfg;
    LinearParams patch_embed;  // 48 -> C
    std::array<StageParams, 4> stages;
    LayerNormParams head_norm;  // over 8C
    LinearParams head;          // 8C -> 2

    // Reproducible byte-for-byte from (config, seed): each tensor draws from
    // a stream keyed on the seed and its parameter path.
    static SwinWeights init(const SwinConfig& cfg) {
        cfg.validate();
        SwinWeights w;
        w.cfg = cfg;
        const std::uint64_t seed = cfg.seed;
        const int patch_feat = cfg.patch_size * cfg.patch_size * 3;
        w.patch_embed = detail::init_linear(seed, "patch_embed", patch_feat, cfg.embed_dim);
        for (int s = 0; s < 4; ++s) {
            const int dim = cfg.stage_dim(s);
            const int hidden = static_cast<int>(dim * cfg.mlp_ratio);
            StageParams& stage = w.stages[s];
            stage.blocks.resize(cfg.depths[s]);
            for (int b = 0; b < cfg.depths[s]; ++b) {
                const std::string base = "stage" + std::to_string(s) + ".block" + std::to_string(b);
                BlockParams& blk = stage.blocks[b];
                blk.norm1 = detail::init_norm(dim);
                blk.qkv = detail::init_linear(seed, base + ".attn.qkv", dim, 3 * dim);
                blk.proj = detail::init_linear(seed, base + ".attn.proj", dim, dim);
                blk.norm2 = detail::init_norm(dim);
                blk.fc1 = detail::init_linear(seed, base + ".mlp.fc1", dim, hidden);
                blk.fc2 = detail::init_linear(seed, base + ".mlp.fc2", hidden, dim);
            }
            if (s < 3) {
                stage.has_merge = true;
                stage.merge = detail::init_linear(seed, "stage" + std::to_string(s) + ".merge",
                                                  4 * dim, 2 * dim);
            }
        }
        const int final_dim = cfg.stage_dim(3);
        w.head_norm = detail::init_norm(final_dim);
        w.head = detail::init_linear(seed, "head.fc", final_dim, cfg.num_classes);
        return w;
    }
};

// ---------------------------------------------------------------------------
// Forward operations
// ---------------------------------------------------------------------------

// Non-overlapping patch split + linear embedding. Each token is the linear
// projection of its patch's raw values flattened row-major (dy, dx, channel).
inline FeatureGrid patch_partition_embed(const ImageRaster& image, const SwinConfig& cfg,
                                         const SwinWeights& weights) {
    const int p = cfg.patch_size;
    require(image.channels == 3, "patch_partition_embed: expected RGB input");
    require(image.height % p == 0 && image.width % p == 0,
            "patch_partition_embed: image dims must be divisible by the patch size");
    const int rows = image.height / p, cols = image.width / p;
    const int feat = p * p * 3;
    std::vector<double> patches(static_cast<std::size_t>(rows) * cols * feat);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double* dst = patches.data() + (static_cast<std::size_t>(r) * cols + c) * feat;
            int k = 0;
            for (int dy = 0; dy < p; ++dy)
                for (int dx = 0; dx < p; ++dx)
                    for (int ch = 0; ch < 3; ++ch)
                        dst[k++] = image.at(r * p + dy, c * p + dx, ch);
        }
    std::vector<double> tokens =
        linalg::linear(patches.data(), static_cast<std::size_t>(rows) * cols, feat,
                       weights.patch_embed.w, weights.patch_embed.b, cfg.embed_dim);
    return FeatureGrid(rows, cols, cfg.embed_dim, std::move(tokens));
}

// Per-window attention state captured for verification: token origins and the
// exact post-softmax attention matrices.
struct AttentionTrace {
    struct Window {
        std::vector<int> origin_window;         // pre-shift window id per token
        std::vector<std::vector<double>> attn;  // one (n x n) matrix per head
    };
    std::vector<Window> windows;
};

namespace detail {

inline FeatureGrid window_attention_impl(const FeatureGrid& grid, bool shifted, int num_heads,
                                         int window, const LinearParams& qkv,
                                         const LinearParams& proj, AttentionTrace* trace) {
    const int rows = grid.rows, cols = grid.cols, dim = grid.dim;
    require(rows % window == 0 && cols % window == 0,
            "window_attention: grid dims must be divisible by the window size");
    require(dim % num_heads == 0, "window_attention: dim must be divisible by head count");
    require(qkv.in == dim && qkv.out == 3 * dim && proj.in == dim && proj.out == dim,
            "window_attention: projection shape mismatch");

    const int shift = shifted ? window / 2 : 0;
    const int n = window * window;
    const int dh = dim / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const int wrows = rows / window, wcols = cols / window;

    FeatureGrid out(rows, cols, dim);
    std::vector<double> win(static_cast<std::size_t>(n) * dim);
    std::vector<int> origin(n);
    std::vector<double> scores(static_cast<std::size_t>(n) * n);
    std::vector<double> headout(static_cast<std::size_t>(n) * dim);

    for (int wr = 0; wr < wrows; ++wr)
        for (int wc = 0; wc < wcols; ++wc) {
            // Gather the cyclically shifted window; remember where each token
            // came from before the shift.
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    const int oy = (wr * window + i + shift) % rows;
                    const int ox = (wc * window + j + shift) % cols;
                    const double* src = grid.token(oy, ox);
                    std::copy(src, src + dim, win.data() + static_cast<std::size_t>(i * window + j) * dim);
                    origin[i * window + j] = (oy / window) * wcols + (ox / window);
                }

            std::vector<double> qkv_out =
                linalg::linear(win.data(), n, dim, qkv.w, qkv.b, 3 * dim);

            AttentionTrace::Window* twin = nullptr;
            if (trace) {
                trace->windows.emplace_back();
                twin = &trace->windows.back();
                twin->origin_window = origin;
            }

            for (int h = 0; h < num_heads; ++h) {
                const int off = h * dh;
                // scores[q][k] = <Q_q, K_k> * scale
                for (int q = 0; q < n; ++q) {
                    const double* qv = qkv_out.data() + static_cast<std::size_t>(q) * 3 * dim + off;
                    for (int k = 0; k < n; ++k) {
                        const double* kv =
                            qkv_out.data() + static_cast<std::size_t>(k) * 3 * dim + dim + off;
                        double dot = 0.0;
                        for (int d = 0; d < dh; ++d) dot += qv[d] * kv[d];
                        scores[static_cast<std::size_t>(q) * n + k] = dot * scale;
                    }
                }
                // Masked softmax: keys from a different pre-shift window get
                // exactly zero weight.
                for (int q = 0; q < n; ++q) {
                    double* row = scores.data() + static_cast<std::size_t>(q) * n;
                    double mx = -1e300;
                    for (int k = 0; k < n; ++k)
                        if (origin[k] == origin[q]) mx = std::max(mx, row[k]);
                    double sum = 0.0;
                    for (int k = 0; k < n; ++k) {
                        if (origin[k] == origin[q]) {
                            row[k] = std::exp(row[k] - mx);
                            sum += row[k];
                        } else {
                            row[k] = 0.0;
                        }
                    }
                    for (int k = 0; k < n; ++k) row[k] /= sum;
                }
                if (twin) twin->attn.emplace_back(scores.begin(), scores.begin() + static_cast<std::size_t>(n) * n);
                // head output = attn * V
                for (int q = 0; q < n; ++q) {
                    double* dst = headout.data() + static_cast<std::size_t>(q) * dim + off;
                    for (int d = 0; d < dh; ++d) dst[d] = 0.0;
                    const double* row = scores.data() + static_cast<std::size_t>(q) * n;
                    for (int k = 0; k < n; ++k) {
                        const double a = row[k];
                        if (a == 0.0) continue;
                        const double* vv =
                            qkv_out.data() + static_cast<std::size_t>(k) * 3 * dim + 2 * dim + off;
                        for (int d = 0; d < dh; ++d) dst[d] += a * vv[d];
                    }
                }
            }

            std::vector<double> projected =
                linalg::linear(headout.data(), n, dim, proj.w, proj.b, dim);

            // Scatter back, undoing the cyclic shift.
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    const int oy = (wr * window + i + shift) % rows;
                    const int ox = (wc * window + j + shift) % cols;
                    const double* src = projected.data() + static_cast<std::size_t>(i * window + j) * dim;
                    std::copy(src, src + dim, out.token(oy, ox));
                }
        }
    return out;
}

}  // namespace detail

inline FeatureGrid window_attention(const FeatureGrid& grid, bool shifted, int num_heads,
                                    int window, const LinearParams& qkv,
                                    const LinearParams& proj) {
    return detail::window_attention_impl(grid, shifted, num_heads, window, qkv, proj, nullptr);
}

inline FeatureGrid window_attention_traced(const FeatureGrid& grid, bool shifted, int num_heads,
                                           int window, const LinearParams& qkv,
                                           const LinearParams& proj, AttentionTrace& trace) {
    trace.windows.clear();
    return detail::window_attention_impl(grid, shifted, num_heads, window, qkv, proj, &trace);
}

// z = x + WMSA(LN(x)); out = z + MLP(LN(z)), GELU between the MLP layers.
inline FeatureGrid swin_block(const FeatureGrid& grid, bool shifted, int num_heads, int window,
                              const BlockParams& blk) {
    const std::size_t ntok = grid.tokens();
    const int dim = grid.dim;

    FeatureGrid normed = grid;
    for (std::size_t t = 0; t < ntok; ++t)
        linalg::layernorm(std::span<double>(normed.data.data() + t * dim, dim), blk.norm1.gamma,
                          blk.norm1.beta, kLayerNormEps);
    FeatureGrid attn = window_attention(normed, shifted, num_heads, window, blk.qkv, blk.proj);

    FeatureGrid z = grid;
    for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += attn.data[i];

    std::vector<double> z2(z.data);
    for (std::size_t t = 0; t < ntok; ++t)
        linalg::layernorm(std::span<double>(z2.data() + t * dim, dim), blk.norm2.gamma,
                          blk.norm2.beta, kLayerNormEps);
    std::vector<double> hidden =
        linalg::linear(z2.data(), ntok, dim, blk.fc1.w, blk.fc1.b, blk.fc1.out);
    for (double& v : hidden) v = linalg::gelu(v);
    std::vector<double> mlp =
        linalg::linear(hidden.data(), ntok, blk.fc1.out, blk.fc2.w, blk.fc2.b, dim);

    for (std::size_t i = 0; i < z.data.size(); ++i) z.data[i] += mlp[i];
    return z;
}

// Concatenates each 2x2 token group (row-major: (0,0),(0,1),(1,0),(1,1)) and
// applies the 4C -> 2C projection.
inline FeatureGrid patch_merge(const FeatureGrid& grid, const LinearParams& merge) {
    require(grid.rows % 2 == 0 && grid.cols % 2 == 0, "patch_merge: grid dims must be even");
    const int dim = grid.dim;
    require(merge.in == 4 * dim, "patch_merge: projection input must be 4*dim");
    const int rows = grid.rows / 2, cols = grid.cols / 2;
    std::vector<double> cat(static_cast<std::size_t>(rows) * cols * 4 * dim);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double* dst = cat.data() + (static_cast<std::size_t>(r) * cols + c) * 4 * dim;
            const double* g00 = grid.token(2 * r, 2 * c);
            const double* g01 = grid.token(2 * r, 2 * c + 1);
            const double* g10 = grid.token(2 * r + 1, 2 * c);
            const double* g11 = grid.token(2 * r + 1, 2 * c + 1);
            std::copy(g00, g00 + dim, dst);
            std::copy(g01, g01 + dim, dst + dim);
            std::copy(g10, g10 + dim, dst + 2 * dim);
            std::copy(g11, g11 + dim, dst + 3 * dim);
        }
    std::vector<double> merged = linalg::linear(
        cat.data(), static_cast<std::size_t>(rows) * cols, 4 * dim, merge.w, merge.b, merge.out);
    return FeatureGrid(rows, cols, merge.out, std::move(merged));
}

struct ForwardTrace {
    std::array<FeatureGrid, 4> stages;
    std::vector<double> pooled;       // LayerNorm + global average over final tokens
    std::array<double, 2> logits{};
    std::array<double, 2> probs{};
    int predicted = 0;                // 1 = disorder present
};

inline ForwardTrace forward(const ImageRaster& image, const SwinConfig& cfg,
                            const SwinWeights& weights) {
    cfg.validate();
    cfg.validate_input(image.height, image.width);

    ForwardTrace trace;
    FeatureGrid x = patch_partition_embed(image, cfg, weights);
    for (int s = 0; s < 4; ++s) {
        const StageParams& stage = weights.stages[s];
        for (int b = 0; b < cfg.depths[s]; ++b)
            x = swin_block(x, /*shifted=*/(b % 2) == 1, cfg.num_heads[s], cfg.window_size,
                           stage.blocks[b]);
        trace.stages[s] = x;
        if (s < 3) x = patch_merge(x, stage.merge);
    }

    const int dim = x.dim;
    FeatureGrid normed = x;
    for (std::size_t t = 0; t < normed.tokens(); ++t)
        linalg::layernorm(std::span<double>(normed.data.data() + t * dim, dim),
                          weights.head_norm.gamma, weights.head_norm.beta, kLayerNormEps);
    trace.pooled.assign(dim, 0.0);
    for (std::size_t t = 0; t < normed.tokens(); ++t)
        for (int d = 0; d < dim; ++d) trace.pooled[d] += normed.data[t * dim + d];
    for (double& v : trace.pooled) v /= static_cast<double>(normed.tokens());

    std::vector<double> logits =
        linalg::linear(trace.pooled.data(), 1, dim, weights.head.w, weights.head.b, 2);
    trace.logits = {logits[0], logits[1]};
    std::array<double, 2> p = trace.logits;
    linalg::softmax_inplace(std::span<double>(p.data(), 2));
    trace.probs = p;
    trace.predicted = p[1] > p[0] ? 1 : 0;
    return trace;
}

// ---------------------------------------------------------------------------
// Attention cost accounting. 128-bit arithmetic so (hw)^2 terms cannot
// overflow for any realistic grid.
// ---------------------------------------------------------------------------

using Flops = __int128;

inline Flops complexity_msa(std::uint64_t h, std::uint64_t w, std::uint64_t channels) {
    require(h >= 1 && w >= 1 && channels >= 1, "complexity_msa: arguments must be positive");
    const Flops hw = static_cast<Flops>(h) * static_cast<Flops>(w);
    const Flops c = static_cast<Flops>(channels);
    return 4 * hw * c * c + 2 * hw * hw * c;
}

inline Flops complexity_wmsa(std::uint64_t h, std::uint64_t w, std::uint64_t channels,
                             std::uint64_t window) {
    require(h >= 1 && w >= 1 && channels >= 1 && window >= 1,
            "complexity_wmsa: arguments must be positive");
    const Flops hw = static_cast<Flops>(h) * static_cast<Flops>(w);
    const Flops c = static_cast<Flops>(channels);
    const Flops m2 = static_cast<Flops>(window) * static_cast<Flops>(window);
    return 4 * hw * c * c + 2 * m2 * hw * c;
}

inline std::string flops_to_string(Flops v) {
    if (v == 0) return "0";
    const bool neg = v < 0;
    unsigned __int128 u = neg ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
    std::string s;
    while (u > 0) {
        s.insert(s.begin(), static_cast<char>('0' + static_cast<int>(u % 10)));
        u /= 10;
    }
    return neg ? "-" + s : s;
}

}  // namespace upd::swin
