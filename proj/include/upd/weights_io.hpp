#pragma once

// Versioned little-endian weight file.
//
//   "UPDW1"
//   config: u32 patch_size, u32 embed_dim, u32 depths[4], u32 num_heads[4],
//           u32 window_size, f64 mlp_ratio, u32 num_classes, u64 seed
//   tensors, each as u32 ndim, u32 dims[ndim], f64 values (row-major):
//     patch_embed.weight/.bias
//     stage s in 0..3:
//       block b: norm1.gamma/.beta, qkv.weight/.bias, proj.weight/.bias,
//                norm2.gamma/.beta, fc1.weight/.bias, fc2.weight/.bias
//       merge.weight/.bias (stages 0..2 only)
//     head_norm.gamma/.beta, head.weight/.bias
//   optional trained-head section: "UPDH1", head.weight, head.bias
//     (overrides the base classifier head on load)

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "upd/swin.hpp"

namespace upd::weights {

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("weight file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("weight file truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void put_tensor(std::ostream& os, const std::vector<double>& v,
                       const std::vector<std::uint32_t>& dims) {
    std::size_t n = 1;
    for (std::uint32_t d : dims) n *= d;
    if (n != v.size()) throw std::logic_error("tensor shape header mismatch");
    put_u32(os, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) put_u32(os, d);
    for (double x : v) put_f64(os, x);
}

inline std::vector<double> get_tensor(std::istream& is, const std::vector<std::uint32_t>& want) {
    const std::uint32_t ndim = get_u32(is);
    if (ndim != want.size()) throw std::runtime_error("weight file: unexpected tensor rank");
    std::size_t n = 1;
    for (std::uint32_t w : want) {
        std::uint32_t d = get_u32(is);
        if (d != w) throw std::runtime_error("weight file: unexpected tensor shape");
        n *= d;
    }
    std::vector<double> v(n);
    for (double& x : v) x = get_f64(is);
    return v;
}

inline void put_linear(std::ostream& os, const swin::LinearParams& p) {
    put_tensor(os, p.w, {static_cast<std::uint32_t>(p.in), static_cast<std::uint32_t>(p.out)});
    put_tensor(os, p.b, {static_cast<std::uint32_t>(p.out)});
}

inline swin::LinearParams get_linear(std::istream& is, int in, int out) {
    swin::LinearParams p;
    p.in = in;
    p.out = out;
    p.w = get_tensor(is, {static_cast<std::uint32_t>(in), static_cast<std::uint32_t>(out)});
    p.b = get_tensor(is, {static_cast<std::uint32_t>(out)});
    return p;
}

inline void put_norm(std::ostream& os, const swin::LayerNormParams& p) {
    put_tensor(os, p.gamma, {static_cast<std::uint32_t>(p.gamma.size())});
    put_tensor(os, p.beta, {static_cast<std::uint32_t>(p.beta.size())});
}

inline swin::LayerNormParams get_norm(std::istream& is, int dim) {
    swin::LayerNormParams p;
    p.gamma = get_tensor(is, {static_cast<std::uint32_t>(dim)});
    p.beta = get_tensor(is, {static_cast<std::uint32_t>(dim)});
    return p;
}

}  // namespace detail

constexpr char kMagic[5] = {'U', 'P', 'D', 'W', '1'};
constexpr char kHeadMagic[5] = {'U', 'P', 'D', 'H', '1'};

inline void save(const std::string& path, const swin::SwinWeights& w) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot create weight file: " + path);
    os.write(kMagic, 5);
    const swin::SwinConfig& cfg = w.cfg;
    detail::put_u32(os, static_cast<std::uint32_t>(cfg.patch_size));
    detail::put_u32(os, static_cast<std::uint32_t>(cfg.embed_dim));
    for (int d : cfg.depths) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (int h : cfg.num_heads) detail::put_u32(os, static_cast<std::uint32_t>(h));
    detail::put_u32(os, static_cast<std::uint32_t>(cfg.window_size));
    detail::put_f64(os, cfg.mlp_ratio);
    detail::put_u32(os, static_cast<std::uint32_t>(cfg.num_classes));
    detail::put_u64(os, cfg.seed);

    detail::put_linear(os, w.patch_embed);
    for (int s = 0; s < 4; ++s) {
        for (const swin::BlockParams& blk : w.stages[s].blocks) {
            detail::put_norm(os, blk.norm1);
            detail::put_linear(os, blk.qkv);
            detail::put_linear(os, blk.proj);
            detail::put_norm(os, blk.norm2);
            detail::put_linear(os, blk.fc1);
            detail::put_linear(os, blk.fc2);
        }
        if (w.stages[s].has_merge) detail::put_linear(os, w.stages[s].merge);
    }
    detail::put_norm(os, w.head_norm);
    detail::put_linear(os, w.head);
    if (!os) throw std::runtime_error("failed writing weight file: " + path);
}

inline swin::SwinWeights load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open weight file: " + path);
    char magic[5];
    is.read(magic, 5);
    if (!is || !std::equal(magic, magic + 5, kMagic))
        throw std::runtime_error("not a UPDW1 weight file: " + path);

    swin::SwinConfig cfg;
    cfg.patch_size = static_cast<int>(detail::get_u32(is));
    cfg.embed_dim = static_cast<int>(detail::get_u32(is));
    for (int& d : cfg.depths) d = static_cast<int>(detail::get_u32(is));
    for (int& h : cfg.num_heads) h = static_cast<int>(detail::get_u32(is));
    cfg.window_size = static_cast<int>(detail::get_u32(is));
    cfg.mlp_ratio = detail::get_f64(is);
    cfg.num_classes = static_cast<int>(detail::get_u32(is));
    cfg.seed = detail::get_u64(is);
    cfg.validate();

    swin::SwinWeights w;
    w.cfg = cfg;
    const int patch_feat = cfg.patch_size * cfg.patch_size * 3;
    w.patch_embed = detail::get_linear(is, patch_feat, cfg.embed_dim);
    for (int s = 0; s < 4; ++s) {
        const int dim = cfg.stage_dim(s);
        const int hidden = static_cast<int>(dim * cfg.mlp_ratio);
        w.stages[s].blocks.resize(cfg.depths[s]);
        for (swin::BlockParams& blk : w.stages[s].blocks) {
            blk.norm1 = detail::get_norm(is, dim);
            blk.qkv = detail::get_linear(is, dim, 3 * dim);
            blk.proj = detail::get_linear(is, dim, dim);
            blk.norm2 = detail::get_norm(is, dim);
            blk.fc1 = detail::get_linear(is, dim, hidden);
            blk.fc2 = detail::get_linear(is, hidden, dim);
        }
        if (s < 3) {
            w.stages[s].has_merge = true;
            w.stages[s].merge = detail::get_linear(is, 4 * dim, 2 * dim);
        }
    }
    const int final_dim = cfg.stage_dim(3);
    w.head_norm = detail::get_norm(is, final_dim);
    w.head = detail::get_linear(is, final_dim, cfg.num_classes);

    // Optional trained-head section appended by the trainer.
    char hm[5];
    is.read(hm, 5);
    if (is.gcount() == 5) {
        if (!std::equal(hm, hm + 5, kHeadMagic))
            throw std::runtime_error("weight file: unrecognized trailing section: " + path);
        w.head = detail::get_linear(is, final_dim, cfg.num_classes);
    }
    return w;
}

// Copies the base file and appends the trained head as a separate section,
// leaving the base bytes untouched.
inline void append_head_section(const std::string& src_path, const std::string& dst_path,
                                const swin::LinearParams& head) {
    std::ifstream is(src_path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open weight file: " + src_path);
    std::ofstream os(dst_path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot create weight file: " + dst_path);
    os << is.rdbuf();
    os.write(kHeadMagic, 5);
    detail::put_linear(os, head);
    if (!os) throw std::runtime_error("failed writing weight file: " + dst_path);
}

}  // namespace upd::weights
