#pragma once

// Raster and token-grid value types shared by the whole pipeline, plus the
// two resampling primitives every downstream stage relies on (bilinear
// resize with half-pixel centers and min-max normalization).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace upd {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Unconstrained H x W float map. Intermediate currency for maps that are not
// yet normalized into [0,1].
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> values;

    Plane() = default;
    Plane(int h, int w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {
        require(height >= 1 && width >= 1, "Plane: dimensions must be >= 1");
        require(values.size() == static_cast<std::size_t>(height) * width,
                "Plane: value count does not match dimensions");
        for (double x : values)
            require(std::isfinite(x), "Plane: values must be finite");
    }
    Plane(int h, int w, double fill = 0.0)
        : Plane(h, w, std::vector<double>(static_cast<std::size_t>(h) * w, fill)) {}

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
};

// H x W x C image with all samples in [0,1]. Row-major, channel innermost.
struct ImageRaster {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<double> data;

    ImageRaster() = default;
    ImageRaster(int h, int w, int c, std::vector<double> d)
        : height(h), width(w), channels(c), data(std::move(d)) {
        require(height >= 1 && width >= 1 && channels >= 1, "ImageRaster: bad dimensions");
        require(data.size() == static_cast<std::size_t>(height) * width * channels,
                "ImageRaster: data length must be H*W*C");
        for (double v : data)
            require(std::isfinite(v) && v >= 0.0 && v <= 1.0,
                    "ImageRaster: values must lie in [0,1]");
    }
    static ImageRaster zeros(int h, int w, int c = 3) {
        return ImageRaster(h, w, c, std::vector<double>(static_cast<std::size_t>(h) * w * c, 0.0));
    }

    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

// rows x cols token grid with dim channels per token. Row-major over tokens,
// channel innermost.
struct FeatureGrid {
    int rows = 0;
    int cols = 0;
    int dim = 0;
    std::vector<double> data;

    FeatureGrid() = default;
    FeatureGrid(int r, int c, int d, std::vector<double> v)
        : rows(r), cols(c), dim(d), data(std::move(v)) {
        require(rows >= 1 && cols >= 1 && dim >= 1, "FeatureGrid: bad dimensions");
        require(data.size() == static_cast<std::size_t>(rows) * cols * dim,
                "FeatureGrid: data length must be rows*cols*dim");
        for (double x : data)
            require(std::isfinite(x), "FeatureGrid: values must be finite");
    }
    FeatureGrid(int r, int c, int d)
        : rows(r), cols(c), dim(d), data(static_cast<std::size_t>(r) * c * d, 0.0) {}

    double* token(int r, int c) { return data.data() + (static_cast<std::size_t>(r) * cols + c) * dim; }
    const double* token(int r, int c) const {
        return data.data() + (static_cast<std::size_t>(r) * cols + c) * dim;
    }
    std::size_t tokens() const { return static_cast<std::size_t>(rows) * cols; }

    // One channel lifted out as a spatial map.
    Plane channel(int k) const {
        require(k >= 0 && k < dim, "FeatureGrid::channel: index out of range");
        std::vector<double> v(tokens());
        for (std::size_t t = 0; t < tokens(); ++t) v[t] = data[t * dim + k];
        return Plane(rows, cols, std::move(v));
    }
};

// H x W evidence map constrained to [0,1].
struct ActivationMap {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ActivationMap() = default;
    ActivationMap(int h, int w, std::vector<double> d) : height(h), width(w), data(std::move(d)) {
        require(height >= 1 && width >= 1, "ActivationMap: dimensions must be >= 1");
        require(data.size() == static_cast<std::size_t>(height) * width,
                "ActivationMap: data length must be H*W");
        for (double v : data)
            require(std::isfinite(v) && v >= 0.0 && v <= 1.0,
                    "ActivationMap: values must lie in [0,1]");
    }

    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

// Half-pixel-center bilinear kernel, no corner alignment. Source coordinate
// of output pixel x is (x + 0.5) * s/t - 0.5; taps clamp at the border.
inline std::vector<double> bilinear_kernel(const double* src, int sh, int sw, int th, int tw) {
    std::vector<double> out(static_cast<std::size_t>(th) * tw);
    const double sy = static_cast<double>(sh) / th;
    const double sx = static_cast<double>(sw) / tw;
    for (int y = 0; y < th; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::min(std::max(y0, 0), sh - 1);
        int y1c = std::min(std::max(y0 + 1, 0), sh - 1);
        for (int x = 0; x < tw; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::min(std::max(x0, 0), sw - 1);
            int x1c = std::min(std::max(x0 + 1, 0), sw - 1);
            double top = src[static_cast<std::size_t>(y0c) * sw + x0c] * (1.0 - wx) +
                         src[static_cast<std::size_t>(y0c) * sw + x1c] * wx;
            double bot = src[static_cast<std::size_t>(y1c) * sw + x0c] * (1.0 - wx) +
                         src[static_cast<std::size_t>(y1c) * sw + x1c] * wx;
            out[static_cast<std::size_t>(y) * tw + x] = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

}  // namespace detail

inline Plane bilinear_resize(const Plane& src, int target_h, int target_w) {
    require(target_h >= 1 && target_w >= 1, "bilinear_resize: target dimensions must be >= 1");
    return Plane(target_h, target_w,
                 detail::bilinear_kernel(src.values.data(), src.height, src.width, target_h, target_w));
}

inline ActivationMap bilinear_resize(const ActivationMap& src, int target_h, int target_w) {
    require(target_h >= 1 && target_w >= 1, "bilinear_resize: target dimensions must be >= 1");
    return ActivationMap(
        target_h, target_w,
        detail::bilinear_kernel(src.data.data(), src.height, src.width, target_h, target_w));
}

// Maps to [0,1] with min 0 and max 1. A constant input maps to all zeros
// ("no evidence anywhere").
inline ActivationMap minmax_normalize(const Plane& raw) {
    double lo = raw.values[0], hi = raw.values[0];
    for (double v : raw.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(raw.values.size(), 0.0);
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = (raw.values[i] - lo) * inv;
    }
    return ActivationMap(raw.height, raw.width, std::move(out));
}

}  // namespace upd
