#pragma once

// Small dense kernels used by the forward pass and the head trainer. All
// accumulation is in double with a fixed loop order, so results are
// reproducible across runs and worker counts.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace upd::linalg {

// C (m x n) = A (m x k) * B (k x n), row-major. i-k-j order keeps the inner
// loop contiguous on both B and C.
inline void matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n) {
    for (std::size_t i = 0; i < m * n; ++i) c[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// Y (m x out) = X (m x in) * W (in x out) + bias.
inline std::vector<double> linear(const double* x, std::size_t m, std::size_t in,
                                  const std::vector<double>& w, const std::vector<double>& b,
                                  std::size_t out) {
    if (w.size() != in * out || b.size() != out)
        throw std::invalid_argument("linear: weight shape mismatch");
    std::vector<double> y(m * out);
    matmul(x, w.data(), y.data(), m, in, out);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < out; ++j) y[i * out + j] += b[j];
    return y;
}

// In-place LayerNorm of one token over its channels.
inline void layernorm(std::span<double> x, std::span<const double> gamma,
                      std::span<const double> beta, double eps) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
}

inline void softmax_inplace(std::span<double> x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : x) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : x) v /= sum;
}

// Exact erf-form GELU.
inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// log(sum(exp(x))) without overflow.
inline double log_sum_exp(std::span<const double> x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - mx);
    return mx + std::log(sum);
}

}  // namespace upd::linalg
