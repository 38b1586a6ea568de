#pragma once

// Trains the linear classification head on frozen backbone features:
// cross-entropy loss, Adam updates with bias correction, deterministic
// stratified train/validation split.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "upd/linalg.hpp"
#include "upd/raster.hpp"
#include "upd/rng.hpp"
#include "upd/swin.hpp"

namespace upd::train {

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 200;
    int batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double split_ratio = 0.7;  // train fraction
    std::uint64_t seed = 0;

    void validate() const {
        require(learning_rate >= 0.0, "TrainConfig: learning rate must be non-negative");
        require(epochs >= 1 && batch_size >= 1, "TrainConfig: epochs and batch size must be >= 1");
        require(split_ratio > 0.0 && split_ratio < 1.0, "TrainConfig: split ratio must be in (0,1)");
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0,
                "TrainConfig: bad Adam constants");
    }
};

struct LabeledFeature {
    std::vector<double> feature;
    int label = 0;  // 1 = disorder
};

inline double cross_entropy(std::array<double, 2> logits, int label) {
    require(label == 0 || label == 1, "cross_entropy: label must be 0 or 1");
    require(std::isfinite(logits[0]) && std::isfinite(logits[1]),
            "cross_entropy: logits must be finite");
    return linalg::log_sum_exp(std::span<const double>(logits.data(), 2)) - logits[label];
}

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamState& state, const TrainConfig& cfg) {
    require(params.size() == grads.size(), "adam_step: parameter/gradient shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    require(state.m.size() == params.size(), "adam_step: state shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

inline std::array<double, 2> head_logits(const swin::LinearParams& head,
                                         const std::vector<double>& feature) {
    std::vector<double> out =
        linalg::linear(feature.data(), 1, feature.size(), head.w, head.b, 2);
    return {out[0], out[1]};
}

// Mean analytic gradient of the cross-entropy over a batch:
// d/dlogit = softmax(logits) - onehot(label), chained through the linear map.
inline void head_gradient(const swin::LinearParams& head,
                          std::span<const LabeledFeature> batch, std::vector<double>& grad_w,
                          std::vector<double>& grad_b, double* mean_loss = nullptr) {
    require(!batch.empty(), "head_gradient: empty batch");
    grad_w.assign(head.w.size(), 0.0);
    grad_b.assign(head.b.size(), 0.0);
    double loss = 0.0;
    const std::size_t dim = static_cast<std::size_t>(head.in);
    for (const LabeledFeature& s : batch) {
        require(s.feature.size() == dim, "head_gradient: feature dim mismatch");
        std::array<double, 2> logits = head_logits(head, s.feature);
        loss += cross_entropy(logits, s.label);
        std::array<double, 2> delta = logits;
        linalg::softmax_inplace(std::span<double>(delta.data(), 2));
        delta[s.label] -= 1.0;
        for (std::size_t d = 0; d < dim; ++d)
            for (int c = 0; c < 2; ++c) grad_w[d * 2 + c] += s.feature[d] * delta[c];
        for (int c = 0; c < 2; ++c) grad_b[c] += delta[c];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad_w) g *= inv;
    for (double& g : grad_b) g *= inv;
    if (mean_loss) *mean_loss = loss * inv;
}

// Deterministic stratified split: within each class, indices are shuffled by
// a seed-keyed stream and the first split_ratio fraction goes to training.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(
    std::span<const LabeledFeature> data, double split_ratio, std::uint64_t seed) {
    std::vector<std::size_t> train_idx, val_idx;
    for (int cls = 0; cls < 2; ++cls) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data[i].label == cls) idx.push_back(i);
        if (idx.empty()) continue;
        StreamRng rng(seed, "split.class" + std::to_string(cls));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.next_index(i)]);
        std::size_t n_train = static_cast<std::size_t>(std::lround(idx.size() * split_ratio));
        n_train = std::min(std::max<std::size_t>(n_train, 1), idx.size() - (idx.size() > 1 ? 1 : 0));
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        val_idx.insert(val_idx.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {train_idx, val_idx};
}

struct TrainResult {
    swin::LinearParams head;
    std::vector<double> train_loss;    // one entry per epoch
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
    std::vector<std::size_t> train_indices, val_indices;
};

inline TrainResult train_head(std::span<const LabeledFeature> dataset, const TrainConfig& cfg) {
    cfg.validate();
    require(!dataset.empty(), "train_head: empty dataset");
    const std::size_t dim = dataset[0].feature.size();
    bool has0 = false, has1 = false;
    for (const LabeledFeature& s : dataset) {
        require(s.feature.size() == dim, "train_head: inconsistent feature dims");
        require(s.label == 0 || s.label == 1, "train_head: labels must be 0/1");
        (s.label == 0 ? has0 : has1) = true;
    }
    if (!has0 || !has1)
        throw std::runtime_error(
            "train_head: dataset contains a single class; need both disorder and non-disorder "
            "examples");

    TrainResult result;
    std::tie(result.train_indices, result.val_indices) =
        stratified_split(dataset, cfg.split_ratio, cfg.seed);

    swin::LinearParams head;
    head.in = static_cast<int>(dim);
    head.out = 2;
    head.w.assign(dim * 2, 0.0);
    head.b.assign(2, 0.0);

    AdamState state_w, state_b;
    std::vector<double> grad_w, grad_b;
    std::vector<std::size_t> order = result.train_indices;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        StreamRng rng(cfg.seed, "epoch" + std::to_string(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_index(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<LabeledFeature> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
            double batch_loss = 0.0;
            head_gradient(head, batch, grad_w, grad_b, &batch_loss);
            epoch_loss += batch_loss * static_cast<double>(batch.size());
            adam_step(head.w, grad_w, state_w, cfg);
            adam_step(head.b, grad_b, state_b, cfg);
        }
        result.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

        double vloss = 0.0, vcorrect = 0.0;
        for (std::size_t i : result.val_indices) {
            std::array<double, 2> logits = head_logits(head, dataset[i].feature);
            vloss += cross_entropy(logits, dataset[i].label);
            const int pred = logits[1] > logits[0] ? 1 : 0;
            vcorrect += pred == dataset[i].label ? 1.0 : 0.0;
        }
        const double nval = static_cast<double>(std::max<std::size_t>(result.val_indices.size(), 1));
        result.val_loss.push_back(result.val_indices.empty() ? 0.0 : vloss / nval);
        result.val_accuracy.push_back(result.val_indices.empty() ? 0.0 : vcorrect / nval);
    }
    result.head = head;
    return result;
}

inline double train_accuracy(const swin::LinearParams& head,
                             std::span<const LabeledFeature> dataset,
                             std::span<const std::size_t> indices) {
    if (indices.empty()) return 0.0;
    double correct = 0.0;
    for (std::size_t i : indices) {
        std::array<double, 2> logits = head_logits(head, dataset[i].feature);
        const int pred = logits[1] > logits[0] ? 1 : 0;
        correct += pred == dataset[i].label ? 1.0 : 0.0;
    }
    return correct / static_cast<double>(indices.size());
}

}  // namespace upd::train
