#pragma once

// Classifier abstraction the explainers run against. Anything that can score
// an image and expose its final token grid can be explained; the Swin
// classifier is the production implementation.

#include <array>
#include <utility>

#include "upd/raster.hpp"
#include "upd/swin.hpp"

namespace upd {

class ClassifierModel {
public:
    virtual ~ClassifierModel() = default;
    // Softmax class probabilities for one image. Counted as one forward pass.
    virtual std::array<double, 2> predict_probs(const ImageRaster& image) const = 0;
    // Final-stage token grid at its spatial layout. Counted as one forward pass.
    virtual FeatureGrid last_stage_grid(const ImageRaster& image) const = 0;
};

class SwinModel final : public ClassifierModel {
public:
    explicit SwinModel(swin::SwinWeights weights) : weights_(std::move(weights)) {}

    const swin::SwinConfig& config() const { return weights_.cfg; }
    const swin::SwinWeights& weights() const { return weights_; }

    swin::ForwardTrace forward(const ImageRaster& image) const {
        return swin::forward(image, weights_.cfg, weights_);
    }

    std::array<double, 2> predict_probs(const ImageRaster& image) const override {
        return forward(image).probs;
    }

    FeatureGrid last_stage_grid(const ImageRaster& image) const override {
        return forward(image).stages[3];
    }

private:
    swin::SwinWeights weights_;
};

}  // namespace upd
