#pragma once

#include <cstdint>
#include <vector>

#include "elc/network_config.hpp"
#include "elc/ops.hpp"

namespace elc::net {

// Transmitted form of one conv layer: integer weights on the 1/scale grid,
// plus the raw float32 side data. Biases and affine terms are kept in float
// so the values the encoder evaluates are bit-identical to what a decoder
// reconstructs from the stream.
struct QuantizedLayer {
    ops::ConvSpec spec;
    std::vector<int32_t> wq;
    std::vector<float> bias;
    float gain = 1.0f;
    float offset = 0.0f;
};

struct QuantizedModel {
    double scale = 10.0;
    bool global_skip = true;
    std::vector<QuantizedLayer> layers;

    size_t weight_count() const;
    size_t bias_count() const;

    // Weights of all layers in layer-major (out, in, ky, kx) order.
    std::vector<int32_t> flat_wq() const;

    // FNV-1a over the serialized parameter content; stable across runs.
    uint64_t content_hash() const;

    bool same_architecture(const QuantizedModel& other) const;
};

// All-zero weights and biases with identity affine, shaped per config. Used
// as the fixed reference when coding the shared initial model itself.
QuantizedModel zero_model(const NetworkConfig& cfg);

}  // namespace elc::net
