#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace elc::net {

struct LayerSpec {
    int out_ch = 0;
    int in_ch = 0;
    int kernel = 0;  // square, odd
    bool relu = true;

    size_t weight_count() const { return size_t(out_ch) * in_ch * kernel * kernel; }
};

// Declarative description of the restoration trunk. The standard table is a
// 22-layer luma network: one 3x3 head into 16 channels, seventeen 3x3 16->16
// body layers, three 1x1 16->16 layers, and a 3x3 tail back to 1 channel,
// with a global skip around the whole trunk.
struct NetworkConfig {
    std::vector<LayerSpec> layers;
    double scale = 10.0;  // quantization grid is 1/scale
    bool global_skip = true;

    static NetworkConfig standard();

    // Throws ConfigError on broken channel chaining, even kernels, or
    // non-positive dimensions.
    void validate() const;

    size_t weight_count() const;
    size_t bias_count() const;
    size_t layer_count() const { return layers.size(); }

    std::string to_json() const;
    static NetworkConfig from_json(const std::string& text);
};

// Exact budget of the standard table. Construction of the standard config
// asserts these, so a drifted layer table cannot slip through silently.
inline constexpr size_t kStandardWeightCount = 40224;
inline constexpr size_t kStandardBiasCount = 337;
inline constexpr size_t kStandardParamCount = 40561;

}  // namespace elc::net
