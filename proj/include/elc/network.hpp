#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "elc/network_config.hpp"
#include "elc/ops.hpp"
#include "elc/quantized_model.hpp"
#include "elc/tensor.hpp"

namespace elc::net {

// The quantization block on a weight tensor: W_Q = round(W_L * scale) with
// ties away from zero, W_conv = gain * (W_Q / scale) + offset. Throws
// ConfigError on non-positive scale, NumericError on non-finite or
// 32-bit-overflowing weights.
std::pair<std::vector<int32_t>, std::vector<double>> cqb_weights(std::span<const double> wl,
                                                                 double scale, double gain,
                                                                 double offset);

// Learnable state, flattened so one optimizer instance covers everything:
// [ all W_L, layer-major | all biases, layer-major | (gain, offset) per layer ].
class RestorationModel {
public:
    RestorationModel() = default;
    explicit RestorationModel(const NetworkConfig& cfg);

    // He-style normal init scaled by fan-in; the last layer starts at zero so
    // the freshly built model is an identity enhancer through the skip.
    static RestorationModel init_random(const NetworkConfig& cfg, uint64_t seed);

    const NetworkConfig& config() const { return cfg_; }
    std::vector<double>& theta() { return theta_; }
    const std::vector<double>& theta() const { return theta_; }

    std::span<double> layer_weights(size_t li);
    std::span<const double> layer_weights(size_t li) const;
    std::span<double> layer_bias(size_t li);
    std::span<const double> layer_bias(size_t li) const;
    double& gain(size_t li);
    double& offset(size_t li);
    double gain(size_t li) const;
    double offset(size_t li) const;

    // Rounds W_L onto the transmission grid and narrows side data to float32.
    QuantizedModel quantize() const;

    // Loads transmitted parameters back as learnable state with W_L = W_Q/scale,
    // so re-quantizing reproduces W_Q exactly and fine-tuning can resume.
    void load_quantized(const QuantizedModel& q);

    // Enhancement forward pass through quantized weights (the only weights the
    // conv layers ever see). Input is (N,1,H,W) in [0,1] units.
    Tensor4 forward(const Tensor4& input) const;

private:
    NetworkConfig cfg_;
    std::vector<double> theta_;
    std::vector<size_t> w_off_;  // per-layer offsets into theta_
    std::vector<size_t> b_off_;
    size_t affine_off_ = 0;

    friend struct TrainScratch;
};

// Runs the forward pass with weights derived from a transmitted model.
// Decoder-side twin of RestorationModel::forward.
Tensor4 forward_quantized(const QuantizedModel& q, const Tensor4& input);

struct ModelCheckpoint {
    int epoch = 0;
    std::vector<double> theta;  // full learnable snapshot
    QuantizedModel quantized;
    double train_mse = 0.0;  // MSE of the quantized model on the probe crops
    uint64_t id = 0;         // content hash of `quantized`
};

struct TrainingConfig {
    int patch = 35;
    double lr = 0.0002;
    int iters_per_epoch = 1000;
    int max_epochs = 5;
    int batch = 64;
    uint64_t seed = 1;
    size_t size_cap_bytes = 13824;
    int probe_crops = 64;  // fixed crop set used for per-epoch MSE reporting

    void validate(int64_t min_h, int64_t min_w) const;  // ConfigError on misuse
};

// Compressed-size callback: the caller supplies whatever serializer defines
// "EL size" so this module stays independent of the container format.
using ElSizeFn = std::function<size_t(const QuantizedModel&)>;

// Fine-tunes `initial` on aligned (degraded, original) luma pairs in [0,1]
// units, one checkpoint per epoch with epoch 0 being the initial model
// itself. Stops at max_epochs, or drops the first checkpoint whose
// compressed size exceeds the cap and stops, or aborts on non-finite loss
// (returning the checkpoints gathered so far).
std::vector<ModelCheckpoint> train_online(const RestorationModel& initial,
                                          const std::vector<Tensor4>& degraded,
                                          const std::vector<Tensor4>& original,
                                          const TrainingConfig& cfg,
                                          const ElSizeFn& el_size);

}  // namespace elc::net
