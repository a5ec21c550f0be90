#include "elc/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "elc/errors.hpp"

namespace elc::net {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double unit_uniform(std::mt19937_64& rng) {
    return double(rng() >> 11) * (1.0 / 9007199254740992.0);
}

double unit_normal(std::mt19937_64& rng) {
    // Box-Muller; the +0.5 keeps the log argument away from zero.
    double u1 = (double(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

int32_t quantize_weight(double wl, double scale, const std::string& where) {
    if (!std::isfinite(wl)) throw NumericError("quantize: non-finite weight in " + where);
    double r = std::round(wl * scale);
    if (r < -2147483648.0 || r > 2147483647.0)
        throw NumericError("quantize: weight outside 32-bit range in " + where);
    return int32_t(r);
}

Tensor4 run_trunk(const std::vector<ops::ConvSpec>& specs, const std::vector<bool>& relus,
                  const std::vector<std::vector<double>>& wconv,
                  const std::vector<std::vector<double>>& bias, bool global_skip,
                  const Tensor4& input) {
    if (input.shape.c != specs.front().in_ch)
        throw ShapeError("forward: input has " + std::to_string(input.shape.c) +
                         " channels, network expects " + std::to_string(specs.front().in_ch));
    Tensor4 x = input;
    for (size_t li = 0; li < specs.size(); ++li) {
        x = ops::conv2d(x, wconv[li], bias[li], specs[li], "layer" + std::to_string(li + 1));
        if (relus[li]) x = ops::relu(x);
    }
    if (global_skip) {
        if (x.shape != input.shape)
            throw ShapeError("forward: trunk output shape " + x.shape.str() +
                             " does not match skip input " + input.shape.str());
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] += input.data[i];
    }
    return x;
}

}  // namespace

std::pair<std::vector<int32_t>, std::vector<double>> cqb_weights(std::span<const double> wl,
                                                                 double scale, double gain,
                                                                 double offset) {
    if (!(scale > 0.0)) throw ConfigError("cqb: scale must be positive");
    std::vector<int32_t> wq(wl.size());
    std::vector<double> wconv(wl.size());
    for (size_t i = 0; i < wl.size(); ++i) {
        wq[i] = quantize_weight(wl[i], scale, "weight tensor");
        wconv[i] = gain * (double(wq[i]) / scale) + offset;
    }
    return {std::move(wq), std::move(wconv)};
}

RestorationModel::RestorationModel(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    size_t w_total = 0;
    for (const LayerSpec& l : cfg_.layers) {
        w_off_.push_back(w_total);
        w_total += l.weight_count();
    }
    size_t b_total = 0;
    for (const LayerSpec& l : cfg_.layers) {
        b_off_.push_back(w_total + b_total);
        b_total += size_t(l.out_ch);
    }
    affine_off_ = w_total + b_total;
    theta_.assign(affine_off_ + 2 * cfg_.layers.size(), 0.0);
    for (size_t li = 0; li < cfg_.layers.size(); ++li) theta_[affine_off_ + 2 * li] = 1.0;
}

RestorationModel RestorationModel::init_random(const NetworkConfig& cfg, uint64_t seed) {
    RestorationModel m(cfg);
    std::mt19937_64 rng(seed);
    for (size_t li = 0; li < cfg.layers.size(); ++li) {
        auto w = m.layer_weights(li);
        if (li + 1 == cfg.layers.size()) break;  // zero tail keeps the init an identity
        double fan_in = double(cfg.layers[li].in_ch) * cfg.layers[li].kernel * cfg.layers[li].kernel;
        double sigma = std::sqrt(2.0 / fan_in);
        for (double& v : w) v = sigma * unit_normal(rng);
    }
    return m;
}

std::span<double> RestorationModel::layer_weights(size_t li) {
    return {theta_.data() + w_off_[li], cfg_.layers[li].weight_count()};
}
std::span<const double> RestorationModel::layer_weights(size_t li) const {
    return {theta_.data() + w_off_[li], cfg_.layers[li].weight_count()};
}
std::span<double> RestorationModel::layer_bias(size_t li) {
    return {theta_.data() + b_off_[li], size_t(cfg_.layers[li].out_ch)};
}
std::span<const double> RestorationModel::layer_bias(size_t li) const {
    return {theta_.data() + b_off_[li], size_t(cfg_.layers[li].out_ch)};
}
double& RestorationModel::gain(size_t li) { return theta_[affine_off_ + 2 * li]; }
double& RestorationModel::offset(size_t li) { return theta_[affine_off_ + 2 * li + 1]; }
double RestorationModel::gain(size_t li) const { return theta_[affine_off_ + 2 * li]; }
double RestorationModel::offset(size_t li) const { return theta_[affine_off_ + 2 * li + 1]; }

QuantizedModel RestorationModel::quantize() const {
    QuantizedModel q;
    q.scale = cfg_.scale;
    q.global_skip = cfg_.global_skip;
    for (size_t li = 0; li < cfg_.layers.size(); ++li) {
        const LayerSpec& l = cfg_.layers[li];
        QuantizedLayer ql;
        ql.spec = ops::ConvSpec{l.out_ch, l.in_ch, l.kernel, l.kernel};
        auto w = layer_weights(li);
        ql.wq.resize(w.size());
        for (size_t i = 0; i < w.size(); ++i) ql.wq[i] = quantize_weight(w[i], cfg_.scale, "layer " + std::to_string(li + 1));
        auto b = layer_bias(li);
        ql.bias.resize(b.size());
        for (size_t i = 0; i < b.size(); ++i) ql.bias[i] = float(b[i]);
        ql.gain = float(gain(li));
        ql.offset = float(offset(li));
        q.layers.push_back(std::move(ql));
    }
    return q;
}

void RestorationModel::load_quantized(const QuantizedModel& q) {
    if (q.layers.size() != cfg_.layers.size())
        throw ConfigError("load: model has " + std::to_string(q.layers.size()) +
                          " layers, config expects " + std::to_string(cfg_.layers.size()));
    for (size_t li = 0; li < cfg_.layers.size(); ++li) {
        const LayerSpec& l = cfg_.layers[li];
        const QuantizedLayer& ql = q.layers[li];
        if (ql.spec.out_ch != l.out_ch || ql.spec.in_ch != l.in_ch || ql.spec.kh != l.kernel ||
            ql.spec.kw != l.kernel || ql.wq.size() != l.weight_count())
            throw ConfigError("load: layer " + std::to_string(li + 1) + " shape mismatch");
        auto w = layer_weights(li);
        // W_L sits exactly on the grid, so re-quantizing reproduces W_Q.
        for (size_t i = 0; i < w.size(); ++i) w[i] = double(ql.wq[i]) / cfg_.scale;
        auto b = layer_bias(li);
        for (size_t i = 0; i < b.size(); ++i) b[i] = double(ql.bias[i]);
        gain(li) = double(ql.gain);
        offset(li) = double(ql.offset);
    }
}

Tensor4 RestorationModel::forward(const Tensor4& input) const {
    std::vector<ops::ConvSpec> specs;
    std::vector<bool> relus;
    std::vector<std::vector<double>> wconv(cfg_.layers.size());
    std::vector<std::vector<double>> bias(cfg_.layers.size());
    for (size_t li = 0; li < cfg_.layers.size(); ++li) {
        const LayerSpec& l = cfg_.layers[li];
        specs.push_back({l.out_ch, l.in_ch, l.kernel, l.kernel});
        relus.push_back(l.relu);
        auto w = layer_weights(li);
        wconv[li].resize(w.size());
        double g = gain(li), o = offset(li);
        for (size_t i = 0; i < w.size(); ++i)
            wconv[li][i] = g * (double(quantize_weight(w[i], cfg_.scale, "layer " + std::to_string(li + 1))) / cfg_.scale) + o;
        auto b = layer_bias(li);
        bias[li].assign(b.begin(), b.end());
    }
    return run_trunk(specs, relus, wconv, bias, cfg_.global_skip, input);
}

Tensor4 forward_quantized(const QuantizedModel& q, const Tensor4& input) {
    std::vector<ops::ConvSpec> specs;
    std::vector<bool> relus;
    std::vector<std::vector<double>> wconv(q.layers.size());
    std::vector<std::vector<double>> bias(q.layers.size());
    for (size_t li = 0; li < q.layers.size(); ++li) {
        const QuantizedLayer& ql = q.layers[li];
        specs.push_back(ql.spec);
        // Activation layout is positional: every layer but the last rectifies.
        relus.push_back(li + 1 < q.layers.size());
        double g = double(ql.gain), o = double(ql.offset);
        wconv[li].resize(ql.wq.size());
        for (size_t i = 0; i < ql.wq.size(); ++i)
            wconv[li][i] = g * (double(ql.wq[i]) / q.scale) + o;
        bias[li].assign(ql.bias.begin(), ql.bias.end());
    }
    return run_trunk(specs, relus, wconv, bias, q.global_skip, input);
}

void TrainingConfig::validate(int64_t min_h, int64_t min_w) const {
    if (patch <= 0 || lr <= 0.0 || iters_per_epoch < 0 || max_epochs < 0 || batch <= 0 ||
        probe_crops <= 0)
        throw ConfigError("training config: non-positive field");
    if (min_h < patch || min_w < patch)
        throw ConfigError("training config: patch " + std::to_string(patch) +
                          " exceeds smallest frame " + std::to_string(min_h) + "x" +
                          std::to_string(min_w));
}

namespace {

// One SGD iteration's tensor traffic, reused across iterations.
struct TrainScratchImpl {
    std::vector<Tensor4> acts;  // acts[li] feeds layer li; acts[L] is the trunk output
    std::vector<Tensor4> pre;   // pre-activation conv outputs
    std::vector<std::vector<double>> wconv;
    std::vector<std::vector<double>> wq_over_scale;
    std::vector<double> gwconv;
};

struct CropSampler {
    const std::vector<Tensor4>& degraded;
    const std::vector<Tensor4>& original;
    int patch;

    void fill(std::mt19937_64& rng, Tensor4& in, Tensor4& target) const {
        for (int64_t b = 0; b < in.shape.n; ++b) {
            size_t f = size_t(rng() % degraded.size());
            const Tensor4 &d = degraded[f], &o = original[f];
            int64_t y = int64_t(rng() % uint64_t(d.shape.h - patch + 1));
            int64_t x = int64_t(rng() % uint64_t(d.shape.w - patch + 1));
            for (int64_t r = 0; r < patch; ++r)
                for (int64_t c = 0; c < patch; ++c) {
                    in.at(b, 0, r, c) = d.at(0, 0, y + r, x + c);
                    target.at(b, 0, r, c) = o.at(0, 0, y + r, x + c);
                }
        }
    }
};

// Forward + backward + gradient assembly over the flattened state.
double train_iteration(RestorationModel& model, const Tensor4& in, const Tensor4& target,
                       std::vector<double>& gtheta, TrainScratchImpl& ws) {
    const NetworkConfig& cfg = model.config();
    const size_t L = cfg.layers.size();
    ws.acts.resize(L + 1);
    ws.pre.resize(L);
    ws.wconv.resize(L);
    ws.wq_over_scale.resize(L);

    ws.acts[0] = in;
    for (size_t li = 0; li < L; ++li) {
        const LayerSpec& l = cfg.layers[li];
        ops::ConvSpec spec{l.out_ch, l.in_ch, l.kernel, l.kernel};
        auto w = model.layer_weights(li);
        double g = model.gain(li), o = model.offset(li);
        ws.wconv[li].resize(w.size());
        ws.wq_over_scale[li].resize(w.size());
        for (size_t i = 0; i < w.size(); ++i) {
            double wq = std::round(w[i] * cfg.scale);
            ws.wq_over_scale[li][i] = wq / cfg.scale;
            ws.wconv[li][i] = g * ws.wq_over_scale[li][i] + o;
        }
        ws.pre[li] = ops::conv2d(ws.acts[li], ws.wconv[li], model.layer_bias(li), spec,
                                 "layer" + std::to_string(li + 1));
        ws.acts[li + 1] = l.relu ? ops::relu(ws.pre[li]) : ws.pre[li];
    }

    Tensor4 out = ws.acts[L];
    if (cfg.global_skip)
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += in.data[i];

    auto [loss, gout] = ops::mse_loss(out, target);
    if (!std::isfinite(loss)) return loss;

    std::fill(gtheta.begin(), gtheta.end(), 0.0);
    Tensor4 g = std::move(gout);  // d loss / d trunk output (skip adds nothing here)
    for (size_t li = L; li-- > 0;) {
        const LayerSpec& l = cfg.layers[li];
        ops::ConvSpec spec{l.out_ch, l.in_ch, l.kernel, l.kernel};
        if (l.relu) g = ops::relu_backward(ws.pre[li], g);

        ws.gwconv.assign(ws.wconv[li].size(), 0.0);
        size_t wbase = size_t(model.layer_weights(li).data() - model.theta().data());
        size_t bbase = size_t(model.layer_bias(li).data() - model.theta().data());
        std::span<double> gb(gtheta.data() + bbase, size_t(l.out_ch));
        Tensor4 gprev;
        ops::conv2d_backward(ws.acts[li], ws.wconv[li], spec, g, li > 0 ? &gprev : nullptr,
                             ws.gwconv, gb, "layer" + std::to_string(li + 1));

        // Chain through the quantization block: rounding passes gradients
        // straight through, so d wconv / d w_l reduces to the gain.
        double gain = model.gain(li);
        double dgain = 0.0, doffset = 0.0;
        for (size_t i = 0; i < ws.gwconv.size(); ++i) {
            gtheta[wbase + i] = ws.gwconv[i] * gain;
            dgain += ws.gwconv[i] * ws.wq_over_scale[li][i];
            doffset += ws.gwconv[i];
        }
        size_t abase = model.theta().size() - 2 * L;
        gtheta[abase + 2 * li] = dgain;
        gtheta[abase + 2 * li + 1] = doffset;
        if (li > 0) g = std::move(gprev);
    }
    return loss;
}

}  // namespace

std::vector<ModelCheckpoint> train_online(const RestorationModel& initial,
                                          const std::vector<Tensor4>& degraded,
                                          const std::vector<Tensor4>& original,
                                          const TrainingConfig& cfg, const ElSizeFn& el_size) {
    if (degraded.empty() || degraded.size() != original.size())
        throw ConfigError("train: need equal nonzero counts of degraded and original frames");
    int64_t min_h = degraded[0].shape.h, min_w = degraded[0].shape.w;
    for (size_t i = 0; i < degraded.size(); ++i) {
        if (degraded[i].shape != original[i].shape)
            throw ShapeError("train: pair " + std::to_string(i) + " shapes differ");
        if (degraded[i].shape.n != 1 || degraded[i].shape.c != 1)
            throw ShapeError("train: frames must be single-plane (1,1,H,W)");
        min_h = std::min(min_h, degraded[i].shape.h);
        min_w = std::min(min_w, degraded[i].shape.w);
    }
    cfg.validate(min_h, min_w);

    RestorationModel model = initial;
    CropSampler sampler{degraded, original, cfg.patch};

    // Fixed probe crops make per-epoch MSE values comparable across epochs.
    Tensor4 probe_in(Shape4{cfg.probe_crops, 1, cfg.patch, cfg.patch});
    Tensor4 probe_target(probe_in.shape);
    std::mt19937_64 probe_rng(cfg.seed ^ 0x517cc1b727220a95ull);
    sampler.fill(probe_rng, probe_in, probe_target);

    auto make_checkpoint = [&](int epoch) {
        ModelCheckpoint ck;
        ck.epoch = epoch;
        ck.theta = model.theta();
        ck.quantized = model.quantize();
        ck.id = ck.quantized.content_hash();
        Tensor4 enhanced = forward_quantized(ck.quantized, probe_in);
        ck.train_mse = ops::mse_loss(enhanced, probe_target).first;
        return ck;
    };

    std::vector<ModelCheckpoint> checkpoints;
    {
        ModelCheckpoint ck0 = make_checkpoint(0);
        if (el_size && el_size(ck0.quantized) > cfg.size_cap_bytes) return checkpoints;
        checkpoints.push_back(std::move(ck0));
    }
    if (cfg.iters_per_epoch == 0 || cfg.max_epochs == 0) return checkpoints;

    std::mt19937_64 rng(cfg.seed);
    ops::AdamState adam(model.theta().size(), cfg.lr);
    std::vector<double> gtheta(model.theta().size(), 0.0);
    TrainScratchImpl ws;
    Tensor4 batch_in(Shape4{cfg.batch, 1, cfg.patch, cfg.patch});
    Tensor4 batch_target(batch_in.shape);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (int it = 0; it < cfg.iters_per_epoch; ++it) {
            sampler.fill(rng, batch_in, batch_target);
            double loss = train_iteration(model, batch_in, batch_target, gtheta, ws);
            if (!std::isfinite(loss)) return checkpoints;  // diverged; keep what we have
            try {
                ops::adam_step(model.theta(), gtheta, adam);
            } catch (const NumericError&) {
                return checkpoints;
            }
        }
        ModelCheckpoint ck = make_checkpoint(epoch);
        if (el_size && el_size(ck.quantized) > cfg.size_cap_bytes) break;  // drop violator
        checkpoints.push_back(std::move(ck));
    }
    return checkpoints;
}

}  // namespace elc::net
