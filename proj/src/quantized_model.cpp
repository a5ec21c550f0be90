#include "elc/quantized_model.hpp"

#include <cstring>

namespace elc::net {

namespace {

// FNV-1a, 64-bit.
struct Fnv64 {
    uint64_t h = 0xcbf29ce484222325ull;
    void bytes(const void* p, size_t n) {
        const uint8_t* b = static_cast<const uint8_t*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    }
    void u32(uint32_t v) {
        uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
        bytes(b, 4);
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u32(uint32_t(bits));
        u32(uint32_t(bits >> 32));
    }
};

}  // namespace

size_t QuantizedModel::weight_count() const {
    size_t n = 0;
    for (const QuantizedLayer& l : layers) n += l.wq.size();
    return n;
}

size_t QuantizedModel::bias_count() const {
    size_t n = 0;
    for (const QuantizedLayer& l : layers) n += l.bias.size();
    return n;
}

std::vector<int32_t> QuantizedModel::flat_wq() const {
    std::vector<int32_t> out;
    out.reserve(weight_count());
    for (const QuantizedLayer& l : layers) out.insert(out.end(), l.wq.begin(), l.wq.end());
    return out;
}

uint64_t QuantizedModel::content_hash() const {
    Fnv64 f;
    f.f64(scale);
    f.u32(global_skip ? 1u : 0u);
    f.u32(uint32_t(layers.size()));
    for (const QuantizedLayer& l : layers) {
        f.u32(uint32_t(l.spec.out_ch));
        f.u32(uint32_t(l.spec.in_ch));
        f.u32(uint32_t(l.spec.kh));
        f.u32(uint32_t(l.spec.kw));
        for (int32_t w : l.wq) f.u32(uint32_t(w));
        for (float b : l.bias) f.f32(b);
        f.f32(l.gain);
        f.f32(l.offset);
    }
    return f.h;
}

bool QuantizedModel::same_architecture(const QuantizedModel& other) const {
    if (layers.size() != other.layers.size()) return false;
    if (scale != other.scale || global_skip != other.global_skip) return false;
    for (size_t i = 0; i < layers.size(); ++i) {
        const ops::ConvSpec &a = layers[i].spec, &b = other.layers[i].spec;
        if (a.out_ch != b.out_ch || a.in_ch != b.in_ch || a.kh != b.kh || a.kw != b.kw)
            return false;
    }
    return true;
}

QuantizedModel zero_model(const NetworkConfig& cfg) {
    cfg.validate();
    QuantizedModel m;
    m.scale = cfg.scale;
    m.global_skip = cfg.global_skip;
    for (const LayerSpec& l : cfg.layers) {
        QuantizedLayer q;
        q.spec = ops::ConvSpec{l.out_ch, l.in_ch, l.kernel, l.kernel};
        q.wq.assign(l.weight_count(), 0);
        q.bias.assign(size_t(l.out_ch), 0.0f);
        q.gain = 1.0f;
        q.offset = 0.0f;
        m.layers.push_back(std::move(q));
    }
    return m;
}

}  // namespace elc::net
