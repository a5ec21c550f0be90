#include "elc/model_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <string>

#include "elc/errors.hpp"

namespace elc::codec {

namespace {

uint32_t fnv1a32(const uint8_t* p, size_t n) {
    uint32_t h = 0x811c9dc5u;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 16777619u;
    }
    return h;
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
}

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct ByteReader {
    const uint8_t* p;
    size_t n;
    size_t pos = 0;

    uint32_t u32() {
        if (pos + 4 > n) throw DecodeError("enhancement stream: truncated field");
        uint32_t v = uint32_t(p[pos]) | uint32_t(p[pos + 1]) << 8 | uint32_t(p[pos + 2]) << 16 |
                     uint32_t(p[pos + 3]) << 24;
        pos += 4;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

void require_same_arch(const net::QuantizedModel& a, const net::QuantizedModel& b,
                       const char* what) {
    if (!a.same_architecture(b))
        throw ConfigError(std::string(what) + ": model architectures do not match");
}

}  // namespace

std::vector<int32_t> diff(const net::QuantizedModel& current, const net::QuantizedModel& initial) {
    require_same_arch(current, initial, "diff");
    std::vector<int32_t> residue;
    residue.reserve(current.weight_count());
    for (size_t li = 0; li < current.layers.size(); ++li) {
        const auto& c = current.layers[li].wq;
        const auto& i = initial.layers[li].wq;
        for (size_t k = 0; k < c.size(); ++k) {
            int64_t d = int64_t(c[k]) - int64_t(i[k]);
            if (d < INT32_MIN || d > INT32_MAX)
                throw NumericError("diff: residue exceeds 32-bit range in layer " +
                                   std::to_string(li + 1));
            residue.push_back(int32_t(d));
        }
    }
    return residue;
}

net::QuantizedModel add(const net::QuantizedModel& initial, std::span<const int32_t> residue) {
    if (residue.size() != initial.weight_count())
        throw DecodeError("add: residue has " + std::to_string(residue.size()) +
                          " symbols, model expects " + std::to_string(initial.weight_count()));
    net::QuantizedModel out = initial;
    size_t k = 0;
    for (size_t li = 0; li < out.layers.size(); ++li) {
        for (auto& w : out.layers[li].wq) {
            int64_t v = int64_t(w) + int64_t(residue[k++]);
            if (v < INT32_MIN || v > INT32_MAX)
                throw DecodeError("add: reconstructed weight exceeds 32-bit range in layer " +
                                  std::to_string(li + 1));
            w = int32_t(v);
        }
    }
    return out;
}

double empirical_entropy(std::span<const int32_t> symbols) {
    if (symbols.empty()) throw NumericError("empirical_entropy: empty input");
    std::map<int32_t, size_t> counts;
    for (int32_t s : symbols) counts[s]++;
    double h = 0.0;
    double n = double(symbols.size());
    for (const auto& [v, c] : counts) {
        double p = double(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

std::vector<uint8_t> serialize_el(const net::QuantizedModel& current,
                                  const net::QuantizedModel& initial, bool as_reference) {
    std::vector<int32_t> residue = diff(current, initial);
    std::vector<uint8_t> coded = ac_encode(residue);

    std::vector<uint8_t> out;
    out.reserve(kElHeaderBytes + 12 + coded.size() + current.bias_count() * 4 +
                current.layers.size() * 8);
    out.insert(out.end(), {'E', 'L', 'B', '1'});
    out.push_back(kElVersion);
    put_u32(out, 0);  // checksum backfilled below
    out.push_back(uint8_t(1u | (as_reference ? 2u : 0u)));
    out.push_back(0);
    out.push_back(0);

    put_u32(out, uint32_t(current.layers.size()));
    put_u32(out, uint32_t(residue.size()));
    put_u32(out, uint32_t(coded.size()));
    out.insert(out.end(), coded.begin(), coded.end());
    for (const auto& l : current.layers)
        for (float b : l.bias) put_f32(out, b);
    for (const auto& l : current.layers) {
        put_f32(out, l.gain);
        put_f32(out, l.offset);
    }

    uint32_t sum = fnv1a32(out.data() + 9, out.size() - 9);
    out[5] = uint8_t(sum);
    out[6] = uint8_t(sum >> 8);
    out[7] = uint8_t(sum >> 16);
    out[8] = uint8_t(sum >> 24);
    return out;
}

std::vector<uint8_t> serialize_no_el() {
    std::vector<uint8_t> out{'E', 'L', 'B', '1'};
    out.push_back(kElVersion);
    put_u32(out, 0);
    out.push_back(0);  // no payload
    out.push_back(0);
    out.push_back(0);
    uint32_t sum = fnv1a32(out.data() + 9, out.size() - 9);
    out[5] = uint8_t(sum);
    out[6] = uint8_t(sum >> 8);
    out[7] = uint8_t(sum >> 16);
    out[8] = uint8_t(sum >> 24);
    return out;
}

ElHeader parse_el_header(std::span<const uint8_t> bytes) {
    if (bytes.size() < kElHeaderBytes) throw DecodeError("enhancement stream: shorter than header");
    if (std::memcmp(bytes.data(), "ELB1", 4) != 0)
        throw DecodeError("enhancement stream: bad magic");
    if (bytes[4] != kElVersion)
        throw DecodeError("enhancement stream: unsupported version " + std::to_string(bytes[4]));
    uint32_t stored = uint32_t(bytes[5]) | uint32_t(bytes[6]) << 8 | uint32_t(bytes[7]) << 16 |
                      uint32_t(bytes[8]) << 24;
    uint32_t actual = fnv1a32(bytes.data() + 9, bytes.size() - 9);
    if (stored != actual) throw DecodeError("enhancement stream: checksum mismatch");
    uint8_t flags = bytes[9];
    if (bytes[10] != 0 || bytes[11] != 0)
        throw DecodeError("enhancement stream: nonzero reserved bytes");
    ElHeader h;
    h.present = (flags & 1u) != 0;
    h.reference = (flags & 2u) != 0;
    if (!h.present && bytes.size() != kElHeaderBytes)
        throw DecodeError("enhancement stream: trailing bytes after empty header");
    return h;
}

net::QuantizedModel deserialize_el(std::span<const uint8_t> bytes,
                                   const net::QuantizedModel& initial) {
    ElHeader h = parse_el_header(bytes);
    if (!h.present) throw DecodeError("enhancement stream: no payload to decode");

    ByteReader rd{bytes.data(), bytes.size(), kElHeaderBytes};
    uint32_t layer_count = rd.u32();
    uint32_t symbol_count = rd.u32();
    uint32_t coded_len = rd.u32();
    if (layer_count != initial.layers.size())
        throw DecodeError("enhancement stream: layer count " + std::to_string(layer_count) +
                          " does not match shared initial model");
    if (symbol_count != initial.weight_count())
        throw DecodeError("enhancement stream: weight count mismatch");

    size_t expected = kElHeaderBytes + 12 + size_t(coded_len) + initial.bias_count() * 4 +
                      initial.layers.size() * 8;
    if (bytes.size() != expected)
        throw DecodeError("enhancement stream: size " + std::to_string(bytes.size()) +
                          " does not match declared layout (" + std::to_string(expected) + ")");

    std::span<const uint8_t> coded = bytes.subspan(rd.pos, coded_len);
    std::vector<int32_t> residue = ac_decode(coded, symbol_count);
    rd.pos += coded_len;

    net::QuantizedModel out = add(initial, residue);
    for (auto& l : out.layers)
        for (float& b : l.bias) b = rd.f32();
    for (auto& l : out.layers) {
        l.gain = rd.f32();
        l.offset = rd.f32();
    }
    return out;
}

std::vector<uint8_t> serialize_initial(const net::QuantizedModel& initial) {
    // Coded against an all-zero reference shaped like the model itself.
    net::QuantizedModel zero = initial;
    for (auto& l : zero.layers) {
        std::fill(l.wq.begin(), l.wq.end(), 0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0f);
        l.gain = 1.0f;
        l.offset = 0.0f;
    }
    return serialize_el(initial, zero, true);
}

net::QuantizedModel deserialize_initial(std::span<const uint8_t> bytes,
                                        const net::NetworkConfig& cfg) {
    ElHeader h = parse_el_header(bytes);
    if (!h.reference) throw DecodeError("initial model stream: reference flag not set");
    return deserialize_el(bytes, net::zero_model(cfg));
}

ElAccounting accounting(const net::QuantizedModel& m, size_t file_bytes) {
    ElAccounting a;
    a.file_bytes = file_bytes;
    a.r_model_bits = uint64_t(file_bytes) * 8;
    a.r_biases_bits = uint64_t(m.bias_count()) * 32;
    a.r_affine_bits = uint64_t(m.layers.size()) * 2 * 32;
    if (a.r_model_bits < a.r_biases_bits + a.r_affine_bits)
        throw NumericError("accounting: stream smaller than its fixed raw blocks");
    a.r_res_bits = a.r_model_bits - a.r_biases_bits - a.r_affine_bits;
    return a;
}

uint64_t r_ori_bits(const net::QuantizedModel& m) {
    return (uint64_t(m.weight_count()) + m.bias_count() + 2 * m.layers.size()) * 32;
}

double compression_ratio(double r_ori, double r_model) {
    if (r_model == 0.0) throw NumericError("compression_ratio: zero model rate");
    return r_ori / r_model;
}

}  // namespace elc::codec
