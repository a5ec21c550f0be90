#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elc/quantized_model.hpp"
#include "elc/range_coder.hpp"

namespace elc::codec {

using coder::ac_decode;
using coder::ac_encode;

// Elementwise W_Q deltas in layer-major order; add() inverts diff() exactly.
std::vector<int32_t> diff(const net::QuantizedModel& current, const net::QuantizedModel& initial);
net::QuantizedModel add(const net::QuantizedModel& initial, std::span<const int32_t> residue);

// Shannon entropy of the empirical symbol distribution, bits per symbol.
double empirical_entropy(std::span<const int32_t> symbols);

// Container layout (all integers little-endian):
//   offset 0   magic "ELB1"
//   offset 4   version byte (1)
//   offset 5   checksum: FNV-1a32 over every byte from offset 9 to the end
//   offset 9   flags: bit0 = payload present, bit1 = reference (initial) model
//   offset 10  reserved, two zero bytes
// A header-only stream (12 bytes, bit0 clear) means "no enhancement".
// With bit0 set the header is followed by:
//   layer count u32, weight symbol count u32, coded residue length u32,
//   coded residue bytes, all biases as raw float32, then per layer
//   (gain, offset) as raw float32.
inline constexpr size_t kElHeaderBytes = 12;
inline constexpr uint8_t kElVersion = 1;

struct ElHeader {
    bool present = false;
    bool reference = false;
};

std::vector<uint8_t> serialize_el(const net::QuantizedModel& current,
                                  const net::QuantizedModel& initial, bool as_reference = false);
std::vector<uint8_t> serialize_no_el();

// Validates magic, version, and checksum; does not touch the payload.
ElHeader parse_el_header(std::span<const uint8_t> bytes);

// Reconstructs the transmitted model against the shared initial model.
// Throws DecodeError on any inconsistency: bad magic/version/checksum, size
// fields that disagree with the actual byte count, architecture mismatch
// against `initial`, or a residue stream that fails to decode.
net::QuantizedModel deserialize_el(std::span<const uint8_t> bytes,
                                   const net::QuantizedModel& initial);

// The initial model travels in the same container, coded against all zeros.
std::vector<uint8_t> serialize_initial(const net::QuantizedModel& initial);
net::QuantizedModel deserialize_initial(std::span<const uint8_t> bytes,
                                        const net::NetworkConfig& cfg);

// Bit accounting for one serialized stream. The fixed raw blocks are priced
// at exactly 32 bits per value; everything else (header, size fields, coded
// residue) is attributed to the residue term, so the three parts always sum
// to the true file size in bits.
struct ElAccounting {
    size_t file_bytes = 0;
    uint64_t r_model_bits = 0;
    uint64_t r_res_bits = 0;
    uint64_t r_biases_bits = 0;
    uint64_t r_affine_bits = 0;
};

ElAccounting accounting(const net::QuantizedModel& m, size_t file_bytes);

// Bits of the uncompressed model: every transmitted parameter at float32.
uint64_t r_ori_bits(const net::QuantizedModel& m);

// Throws NumericError when r_model_bits is zero.
double compression_ratio(double r_ori_bits, double r_model_bits);

}  // namespace elc::codec
