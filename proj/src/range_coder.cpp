#include "elc/range_coder.hpp"

namespace elc::coder {

std::vector<uint8_t> ac_encode(std::span<const int32_t> symbols) {
    RangeEncoder enc;
    AdaptiveSymbolModel model;
    for (int32_t s : symbols) model.encode_symbol(enc, s);
    return enc.finish();
}

std::vector<int32_t> ac_decode(std::span<const uint8_t> bytes, size_t count) {
    RangeDecoder dec(bytes);
    AdaptiveSymbolModel model;
    std::vector<int32_t> out;
    out.reserve(count);
    for (size_t i = 0; i < count; ++i) out.push_back(model.decode_symbol(dec));
    return out;
}

}  // namespace elc::coder
