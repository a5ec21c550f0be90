#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "elc/errors.hpp"

namespace elc::coder {

// Byte-oriented range coder with carry propagation through a cache byte.
// Encoder and decoder renormalize under the same kTopValue condition, so the
// pair is exact: decode(encode(s)) == s for any frequency sequence where
// every encode() call satisfies 0 < freq, start + freq <= total <= kMaxTotal.
inline constexpr uint32_t kTopValue = 1u << 24;
inline constexpr uint32_t kMaxTotal = 1u << 16;

class RangeEncoder {
public:
    void encode(uint32_t start, uint32_t freq, uint32_t total) {
        range_ /= total;
        low_ += uint64_t(start) * range_;
        range_ *= freq;
        while (range_ < kTopValue) {
            range_ <<= 8;
            shift_low();
        }
    }

    // Flushes the pending low bits; the stream always ends with 5 tail bytes.
    std::vector<uint8_t> finish() {
        for (int i = 0; i < 5; ++i) shift_low();
        return std::move(out_);
    }

    size_t bytes_pending() const { return out_.size(); }

private:
    void shift_low() {
        if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
            uint8_t carry = uint8_t(low_ >> 32);
            out_.push_back(uint8_t(cache_ + carry));
            for (; pending_ > 0; --pending_) out_.push_back(uint8_t(0xFF + carry));
            cache_ = uint8_t(low_ >> 24);
        } else {
            ++pending_;
        }
        low_ = (low_ & 0x00FFFFFFu) << 8;
    }

    std::vector<uint8_t> out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t pending_ = 0;
};

class RangeDecoder {
public:
    RangeDecoder(const uint8_t* data, size_t size) : data_(data), size_(size) {
        // Mirrors the encoder's initial cache byte plus the first 4 payload bytes.
        for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
    }

    explicit RangeDecoder(std::span<const uint8_t> bytes)
        : RangeDecoder(bytes.data(), bytes.size()) {}

    // Returns the cumulative-frequency slot of the next symbol, in [0, total).
    uint32_t decode_freq(uint32_t total) {
        range_ /= total;
        uint32_t v = code_ / range_;
        if (v >= total) throw DecodeError("range decoder: cumulative slot out of bounds");
        return v;
    }

    // Must be called with the (start, freq) of the symbol decode_freq selected.
    void decode_update(uint32_t start, uint32_t freq) {
        code_ -= start * range_;
        range_ *= freq;
        while (range_ < kTopValue) {
            code_ = (code_ << 8) | next_byte();
            range_ <<= 8;
        }
    }

    size_t bytes_consumed() const { return pos_; }

private:
    uint8_t next_byte() {
        if (pos_ >= size_) throw DecodeError("range decoder: truncated stream");
        return data_[pos_++];
    }

    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint32_t code_ = 0;
};

// Adaptive model over an alphabet discovered on the fly. Slot 0 is the escape
// symbol with a fixed count of 1; a first-seen value is coded as the escape
// followed by its 32-bit pattern in two uniform 16-bit halves, then enters the
// table with a count of 1 (Laplace smoothing). Subsequent hits add kIncrement.
// Totals stay within kMaxTotal by halving all adaptive counts (floor 1), and
// the table stops growing at kMaxSymbols so totals cannot be pushed past the
// rescale's reach by adversarial input.
class AdaptiveSymbolModel {
public:
    static constexpr uint32_t kIncrement = 32;
    static constexpr size_t kMaxSymbols = size_t(1) << 14;

    AdaptiveSymbolModel() : total_(1) {}

    void encode_symbol(RangeEncoder& enc, int32_t value) {
        auto it = index_.find(value);
        if (it == index_.end()) {
            enc.encode(0, 1, total_);
            uint32_t bits = uint32_t(value);
            enc.encode(bits & 0xFFFFu, 1, 1u << 16);
            enc.encode(bits >> 16, 1, 1u << 16);
            admit(value);
        } else {
            size_t idx = it->second;
            enc.encode(cum_below(idx), counts_[idx], total_);
            bump(idx);
        }
    }

    int32_t decode_symbol(RangeDecoder& dec) {
        uint32_t slot = dec.decode_freq(total_);
        size_t idx = find_slot(slot);
        dec.decode_update(cum_below(idx), counts_[idx]);
        if (idx == 0) {
            uint32_t lo = dec.decode_freq(1u << 16);
            dec.decode_update(lo, 1);
            uint32_t hi = dec.decode_freq(1u << 16);
            dec.decode_update(hi, 1);
            int32_t value = int32_t(lo | (hi << 16));
            admit(value);
            return value;
        }
        int32_t value = values_[idx - 1];
        bump(idx);
        return value;
    }

    size_t alphabet_size() const { return values_.size(); }
    uint32_t total() const { return total_; }

private:
    // counts_[0] is the escape and never changes.
    uint32_t cum_below(size_t idx) const {
        uint32_t s = 0;
        for (size_t i = 0; i < idx; ++i) s += counts_[i];
        return s;
    }

    size_t find_slot(uint32_t slot) const {
        uint32_t s = 0;
        for (size_t i = 0; i < counts_.size(); ++i) {
            s += counts_[i];
            if (slot < s) return i;
        }
        throw DecodeError("adaptive model: slot beyond total");
    }

    void admit(int32_t value) {
        if (values_.size() >= kMaxSymbols) return;  // stream keeps escaping this value
        values_.push_back(value);
        counts_.push_back(1);
        index_.emplace(value, counts_.size() - 1);
        total_ += 1;
        bump(counts_.size() - 1);
    }

    void bump(size_t idx) {
        counts_[idx] += kIncrement;
        total_ += kIncrement;
        if (total_ > kMaxTotal) rescale();
    }

    void rescale() {
        total_ = counts_[0];
        for (size_t i = 1; i < counts_.size(); ++i) {
            counts_[i] = std::max(counts_[i] >> 1, 1u);
            total_ += counts_[i];
        }
    }

    std::vector<uint32_t> counts_{1};
    std::vector<int32_t> values_;
    std::unordered_map<int32_t, size_t> index_;
    uint32_t total_;
};

// Convenience pair used for residue payloads: a fresh adaptive model per call.
std::vector<uint8_t> ac_encode(std::span<const int32_t> symbols);
std::vector<int32_t> ac_decode(std::span<const uint8_t> bytes, size_t count);

}  // namespace elc::coder
