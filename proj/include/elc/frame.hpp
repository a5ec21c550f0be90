#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace elc {

struct Plane8 {
    int w = 0;
    int h = 0;
    std::vector<uint8_t> data;

    Plane8() = default;
    Plane8(int w_, int h_, uint8_t fill = 0);

    uint8_t& at(int y, int x) { return data[size_t(y) * w + x]; }
    uint8_t at(int y, int x) const { return data[size_t(y) * w + x]; }
    size_t size() const { return data.size(); }
    bool same_size(const Plane8& o) const { return w == o.w && h == o.h; }
};

// 4:2:0 layout: chroma planes at half resolution (rounded up for odd sizes).
struct YuvFrame {
    Plane8 y, u, v;
};

int chroma_dim(int luma_dim);

// Whole-file readers; a trailing partial frame is an error, not a silent drop.
std::vector<YuvFrame> read_yuv420(const std::string& path, int w, int h);
void write_yuv420(const std::string& path, const std::vector<YuvFrame>& frames);

// Binary 8-bit PGM (P5, maxval 255), used for still-image corpora.
Plane8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Plane8& img);

}  // namespace elc
