#include "elc/frame.hpp"

#include <cctype>
#include <cstdio>
#include <memory>

#include "elc/errors.hpp"

namespace elc {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path);
    return f;
}

void read_exact(std::FILE* f, uint8_t* dst, size_t n, const std::string& path) {
    if (std::fread(dst, 1, n, f) != n) throw IoError("truncated read from " + path);
}

void write_exact(std::FILE* f, const uint8_t* src, size_t n, const std::string& path) {
    if (std::fwrite(src, 1, n, f) != n) throw IoError("short write to " + path);
}

// Skips PGM whitespace and '#' comment lines, then parses one decimal token.
int pgm_token(std::FILE* f, const std::string& path) {
    int c = std::fgetc(f);
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = std::fgetc(f);
        c = std::fgetc(f);
    }
    if (c == EOF || !std::isdigit(c)) throw IoError("malformed PGM header in " + path);
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > 1000000) throw IoError("malformed PGM header in " + path);
        c = std::fgetc(f);
    }
    return v;
}

}  // namespace

Plane8::Plane8(int w_, int h_, uint8_t fill) : w(w_), h(h_) {
    if (w <= 0 || h <= 0) throw ShapeError("plane dimensions must be positive");
    data.assign(size_t(w) * h, fill);
}

int chroma_dim(int luma_dim) { return (luma_dim + 1) / 2; }

std::vector<YuvFrame> read_yuv420(const std::string& path, int w, int h) {
    if (w <= 0 || h <= 0) throw ConfigError("yuv dimensions must be positive");
    FilePtr f = open_file(path, "rb");
    std::fseek(f.get(), 0, SEEK_END);
    long fsize = std::ftell(f.get());
    std::fseek(f.get(), 0, SEEK_SET);
    if (fsize < 0) throw IoError("cannot stat " + path);

    int cw = chroma_dim(w), ch = chroma_dim(h);
    size_t frame_bytes = size_t(w) * h + 2 * size_t(cw) * ch;
    if (fsize == 0 || size_t(fsize) % frame_bytes != 0)
        throw IoError("truncated or empty yuv file " + path + ": " + std::to_string(fsize) +
                      " bytes is not a multiple of the " + std::to_string(frame_bytes) +
                      "-byte frame size");

    std::vector<YuvFrame> frames(size_t(fsize) / frame_bytes);
    for (YuvFrame& fr : frames) {
        fr.y = Plane8(w, h);
        fr.u = Plane8(cw, ch);
        fr.v = Plane8(cw, ch);
        read_exact(f.get(), fr.y.data.data(), fr.y.size(), path);
        read_exact(f.get(), fr.u.data.data(), fr.u.size(), path);
        read_exact(f.get(), fr.v.data.data(), fr.v.size(), path);
    }
    return frames;
}

void write_yuv420(const std::string& path, const std::vector<YuvFrame>& frames) {
    FilePtr f = open_file(path, "wb");
    for (const YuvFrame& fr : frames) {
        write_exact(f.get(), fr.y.data.data(), fr.y.size(), path);
        write_exact(f.get(), fr.u.data.data(), fr.u.size(), path);
        write_exact(f.get(), fr.v.data.data(), fr.v.size(), path);
    }
}

Plane8 read_pgm(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    int m0 = std::fgetc(f.get()), m1 = std::fgetc(f.get());
    if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM: " + path);
    int w = pgm_token(f.get(), path);
    int h = pgm_token(f.get(), path);
    int maxval = pgm_token(f.get(), path);
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("unsupported PGM geometry or depth in " + path);
    // Exactly one whitespace byte separates the header from the raster.
    Plane8 img(w, h);
    read_exact(f.get(), img.data.data(), img.size(), path);
    return img;
}

void write_pgm(const std::string& path, const Plane8& img) {
    FilePtr f = open_file(path, "wb");
    std::string head = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    write_exact(f.get(), reinterpret_cast<const uint8_t*>(head.data()), head.size(), path);
    write_exact(f.get(), img.data.data(), img.size(), path);
}

}  // namespace elc
