#pragma once

// Deterministic synthetic clips: a smooth two-frequency background, a few
// solid rectangles, a fine plaid ripple, and mild pixel noise. Block
// transforms blur the rectangle edges, ring around them, and band the
// ripple at coarse quantizer steps, which gives a restoration model
// something real to learn. All randomness comes from raw mt19937_64 draws,
// so the same seed yields the same bytes on any conforming implementation.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "elc/frame.hpp"

namespace fixgen {

struct Params {
    int rects = 6;
    int noise = 4;       // peak amplitude of the additive pixel noise
    double detail = 24;  // amplitude of the fine ripple laid over everything
};

inline double unit(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline elc::Plane8 luma(int w, int h, std::mt19937_64& rng, const Params& p = {}) {
    const double tau = 6.283185307179586;
    double fx = 0.5 + 1.5 * unit(rng);
    double fy = 0.5 + 1.5 * unit(rng);
    double phase = tau * unit(rng);
    // The ripple frequencies sit well above what an 8x8 block transform keeps
    // at coarse steps, so the reconstruction shows banding for the model to fix.
    double gx = 6.0 + 10.0 * unit(rng);
    double gy = 3.0 + 5.0 * unit(rng);
    double gp = tau * unit(rng);
    double gq = tau * unit(rng);

    struct Box {
        int x0, y0, x1, y1, level;
    };
    std::vector<Box> boxes;
    for (int i = 0; i < p.rects; ++i) {
        int bw = std::max(3, int(unit(rng) * double(w) / 3.0));
        int bh = std::max(3, int(unit(rng) * double(h) / 3.0));
        int x0 = int(unit(rng) * double(w - bw));
        int y0 = int(unit(rng) * double(h - bh));
        boxes.push_back({x0, y0, x0 + bw, y0 + bh, int(unit(rng) * 255.0)});
    }

    elc::Plane8 out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = 128.0 + 55.0 * std::sin(tau * fx * x / double(w) + phase) *
                                   std::cos(tau * fy * y / double(h));
            for (const Box& b : boxes)
                if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1)
                    v = 0.75 * double(b.level) + 0.25 * v;
            v += p.detail * std::sin(tau * (gx * x + gy * y) / double(w) + gp) *
                 std::cos(tau * (gy * x - gx * y) / double(h) + gq);
            if (p.noise > 0) v += double(int(rng() % uint64_t(2 * p.noise + 1))) - double(p.noise);
            out.at(x, y) = uint8_t(std::clamp(int(std::lround(v)), 0, 255));
        }
    return out;
}

inline elc::YuvFrame frame(int w, int h, std::mt19937_64& rng, const Params& p = {}) {
    const double tau = 6.283185307179586;
    elc::YuvFrame f;
    f.y = luma(w, h, rng, p);
    int cw = elc::chroma_dim(w), ch = elc::chroma_dim(h);
    f.u = elc::Plane8(cw, ch);
    f.v = elc::Plane8(cw, ch);
    double pu = tau * unit(rng), pv = tau * unit(rng);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            double uu = 118.0 + 26.0 * std::sin(tau * x / double(cw) + pu);
            double vv = 132.0 + 22.0 * std::cos(tau * y / double(ch) + pv);
            f.u.at(x, y) = uint8_t(std::clamp(int(std::lround(uu)), 0, 255));
            f.v.at(x, y) = uint8_t(std::clamp(int(std::lround(vv)), 0, 255));
        }
    return f;
}

inline std::vector<elc::YuvFrame> clip(int w, int h, int frames, uint64_t seed,
                                       const Params& p = {}) {
    std::mt19937_64 rng(seed);
    std::vector<elc::YuvFrame> out;
    for (int i = 0; i < frames; ++i) out.push_back(frame(w, h, rng, p));
    return out;
}

}  // namespace fixgen
