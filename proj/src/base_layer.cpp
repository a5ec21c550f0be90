#include "elc/base_layer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "elc/errors.hpp"
#include "elc/range_coder.hpp"

namespace elc::bl {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct DctTables {
    // basis[u][x] = a(u) * cos((2x+1) u pi / 16), orthonormal.
    std::array<std::array<double, 8>, 8> basis;
    std::array<int, 64> zigzag;  // zigzag[i] = raster index of i-th scan position

    DctTables() {
        for (int u = 0; u < 8; ++u) {
            double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) basis[u][x] = a * std::cos((2 * x + 1) * u * kPi / 16.0);
        }
        // Diagonal walk, alternating direction.
        int i = 0;
        for (int s = 0; s < 15; ++s) {
            if (s % 2 == 0)
                for (int y = std::min(s, 7); y >= 0 && s - y <= 7; --y) zigzag[i++] = y * 8 + (s - y);
            else
                for (int x = std::min(s, 7); x >= 0 && s - x <= 7; --x) zigzag[i++] = (s - x) * 8 + x;
        }
    }
};

const DctTables& tables() {
    static const DctTables t;
    return t;
}

// Scan-position context: DC, low, mid, and high frequency bands.
int band_of(int scan_pos) {
    if (scan_pos == 0) return 0;
    if (scan_pos <= 5) return 1;
    if (scan_pos <= 20) return 2;
    return 3;
}

double round_away(double x) { return x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5); }

void fdct8x8(const double in[64], double out[64]) {
    const auto& b = tables().basis;
    double tmp[64];
    for (int y = 0; y < 8; ++y)
        for (int u = 0; u < 8; ++u) {
            double s = 0.0;
            for (int x = 0; x < 8; ++x) s += in[y * 8 + x] * b[u][x];
            tmp[y * 8 + u] = s;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) s += tmp[y * 8 + u] * b[v][y];
            out[v * 8 + u] = s;
        }
}

void idct8x8(const double in[64], double out[64]) {
    const auto& b = tables().basis;
    double tmp[64];
    for (int v = 0; v < 8; ++v)
        for (int x = 0; x < 8; ++x) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) s += in[v * 8 + u] * b[u][x];
            tmp[v * 8 + x] = s;
        }
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double s = 0.0;
            for (int v = 0; v < 8; ++v) s += tmp[v * 8 + x] * b[v][y];
            out[y * 8 + x] = s;
        }
}

Plane8 pad_to_blocks(const Plane8& p) {
    int pw = (p.w + 7) / 8 * 8, ph = (p.h + 7) / 8 * 8;
    if (pw == p.w && ph == p.h) return p;
    Plane8 out(pw, ph);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            out.at(y, x) = p.at(std::min(y, p.h - 1), std::min(x, p.w - 1));
    return out;
}

void check_qp(int qp) {
    if (qp < 0 || qp > 51) throw ConfigError("qp " + std::to_string(qp) + " outside [0, 51]");
}

// Shared per-frame transform pass: quantized coefficients per block in scan
// order with DPCM applied to DC, plus the reconstruction.
struct CodedFrame {
    std::vector<int32_t> symbols;  // 64 per block
    Plane8 recon;
};

CodedFrame transform_frame(const Plane8& padded, int w, int h, int qp) {
    double step = step_from_qp(qp);
    CodedFrame cf;
    cf.recon = Plane8(w, h);
    cf.symbols.reserve(size_t(padded.w / 8) * (padded.h / 8) * 64);
    int32_t dc_pred = 0;
    double blk[64], coef[64], deq[64], rec[64];
    for (int by = 0; by < padded.h; by += 8)
        for (int bx = 0; bx < padded.w; bx += 8) {
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) blk[y * 8 + x] = double(padded.at(by + y, bx + x)) - 128.0;
            fdct8x8(blk, coef);
            int32_t q[64];
            for (int i = 0; i < 64; ++i) q[i] = int32_t(round_away(coef[i] / step));
            for (int i = 0; i < 64; ++i) {
                int32_t v = q[tables().zigzag[i]];
                if (i == 0) {
                    cf.symbols.push_back(v - dc_pred);
                    dc_pred = v;
                } else {
                    cf.symbols.push_back(v);
                }
            }
            for (int i = 0; i < 64; ++i) deq[i] = double(q[i]) * step;
            idct8x8(deq, rec);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    if (by + y >= h || bx + x >= w) continue;
                    double v = round_away(rec[y * 8 + x] + 128.0);
                    cf.recon.at(by + y, bx + x) = uint8_t(std::min(255.0, std::max(0.0, v)));
                }
        }
    return cf;
}

}  // namespace

double step_from_qp(int qp) {
    check_qp(qp);
    return std::exp2((double(qp) - 4.0) / 6.0);
}

double lambda_from_qp(int qp) {
    check_qp(qp);
    return 0.85 * std::exp2((double(qp) - 12.0) / 3.0);
}

ToyEncodeResult toy_encode(const Plane8& luma, int qp) {
    if (luma.w <= 0 || luma.h <= 0 || luma.data.empty()) throw ShapeError("toy_encode: empty frame");
    check_qp(qp);
    Plane8 padded = pad_to_blocks(luma);
    CodedFrame cf = transform_frame(padded, luma.w, luma.h, qp);

    coder::RangeEncoder enc;
    std::array<coder::AdaptiveSymbolModel, 4> models;
    for (size_t i = 0; i < cf.symbols.size(); ++i)
        models[size_t(band_of(int(i % 64)))].encode_symbol(enc, cf.symbols[i]);

    ToyEncodeResult out;
    out.recon = std::move(cf.recon);
    out.bitstream = enc.finish();
    out.bits = uint64_t(out.bitstream.size()) * 8;
    return out;
}

Plane8 toy_decode(const std::vector<uint8_t>& bitstream, int w, int h, int qp) {
    if (w <= 0 || h <= 0) throw ShapeError("toy_decode: empty frame");
    double step = step_from_qp(qp);
    int pw = (w + 7) / 8 * 8, ph = (h + 7) / 8 * 8;

    coder::RangeDecoder dec(bitstream.data(), bitstream.size());
    std::array<coder::AdaptiveSymbolModel, 4> models;
    Plane8 out(w, h);
    int32_t dc_pred = 0;
    double deq[64], rec[64];
    for (int by = 0; by < ph; by += 8)
        for (int bx = 0; bx < pw; bx += 8) {
            int32_t q[64];
            for (int i = 0; i < 64; ++i) {
                int32_t v = models[size_t(band_of(i))].decode_symbol(dec);
                if (i == 0) {
                    v += dc_pred;
                    dc_pred = v;
                }
                q[tables().zigzag[i]] = v;
            }
            for (int i = 0; i < 64; ++i) deq[i] = double(q[i]) * step;
            idct8x8(deq, rec);
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    if (by + y >= h || bx + x >= w) continue;
                    double v = round_away(rec[y * 8 + x] + 128.0);
                    out.at(by + y, bx + x) = uint8_t(std::min(255.0, std::max(0.0, v)));
                }
        }
    return out;
}

void FrameGroup::validate() const {
    if (frames.empty()) throw ConfigError("frame group: empty");
    for (size_t i = 0; i < frames.size(); ++i) {
        const FrameEntry& f = frames[i];
        std::string where = "frame group: frame " + std::to_string(i);
        if (!f.orig_y.same_size(f.recon_y) || f.orig_y.data.empty())
            throw ShapeError(where + ": original and reconstruction planes empty or mismatched");
        if (!frames[0].orig_y.same_size(f.orig_y))
            throw ShapeError(where + ": dimensions differ from frame 0");
        if (f.r_bits == 0) throw ConfigError(where + ": zero rate");
        if (!(f.lambda > 0.0)) throw ConfigError(where + ": non-positive lambda");
    }
}

std::vector<RateLogRow> read_rate_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rate log " + path);
    std::vector<RateLogRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        RateLogRow r;
        if (!(ss >> r.index >> r.bits >> r.qp))
            throw ConfigError("rate log " + path + ": malformed row at line " +
                              std::to_string(lineno));
        std::string extra;
        if (ss >> extra)
            throw ConfigError("rate log " + path + ": trailing fields at line " +
                              std::to_string(lineno));
        if (r.index != int(rows.size()))
            throw ConfigError("rate log " + path + ": indices must be contiguous from 0, got " +
                              std::to_string(r.index) + " at line " + std::to_string(lineno));
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError("rate log " + path + ": no records");
    return rows;
}

void write_rate_log(const std::string& path, const std::vector<RateLogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open rate log " + path + " for writing");
    out << "# index bits qp\n";
    for (const RateLogRow& r : rows) out << r.index << " " << r.bits << " " << r.qp << "\n";
    if (!out) throw IoError("short write to rate log " + path);
}

FrameGroup ingest(const std::string& orig_path, const std::string& recon_path, int w, int h,
                  const std::vector<RateLogRow>& log, std::vector<YuvFrame>* recon_frames) {
    std::vector<YuvFrame> orig = read_yuv420(orig_path, w, h);
    std::vector<YuvFrame> recon = read_yuv420(recon_path, w, h);
    if (orig.size() != recon.size())
        throw ConfigError("ingest: " + orig_path + " has " + std::to_string(orig.size()) +
                          " frames but " + recon_path + " has " + std::to_string(recon.size()));
    if (log.size() != orig.size())
        throw ConfigError("ingest: rate log has " + std::to_string(log.size()) +
                          " rows for " + std::to_string(orig.size()) + " frames");

    FrameGroup g;
    for (size_t i = 0; i < orig.size(); ++i) {
        FrameEntry e;
        e.orig_y = std::move(orig[i].y);
        e.recon_y = recon[i].y;  // kept in recon_frames too when requested
        e.r_bits = log[i].bits;
        e.qp = log[i].qp;
        e.lambda = lambda_from_qp(log[i].qp);
        g.frames.push_back(std::move(e));
    }
    if (recon_frames) *recon_frames = std::move(recon);
    g.validate();
    return g;
}

}  // namespace elc::bl
