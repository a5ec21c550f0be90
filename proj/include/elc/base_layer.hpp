#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "elc/frame.hpp"

namespace elc::bl {

// Intra-only 8x8 DCT codec standing in for a conventional base layer: real
// entropy-coded bits, blocking and ringing artifacts, no prediction beyond
// DC DPCM. Dimensions that are not multiples of 8 are edge-padded for coding
// and cropped on output.
struct ToyEncodeResult {
    Plane8 recon;
    std::vector<uint8_t> bitstream;
    uint64_t bits = 0;  // 8 * bitstream size
};

ToyEncodeResult toy_encode(const Plane8& luma, int qp);

// Decodes a toy_encode bitstream; used to keep the advertised rate honest.
Plane8 toy_decode(const std::vector<uint8_t>& bitstream, int w, int h, int qp);

// Quantizer step 2^((qp-4)/6), the conventional 6-QP-per-octave ladder.
double step_from_qp(int qp);

// Lagrange multiplier 0.85 * 2^((qp-12)/3). Throws ConfigError outside [0,51].
double lambda_from_qp(int qp);

struct FrameEntry {
    Plane8 orig_y;
    Plane8 recon_y;
    uint64_t r_bits = 0;
    double lambda = 0.0;
    int qp = 0;
};

struct FrameGroup {
    std::vector<FrameEntry> frames;

    size_t size() const { return frames.size(); }
    void validate() const;  // dimension agreement, positive rates and lambdas
};

// One row per frame: "index bits qp", indices contiguous from zero.
struct RateLogRow {
    int index = 0;
    uint64_t bits = 0;
    int qp = 0;
};

std::vector<RateLogRow> read_rate_log(const std::string& path);
void write_rate_log(const std::string& path, const std::vector<RateLogRow>& rows);

// Builds a group from externally coded material: original and reconstructed
// 4:2:0 files plus the rate log. Luma is carried verbatim; recon chroma is
// returned via `recon_chroma` when a caller needs pass-through output.
FrameGroup ingest(const std::string& orig_path, const std::string& recon_path, int w, int h,
                  const std::vector<RateLogRow>& log,
                  std::vector<YuvFrame>* recon_frames = nullptr);

}  // namespace elc::bl
