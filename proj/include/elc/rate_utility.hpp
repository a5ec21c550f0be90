#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "elc/base_layer.hpp"
#include "elc/frame.hpp"
#include "elc/network.hpp"
#include "elc/quantized_model.hpp"

namespace elc::ru {

struct Metrics {
    double sse = 0.0;
    double psnr = 0.0;  // +inf when sse is exactly zero
};

// SSE and PSNR between two 8-bit planes of equal size.
Metrics metrics(const Plane8& orig, const Plane8& recon);

// PSNR difference that treats two lossless measurements as a zero gain
// instead of inf - inf.
double psnr_delta(double enhanced_psnr, double base_psnr);

// Per-frame Lagrangian cost: D + lambda * (R_frame + R_model / N). The model
// rate is amortized over the N frames it serves.
double frame_cost(double d, double lambda, double r_frame_bits, double r_model_bits, size_t n);

// Plain sum over the per-frame costs.
double group_cost(std::span<const double> frame_costs);

// Runs one transmitted model over a base-layer reconstruction: normalize to
// [0,1], forward pass, scale back, round half away from zero, clamp.
Plane8 enhance_frame(const net::QuantizedModel& model, const Plane8& recon);

struct CandidateEvaluation {
    uint64_t id = 0;  // checkpoint content hash
    int epoch = 0;
    std::vector<double> d;           // per-frame SSE of the enhanced output
    std::vector<double> j;           // per-frame Lagrangian cost
    std::vector<double> psnr_gain;   // enhanced PSNR minus base-layer PSNR
    double group_j = 0.0;
    uint64_t r_model_bits = 0;
};

inline constexpr int kNoEl = -1;

struct SelectionResult {
    int chosen = kNoEl;       // index into the candidate table, or kNoEl
    double chosen_j = 0.0;
    double baseline_j = 0.0;  // unenhanced reconstructions, zero model rate
    std::vector<double> baseline_d;
    std::vector<double> baseline_psnr;
    std::vector<CandidateEvaluation> table;  // one row per candidate, input order
    std::vector<uint8_t> el_bytes;  // serialized stream of the winning option

    bool no_el() const { return chosen == kNoEl; }
};

// Scores every checkpoint over the group through the transmission path
// (serialize, deserialize, enhance) so the encoder ranks exactly what the
// decoder will run, then picks the cost argmin. Ties break toward smaller
// model rate, then the earlier epoch; the no-model fallback wins any tie
// against a candidate when allowed.
SelectionResult select(const std::vector<net::ModelCheckpoint>& candidates,
                       const net::QuantizedModel& initial, const bl::FrameGroup& group,
                       bool allow_no_el = true);

}  // namespace elc::ru
