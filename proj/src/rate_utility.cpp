#include "elc/rate_utility.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "elc/errors.hpp"
#include "elc/model_codec.hpp"

namespace elc::ru {

namespace {

double round_away(double x) { return x >= 0.0 ? std::floor(x + 0.5) : std::ceil(x - 0.5); }

}  // namespace

Metrics metrics(const Plane8& orig, const Plane8& recon) {
    if (!orig.same_size(recon))
        throw ShapeError("metrics: " + std::to_string(orig.w) + "x" + std::to_string(orig.h) +
                         " vs " + std::to_string(recon.w) + "x" + std::to_string(recon.h));
    if (orig.data.empty()) throw ShapeError("metrics: empty planes");
    Metrics m;
    for (size_t i = 0; i < orig.data.size(); ++i) {
        double d = double(orig.data[i]) - double(recon.data[i]);
        m.sse += d * d;
    }
    if (m.sse == 0.0)
        m.psnr = std::numeric_limits<double>::infinity();
    else
        m.psnr = 10.0 * std::log10(255.0 * 255.0 * double(orig.data.size()) / m.sse);
    return m;
}

double psnr_delta(double enhanced_psnr, double base_psnr) {
    if (std::isinf(enhanced_psnr) && std::isinf(base_psnr)) return 0.0;
    return enhanced_psnr - base_psnr;
}

double frame_cost(double d, double lambda, double r_frame_bits, double r_model_bits, size_t n) {
    if (n == 0) throw ConfigError("frame_cost: model rate amortized over zero frames");
    return d + lambda * (r_frame_bits + r_model_bits / double(n));
}

double group_cost(std::span<const double> frame_costs) {
    if (frame_costs.empty()) throw ConfigError("group_cost: empty group");
    double j = 0.0;
    for (double ji : frame_costs) j += ji;
    return j;
}

Plane8 enhance_frame(const net::QuantizedModel& model, const Plane8& recon) {
    if (recon.data.empty()) throw ShapeError("enhance_frame: empty plane");
    Tensor4 in(Shape4{1, 1, recon.h, recon.w});
    for (size_t i = 0; i < recon.data.size(); ++i) in.data[i] = double(recon.data[i]) / 255.0;
    Tensor4 out = net::forward_quantized(model, in);
    Plane8 enhanced(recon.w, recon.h);
    for (size_t i = 0; i < enhanced.data.size(); ++i) {
        double v = round_away(out.data[i] * 255.0);
        enhanced.data[i] = uint8_t(std::min(255.0, std::max(0.0, v)));
    }
    return enhanced;
}

SelectionResult select(const std::vector<net::ModelCheckpoint>& candidates,
                       const net::QuantizedModel& initial, const bl::FrameGroup& group,
                       bool allow_no_el) {
    if (candidates.empty()) throw ConfigError("select: no candidates");
    group.validate();
    size_t n = group.size();

    SelectionResult res;
    std::vector<double> baseline_j(n);
    for (size_t i = 0; i < n; ++i) {
        const bl::FrameEntry& f = group.frames[i];
        Metrics m = metrics(f.orig_y, f.recon_y);
        res.baseline_d.push_back(m.sse);
        res.baseline_psnr.push_back(m.psnr);
        baseline_j[i] = frame_cost(m.sse, f.lambda, double(f.r_bits), 0.0, n);
    }
    res.baseline_j = group_cost(baseline_j);

    // Each candidate is priced and evaluated through its own serialized
    // stream, so the scores reflect the decoder's arithmetic bit for bit.
    std::vector<std::vector<uint8_t>> streams;
    streams.reserve(candidates.size());
    for (const net::ModelCheckpoint& ck : candidates) {
        std::vector<uint8_t> bytes = codec::serialize_el(ck.quantized, initial);
        net::QuantizedModel decoded = codec::deserialize_el(bytes, initial);

        CandidateEvaluation ev;
        ev.id = ck.id;
        ev.epoch = ck.epoch;
        ev.r_model_bits = uint64_t(bytes.size()) * 8;
        for (size_t i = 0; i < n; ++i) {
            const bl::FrameEntry& f = group.frames[i];
            Metrics m = metrics(f.orig_y, enhance_frame(decoded, f.recon_y));
            ev.d.push_back(m.sse);
            ev.j.push_back(frame_cost(m.sse, f.lambda, double(f.r_bits),
                                      double(ev.r_model_bits), n));
            ev.psnr_gain.push_back(psnr_delta(m.psnr, res.baseline_psnr[i]));
        }
        ev.group_j = group_cost(ev.j);
        res.table.push_back(std::move(ev));
        streams.push_back(std::move(bytes));
    }

    int best = 0;
    for (int c = 1; c < int(res.table.size()); ++c) {
        const CandidateEvaluation& a = res.table[size_t(c)];
        const CandidateEvaluation& b = res.table[size_t(best)];
        if (a.group_j < b.group_j ||
            (a.group_j == b.group_j &&
             (a.r_model_bits < b.r_model_bits ||
              (a.r_model_bits == b.r_model_bits && a.epoch < b.epoch))))
            best = c;
    }

    if (allow_no_el && res.baseline_j <= res.table[size_t(best)].group_j) {
        res.chosen = kNoEl;
        res.chosen_j = res.baseline_j;
        res.el_bytes = codec::serialize_no_el();
    } else {
        res.chosen = best;
        res.chosen_j = res.table[size_t(best)].group_j;
        res.el_bytes = std::move(streams[size_t(best)]);
    }
    return res;
}

}  // namespace elc::ru
