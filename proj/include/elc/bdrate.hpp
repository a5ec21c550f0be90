#pragma once

#include <vector>

namespace elc::bd {

struct RdPoint {
    double rate = 0.0;  // bits (any consistent unit; only ratios matter)
    double psnr = 0.0;  // dB
};

// An operating curve sampled at increasing rate. Points must be sorted by
// rate, strictly increasing in both coordinates, with positive rates.
struct RdCurve {
    std::vector<RdPoint> points;

    void validate() const;  // ConfigError on any invariant violation
    double min_psnr() const;
    double max_psnr() const;
};

// Average rate difference of `test` against `anchor` in percent (negative
// means the test curve needs fewer bits for equal quality): cubic fits of
// log10(rate) against PSNR, integrated in closed form over the overlapping
// PSNR interval. Requires at least four points per curve and overlapping
// quality ranges.
double bd_rate(const RdCurve& anchor, const RdCurve& test);

}  // namespace elc::bd
