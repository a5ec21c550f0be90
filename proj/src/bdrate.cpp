#include "elc/bdrate.hpp"

#include <array>
#include <cmath>
#include <string>

#include "elc/errors.hpp"

namespace elc::bd {

namespace {

// Cubic in (psnr - center); centering keeps the normal equations well
// conditioned for the 30..50 dB inputs this sees.
struct CubicFit {
    double center = 0.0;
    std::array<double, 4> coeff{};  // c0 + c1 t + c2 t^2 + c3 t^3

    double integral(double lo, double hi) const {
        auto anti = [&](double p) {
            double t = p - center;
            return t * (coeff[0] + t * (coeff[1] / 2 + t * (coeff[2] / 3 + t * coeff[3] / 4)));
        };
        return anti(hi) - anti(lo);
    }
};

CubicFit fit_log_rate(const RdCurve& curve) {
    size_t n = curve.points.size();
    CubicFit f;
    for (const RdPoint& p : curve.points) f.center += p.psnr;
    f.center /= double(n);

    // Least squares via normal equations; with exactly four points this is
    // plain interpolation.
    double a[4][5] = {};
    for (const RdPoint& p : curve.points) {
        double t = p.psnr - f.center;
        double y = std::log10(p.rate);
        double pw[4] = {1.0, t, t * t, t * t * t};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) a[r][c] += pw[r] * pw[c];
            a[r][4] += pw[r] * y;
        }
    }
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        for (int c = 0; c < 5; ++c) std::swap(a[col][c], a[pivot][c]);
        if (std::fabs(a[col][col]) < 1e-12)
            throw NumericError("bd-rate: degenerate curve, cubic fit is singular");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            double k = a[r][col] / a[col][col];
            for (int c = col; c < 5; ++c) a[r][c] -= k * a[col][c];
        }
    }
    for (int r = 0; r < 4; ++r) f.coeff[size_t(r)] = a[r][4] / a[r][r];
    return f;
}

}  // namespace

void RdCurve::validate() const {
    if (points.empty()) throw ConfigError("rd curve: no points");
    for (size_t i = 0; i < points.size(); ++i) {
        const RdPoint& p = points[i];
        std::string where = "rd curve: point " + std::to_string(i);
        if (!std::isfinite(p.rate) || !std::isfinite(p.psnr))
            throw ConfigError(where + ": non-finite value");
        if (p.rate <= 0.0) throw ConfigError(where + ": rate must be positive");
        if (i > 0 && p.rate <= points[i - 1].rate)
            throw ConfigError(where + ": rates must be sorted strictly increasing");
        if (i > 0 && p.psnr <= points[i - 1].psnr)
            throw ConfigError(where + ": quality must rise with rate");
    }
}

double RdCurve::min_psnr() const { return points.front().psnr; }
double RdCurve::max_psnr() const { return points.back().psnr; }

double bd_rate(const RdCurve& anchor, const RdCurve& test) {
    anchor.validate();
    test.validate();
    if (anchor.points.size() < 4 || test.points.size() < 4)
        throw ConfigError("bd-rate: need at least 4 points per curve, got " +
                          std::to_string(anchor.points.size()) + " and " +
                          std::to_string(test.points.size()));
    double lo = std::max(anchor.min_psnr(), test.min_psnr());
    double hi = std::min(anchor.max_psnr(), test.max_psnr());
    if (!(hi > lo))
        throw ConfigError("bd-rate: curves share no quality range (" + std::to_string(lo) +
                          " .. " + std::to_string(hi) + ")");

    CubicFit fa = fit_log_rate(anchor);
    CubicFit ft = fit_log_rate(test);
    double avg_diff = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

}  // namespace elc::bd
