// Rough conv throughput probe used to pick training profile defaults.
#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "elc/ops.hpp"
#include "elc/tensor.hpp"

using namespace elc;
using namespace elc::ops;

int main() {
    std::mt19937_64 rng(7);
    auto fill = [&](std::vector<double>& v) {
        for (auto& x : v) x = double(rng() >> 11) * (1.0 / 9007199254740992.0) - 0.5;
    };

    // Mid-network layer shape: 3x3, 16->16, on a 288x288 frame and a 35x35 crop batch.
    ConvSpec spec{16, 16, 3, 3};
    std::vector<double> w(spec.weight_count()), b(16);
    fill(w);
    fill(b);

    {
        Tensor4 in(Shape4{1, 16, 288, 288});
        fill(in.data);
        Tensor4 out = conv2d(in, w, b, spec);
        int reps = 20;
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < reps; i++) out = conv2d(in, w, b, spec);
        auto t1 = std::chrono::steady_clock::now();
        double sec = std::chrono::duration<double>(t1 - t0).count() / reps;
        double mac = double(in.shape.h) * in.shape.w * 16 * 16 * 9;
        std::printf("fwd 288x288 16->16 3x3: %.3f ms, %.2f GMAC/s\n", sec * 1e3, mac / sec * 1e-9);
    }
    {
        Tensor4 in(Shape4{8, 16, 35, 35});
        fill(in.data);
        Tensor4 gout(Shape4{8, 16, 35, 35});
        fill(gout.data);
        Tensor4 out = conv2d(in, w, b, spec);
        int reps = 50;
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < reps; i++) out = conv2d(in, w, b, spec);
        auto t1 = std::chrono::steady_clock::now();
        double fsec = std::chrono::duration<double>(t1 - t0).count() / reps;

        Tensor4 gin(in.shape);
        std::vector<double> gw(w.size()), gb(b.size());
        t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < reps; i++)
            conv2d_backward(in, w, spec, gout, &gin, gw, gb);
        t1 = std::chrono::steady_clock::now();
        double bsec = std::chrono::duration<double>(t1 - t0).count() / reps;
        double mac = double(8) * 35 * 35 * 16 * 16 * 9;
        std::printf("fwd  batch8 35x35: %.3f ms (%.2f GMAC/s)\n", fsec * 1e3, mac / fsec * 1e-9);
        std::printf("bwd  batch8 35x35: %.3f ms (%.2f GMAC/s eq)\n", bsec * 1e3, 2 * mac / bsec * 1e-9);
        // One full training iteration ~ 21 such layers fwd + bwd (plus cheap 1x1 / edge layers).
        double iter = 18 * (fsec + bsec);
        std::printf("est. train iter (batch 8): %.1f ms -> 1000 iters = %.1f s\n", iter * 1e3, iter * 1000);
    }
    return 0;
}
