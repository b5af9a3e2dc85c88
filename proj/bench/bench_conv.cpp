// Timing comparison: naive 7-loop convolution (the test oracle) against the
// im2col+GEMM path with OpenMP over the batch. Run with no arguments.
#include <chrono>
#include <cstdio>
#include <random>

#include "posekit/conv_kernels.hpp"

using namespace posekit;
using Clock = std::chrono::steady_clock;

namespace {

Tensor<float> random_tensor(const std::vector<int>& shape, std::mt19937_64& rng) {
    std::normal_distribution<float> gauss(0.0f, 0.5f);
    Tensor<float> t(shape);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = gauss(rng);
    return t;
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e30;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

struct Case {
    const char* name;
    int n, cin, cout, hw, k, stride;
};

}  // namespace

int main() {
    std::mt19937_64 rng(42);
    const Case cases[] = {
        {"enc 3x3 s2  64px", 8, 16, 32, 64, 3, 2},
        {"dec 3x3 s1  16px", 8, 96, 32, 16, 3, 1},
        {"head 1x1 s1 16px", 8, 32, 33, 16, 1, 1},
        {"reg 3x3 s2   8px", 8, 128, 128, 8, 3, 2},
    };
    std::printf("%-18s %12s %12s %9s\n", "case", "naive (ms)", "fast (ms)", "speedup");
    for (const Case& c : cases) {
        const Tensor<float> x = random_tensor({c.n, c.cin, c.hw, c.hw}, rng);
        const Tensor<float> w = random_tensor({c.cout, c.cin, c.k, c.k}, rng);
        const Tensor<float> y = kernels::conv2d_forward_fast(x, w, c.stride);
        Tensor<float> gx(x.shape()), gw(w.shape());

        const double t_naive = time_best_of(3, [&] {
            (void)kernels::conv2d_forward_naive(x, w, c.stride);
            gx.fill(0);
            gw.fill(0);
            kernels::conv2d_backward_naive(x, w, c.stride, y, gx, gw);
        });
        const double t_fast = time_best_of(3, [&] {
            (void)kernels::conv2d_forward_fast(x, w, c.stride);
            gx.fill(0);
            gw.fill(0);
            kernels::conv2d_backward_fast(x, w, c.stride, y, gx, gw);
        });
        std::printf("%-18s %12.3f %12.3f %8.1fx\n", c.name, t_naive * 1e3, t_fast * 1e3,
                    t_naive / t_fast);
    }
    return 0;
}
