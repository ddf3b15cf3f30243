// Compares the OpenMP kernels against the serial reference: correctness is
// bit-exact by construction, so the interesting number is throughput.
#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "scomm/config.hpp"
#include "scomm/kernels.hpp"
#include "scomm/model.hpp"
#include "scomm/ops.hpp"
#include "scomm/rng.hpp"

using scomm::kernels::bmm;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void fill(std::vector<double>& v, scomm::rng::Stream& s) {
    for (double& x : v) x = s.next_gaussian();
}

}  // namespace

int main() {
    scomm::rng::Stream s(7);
    std::printf("threads available: %d\n\n", omp_get_max_threads());

    std::printf("%-28s %12s %12s %8s\n", "kernel", "ref ms", "omp ms", "speedup");
    for (size_t n : {64, 128, 256, 512}) {
        std::vector<double> a(n * n), b(n * n), c(n * n), c2(n * n);
        fill(a, s);
        fill(b, s);
        const int reps = n <= 128 ? 50 : 10;
        const double t_ref = time_ms(
            [&] {
                scomm::kernels::ref::bmm(a.data(), 0, false, b.data(), 0, false, c.data(), 1, n,
                                         n, n, false);
            },
            reps);
        const double t_omp = time_ms(
            [&] { bmm(a.data(), 0, false, b.data(), 0, false, c2.data(), 1, n, n, n, false); },
            reps);
        std::printf("%-28s %12.3f %12.3f %7.2fx\n",
                    ("matmul " + std::to_string(n) + "^3").c_str(), t_ref, t_omp, t_ref / t_omp);
    }
    {
        const size_t rows = 4096, d = 64;
        std::vector<double> x(rows * d), y(rows * d), mean(rows), inv(rows), g(d, 1.0),
            be(d, 0.0);
        fill(x, s);
        const double t_ref = time_ms(
            [&] {
                scomm::kernels::ref::layer_norm(x.data(), g.data(), be.data(), 1e-8, y.data(),
                                                mean.data(), inv.data(), rows, d);
            },
            50);
        const double t_omp = time_ms(
            [&] {
                scomm::kernels::layer_norm(x.data(), g.data(), be.data(), 1e-8, y.data(),
                                           mean.data(), inv.data(), rows, d);
            },
            50);
        std::printf("%-28s %12.3f %12.3f %7.2fx\n", "layer_norm 4096x64", t_ref, t_omp,
                    t_ref / t_omp);
        const double t_sref =
            time_ms([&] { scomm::kernels::ref::softmax(x.data(), y.data(), rows, d); }, 50);
        const double t_somp =
            time_ms([&] { scomm::kernels::softmax(x.data(), y.data(), rows, d); }, 50);
        std::printf("%-28s %12.3f %12.3f %7.2fx\n", "softmax 4096x64", t_sref, t_somp,
                    t_sref / t_somp);
        const double t_gref =
            time_ms([&] { scomm::kernels::ref::gelu(x.data(), y.data(), x.size()); }, 50);
        const double t_gomp =
            time_ms([&] { scomm::kernels::gelu(x.data(), y.data(), x.size()); }, 50);
        std::printf("%-28s %12.3f %12.3f %7.2fx\n", "gelu 262144", t_gref, t_gomp,
                    t_gref / t_gomp);
    }

    // Whole-pipeline number: one 32x32 encode+decode forward, 1 vs N threads.
    {
        scomm::ModelConfig cfg;
        scomm::ParameterSet params = scomm::build(cfg, 0);
        scomm::Dataset ds = scomm::synth_dataset(1, 32, 1);
        auto forward = [&] {
            scomm::Tensor x = scomm::normalize_power(nullptr,
                                                     scomm::encode(nullptr, ds.images[0], params, cfg));
            scomm::decode(nullptr, x, params, cfg, scomm::DecoderId::hcd, 32, 32);
        };
        const int max_threads = omp_get_max_threads();
        omp_set_num_threads(1);
        const double t1 = time_ms(forward, 10);
        omp_set_num_threads(max_threads);
        const double tn = time_ms(forward, 10);
        std::printf("\nencode+decode fwd 32x32: 1 thread %.3f ms, %d threads %.3f ms (%.2fx)\n",
                    t1, max_threads, tn, t1 / tn);
        std::printf("fwd multiply-adds (hcd): %zu\n",
                    scomm::forward_flops(cfg, scomm::DecoderId::hcd, 32, 32));
    }
    return 0;
}
