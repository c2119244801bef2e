// Timing comparison of the OpenMP kernels against their serial references.
// Usage: lfis_bench [--quick]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "lfis/experiment.hpp"
#include "lfis/importance.hpp"
#include "lfis/model.hpp"
#include "lfis/oracle.hpp"
#include "lfis/smc.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace lfis;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const char* name, double serial_s, double parallel_s, double max_diff) {
    std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx   max|diff| %.3g\n",
                name, serial_s, parallel_s, serial_s / parallel_s, max_diff);
}

} // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--quick") == 0) quick = true;

#ifdef _OPENMP
    std::printf("threads available: %d\n", omp_get_max_threads());
#else
    std::printf("threads available: 1 (OpenMP disabled)\n");
#endif

    // Oracle enumeration: single Gray sweep vs chunked parallel sweep.
    {
        const int m = quick ? 16 : 22;
        const auto model = build_ising_dense(m, 11);
        const Temperature beta{2.0};
        auto t0 = std::chrono::steady_clock::now();
        const double serial = exact_log_partition_serial(model, beta);
        const double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const double parallel = exact_log_partition(model, beta);
        const double tp = seconds_since(t0);
        report("oracle enumeration", ts, tp, std::abs(serial - parallel));
    }

    // Mixture density matrix: row-parallel kernel vs serial reference.
    {
        const int m = 25;
        const int n = quick ? 100 : 400;
        const auto model = build_ising_dense(m, 12);
        RngStream rng(99);
        std::vector<SpinState> anchors, targets;
        for (int k = 0; k < n; ++k) {
            anchors.push_back(uniform_random_state(model, rng));
            targets.push_back(uniform_random_state(model, rng));
        }
        const auto order = SweepOrder::identity(m);
        const double betas[1] = {5.0};
        auto t0 = std::chrono::steady_clock::now();
        const auto serial =
            mixture_log_density_rows_serial(model, betas, targets, anchors, order);
        const double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const auto parallel =
            mixture_log_density_rows(model, betas, targets, anchors, order);
        const double tp = seconds_since(t0);
        double max_diff = 0.0;
        for (std::size_t k = 0; k < serial.size(); ++k)
            max_diff = std::max(max_diff, std::abs(serial[k] - parallel[k]));
        report("mixture density matrix", ts, tp, max_diff);
    }

    // Replicated LFQGS selection: worker pool vs single-threaded pool.
    {
        const auto model = build_ising_dense(25, 13);
        LfqgsSelectConfig cfg;
        cfg.num_samples = quick ? 500 : 2000;
        const int reps = quick ? 8 : 40;
        auto t0 = std::chrono::steady_clock::now();
        const auto serial = run_lfqgs_select_experiment(model, 5.0, cfg, reps, 7, 1);
        const double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        const auto parallel = run_lfqgs_select_experiment(model, 5.0, cfg, reps, 7, 0);
        const double tp = seconds_since(t0);
        double max_diff = 0.0;
        for (std::size_t k = 0; k < serial.values.size(); ++k)
            max_diff = std::max(max_diff, std::abs(serial.values[k] - parallel.values[k]));
        report("lfqgs replications", ts, tp, max_diff);
    }

    // SMC: particle moves parallel vs serial, plus the N*steps cost trend.
    {
        const auto model = build_ising_dense(25, 14);
        SmcConfig cfg;
        cfg.num_particles = quick ? 400 : 1000;
        cfg.num_levels = quick ? 200 : 1000;
        RngStream rng_a(21), rng_b(21);
        cfg.threads = 1;
        auto t0 = std::chrono::steady_clock::now();
        const auto serial = smc_run(model, Temperature{5.0}, cfg, rng_a);
        const double ts = seconds_since(t0);
        cfg.threads = 0;
        t0 = std::chrono::steady_clock::now();
        const auto parallel = smc_run(model, Temperature{5.0}, cfg, rng_b);
        const double tp = seconds_since(t0);
        report("smc particle sweep", ts, tp,
               std::abs(serial.log_z_hat - parallel.log_z_hat));

        // Cost should scale linearly in N * steps (within 2x).
        SmcConfig half = cfg;
        half.num_particles = cfg.num_particles / 2;
        RngStream rng_c(22);
        t0 = std::chrono::steady_clock::now();
        smc_run(model, Temperature{5.0}, half, rng_c);
        const double th = seconds_since(t0);
        std::printf("%-28s ratio N vs N/2: %.2fx (linear would be 2.00x)\n",
                    "smc cost scaling", tp / th);
    }

    return 0;
}
