#pragma once

#include <cstdint>
#include <vector>

#include "lfis/model.hpp"
#include "lfis/rng.hpp"

namespace lfis {

struct ParticlePopulation {
    std::vector<SpinState> states;
    std::vector<double> log_weights;
    double beta_current = 0.0;
    double log_z_accum = 0.0; // folded normalizer from resampling points
};

struct SmcConfig {
    int num_particles = 1000;
    int num_levels = 5000;           // annealing steps from beta 0 to the target
    double resample_threshold = 0.5; // resample when ESS/N drops below this
    int gibbs_moves_per_level = 1;
    int threads = 0;
};

struct SmcResult {
    ParticlePopulation population;
    double log_z_hat = 0.0;
    int resample_count = 0;
    double final_ess = 0.0;
};

// Annealed SMC estimate of log Z(beta_target): linear tempering from 0,
// incremental-evidence reweighting -(beta_t - beta_{t-1}) E(x), one
// random-site Gibbs move per particle per level, systematic resampling.
// Particle p draws from rng.child(p), the resampler from
// rng.child(num_particles); results are identical at any worker count.
SmcResult smc_run(const PairwiseModel& model, Temperature beta_target,
                  const SmcConfig& config, RngStream& rng);

} // namespace lfis
