#include "lfis/smc.hpp"

#include <cmath>
#include <stdexcept>

#include "lfis/logsum.hpp"
#include "omp_compat.hpp"

namespace lfis {

namespace {

// In-place random-site Gibbs step; returns the energy delta.
double gibbs_step_inplace(const PairwiseModel& model, double beta, SpinState& state,
                          RngStream& rng, std::vector<double>& terms,
                          std::vector<double>& scratch) {
    const int q = model.domain_size();
    const int i = static_cast<int>(rng.uniform_below(model.num_variables()));
    model.local_terms(state, i, terms.data());
    double zmax = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < q; ++a) {
        scratch[a] = beta * terms[a];
        if (scratch[a] > zmax) zmax = scratch[a];
    }
    double total = 0.0;
    for (int a = 0; a < q; ++a) {
        scratch[a] = std::exp(scratch[a] - zmax);
        total += scratch[a];
    }
    const double threshold = rng.uniform01() * total;
    double acc = 0.0;
    int chosen = q - 1;
    for (int a = 0; a < q; ++a) {
        acc += scratch[a];
        if (acc > threshold) {
            chosen = a;
            break;
        }
    }
    const int old = state.idx[i];
    if (chosen == old) return 0.0;
    state.idx[i] = static_cast<std::uint8_t>(chosen);
    return -(terms[chosen] - terms[old]);
}

double weights_log_mean(const std::vector<double>& log_weights) {
    return log_sum_exp(log_weights) -
           std::log(static_cast<double>(log_weights.size()));
}

double weights_ess(const std::vector<double>& log_weights) {
    const double lse = log_sum_exp(log_weights);
    NeumaierSum sq;
    for (double lw : log_weights) {
        const double w = std::exp(lw - lse);
        sq.add(w * w);
    }
    return 1.0 / sq.value();
}

} // namespace

SmcResult smc_run(const PairwiseModel& model, Temperature beta_target,
                  const SmcConfig& config, RngStream& rng) {
    if (beta_target.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    if (config.num_particles < 2)
        throw std::invalid_argument("smc_run: need at least two particles");
    if (config.num_levels < 1) throw std::invalid_argument("smc_run: need at least one level");
    if (config.resample_threshold < 0 || config.resample_threshold > 1)
        throw std::invalid_argument("smc_run: threshold must be in [0, 1]");
    if (config.gibbs_moves_per_level < 0)
        throw std::invalid_argument("smc_run: negative move count");

    const int n = config.num_particles;
    const int m = model.num_variables();
    const int q = model.domain_size();

    std::vector<RngStream> streams;
    streams.reserve(n);
    for (int p = 0; p < n; ++p) streams.push_back(rng.child(p));
    RngStream resample_rng = rng.child(n);

    SmcResult result;
    auto& pop = result.population;
    pop.states.resize(n);
    pop.log_weights.assign(n, 0.0);
    std::vector<double> energies(n);

    const auto n_i64 = static_cast<std::int64_t>(n);
#ifdef _OPENMP
    const int nthreads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nthreads)
#endif
    for (std::int64_t p = 0; p < n_i64; ++p) {
        pop.states[p] = uniform_random_state(model, streams[p]);
        energies[p] = model.energy(pop.states[p]);
    }

    // Base measure: Z(0) = q^M.
    pop.log_z_accum = m * std::log(static_cast<double>(q));
    double beta_prev = 0.0;

    for (int t = 1; t <= config.num_levels; ++t) {
        const double beta_t =
            beta_target.beta * static_cast<double>(t) / config.num_levels;
        const double dbeta = beta_t - beta_prev;
        for (int p = 0; p < n; ++p) pop.log_weights[p] += -dbeta * energies[p];
        beta_prev = beta_t;
        pop.beta_current = beta_t;

        const double ess = weights_ess(pop.log_weights);
        if (ess < config.resample_threshold * n) {
            pop.log_z_accum += weights_log_mean(pop.log_weights);
            // Systematic resampling with one uniform offset.
            const double lse = log_sum_exp(pop.log_weights);
            const double u0 = resample_rng.uniform01() / n;
            std::vector<std::int32_t> parents(n);
            double cum = 0.0;
            int j = -1;
            for (int k = 0; k < n; ++k) {
                const double pos = u0 + static_cast<double>(k) / n;
                while (cum <= pos && j + 1 < n) {
                    ++j;
                    cum += std::exp(pop.log_weights[j] - lse);
                }
                parents[k] = static_cast<std::int32_t>(j);
            }
            std::vector<SpinState> new_states(n);
            std::vector<double> new_energies(n);
            for (int k = 0; k < n; ++k) {
                new_states[k] = pop.states[parents[k]];
                new_energies[k] = energies[parents[k]];
            }
            pop.states = std::move(new_states);
            energies = std::move(new_energies);
            pop.log_weights.assign(n, 0.0);
            ++result.resample_count;
        }

        if (config.gibbs_moves_per_level > 0) {
#ifdef _OPENMP
#pragma omp parallel num_threads(nthreads)
            {
                std::vector<double> terms(q), scratch(q);
#pragma omp for schedule(static)
                for (std::int64_t p = 0; p < n_i64; ++p)
                    for (int mv = 0; mv < config.gibbs_moves_per_level; ++mv)
                        energies[p] += gibbs_step_inplace(model, beta_t, pop.states[p],
                                                          streams[p], terms, scratch);
            }
#else
            std::vector<double> terms(q), scratch(q);
            for (std::int64_t p = 0; p < n_i64; ++p)
                for (int mv = 0; mv < config.gibbs_moves_per_level; ++mv)
                    energies[p] += gibbs_step_inplace(model, beta_t, pop.states[p],
                                                      streams[p], terms, scratch);
#endif
        }
    }

    result.final_ess = weights_ess(pop.log_weights);
    result.log_z_hat = pop.log_z_accum + weights_log_mean(pop.log_weights);
    return result;
}

} // namespace lfis
