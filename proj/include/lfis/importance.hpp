#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lfis/lfqgs.hpp"
#include "lfis/model.hpp"
#include "lfis/rng.hpp"

namespace lfis {

// Fixed variable visit order shared by every sweep-kernel evaluation in one
// estimate. Default is the identity permutation.
struct SweepOrder {
    std::vector<std::int32_t> order;

    static SweepOrder identity(int num_variables);
    void validate(int num_variables) const;
    std::string digest_hex() const;
};

struct SelectedSample {
    SpinState state;
    int source_sequence = -1;
    double energy = 0.0;
    double log_unnorm = 0.0; // log pi-tilde at the target beta
};

// Draws one member with probability proportional to exp(-beta * E),
// computed in the log domain.
SelectedSample select_state(const DistinctStateSet& states, Temperature beta,
                            RngStream& rng);

// log of the Boltzmann selection weights q_i over the set (normalized).
std::vector<double> selection_log_weights(const DistinctStateSet& states,
                                          Temperature beta);

// One sweep of conventional Gibbs sampling through all variables in the
// given order. Returns the new state and log K_G(new | y): the sum of the
// log conditional probabilities of the realized values.
std::pair<SpinState, double> sweep_kernel_apply(const PairwiseModel& model,
                                                Temperature beta, const SpinState& y,
                                                const SweepOrder& order, RngStream& rng);

// log K_G(y_new | y_old): walks the order with a hybrid state (already-swept
// coordinates from y_new, the rest from y_old). Strictly positive density
// for every pair at finite beta.
double sweep_kernel_density(const PairwiseModel& model, Temperature beta,
                            const SpinState& y_new, const SpinState& y_old,
                            const SweepOrder& order);

// log (1/N) sum_j K_G(target | sources[j]) via log-sum-exp.
double mixture_log_density(const SpinState& target,
                           std::span<const SelectedSample> sources,
                           const PairwiseModel& model, Temperature beta,
                           const SweepOrder& order);

// Row r holds log mu-hat(targets[r]) against the full anchor set, with the
// mixture extended over one sweep kernel per (anchor, kernel beta) pair.
// Rows are independent; the parallel kernel and the serial reference return
// bit-identical values.
std::vector<double> mixture_log_density_rows(const PairwiseModel& model,
                                             std::span<const double> kernel_betas,
                                             std::span<const SpinState> targets,
                                             std::span<const SpinState> anchors,
                                             const SweepOrder& order, int threads = 0);
std::vector<double> mixture_log_density_rows_serial(const PairwiseModel& model,
                                                    std::span<const double> kernel_betas,
                                                    std::span<const SpinState> targets,
                                                    std::span<const SpinState> anchors,
                                                    const SweepOrder& order);

struct MovedSample {
    SpinState state; // Y-tilde, the post-sweep state
    SpinState origin; // the selected state the sweep started from
    int source_sequence = -1;
    double energy = 0.0;
    double log_unnorm = 0.0;   // log pi-tilde(Y-tilde)
    double log_mixture = 0.0;  // log mu-hat(Y-tilde)
    double log_sweep_own = 0.0; // log K_G(Y-tilde | origin), from the apply
};

struct StateFunctional {
    std::string name;
    std::function<double(const SpinState&)> fn;
};

struct WeightedEstimate {
    std::vector<double> log_weights;
    double log_w = 0.0;     // log W
    double log_z_hat = 0.0; // log W - log N
    double ess = 0.0;
    int n = 0;
    std::map<std::string, double> expectations;
};

// Self-normalized importance estimates in the log domain. Expectations use
// the supplied functionals; Z-hat is W / N.
WeightedEstimate importance_estimate(std::span<const MovedSample> samples,
                                     std::span<const StateFunctional> functionals,
                                     int n);

struct LfisConfig {
    int num_sequences = 1000;              // N
    std::uint64_t samples_per_sequence = 1000; // T
    std::uint32_t gamma_min = 0;           // 0 -> paper-default bounds
    std::uint32_t gamma_max = 0;
    TabuSemantics semantics = TabuSemantics::masked_assumed;
    std::vector<double> kernel_betas;      // empty -> {target beta}
    std::uint64_t polish_flips = 0;        // optional NFW polish of selections
    int threads = 0;
    bool collect_level_masses = false;     // pooled Eq.-13 energy masses
    double level_mass_floor = 1e-12;
    SweepOrder order;                      // empty -> identity
};

struct LfisResult {
    WeightedEstimate estimate;
    std::vector<SelectedSample> selected;
    std::vector<MovedSample> moved;
    // Selection-weighted mass per quantized energy level, normalized over
    // this run's sequences (only when collect_level_masses).
    std::vector<std::pair<std::int64_t, double>> level_masses;
    SweepOrder order;
};

// End-to-end pipeline: N independent LFQGS sequences from uniform random
// initial states, one Boltzmann-selected sample per sequence, one sweep
// each, the N x N mixture densities, and the self-normalized estimates.
// Sequence l draws from rng.child(l); results are identical at any worker
// count.
LfisResult lfis_pipeline(const PairwiseModel& model, Temperature beta,
                         const LfisConfig& config, RngStream& rng,
                         std::span<const StateFunctional> functionals = {});

} // namespace lfis
